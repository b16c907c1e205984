//! Antenna layouts in the y = 0 plane, centred on the origin.
//!
//! Element coordinates are `(x, y, z)` with `y` the array normal. UCA element
//! `m` sits at angle `2πm/N` measured from the x axis towards z.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayoutKind {
    Uca { radius: f64 },
    Upa { nx: usize, nz: usize, spacing: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaLayout {
    pub positions: Vec<Vector3<f64>>,
    pub kind: LayoutKind,
}

impl AntennaLayout {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// UCA radius, if this is a circular array.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            LayoutKind::Uca { radius } => Some(radius),
            LayoutKind::Upa { .. } => None,
        }
    }

    /// Largest element-to-element distance.
    pub fn aperture(&self) -> f64 {
        match self.kind {
            LayoutKind::Uca { radius } => 2.0 * radius,
            LayoutKind::Upa { nx, nz, spacing } => {
                let w = (nx - 1) as f64 * spacing;
                let h = (nz - 1) as f64 * spacing;
                w.hypot(h)
            }
        }
    }
}

/// Element angle `2πm/n`.
pub fn element_angle(m: usize, n: usize) -> f64 {
    2.0 * PI * m as f64 / n as f64
}

pub fn uca_layout(n: usize, radius: f64) -> Result<AntennaLayout> {
    if n < 3 {
        return Err(Error::InvalidGeometry(format!("UCA needs at least 3 elements, got {n}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidGeometry(format!("UCA radius must be positive, got {radius}")));
    }
    let positions = (0..n)
        .map(|m| {
            let a = element_angle(m, n);
            Vector3::new(radius * a.cos(), 0.0, radius * a.sin())
        })
        .collect();
    Ok(AntennaLayout { positions, kind: LayoutKind::Uca { radius } })
}

/// Regular `nx × nz` grid in the x–z plane, centred on the origin.
pub fn upa_layout(nx: usize, nz: usize, spacing: f64) -> Result<AntennaLayout> {
    if nx == 0 || nz == 0 || nx * nz < 2 {
        return Err(Error::InvalidGeometry(format!("UPA needs at least 2 elements, got {nx}x{nz}")));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidGeometry(format!("UPA spacing must be positive, got {spacing}")));
    }
    let cx = (nx - 1) as f64 / 2.0;
    let cz = (nz - 1) as f64 / 2.0;
    let mut positions = Vec::with_capacity(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            positions.push(Vector3::new(
                (ix as f64 - cx) * spacing,
                0.0,
                (iz as f64 - cz) * spacing,
            ));
        }
    }
    Ok(AntennaLayout { positions, kind: LayoutKind::Upa { nx, nz, spacing } })
}

/// Square UPA whose diagonal equals the UCA diameter `2·radius`.
///
/// Side counts are `⌈√n⌉ × ⌊n/⌈√n⌉⌋`, so the element count can fall slightly
/// short of `n` when `n` is not a product of near-equal factors.
pub fn upa_same_aperture(n: usize, radius: f64) -> Result<AntennaLayout> {
    if n < 4 {
        return Err(Error::InvalidGeometry(format!("same-aperture UPA needs at least 4 elements, got {n}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidGeometry(format!("radius must be positive, got {radius}")));
    }
    let nx = (n as f64).sqrt().ceil() as usize;
    let nz = n / nx;
    let side = 2.0 * radius / 2f64.sqrt();
    let spacing = side / (nx.max(nz) - 1) as f64;
    upa_layout(nx, nz, spacing)
}

pub fn radius_from_spacing(n: usize, d: f64) -> Result<f64> {
    if n < 3 || !(d > 0.0) {
        return Err(Error::InvalidGeometry(format!("need n >= 3 and d > 0, got n = {n}, d = {d}")));
    }
    Ok(n as f64 * d / (2.0 * PI))
}

pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(aperture > 0.0) || !(wavelength > 0.0) {
        return Err(Error::InvalidGeometry("aperture and wavelength must be positive".into()));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}
