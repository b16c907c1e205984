//! Spherical-wavefront propagation, steering vectors and their derivatives.
//!
//! The target sits at `(ρ cos φ, y, ρ sin φ)`. The propagation delta of element
//! `m` is `l_m = ‖p_m − p‖ − ‖p‖`, and the steering entry is `exp(−j2π l_m/λ)`.
//! For a UCA the closed auxiliary vectors are used; other layouts go through
//! the generic gradient of `l`.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{element_angle, AntennaLayout};

pub type CVector = DVector<Complex64>;
pub type RVector = DVector<f64>;

const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    Coplanar,
    NonCoplanar,
}

/// Estimated position coordinate, in the fixed order (ρ, φ, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Rho,
    Phi,
    Y,
}

impl Coord {
    pub fn name(self) -> &'static str {
        match self {
            Coord::Rho => "rho",
            Coord::Phi => "phi",
            Coord::Y => "y",
        }
    }
}

/// Cylindrical position `(ρ, φ, y)` of a sensing target or a user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub rho: f64,
    pub phi: f64,
    pub y: f64,
}

impl TargetState {
    pub fn new(rho: f64, phi: f64, y: f64) -> Result<Self> {
        let t = TargetState { rho, phi, y };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() || !self.phi.is_finite() || !self.y.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite target {self:?}")));
        }
        if self.rho < 0.0 {
            return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {}", self.rho)));
        }
        if self.y != 0.0 && self.rho == 0.0 {
            return Err(Error::DegenerateGeometry("non-coplanar target on the array axis (rho = 0)".into()));
        }
        Ok(())
    }

    pub fn case(&self) -> Case {
        if self.y == 0.0 {
            Case::Coplanar
        } else {
            Case::NonCoplanar
        }
    }

    pub fn coords(&self) -> &'static [Coord] {
        match self.case() {
            Case::Coplanar => &[Coord::Rho, Coord::Phi],
            Case::NonCoplanar => &[Coord::Rho, Coord::Phi, Coord::Y],
        }
    }

    /// Cartesian position in array coordinates `(x, y, z)`.
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.rho * self.phi.cos(), self.y, self.rho * self.phi.sin())
    }

    /// Distance from the array centre.
    pub fn range(&self) -> f64 {
        self.rho.hypot(self.y)
    }

    /// Partial derivative of the Cartesian position with respect to `c`.
    pub fn position_partial(&self, c: Coord) -> Vector3<f64> {
        let (s, co) = self.phi.sin_cos();
        match c {
            Coord::Rho => Vector3::new(co, 0.0, s),
            Coord::Phi => Vector3::new(-self.rho * s, 0.0, self.rho * co),
            Coord::Y => Vector3::new(0.0, 1.0, 0.0),
        }
    }

    pub fn with_coord(&self, c: Coord, value: f64) -> Self {
        let mut t = *self;
        match c {
            Coord::Rho => t.rho = value,
            Coord::Phi => t.phi = value,
            Coord::Y => t.y = value,
        }
        t
    }

    pub fn coord(&self, c: Coord) -> f64 {
        match c {
            Coord::Rho => self.rho,
            Coord::Phi => self.phi,
            Coord::Y => self.y,
        }
    }
}

/// `l_m` from raw 3D distances, valid for any layout.
pub fn propagation_delta_generic(layout: &AntennaLayout, target: &TargetState) -> Result<RVector> {
    target.validate()?;
    let p = target.position();
    let r = target.range();
    Ok(RVector::from_iterator(
        layout.count(),
        layout.positions.iter().map(|pm| (pm - p).norm() - r),
    ))
}

pub fn propagation_delta(layout: &AntennaLayout, target: &TargetState) -> Result<RVector> {
    target.validate()?;
    let Some(radius) = layout.radius() else {
        return propagation_delta_generic(layout, target);
    };
    let n = layout.count();
    let (rho, y) = (target.rho, target.y);
    let r0 = target.range();
    Ok(RVector::from_fn(n, |m, _| {
        let c = (element_angle(m, n) - target.phi).cos();
        let rho_ca2 = (rho * rho + radius * radius - 2.0 * rho * radius * c).max(0.0);
        match target.case() {
            Case::Coplanar => rho_ca2.sqrt() - rho,
            Case::NonCoplanar => (rho_ca2 + y * y).sqrt() - r0,
        }
    }))
}

/// Unit-modulus phase vector `exp(−j2π l/λ)`.
pub fn phase_vector(delta: &RVector, wavelength: f64) -> CVector {
    let k = 2.0 * PI / wavelength;
    delta.map(|l| Complex64::from_polar(1.0, -k * l))
}

pub fn steering(layout: &AntennaLayout, target: &TargetState, wavelength: f64) -> Result<CVector> {
    Ok(phase_vector(&propagation_delta(layout, target)?, wavelength))
}

/// Communication channel: per-element free-space amplitude `λ/(4π r_m)` times
/// the steering phase, with `r_m` the absolute element-to-user distance.
pub fn comm_channel(layout: &AntennaLayout, user: &TargetState, wavelength: f64) -> Result<CVector> {
    user.validate()?;
    let p = user.position();
    let mut dist = Vec::with_capacity(layout.count());
    for (m, pm) in layout.positions.iter().enumerate() {
        let d = (pm - p).norm();
        if d <= 1e-12 * (1.0 + pm.norm()) {
            return Err(Error::SingularChannel { element: m });
        }
        dist.push(d);
    }
    let phase = steering(layout, user, wavelength)?;
    Ok(CVector::from_fn(layout.count(), |m, _| phase[m] * (wavelength / (4.0 * PI * dist[m]))))
}

/// Coplanar UCA auxiliary vectors `(v₁, v₂)`:
/// `v₁ = Rρ sin(φ_m − φ)/ρ_m`, `v₂ = (ρ − R cos(φ_m − φ))/ρ_m − 1`.
pub fn aux_coplanar(layout: &AntennaLayout, target: &TargetState) -> Result<(RVector, RVector)> {
    target.validate()?;
    let radius = require_uca(layout)?;
    if target.case() != Case::Coplanar {
        return Err(Error::CaseMismatch("coplanar auxiliary vectors need y = 0".into()));
    }
    let n = layout.count();
    let rho = target.rho;
    let mut v1 = RVector::zeros(n);
    let mut v2 = RVector::zeros(n);
    for m in 0..n {
        let (s, c) = (element_angle(m, n) - target.phi).sin_cos();
        let d = (rho * rho + radius * radius - 2.0 * rho * radius * c).max(0.0).sqrt();
        if d <= 1e-12 * radius {
            return Err(Error::CoincidentTarget { element: m });
        }
        v1[m] = radius * rho * s / d;
        v2[m] = (rho - radius * c) / d - 1.0;
    }
    Ok((v1, v2))
}

/// Non-coplanar UCA auxiliary vectors `(v₂₁, v₂₂, v₂₃)`.
pub fn aux_noncoplanar(layout: &AntennaLayout, target: &TargetState) -> Result<(RVector, RVector, RVector)> {
    target.validate()?;
    let radius = require_uca(layout)?;
    if target.case() != Case::NonCoplanar {
        return Err(Error::CaseMismatch("non-coplanar auxiliary vectors need y != 0".into()));
    }
    let n = layout.count();
    let (rho, y) = (target.rho, target.y);
    let rs = target.range();
    let mut v21 = RVector::zeros(n);
    let mut v22 = RVector::zeros(n);
    let mut v23 = RVector::zeros(n);
    for m in 0..n {
        let (s, c) = (target.phi - element_angle(m, n)).sin_cos();
        let rm = (rho * rho + radius * radius - 2.0 * rho * radius * c + y * y).sqrt();
        v21[m] = rho / rs - (rho - radius * c) / rm;
        v22[m] = s / rm;
        v23[m] = 1.0 / rs - 1.0 / rm;
    }
    Ok((v21, v22, v23))
}

fn require_uca(layout: &AntennaLayout) -> Result<f64> {
    layout
        .radius()
        .ok_or_else(|| Error::InvalidArgument("auxiliary vectors are defined for UCA layouts only".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuxVectors {
    Coplanar { v1: RVector, v2: RVector },
    NonCoplanar { v21: RVector, v22: RVector, v23: RVector },
}

impl AuxVectors {
    pub fn case(&self) -> Case {
        match self {
            AuxVectors::Coplanar { .. } => Case::Coplanar,
            AuxVectors::NonCoplanar { .. } => Case::NonCoplanar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringBundle {
    pub alpha: CVector,
    /// Closed auxiliary vectors (UCA only).
    pub aux: Option<AuxVectors>,
    /// One derivative per coordinate in `target.coords()` order.
    pub derivs: Vec<CVector>,
}

/// Derivatives from auxiliary vectors with the prefactors
/// coplanar: ρ → −j2π/λ·v₂, φ → +j2π/λ·v₁;
/// non-coplanar: ρ → j2π/λ·v₂₁, φ → −j2πRρ/λ·v₂₂, y → j2πy/λ·v₂₃.
///
/// The coplanar ρ prefactor is negative because `v₂ = +∂l/∂ρ`.
pub fn steering_derivatives(
    alpha: &CVector,
    aux: &AuxVectors,
    target: &TargetState,
    radius: f64,
    wavelength: f64,
) -> Result<Vec<CVector>> {
    if aux.case() != target.case() {
        return Err(Error::CaseMismatch(format!(
            "auxiliary vectors are {:?} but target is {:?}",
            aux.case(),
            target.case()
        )));
    }
    let jk = J * (2.0 * PI / wavelength);
    let scaled = |v: &RVector, s: Complex64| -> CVector {
        CVector::from_fn(alpha.len(), |m, _| s * v[m] * alpha[m])
    };
    Ok(match aux {
        AuxVectors::Coplanar { v1, v2 } => vec![scaled(v2, -jk), scaled(v1, jk)],
        AuxVectors::NonCoplanar { v21, v22, v23 } => vec![
            scaled(v21, jk),
            scaled(v22, -jk * radius * target.rho),
            scaled(v23, jk * target.y),
        ],
    })
}

/// Gradient `∂l/∂θ` for each coordinate from raw 3D geometry.
pub fn delta_gradients(layout: &AntennaLayout, target: &TargetState) -> Result<Vec<RVector>> {
    target.validate()?;
    let p = target.position();
    let r = target.range();
    let mut dist = Vec::with_capacity(layout.count());
    for (m, pm) in layout.positions.iter().enumerate() {
        let d = (p - pm).norm();
        if d <= 1e-12 * (1.0 + pm.norm()) {
            return Err(Error::CoincidentTarget { element: m });
        }
        dist.push(d);
    }
    Ok(target
        .coords()
        .iter()
        .map(|&c| {
            let dp = target.position_partial(c);
            // ∂‖p‖/∂θ in cylindrical form; ρ = 0 on the plane is the limit 1.
            let dref = match c {
                Coord::Rho if r > 0.0 => target.rho / r,
                Coord::Rho => 1.0,
                Coord::Phi => 0.0,
                Coord::Y => target.y / r,
            };
            RVector::from_fn(layout.count(), |m, _| {
                (p - layout.positions[m]).dot(&dp) / dist[m] - dref
            })
        })
        .collect())
}

/// Steering vector, auxiliary vectors (UCA) and derivatives.
pub fn steering_bundle(layout: &AntennaLayout, target: &TargetState, wavelength: f64) -> Result<SteeringBundle> {
    let alpha = steering(layout, target, wavelength)?;
    match layout.radius() {
        Some(radius) => {
            let aux = match target.case() {
                Case::Coplanar => {
                    let (v1, v2) = aux_coplanar(layout, target)?;
                    AuxVectors::Coplanar { v1, v2 }
                }
                Case::NonCoplanar => {
                    let (v21, v22, v23) = aux_noncoplanar(layout, target)?;
                    AuxVectors::NonCoplanar { v21, v22, v23 }
                }
            };
            let derivs = steering_derivatives(&alpha, &aux, target, radius, wavelength)?;
            Ok(SteeringBundle { alpha, aux: Some(aux), derivs })
        }
        None => {
            let jk = J * (2.0 * PI / wavelength);
            let derivs = delta_gradients(layout, target)?
                .iter()
                .map(|g| CVector::from_fn(alpha.len(), |m, _| -jk * g[m] * alpha[m]))
                .collect();
            Ok(SteeringBundle { alpha, aux: None, derivs })
        }
    }
}
