//! Closed-form sums of the UCA auxiliary vectors, valid in the many-element
//! limit where element sums become integrals over the circle.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::AntennaLayout;
use crate::special::{elliptic_e, elliptic_k, upsilon};
use crate::wavefront::{aux_noncoplanar, Case, TargetState};

/// Closed forms for coplanar targets (`‖·‖₁` is the signed sum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoplanarNorms {
    pub n: usize,
    /// `Σ v₂ = N(Υ(ρ/R) − 1)`.
    pub sum_v2: f64,
    /// `‖v₂‖² = N(3/2 − 2Υ)` for ρ < R, `N(2 − R²/(2ρ²) − 2Υ)` for ρ > R.
    pub sq_v2: f64,
    /// The alternative `2ρ²N/(R² − ρ²)`, kept for comparison only.
    pub sq_v2_alt: f64,
    /// `‖v₁‖² = N·min(ρ, R)²/2`.
    pub sq_v1: f64,
}

/// Relative half-width of the excluded band around ρ = R.
pub const POLE_BAND: f64 = 0.02;

pub fn norms_coplanar(layout: &AntennaLayout, target: &TargetState) -> Result<CoplanarNorms> {
    target.validate()?;
    let radius = layout
        .radius()
        .ok_or_else(|| Error::InvalidArgument("closed-form norms need a UCA".into()))?;
    if target.case() != Case::Coplanar {
        return Err(Error::CaseMismatch("coplanar norms need y = 0".into()));
    }
    let ratio = target.rho / radius;
    if (ratio - 1.0).abs() < POLE_BAND {
        return Err(Error::NearPole { ratio });
    }
    let n = layout.count() as f64;
    let ups = upsilon(ratio);
    let rho = target.rho;
    let second = if ratio < 1.0 {
        1.5 - 2.0 * ups
    } else {
        2.0 - radius * radius / (2.0 * rho * rho) - 2.0 * ups
    };
    Ok(CoplanarNorms {
        n: layout.count(),
        sum_v2: n * (ups - 1.0),
        sq_v2: n * second,
        sq_v2_alt: 2.0 * rho * rho * n / (radius * radius - rho * rho),
        sq_v1: n * rho.min(radius).powi(2) / 2.0,
    })
}

/// Circle averages over `x = φ − φ_m` with `r² = γ₂ − γ₁ cos x`, `u = ρ − R cos x`.
#[derive(Debug, Clone, Copy)]
struct Moments {
    inv_r: f64,
    inv_r2: f64,
    sin2_r2: f64,
    u_r: f64,
    u_r2: f64,
    u2_r2: f64,
}

fn moments(radius: f64, rho: f64, y: f64) -> Result<Moments> {
    let g1 = 2.0 * radius * rho;
    let g2 = y * y + rho * rho + radius * radius;
    let disc = ((g2 - g1) * (g2 + g1)).sqrt();
    if !(disc > 0.0) {
        return Err(Error::DegenerateGeometry("gamma2 must exceed gamma1".into()));
    }
    let k = (2.0 * g1 / (g2 + g1)).sqrt();
    let inv_r = 2.0 * elliptic_k(k)? / (PI * (g2 + g1).sqrt());
    let mean_r = 2.0 * (g2 + g1).sqrt() * elliptic_e(k)? / PI;
    let inv_r2 = 1.0 / disc;
    // (γ₂ − √(γ₂² − γ₁²))/γ₁², written to avoid cancellation when γ₁ ≪ γ₂.
    let sin2_r2 = 1.0 / (g2 + disc);
    // ρ − R cos x = (2ρ² − γ₂ + r²)/(2ρ).
    let c = (2.0 * rho * rho - g2) / (2.0 * rho);
    Ok(Moments {
        inv_r,
        inv_r2,
        sin2_r2,
        u_r: c * inv_r + mean_r / (2.0 * rho),
        u_r2: c * inv_r2 + 1.0 / (2.0 * rho),
        u2_r2: 1.0 - y * y * inv_r2 - radius * radius * sin2_r2,
    })
}

/// Closed forms for non-coplanar targets plus the directly summed
/// quantities that should vanish by symmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncoplanarNorms {
    pub n: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sum_v21: f64,
    pub sq_v21: f64,
    /// `N(γ₂ − √(γ₂² − γ₁²))/γ₁²`.
    pub sq_v22: f64,
    pub sum_v23: f64,
    pub sq_v23: f64,
    pub dot_v21_v23: f64,
    /// `N(ρ/r_s − 2ρK/(π√(γ₂+γ₁)))`, which drops the `R cos` part of v₂₁.
    /// Kept for comparison only.
    pub sum_v21_alt: f64,
    pub sum_v22: f64,
    pub dot_v21_v22: f64,
    pub dot_v22_v23: f64,
}

pub fn norms_noncoplanar(layout: &AntennaLayout, target: &TargetState) -> Result<NoncoplanarNorms> {
    let (v21, v22, v23) = aux_noncoplanar(layout, target)?;
    let radius = layout.radius().expect("checked by aux_noncoplanar");
    let (rho, y) = (target.rho, target.y);
    let rs = target.range();
    let m = moments(radius, rho, y)?;
    let n = layout.count() as f64;
    let g1 = 2.0 * radius * rho;
    let g2 = y * y + rho * rho + radius * radius;
    let k = (2.0 * g1 / (g2 + g1)).sqrt();
    Ok(NoncoplanarNorms {
        n: layout.count(),
        gamma1: g1,
        gamma2: g2,
        sum_v21: n * (rho / rs - m.u_r),
        sq_v21: n * (rho * rho / (rs * rs) - 2.0 * rho / rs * m.u_r + m.u2_r2),
        sq_v22: n * m.sin2_r2,
        sum_v23: n * (1.0 / rs - m.inv_r),
        sq_v23: n * (1.0 / (rs * rs) - 2.0 / rs * m.inv_r + m.inv_r2),
        dot_v21_v23: n * (rho / (rs * rs) - rho / rs * m.inv_r - m.u_r / rs + m.u_r2),
        sum_v21_alt: n * (rho / rs - 2.0 * rho * elliptic_k(k)? / (PI * (g2 + g1).sqrt())),
        sum_v22: v22.sum(),
        dot_v21_v22: v21.dot(&v22),
        dot_v22_v23: v22.dot(&v23),
    })
}
