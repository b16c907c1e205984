use num_complex::Complex64;

use super::{align_phase, Constraints};
use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::wavefront::CVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The matched beam already meets the SINR floor.
    SensingDominant,
    /// The SINR constraint is tight.
    SinrActive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormBeam {
    pub w: CVector,
    pub branch: Branch,
}

/// Maximizes `|h_sᴴw|²` subject to `‖w‖² ≤ P` and `|h_cᴴw|² ≥ Γσ²`.
/// The result is phase-rotated so that `h_cᴴw` is real and non-negative.
pub fn closed_form_beamformer(h_s: &CVector, h_c: &CVector, cons: &Constraints) -> Result<ClosedFormBeam> {
    if h_s.len() != h_c.len() {
        return Err(Error::InvalidArgument("h_s and h_c differ in length".into()));
    }
    let (ns2, nc2) = (h_s.norm_squared(), h_c.norm_squared());
    if !(ns2 > 0.0) || !(nc2 > 0.0) {
        return Err(Error::InvalidArgument("h_s and h_c must be nonzero".into()));
    }
    let p = cons.p_max;
    let floor = cons.sinr_floor;
    if floor > p * nc2 {
        return Err(Error::Infeasible(format!(
            "SINR floor {floor:e} W exceeds the best achievable {:e} W",
            p * nc2
        )));
    }
    let cross = inner(h_c, h_s);
    let matched = || h_s * Complex64::new((p / ns2).sqrt(), 0.0);
    if cross.norm_sqr() * p >= ns2 * floor {
        return Ok(ClosedFormBeam { w: align_phase(&matched(), h_c), branch: Branch::SensingDominant });
    }

    let u_c = h_c / Complex64::new(nc2.sqrt(), 0.0);
    let along = inner(&u_c, h_s);
    let resid = h_s - &u_c * along;
    let rn = resid.norm();
    if rn <= 1e-14 * ns2.sqrt() {
        // h_s ∥ h_c: feasibility already implies the dominant branch.
        return Ok(ClosedFormBeam { w: align_phase(&matched(), h_c), branch: Branch::SensingDominant });
    }
    let a_s = resid / Complex64::new(rn, 0.0);
    let x2_mag = (floor / nc2).sqrt();
    let x1_mag = (p - x2_mag * x2_mag).max(0.0).sqrt();
    let phase = |z: Complex64| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
    let w = &a_s * (phase(inner(&a_s, h_s)) * x1_mag) + &u_c * (phase(along) * x2_mag);
    Ok(ClosedFormBeam { w: align_phase(&w, h_c), branch: Branch::SinrActive })
}
