//! Closed-form CRBs built from receive-side norm identities and the transmit
//! auxiliary vectors.
//!
//! Every derivative has the form `Ȧ_i = j k κ_i [diag(v_ri) A − A diag(v_ti)]`
//! with real `κ_i`, so
//! `Ȧ_iᴴ Ȧ_j = k² κ_i κ_j [S_ij Ā − s_i Ā D_tj − s_j D_ti Ā + N_r D_ti Ā D_tj]`
//! where `Ā = α_t α_tᴴ`, `s_i = Σ v_ri` and `S_ij = Σ v_ri v_rj`.

use std::f64::consts::PI;

use super::norms::{norms_coplanar, norms_noncoplanar};
use super::{speb_weights, TransmitCovariance};
use crate::error::{Error, Result};
use crate::geometry::AntennaLayout;
use crate::linalg::inner;
use crate::scenario::Scenario;
use crate::wavefront::{aux_coplanar, aux_noncoplanar, steering, Case, CVector, Coord, RVector, TargetState};
use num_complex::Complex64;

/// `Re Tr(R_x [S Ā − s_i Ā D_j − s_j D_i Ā + N_r D_i Ā D_j])`.
struct TxTerms<'a> {
    alpha_t: &'a CVector,
    cov: &'a TransmitCovariance,
    n_r: f64,
}

impl TxTerms<'_> {
    fn trace(&self, s_ij: f64, s_i: f64, s_j: f64, vi: &RVector, vj: &RVector) -> f64 {
        match self.cov {
            TransmitCovariance::Beam(w) => {
                let a = inner(self.alpha_t, w);
                let bi = weighted_inner(self.alpha_t, vi, w);
                let bj = weighted_inner(self.alpha_t, vj, w);
                (a.conj() * a * s_ij - a.conj() * bj * s_i - bi.conj() * a * s_j + bi.conj() * bj * self.n_r).re
            }
            TransmitCovariance::Isotropic { power } => {
                let nt = self.alpha_t.len() as f64;
                power / nt * (s_ij * nt - s_i * vj.sum() - s_j * vi.sum() + self.n_r * vi.dot(vj))
            }
        }
    }
}

/// `α_tᴴ diag(v) w`.
fn weighted_inner(alpha: &CVector, v: &RVector, w: &CVector) -> Complex64 {
    alpha.iter().zip(v.iter()).zip(w.iter()).map(|((a, vm), wm)| a.conj() * *vm * wm).sum()
}

fn crb_from_info(j: f64) -> f64 {
    if j > 0.0 {
        1.0 / j
    } else {
        f64::INFINITY
    }
}

fn check_beam(cov: &TransmitCovariance, tx: &AntennaLayout) -> Result<()> {
    if let TransmitCovariance::Beam(w) = cov {
        if w.len() != tx.count() {
            return Err(Error::InvalidArgument("beam length does not match the transmit array".into()));
        }
    }
    Ok(())
}

fn same_circle(tx: &AntennaLayout, rx: &AntennaLayout) -> Option<f64> {
    match (tx.radius(), rx.radius()) {
        (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * a => Some(a),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoplanarClosed {
    pub rho: f64,
    pub phi: f64,
    /// Explicit isotropic formulas `(rho, phi)`, present for an isotropic
    /// covariance with both arrays on the same circle.
    pub isotropic: Option<(f64, f64)>,
}

pub fn crb_coplanar_closed(
    scenario: &Scenario,
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
    cov: &TransmitCovariance,
) -> Result<CoplanarClosed> {
    if target.case() != Case::Coplanar {
        return Err(Error::CaseMismatch("coplanar closed form needs y = 0".into()));
    }
    check_beam(cov, tx)?;
    let nr = norms_coplanar(rx, target)?;
    let (v1, v2) = aux_coplanar(tx, target)?;
    let alpha_t = steering(tx, target, scenario.wavelength)?;
    let k = 2.0 * PI / scenario.wavelength;
    let terms = TxTerms { alpha_t: &alpha_t, cov, n_r: rx.count() as f64 };
    let scale = scenario.fim_scale() * k * k;
    // Σ v_r1 vanishes by symmetry and is dropped.
    let j_phi = scale * terms.trace(nr.sq_v1, 0.0, 0.0, &v1, &v1);
    let j_rho = scale * terms.trace(nr.sq_v2, nr.sum_v2, nr.sum_v2, &v2, &v2);

    let isotropic = match (cov, same_circle(tx, rx)) {
        (TransmitCovariance::Isotropic { power }, Some(radius)) => {
            let lam2 = scenario.wavelength.powi(2);
            let base = lam2 * scenario.noise_power
                / (8.0 * PI * PI * scenario.alpha_s.norm_sqr() * rx.count() as f64 * power * scenario.snapshots as f64);
            let rho = target.rho;
            let ups = crate::special::upsilon(rho / radius);
            let f = if rho <= radius {
                1.0 - 2.0 * ups * ups
            } else {
                2.0 - radius * radius / (rho * rho) - 2.0 * ups * ups
            };
            let rho_eff = rho.min(radius);
            let phi = if rho_eff > 0.0 { base / (rho_eff * rho_eff) } else { f64::INFINITY };
            Some((base / f, phi))
        }
        _ => None,
    };
    Ok(CoplanarClosed { rho: crb_from_info(j_rho), phi: crb_from_info(j_phi), isotropic })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncoplanarCrbs {
    pub rho: f64,
    pub phi: f64,
    pub y: f64,
    /// `1/J_ρρ`, ignoring the ρ–y coupling.
    pub rho_decoupled: f64,
    /// `1/J_yy`, ignoring the ρ–y coupling.
    pub y_decoupled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncoplanarClosed {
    pub crbs: NoncoplanarCrbs,
    /// Explicit isotropic formulas, for an isotropic covariance with both
    /// arrays on the same circle.
    pub isotropic: Option<NoncoplanarCrbs>,
}

fn invert_rho_y(j_rr: f64, j_yy: f64, j_ry: f64, phi: f64) -> NoncoplanarCrbs {
    let det = j_rr * j_yy - j_ry * j_ry;
    let (rho, y) = if j_rr > 0.0 && j_yy > 0.0 && det > 1e-14 * j_rr * j_yy {
        (j_yy / det, j_rr / det)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    NoncoplanarCrbs { rho, phi, y, rho_decoupled: crb_from_info(j_rr), y_decoupled: crb_from_info(j_yy) }
}

pub fn crb_noncoplanar_closed(
    scenario: &Scenario,
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
    cov: &TransmitCovariance,
) -> Result<NoncoplanarClosed> {
    if target.case() != Case::NonCoplanar {
        return Err(Error::CaseMismatch("non-coplanar closed form needs y != 0".into()));
    }
    check_beam(cov, tx)?;
    let nr = norms_noncoplanar(rx, target)?;
    let (v21, v22, v23) = aux_noncoplanar(tx, target)?;
    let radius = rx.radius().expect("checked by norms_noncoplanar");
    let tx_radius = tx.radius().expect("checked by aux_noncoplanar");
    let alpha_t = steering(tx, target, scenario.wavelength)?;
    let k = 2.0 * PI / scenario.wavelength;
    let terms = TxTerms { alpha_t: &alpha_t, cov, n_r: rx.count() as f64 };
    let scale = scenario.fim_scale() * k * k;
    let (rho, y) = (target.rho, target.y);
    // κ_φ uses the radius of the array each vector belongs to; on a shared
    // circle both are R.
    let kappa_phi2 = radius * tx_radius * rho * rho;

    let j_rr = scale * terms.trace(nr.sq_v21, nr.sum_v21, nr.sum_v21, &v21, &v21);
    let j_pp = scale * kappa_phi2 * terms.trace(nr.sq_v22, 0.0, 0.0, &v22, &v22);
    let j_yy = scale * y * y * terms.trace(nr.sq_v23, nr.sum_v23, nr.sum_v23, &v23, &v23);
    let j_ry = scale * y * terms.trace(nr.dot_v21_v23, nr.sum_v21, nr.sum_v23, &v21, &v23);
    let crbs = invert_rho_y(j_rr, j_yy, j_ry, crb_from_info(j_pp));

    let isotropic = match (cov, same_circle(tx, rx)) {
        (TransmitCovariance::Isotropic { power }, Some(_)) => {
            let n = nr.n as f64;
            let var21 = nr.sq_v21 / n - (nr.sum_v21 / n).powi(2);
            let var23 = nr.sq_v23 / n - (nr.sum_v23 / n).powi(2);
            let cov2123 = nr.dot_v21_v23 / n - nr.sum_v21 / n * nr.sum_v23 / n;
            let c = 16.0 * PI * PI * scenario.alpha_s.norm_sqr() * scenario.snapshots as f64 * power
                * rx.count() as f64
                / (scenario.noise_power * scenario.wavelength.powi(2));
            let j_rr = c * var21;
            let j_yy = c * y * y * var23;
            let j_ry = c * y * cov2123;
            let j_pp = c * radius * radius * rho * rho * nr.sq_v22 / n;
            Some(invert_rho_y(j_rr, j_yy, j_ry, crb_from_info(j_pp)))
        }
        _ => None,
    };
    Ok(NoncoplanarClosed { crbs, isotropic })
}

/// Closed-form CRBs in coordinate order, whichever case applies. The explicit
/// isotropic formulas are used when available, the trace forms otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCrbs {
    pub coords: Vec<Coord>,
    pub crbs: Vec<f64>,
    pub speb: f64,
}

impl ClosedCrbs {
    pub fn crb(&self, c: Coord) -> Option<f64> {
        self.coords.iter().position(|&k| k == c).map(|i| self.crbs[i])
    }
}

pub fn closed_crbs(
    scenario: &Scenario,
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
    cov: &TransmitCovariance,
) -> Result<ClosedCrbs> {
    let crbs = match target.case() {
        Case::Coplanar => {
            let c = crb_coplanar_closed(scenario, tx, rx, target, cov)?;
            let (rho, phi) = c.isotropic.unwrap_or((c.rho, c.phi));
            vec![rho, phi]
        }
        Case::NonCoplanar => {
            let c = crb_noncoplanar_closed(scenario, tx, rx, target, cov)?;
            let k = c.isotropic.unwrap_or(c.crbs);
            vec![k.rho, k.phi, k.y]
        }
    };
    let speb = speb_weights(target).iter().zip(&crbs).map(|(w, c)| w * c).sum();
    Ok(ClosedCrbs { coords: target.coords().to_vec(), crbs, speb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{fim_report, correlation};
    use crate::geometry::uca_layout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (AntennaLayout, Scenario) {
        let s = Scenario::reference();
        let r = n as f64 * s.wavelength / 2.0 / (2.0 * PI);
        (uca_layout(n, r).unwrap(), s)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn coplanar_isotropic_matches_numeric() {
        let (l, s) = setup(64);
        let r = l.radius().unwrap();
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        for ratio in [0.3, 0.6, 1.5, 3.0, 10.0] {
            let t = TargetState::new(ratio * r, 0.5, 0.0).unwrap();
            let c = crb_coplanar_closed(&s, &l, &l, &t, &cov).unwrap();
            let (rho_iso, phi_iso) = c.isotropic.unwrap();
            let rep = fim_report(&cov, &s, &l, &l, &t).unwrap();
            assert!(rel(phi_iso, rep.crb(Coord::Phi).unwrap()) < 0.1, "phi {ratio}");
            assert!(rel(rho_iso, rep.crb(Coord::Rho).unwrap()) < 0.1, "rho {ratio}");
            // Trace form and explicit form agree up to sum-vs-integral error.
            assert!(rel(c.phi, phi_iso) < 0.02);
            assert!(rel(c.rho, rho_iso) < 0.02);
        }
    }

    #[test]
    fn coplanar_beam_matches_diagonal() {
        let (l, s) = setup(64);
        let r = l.radius().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for ratio in [0.5, 2.0, 4.0] {
            let t = TargetState::new(ratio * r, 1.2, 0.0).unwrap();
            let w = CVector::from_fn(64, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let cov = TransmitCovariance::Beam(w.clone());
            let c = crb_coplanar_closed(&s, &l, &l, &t, &cov).unwrap();
            let j = crate::fisher::fim_numeric(&cov, &s, &l, &l, &t).unwrap();
            // Position diagonal without nuisance elimination.
            assert!(rel(c.rho, 1.0 / j[(0, 0)]) < 0.05, "rho {ratio}");
            assert!(rel(c.phi, 1.0 / j[(1, 1)]) < 0.05, "phi {ratio}");
        }
    }

    #[test]
    fn coplanar_phi_regime_independent_of_position() {
        let (l, s) = setup(256);
        let r = l.radius().unwrap();
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        let mut vals = Vec::new();
        for ratio in [1.5, 3.0, 8.0] {
            for phi in [0.0, 1.0, 2.5] {
                let t = TargetState::new(ratio * r, phi, 0.0).unwrap();
                vals.push(crb_coplanar_closed(&s, &l, &l, &t, &cov).unwrap().phi);
            }
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        assert!((hi - lo) / lo < 0.03);
    }

    #[test]
    fn crbs_scale_inversely_with_receive_count() {
        let s = Scenario::reference();
        let r = 0.1;
        let tx = uca_layout(64, r).unwrap();
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        let t = TargetState::new(0.3, 0.5, 0.0).unwrap();
        let a = crb_coplanar_closed(&s, &tx, &uca_layout(32, r).unwrap(), &t, &cov).unwrap();
        let b = crb_coplanar_closed(&s, &tx, &uca_layout(64, r).unwrap(), &t, &cov).unwrap();
        assert!(rel(a.phi / b.phi, 2.0) < 0.03);
        assert!(rel(a.rho / b.rho, 2.0) < 0.03);
        let t = TargetState::new(0.3, 0.5, 0.2).unwrap();
        let a = crb_noncoplanar_closed(&s, &tx, &uca_layout(32, r).unwrap(), &t, &cov).unwrap();
        let b = crb_noncoplanar_closed(&s, &tx, &uca_layout(64, r).unwrap(), &t, &cov).unwrap();
        assert!(rel(a.crbs.phi / b.crbs.phi, 2.0) < 0.03);
        assert!(rel(a.crbs.rho / b.crbs.rho, 2.0) < 0.03);
        assert!(rel(a.crbs.y / b.crbs.y, 2.0) < 0.03);
    }

    #[test]
    fn noncoplanar_isotropic_matches_numeric() {
        let (l, s) = setup(64);
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        for (rho, y) in [(0.5, 0.2), (2.0, 1.0), (8.0, 2.0), (0.1, 0.3)] {
            let t = TargetState::new(rho, 0.52, y).unwrap();
            let c = crb_noncoplanar_closed(&s, &l, &l, &t, &cov).unwrap();
            let iso = c.isotropic.unwrap();
            let rep = fim_report(&cov, &s, &l, &l, &t).unwrap();
            for (closed, coord) in [(iso.rho, Coord::Rho), (iso.phi, Coord::Phi), (iso.y, Coord::Y)] {
                assert!(rel(closed, rep.crb(coord).unwrap()) < 0.1, "{coord:?} at ({rho}, {y})");
            }
            assert!(rel(c.crbs.rho, iso.rho) < 0.02);
            assert!(rel(c.crbs.y, iso.y) < 0.02);
            assert!(correlation(&rep.position_fim, 0, 1) < 0.05);
            assert!(correlation(&rep.position_fim, 1, 2) < 0.05);
        }
    }

    #[test]
    fn decoupled_values_are_inverse_diagonals() {
        let (l, s) = setup(64);
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        let t = TargetState::new(2.0, 0.52, 1.0).unwrap();
        let iso = crb_noncoplanar_closed(&s, &l, &l, &t, &cov).unwrap().isotropic.unwrap();
        let rep = fim_report(&cov, &s, &l, &l, &t).unwrap();
        assert!(rel(iso.rho_decoupled, 1.0 / rep.position_fim[(0, 0)]) < 0.02);
        assert!(rel(iso.y_decoupled, 1.0 / rep.position_fim[(2, 2)]) < 0.02);
        assert!(iso.rho > iso.rho_decoupled);
    }

    #[test]
    fn mirror_symmetry_in_y() {
        let (l, s) = setup(64);
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        let up = crb_noncoplanar_closed(&s, &l, &l, &TargetState::new(1.0, 0.3, 0.5).unwrap(), &cov).unwrap();
        let down = crb_noncoplanar_closed(&s, &l, &l, &TargetState::new(1.0, 0.3, -0.5).unwrap(), &cov).unwrap();
        assert!(rel(up.crbs.rho, down.crbs.rho) < 1e-10);
        assert!(rel(up.crbs.phi, down.crbs.phi) < 1e-10);
        assert!(rel(up.crbs.y, down.crbs.y) < 1e-10);
    }

    #[test]
    fn case_checks() {
        let (l, s) = setup(16);
        let cov = TransmitCovariance::Isotropic { power: 1.0 };
        let cop = TargetState::new(1.0, 0.0, 0.0).unwrap();
        let non = TargetState::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(crb_coplanar_closed(&s, &l, &l, &non, &cov), Err(Error::CaseMismatch(_))));
        assert!(matches!(crb_noncoplanar_closed(&s, &l, &l, &cop, &cov), Err(Error::CaseMismatch(_))));
        let r = l.radius().unwrap();
        let near = TargetState::new(r * 1.01, 0.0, 0.0).unwrap();
        assert!(matches!(crb_coplanar_closed(&s, &l, &l, &near, &cov), Err(Error::NearPole { .. })));
    }
}
