//! Slepian–Bangs Fisher information for the echo model
//! `m = α_s α_r α_tᴴ X`, nuisance elimination, and the SPEB.
//!
//! Parameters are ordered `(ρ, φ[, y], Re α_s, Im α_s)`.

mod closed;
mod norms;

pub use closed::{
    closed_crbs, crb_coplanar_closed, crb_noncoplanar_closed, ClosedCrbs, CoplanarClosed, NoncoplanarClosed, NoncoplanarCrbs,
};
pub use norms::{norms_coplanar, norms_noncoplanar, CoplanarNorms, NoncoplanarNorms, POLE_BAND};

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::AntennaLayout;
use crate::linalg::{inner, spd_inverse};
use crate::scenario::Scenario;
use crate::wavefront::{steering_bundle, Case, CVector, Coord, TargetState};

/// Transmit covariance `R_x`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmitCovariance {
    /// `R_x = w wᴴ`.
    Beam(CVector),
    /// `R_x = (power/N_t)·I`.
    Isotropic { power: f64 },
}

impl TransmitCovariance {
    /// `bᴴ R_x a`.
    fn quad(&self, b: &CVector, a: &CVector) -> Complex64 {
        match self {
            TransmitCovariance::Beam(w) => inner(b, w) * inner(w, a),
            TransmitCovariance::Isotropic { power } => inner(b, a) * (power / b.len() as f64),
        }
    }

    pub fn power(&self) -> f64 {
        match self {
            TransmitCovariance::Beam(w) => w.norm_squared(),
            TransmitCovariance::Isotropic { power } => *power,
        }
    }
}

/// `c · a bᴴ`.
struct Outer<'a> {
    c: Complex64,
    a: &'a CVector,
    b: &'a CVector,
}

/// `Re Tr(R_x D_iᴴ D_j)` for operators given as sums of outer products.
fn gram(cov: &TransmitCovariance, di: &[Outer], dj: &[Outer]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in di {
        for q in dj {
            acc += p.c.conj() * q.c * inner(p.a, q.a) * cov.quad(q.b, p.b);
        }
    }
    acc.re
}

/// Full FIM over `(position coords, Re α_s, Im α_s)`.
pub fn fim_numeric(
    cov: &TransmitCovariance,
    scenario: &Scenario,
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
) -> Result<DMatrix<f64>> {
    if let TransmitCovariance::Beam(w) = cov {
        if w.len() != tx.count() {
            return Err(Error::InvalidArgument(format!(
                "beam has {} entries but the transmit array has {}",
                w.len(),
                tx.count()
            )));
        }
    }
    let bt = steering_bundle(tx, target, scenario.wavelength)?;
    let br = steering_bundle(rx, target, scenario.wavelength)?;
    let a = scenario.alpha_s;
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);

    let mut ops: Vec<Vec<Outer>> = bt
        .derivs
        .iter()
        .zip(&br.derivs)
        .map(|(dt, dr)| {
            vec![
                Outer { c: a, a: dr, b: &bt.alpha },
                Outer { c: a, a: &br.alpha, b: dt },
            ]
        })
        .collect();
    ops.push(vec![Outer { c: one, a: &br.alpha, b: &bt.alpha }]);
    ops.push(vec![Outer { c: j, a: &br.alpha, b: &bt.alpha }]);

    let scale = 2.0 * scenario.snapshots as f64 / scenario.noise_power;
    let n = ops.len();
    let mut fim = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let v = scale * gram(cov, &ops[i], &ops[k]);
            fim[(i, k)] = v;
            fim[(k, i)] = v;
        }
    }
    Ok(fim)
}

/// Schur complement over the trailing two (amplitude) coordinates.
/// Returns the position FIM and whether the amplitude block was singular
/// (in which case its pseudo-inverse was used).
pub fn eliminate_nuisance(full: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = full.nrows();
    assert!(n >= 2, "full FIM must include the two amplitude coordinates");
    let p = n - 2;
    let jpp = full.view((0, 0), (p, p)).into_owned();
    let jpa = full.view((0, p), (p, 2)).into_owned();
    let jaa = full.view((p, p), (2, 2)).into_owned();
    let (inv, singular) = match spd_inverse(&jaa) {
        Some(inv) => (inv, false),
        None => (pseudo_inverse(&jaa), true),
    };
    let schur = jpp - &jpa * inv * jpa.transpose();
    (symmetrize(schur), singular)
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = m.amax();
    if scale == 0.0 {
        return DMatrix::zeros(m.nrows(), m.ncols());
    }
    m.clone().pseudo_inverse(1e-12 * scale).unwrap_or_else(|_| DMatrix::zeros(m.nrows(), m.ncols()))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Jacobian rows `∇ρ, ∇φ, ∇y` with respect to Cartesian `(x, z, y)`.
pub fn projection_t(target: &TargetState) -> Result<Matrix3<f64>> {
    let rho = target.rho;
    if !(rho > 0.0) {
        return Err(Error::DegenerateGeometry("projection undefined at rho = 0".into()));
    }
    let (x, z) = (rho * target.phi.cos(), rho * target.phi.sin());
    let r2 = rho * rho;
    Ok(Matrix3::new(
        x / rho, z / rho, 0.0,
        -z / r2, x / r2, 0.0,
        0.0, 0.0, 1.0,
    ))
}

/// `tr((Tᵀ J_p T)⁻¹)` using the leading `n × n` block of `T`, `n = dim J_p`.
/// Returns infinity when the projected FIM is singular.
pub fn speb(position_fim: &DMatrix<f64>, t: &Matrix3<f64>) -> f64 {
    let n = position_fim.nrows();
    assert!(n == 2 || n == 3, "position FIM must be 2x2 or 3x3");
    let tn = DMatrix::from_fn(n, n, |i, j| t[(i, j)]);
    let j_eta = tn.transpose() * position_fim * &tn;
    match spd_inverse(&j_eta) {
        Some(inv) => inv.trace(),
        None => f64::INFINITY,
    }
}

/// SPEB weights `(1, ρ², 1)` such that SPEB = Σ wᵢ·CRBᵢ.
pub fn speb_weights(target: &TargetState) -> Vec<f64> {
    target
        .coords()
        .iter()
        .map(|c| match c {
            Coord::Phi => target.rho * target.rho,
            _ => 1.0,
        })
        .collect()
}

/// Diagonal (coplanar) or (ρ, y)-block (non-coplanar) approximation.
pub fn approximate_fim(position_fim: &DMatrix<f64>, case: Case) -> DMatrix<f64> {
    let n = position_fim.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let keep = i == j || (case == Case::NonCoplanar && matches!((i, j), (0, 2) | (2, 0)));
        if keep {
            position_fim[(i, j)]
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone)]
pub struct FimReport {
    pub coords: Vec<Coord>,
    pub full_fim: DMatrix<f64>,
    pub position_fim: DMatrix<f64>,
    pub nuisance_singular: bool,
    pub approx_fim: DMatrix<f64>,
    /// CRB per coordinate from the exact position FIM (infinite if singular).
    pub crbs: Vec<f64>,
    pub speb: f64,
    /// SPEB computed from `approx_fim`.
    pub speb_approx: f64,
}

impl FimReport {
    pub fn crb(&self, c: Coord) -> Option<f64> {
        self.coords.iter().position(|&k| k == c).map(|i| self.crbs[i])
    }
}

pub fn fim_report(
    cov: &TransmitCovariance,
    scenario: &Scenario,
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
) -> Result<FimReport> {
    let full = fim_numeric(cov, scenario, tx, rx, target)?;
    let (position, singular) = eliminate_nuisance(&full);
    let approx = approximate_fim(&position, target.case());
    let n = position.nrows();
    let crbs = match spd_inverse(&position) {
        Some(inv) => (0..n).map(|i| inv[(i, i)]).collect(),
        None => vec![f64::INFINITY; n],
    };
    let (speb_exact, speb_approx) = match projection_t(target) {
        Ok(t) => (speb(&position, &t), speb(&approx, &t)),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    Ok(FimReport {
        coords: target.coords().to_vec(),
        full_fim: full,
        position_fim: position,
        nuisance_singular: singular,
        approx_fim: approx,
        crbs,
        speb: speb_exact,
        speb_approx,
    })
}

/// `|J_ij| / √(J_ii J_jj)`.
pub fn correlation(fim: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    fim[(i, j)].abs() / (fim[(i, i)] * fim[(j, j)]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{uca_layout, wavelength};
    use crate::wavefront::steering;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_beam(n: usize, rng: &mut ChaCha8Rng) -> CVector {
        CVector::from_fn(n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn scenario() -> Scenario {
        let mut s = Scenario::reference();
        s.alpha_s = Complex64::from_polar(0.8, 0.6);
        s
    }

    #[test]
    fn zero_beam_gives_zero_fim() {
        let l = uca_layout(8, 0.05).unwrap();
        let t = TargetState::new(0.3, 0.2, 0.0).unwrap();
        let f = fim_numeric(&TransmitCovariance::Beam(CVector::zeros(8)), &scenario(), &l, &l, &t).unwrap();
        assert_eq!(f.amax(), 0.0);
        let r = fim_report(&TransmitCovariance::Beam(CVector::zeros(8)), &scenario(), &l, &l, &t).unwrap();
        assert!(r.nuisance_singular);
        assert!(r.speb.is_infinite());
    }

    #[test]
    fn linear_in_snapshots_quadratic_in_alpha() {
        let l = uca_layout(16, 0.05).unwrap();
        let t = TargetState::new(0.3, 0.2, 0.1).unwrap();
        let w = random_beam(16, &mut ChaCha8Rng::seed_from_u64(1));
        let cov = TransmitCovariance::Beam(w);
        let s = scenario();
        let f = fim_numeric(&cov, &s, &l, &l, &t).unwrap();
        let mut s2 = s;
        s2.snapshots *= 2;
        let f2 = fim_numeric(&cov, &s2, &l, &l, &t).unwrap();
        assert!((f2 - &f * 2.0).amax() < 1e-12 * f.amax());
        let mut s3 = s;
        s3.alpha_s *= 2.0;
        let f3 = fim_numeric(&cov, &s3, &l, &l, &t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(f3[(i, j)], 4.0 * f[(i, j)], max_relative = 1e-12, epsilon = 1e-9 * f.amax());
            }
        }
    }

    /// Explicit snapshot sum of (2/σ²) Re(∂mᴴ∂m) with finite-difference
    /// derivatives of the full signal matrix.
    #[test]
    fn matches_snapshot_sum_oracle() {
        let n = 16;
        let l = uca_layout(n, 0.06).unwrap();
        let s = scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in [TargetState::new(0.25, 0.7, 0.0).unwrap(), TargetState::new(0.25, 0.7, -0.2).unwrap()] {
            let w = random_beam(n, &mut rng);
            let syms: Vec<Complex64> = (0..s.snapshots)
                .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI))
                .collect();
            let signal = |t: &TargetState, alpha: Complex64| -> Vec<Complex64> {
                let at = steering(&l, t, s.wavelength).unwrap();
                let ar = steering(&l, t, s.wavelength).unwrap();
                let g = inner(&at, &w);
                let mut out = Vec::new();
                for sym in &syms {
                    for m in 0..n {
                        out.push(alpha * ar[m] * g * sym);
                    }
                }
                out
            };
            let coords = t.coords();
            let mut derivs: Vec<Vec<Complex64>> = coords
                .iter()
                .map(|&c| {
                    let h = 1e-7 * if c == Coord::Phi { 1.0 } else { t.coord(c).abs() };
                    let p = signal(&t.with_coord(c, t.coord(c) + h), s.alpha_s);
                    let m = signal(&t.with_coord(c, t.coord(c) - h), s.alpha_s);
                    p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
                })
                .collect();
            derivs.push(signal(&t, Complex64::new(1.0, 0.0)));
            derivs.push(signal(&t, Complex64::new(0.0, 1.0)));
            let k = derivs.len();
            let oracle = DMatrix::from_fn(k, k, |i, j| {
                2.0 / s.noise_power
                    * derivs[i].iter().zip(&derivs[j]).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
            });
            let f = fim_numeric(&TransmitCovariance::Beam(w.clone()), &s, &l, &l, &t).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let tol = 1e-6 * (oracle[(i, i)] * oracle[(j, j)]).sqrt();
                    assert!((f[(i, j)] - oracle[(i, j)]).abs() < tol, "({i},{j}) {} vs {}", f[(i, j)], oracle[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn isotropic_equals_average_of_basis_beams() {
        let n = 12;
        let l = uca_layout(n, 0.05).unwrap();
        let t = TargetState::new(0.2, 0.4, 0.1).unwrap();
        let s = scenario();
        let p = 0.3;
        let iso = fim_numeric(&TransmitCovariance::Isotropic { power: p }, &s, &l, &l, &t).unwrap();
        let mut sum = DMatrix::zeros(5, 5);
        for k in 0..n {
            let mut e = CVector::zeros(n);
            e[k] = Complex64::new((p / n as f64).sqrt(), 0.0);
            sum += fim_numeric(&TransmitCovariance::Beam(e), &s, &l, &l, &t).unwrap();
        }
        assert!((iso - &sum).amax() < 1e-10 * sum.amax());
    }

    #[test]
    fn schur_hand_case() {
        // One position coordinate padded with an uncoupled unit nuisance.
        let full = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let (p, singular) = eliminate_nuisance(&full);
        assert!(!singular);
        assert_relative_eq!(p[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn schur_block_diagonal_unchanged() {
        let full = DMatrix::from_row_slice(
            4,
            4,
            &[3.0, 0.5, 0.0, 0.0, 0.5, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5],
        );
        let (p, _) = eliminate_nuisance(&full);
        assert!((p - full.view((0, 0), (2, 2))).amax() < 1e-15);
    }

    #[test]
    fn schur_inverse_matches_full_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = DMatrix::from_fn(5, 7, |_, _| rng.random::<f64>() - 0.5);
            let full = &a * a.transpose();
            let (p, _) = eliminate_nuisance(&full);
            let pinv = p.try_inverse().unwrap();
            let finv = full.try_inverse().unwrap();
            assert!((pinv - finv.view((0, 0), (3, 3))).amax() < 1e-10 * finv.amax());
        }
    }

    #[test]
    fn projection_examples() {
        let t = projection_t(&TargetState::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert!((t - Matrix3::identity()).amax() < 1e-15);
        let t = projection_t(&TargetState::new(1.0, PI / 2.0, 0.0).unwrap()).unwrap();
        let expect = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((t - expect).amax() < 1e-15);
        assert!(projection_t(&TargetState::new(0.0, 0.0, 0.0).unwrap()).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rho = 0.01 + 10.0 * rng.random::<f64>();
            let t = TargetState::new(rho, rng.random::<f64>() * 7.0, rng.random::<f64>() - 0.5).unwrap();
            assert_relative_eq!(projection_t(&t).unwrap().determinant(), 1.0 / rho, max_relative = 1e-12);
        }
    }

    #[test]
    fn speb_diagonal_identity() {
        let j = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0, 5.0]));
        assert_relative_eq!(speb(&j, &Matrix3::identity()), 0.5 + 0.25 + 0.2, epsilon = 1e-15);
    }

    #[test]
    fn speb_equals_weighted_crbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for y in [0.0, 0.4] {
            let t = TargetState::new(1.7, 0.9, y).unwrap();
            let n = t.coords().len();
            let a = DMatrix::from_fn(n, n + 2, |_, _| rng.random::<f64>());
            let j = &a * a.transpose();
            let inv = j.clone().try_inverse().unwrap();
            let weighted: f64 = speb_weights(&t).iter().enumerate().map(|(i, w)| w * inv[(i, i)]).sum();
            assert_relative_eq!(speb(&j, &projection_t(&t).unwrap()), weighted, max_relative = 1e-10);
            // Diagonal J: same identity through the approximation path.
            let d = approximate_fim(&j, Case::Coplanar);
            let wd: f64 = speb_weights(&t).iter().enumerate().map(|(i, w)| w / d[(i, i)]).sum();
            assert_relative_eq!(speb(&d, &projection_t(&t).unwrap()), wd, max_relative = 1e-10);
        }
    }

    #[test]
    fn approx_keeps_rho_y_block() {
        let j = DMatrix::from_fn(3, 3, |i, k| 1.0 + (i + k) as f64);
        let a = approximate_fim(&j, Case::NonCoplanar);
        assert_eq!(a[(0, 2)], j[(0, 2)]);
        assert_eq!(a[(2, 0)], j[(2, 0)]);
        assert_eq!(a[(0, 1)], 0.0);
        assert_eq!(a[(1, 2)], 0.0);
        let c = approximate_fim(&j.view((0, 0), (2, 2)).into_owned(), Case::Coplanar);
        assert_eq!(c[(0, 1)], 0.0);
    }

    #[test]
    fn isotropic_speb_rotation_invariant() {
        let lam = wavelength(28e9);
        let l = uca_layout(64, 32.0 * lam / (2.0 * PI)).unwrap();
        let s = scenario();
        let cov = TransmitCovariance::Isotropic { power: s.p_max };
        let vals: Vec<f64> = (0..8)
            .map(|i| {
                let t = TargetState::new(0.4, i as f64 * PI / 4.0 + 0.1, 0.0).unwrap();
                fim_report(&cov, &s, &l, &l, &t).unwrap().speb
            })
            .collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi - lo) / lo < 0.03);
    }

    #[test]
    fn full_fim_is_psd() {
        let l = uca_layout(16, 0.05).unwrap();
        let t = TargetState::new(0.3, 1.0, 0.05).unwrap();
        let w = random_beam(16, &mut ChaCha8Rng::seed_from_u64(9));
        let f = fim_numeric(&TransmitCovariance::Beam(w), &scenario(), &l, &l, &t).unwrap();
        assert!((&f - f.transpose()).amax() == 0.0);
        let eig = f.symmetric_eigenvalues();
        assert!(eig.min() > -1e-10 * eig.max());
    }
}
