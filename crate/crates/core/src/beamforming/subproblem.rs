use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Constraints, RatioTerm};
use crate::error::{Error, Result};
use crate::linalg::{inner, orthonormal_basis};
use crate::wavefront::CVector;

/// Orthonormal basis of a small subspace with real coordinates
/// `[Re c; Im c]` for the complex coefficients `c`.
pub(super) struct Span {
    basis: Vec<CVector>,
}

impl Span {
    pub(super) fn new(vectors: &[&CVector]) -> Self {
        Span { basis: orthonormal_basis(vectors, 1e-10) }
    }

    pub(super) fn dim(&self) -> usize {
        self.basis.len()
    }

    pub(super) fn coeffs(&self, v: &CVector) -> Vec<Complex64> {
        self.basis.iter().map(|q| inner(q, v)).collect()
    }

    pub(super) fn lift(&self, c: &[Complex64]) -> CVector {
        let mut w = CVector::zeros(self.basis[0].len());
        for (q, cj) in self.basis.iter().zip(c) {
            w += q * *cj;
        }
        w
    }
}

pub(super) fn realify(c: &[Complex64]) -> DVector<f64> {
    let k = c.len();
    DVector::from_fn(2 * k, |i, _| if i < k { c[i].re } else { c[i - k].im })
}

pub(super) fn complexify(x: &DVector<f64>) -> Vec<Complex64> {
    let k = x.len() / 2;
    (0..k).map(|j| Complex64::new(x[j], x[k + j])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemOptions {
    /// Duality-gap tolerance relative to the starting objective.
    pub gap_tol: f64,
    /// Newton steps allowed per centering.
    pub max_newton: usize,
}

impl Default for SubproblemOptions {
    fn default() -> Self {
        SubproblemOptions { gap_tol: 1e-8, max_newton: 100 }
    }
}

/// Normalized problem in real coordinates `x = c/√P`:
/// minimize `Σ 1/(b_i·x − e_i)` over `a·x > s`, `‖x‖ < 1`.
struct Barrier {
    b: Vec<DVector<f64>>,
    e: Vec<f64>,
    sinr: Option<(DVector<f64>, f64)>,
    norm: f64,
}

impl Barrier {
    fn brackets(&self, x: &DVector<f64>) -> Vec<f64> {
        self.b.iter().zip(&self.e).map(|(b, e)| b.dot(x) - e).collect()
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        let ok_sinr = self.sinr.as_ref().is_none_or(|(a, s)| a.dot(x) > *s);
        ok_sinr && x.norm_squared() < 1.0 && self.brackets(x).iter().all(|&l| l > 0.0)
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.brackets(x).iter().map(|l| 1.0 / l).sum::<f64>() / self.norm
    }

    fn value(&self, x: &DVector<f64>, tau: f64) -> f64 {
        let mut v = tau * self.objective(x) - (1.0 - x.norm_squared()).ln();
        if let Some((a, s)) = &self.sinr {
            v -= (a.dot(x) - s).ln();
        }
        v
    }

    fn grad_hess(&self, x: &DVector<f64>, tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let d = x.len();
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (b, l) in self.b.iter().zip(self.brackets(x)) {
            let c = tau / self.norm;
            g -= b * (c / (l * l));
            h.ger(2.0 * c / (l * l * l), b, b, 1.0);
        }
        let slack = 1.0 - x.norm_squared();
        g += x * (2.0 / slack);
        for i in 0..d {
            h[(i, i)] += 2.0 / slack;
        }
        h.ger(4.0 / (slack * slack), x, x, 1.0);
        if let Some((a, s)) = &self.sinr {
            let r = a.dot(x) - s;
            g -= a / r;
            h.ger(1.0 / (r * r), a, a, 1.0);
        }
        (g, h)
    }

    fn constraint_count(&self) -> f64 {
        if self.sinr.is_some() {
            2.0
        } else {
            1.0
        }
    }
}

/// Minimizes `Σ 1/(2Re(y_i* g_iᴴw) − |y_i|² t_i)` subject to `‖w‖² ≤ P` and
/// `Re(h_cᴴw) ≥ √(Γσ²)` (no SINR constraint when the floor is zero), over the
/// span of the `g_i` and `h_c`. `start` must make every bracket positive.
pub fn subproblem_solve(
    terms: &[RatioTerm],
    y: &[Complex64],
    h_c: &CVector,
    cons: &Constraints,
    start: &CVector,
    opts: &SubproblemOptions,
) -> Result<CVector> {
    solve_in_span(terms, y, h_c, cons, start, opts, &[])
}

fn solve_in_span(
    terms: &[RatioTerm],
    y: &[Complex64],
    h_c: &CVector,
    cons: &Constraints,
    start: &CVector,
    opts: &SubproblemOptions,
    extra: &[&CVector],
) -> Result<CVector> {
    if terms.is_empty() || terms.len() != y.len() {
        return Err(Error::InvalidArgument("need one auxiliary value per ratio term".into()));
    }
    let mut gens: Vec<&CVector> = terms.iter().map(|t| &t.g).collect();
    gens.push(h_c);
    gens.extend_from_slice(extra);
    let span = Span::new(&gens);
    if span.dim() == 0 {
        return Err(Error::InvalidArgument("all generators are zero".into()));
    }
    let scale = cons.p_max.sqrt();
    let b: Vec<DVector<f64>> = terms
        .iter()
        .zip(y)
        .map(|(t, yi)| {
            let c: Vec<Complex64> = span.coeffs(&t.g).iter().map(|z| z * yi).collect();
            realify(&c) * (2.0 * scale)
        })
        .collect();
    let e: Vec<f64> = terms.iter().zip(y).map(|(t, yi)| yi.norm_sqr() * t.t).collect();
    let sinr = if cons.sinr_floor > 0.0 {
        let a = realify(&span.coeffs(h_c)) * scale;
        let s = cons.sinr_floor.sqrt();
        if a.norm() <= s {
            return Err(Error::Infeasible("SINR floor unreachable within the power budget".into()));
        }
        Some((a, s))
    } else {
        None
    };
    let mut barrier = Barrier { b, e, sinr, norm: 1.0 };

    let x0 = realify(&span.coeffs(start)) / scale;
    if let Some(i) = barrier.brackets(&x0).iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Subproblem(format!("auxiliary stale: bracket {i} is not positive at the start")));
    }
    // Pull the start strictly inside toward a central feasible point.
    let centre = match &barrier.sinr {
        Some((a, s)) => a * (0.5 * (s / a.norm() + 1.0) / a.norm()),
        None => DVector::zeros(x0.len()),
    };
    let mut theta = 1e-6;
    let mut x = loop {
        let cand = &x0 * (1.0 - theta) + &centre * theta;
        if barrier.strictly_feasible(&cand) {
            break cand;
        }
        theta *= 2.0;
        if theta > 1.0 {
            return Err(Error::Subproblem("no strictly feasible start found".into()));
        }
    };
    barrier.norm = barrier.objective(&x);

    let m = barrier.constraint_count();
    let mut tau = 1.0;
    loop {
        for _ in 0..opts.max_newton {
            let (g, h) = barrier.grad_hess(&x, tau);
            let step = match h.clone().cholesky() {
                Some(ch) => -ch.solve(&g),
                None => return Err(Error::Subproblem("barrier Hessian lost definiteness".into())),
            };
            let dec = -g.dot(&step);
            if dec / 2.0 <= 1e-12 {
                break;
            }
            let f0 = barrier.value(&x, tau);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &x + &step * t;
                if barrier.strictly_feasible(&cand) && barrier.value(&cand, tau) <= f0 - 0.25 * t * dec {
                    x = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if m / tau < opts.gap_tol {
            break;
        }
        tau *= 20.0;
    }
    let c: Vec<Complex64> = complexify(&x).iter().map(|z| z * scale).collect();
    Ok(span.lift(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::objective;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn surrogate(terms: &[RatioTerm], y: &[Complex64], w: &CVector) -> f64 {
        terms
            .iter()
            .zip(y)
            .map(|(t, yi)| 1.0 / (2.0 * (yi.conj() * inner(&t.g, w)).re - yi.norm_sqr() * t.t))
            .sum()
    }

    struct Instance {
        terms: Vec<RatioTerm>,
        y: Vec<Complex64>,
        h_c: CVector,
        cons: Constraints,
        start: CVector,
    }

    fn instance(seed: u64, n: usize, k: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<RatioTerm> =
            (0..k).map(|i| RatioTerm { g: random(&mut rng, n), t: 0.5 + i as f64 }).collect();
        let h_c = random(&mut rng, n);
        let cons = Constraints { p_max: 2.0, sinr_floor: 0.4 * 2.0 * h_c.norm_squared() };
        // Feasible start: blend of the user direction and a random beam.
        let mut start = &h_c * Complex64::new(0.9, 0.0) / Complex64::new(h_c.norm(), 0.0)
            + random(&mut rng, n) * Complex64::new(0.1, 0.0);
        start *= Complex64::new((2.0f64).sqrt() / start.norm(), 0.0);
        let start = crate::beamforming::align_phase(&start, &h_c);
        let y = terms.iter().map(|t| inner(&t.g, &start) / t.t).collect();
        Instance { terms, y, h_c, cons, start }
    }

    /// Projection onto `{Re(hᴴw) ≥ s} ∩ {‖w‖² ≤ P}` in real coordinates.
    fn project(z: &DVector<f64>, a: &DVector<f64>, s: f64, r: f64) -> DVector<f64> {
        let inside = |v: &DVector<f64>| a.dot(v) >= s - 1e-15 && v.norm() <= r * (1.0 + 1e-15);
        if inside(z) {
            return z.clone();
        }
        let ball = if z.norm() > r { z * (r / z.norm()) } else { z.clone() };
        if inside(&ball) {
            return ball;
        }
        let an = a / a.norm();
        let plane = z + &an * ((s - a.dot(z)) / a.norm());
        if inside(&plane) {
            return plane;
        }
        let c0 = &an * (s / a.norm());
        let perp = &plane - &c0;
        let rad = (r * r - c0.norm_squared()).max(0.0).sqrt();
        let pn = perp.norm();
        &c0 + perp * (rad / pn)
    }

    #[test]
    fn matches_projected_gradient() {
        let n = 32;
        let inst = instance(11, n, 3);
        let w = subproblem_solve(&inst.terms, &inst.y, &inst.h_c, &inst.cons, &inst.start, &Default::default())
            .unwrap();
        let ours = surrogate(&inst.terms, &inst.y, &w);

        // Dense projected gradient in 2n real coordinates.
        let re = |v: &CVector| DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im });
        let im = |x: &DVector<f64>| CVector::from_fn(n, |i, _| Complex64::new(x[i], x[n + i]));
        let a = re(&inst.h_c);
        let s = inst.cons.sinr_floor.sqrt();
        let r = inst.cons.p_max.sqrt();
        let bs: Vec<DVector<f64>> =
            inst.terms.iter().zip(&inst.y).map(|(t, yi)| re(&(&t.g * *yi)) * 2.0).collect();
        let es: Vec<f64> = inst.terms.iter().zip(&inst.y).map(|(t, yi)| yi.norm_sqr() * t.t).collect();
        let f = |x: &DVector<f64>| -> f64 {
            bs.iter()
                .zip(&es)
                .map(|(b, e)| {
                    let l = b.dot(x) - e;
                    if l > 0.0 {
                        1.0 / l
                    } else {
                        f64::INFINITY
                    }
                })
                .sum()
        };
        let grad = |x: &DVector<f64>| -> DVector<f64> {
            let mut g = DVector::zeros(2 * n);
            for (b, e) in bs.iter().zip(&es) {
                let l = b.dot(x) - e;
                g -= b / (l * l);
            }
            g
        };
        let mut x = re(&inst.start);
        let mut step = 1.0;
        for _ in 0..50_000 {
            let g = grad(&x);
            let fx = f(&x);
            loop {
                let cand = project(&(&x - &g * step), &a, s, r);
                let fc = f(&cand);
                if fc <= fx - 1e-4 * (&x - &cand).norm_squared() / step || step < 1e-30 {
                    x = cand;
                    break;
                }
                step *= 0.5;
            }
            step *= 2.0;
        }
        let pg = surrogate(&inst.terms, &inst.y, &im(&x));
        assert!((ours - pg).abs() / pg < 1e-5, "{ours} vs {pg}");
        assert!(ours <= pg * (1.0 + 1e-7), "{ours} vs {pg}");
    }

    #[test]
    fn extra_orthogonal_direction_changes_nothing() {
        let n = 16;
        let inst = instance(5, n, 2);
        let opts = SubproblemOptions::default();
        let w1 = subproblem_solve(&inst.terms, &inst.y, &inst.h_c, &inst.cons, &inst.start, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut extra = random(&mut rng, n);
        let mut gens: Vec<&CVector> = inst.terms.iter().map(|t| &t.g).collect();
        gens.push(&inst.h_c);
        for q in orthonormal_basis(&gens, 1e-10) {
            let c = inner(&q, &extra);
            extra -= q * c;
        }
        let w2 = solve_in_span(&inst.terms, &inst.y, &inst.h_c, &inst.cons, &inst.start, &opts, &[&extra]).unwrap();
        let f1 = surrogate(&inst.terms, &inst.y, &w1);
        let f2 = surrogate(&inst.terms, &inst.y, &w2);
        assert!((f1 - f2).abs() / f1 < 1e-8, "{f1} {f2}");
        assert!(inner(&extra, &w2).norm() < 1e-6 * w2.norm() * extra.norm());
    }

    #[test]
    fn single_term_without_sinr_is_matched_beam() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random(&mut rng, 12);
        let h_c = random(&mut rng, 12);
        let terms = vec![RatioTerm { g: g.clone(), t: 2.0 }];
        let start = random(&mut rng, 12) * Complex64::new(0.1, 0.0);
        let y = vec![inner(&g, &start) / 2.0];
        let cons = Constraints { p_max: 3.0, sinr_floor: 0.0 };
        let w = subproblem_solve(&terms, &y, &h_c, &cons, &start, &Default::default()).unwrap();
        // The bracket is linear in w, so one solve already gives the matched beam.
        let cos = inner(&g, &w).norm() / (g.norm() * w.norm());
        assert!((cos - 1.0).abs() < 1e-8, "{cos}");
        assert!((w.norm_squared() / 3.0 - 1.0).abs() < 1e-6);
        assert!((objective(&terms, &w) / (2.0 / (3.0 * g.norm_squared())) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stale_auxiliary_reported() {
        let inst = instance(3, 8, 2);
        let y: Vec<Complex64> = inst.y.iter().map(|v| -v).collect();
        let r = subproblem_solve(&inst.terms, &y, &inst.h_c, &inst.cons, &inst.start, &Default::default());
        assert!(matches!(r, Err(Error::Subproblem(_))));
    }

    #[test]
    fn unreachable_floor_is_infeasible() {
        let mut inst = instance(3, 8, 2);
        inst.cons.sinr_floor = 3.0 * inst.h_c.norm_squared();
        let r = subproblem_solve(&inst.terms, &inst.y, &inst.h_c, &inst.cons, &inst.start, &Default::default());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }
}
