use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::subproblem::{complexify, realify, Span};
use super::{Constraints, RatioTerm};
use crate::error::{Error, Result};
use crate::wavefront::CVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub seed: u64,
    /// Objective evaluations.
    pub budget: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { seed: 0, budget: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub w: CVector,
    pub objective: f64,
    pub evaluations: usize,
}

const STARTS: usize = 4;

/// Search state in span coordinates; every candidate is mapped to a feasible
/// full-power point before it is scored.
struct Space {
    g: Vec<Vec<Complex64>>,
    t: Vec<f64>,
    h: Vec<Complex64>,
    h_norm: f64,
    p: f64,
    floor: f64,
    evals: usize,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl Space {
    fn score(&mut self, c: &[Complex64]) -> f64 {
        self.evals += 1;
        self.g
            .iter()
            .zip(&self.t)
            .map(|(g, t)| {
                let gain = dot(g, c).norm_sqr();
                if gain > 0.0 {
                    t / gain
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    }

    fn normalize(&self, c: &[Complex64]) -> Vec<Complex64> {
        let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        c.iter().map(|z| z * (self.p.sqrt() / n)).collect()
    }

    /// Full power, `hᴴc` real non-negative, then a bisection blend toward
    /// the user direction when the SINR floor is missed.
    fn project(&self, x: &DVector<f64>) -> Vec<Complex64> {
        let mut c = complexify(x);
        if c.iter().all(|z| z.norm() == 0.0) {
            c = self.h.clone();
        }
        let z = dot(&self.h, &c);
        let rot = if z.norm() > 0.0 { z.conj() / z.norm() } else { Complex64::new(1.0, 0.0) };
        let c: Vec<Complex64> = self.normalize(&c.iter().map(|v| v * rot).collect::<Vec<_>>());
        let ok = |v: &[Complex64]| dot(&self.h, v).norm_sqr() >= self.floor;
        if ok(&c) {
            return c;
        }
        let u: Vec<Complex64> = self.h.iter().map(|v| v * (self.p.sqrt() / self.h_norm)).collect();
        let blend = |th: f64| -> Vec<Complex64> {
            self.normalize(&c.iter().zip(&u).map(|(a, b)| a * (1.0 - th) + b * th).collect::<Vec<_>>())
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(&blend(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        blend(hi)
    }
}

/// Brute-force minimizer of `Σ t_i/|g_iᴴw|²` under the power and SINR
/// constraints, over the span of the `g_i` and `h_c`: random multi-start
/// followed by a shrinking coordinate pattern search from the best starts.
pub fn oracle_search(
    terms: &[RatioTerm],
    h_c: &CVector,
    cons: &Constraints,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let terms: Vec<&RatioTerm> = terms.iter().filter(|r| r.t > 0.0).collect();
    if terms.is_empty() {
        return Err(Error::InvalidArgument("every ratio has zero weight".into()));
    }
    if cons.sinr_floor > cons.p_max * h_c.norm_squared() {
        return Err(Error::Infeasible("SINR floor unreachable within the power budget".into()));
    }
    let mut gens: Vec<&CVector> = terms.iter().map(|r| &r.g).collect();
    gens.push(h_c);
    let span = Span::new(&gens);
    let h = span.coeffs(h_c);
    let h_norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut space = Space {
        g: terms.iter().map(|r| span.coeffs(&r.g)).collect(),
        t: terms.iter().map(|r| r.t).collect(),
        h,
        h_norm,
        p: cons.p_max,
        floor: cons.sinr_floor,
        evals: 0,
    };
    let d = 2 * span.dim();
    let budget = opts.budget.max(2 * STARTS);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut pool: Vec<(f64, DVector<f64>)> = Vec::new();
    while space.evals < budget / 2 {
        let x = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let c = space.project(&x);
        let f = space.score(&c);
        pool.push((f, realify(&c)));
        if pool.len() > 4 * STARTS {
            pool.sort_by(|a, b| a.0.total_cmp(&b.0));
            pool.truncate(STARTS);
        }
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    pool.truncate(STARTS);

    let scale = cons.p_max.sqrt();
    let share = (budget - space.evals) / pool.len();
    let mut best = pool[0].clone();
    for (f0, x0) in pool {
        let stop = space.evals + share;
        let (mut f, mut x) = (f0, x0);
        let mut step = 0.25 * scale;
        while step > 1e-12 * scale && space.evals + 2 * d <= stop {
            let mut improved = false;
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[i] += sign * step;
                    let c = space.project(&cand);
                    let fc = space.score(&c);
                    if fc < f {
                        f = fc;
                        x = realify(&c);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if f < best.0 {
            best = (f, x);
        }
    }
    let w = span.lift(&complexify(&best.1));
    Ok(OracleResult { w, objective: best.0, evaluations: space.evals })
}
