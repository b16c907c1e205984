use num_complex::Complex64;

use super::{
    align_phase, closed_form_beamformer, feasibility, objective, subproblem_solve, BeamformerResult, Constraints,
    IsacProblem, RatioTerm, SubproblemOptions, Termination,
};
use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::wavefront::CVector;

#[derive(Debug, Clone, PartialEq)]
pub struct VqfOptions {
    /// Starting beam; the closed-form angle-only beam when absent.
    pub initial: Option<CVector>,
    /// Stop when the relative objective change falls below this.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Replaces the SPEB weights (ρ, φ, [y]).
    pub weights: Option<Vec<f64>>,
    pub subproblem: SubproblemOptions,
}

impl Default for VqfOptions {
    fn default() -> Self {
        VqfOptions { initial: None, tolerance: 1e-5, max_iters: 100, weights: None, subproblem: Default::default() }
    }
}

/// `y_i = g_iᴴw / t_i`.
pub fn auxiliary_update(terms: &[RatioTerm], w: &CVector) -> Vec<Complex64> {
    terms.iter().map(|r| inner(&r.g, w) / r.t).collect()
}

/// Quadratic-transform iteration on raw ratio terms. Returns the beam, the
/// objective trace, the number of subproblem solves and the termination.
pub fn vqf_solve_terms(
    terms: &[RatioTerm],
    h_c: &CVector,
    cons: &Constraints,
    w0: &CVector,
    tolerance: f64,
    max_iters: usize,
    sub: &SubproblemOptions,
) -> Result<(CVector, Vec<f64>, usize, Termination)> {
    let terms: Vec<RatioTerm> = terms.iter().filter(|r| r.t > 0.0).cloned().collect();
    if terms.is_empty() {
        return Err(Error::InvalidArgument("every ratio has zero weight".into()));
    }
    let mut w = align_phase(w0, h_c);
    let mut f = objective(&terms, &w);
    if !f.is_finite() {
        return Err(Error::InvalidArgument("initial beam gives no gain on some ratio".into()));
    }
    let mut trace = vec![f];
    for it in 1..=max_iters {
        let y = auxiliary_update(&terms, &w);
        let next = subproblem_solve(&terms, &y, h_c, cons, &w, sub)
            .map_err(|e| Error::Subproblem(format!("iteration {it}: {e}; last objective {f:e}")))?;
        let next = align_phase(&next, h_c);
        let f_next = objective(&terms, &next);
        let rel = (f - f_next) / f;
        if f_next > f {
            // Subproblem accuracy floor: keep the better point.
            return Ok((w, trace, it, Termination::Converged(rel.abs())));
        }
        w = next;
        f = f_next;
        trace.push(f);
        if rel < tolerance {
            return Ok((w, trace, it, Termination::Converged(rel)));
        }
    }
    Ok((w, trace, max_iters, Termination::MaxIters))
}

/// Minimizes the diagonal SPEB approximation for `problem`, starting from the
/// closed-form beam for the angle term unless `opts.initial` is given.
pub fn vqf_solve(problem: &IsacProblem, opts: &VqfOptions) -> Result<BeamformerResult> {
    let mut set = problem.decomposition()?;
    if let Some(w) = &opts.weights {
        set = set.with_weights(w.clone());
    }
    let cons = problem.constraints();
    let w0 = match &opts.initial {
        Some(w) => w.clone(),
        None => closed_form_beamformer(&set.h_s, &problem.h_c, &cons)?.w,
    };
    let terms = set.terms(&problem.scenario);
    let (w, objective_trace, iterations, mut termination) =
        vqf_solve_terms(&terms, &problem.h_c, &cons, &w0, opts.tolerance, opts.max_iters, &opts.subproblem)?;
    let feas = feasibility(&w, &problem.h_c, &problem.scenario);
    if matches!(termination, Termination::Converged(_))
        && feas.sinr_slack > 1e-6 * problem.scenario.gamma_min.max(1.0)
    {
        termination = Termination::SensingDominant;
    }
    Ok(BeamformerResult { w, objective_trace, iterations, termination, feasibility: feas })
}
