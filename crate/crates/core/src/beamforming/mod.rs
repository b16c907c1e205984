//! Transmit beamformer design under a communication SINR constraint.
//!
//! The sensing objective is the weighted sum of diagonal CRBs, written as a
//! sum of ratios `Σ t_i / |g_iᴴ w|²` over rank-one decompositions of the
//! derivative Gram matrices. One ratio has a closed-form optimum; several are
//! handled by the quadratic-transform iteration in [`vqf_solve`].

mod closed_form;
mod decomposition;
mod oracle;
mod subproblem;
mod vqf;

pub use closed_form::{closed_form_beamformer, Branch, ClosedFormBeam};
pub use decomposition::{decomposition_vectors, rank_one_error, DecompositionSet};
pub use oracle::{oracle_search, OracleOptions, OracleResult};
pub use subproblem::{subproblem_solve, SubproblemOptions};
pub use vqf::{auxiliary_update, vqf_solve, vqf_solve_terms, VqfOptions};

use num_complex::Complex64;

use crate::error::Result;
use crate::fisher::{closed_crbs, fim_report, ClosedCrbs, FimReport, TransmitCovariance};
use crate::geometry::AntennaLayout;
use crate::linalg::inner;
use crate::scenario::Scenario;
use crate::wavefront::{comm_channel, CVector, TargetState};

/// One ratio `t / |gᴴw|²` of the sensing objective.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTerm {
    pub g: CVector,
    pub t: f64,
}

/// `Σ t_i / |g_iᴴ w|²`; infinite when any term has no gain.
pub fn objective(terms: &[RatioTerm], w: &CVector) -> f64 {
    terms
        .iter()
        .map(|r| {
            let gain = inner(&r.g, w).norm_sqr();
            if gain > 0.0 {
                r.t / gain
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// Power budget and the received-power floor `Γσ²` at the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    pub p_max: f64,
    pub sinr_floor: f64,
}

impl Constraints {
    pub fn of(scenario: &Scenario) -> Self {
        Constraints { p_max: scenario.p_max, sinr_floor: scenario.sinr_floor() }
    }
}

/// Rotate `w` so that `h_cᴴ w` is real and non-negative.
pub fn align_phase(w: &CVector, h_c: &CVector) -> CVector {
    let z = inner(h_c, w);
    if z.norm() == 0.0 {
        return w.clone();
    }
    w * Complex64::from_polar(1.0, -z.arg())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// `|h_cᴴw|²/σ² − Γ` (linear).
    pub sinr_slack: f64,
    /// `P_max − ‖w‖²` in watts.
    pub power_slack: f64,
}

pub fn feasibility(w: &CVector, h_c: &CVector, scenario: &Scenario) -> Feasibility {
    Feasibility {
        sinr_slack: inner(h_c, w).norm_sqr() / scenario.noise_power - scenario.gamma_min,
        power_slack: scenario.p_max - w.norm_squared(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Relative objective change at the last step.
    Converged(f64),
    MaxIters,
    /// Converged with the SINR constraint inactive.
    SensingDominant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerResult {
    pub w: CVector,
    /// Surrogate objective, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub feasibility: Feasibility,
}

/// Everything needed to design a beam for one target and one user.
#[derive(Debug, Clone)]
pub struct IsacProblem {
    pub scenario: Scenario,
    pub tx: AntennaLayout,
    pub rx: AntennaLayout,
    pub target: TargetState,
    pub h_c: CVector,
}

impl IsacProblem {
    pub fn new(
        scenario: Scenario,
        tx: AntennaLayout,
        rx: AntennaLayout,
        target: TargetState,
        user: &TargetState,
    ) -> Result<Self> {
        scenario.validate()?;
        target.validate()?;
        let h_c = comm_channel(&tx, user, scenario.wavelength)?;
        Ok(IsacProblem { scenario, tx, rx, target, h_c })
    }

    pub fn decomposition(&self) -> Result<DecompositionSet> {
        decomposition_vectors(&self.tx, &self.rx, &self.target, &self.scenario)
    }

    pub fn constraints(&self) -> Constraints {
        Constraints::of(&self.scenario)
    }

    /// Numeric bounds for a given beam.
    pub fn report(&self, w: &CVector) -> Result<FimReport> {
        fim_report(&TransmitCovariance::Beam(w.clone()), &self.scenario, &self.tx, &self.rx, &self.target)
    }
}

/// Bounds under `R_x = (P_max/N_t)·I`.
#[derive(Debug, Clone)]
pub struct IsotropicBaseline {
    pub report: FimReport,
    /// `Err` when no closed form applies (non-UCA arrays, ρ near R).
    pub closed: std::result::Result<ClosedCrbs, String>,
}

pub fn isotropic_baseline(
    scenario: &Scenario,
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
) -> Result<IsotropicBaseline> {
    let cov = TransmitCovariance::Isotropic { power: scenario.p_max };
    let report = fim_report(&cov, scenario, tx, rx, target)?;
    let closed = closed_crbs(scenario, tx, rx, target, &cov).map_err(|e| e.to_string());
    Ok(IsotropicBaseline { report, closed })
}
