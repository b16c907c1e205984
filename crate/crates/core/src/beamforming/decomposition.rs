use std::f64::consts::PI;

use num_complex::Complex64;

use super::RatioTerm;
use crate::error::Result;
use crate::fisher::speb_weights;
use crate::geometry::AntennaLayout;
use crate::linalg::inner;
use crate::scenario::Scenario;
use crate::wavefront::{delta_gradients, steering, Case, CVector, RVector, TargetState};

/// Rank-one stand-ins for the derivative Gram matrices `Ȧ_iᴴȦ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionSet {
    pub case: Case,
    /// Angle vector: `G|h_sᴴw|²` tracks `wᴴȦ_φᴴȦ_φw`, with `G = angle_gain`.
    pub h_s: CVector,
    /// Projected range vector: `|α̃_ρᴴw|²` tracks `wᴴȦ_ρᴴȦ_ρw`.
    pub alpha_rho: CVector,
    pub alpha_y: Option<CVector>,
    /// SPEB weights in coordinate order (ρ, φ, [y]).
    pub weights: Vec<f64>,
    /// `4π²N_r/λ²`.
    pub angle_gain: f64,
}

impl DecompositionSet {
    /// Ratio terms in coordinate order, scaled so the objective is the
    /// diagonal SPEB approximation in m².
    pub fn terms(&self, scenario: &Scenario) -> Vec<RatioTerm> {
        let scale = scenario.fim_scale();
        let mut g = vec![
            self.alpha_rho.clone(),
            &self.h_s * Complex64::new(self.angle_gain.sqrt(), 0.0),
        ];
        if let Some(a) = &self.alpha_y {
            g.push(a.clone());
        }
        g.into_iter().zip(&self.weights).map(|(g, w)| RatioTerm { g, t: w / scale }).collect()
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.weights.len(), "one weight per coordinate");
        self.weights = weights;
        self
    }
}

fn derivative(alpha: &CVector, grad: &RVector, k: f64) -> CVector {
    CVector::from_fn(alpha.len(), |m, _| alpha[m] * Complex64::new(0.0, -k * grad[m]))
}

pub fn decomposition_vectors(
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
    scenario: &Scenario,
) -> Result<DecompositionSet> {
    let lam = scenario.wavelength;
    let k = 2.0 * PI / lam;
    let alpha_t = steering(tx, target, lam)?;
    let alpha_r = steering(rx, target, lam)?;
    let gt = delta_gradients(tx, target)?;
    let gr = delta_gradients(rx, target)?;
    let (nt, nr) = (tx.count() as f64, rx.count() as f64);

    // h_s = c α_t + α_t ⊙ u with u = −∂_φ l_t and c² = ‖∂_φ l_r‖²/N_r.
    let c = (gr[1].norm_squared() / nr).sqrt();
    let h_s = CVector::from_fn(tx.count(), |m, _| alpha_t[m] * (c - gt[1][m]));

    // α̃ = √(‖Ȧα_t‖²)/N_t · α_t.
    let project = |i: usize| {
        let dt = derivative(&alpha_t, &gt[i], k);
        let dr = derivative(&alpha_r, &gr[i], k);
        let v = &dr * Complex64::new(nt, 0.0) + &alpha_r * inner(&dt, &alpha_t);
        &alpha_t * Complex64::new(v.norm() / nt, 0.0)
    };
    let alpha_rho = project(0);
    let alpha_y = (target.case() == Case::NonCoplanar).then(|| project(2));

    Ok(DecompositionSet {
        case: target.case(),
        h_s,
        alpha_rho,
        alpha_y,
        weights: speb_weights(target),
        angle_gain: k * k * nr,
    })
}

/// `|wᴴȦ_φᴴȦ_φw − G|h_sᴴw|²| / wᴴȦ_φᴴȦ_φw` for one beam.
pub fn rank_one_error(
    tx: &AntennaLayout,
    rx: &AntennaLayout,
    target: &TargetState,
    scenario: &Scenario,
    set: &DecompositionSet,
    w: &CVector,
) -> Result<f64> {
    let lam = scenario.wavelength;
    let k = 2.0 * PI / lam;
    let alpha_t = steering(tx, target, lam)?;
    let alpha_r = steering(rx, target, lam)?;
    let dt = derivative(&alpha_t, &delta_gradients(tx, target)?[1], k);
    let dr = derivative(&alpha_r, &delta_gradients(rx, target)?[1], k);
    let exact = (&dr * inner(&alpha_t, w) + &alpha_r * inner(&dt, w)).norm_squared();
    let approx = set.angle_gain * inner(&set.h_s, w).norm_sqr();
    Ok((exact - approx).abs() / exact)
}
