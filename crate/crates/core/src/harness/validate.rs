//! Built-in invariant suite: derivative checks, norm identities, bound
//! approximations, optimizer gaps and qualitative trends.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beamforming::{
    closed_form_beamformer, isotropic_baseline, objective, oracle_search, vqf_solve, Branch, Constraints,
    IsacProblem, OracleOptions, RatioTerm, Termination, VqfOptions,
};
use crate::error::Result;
use crate::fisher::{
    closed_crbs, correlation, fim_report, norms_coplanar, norms_noncoplanar, TransmitCovariance, POLE_BAND,
};
use crate::geometry::{radius_from_spacing, uca_layout, upa_same_aperture, AntennaLayout};
use crate::linalg::inner;
use crate::scenario::{dbm_to_watts, Scenario};
use crate::wavefront::{aux_coplanar, aux_noncoplanar, comm_channel, steering, steering_bundle, CVector, TargetState};

/// Supplies steering derivatives to the derivative check, so that a faulty
/// implementation can be substituted and shown to fail.
pub trait DerivativeSource: Sync {
    /// Derivatives of the steering vector in coordinate order (ρ, φ, [y]).
    fn derivatives(&self, layout: &AntennaLayout, target: &TargetState, wavelength: f64) -> Result<Vec<CVector>>;
}

/// The library's own analytic derivatives.
pub struct LibraryDerivatives;

impl DerivativeSource for LibraryDerivatives {
    fn derivatives(&self, layout: &AntennaLayout, target: &TargetState, wavelength: f64) -> Result<Vec<CVector>> {
        Ok(steering_bundle(layout, target, wavelength)?.derivs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: String) -> Self {
        Verdict { passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub verdict: Verdict,
    pub seconds: f64,
}

pub struct Check {
    pub name: &'static str,
    pub run: fn(&dyn DerivativeSource) -> Verdict,
}

pub fn checks() -> Vec<Check> {
    vec![
        Check { name: "derivatives/steering", run: derivative_check },
        Check { name: "norms/coplanar", run: |_| norms_coplanar_check() },
        Check { name: "norms/noncoplanar", run: |_| norms_noncoplanar_check() },
        Check { name: "fim/diagonal-approx", run: |_| diagonal_check() },
        Check { name: "closed/isotropic", run: |_| closed_isotropic_check() },
        Check { name: "closed/scaling", run: |_| scaling_check() },
        Check { name: "beam/closed-form-vs-oracle", run: |_| closed_form_check() },
        Check { name: "beam/vqf-vs-oracle", run: |_| vqf_check() },
        Check { name: "trends/n-r", run: |_| trend_nr_check() },
        Check { name: "trends/power", run: |_| trend_power_check() },
        Check { name: "trends/range", run: |_| trend_range_check() },
        Check { name: "trends/uca-vs-upa", run: |_| uca_vs_upa_check() },
    ]
}

/// Run every check whose name contains `filter`.
pub fn run_suite(filter: Option<&str>, source: &dyn DerivativeSource) -> Vec<CheckOutcome> {
    checks()
        .into_iter()
        .filter(|c| filter.is_none_or(|f| c.name.contains(f)))
        .map(|c| {
            let start = Instant::now();
            let verdict = (c.run)(source);
            CheckOutcome { name: c.name, verdict, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

pub fn format_report(outcomes: &[CheckOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for o in outcomes {
        let tag = if o.verdict.passed { "PASS" } else { "FAIL" };
        s += &format!("{tag}  {:width$}  {:7.2}s  {}\n", o.name, o.seconds, o.verdict.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.verdict.passed).count();
    s += &format!("{} checks, {} failed\n", outcomes.len(), failed);
    s
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn half_wave_uca(n: usize, s: &Scenario) -> AntennaLayout {
    uca_layout(n, radius_from_spacing(n, s.wavelength / 2.0).expect("n >= 3")).expect("valid radius")
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn derivative_check(source: &dyn DerivativeSource) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let lam = Scenario::reference().wavelength;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..100 {
        let n = rng.random_range(8..=64);
        let radius = rng.random_range(0.05..0.5);
        let upa = case % 5 == 4;
        let layout = if upa { upa_same_aperture(n.max(9), radius) } else { uca_layout(n, radius) }.expect("layout");
        let rho = loop {
            let r = radius * rng.random_range(0.2..10.0);
            if (r / radius - 1.0).abs() > 0.1 {
                break r;
            }
        };
        let y = if case % 2 == 0 { 0.0 } else { radius * rng.random_range(-3.0..3.0) };
        let target = TargetState::new(rho, rng.random_range(-PI..PI), y).expect("target");
        let analytic = match source.derivatives(&layout, &target, lam) {
            Ok(d) => d,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        for (i, &c) in target.coords().iter().enumerate() {
            let h = 1e-6 * if i == 1 { 1.0 } else { target.coord(c).abs().max(radius) };
            let at = |v: f64| steering(&layout, &target.with_coord(c, v), lam).expect("steering");
            let x = target.coord(c);
            let fd = (at(x + h) - at(x - h)) / num_complex::Complex64::new(2.0 * h, 0.0);
            let err = (&analytic[i] - &fd).norm() / fd.norm().max(1e-300);
            worst = worst.max(err);
            if !(err < 1e-4) && failures.len() < 3 {
                failures.push(format!("case {case} {}: {err:.2e}", c.name()));
            }
        }
    }
    let passed = failures.is_empty() && worst < 1e-4;
    let mut detail = format!("100 configurations, worst relative error {worst:.2e} (limit 1e-4)");
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join(", "));
    }
    Verdict::new(passed, detail)
}

fn norms_coplanar_check() -> Verdict {
    let r = 0.2;
    let l = uca_layout(256, r).expect("layout");
    let mut worst = 0.0f64;
    let mut alt_best = f64::INFINITY;
    for ratio in [0.1, 0.3, 0.6, 0.9, 1.1, 2.0, 5.0, 20.0] {
        let t = TargetState::new(ratio * r, 0.37, 0.0).expect("target");
        let c = norms_coplanar(&l, &t).expect("norms");
        let (v1, v2) = aux_coplanar(&l, &t).expect("aux");
        worst = worst
            .max(rel(c.sum_v2, v2.sum()))
            .max(rel(c.sq_v2, v2.norm_squared()))
            .max(rel(c.sq_v1, v1.norm_squared()));
        alt_best = alt_best.min(rel(c.sq_v2_alt, v2.norm_squared()));
    }
    Verdict::new(
        worst <= 0.02,
        format!(
            "N = 256, worst relative error {worst:.2e} (limit 2e-2); direct sums confirm the piecewise \
             ‖v2‖² form; the 2ρ²N/(R²−ρ²) form is off by at least {:.0}% at every tested ρ/R",
            alt_best * 100.0
        ),
    )
}

fn norms_noncoplanar_check() -> Verdict {
    let l = uca_layout(256, 0.3).expect("layout");
    let (mut worst, mut zero) = (0.0f64, 0.0f64);
    for (rho, y) in [(2.0, 1.0), (0.2, 0.5), (8.0, 2.0), (0.4, 0.1), (0.3, -0.05), (30.0, 3.0)] {
        let t = TargetState::new(rho, 0.52, y).expect("target");
        let c = norms_noncoplanar(&l, &t).expect("norms");
        let (v21, v22, v23) = aux_noncoplanar(&l, &t).expect("aux");
        worst = worst
            .max(rel(c.sum_v21, v21.sum()))
            .max(rel(c.sq_v21, v21.norm_squared()))
            .max(rel(c.sq_v22, v22.norm_squared()))
            .max(rel(c.sum_v23, v23.sum()))
            .max(rel(c.sq_v23, v23.norm_squared()))
            .max(rel(c.dot_v21_v23, v21.dot(&v23)));
        zero = zero
            .max(c.sum_v22.abs() / (v22.norm() * (c.n as f64).sqrt()))
            .max(c.dot_v21_v22.abs() / (v21.norm() * v22.norm()))
            .max(c.dot_v22_v23.abs() / (v22.norm() * v23.norm()));
    }
    Verdict::new(
        worst <= 0.02 && zero < 1e-3,
        format!("N = 256, worst relative error {worst:.2e} (limit 2e-2), zero identities {zero:.2e} (limit 1e-3)"),
    )
}

fn diagonal_check() -> Verdict {
    let s = Scenario::reference();
    let l = half_wave_uca(64, &s);
    let r = l.radius().expect("uca");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut corrs = Vec::new();
    while corrs.len() < 20 {
        let ratio: f64 = rng.random_range(0.3..3.0);
        if (ratio - 1.0).abs() < POLE_BAND {
            continue;
        }
        let t = TargetState::new(ratio * r, rng.random_range(-PI..PI), 0.0).expect("target");
        let rep = fim_report(&TransmitCovariance::Isotropic { power: s.p_max }, &s, &l, &l, &t).expect("fim");
        corrs.push(correlation(&rep.position_fim, 0, 1));
    }
    let ok = corrs.iter().filter(|&&c| c < 0.05).count();
    Verdict::new(
        ok >= 18,
        format!("{ok}/20 coplanar targets with |J12|/√(J11 J22) < 0.05 (need 18), max {:.2e}", max_of(corrs)),
    )
}

fn closed_isotropic_check() -> Verdict {
    let s = Scenario::reference();
    let l = half_wave_uca(64, &s);
    let r = l.radius().expect("uca");
    let cov = TransmitCovariance::Isotropic { power: s.p_max };
    let mut worst = 0.0f64;
    let targets = [
        (0.5 * r, 0.3, 0.0),
        (2.0 * r, -1.1, 0.0),
        (5.0 * r, 2.0, 0.0),
        (1.5 * r, 0.4, 0.8 * r),
        (3.0 * r, -2.0, -1.5 * r),
        (0.6 * r, 1.0, 0.5 * r),
    ];
    for (rho, phi, y) in targets {
        let t = TargetState::new(rho, phi, y).expect("target");
        let numeric = fim_report(&cov, &s, &l, &l, &t).expect("fim");
        let closed = closed_crbs(&s, &l, &l, &t, &cov).expect("closed");
        for (a, b) in closed.crbs.iter().zip(&numeric.crbs) {
            worst = worst.max(rel(*a, *b));
        }
    }
    Verdict::new(
        worst < 0.1,
        format!("N_t = N_r = 64, worst closed-vs-numeric CRB error {worst:.2e} (limit 1e-1); piecewise ‖v2‖² form"),
    )
}

fn scaling_check() -> Verdict {
    let s = Scenario::reference();
    let tx = half_wave_uca(64, &s);
    let r = tx.radius().expect("uca");
    let crbs = |s: &Scenario, n_r: usize, t: &TargetState| {
        let rx = uca_layout(n_r, r).expect("layout");
        fim_report(&TransmitCovariance::Isotropic { power: s.p_max }, s, &tx, &rx, t).expect("fim").crbs
    };
    let mut worst_nr = 0.0f64;
    let mut worst_p = 0.0f64;
    for (rho, y) in [(0.5 * r, 0.0), (3.0 * r, 0.0), (2.0 * r, r)] {
        let t = TargetState::new(rho, 0.7, y).expect("target");
        let base = crbs(&s, 64, &t);
        let more_rx = crbs(&s, 128, &t);
        let mut s2 = s;
        s2.p_max *= 2.0;
        let more_p = crbs(&s2, 64, &t);
        for i in 0..base.len() {
            worst_nr = worst_nr.max(rel(more_rx[i], base[i] / 2.0));
            worst_p = worst_p.max(rel(more_p[i], base[i] / 2.0));
        }
    }
    let mut phis = Vec::new();
    for k in [1.5, 3.0, 6.0, 12.0] {
        for phi in [0.0, 1.0, 2.5] {
            phis.push(crbs(&s, 64, &TargetState::new(k * r, phi, 0.0).expect("target"))[1]);
        }
    }
    let lo = phis.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = max_of(phis.iter().cloned()) / lo - 1.0;
    Verdict::new(
        worst_nr < 0.03 && worst_p < 0.03 && spread < 0.03,
        format!(
            "doubling N_r: {worst_nr:.2e}, doubling P: {worst_p:.2e}, CRB_φ spread over ρ > R and φ: {spread:.2e} \
             (limits 3e-2)"
        ),
    )
}

/// Random geometry-based beamforming instance. The SINR threshold is set to
/// a random fraction of the best achievable so that the constraint matters.
pub fn random_instance(seed: u64, n_t: usize, n_r: usize, coplanar: bool) -> IsacProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::reference();
    let r = radius_from_spacing(n_t, s.wavelength / 2.0).expect("n_t >= 3");
    let tx = uca_layout(n_t, r).expect("layout");
    let rx = uca_layout(n_r, r).expect("layout");
    let rho = r * rng.random_range(1.5..20.0);
    let y = if coplanar {
        0.0
    } else {
        r * rng.random_range(0.5..5.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }
    };
    let target = TargetState::new(rho, rng.random_range(-PI..PI), y).expect("target");
    let user = TargetState::new(rng.random_range(1.0..10.0), rng.random_range(-PI..PI), 0.0).expect("user");
    let h_c = comm_channel(&tx, &user, s.wavelength).expect("channel");
    s.gamma_min = rng.random_range(0.2..0.9) * s.p_max * h_c.norm_squared() / s.noise_power;
    IsacProblem::new(s, tx, rx, target, &user).expect("instance")
}

fn closed_form_check() -> Verdict {
    let mut worst_gap = 0.0f64;
    let mut worst_slack = 0.0f64;
    let mut worst_branch = 0.0f64;
    for seed in 0..20u64 {
        let p = random_instance(1000 + seed, 32, 16, seed % 2 == 0);
        let set = p.decomposition().expect("decomposition");
        let cons = p.constraints();
        let b = closed_form_beamformer(&set.h_s, &p.h_c, &cons).expect("feasible");
        let term = [RatioTerm { g: set.h_s.clone(), t: 1.0 }];
        let o = oracle_search(&term, &p.h_c, &cons, &OracleOptions { seed, budget: 100_000 }).expect("oracle");
        let ours = inner(&set.h_s, &b.w).norm_sqr();
        let best = 1.0 / o.objective;
        worst_gap = worst_gap.max((best - ours) / ours);
        let power = (b.w.norm_squared() - cons.p_max) / cons.p_max;
        let sinr = (cons.sinr_floor - inner(&p.h_c, &b.w).norm_sqr()) / cons.sinr_floor;
        worst_slack = worst_slack.max(power).max(sinr);

        // Move the floor to the branch boundary and compare both sides.
        let boundary = inner(&p.h_c, &set.h_s).norm_sqr() * cons.p_max / set.h_s.norm_squared();
        let side = |f: f64| {
            let c = Constraints { sinr_floor: boundary * f, ..cons };
            let b = closed_form_beamformer(&set.h_s, &p.h_c, &c).expect("feasible");
            (inner(&set.h_s, &b.w).norm_sqr(), b.branch)
        };
        let (lo, bl) = side(1.0 - 1e-9);
        let (hi, bh) = side(1.0 + 1e-9);
        let jump = if bl == Branch::SensingDominant && bh == Branch::SinrActive { rel(hi, lo) } else { f64::INFINITY };
        worst_branch = worst_branch.max(jump);
    }
    Verdict::new(
        worst_gap < 1e-4 && worst_slack <= 1e-9 && worst_branch < 1e-6,
        format!(
            "20 instances (N_t = 32): oracle improvement {worst_gap:.2e} (limit 1e-4), constraint violation \
             {worst_slack:.2e} (limit 1e-9), branch jump {worst_branch:.2e} (limit 1e-6)"
        ),
    )
}

/// VQF against the oracle on 20 coplanar and 20 non-coplanar instances.
pub fn vqf_check() -> Verdict {
    let mut gaps = Vec::new();
    let mut monotone = true;
    let mut unconverged = Vec::new();
    let mut max_iters = 0;
    for coplanar in [true, false] {
        for seed in 0..20u64 {
            let p = random_instance(seed, 64, 32, coplanar);
            let r = match vqf_solve(&p, &VqfOptions::default()) {
                Ok(r) => r,
                Err(e) => {
                    unconverged.push(format!("seed {seed}: {e}"));
                    continue;
                }
            };
            monotone &= r.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
            if r.termination == Termination::MaxIters {
                unconverged.push(format!("{} seed {seed}", if coplanar { "coplanar" } else { "non-coplanar" }));
            }
            max_iters = max_iters.max(r.iterations);
            let terms = p.decomposition().expect("decomposition").terms(&p.scenario);
            let o = oracle_search(&terms, &p.h_c, &p.constraints(), &OracleOptions { seed, budget: 100_000 })
                .expect("oracle");
            gaps.push((objective(&terms, &r.w) - o.objective) / o.objective);
        }
    }
    let med = median(gaps.clone());
    let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let passed = monotone && unconverged.is_empty() && med <= 0.05 && max <= 0.15;
    let mut detail = format!(
        "40 instances: monotone {monotone}, most iterations {max_iters}, gap to oracle median {med:.2e} / max \
         {max:.2e} (limits 5e-2 / 1.5e-1)"
    );
    if !unconverged.is_empty() {
        detail += &format!("; not converged in 100 iterations: {}", unconverged.join(", "));
    }
    Verdict::new(passed, detail)
}

/// Desk-scale setup for the trend checks: N_t = 64 half-wavelength UCA.
struct Desk {
    s: Scenario,
    radius: f64,
    user: TargetState,
}

impl Desk {
    fn new() -> Self {
        let s = Scenario::reference();
        let radius = radius_from_spacing(64, s.wavelength / 2.0).expect("radius");
        Desk { s, radius, user: TargetState::new(10.0, -PI / 6.0, 0.0).expect("user") }
    }

    fn speb(&self, s: &Scenario, tx: AntennaLayout, rx: AntennaLayout, target: TargetState) -> f64 {
        let p = IsacProblem::new(*s, tx, rx, target, &self.user).expect("problem");
        let r = vqf_solve(&p, &VqfOptions::default()).expect("vqf");
        p.report(&r.w).expect("report").speb
    }

    fn uca(&self, n_r: usize, target: TargetState) -> f64 {
        let tx = uca_layout(64, self.radius).expect("layout");
        let rx = uca_layout(n_r, self.radius).expect("layout");
        self.speb(&self.s, tx, rx, target)
    }

    fn target(&self, k: f64, y: f64) -> TargetState {
        TargetState::new(k * self.radius, 0.5, y * self.radius).expect("target")
    }
}

fn strictly(v: &[f64], decreasing: bool) -> bool {
    v.windows(2).all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] })
}

fn fmt_series(v: &[f64]) -> String {
    v.iter().map(|x| format!("{:.1}", 10.0 * x.log10())).collect::<Vec<_>>().join(" > ")
}

fn trend_nr_check() -> Verdict {
    let d = Desk::new();
    let mut ok = true;
    let mut parts = Vec::new();
    for y in [0.0, 1.0] {
        let v: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| d.uca(n, d.target(4.0, y))).collect();
        ok &= strictly(&v, true);
        parts.push(format!("y = {y}R: {} dB", fmt_series(&v)));
    }
    Verdict::new(ok, format!("SPEB over N_r = 16..128: {}", parts.join("; ")))
}

fn trend_power_check() -> Verdict {
    let d = Desk::new();
    let powers = [20.0, 25.0, 30.0, 35.0, 40.0];
    let db: Vec<f64> = powers
        .iter()
        .map(|&p| {
            let mut s = d.s;
            s.p_max = dbm_to_watts(p);
            let tx = uca_layout(64, d.radius).expect("layout");
            let rx = uca_layout(32, d.radius).expect("layout");
            10.0 * d.speb(&s, tx, rx, d.target(4.0, 0.0)).log10()
        })
        .collect();
    let mx = powers.iter().sum::<f64>() / powers.len() as f64;
    let my = db.iter().sum::<f64>() / db.len() as f64;
    let num: f64 = powers.iter().zip(&db).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = powers.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = num / den;
    Verdict::new(
        (slope + 1.0).abs() <= 0.05 && strictly(&db, true),
        format!("SPEB(dB) vs P(dBm) slope {slope:.4} over 20..40 dBm (target −1 ± 0.05)"),
    )
}

fn trend_range_check() -> Verdict {
    let d = Desk::new();
    let mut ok = true;
    let mut parts = Vec::new();
    for y in [0.0, 1.0] {
        let v: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|&k| d.uca(32, d.target(k, y))).collect();
        ok &= strictly(&v, false);
        parts.push(format!("y = {y}R: {} dB", v.iter().map(|x| format!("{:.1}", 10.0 * x.log10())).collect::<Vec<_>>().join(" < ")));
    }
    Verdict::new(ok, format!("SPEB over ρ = 2R..16R: {}", parts.join("; ")))
}

fn uca_vs_upa_check() -> Verdict {
    let d = Desk::new();
    let mut worst = f64::INFINITY;
    let mut wins = 0;
    let mut total = 0;
    for n_r in [16, 32, 64, 128] {
        for k in [2.0, 4.0, 8.0, 16.0] {
            let t = d.target(k, 0.0);
            let uca = d.uca(n_r, t);
            let upa = d.speb(
                &d.s,
                upa_same_aperture(64, d.radius).expect("layout"),
                upa_same_aperture(n_r, d.radius).expect("layout"),
                t,
            );
            let gain = 10.0 * (upa / uca).log10();
            worst = worst.min(gain);
            total += 1;
            wins += (gain > 0.0) as usize;
        }
    }
    Verdict::new(
        wins == total,
        format!("UCA below same-aperture UPA in {wins}/{total} coplanar points, smallest gain {worst:.2} dB"),
    )
}

/// Isotropic SPEB for the same desk setup, for the optimized-vs-isotropic ordering.
pub fn isotropic_desk_speb(n_r: usize, k: f64) -> f64 {
    let d = Desk::new();
    let tx = uca_layout(64, d.radius).expect("layout");
    let rx = uca_layout(n_r, d.radius).expect("layout");
    isotropic_baseline(&d.s, &tx, &rx, &d.target(k, 0.0)).expect("isotropic").report.speb
}
