//! Sweep execution and CSV output.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Method, SweepConfig, SweepPoint};
use crate::beamforming::{
    closed_form_beamformer, isotropic_baseline, objective, oracle_search, vqf_solve, Constraints, IsacProblem,
    OracleOptions, Termination, VqfOptions,
};
use crate::error::{Error, Result};
use crate::fisher::{closed_crbs, ClosedCrbs, FimReport, TransmitCovariance};
use crate::wavefront::{Coord, TargetState};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_index: usize,
    pub target_index: usize,
    pub axis: String,
    pub value: String,
    pub method: Method,
    pub array: String,
    pub n_t: usize,
    pub n_r: usize,
    pub target: TargetState,
    /// Numeric CRBs for (ρ, φ, y); `None` where the case lacks the coordinate.
    pub crb: [Option<f64>; 3],
    pub crb_closed: [Option<f64>; 3],
    pub speb: Option<f64>,
    /// SPEB from the diagonal FIM approximation.
    pub speb_diag: Option<f64>,
    pub objective: Option<f64>,
    /// Solver iterations (VQF) or objective evaluations (oracle).
    pub iterations: Option<usize>,
    pub status: String,
    pub flags: Vec<String>,
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn speb_db(&self) -> Option<f64> {
        self.speb.map(|s| 10.0 * s.log10())
    }
}

/// Run-time options that do not belong in the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Thread count from `NFISAC_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("NFISAC_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config {
                path: "NFISAC_THREADS".into(),
                message: format!("expected a positive integer, got {v:?}"),
            }),
        },
    }
}

fn coord_triplet(coords: &[Coord], values: &[f64]) -> [Option<f64>; 3] {
    let mut out = [None; 3];
    for (c, v) in coords.iter().zip(values) {
        let i = match c {
            Coord::Rho => 0,
            Coord::Phi => 1,
            Coord::Y => 2,
        };
        out[i] = Some(*v);
    }
    out
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Outcome {
    report: FimReport,
    closed: Option<ClosedCrbs>,
    objective: Option<f64>,
    iterations: Option<usize>,
    status: String,
    flags: Vec<String>,
}

fn closed_for(point: &SweepPoint, target: &TargetState, cov: &TransmitCovariance, flags: &mut Vec<String>) -> Option<ClosedCrbs> {
    match closed_crbs(&point.scenario, &point.tx, &point.rx, target, cov) {
        Ok(c) => Some(c),
        Err(Error::NearPole { .. }) => {
            flags.push("near_pole".into());
            None
        }
        Err(_) => None,
    }
}

fn evaluate(
    cfg: &SweepConfig,
    point: &SweepPoint,
    target: &TargetState,
    method: Method,
    seed: u64,
) -> Result<Outcome> {
    let mut flags = Vec::new();
    if method == Method::Isotropic {
        let iso = isotropic_baseline(&point.scenario, &point.tx, &point.rx, target)?;
        if let Err(msg) = &iso.closed {
            if msg.contains("pole") {
                flags.push("near_pole".into());
            }
        }
        return Ok(Outcome {
            report: iso.report,
            closed: iso.closed.ok(),
            objective: None,
            iterations: None,
            status: "ok".into(),
            flags,
        });
    }
    let problem = IsacProblem::new(point.scenario, point.tx.clone(), point.rx.clone(), *target, &point.user)?;
    let set = problem.decomposition()?;
    let terms = set.terms(&problem.scenario);
    let cons = Constraints::of(&problem.scenario);
    let (w, iterations, status) = match method {
        Method::ClosedForm => {
            let b = closed_form_beamformer(&set.h_s, &problem.h_c, &cons)?;
            let status = match b.branch {
                crate::beamforming::Branch::SensingDominant => "sensing_dominant",
                crate::beamforming::Branch::SinrActive => "sinr_active",
            };
            (b.w, None, status.to_string())
        }
        Method::Vqf => {
            let opts = VqfOptions { tolerance: cfg.vqf.tolerance, max_iters: cfg.vqf.max_iters, ..Default::default() };
            let r = vqf_solve(&problem, &opts)?;
            let status = match r.termination {
                Termination::Converged(_) => "converged",
                Termination::MaxIters => "max_iters",
                Termination::SensingDominant => "sensing_dominant",
            };
            (r.w, Some(r.iterations), status.to_string())
        }
        Method::Oracle => {
            let o = oracle_search(&terms, &problem.h_c, &cons, &OracleOptions { seed, budget: cfg.oracle_budget })?;
            (o.w, Some(o.evaluations), "ok".to_string())
        }
        Method::Isotropic => unreachable!(),
    };
    let cov = TransmitCovariance::Beam(w.clone());
    let report = problem.report(&w)?;
    let closed = closed_for(point, target, &cov, &mut flags);
    Ok(Outcome { report, closed, objective: Some(objective(&terms, &w)), iterations, status, flags })
}

fn status_of(e: &Error) -> String {
    match e {
        Error::Infeasible(m) => format!("infeasible: {m}"),
        other => format!("error: {other}"),
    }
}

/// Evaluate every (sweep value, target, method) combination. Rows are sorted
/// by sweep index, target index and method order regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    let points = cfg.points()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let jobs: Vec<(usize, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, pt)| (0..pt.targets.len()).map(move |t| (p, t)))
        .collect();

    let work = || -> Vec<ResultRow> {
        jobs.par_iter()
            .flat_map_iter(|&(p, t)| {
                let point = &points[p];
                let target = point.targets[t];
                let point_seed = seed ^ ((p as u64) << 32 | t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                methods.iter().map(move |&m| row(cfg, point, t, &target, m, point_seed))
            })
            .collect()
    };
    let mut rows = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    rows.sort_by_key(|r| (r.sweep_index, r.target_index, r.method));
    Ok(rows)
}

fn row(cfg: &SweepConfig, point: &SweepPoint, t: usize, target: &TargetState, method: Method, seed: u64) -> ResultRow {
    let start = Instant::now();
    let result = evaluate(cfg, point, target, method, seed);
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut flags = Vec::new();
    if target.rho < point.array_radius {
        flags.push("inside_array".to_string());
    }
    let mut r = ResultRow {
        sweep_index: point.index,
        target_index: t,
        axis: point.axis.map_or("none", |a| a.label()).to_string(),
        value: point.value.map_or(String::new(), |v| v.label()),
        method,
        array: point.kind.label().to_string(),
        n_t: point.tx.count(),
        n_r: point.rx.count(),
        target: *target,
        crb: [None; 3],
        crb_closed: [None; 3],
        speb: None,
        speb_diag: None,
        objective: None,
        iterations: None,
        status: String::new(),
        flags: Vec::new(),
        wall_time_ms,
    };
    match result {
        Ok(o) => {
            if o.report.nuisance_singular {
                flags.push("nuisance_singular".into());
            }
            flags.extend(o.flags);
            r.crb = coord_triplet(&o.report.coords, &o.report.crbs).map(|v| v.and_then(finite));
            if let Some(c) = &o.closed {
                r.crb_closed = coord_triplet(&c.coords, &c.crbs).map(|v| v.and_then(finite));
            }
            r.speb = finite(o.report.speb);
            r.speb_diag = finite(o.report.speb_approx);
            r.objective = o.objective.and_then(finite);
            r.iterations = o.iterations;
            r.status = o.status;
        }
        Err(e) => r.status = status_of(&e),
    }
    r.flags = flags;
    r
}

pub const CSV_COLUMNS: [&str; 22] = [
    "axis",
    "value",
    "method",
    "array",
    "n_t",
    "n_r",
    "rho_m",
    "phi_rad",
    "y_m",
    "crb_rho",
    "crb_phi",
    "crb_y",
    "crb_rho_closed",
    "crb_phi_closed",
    "crb_y_closed",
    "speb_m2",
    "speb_db",
    "speb_diag_m2",
    "objective",
    "iterations",
    "status",
    "flags",
];

fn num(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

/// Write rows as CSV. Floats use Rust's shortest round-trip `{:e}` form, so
/// output is locale independent and byte-stable. `timing` appends a
/// `wall_time_ms` column, which is not reproducible.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W, timing: bool) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    if timing {
        header.push("wall_time_ms");
    }
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![
            r.axis.clone(),
            r.value.clone(),
            r.method.label().to_string(),
            r.array.clone(),
            r.n_t.to_string(),
            r.n_r.to_string(),
            num(Some(r.target.rho)),
            num(Some(r.target.phi)),
            num(Some(r.target.y)),
            num(r.crb[0]),
            num(r.crb[1]),
            num(r.crb[2]),
            num(r.crb_closed[0]),
            num(r.crb_closed[1]),
            num(r.crb_closed[2]),
            num(r.speb),
            num(r.speb_db()),
            num(r.speb_diag),
            num(r.objective),
            r.iterations.map_or(String::new(), |i| i.to_string()),
            r.status.clone(),
            r.flags.join(";"),
        ];
        if timing {
            rec.push(format!("{:.3}", r.wall_time_ms));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
