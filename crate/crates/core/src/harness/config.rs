//! JSON run configuration. Engineering units (dBm, dB, degrees) are accepted
//! here and converted to SI when points are resolved.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{radius_from_spacing, uca_layout, upa_layout, upa_same_aperture, wavelength, AntennaLayout};
use crate::scenario::{db_to_linear, dbm_to_watts, rate_to_sinr, Scenario};
use crate::wavefront::TargetState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub scenario: ScenarioSpec,
    pub array: ArraySpec,
    pub target: TargetSpec,
    /// Communication user position.
    #[serde(default)]
    pub user: UserSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub oracle_budget: usize,
    #[serde(default)]
    pub vqf: VqfSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Isotropic, Method::ClosedForm, Method::Vqf]
}

fn default_budget() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub carrier_hz: f64,
    pub noise_dbm: f64,
    pub snapshots: usize,
    pub alpha_magnitude: f64,
    pub alpha_phase_rad: f64,
    pub p_max_dbm: f64,
    /// SINR threshold; mutually exclusive with `rate_min_bits`.
    pub gamma_min_db: Option<f64>,
    pub rate_min_bits: Option<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            carrier_hz: 28e9,
            noise_dbm: -113.0,
            snapshots: 64,
            alpha_magnitude: 1.0,
            alpha_phase_rad: 0.0,
            p_max_dbm: 25.0,
            gamma_min_db: None,
            rate_min_bits: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Uca,
    /// Square UPA spanning the UCA diameter.
    UpaSameAperture,
    /// Near-square UPA with the given element spacing.
    Upa,
}

impl ArrayKind {
    pub fn label(self) -> &'static str {
        match self {
            ArrayKind::Uca => "uca",
            ArrayKind::UpaSameAperture => "upa_same_aperture",
            ArrayKind::Upa => "upa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    pub n_t: usize,
    pub n_r: usize,
    /// UCA radius; derived from `spacing_m` (default λ/2) when absent.
    #[serde(default)]
    pub radius_m: Option<f64>,
    #[serde(default)]
    pub spacing_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default)]
    pub rho_m: Vec<f64>,
    pub phi_deg: Vec<f64>,
    #[serde(default = "zero_list")]
    pub y_m: Vec<f64>,
}

fn zero_list() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserSpec {
    pub rho_m: f64,
    pub phi_deg: f64,
    pub y_m: f64,
}

impl Default for UserSpec {
    fn default() -> Self {
        UserSpec { rho_m: 10.0, phi_deg: -30.0, y_m: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqfSpec {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for VqfSpec {
    fn default() -> Self {
        VqfSpec { tolerance: 1e-5, max_iters: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Isotropic,
    ClosedForm,
    Vqf,
    Oracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Isotropic => "isotropic",
            Method::ClosedForm => "closed_form",
            Method::Vqf => "vqf",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NT,
    NR,
    PMaxDbm,
    GammaMinDb,
    RhoM,
    YM,
    CarrierHz,
    Array,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::NT => "n_t",
            Axis::NR => "n_r",
            Axis::PMaxDbm => "p_max_dbm",
            Axis::GammaMinDb => "gamma_min_db",
            Axis::RhoM => "rho_m",
            Axis::YM => "y_m",
            Axis::CarrierHz => "carrier_hz",
            Axis::Array => "array",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    /// Numbers, or array kinds for the `array` axis.
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    Number(f64),
    Array(ArrayKind),
}

impl AxisValue {
    pub fn label(&self) -> String {
        match self {
            AxisValue::Number(v) => format!("{v:e}"),
            AxisValue::Array(k) => k.label().to_string(),
        }
    }
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: SweepConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// One resolved sweep value: SI scenario, arrays, user and target grid.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub axis: Option<Axis>,
    pub value: Option<AxisValue>,
    pub scenario: Scenario,
    pub kind: ArrayKind,
    pub tx: AntennaLayout,
    pub rx: AntennaLayout,
    /// Radius used for the inside-array flag.
    pub array_radius: f64,
    pub user: TargetState,
    pub targets: Vec<TargetState>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = |path: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(config_err(path, "must be finite"))
            }
        };
        let s = &self.scenario;
        if !(s.carrier_hz > 0.0) {
            return Err(config_err("scenario.carrier_hz", "must be positive"));
        }
        finite("scenario.noise_dbm", s.noise_dbm)?;
        finite("scenario.p_max_dbm", s.p_max_dbm)?;
        if s.snapshots == 0 {
            return Err(config_err("scenario.snapshots", "must be at least 1"));
        }
        if !(s.alpha_magnitude > 0.0) {
            return Err(config_err("scenario.alpha_magnitude", "must be positive"));
        }
        if s.gamma_min_db.is_some() && s.rate_min_bits.is_some() {
            return Err(config_err("scenario", "give gamma_min_db or rate_min_bits, not both"));
        }
        if let Some(r) = s.rate_min_bits {
            if !(r >= 0.0) {
                return Err(config_err("scenario.rate_min_bits", "must be nonnegative"));
            }
        }
        if self.array.n_t < 3 || self.array.n_r < 3 {
            return Err(config_err("array", "n_t and n_r must be at least 3"));
        }
        if let Some(r) = self.array.radius_m {
            if !(r > 0.0) {
                return Err(config_err("array.radius_m", "must be positive"));
            }
        }
        if let Some(d) = self.array.spacing_m {
            if !(d > 0.0) {
                return Err(config_err("array.spacing_m", "must be positive"));
            }
        }
        let axis = self.sweep.as_ref().map(|s| s.axis);
        if self.target.rho_m.is_empty() && axis != Some(Axis::RhoM) {
            return Err(config_err("target.rho_m", "must be nonempty"));
        }
        if self.target.phi_deg.is_empty() {
            return Err(config_err("target.phi_deg", "must be nonempty"));
        }
        if self.target.y_m.is_empty() {
            return Err(config_err("target.y_m", "must be nonempty"));
        }
        for (i, v) in self.target.rho_m.iter().enumerate() {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(config_err(format!("target.rho_m[{i}]"), "must be finite and nonnegative"));
            }
        }
        for (i, v) in self.target.phi_deg.iter().enumerate() {
            finite(&format!("target.phi_deg[{i}]"), *v)?;
        }
        for (i, v) in self.target.y_m.iter().enumerate() {
            finite(&format!("target.y_m[{i}]"), *v)?;
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "must be nonempty"));
        }
        if self.oracle_budget == 0 {
            return Err(config_err("oracle_budget", "must be positive"));
        }
        if !(self.vqf.tolerance > 0.0) || self.vqf.max_iters == 0 {
            return Err(config_err("vqf", "tolerance and max_iters must be positive"));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(config_err("sweep.values", "must be nonempty"));
            }
            for i in 0..sw.values.len() {
                self.axis_value(i)?;
            }
        }
        Ok(())
    }

    fn axis_value(&self, i: usize) -> Result<AxisValue> {
        let sw = self.sweep.as_ref().expect("axis_value needs a sweep");
        let raw = &sw.values[i];
        let path = format!("sweep.values[{i}]");
        if sw.axis == Axis::Array {
            return serde_json::from_value::<ArrayKind>(raw.clone())
                .map(AxisValue::Array)
                .map_err(|e| config_err(path, e.to_string()));
        }
        let v = raw.as_f64().ok_or_else(|| config_err(path.clone(), "expected a number"))?;
        let ok = match sw.axis {
            Axis::NT | Axis::NR => v >= 3.0 && v.fract() == 0.0,
            Axis::CarrierHz => v > 0.0,
            Axis::RhoM | Axis::GammaMinDb => v.is_finite() && (sw.axis != Axis::RhoM || v >= 0.0),
            _ => v.is_finite(),
        };
        if !ok {
            return Err(config_err(path, format!("invalid value {v} for axis {}", sw.axis.label())));
        }
        Ok(AxisValue::Number(v))
    }

    /// Resolve every sweep value (or the single base point) to SI inputs.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        match &self.sweep {
            None => Ok(vec![self.resolve(0, None)?]),
            Some(sw) => (0..sw.values.len())
                .map(|i| self.resolve(i, Some((sw.axis, self.axis_value(i)?))))
                .collect(),
        }
    }

    fn resolve(&self, index: usize, axis: Option<(Axis, AxisValue)>) -> Result<SweepPoint> {
        let mut s = self.scenario.clone();
        let mut array = self.array.clone();
        let mut target = self.target.clone();
        if let Some((ax, val)) = axis {
            match (ax, val) {
                (Axis::NT, AxisValue::Number(v)) => array.n_t = v as usize,
                (Axis::NR, AxisValue::Number(v)) => array.n_r = v as usize,
                (Axis::PMaxDbm, AxisValue::Number(v)) => s.p_max_dbm = v,
                (Axis::GammaMinDb, AxisValue::Number(v)) => {
                    s.gamma_min_db = Some(v);
                    s.rate_min_bits = None;
                }
                (Axis::RhoM, AxisValue::Number(v)) => target.rho_m = vec![v],
                (Axis::YM, AxisValue::Number(v)) => target.y_m = vec![v],
                (Axis::CarrierHz, AxisValue::Number(v)) => s.carrier_hz = v,
                (Axis::Array, AxisValue::Array(k)) => array.kind = k,
                _ => unreachable!("axis values are checked by validate"),
            }
        }
        let lam = wavelength(s.carrier_hz);
        let gamma = match (s.gamma_min_db, s.rate_min_bits) {
            (_, Some(r)) => rate_to_sinr(r),
            (Some(db), None) => db_to_linear(db),
            (None, None) => db_to_linear(5.0),
        };
        let scenario = Scenario::new(
            lam,
            dbm_to_watts(s.noise_dbm),
            s.snapshots,
            Complex64::from_polar(s.alpha_magnitude, s.alpha_phase_rad),
            dbm_to_watts(s.p_max_dbm),
            gamma,
        )
        .map_err(|e| config_err("scenario", e.to_string()))?;

        let spacing = array.spacing_m.unwrap_or(lam / 2.0);
        let geometry = |e: Error| config_err("array", e.to_string());
        let (tx, rx, radius) = match array.kind {
            ArrayKind::Uca | ArrayKind::UpaSameAperture => {
                let r = match array.radius_m {
                    Some(r) => r,
                    None => radius_from_spacing(array.n_t, spacing).map_err(geometry)?,
                };
                let build = |n| match array.kind {
                    ArrayKind::Uca => uca_layout(n, r),
                    _ => upa_same_aperture(n, r),
                };
                (build(array.n_t).map_err(geometry)?, build(array.n_r).map_err(geometry)?, r)
            }
            ArrayKind::Upa => {
                let grid = |n: usize| {
                    let nx = (n as f64).sqrt().ceil() as usize;
                    upa_layout(nx, n / nx, spacing)
                };
                let tx = grid(array.n_t).map_err(geometry)?;
                let rx = grid(array.n_r).map_err(geometry)?;
                let r = tx.aperture() / 2.0;
                (tx, rx, r)
            }
        };

        let user = TargetState::new(self.user.rho_m, self.user.phi_deg.to_radians(), self.user.y_m)
            .map_err(|e| config_err("user", e.to_string()))?;
        let mut targets = Vec::new();
        for &rho in &target.rho_m {
            for &phi in &target.phi_deg {
                for &y in &target.y_m {
                    targets.push(
                        TargetState::new(rho, phi.to_radians(), y).map_err(|e| config_err("target", e.to_string()))?,
                    );
                }
            }
        }
        Ok(SweepPoint {
            index,
            axis: axis.map(|a| a.0),
            value: axis.map(|a| a.1),
            scenario,
            kind: array.kind,
            tx,
            rx,
            array_radius: radius,
            user,
            targets,
        })
    }
}
