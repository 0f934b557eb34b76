//! JSON run configuration. Unknown keys are rejected everywhere.
//!
//! Defaults: `grid.h = 1`, `grid.Q = 2K`, `time.T = 1`, `time.periods = 1`,
//! `solver.mode = simulate`, `solver.method = picard`, `solver.tol = 1e-9`,
//! `solver.maxit = 200`, `solver.krylov_dim = 20`, `solver.cfl = 0.5`
//! (advisory warning on), `output.dir = "out"`, `output.sample_every = 10`,
//! `initial = zero`, `seed = 0`.

use std::path::Path;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{HpeError, Result};
use crate::forcing::ForcingSpec;
use crate::grid::{make_grid, Grid};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "one")]
    pub h: f64,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    /// Forcing / shooting period.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Simulated span in periods (ignored when `t_end` is set).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

/// A named preset (`"channel"` or `{"preset": "channel", "amplitude": 10}`)
/// or a full mode list.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ForcingConfig {
    Preset(PresetForcing),
    Spec(ForcingSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetForcing {
    pub preset: String,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl<'de> Deserialize<'de> for ForcingConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(preset) => Ok(ForcingConfig::Preset(PresetForcing { preset, amplitude: 1.0 })),
            serde_json::Value::Object(ref map) if map.contains_key("preset") => serde_json::from_value(v)
                .map(ForcingConfig::Preset)
                .map_err(D::Error::custom),
            other => serde_json::from_value(other)
                .map(ForcingConfig::Spec)
                .map_err(D::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Simulate,
    Periodic,
    Steady,
    Compare,
    Selftest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Picard,
    Newton,
}

impl std::str::FromStr for Method {
    type Err = HpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picard" => Ok(Method::Picard),
            "newton" => Ok(Method::Newton),
            _ => Err(HpeError::validation("solver.method", format!("unknown method `{s}` (picard or newton)"))),
        }
    }
}

fn default_tol() -> f64 {
    1e-9
}
fn default_maxit() -> usize {
    200
}
fn default_krylov() -> usize {
    20
}
fn default_cfl() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default = "default_krylov")]
    pub krylov_dim: usize,
    /// Advisory CFL number; 0 switches the warning off.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::default(),
            method: Method::default(),
            tol: default_tol(),
            maxit: default_maxit(),
            krylov_dim: default_krylov(),
            cfl: default_cfl(),
            nonlinear: true,
        }
    }
}

fn default_dir() -> String {
    "out".into()
}
fn default_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            sample_every: default_every(),
            snapshots: false,
        }
    }
}

/// Initial data of simulate, periodic (a0) and compare runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Zero,
    /// Seeded random constrained field with the given L² norm.
    Random {
        amplitude: f64,
        #[serde(default = "one")]
        decay: f64,
    },
    Checkpoint { path: String },
}

/// Coarse resolutions compared against the configured (fine) grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub coarse: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// Read, default and validate a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text).map_err(|e| match e {
        HpeError::Parse(msg) => HpeError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        HpeError::Parse(format!(
            "line {}, column {}: at `{path}`: {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    cfg.normalize();
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Fill the defaults that depend on other fields.
    pub fn normalize(&mut self) {
        if self.grid.q.is_none() {
            self.grid.q = Some(2 * self.grid.k);
        }
        if self.time.period.is_none() {
            self.time.period = Some(match &self.forcing {
                ForcingConfig::Spec(fs) => fs.period.unwrap_or(1.0),
                ForcingConfig::Preset(_) => 1.0,
            });
        }
        if self.time.t_end.is_none() && self.time.periods.is_none() {
            self.time.periods = Some(1.0);
        }
    }

    /// Replace the resolution; `Q` falls back to `2K`.
    pub fn set_resolution(&mut self, m: usize, n: usize, k: usize) {
        self.grid.m = m;
        self.grid.n = n;
        self.grid.k = k;
        self.grid.q = Some(2 * k);
    }

    pub fn period(&self) -> f64 {
        self.time.period.unwrap_or(1.0)
    }

    /// End time of a simulation.
    pub fn t_end(&self) -> f64 {
        self.time
            .t_end
            .unwrap_or_else(|| self.time.periods.unwrap_or(1.0) * self.period())
    }

    pub fn make_grid(&self) -> Result<Arc<Grid>> {
        make_grid(self.grid.m, self.grid.n, self.grid.k, self.grid.h, self.grid.q)
            .map_err(|e| HpeError::validation("grid", e.to_string()))
    }

    pub fn forcing_spec(&self) -> Result<ForcingSpec> {
        match &self.forcing {
            ForcingConfig::Preset(p) => {
                if !p.amplitude.is_finite() {
                    return Err(HpeError::validation("forcing.amplitude", "amplitude must be finite"));
                }
                ForcingSpec::preset(&p.preset, self.period(), p.amplitude)
            }
            ForcingConfig::Spec(fs) => Ok(fs.clone()),
        }
    }

    /// Every check that does not need a run: grid, time, solver, forcing fit.
    pub fn validate(&self) -> Result<()> {
        let grid = self.make_grid()?;
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(HpeError::validation("time.dt", format!("dt must be positive, got {}", t.dt)));
        }
        let period = self.period();
        if !(period.is_finite() && period > 0.0) {
            return Err(HpeError::validation("time.T", format!("T must be positive, got {period}")));
        }
        if let Some(p) = t.periods {
            if !(p.is_finite() && p > 0.0) {
                return Err(HpeError::validation("time.periods", format!("periods must be positive, got {p}")));
            }
        }
        if let Some(e) = t.t_end {
            if !(e.is_finite() && e > 0.0) {
                return Err(HpeError::validation("time.t_end", format!("t_end must be positive, got {e}")));
            }
        }
        let s = &self.solver;
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(HpeError::validation("solver.tol", format!("tol must be positive, got {}", s.tol)));
        }
        if s.maxit == 0 {
            return Err(HpeError::validation("solver.maxit", "maxit must be at least 1"));
        }
        if s.krylov_dim == 0 {
            return Err(HpeError::validation("solver.krylov_dim", "krylov_dim must be at least 1"));
        }
        if !(s.cfl.is_finite() && s.cfl >= 0.0) {
            return Err(HpeError::validation("solver.cfl", format!("cfl must be >= 0, got {}", s.cfl)));
        }
        if self.output.sample_every == 0 {
            return Err(HpeError::validation("output.sample_every", "sample_every must be at least 1"));
        }
        if let InitialConfig::Random { amplitude, decay } = self.initial {
            if !(amplitude.is_finite() && amplitude >= 0.0 && decay.is_finite()) {
                return Err(HpeError::validation("initial", "random amplitude must be finite and >= 0"));
            }
        }
        let fs = self.forcing_spec()?;
        fs.validate()?;
        fs.check_grid(&grid)?;
        if s.mode == Mode::Periodic {
            if let Some(p) = fs.period() {
                let ratio = period / p;
                if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                    return Err(HpeError::validation(
                        "time.T",
                        format!("shooting period {period} is not a multiple of the forcing period {p}"),
                    ));
                }
            }
        }
        if s.mode == Mode::Steady && !fs.steady && !fs.modes.is_empty() {
            return Err(HpeError::validation("forcing.steady", "steady mode needs a steady forcing"));
        }
        if let Some(c) = &self.compare {
            for (i, r) in c.coarse.iter().enumerate() {
                let field = format!("compare.coarse[{i}]");
                let cg = make_grid(r[0], r[1], r[2], self.grid.h, None).map_err(|e| HpeError::validation(&field, e.to_string()))?;
                if cg.max_m() > grid.max_m() || cg.max_n() > grid.max_n() || cg.k() > grid.k() {
                    return Err(HpeError::validation(field, "coarse grid exceeds the configured grid"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}
