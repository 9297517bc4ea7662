//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use fsi_fem::experiments::{ElementPair, TimeErrorMode};
use fsi_fem::manufactured::{channel_periodic_case, heat_wave_case, traction_channel, Case};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Run,
    ConvergenceSpace,
    ConvergenceTime,
    Ritz,
    VerifySources,
    SelfConvergence,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::ConvergenceSpace => "convergence_space",
            Mode::ConvergenceTime => "convergence_time",
            Mode::Ritz => "ritz",
            Mode::VerifySources => "verify_sources",
            Mode::SelfConvergence => "self_convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    ChannelPeriodic,
    ChannelTraction,
    HeatWave,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryOverrides {
    /// Channel length (an integer for the periodic channel).
    pub length: Option<f64>,
    /// Lower and upper bound of the fluid strip (traction channel only).
    pub y_levels: Option<[f64; 2]>,
}

pub const DEFAULT_T: f64 = 0.25;
pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_TOLERANCE: f64 = 0.25;
pub const DEFAULT_SEED: u64 = 20_240_521;
pub const DEFAULT_SAMPLES: usize = 200;

fn default_t() -> f64 {
    DEFAULT_T
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub case: CaseName,
    /// Required in every mode except `verify_sources`.
    pub element: Option<ElementPair>,
    #[serde(default)]
    pub geometry: GeometryOverrides,
    /// Target mesh spacing (`run`, `convergence_time`).
    pub h: Option<f64>,
    /// Structured mesh columns, an alternative to `h` in `run` mode.
    pub nx: Option<usize>,
    /// Structured mesh rows per strip, with `nx`.
    pub ny: Option<Vec<usize>>,
    #[serde(rename = "T", alias = "t_final", default = "default_t")]
    pub t_final: f64,
    pub tau: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub h_list: Option<Vec<f64>>,
    pub tau_list: Option<Vec<f64>>,
    /// Reference spacing for `self_convergence`.
    pub h_ref: Option<f64>,
    /// Error measure of `convergence_time`.
    #[serde(default)]
    pub time_error: TimeErrorMode,
    /// Rate band half-width; also the allowed shortfall of lower-bounded gates.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub seed: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Output directory; `--out` takes precedence.
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn element(&self) -> Result<ElementPair> {
        self.element.with_context(|| format!("field `element` is required in {} mode", self.mode.name()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn build_case(&self) -> Result<Case> {
        let g = &self.geometry;
        let case = match self.case {
            CaseName::ChannelPeriodic => {
                ensure!(g.y_levels.is_none(), "field `geometry.y_levels`: the periodic channel solution fixes its strip levels");
                channel_periodic_case(self.gamma, g.length.unwrap_or(1.0))?
            }
            CaseName::ChannelTraction => traction_channel(g.length.unwrap_or(1.0), g.y_levels.unwrap_or([0.15, 0.85]))?,
            CaseName::HeatWave => {
                ensure!(g.length.is_none() && g.y_levels.is_none(), "field `geometry`: the heat-wave case has a fixed geometry");
                heat_wave_case()
            }
        };
        Ok(case)
    }

    /// Checks the mode-dependent field requirements.
    pub fn validate(&self) -> Result<()> {
        use Mode::*;
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            if let Some(v) = v {
                ensure!(v > 0.0 && v.is_finite(), "field `{name}` must be positive, got {v}");
            }
            Ok(())
        };
        let list = |name: &str, v: &Option<Vec<f64>>, needed: bool| -> Result<()> {
            match v {
                Some(l) => {
                    ensure!(needed, "field `{name}` is not used in {} mode", self.mode.name());
                    ensure!(l.len() >= 2, "field `{name}` needs at least two entries, got {}", l.len());
                    ensure!(l.iter().all(|&x| x > 0.0 && x.is_finite()), "field `{name}` entries must be positive");
                    let mut sorted = l.clone();
                    sorted.sort_by(|a, b| b.total_cmp(a));
                    sorted.dedup();
                    ensure!(sorted.len() == l.len(), "field `{name}` has repeated entries");
                }
                None => ensure!(!needed, "field `{name}` is required in {} mode", self.mode.name()),
            }
            Ok(())
        };
        ensure!(self.t_final >= 0.0 && self.t_final.is_finite(), "field `T` must be nonnegative, got {}", self.t_final);
        ensure!(self.gamma > 0.0, "field `gamma` must be positive, got {}", self.gamma);
        ensure!(self.tolerance > 0.0, "field `tolerance` must be positive, got {}", self.tolerance);
        positive("h", self.h)?;
        positive("tau", self.tau)?;
        positive("h_ref", self.h_ref)?;

        if self.mode != VerifySources {
            let e = self.element()?;
            let scalar_case = self.case == CaseName::HeatWave;
            ensure!(e.is_scalar() == scalar_case, "field `element`: {} does not fit case {:?} (scalar elements only for heat_wave)", e.name(), self.case);
        }
        let exact_needed = matches!(self.mode, ConvergenceSpace | ConvergenceTime | Ritz | VerifySources);
        if exact_needed && self.case == CaseName::ChannelTraction {
            bail!("field `case`: channel_traction has no exact solution, {} mode needs one", self.mode.name());
        }
        let structured = self.nx.is_some() || self.ny.is_some();
        ensure!(!structured || self.mode == Run, "fields `nx`/`ny` are only used in run mode");
        ensure!(self.mode == ConvergenceTime || self.time_error == TimeErrorMode::Exact, "field `time_error` is only used in convergence_time mode");
        ensure!(self.h_ref.is_none() || self.mode == SelfConvergence, "field `h_ref` is only used in self_convergence mode");

        match self.mode {
            Run => {
                list("h_list", &self.h_list, false)?;
                list("tau_list", &self.tau_list, false)?;
                ensure!(self.tau.is_some(), "field `tau` is required in run mode");
                match (self.h, self.nx, &self.ny) {
                    (Some(_), None, None) => {}
                    (None, Some(nx), Some(ny)) => {
                        ensure!(nx > 0 && !ny.is_empty() && ny.iter().all(|&n| n > 0), "fields `nx`/`ny` must be positive");
                    }
                    _ => bail!("run mode needs either `h` or both `nx` and `ny`"),
                }
            }
            ConvergenceSpace | Ritz => {
                list("h_list", &self.h_list, true)?;
                list("tau_list", &self.tau_list, false)?;
                ensure!(self.h.is_none(), "field `h` is not used in {} mode (use `h_list`)", self.mode.name());
                ensure!(self.mode == Ritz || self.tau.is_some(), "field `tau` is required in convergence_space mode");
                ensure!(self.mode != Ritz || self.tau.is_none(), "field `tau` is not used in ritz mode (the integrator step follows h)");
                ensure!(self.mode != Ritz || self.t_final > 0.0, "field `T` must be positive in ritz mode");
            }
            ConvergenceTime => {
                list("tau_list", &self.tau_list, true)?;
                list("h_list", &self.h_list, false)?;
                ensure!(self.h.is_some(), "field `h` is required in convergence_time mode");
                ensure!(self.tau.is_none(), "field `tau` is not used in convergence_time mode (use `tau_list`)");
            }
            SelfConvergence => {
                list("h_list", &self.h_list, true)?;
                list("tau_list", &self.tau_list, false)?;
                ensure!(self.tau.is_some(), "field `tau` is required in self_convergence mode");
                let h_ref = self.h_ref.context("field `h_ref` is required in self_convergence mode")?;
                let coarsest_fine = self.h_list.as_ref().unwrap().iter().copied().fold(f64::INFINITY, f64::min);
                ensure!(h_ref < coarsest_fine, "field `h_ref` ({h_ref}) must be finer than every `h_list` entry");
            }
            VerifySources => {
                list("h_list", &self.h_list, false)?;
                list("tau_list", &self.tau_list, false)?;
                ensure!(self.samples > 0, "field `samples` must be positive");
            }
        }
        self.build_case().map(|_| ())
    }
}

/// Reads, parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let cfg: RunConfig = match serde_json::from_value(value.clone()) {
        Ok(cfg) => cfg,
        Err(e) => {
            if let Some(fields) = value.as_object() {
                for (key, v) in fields {
                    check_field(key, v)?;
                }
            }
            return Err(e).context("config schema");
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn check_field(key: &str, v: &serde_json::Value) -> Result<()> {
    fn as_<T: serde::de::DeserializeOwned>(key: &str, v: &serde_json::Value) -> Result<()> {
        T::deserialize(v).map(|_| ()).with_context(|| format!("field `{key}`"))
    }
    match key {
        "mode" => as_::<Mode>(key, v),
        "case" => as_::<CaseName>(key, v),
        "element" => as_::<Option<ElementPair>>(key, v),
        "geometry" => as_::<GeometryOverrides>(key, v),
        "h" | "tau" | "h_ref" | "T" | "t_final" | "gamma" | "tolerance" => as_::<Option<f64>>(key, v),
        "nx" | "samples" => as_::<Option<usize>>(key, v),
        "ny" => as_::<Option<Vec<usize>>>(key, v),
        "h_list" | "tau_list" => as_::<Option<Vec<f64>>>(key, v),
        "time_error" => as_::<TimeErrorMode>(key, v),
        "seed" => as_::<Option<u64>>(key, v),
        "output" => as_::<Option<PathBuf>>(key, v),
        _ => Ok(()),
    }
}
