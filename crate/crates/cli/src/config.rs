//! `kmfix run` configuration.

use std::path::{Path, PathBuf};

use kmfix::iteration::{RunOptions, StopRule};
use kmfix::operators::{BuiltOperator, OperatorSpec};
use kmfix::rng::{SeededRng, DEFAULT_SEED};
use kmfix::schedules::ScheduleSpec;
use kmfix::{Error, Result, Schedule64, Vector64};
use serde::{Deserialize, Serialize};

/// The experiment described by a `run` config file.
///
/// ```json
/// {
///   "operator": {"kind": "negative_identity", "params": {"dim": 3}},
///   "schedule": {"kind": "constant", "params": {"value": 0.5}},
///   "x0": [1.0, 2.0, 3.0],
///   "engine": {"max_iters": 1000, "tol": 1e-10},
///   "seed": 7,
///   "out": "out"
/// }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub x0: X0Spec,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory for `trace.csv`, `summary.json` and `vectors.json`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Inline(Vec<f64>),
    Seeded { seeded: SeededX0 },
}

impl Default for X0Spec {
    fn default() -> Self {
        X0Spec::Seeded { seeded: SeededX0::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeededX0 {
    pub norm: f64,
}

impl Default for SeededX0 {
    fn default() -> Self {
        Self { norm: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    #[default]
    KnownLimit,
    BlackBox,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub max_iters: usize,
    /// Target `‖xₙ − P_F x₀‖` in known-limit mode; residual and step
    /// tolerance in black-box mode.
    pub tol: f64,
    pub stop: StopMode,
    pub window: usize,
    pub record_every: Option<usize>,
    pub fejer_samples: usize,
    pub keep_vectors: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-10,
            stop: StopMode::KnownLimit,
            window: 50,
            record_every: None,
            fejer_samples: 20,
            keep_vectors: false,
        }
    }
}

/// Command-line values that beat the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub record_every: Option<usize>,
}

/// A fully validated experiment.
pub struct Experiment {
    pub operator: BuiltOperator<f64>,
    pub schedule: Schedule64,
    pub x0: Vector64,
    pub options: RunOptions<f64>,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
}

const X0_STREAM: u64 = 0xC11_0000_0000_0001;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies overrides and checks every field. Nothing is computed beyond
    /// the operator certificate. Relative schedule files resolve against
    /// `base_dir`.
    pub fn validate(mut self, overrides: &Overrides, base_dir: Option<&Path>) -> Result<Experiment> {
        let e = &mut self.engine;
        if let Some(v) = overrides.max_iters {
            e.max_iters = v;
        }
        if let Some(v) = overrides.tol {
            e.tol = v;
        }
        if let Some(v) = overrides.record_every {
            e.record_every = Some(v);
        }
        if !(e.tol > 0.0 && e.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("engine.tol: must be positive, got {}", e.tol)));
        }
        if e.record_every == Some(0) {
            return Err(Error::InvalidParameter("engine.record_every: must be at least 1".into()));
        }
        if e.stop == StopMode::BlackBox && e.window == 0 {
            return Err(Error::InvalidParameter("engine.window: must be at least 1".into()));
        }
        let seed = overrides.seed.or(self.seed).unwrap_or(DEFAULT_SEED);
        let operator = self.operator.build::<f64>().map_err(|e| prefix("operator", e))?;
        operator.linear().ensure_nonexpansive().map_err(|e| prefix("operator", e))?;
        let schedule = self.schedule.build::<f64>(base_dir).map_err(|e| prefix("schedule", e))?;
        let dim = operator.dim();
        let x0 = match &self.x0 {
            X0Spec::Inline(values) => {
                if values.len() != dim {
                    return Err(Error::InvalidParameter(format!(
                        "x0: length {} does not match operator dimension {dim}",
                        values.len()
                    )));
                }
                Vector64::new(values.clone()).map_err(|e| prefix("x0", e))?
            }
            X0Spec::Seeded { seeded } => {
                if !(seeded.norm >= 0.0 && seeded.norm.is_finite()) {
                    return Err(Error::InvalidParameter(format!("x0.seeded.norm: invalid value {}", seeded.norm)));
                }
                SeededRng::new(seed ^ X0_STREAM).unit_vector::<f64>(dim).scale(seeded.norm)
            }
        };
        let stop = match e.stop {
            StopMode::KnownLimit => StopRule::KnownLimit { tol: e.tol },
            StopMode::BlackBox => StopRule::BlackBox { residual_tol: e.tol, step_tol: e.tol, window: e.window },
            StopMode::MaxIters => StopRule::MaxIters,
        };
        let options = RunOptions {
            max_iters: e.max_iters,
            stop,
            record_every: e.record_every,
            fejer_samples: e.fejer_samples,
            seed,
            keep_vectors: e.keep_vectors,
            ..RunOptions::default()
        };
        let out = overrides.out.clone().or(self.out).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Experiment { operator, schedule, x0, options, tol: e.tol, seed, out })
    }
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{field}: {m}")),
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{field}: {m}")),
        other => Error::InvalidParameter(format!("{field}: {other}")),
    }
}
