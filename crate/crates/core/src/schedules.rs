//! Relaxation parameter sequences `(λₙ) ⊂ [0, 1]` and probes of the
//! divergent-series condition `Σ λₙ(1 − λₙ) = ∞`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sum::CompensatedSum;

/// Increment of the partial sum over the growth window below which a schedule
/// is labelled summable.
pub const SUMMABLE_INCREMENT: f64 = 1e-6;
/// Increment at or above which a schedule is labelled divergent.
pub const DIVERGENT_INCREMENT: f64 = 1e-3;

/// What happens past the end of an explicit list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// Indices past the end are an error.
    #[default]
    Error,
    RepeatLast,
    Cycle,
    Zero,
}

type CustomFn<S> = Arc<dyn Fn(usize) -> S + Send + Sync>;

#[derive(Clone)]
pub enum ScheduleKind<S> {
    Constant(S),
    /// `1/(n + 2)`.
    Harmonic,
    /// `1 − 1/(n + 2)`.
    ComplementHarmonic,
    /// `scale · ratioⁿ`.
    Geometric { scale: S, ratio: S },
    /// Exactly 0 for `period` steps, then exactly 1 for `period` steps, and so on.
    EdgePattern { period: usize },
    ExplicitList { values: Arc<[S]>, tail: TailRule },
    /// Arbitrary closure; its output is clamped to `[0, 1]`.
    Custom { name: String, f: CustomFn<S> },
}

impl<S: Scalar> fmt::Debug for ScheduleKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Constant(c) => write!(f, "constant({c})"),
            ScheduleKind::Harmonic => write!(f, "harmonic"),
            ScheduleKind::ComplementHarmonic => write!(f, "complement_harmonic"),
            ScheduleKind::Geometric { scale, ratio } => write!(f, "geometric({scale}, {ratio})"),
            ScheduleKind::EdgePattern { period } => write!(f, "edge_pattern({period})"),
            ScheduleKind::ExplicitList { values, tail } => write!(f, "explicit_list(len={}, tail={tail:?})", values.len()),
            ScheduleKind::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

/// Advisory label for the divergent-series hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    DivergentLikely,
    SummableLikely,
    Indeterminate,
}

/// A parameter sequence plus an optional ground-truth divergence flag.
#[derive(Clone)]
pub struct Schedule<S> {
    kind: ScheduleKind<S>,
    declared_divergent: Option<bool>,
}

impl<S: Scalar> fmt::Debug for Schedule<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Schedule")
            .field("kind", &self.kind)
            .field("declared_divergent", &self.declared_divergent)
            .finish()
    }
}

fn in_unit_interval<S: Scalar>(x: S) -> bool {
    x >= S::zero() && x <= S::one()
}

impl<S: Scalar> Schedule<S> {
    pub fn constant(value: S) -> Result<Self> {
        if !value.is_finite() || !in_unit_interval(value) {
            return Err(Error::invalid(format!("constant schedule value {value} outside [0, 1]")));
        }
        let divergent = value > S::zero() && value < S::one();
        Ok(Self { kind: ScheduleKind::Constant(value), declared_divergent: Some(divergent) })
    }

    pub fn harmonic() -> Self {
        Self { kind: ScheduleKind::Harmonic, declared_divergent: Some(true) }
    }

    pub fn complement_harmonic() -> Self {
        Self { kind: ScheduleKind::ComplementHarmonic, declared_divergent: Some(true) }
    }

    pub fn geometric(scale: S, ratio: S) -> Result<Self> {
        if !scale.is_finite() || !in_unit_interval(scale) {
            return Err(Error::invalid(format!("geometric scale {scale} outside [0, 1]")));
        }
        if !(ratio > S::zero() && ratio < S::one()) {
            return Err(Error::invalid(format!("geometric ratio {ratio} outside (0, 1)")));
        }
        Ok(Self { kind: ScheduleKind::Geometric { scale, ratio }, declared_divergent: Some(false) })
    }

    pub fn edge_pattern(period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("edge_pattern period must be at least 1"));
        }
        Ok(Self { kind: ScheduleKind::EdgePattern { period }, declared_divergent: Some(false) })
    }

    pub fn explicit(values: Vec<S>, tail: TailRule) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || !in_unit_interval(**v)) {
            return Err(Error::invalid(format!("explicit schedule value #{i} = {v} outside [0, 1]")));
        }
        if values.is_empty() && tail != TailRule::Zero {
            return Err(Error::invalid("explicit schedule needs at least one value"));
        }
        let interior = |v: &S| *v > S::zero() && *v < S::one();
        let declared = match tail {
            TailRule::Cycle => Some(values.iter().any(interior)),
            TailRule::RepeatLast => Some(values.last().is_some_and(interior)),
            TailRule::Zero => Some(false),
            TailRule::Error => None,
        };
        Ok(Self { kind: ScheduleKind::ExplicitList { values: values.into(), tail }, declared_divergent: declared })
    }

    /// A closure-backed schedule with no divergence declaration.
    pub fn custom(name: impl Into<String>, f: impl Fn(usize) -> S + Send + Sync + 'static) -> Self {
        Self { kind: ScheduleKind::Custom { name: name.into(), f: Arc::new(f) }, declared_divergent: None }
    }

    /// Overrides the divergence flag; `None` makes [`Schedule::classify`] fall
    /// back to the partial-sum heuristic.
    pub fn with_declared_divergent(mut self, declared: Option<bool>) -> Self {
        self.declared_divergent = declared;
        self
    }

    pub fn kind(&self) -> &ScheduleKind<S> {
        &self.kind
    }

    pub fn declared_divergent(&self) -> Option<bool> {
        self.declared_divergent
    }

    pub fn describe(&self) -> String {
        format!("{:?}", self.kind)
    }

    /// The parameter before clamping. Only custom schedules can leave `[0, 1]`.
    pub fn raw_at(&self, n: usize) -> Result<S> {
        let two = S::lit(2.0);
        Ok(match &self.kind {
            ScheduleKind::Constant(c) => *c,
            ScheduleKind::Harmonic => S::one() / (S::from_usize(n).unwrap_or_else(S::infinity) + two),
            ScheduleKind::ComplementHarmonic => {
                S::one() - S::one() / (S::from_usize(n).unwrap_or_else(S::infinity) + two)
            }
            ScheduleKind::Geometric { scale, ratio } => match i32::try_from(n) {
                Ok(k) => *scale * ratio.powi(k),
                Err(_) => S::zero(),
            },
            ScheduleKind::EdgePattern { period } => {
                if (n / period) % 2 == 0 {
                    S::zero()
                } else {
                    S::one()
                }
            }
            ScheduleKind::ExplicitList { values, tail } => match values.get(n) {
                Some(v) => *v,
                None => match tail {
                    TailRule::Error => return Err(Error::ScheduleExhausted { index: n, len: values.len() }),
                    TailRule::RepeatLast => *values.last().expect("nonempty unless tail is zero"),
                    TailRule::Cycle => values[n % values.len()],
                    TailRule::Zero => S::zero(),
                },
            },
            ScheduleKind::Custom { f, .. } => f(n),
        })
    }

    /// `λₙ`, clamped to `[0, 1]`. A non-finite custom value is an error.
    pub fn lambda_at(&self, n: usize) -> Result<S> {
        let raw = self.raw_at(n)?;
        if raw.is_nan() {
            return Err(Error::NonFinite(format!("schedule value at n = {n}")));
        }
        Ok(raw.max(S::zero()).min(S::one()))
    }

    /// `S_N = Σ_{n<N} (1 − λₙ)λₙ` with compensated summation.
    pub fn divergence_partial_sum(&self, n_terms: usize) -> Result<S> {
        Ok(self.partial_sums_at(&[n_terms])?[0])
    }

    /// Partial sums `S_N` at each requested checkpoint (any order), computed in
    /// one pass up to the largest.
    pub fn partial_sums_at(&self, checkpoints: &[usize]) -> Result<Vec<S>> {
        let mut order: Vec<usize> = (0..checkpoints.len()).collect();
        order.sort_by_key(|&i| checkpoints[i]);
        let mut out = vec![S::zero(); checkpoints.len()];
        let mut acc = CompensatedSum::new();
        let mut n = 0;
        for i in order {
            while n < checkpoints[i] {
                let l = self.lambda_at(n)?;
                acc.add((S::one() - l) * l);
                n += 1;
            }
            out[i] = acc.value();
        }
        Ok(out)
    }

    /// `Σ_{n<N} λₙ`, compensated.
    pub fn parameter_sum(&self, n_terms: usize) -> Result<S> {
        let mut acc = CompensatedSum::new();
        for n in 0..n_terms {
            acc.add(self.lambda_at(n)?);
        }
        Ok(acc.value())
    }

    /// Advisory label for `Σ λₙ(1 − λₙ) = ∞`.
    ///
    /// A declared flag wins. Otherwise the increment `S_N − S_{N−window}` is
    /// compared against [`SUMMABLE_INCREMENT`] and [`DIVERGENT_INCREMENT`];
    /// anything in between is indeterminate.
    pub fn classify(&self, n_terms: usize, growth_window: usize) -> Result<Classification> {
        if growth_window == 0 || n_terms <= growth_window {
            return Err(Error::invalid(format!(
                "classify needs N > growth_window > 0 (N = {n_terms}, window = {growth_window})"
            )));
        }
        if let Some(d) = self.declared_divergent {
            return Ok(if d { Classification::DivergentLikely } else { Classification::SummableLikely });
        }
        let sums = self.partial_sums_at(&[n_terms - growth_window, n_terms])?;
        let increment = sums[1] - sums[0];
        Ok(if increment < S::lit(SUMMABLE_INCREMENT) {
            Classification::SummableLikely
        } else if increment >= S::lit(DIVERGENT_INCREMENT) {
            Classification::DivergentLikely
        } else {
            Classification::Indeterminate
        })
    }
}

/// JSON form: `{"kind": "...", "params": {...}, "declared_divergent": true|false|null}`.
///
/// A missing or null `declared_divergent` keeps the kind's analytic default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: String,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub declared_divergent: Option<bool>,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
enum ScheduleParams {
    Constant { value: f64 },
    Harmonic {},
    ComplementHarmonic {},
    Geometric { scale: f64, ratio: f64 },
    EdgePattern {
        #[serde(default = "one")]
        period: usize,
    },
    ExplicitList {
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        path: Option<String>,
        #[serde(default)]
        tail: TailRule,
    },
}

fn one() -> usize {
    1
}

impl ScheduleSpec {
    pub fn new(kind: &str, params: serde_json::Value) -> Self {
        Self { kind: kind.into(), params, declared_divergent: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("schedule: {e}")))
    }

    /// Builds the schedule. Relative `path`s of explicit lists resolve against
    /// `base_dir` when given.
    pub fn build<S: Scalar>(&self, base_dir: Option<&Path>) -> Result<Schedule<S>> {
        if self.kind == "custom" {
            return Err(Error::invalid("schedule.kind 'custom' cannot be built from JSON"));
        }
        let tagged = serde_json::json!({ "kind": self.kind, "params": self.params });
        let params: ScheduleParams = serde_json::from_value(tagged)
            .map_err(|e| Error::Parse(format!("schedule.params for kind '{}': {e}", self.kind)))?;
        let schedule = match params {
            ScheduleParams::Constant { value } => Schedule::constant(S::lit(value))?,
            ScheduleParams::Harmonic {} => Schedule::harmonic(),
            ScheduleParams::ComplementHarmonic {} => Schedule::complement_harmonic(),
            ScheduleParams::Geometric { scale, ratio } => Schedule::geometric(S::lit(scale), S::lit(ratio))?,
            ScheduleParams::EdgePattern { period } => Schedule::edge_pattern(period)?,
            ScheduleParams::ExplicitList { values, path, tail } => {
                let values = match (values, path) {
                    (Some(v), None) => v,
                    (None, Some(p)) => {
                        let p = Path::new(&p);
                        let full = match base_dir {
                            Some(dir) if p.is_relative() => dir.join(p),
                            _ => p.to_path_buf(),
                        };
                        load_values_file(&full)?
                    }
                    _ => return Err(Error::invalid("schedule.params: give exactly one of 'values' or 'path'")),
                };
                Schedule::explicit(values.into_iter().map(S::lit).collect(), tail)?
            }
        };
        Ok(match self.declared_divergent {
            Some(flag) => schedule.with_declared_divergent(Some(flag)),
            None => schedule,
        })
    }
}

/// Reads one value per line; blank lines and lines starting with `#` are skipped.
pub fn load_values_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_values(&text)
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| l.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: '{l}': {e}", i + 1))))
        .collect()
}
