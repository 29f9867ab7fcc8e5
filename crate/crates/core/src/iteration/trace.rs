use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Scalar;

/// Why the engine stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `‖xₙ − P_F x₀‖` fell to the target tolerance.
    LimitReached,
    /// Residual and iterate movement both below threshold over the window.
    Stagnated,
    MaxIters,
}

/// One recorded step. `lambda` and the Fejér margins describe the transition
/// from `x_{n−1}` into `xₙ` and are absent for `n = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    pub n: usize,
    pub lambda: Option<S>,
    /// `‖xₙ − T xₙ‖`.
    pub residual: S,
    /// `‖xₙ − P_F x₀‖`.
    pub dist_to_limit: S,
    /// `‖x_{n−1} − f‖ − ‖xₙ − f‖` per sampled fixed point `f`; nonnegative
    /// under Fejér monotonicity.
    pub fejer_margins: Vec<S>,
    pub x: Option<Vector<S>>,
}

impl<S: Scalar> StepRecord<S> {
    pub fn min_fejer_margin(&self) -> Option<S> {
        self.fejer_margins.iter().copied().reduce(S::min)
    }
}

/// Aggregates over every step taken, including the ones thinned out of
/// [`IterationTrace::steps`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary<S> {
    /// Index of the final iterate.
    pub final_n: usize,
    pub initial_residual: S,
    pub max_residual: S,
    pub min_residual: S,
    pub final_residual: S,
    pub final_dist_to_limit: S,
    /// `‖x_N − x_{N−1}‖` at the end (0 when no step was taken).
    pub final_step_norm: S,
    pub min_fejer_margin: Option<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMetadata {
    pub operator: String,
    pub schedule: String,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct IterationTrace<S> {
    pub steps: Vec<StepRecord<S>>,
    pub summary: TraceSummary<S>,
    pub metadata: TraceMetadata,
    /// `P_F x₀`.
    pub limit: Vector<S>,
    pub final_x: Vector<S>,
    pub fejer_points: Vec<Vector<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub initial_residual: f64,
    pub max_residual: f64,
    pub final_residual: f64,
    pub min_residual: f64,
    /// The running minimum of the residual reached `tol` by the end. Only the
    /// convergence envelope is checked, not per-step monotonicity.
    pub monotone_envelope_ok: bool,
}

/// Summarizes `‖xₙ − T xₙ‖` over a trace.
pub fn residual_monitor<S: Scalar>(trace: &IterationTrace<S>, tol: S) -> ResidualReport {
    let s = &trace.summary;
    ResidualReport {
        initial_residual: s.initial_residual.to_f64_lossy(),
        max_residual: s.max_residual.to_f64_lossy(),
        final_residual: s.final_residual.to_f64_lossy(),
        min_residual: s.min_residual.to_f64_lossy(),
        monotone_envelope_ok: s.min_residual <= tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FejerReport {
    /// Minimum over steps and sampled fixed points of `‖x_{n−1} − f‖ − ‖xₙ − f‖`.
    pub min_margin: f64,
    pub samples: usize,
}

/// Fejér-monotonicity margin over a trace. Needs at least one sampled fixed
/// point; a trace with no steps has margin 0.
pub fn fejer_monitor<S: Scalar>(trace: &IterationTrace<S>) -> Result<FejerReport> {
    if trace.fejer_points.is_empty() {
        return Err(Error::invalid("fejer_monitor needs at least one sampled fixed point"));
    }
    Ok(FejerReport {
        min_margin: trace.summary.min_fejer_margin.unwrap_or_else(S::zero).to_f64_lossy(),
        samples: trace.fejer_points.len(),
    })
}
