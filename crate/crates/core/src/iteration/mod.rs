//! The instrumented Krasnoselskii–Mann engine and its cross-check oracles.

mod export;
mod fixed_set;
mod oracles;
mod trace;

pub use export::{read_trace_csv, write_trace_csv, write_vectors_json, CsvRow, TRACE_CSV_HEADER};
pub use fixed_set::{fixed_set, FixedSet};
pub use oracles::{
    decomposition_check, eigen_oracle, eigen_oracle_with, normal_spectrum, product_oracle, product_oracle_with,
    DecompositionReport, NormalSpectrum, SpectralBlock, NORMALITY_TOL, PRODUCT_ORACLE_CAP,
};
pub use trace::{
    fejer_monitor, residual_monitor, FejerReport, IterationTrace, ResidualReport, StepRecord, StopReason,
    TraceMetadata, TraceSummary,
};

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operators::NonexpansiveMap;
use crate::rng::{SeededRng, DEFAULT_SEED};
use crate::scalar::Scalar;
use crate::schedules::Schedule;
use crate::subspace::default_rank_tol;

/// When the engine stops, besides hitting `max_iters`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule<S> {
    /// Stop once `‖xₙ − P_F x₀‖ ≤ tol` (test mode: the limit is known).
    KnownLimit { tol: S },
    /// Stop once `‖xₙ − T xₙ‖ ≤ residual_tol` and `‖xₙ − x_{n−window}‖ ≤ step_tol`.
    BlackBox { residual_tol: S, step_tol: S, window: usize },
    /// Always run `max_iters` steps.
    MaxIters,
}

impl<S: Scalar> StopRule<S> {
    pub fn black_box_default() -> Self {
        StopRule::BlackBox { residual_tol: S::lit(1e-10), step_tol: S::lit(1e-10), window: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions<S> {
    pub max_iters: usize,
    pub stop: StopRule<S>,
    /// Record every k-th step; `None` means `max(1, max_iters / 10⁴)`.
    pub record_every: Option<usize>,
    /// The first and last this-many steps are always recorded.
    pub keep_edges: usize,
    /// Number of fixed points used for Fejér margins (projection point,
    /// origin if fixed, then seeded points from the unit ball of `F`).
    pub fejer_samples: usize,
    pub seed: u64,
    /// Store iterates in recorded steps.
    pub keep_vectors: bool,
    pub rank_tol: S,
}

impl<S: Scalar> Default for RunOptions<S> {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            stop: StopRule::KnownLimit { tol: S::lit(1e-10) },
            record_every: None,
            keep_edges: 100,
            fejer_samples: 20,
            seed: DEFAULT_SEED,
            keep_vectors: false,
            rank_tol: default_rank_tol(),
        }
    }
}

impl<S: Scalar> RunOptions<S> {
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop(mut self, stop: StopRule<S>) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_fejer_samples(mut self, samples: usize) -> Self {
        self.fejer_samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = Some(every.max(1));
        self
    }

    pub fn with_vectors(mut self) -> Self {
        self.keep_vectors = true;
        self
    }

    fn effective_record_every(&self) -> usize {
        self.record_every.unwrap_or((self.max_iters / 10_000).max(1)).max(1)
    }
}

/// One relaxation step `(1 − λ)x + λ T x`, formed as a convex combination of
/// `x` and `T x`.
pub fn km_step<S: Scalar, M: NonexpansiveMap<S> + ?Sized>(map: &M, lambda: S, x: &Vector<S>) -> Result<Vector<S>> {
    if !(lambda >= S::zero() && lambda <= S::one()) {
        return Err(Error::invalid(format!("relaxation parameter {lambda} outside [0, 1]")));
    }
    let tx = map.apply(x)?;
    let next = x.lerp(&tx, lambda);
    if !next.is_finite() {
        return Err(Error::NumericalAbort {
            step: 0,
            reason: "non-finite iterate; is the operator certified nonexpansive?".into(),
        });
    }
    Ok(next)
}

/// Runs `x_{n+1} = T_{λₙ} xₙ` from `x₀`, computing `Fix T` first.
pub fn run<S: Scalar, M: NonexpansiveMap<S> + ?Sized>(
    map: &M,
    schedule: &Schedule<S>,
    x0: &Vector<S>,
    opts: &RunOptions<S>,
) -> Result<IterationTrace<S>> {
    let fixed = fixed_set(map, opts.rank_tol)?;
    run_with_fixed_set(map, &fixed, schedule, x0, opts)
}

/// Like [`run`] with a precomputed fixed set.
pub fn run_with_fixed_set<S: Scalar, M: NonexpansiveMap<S> + ?Sized>(
    map: &M,
    fixed: &FixedSet<S>,
    schedule: &Schedule<S>,
    x0: &Vector<S>,
    opts: &RunOptions<S>,
) -> Result<IterationTrace<S>> {
    run_with_parameters(map, fixed, |n| schedule.lambda_at(n), S::one(), &schedule.describe(), x0, opts)
}

/// The general engine: parameters come from `lambda(n)` and may range over
/// `[0, lambda_max]`. A `lambda_max` above 1 is only sound when the caller
/// knows the map is averaged.
pub fn run_with_parameters<S, M, F>(
    map: &M,
    fixed: &FixedSet<S>,
    lambda: F,
    lambda_max: S,
    schedule_label: &str,
    x0: &Vector<S>,
    opts: &RunOptions<S>,
) -> Result<IterationTrace<S>>
where
    S: Scalar,
    M: NonexpansiveMap<S> + ?Sized,
    F: Fn(usize) -> Result<S>,
{
    let dim = map.dim();
    x0.check_dim(dim)?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("x0".into()));
    }
    map.linear_part().ensure_nonexpansive()?;
    if fixed.directions().dim_ambient() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: fixed.directions().dim_ambient() });
    }

    let limit = fixed.project(x0)?;
    let points = fejer_points(fixed, &limit, opts.fejer_samples, opts.seed)?;
    let record_every = opts.effective_record_every();
    let matrix = map.linear_part().matrix();
    let translation = map.translation();
    let apply = |x: &Vector<S>| {
        let mut y = matrix.mul_vec(x);
        if let Some(b) = translation {
            y.axpy(S::one(), b);
        }
        y
    };

    let mut x = x0.clone();
    let mut prev_dists: Vec<S> = points.iter().map(|f| x.distance(f)).collect();
    let mut recorded: Vec<StepRecord<S>> = Vec::new();
    let mut tail: VecDeque<StepRecord<S>> = VecDeque::with_capacity(opts.keep_edges + 1);
    let mut window: VecDeque<Vector<S>> = VecDeque::new();
    let mut last_lambda: Option<S> = None;
    let mut last_step_norm = S::zero();
    let mut min_margin: Option<S> = None;
    let mut initial_residual = S::zero();
    let mut max_residual = S::zero();
    let mut min_residual = S::infinity();
    let mut n = 0usize;

    let (stop_reason, final_residual, final_dist) = loop {
        let tx = apply(&x);
        let residual = x.distance(&tx);
        let dist = x.distance(&limit);
        let margins: Vec<S> = if n == 0 {
            Vec::new()
        } else {
            points
                .iter()
                .zip(prev_dists.iter_mut())
                .map(|(f, prev)| {
                    let d = x.distance(f);
                    let m = *prev - d;
                    *prev = d;
                    m
                })
                .collect()
        };
        if n == 0 {
            initial_residual = residual;
        }
        max_residual = max_residual.max(residual);
        min_residual = min_residual.min(residual);
        if let Some(m) = margins.iter().copied().reduce(S::min) {
            min_margin = Some(min_margin.map_or(m, |cur: S| cur.min(m)));
        }

        let record = StepRecord {
            n,
            lambda: last_lambda,
            residual,
            dist_to_limit: dist,
            fejer_margins: margins,
            x: opts.keep_vectors.then(|| x.clone()),
        };
        if n < opts.keep_edges || n % record_every == 0 {
            recorded.push(record.clone());
        }
        if opts.keep_edges > 0 {
            if tail.len() == opts.keep_edges {
                tail.pop_front();
            }
            tail.push_back(record);
        }

        let stop = match opts.stop {
            StopRule::KnownLimit { tol } if dist <= tol => Some(StopReason::LimitReached),
            StopRule::BlackBox { residual_tol, step_tol, window: m } => {
                let stagnated = m > 0
                    && window.len() == m
                    && residual <= residual_tol
                    && x.distance(window.front().expect("window full")) <= step_tol;
                if m > 0 {
                    if window.len() == m {
                        window.pop_front();
                    }
                    window.push_back(x.clone());
                }
                stagnated.then_some(StopReason::Stagnated)
            }
            _ => None,
        };
        if let Some(reason) = stop {
            break (reason, residual, dist);
        }
        if n >= opts.max_iters {
            break (StopReason::MaxIters, residual, dist);
        }

        let l = lambda(n)?;
        if !(l >= S::zero() && l <= lambda_max) {
            return Err(Error::invalid(format!("relaxation parameter {l} at n = {n} outside [0, {lambda_max}]")));
        }
        let next = x.lerp(&tx, l);
        if !next.is_finite() {
            return Err(Error::NumericalAbort {
                step: n,
                reason: "non-finite iterate; is the operator certified nonexpansive?".into(),
            });
        }
        last_step_norm = next.distance(&x);
        x = next;
        last_lambda = Some(l);
        n += 1;
    };

    let mut steps = recorded;
    steps.extend(tail);
    steps.sort_by_key(|r| r.n);
    steps.dedup_by_key(|r| r.n);

    Ok(IterationTrace {
        steps,
        summary: TraceSummary {
            final_n: n,
            initial_residual,
            max_residual,
            min_residual,
            final_residual,
            final_dist_to_limit: final_dist,
            final_step_norm: last_step_norm,
            min_fejer_margin: min_margin,
        },
        metadata: TraceMetadata {
            operator: map.describe(),
            schedule: schedule_label.to_owned(),
            x0: x0.to_f64_vec(),
            seed: opts.seed,
            stop_reason,
        },
        limit,
        final_x: x,
        fejer_points: points,
    })
}

/// Deterministic fixed points for Fejér margins: `P_F x₀`, the origin when it
/// is fixed, then seeded points `anchor + Σ cᵢ bᵢ` with `c` uniform in the unit
/// ball of `R^{dim F}`.
fn fejer_points<S: Scalar>(
    fixed: &FixedSet<S>,
    limit: &Vector<S>,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vector<S>>> {
    let mut points = Vec::with_capacity(samples);
    if samples == 0 {
        return Ok(points);
    }
    points.push(limit.clone());
    let origin = Vector::zeros(limit.dim());
    let origin_fixed = fixed.distance(&origin)? <= S::lit(1e-12).max(S::lit(16.0) * S::epsilon());
    if origin_fixed && points.len() < samples && limit.norm() > S::zero() {
        points.push(origin);
    }
    let k = fixed.directions().dim();
    if k == 0 {
        return Ok(points);
    }
    let mut rng = SeededRng::new(seed ^ 0xFE1E_5A3B_1E00_0000);
    while points.len() < samples {
        let direction = rng.unit_vector::<S>(k);
        let radius = S::lit(rng.uniform().powf(1.0 / k as f64));
        let mut f = fixed.anchor().clone();
        for (c, b) in direction.iter().zip(fixed.directions().vectors()) {
            f.axpy(*c * radius, b);
        }
        points.push(f);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{AffineOperator, LinearOperator};
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn km_step_examples() {
        let neg = LinearOperator::scaled_identity(2, -1.0);
        assert_eq!(km_step(&neg, 0.5, &v(&[3.0, -2.0])).unwrap(), Vector::zeros(2));
        let rot = LinearOperator::rotation(0.4).unwrap();
        let x = v(&[1.0, 2.0]);
        assert_eq!(km_step(&rot, 0.0, &x).unwrap(), x);
        let quarter = LinearOperator::rotation(FRAC_PI_2).unwrap();
        let y = km_step(&quarter, 1.0, &v(&[1.0, 0.0])).unwrap();
        assert!(y.distance(&v(&[0.0, 1.0])) < 1e-15);
        assert!(km_step(&quarter, 1.5, &x).is_err());
        assert!(km_step(&quarter, 0.5, &v(&[1.0])).is_err());
    }

    #[test]
    fn identity_stops_immediately() {
        let id = LinearOperator::<f64>::identity(3);
        let trace = run(&id, &Schedule::harmonic(), &v(&[1.0, 2.0, 3.0]), &RunOptions::default()).unwrap();
        assert_eq!(trace.summary.final_n, 0);
        assert_eq!(trace.metadata.stop_reason, StopReason::LimitReached);
        assert!(trace.steps.iter().all(|s| s.dist_to_limit == 0.0 && s.residual == 0.0));
    }

    #[test]
    fn negative_identity_half_step() {
        let neg = LinearOperator::scaled_identity(2, -1.0);
        let trace =
            run(&neg, &Schedule::constant(0.5).unwrap(), &v(&[3.0, -1.0]), &RunOptions::default()).unwrap();
        assert_eq!(trace.summary.final_n, 1);
        assert_eq!(trace.final_x, Vector::zeros(2));
        assert_eq!(trace.steps[1].residual, 0.0);
        assert_eq!(trace.steps[1].lambda, Some(0.5));
        // F = {0}: the only Fejér point is the origin and the margin is ‖x₀‖.
        assert_eq!(trace.fejer_points.len(), 1);
        assert!((trace.summary.min_fejer_margin.unwrap() - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn max_iters_and_thinning() {
        let rot = LinearOperator::rotation(2.0).unwrap();
        let opts = RunOptions::default().with_max_iters(1000).with_stop(StopRule::MaxIters).with_record_every(50);
        let opts = RunOptions { keep_edges: 10, ..opts };
        let trace = run(&rot, &Schedule::harmonic(), &v(&[1.0, 1.0]), &opts).unwrap();
        assert_eq!(trace.summary.final_n, 1000);
        assert_eq!(trace.metadata.stop_reason, StopReason::MaxIters);
        let ns: Vec<usize> = trace.steps.iter().map(|s| s.n).collect();
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(&ns[..10], &(0..10).collect::<Vec<_>>()[..]);
        assert!(ns.contains(&50) && ns.contains(&950));
        assert_eq!(&ns[ns.len() - 10..], &(991..=1000).collect::<Vec<_>>()[..]);
        assert!(!ns.contains(&51));
    }

    #[test]
    fn black_box_stagnation() {
        let t = LinearOperator::diagonal(&[1.0, 0.5]).unwrap();
        let opts = RunOptions::default().with_max_iters(100_000).with_stop(StopRule::black_box_default());
        let trace = run(&t, &Schedule::constant(0.5).unwrap(), &v(&[1.0, 1.0]), &opts).unwrap();
        assert_eq!(trace.metadata.stop_reason, StopReason::Stagnated);
        assert!(trace.summary.final_residual <= 1e-10);
        assert!(trace.final_x.distance(&v(&[1.0, 0.0])) < 1e-9);
    }

    #[test]
    fn rejects_inconsistent_affine_and_expansive_maps() {
        let bad = AffineOperator::new(LinearOperator::identity(2), v(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            run(&bad, &Schedule::harmonic(), &v(&[0.0, 0.0]), &RunOptions::default()),
            Err(Error::EmptyFixedSet { .. })
        ));
        let expansive = LinearOperator::scaled_identity(2, 1.5);
        assert!(matches!(
            run(&expansive, &Schedule::harmonic(), &v(&[1.0, 0.0]), &RunOptions::default()),
            Err(Error::NotNonexpansive { .. })
        ));
        let id = LinearOperator::<f64>::identity(2);
        assert!(matches!(
            run(&id, &Schedule::harmonic(), &v(&[1.0, 0.0, 0.0]), &RunOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn edge_parameters_taken_literally() {
        // λ ∈ {0, 1}: no-op steps and full steps.
        let rot = LinearOperator::rotation(FRAC_PI_2).unwrap();
        let opts = RunOptions::default().with_max_iters(4).with_stop(StopRule::MaxIters);
        let trace = run(&rot, &Schedule::edge_pattern(1).unwrap(), &v(&[1.0, 0.0]), &opts).unwrap();
        // Steps: λ₀ = 0 (stay), λ₁ = 1 (rotate), λ₂ = 0, λ₃ = 1: two quarter turns.
        assert!(trace.final_x.distance(&v(&[-1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn fejer_points_reproducible() {
        let t = LinearOperator::diagonal(&[1.0, 1.0, 0.0]).unwrap();
        let opts = RunOptions::default().with_max_iters(5).with_stop(StopRule::MaxIters);
        let a = run(&t, &Schedule::harmonic(), &v(&[1.0, 2.0, 3.0]), &opts).unwrap();
        let b = run(&t, &Schedule::harmonic(), &v(&[1.0, 2.0, 3.0]), &opts).unwrap();
        assert_eq!(a.fejer_points, b.fejer_points);
        assert_eq!(a.fejer_points.len(), 20);
        for f in &a.fejer_points {
            assert_eq!(f[2], 0.0);
        }
    }
}
