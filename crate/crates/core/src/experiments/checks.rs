use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CheckReport, Expectation, ReportBuilder};
use crate::error::{Error, Result};
use crate::iteration::{
    fejer_monitor, fixed_set, normal_spectrum, run, run_with_parameters, IterationTrace, RunOptions, StopRule,
};
use crate::linalg::Vector;
use crate::operators::{synthesize_nonexpansive, AffineOperator, BlockKind, LinearOperator, SynthesisSpec, SynthesizedOperator};
use crate::rng::SeededRng;
use crate::schedules::{Classification, Schedule, ScheduleSpec};
use crate::subspace::{
    check_adjoint_kernel_identity, check_perp_identity, default_rank_tol, max_principal_angle,
};

/// Fejér margins below this count as a violation.
const FEJER_SLACK: f64 = 1e-10;
/// Pointwise agreement required between runs that should be identical up to
/// rounding (translation conjugation, averaged-map delegation).
const TRACE_IDENTITY_TOL: f64 = 1e-12;
/// Eigenvalues this close to 1 count as fixed directions in envelopes.
const FIXED_EIGEN_TOL: f64 = 1e-9;
const CLASSIFY_N: usize = 10_000;
const CLASSIFY_WINDOW: usize = 1_000;
const X0_STREAM: u64 = 0x0A11_5EED_0000_0001;
const TRANSLATION_STREAM: u64 = 0x0A11_5EED_0000_0002;

/// Where the seeded starting point lies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// A seeded unit vector in general position.
    #[default]
    Seeded,
    /// The seeded vector projected onto `Fix T`, renormalized.
    InFixed,
    /// The seeded vector projected onto `(Fix T)^⊥`, renormalized.
    InComplement,
}

fn constant_spec(value: f64) -> ScheduleSpec {
    ScheduleSpec::new("constant", serde_json::json!({ "value": value }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MainTheoremParams {
    pub d: usize,
    pub fix_dim: usize,
    pub gap: f64,
    pub block: BlockKind,
    pub schedule: ScheduleSpec,
    pub tol: f64,
    pub max_iters: usize,
    pub start: StartPoint,
}

impl Default for MainTheoremParams {
    fn default() -> Self {
        Self {
            d: 6,
            fix_dim: 2,
            gap: 1.0,
            block: BlockKind::Mixed,
            schedule: constant_spec(0.5),
            tol: 1e-8,
            max_iters: 200,
            start: StartPoint::Seeded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BbrConstantParams {
    pub d: usize,
    pub fix_dim: usize,
    pub gap: f64,
    pub block: BlockKind,
    pub lambda: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BbrConstantParams {
    fn default() -> Self {
        Self { d: 6, fix_dim: 2, gap: 1.0, block: BlockKind::QuarterTurn, lambda: 0.5, tol: 1e-8, max_iters: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleParams {
    pub d: usize,
    pub schedule: ScheduleSpec,
    pub n: usize,
    pub tol: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        Self {
            d: 3,
            schedule: ScheduleSpec::new("geometric", serde_json::json!({ "scale": 0.25, "ratio": 0.25 })),
            n: 1000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineParams {
    pub d: usize,
    pub fix_dim: usize,
    pub gap: f64,
    pub block: BlockKind,
    pub schedule: ScheduleSpec,
    pub n: usize,
    pub tol: f64,
    /// Explicit `b`. When absent, `b = (Id − L)z` for a seeded `z` scaled by
    /// `translation_scale`, which is always consistent.
    pub translation: Option<Vec<f64>>,
    pub translation_scale: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self {
            d: 6,
            fix_dim: 2,
            gap: 1.0,
            block: BlockKind::Mixed,
            schedule: constant_spec(0.5),
            n: 200,
            tol: 1e-8,
            translation: None,
            translation_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AveragedParams {
    pub d: usize,
    pub fix_dim: usize,
    pub gap: f64,
    pub block: BlockKind,
    pub alpha: f64,
    pub mu_schedule: ScheduleSpec,
    pub n: usize,
    pub tol: f64,
}

impl Default for AveragedParams {
    fn default() -> Self {
        Self {
            d: 6,
            fix_dim: 2,
            gap: 1.0,
            block: BlockKind::Mixed,
            alpha: 0.5,
            mu_schedule: constant_spec(0.75),
            n: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubspaceParams {
    pub d: usize,
    pub fix_dim: usize,
    pub gap: f64,
    pub block: BlockKind,
    pub tol: f64,
}

impl Default for SubspaceParams {
    fn default() -> Self {
        Self { d: 6, fix_dim: 2, gap: 0.5, block: BlockKind::Mixed, tol: 1e-8 }
    }
}

fn positive_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("tol must be positive and finite, got {tol}")))
    }
}

fn synthesize(seed: u64, d: usize, fix_dim: usize, gap: f64, block: BlockKind) -> Result<SynthesizedOperator<f64>> {
    synthesize_nonexpansive(&SynthesisSpec::new(seed, d, fix_dim, gap).with_block(block))
}

fn build_schedule(spec: &ScheduleSpec) -> Result<Schedule<f64>> {
    spec.build(None::<&Path>)
}

/// `None` when the divergence hypothesis holds, else the reason it does not.
fn divergence_gap(schedule: &Schedule<f64>) -> Result<Option<String>> {
    match schedule.classify(CLASSIFY_N, CLASSIFY_WINDOW) {
        Ok(Classification::DivergentLikely) => Ok(None),
        Ok(other) => Ok(Some(format!(
            "divergence hypothesis not established (classified {other:?}); the theorem makes no claim"
        ))),
        Err(Error::ScheduleExhausted { len, .. }) => {
            Ok(Some(format!("schedule of length {len} too short to classify; the theorem makes no claim")))
        }
        Err(e) => Err(e),
    }
}

fn seeded_start(seed: u64, op: &SynthesizedOperator<f64>, start: StartPoint) -> Result<Vector<f64>> {
    let raw = SeededRng::new(seed ^ X0_STREAM).unit_vector::<f64>(op.operator.dim());
    let projected = match start {
        StartPoint::Seeded => return Ok(raw),
        StartPoint::InFixed => op.fixed_basis.project(&raw)?,
        StartPoint::InComplement => op.complement_basis.project(&raw)?,
    };
    projected
        .normalized()
        .ok_or_else(|| Error::invalid(format!("start {start:?} needs a nontrivial subspace")))
}

fn record_trace(r: &mut ReportBuilder, trace: &IterationTrace<f64>) -> Result<()> {
    let s = &trace.summary;
    r.measure("iterations", s.final_n as f64);
    r.measure("final_dist_to_limit", s.final_dist_to_limit);
    r.measure("initial_residual", s.initial_residual);
    r.measure("max_residual", s.max_residual);
    r.measure("final_residual", s.final_residual);
    r.measure("min_fejer_margin", fejer_monitor(trace)?.min_margin);
    r.expect("min_fejer_margin", Expectation::AtLeast(-FEJER_SLACK));
    Ok(())
}

enum Flow {
    Continue,
    Indeterminate(String),
}

/// Shared body of the convergence checks. Adds the limit expectation itself.
fn converge(
    r: &mut ReportBuilder,
    seed: u64,
    op: &SynthesizedOperator<f64>,
    schedule: &Schedule<f64>,
    x0: &Vector<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<Flow> {
    if let Some(reason) = divergence_gap(schedule)? {
        return Ok(Flow::Indeterminate(reason));
    }
    let t = &op.operator;
    r.measure("x0_norm", x0.norm());
    if op.normal {
        let g0 = op.complement_basis.project(x0)?.norm();
        let lambda = |k| schedule.lambda_at(k);
        let spectrum = normal_spectrum(t)?;
        let predicted = if g0 == 0.0 {
            Some(0)
        } else {
            spectrum.iterations_to_envelope(lambda, max_iters, FIXED_EIGEN_TOL, tol / g0)?
        };
        match predicted {
            Some(n) => r.measure("predicted_iters", n as f64),
            None => {
                r.measure("envelope_at_max_iters", spectrum.off_fixed_envelope(lambda, max_iters, FIXED_EIGEN_TOL)?);
                return Ok(Flow::Indeterminate(format!(
                    "eigen envelope predicts tol {tol:e} unreachable within {max_iters} iterations"
                )));
            }
        }
    }
    let opts = RunOptions::default()
        .with_max_iters(max_iters)
        .with_stop(StopRule::KnownLimit { tol })
        .with_seed(seed);
    let trace = run(t, schedule, x0, &opts)?;
    record_trace(r, &trace)?;
    r.expect("final_dist_to_limit", Expectation::AtMost(tol));
    Ok(Flow::Continue)
}

fn finish(r: ReportBuilder, flow: Result<Flow>) -> CheckReport {
    match flow {
        Ok(Flow::Continue) => r.finish(),
        Ok(Flow::Indeterminate(reason)) => r.indeterminate(reason),
        Err(e) => r.error(&e),
    }
}

/// Strong convergence to `P_F x₀` for a synthesized operator under a
/// divergent schedule.
pub fn check_main_theorem(seed: u64, p: &MainTheoremParams) -> CheckReport {
    let mut r = ReportBuilder::new("main_theorem", seed);
    let flow = (|| {
        positive_tol(p.tol)?;
        let op = synthesize(seed, p.d, p.fix_dim, p.gap, p.block)?;
        let schedule = build_schedule(&p.schedule)?;
        let x0 = seeded_start(seed, &op, p.start)?;
        converge(&mut r, seed, &op, &schedule, &x0, p.tol, p.max_iters)
    })();
    finish(r, flow)
}

/// Constant-parameter convergence, plus `|1 − λ + λμ| < 1` for every
/// eigenvalue `μ ≠ 1` when the operator is normal.
pub fn check_bbr_constant(seed: u64, p: &BbrConstantParams) -> CheckReport {
    let mut r = ReportBuilder::new("bbr_constant", seed);
    let flow = (|| {
        positive_tol(p.tol)?;
        if !(p.lambda > 0.0 && p.lambda < 1.0) {
            return Err(Error::invalid(format!("lambda must lie in (0, 1), got {}", p.lambda)));
        }
        let op = synthesize(seed, p.d, p.fix_dim, p.gap, p.block)?;
        if op.normal {
            let spectrum = normal_spectrum(&op.operator)?;
            let l = p.lambda;
            let modulus = spectrum
                .eigenvalues()
                .into_iter()
                .filter(|mu| (mu - 1.0).norm() > FIXED_EIGEN_TOL)
                .map(|mu| (mu * l + (1.0 - l)).norm())
                .fold(0.0, f64::max);
            r.measure("max_off_fixed_modulus", modulus);
            r.expect("max_off_fixed_modulus", Expectation::AtMost(1.0 - 1e-12));
        } else {
            r.note("operator not normal; eigen factors not checked");
        }
        let schedule = Schedule::constant(p.lambda)?;
        let x0 = seeded_start(seed, &op, StartPoint::Seeded)?;
        let flow = converge(&mut r, seed, &op, &schedule, &x0, p.tol, p.max_iters)?;
        if let Some(&n) = r.measured.get("iterations") {
            if let Some(&m) = r.measured.get("max_off_fixed_modulus") {
                r.measure("envelope_at_iterations", m.powf(n));
            }
        }
        Ok(flow)
    })();
    finish(r, flow)
}

/// `T = −Id` with a summable schedule below 1/2: the iterate follows the exact
/// product formula and stays bounded away from `F = {0}`.
pub fn check_counterexample_nondivergent(seed: u64, p: &CounterexampleParams) -> CheckReport {
    let mut r = ReportBuilder::new("counterexample_nondivergent", seed);
    let flow = (|| {
        positive_tol(p.tol)?;
        let schedule = build_schedule(&p.schedule)?;
        let mut coefficient = 1.0;
        for k in 0..p.n {
            let l = schedule.raw_at(k)?;
            if !(0.0..0.5).contains(&l) {
                return Err(Error::invalid(format!("precondition: lambda_{k} = {l} outside [0, 1/2)")));
            }
            coefficient *= 1.0 - 2.0 * l;
        }
        match schedule.classify(CLASSIFY_N, CLASSIFY_WINDOW) {
            Ok(Classification::SummableLikely) => {}
            Ok(other) => {
                return Err(Error::invalid(format!("precondition: schedule must be summable, classified {other:?}")))
            }
            Err(e) => return Err(e),
        }
        let t = LinearOperator::scaled_identity(p.d, -1.0);
        let x0 = SeededRng::new(seed ^ X0_STREAM).unit_vector::<f64>(p.d);
        let opts = RunOptions::default().with_max_iters(p.n).with_stop(StopRule::MaxIters).with_seed(seed);
        let trace = run(&t, &schedule, &x0, &opts)?;
        record_trace(&mut r, &trace)?;
        let x_n = &trace.final_x;
        let lambda_sum = schedule.parameter_sum(p.n)?;
        let bound = 1.0 - 2.0 * lambda_sum;
        r.measure("product_coefficient", coefficient);
        r.measure("product_defect", x_n.distance(&x0.scale(coefficient)));
        r.measure("lambda_sum", lambda_sum);
        r.measure("norm_lower_bound", bound);
        r.measure("norm_ratio", x_n.norm() / x0.norm());
        r.expect("product_defect", Expectation::AtMost(p.tol));
        r.expect("norm_ratio", Expectation::AtLeast(bound));
        if bound <= 0.0 {
            return Ok(Flow::Indeterminate(format!(
                "sum of parameters {lambda_sum} is at least 1/2, so the lower bound certifies nothing"
            )));
        }
        Ok(Flow::Continue)
    })();
    finish(r, flow)
}

/// Minimum-norm solution of `A x = b` from the symmetric eigendecomposition
/// of `AᵀA` (nalgebra), independent of the crate's own SVD.
fn particular_solution(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = (a.transpose() * a).symmetric_eigen();
    let floor = 1e-12 * eig.eigenvalues.max().max(1.0);
    let atb = a.transpose() * b;
    let mut x = DVector::zeros(a.ncols());
    for (i, &w) in eig.eigenvalues.iter().enumerate() {
        if w > floor {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(&atb) / w);
        }
    }
    let residual = (a * &x - b).norm();
    if residual > 1e-9 * (1.0 + b.norm()) {
        return Err(Error::EmptyFixedSet { residual });
    }
    Ok(x)
}

fn to_dvector(v: &Vector<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn max_pointwise_gap(a: &IterationTrace<f64>, b: &IterationTrace<f64>, shift: Option<&Vector<f64>>) -> Result<f64> {
    if a.steps.len() != b.steps.len() {
        return Err(Error::invalid("traces have different lengths"));
    }
    let mut worst = 0.0f64;
    for (sa, sb) in a.steps.iter().zip(&b.steps) {
        let (Some(xa), Some(xb)) = (&sa.x, &sb.x) else {
            return Err(Error::invalid("trace vectors were not recorded"));
        };
        let xb = match shift {
            Some(s) => xb + s,
            None => xb.clone(),
        };
        worst = worst.max(xa.distance(&xb));
    }
    Ok(worst)
}

fn full_trace_options(seed: u64, n: usize) -> RunOptions<f64> {
    RunOptions { keep_edges: 0, ..RunOptions::default() }
        .with_max_iters(n)
        .with_stop(StopRule::MaxIters)
        .with_record_every(1)
        .with_vectors()
        .with_seed(seed)
}

/// KM on `x ↦ Lx + b`: the run must equal the linear run conjugated by the
/// minimum-norm fixed point, and converge to the projection of `x₀` onto the
/// affine fixed set.
pub fn check_affine(seed: u64, p: &AffineParams) -> CheckReport {
    let mut r = ReportBuilder::new("affine", seed);
    let flow = (|| {
        positive_tol(p.tol)?;
        let op = synthesize(seed, p.d, p.fix_dim, p.gap, p.block)?;
        let l = op.operator.clone();
        let b = match &p.translation {
            Some(b) => Vector::new(b.clone())?,
            None => {
                let z = SeededRng::new(seed ^ TRANSLATION_STREAM).gaussian_vector::<f64>(p.d).scale(p.translation_scale);
                l.matrix().identity_minus().mul_vec(&z)
            }
        };
        let t = AffineOperator::new(l.clone(), b.clone())?;
        let schedule = build_schedule(&p.schedule)?;
        if let Some(reason) = divergence_gap(&schedule)? {
            return Ok(Flow::Indeterminate(reason));
        }

        // Direct projection onto x_p + Fix L, using nalgebra for x_p and the
        // synthesis ground truth for Fix L.
        let a = l.matrix().identity_minus();
        let a_na = DMatrix::from_row_slice(p.d, p.d, a.as_slice());
        let xp = Vector::new(particular_solution(&a_na, &to_dvector(&b))?.as_slice().to_vec())?;
        let x0 = SeededRng::new(seed ^ X0_STREAM).unit_vector::<f64>(p.d);
        let direct = &xp + &op.fixed_basis.project(&(&x0 - &xp))?;

        let fixed = fixed_set(&t, default_rank_tol())?;
        let x_star = fixed.anchor().clone();
        let opts = full_trace_options(seed, p.n);
        let affine = run(&t, &schedule, &x0, &opts)?;
        let linear = run(&l, &schedule, &(&x0 - &x_star), &opts)?;
        record_trace(&mut r, &affine)?;
        r.measure("conjugation_defect", max_pointwise_gap(&affine, &linear, Some(&x_star))?);
        r.measure("limit_error", affine.final_x.distance(&direct));
        r.measure("projection_error", affine.limit.distance(&direct));
        r.measure("anchor_residual", a.mul_vec(&x_star).distance(&b));
        r.expect("conjugation_defect", Expectation::AtMost(TRACE_IDENTITY_TOL));
        r.expect("limit_error", Expectation::AtMost(p.tol));
        Ok(Flow::Continue)
    })();
    finish(r, flow)
}

/// `T = (1 − α)Id + αN` relaxed with `λₙ = μₙ/α`, possibly above 1: the run
/// must coincide with the run of `N` under `μₙ` and converge to `P_F x₀`.
pub fn check_averaged_extended_range(seed: u64, p: &AveragedParams) -> CheckReport {
    let mut r = ReportBuilder::new("averaged_extended_range", seed);
    let flow = (|| {
        positive_tol(p.tol)?;
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", p.alpha)));
        }
        let mu = build_schedule(&p.mu_schedule)?;
        let mut lambda_max = 0.0f64;
        for k in 0..p.n {
            let m = mu.raw_at(k)?;
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::invalid(format!("precondition: mu_{k} = {m} outside [0, 1]")));
            }
            lambda_max = lambda_max.max(m / p.alpha);
        }
        r.measure("lambda_max", lambda_max);
        if let Some(reason) = divergence_gap(&mu)? {
            return Ok(Flow::Indeterminate(reason));
        }
        let n_op = synthesize(seed, p.d, p.fix_dim, p.gap, p.block)?;
        let t = n_op.operator.relax(p.alpha)?;
        let x0 = SeededRng::new(seed ^ X0_STREAM).unit_vector::<f64>(p.d);
        let opts = full_trace_options(seed, p.n);

        let fixed_t = fixed_set(&t, default_rank_tol())?;
        let alpha = p.alpha;
        let extended = run_with_parameters(
            &t,
            &fixed_t,
            |k| Ok(mu.raw_at(k)? / alpha),
            1.0 / alpha,
            &format!("{} / {alpha}", mu.describe()),
            &x0,
            &opts,
        )?;
        let delegated = run(&n_op.operator, &mu, &x0, &opts)?;
        record_trace(&mut r, &extended)?;
        r.measure("delegation_defect", max_pointwise_gap(&extended, &delegated, None)?);
        r.measure("fixed_set_mismatch", extended.limit.distance(&delegated.limit));
        r.expect("delegation_defect", Expectation::AtMost(TRACE_IDENTITY_TOL));
        r.expect("fixed_set_mismatch", Expectation::AtMost(1e-10));
        r.expect("final_dist_to_limit", Expectation::AtMost(p.tol));
        Ok(Flow::Continue)
    })();
    finish(r, flow)
}

/// `Fix T ⟂ ran(Id − T)` with `Fix T = (ran(Id − T))^⊥`, `ker(Id − T) =
/// ker(Id − Tᵀ)`, rank–nullity, and agreement with the synthesized ground
/// truth.
pub fn check_subspace_identities(seed: u64, p: &SubspaceParams) -> CheckReport {
    let mut r = ReportBuilder::new("subspace_identities", seed);
    let flow = (|| {
        positive_tol(p.tol)?;
        let op = synthesize(seed, p.d, p.fix_dim, p.gap, p.block)?;
        let perp = check_perp_identity(&op.operator, p.tol)?;
        let adjoint = check_adjoint_kernel_identity(&op.operator, p.tol)?;
        let computed = crate::subspace::fixed_subspace(&op.operator, default_rank_tol())?;
        let truth_angle = if computed.dim() == op.fixed_basis.dim() {
            max_principal_angle(&computed, &op.fixed_basis)?
        } else {
            f64::INFINITY
        };
        r.measure("dim_fixed", perp.dim_fixed as f64);
        r.measure("dim_range", perp.dim_ran as f64);
        r.measure("rank_nullity_defect", (perp.dim_fixed + perp.dim_ran).abs_diff(p.d) as f64);
        r.measure("fix_dim_error", perp.dim_fixed.abs_diff(p.fix_dim) as f64);
        r.measure("adjoint_dim_error", adjoint.dim_kernel.abs_diff(adjoint.dim_adjoint_kernel) as f64);
        r.measure("perp_max_angle", perp.max_principal_angle);
        r.measure("adjoint_max_angle", adjoint.max_principal_angle);
        r.measure("ground_truth_angle", truth_angle);
        for key in ["rank_nullity_defect", "fix_dim_error", "adjoint_dim_error"] {
            r.expect(key, Expectation::AtMost(0.0));
        }
        for key in ["perp_max_angle", "adjoint_max_angle", "ground_truth_angle"] {
            r.expect(key, Expectation::AtMost(p.tol));
        }
        Ok(Flow::Continue)
    })();
    finish(r, flow)
}
