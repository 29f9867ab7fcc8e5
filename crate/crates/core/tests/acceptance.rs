//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p kmfix-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use kmfix::experiments::{
    check_affine, check_averaged_extended_range, check_counterexample_nondivergent, check_subspace_identities,
    default_suite, run_suite, AffineParams, AveragedParams, CounterexampleParams, SubspaceParams, Verdict,
    DEFAULT_SUITE_SEED,
};
use kmfix::iteration::{
    decomposition_check, eigen_oracle, fejer_monitor, product_oracle, residual_monitor, run, IterationTrace,
    RunOptions, StopRule,
};
use kmfix::operators::{synthesize_nonexpansive, BlockKind, SynthesisSpec, SynthesizedOperator};
use kmfix::rng::SeededRng;
use kmfix::schedules::Schedule;
use kmfix::Vector64;

type Outcome = Result<String, String>;

struct Instance {
    seed: u64,
    op: SynthesizedOperator<f64>,
    x0: Vector64,
}

/// The 30 operators shared by criteria 1-3 and 6-7: d in 4..=10, every
/// fix_dim in 1..d, gap 1 through quarter-turn or −I blocks.
fn instances() -> Vec<Instance> {
    (0..30u64)
        .map(|i| {
            let d = 4 + (i % 7) as usize;
            let fix_dim = 1 + (i as usize * 5 + i as usize / 7) % (d - 1);
            let block = if i % 2 == 0 { BlockKind::QuarterTurn } else { BlockKind::NegativeIdentity };
            let seed = 1000 + i;
            let op = synthesize_nonexpansive(&SynthesisSpec::new(seed, d, fix_dim, 1.0).with_block(block))
                .expect("synthesis");
            let x0 = SeededRng::new(seed ^ 0xA0).unit_vector::<f64>(d);
            Instance { seed, op, x0 }
        })
        .collect()
}

fn opts(seed: u64, n: usize) -> RunOptions<f64> {
    RunOptions::default().with_max_iters(n).with_stop(StopRule::MaxIters).with_fejer_samples(20).with_seed(seed)
}

struct Runs {
    constant: Vec<IterationTrace<f64>>,
    constant_secs: f64,
    harmonic: Vec<IterationTrace<f64>>,
    harmonic_secs: f64,
}

fn runs(instances: &[Instance]) -> Runs {
    let t = Instant::now();
    let constant: Vec<_> = instances
        .iter()
        .map(|c| run(&c.op.operator, &Schedule::constant(0.5).unwrap(), &c.x0, &opts(c.seed, 200)).unwrap())
        .collect();
    let constant_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let harmonic: Vec<_> = instances
        .iter()
        .map(|c| run(&c.op.operator, &Schedule::harmonic(), &c.x0, &opts(c.seed, 100_000).with_record_every(1)).unwrap())
        .collect();
    let harmonic_secs = t.elapsed().as_secs_f64();
    Runs { constant, constant_secs, harmonic, harmonic_secs }
}

fn criterion_1(r: &Runs) -> Outcome {
    let worst = r.constant.iter().map(|t| t.summary.final_dist_to_limit).fold(0.0, f64::max);
    let steps_ok = r.constant.iter().all(|t| t.summary.final_n == 200);
    let detail = format!("max ‖x_200 − P_F x0‖ = {worst:.3e} over 30 operators in {:.3} s", r.constant_secs);
    if worst <= 1e-8 && steps_ok && r.constant_secs < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2(instances: &[Instance], r: &Runs) -> Outcome {
    let mut worst_dist = 0.0f64;
    let mut worst_increase = f64::NEG_INFINITY;
    let mut worst_decomp_increase = f64::NEG_INFINITY;
    for (c, t) in instances.iter().zip(&r.harmonic) {
        if t.steps.len() != 100_001 {
            return Err(format!("seed {}: expected a full trace", c.seed));
        }
        worst_dist = worst_dist.max(t.summary.final_dist_to_limit / c.x0.norm());
        for w in t.steps.windows(2) {
            worst_increase = worst_increase.max(w[1].dist_to_limit - w[0].dist_to_limit);
        }
        let report = decomposition_check(&c.op.operator, &Schedule::harmonic(), &c.x0, 100_000, 1e-9).unwrap();
        if !report.pass {
            return Err(format!("seed {}: decomposition check failed: {report:?}", c.seed));
        }
        worst_decomp_increase = worst_decomp_increase.max(report.max_norm_increase);
    }
    let detail = format!(
        "max ‖x_n − P_F x0‖/‖x0‖ = {worst_dist:.3e}, max F⊥-norm increase = {worst_increase:.1e} \
         (split run {worst_decomp_increase:.1e}), {:.2} s",
        r.harmonic_secs
    );
    if worst_dist <= 1e-2 && worst_increase <= 1e-12 && worst_decomp_increase <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3(instances: &[Instance]) -> Outcome {
    let mut worst_product = 0.0f64;
    let mut worst_eigen = 0.0f64;
    let mut normal = 0;
    let schedules = [Schedule::constant(0.5).unwrap(), Schedule::harmonic(), Schedule::complement_harmonic()];
    for c in instances {
        let scale = 1.0 + c.x0.norm();
        for s in &schedules {
            let t = run(&c.op.operator, s, &c.x0, &opts(c.seed, 1000)).unwrap();
            let p = product_oracle(&c.op.operator, s, &c.x0, 1000).unwrap();
            worst_product = worst_product.max(t.final_x.distance(&p) / scale);
            if c.op.normal {
                let e = eigen_oracle(&c.op.operator, s, &c.x0, 1000).unwrap();
                worst_eigen = worst_eigen.max(t.final_x.distance(&e) / scale);
                normal += 1;
            }
        }
    }
    let detail = format!(
        "max ‖run − product‖/(1+‖x0‖) = {worst_product:.3e}, max ‖run − eigen‖/(1+‖x0‖) = {worst_eigen:.3e} \
         ({normal} normal runs)"
    );
    if worst_product <= 1e-9 && worst_eigen <= 1e-8 && normal > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4() -> Outcome {
    let r = check_counterexample_nondivergent(DEFAULT_SUITE_SEED, &CounterexampleParams::default());
    let defect = r.measured.get("product_defect").copied().unwrap_or(f64::NAN);
    let ratio = r.measured.get("norm_ratio").copied().unwrap_or(f64::NAN);
    let detail = format!(
        "‖x_N − Π(1−2λ_k)x0‖ = {defect:.3e}, ‖x_N‖/‖x0‖ = {ratio:.17} (bound 1/3), verdict {:?}",
        r.verdict
    );
    if r.verdict == Verdict::Pass && defect <= 1e-12 && ratio >= 1.0 / 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let blocks = [BlockKind::Mixed, BlockKind::QuarterTurn, BlockKind::NegativeIdentity, BlockKind::Skewed];
    let mut worst_angle = 0.0f64;
    for i in 0..50u64 {
        let d = 2 + (i % 9) as usize;
        let p = SubspaceParams {
            d,
            fix_dim: (i as usize * 3) % (d + 1),
            gap: [1.0, 0.5, 0.1, 0.01][(i / 4 % 4) as usize],
            block: blocks[(i % 4) as usize],
            tol: 1e-8,
        };
        let r = check_subspace_identities(2000 + i, &p);
        if r.verdict != Verdict::Pass || r.measured["rank_nullity_defect"] != 0.0 {
            return Err(format!("seed {}: {}", 2000 + i, serde_json::to_string(&r).unwrap()));
        }
        for k in ["perp_max_angle", "adjoint_max_angle"] {
            worst_angle = worst_angle.max(r.measured[k]);
        }
    }
    Ok(format!("50 operators, max principal angle {worst_angle:.3e}, rank-nullity exact"))
}

fn criterion_6(r: &Runs) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut min_samples = usize::MAX;
    for t in r.constant.iter().chain(&r.harmonic) {
        let f = fejer_monitor(t).map_err(|e| e.to_string())?;
        worst = worst.min(f.min_margin);
        min_samples = min_samples.min(f.samples);
    }
    let detail = format!("min Fejér margin {worst:.3e} over 60 runs, at least {min_samples} fixed points each");
    if worst >= -1e-10 && min_samples >= 20 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7(r: &Runs) -> Outcome {
    let c_final = r.constant.iter().map(|t| residual_monitor(t, 1e-6).final_residual).fold(0.0, f64::max);
    let h_final = r.harmonic.iter().map(|t| residual_monitor(t, 1e-2).final_residual).fold(0.0, f64::max);
    let initial_is_max = r.constant.iter().all(|t| t.summary.max_residual == t.summary.initial_residual);
    let detail = format!(
        "final residual {c_final:.3e} (constant), {h_final:.3e} (harmonic); initial residual is the maximum: {initial_is_max}"
    );
    if c_final <= 1e-6 && h_final <= 1e-2 && initial_is_max {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let mut worst_conj = 0.0f64;
    let mut worst_limit = 0.0f64;
    for i in 0..10u64 {
        let d = 3 + (i % 6) as usize;
        let p = AffineParams { d, fix_dim: 1 + (i as usize) % (d - 1), ..AffineParams::default() };
        let r = check_affine(3000 + i, &p);
        if r.verdict != Verdict::Pass {
            return Err(format!("seed {}: {}", 3000 + i, serde_json::to_string(&r).unwrap()));
        }
        worst_conj = worst_conj.max(r.measured["conjugation_defect"]);
        worst_limit = worst_limit.max(r.measured["limit_error"]);
    }
    let detail = format!("10 instances, conjugation defect {worst_conj:.3e}, limit error {worst_limit:.3e}");
    if worst_conj <= 1e-12 && worst_limit <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let mut worst_delegation = 0.0f64;
    let mut worst_dist = 0.0f64;
    for i in 0..10u64 {
        let p = AveragedParams::default();
        let r = check_averaged_extended_range(4000 + i, &p);
        if r.verdict != Verdict::Pass || r.measured["lambda_max"] != 1.5 || r.measured["iterations"] != 200.0 {
            return Err(format!("seed {}: {}", 4000 + i, serde_json::to_string(&r).unwrap()));
        }
        worst_delegation = worst_delegation.max(r.measured["delegation_defect"]);
        worst_dist = worst_dist.max(r.measured["final_dist_to_limit"]);
    }
    let detail = format!(
        "λ ≡ 3/2, α = 1/2: delegation defect {worst_delegation:.3e}, ‖x_200 − P_F x0‖ = {worst_dist:.3e}"
    );
    if worst_delegation <= 1e-12 && worst_dist <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10() -> Outcome {
    let a = run_suite(&default_suite(), DEFAULT_SUITE_SEED);
    let b = run_suite(&default_suite(), DEFAULT_SUITE_SEED);
    let mut values = 0;
    for (ra, rb) in a.iter().zip(&b) {
        if ra.verdict != rb.verdict || ra.measured.len() != rb.measured.len() {
            return Err(format!("{}: reports differ", ra.check_name));
        }
        for ((ka, va), (kb, vb)) in ra.measured.iter().zip(&rb.measured) {
            if ka != kb || va.to_bits() != vb.to_bits() {
                return Err(format!("{}: {ka} = {va:e} vs {kb} = {vb:e}", ra.check_name));
            }
            values += 1;
        }
    }
    let all_pass = a.iter().all(|r| r.verdict == Verdict::Pass);
    let detail = format!("{} reports, {values} measured values identical bit-for-bit; suite all pass: {all_pass}", a.len());
    if a.len() == b.len() && all_pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let instances = instances();
    let runs = runs(&instances);
    let results: Vec<(&str, Outcome)> = vec![
        ("main theorem, constant(0.5), 200 steps", criterion_1(&runs)),
        ("divergent slow schedule, harmonic, 10^5 steps", criterion_2(&instances, &runs)),
        ("engine vs product and eigen oracles, n = 10^3", criterion_3(&instances)),
        ("non-divergent counterexample, T = −Id", criterion_4()),
        ("subspace identities, 50 operators", criterion_5()),
        ("Fejér monotonicity", criterion_6(&runs)),
        ("residual decay", criterion_7(&runs)),
        ("affine extension", criterion_8()),
        ("averaged operator, extended range", criterion_9()),
        ("determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
