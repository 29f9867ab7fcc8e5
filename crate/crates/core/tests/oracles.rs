//! Closed-form and exact-arithmetic oracles against the library.

use kmfix::iteration::{eigen_oracle, product_oracle, run, RunOptions, StopRule};
use kmfix::linalg::Vector;
use kmfix::operators::{synthesize_nonexpansive, BlockKind, LinearOperator, SynthesisSpec};
use kmfix::rng::SeededRng;
use kmfix::schedules::{Classification, Schedule};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Σ_{n<N} c rⁿ (1 − c rⁿ) in exact rational arithmetic.
fn geometric_partial_sum_exact(c: &BigRational, r: &BigRational, n_terms: usize) -> BigRational {
    let mut sum = BigRational::zero();
    let mut term = c.clone();
    for _ in 0..n_terms {
        sum += &term * (BigRational::one() - &term);
        term *= r;
    }
    sum
}

#[test]
fn geometric_partial_sums_match_exact_rationals() {
    // Frozen from the exact oracle below.
    let cases = [(0.25, 0.5, 60, 0.4166666666666667), (0.75, 0.875, 200, 3.5999999999848726)];
    for (c, r, n, frozen) in cases {
        let oracle = geometric_partial_sum_exact(&exact(c), &exact(r), n).to_f64().unwrap();
        assert_eq!(oracle, frozen);
        let s = Schedule::geometric(c, r).unwrap().divergence_partial_sum(n).unwrap();
        assert!((s - oracle).abs() <= 2.0 * f64::EPSILON * oracle, "{s} vs {oracle}");
    }
}

#[test]
fn counterexample_product_matches_exact_rationals() {
    // Π_{k<N} (1 − 2·4^{−k−1}): factors beyond k = 40 differ from 1 by less
    // than 1e-24, so the exact 40-term product is the f64 value for any N ≥ 40.
    let mut exact_product = BigRational::one();
    for k in 0..40u32 {
        exact_product *= BigRational::one() - ratio(2, 1) / BigRational::from(BigInt::from(4).pow(k + 1));
    }
    let oracle = exact_product.to_f64().unwrap();
    assert_eq!(oracle, 0.41942244179510757);

    let t = LinearOperator::scaled_identity(4, -1.0);
    let s = Schedule::geometric(0.25, 0.25).unwrap();
    let x0 = SeededRng::new(17).unit_vector::<f64>(4);
    let opts = RunOptions::default().with_max_iters(1000).with_stop(StopRule::MaxIters);
    let trace = run(&t, &s, &x0, &opts).unwrap();
    assert!(trace.final_x.distance(&x0.scale(oracle)) <= 1e-15);
    let via_product = product_oracle(&t, &s, &x0, 1000).unwrap();
    assert!(via_product.distance(&x0.scale(oracle)) <= 1e-15);
    let via_eigen = eigen_oracle(&t, &s, &x0, 1000).unwrap();
    assert!(via_eigen.distance(&x0.scale(oracle)) <= 1e-15);
    // The bound 1 − 2Σλ = 1/3 holds with room to spare.
    let sum = s.parameter_sum(1000).unwrap();
    assert!((1.0 - 2.0 * sum - 1.0 / 3.0).abs() < 1e-15);
    assert!(oracle > 1.0 / 3.0);
}

#[test]
fn harmonic_doubling_increment_is_ln2() {
    let h = Schedule::<f64>::harmonic();
    for n in [1_000, 4_000, 30_000, 1_000_000] {
        let sums = h.partial_sums_at(&[n, 2 * n]).unwrap();
        assert!((sums[1] - sums[0] - std::f64::consts::LN_2).abs() < 0.05, "N = {n}");
    }
    assert_eq!(h.classify(10_000, 1_000).unwrap(), Classification::DivergentLikely);
}

#[test]
fn constant_half_partial_sum_is_quarter_per_term() {
    let s = Schedule::constant(0.5).unwrap();
    assert_eq!(s.divergence_partial_sum(100).unwrap(), 25.0);
}

#[test]
fn quarter_turn_modulus_power() {
    // |1 − λ + λi| at λ = 1/2 is √2/2; its 100th power is 2⁻⁵⁰.
    let frozen = 8.881784197001252e-16;
    assert_eq!(2f64.powi(-50), frozen);
    let t = LinearOperator::rotation(std::f64::consts::FRAC_PI_2).unwrap();
    let x0 = Vector::new(vec![1.0, 0.0]).unwrap();
    let y = eigen_oracle(&t, &Schedule::constant(0.5).unwrap(), &x0, 100).unwrap();
    assert!((y.norm() / frozen - 1.0).abs() < 1e-12);
}

#[test]
fn engine_matches_both_oracles_on_synthesized_operators() {
    for seed in 0..30u64 {
        let d = 4 + (seed % 7) as usize;
        let fix_dim = 1 + (seed as usize) % (d - 1);
        let block = [BlockKind::Mixed, BlockKind::QuarterTurn, BlockKind::NegativeIdentity, BlockKind::Skewed]
            [(seed % 4) as usize];
        let op = synthesize_nonexpansive(&SynthesisSpec::new(seed, d, fix_dim, 0.3).with_block(block)).unwrap();
        let x0 = SeededRng::new(seed + 100).gaussian_vector::<f64>(d);
        let scale = 1.0 + x0.norm();
        for s in [Schedule::constant(0.5).unwrap(), Schedule::harmonic(), Schedule::complement_harmonic()] {
            let opts = RunOptions::default().with_max_iters(1000).with_stop(StopRule::MaxIters);
            let trace = run(&op.operator, &s, &x0, &opts).unwrap();
            let p = product_oracle(&op.operator, &s, &x0, 1000).unwrap();
            assert!(trace.final_x.distance(&p) <= 1e-9 * scale, "seed {seed} {}", s.describe());
            if op.normal {
                let e = eigen_oracle(&op.operator, &s, &x0, 1000).unwrap();
                assert!(trace.final_x.distance(&e) <= 1e-8 * scale, "seed {seed} {}", s.describe());
            }
        }
    }
}
