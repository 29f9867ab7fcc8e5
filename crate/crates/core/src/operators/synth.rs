//! Seeded test operators with a prescribed fixed subspace.
//!
//! `T = Q (I_k ⊕ B) Qᵀ` where `Q` is a random orthogonal matrix and `B` has no
//! eigenvalue at 1. The first `k` columns of `Q` span `Fix T` exactly (up to
//! rounding) and are returned as ground truth.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{householder_qr, Matrix, Vector};
use crate::operators::{operator_norm, LinearOperator};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::subspace::SubspaceBasis;

/// Structure of the block acting on the orthogonal complement of `Fix T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Seeded mix of plane rotations with angle in `[arccos(1 − gap), π]` and
    /// scalar factors in `[−1, 1 − gap]`.
    #[default]
    Mixed,
    /// `B = −I`.
    NegativeIdentity,
    /// Quarter-turn rotation blocks, with a trailing `−1` when the block
    /// dimension is odd.
    QuarterTurn,
    /// Upper-triangular, non-normal block: diagonal in `[−1, 1 − gap]`, seeded
    /// couplings above it, rescaled so that `‖B‖ ≤ 1`.
    Skewed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub seed: u64,
    pub dim: usize,
    pub fix_dim: usize,
    pub gap: f64,
    #[serde(default)]
    pub block: BlockKind,
}

impl SynthesisSpec {
    pub fn new(seed: u64, dim: usize, fix_dim: usize, gap: f64) -> Self {
        Self { seed, dim, fix_dim, gap, block: BlockKind::Mixed }
    }

    pub fn with_block(mut self, block: BlockKind) -> Self {
        self.block = block;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SynthesizedOperator<S> {
    pub operator: LinearOperator<S>,
    /// Ground-truth orthonormal basis of `Fix T`.
    pub fixed_basis: SubspaceBasis<S>,
    /// Ground-truth orthonormal basis of `(Fix T)^⊥`.
    pub complement_basis: SubspaceBasis<S>,
    /// Spectrum of the off-fixed block (each conjugate pair listed once per
    /// member). Empty when `fix_dim = dim`.
    pub block_eigenvalues: Vec<Complex<S>>,
    /// Whether the result is normal by construction.
    pub normal: bool,
    pub spec: SynthesisSpec,
}

/// Builds a seeded nonexpansive operator whose fixed subspace has dimension
/// `fix_dim` exactly.
pub fn synthesize_nonexpansive<S: Scalar>(spec: &SynthesisSpec) -> Result<SynthesizedOperator<S>> {
    let d = spec.dim;
    let k = spec.fix_dim;
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if k > d {
        return Err(Error::invalid(format!("fix_dim {k} exceeds dimension {d}")));
    }
    if !(spec.gap > 0.0 && spec.gap <= 1.0) {
        return Err(Error::invalid(format!("gap must lie in (0, 1], got {}", spec.gap)));
    }

    let mut rng = SeededRng::new(spec.seed);
    let q = random_orthogonal::<S>(&mut rng, d);
    let m = d - k;
    let (block, eigenvalues) = build_block::<S>(&mut rng, m, spec.gap, spec.block)?;

    let mut core = Matrix::zeros(d, d);
    for i in 0..k {
        core[(i, i)] = S::one();
    }
    for i in 0..m {
        for j in 0..m {
            core[(k + i, k + j)] = block[(i, j)];
        }
    }
    let mut t = q.matmul(&core).matmul(&q.transpose());
    let sigma = operator_norm(&t)?;
    if sigma > S::one() {
        t = t.scale(S::one() / sigma);
    }
    let operator = LinearOperator::new(t)?;

    let columns: Vec<Vector<S>> = (0..d).map(|j| q.column(j)).collect();
    let fixed_basis = SubspaceBasis::from_orthonormal_unchecked(d, columns[..k].to_vec());
    let complement_basis = SubspaceBasis::from_orthonormal_unchecked(d, columns[k..].to_vec());
    Ok(SynthesizedOperator {
        operator,
        fixed_basis,
        complement_basis,
        block_eigenvalues: eigenvalues,
        normal: spec.block != BlockKind::Skewed,
        spec: *spec,
    })
}

/// Orthogonal factor of the QR decomposition of a seeded Gaussian matrix, with
/// columns sign-flipped so that `R` has a nonnegative diagonal.
pub(crate) fn random_orthogonal<S: Scalar>(rng: &mut SeededRng, dim: usize) -> Matrix<S> {
    let g = rng.gaussian_matrix::<S>(dim, dim);
    let (mut q, r) = householder_qr(&g);
    for j in 0..dim {
        if r[(j, j)] < S::zero() {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn rotation_block<S: Scalar>(block: &mut Matrix<S>, at: usize, theta: S) -> [Complex<S>; 2] {
    let (s, c) = theta.sin_cos();
    block[(at, at)] = c;
    block[(at, at + 1)] = -s;
    block[(at + 1, at)] = s;
    block[(at + 1, at + 1)] = c;
    [Complex::new(c, s), Complex::new(c, -s)]
}

fn build_block<S: Scalar>(
    rng: &mut SeededRng,
    m: usize,
    gap: f64,
    kind: BlockKind,
) -> Result<(Matrix<S>, Vec<Complex<S>>)> {
    let mut block = Matrix::zeros(m, m);
    let mut eig = Vec::with_capacity(m);
    let min_angle = (1.0 - gap).acos();
    let max_scalar = 1.0 - gap;
    match kind {
        BlockKind::NegativeIdentity => {
            for i in 0..m {
                block[(i, i)] = -S::one();
                eig.push(Complex::new(-S::one(), S::zero()));
            }
        }
        BlockKind::QuarterTurn => {
            let mut i = 0;
            while i + 1 < m {
                eig.extend(rotation_block(&mut block, i, S::FRAC_PI_2()));
                i += 2;
            }
            if i < m {
                block[(i, i)] = -S::one();
                eig.push(Complex::new(-S::one(), S::zero()));
            }
        }
        BlockKind::Mixed => {
            let mut i = 0;
            while i < m {
                let use_rotation = m - i >= 2 && rng.uniform() < 0.5;
                if use_rotation {
                    let theta = S::lit(rng.uniform_in(min_angle, std::f64::consts::PI));
                    eig.extend(rotation_block(&mut block, i, theta));
                    i += 2;
                } else {
                    let c = S::lit(rng.uniform_in(-1.0, max_scalar));
                    block[(i, i)] = c;
                    eig.push(Complex::new(c, S::zero()));
                    i += 1;
                }
            }
        }
        BlockKind::Skewed => {
            for i in 0..m {
                block[(i, i)] = S::lit(rng.uniform_in(-1.0, max_scalar));
                for j in (i + 1)..m {
                    block[(i, j)] = S::lit(0.5 * rng.standard_normal());
                }
            }
            if m > 0 {
                let sigma = operator_norm(&block)?;
                if sigma > S::one() {
                    block = block.scale(S::one() / sigma);
                }
            }
            for i in 0..m {
                eig.push(Complex::new(block[(i, i)], S::zero()));
            }
        }
    }
    Ok((block, eig))
}
