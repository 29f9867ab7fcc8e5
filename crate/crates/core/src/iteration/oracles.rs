//! Independent arithmetic paths for cross-checking the engine.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fixed_set::fixed_set;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operators::{relaxed_matrix, LinearOperator, NonexpansiveMap};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::schedules::Schedule;
use crate::subspace::default_rank_tol;

/// Largest `n` accepted by [`product_oracle`].
pub const PRODUCT_ORACLE_CAP: usize = 10_000;

/// Largest `‖TTᵀ − TᵀT‖_F` accepted by [`normal_spectrum`].
pub const NORMALITY_TOL: f64 = 1e-9;

const SCHUR_SHIFT: f64 = 2.0;
const SCHUR_RETRIES: usize = 4;
const SCHUR_RETRY_SEED: u64 = 0x5C4E_0001;

/// `xₙ` via the explicit matrix product `T_{λ_{n−1}} ⋯ T_{λ₀}` applied to `x₀`.
pub fn product_oracle<S: Scalar>(t: &LinearOperator<S>, schedule: &Schedule<S>, x0: &Vector<S>, n: usize) -> Result<Vector<S>> {
    product_oracle_with(t, |k| schedule.lambda_at(k), x0, n)
}

/// [`product_oracle`] with parameters from a closure. Parameters are not
/// restricted to `[0, 1]`.
pub fn product_oracle_with<S, F>(t: &LinearOperator<S>, lambda: F, x0: &Vector<S>, n: usize) -> Result<Vector<S>>
where
    S: Scalar,
    F: Fn(usize) -> Result<S>,
{
    if n > PRODUCT_ORACLE_CAP {
        return Err(Error::CapExceeded { requested: n, cap: PRODUCT_ORACLE_CAP });
    }
    x0.check_dim(t.dim())?;
    let mut product = Matrix::identity(t.dim());
    for k in 0..n {
        let l = lambda(k)?;
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("lambda at n = {k}")));
        }
        product = relaxed_matrix(t.matrix(), l).matmul(&product);
    }
    if !product.is_finite() {
        return Err(Error::NumericalAbort { step: n, reason: "non-finite operator product".into() });
    }
    Ok(product.mul_vec(x0))
}

/// One invariant block of a real normal matrix in an orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralBlock {
    /// Coordinate `index` is scaled by the real eigenvalue `mu`.
    Real { index: usize, mu: f64 },
    /// `y_index + i·y_{index+1}` is multiplied by `mu` (eigenvalues `mu`, `conj(mu)`).
    Pair { index: usize, mu: Complex64 },
}

impl SpectralBlock {
    pub fn mu(&self) -> Complex64 {
        match *self {
            SpectralBlock::Real { mu, .. } => Complex64::new(mu, 0.0),
            SpectralBlock::Pair { mu, .. } => mu,
        }
    }
}

/// Orthonormal block diagonalization `T = Q D Qᵀ` of a normal matrix, with
/// `D` made of 1×1 and rotation-scaling 2×2 blocks.
#[derive(Debug, Clone)]
pub struct NormalSpectrum {
    q: DMatrix<f64>,
    blocks: Vec<SpectralBlock>,
}

/// Decomposes a normal operator through its real Schur form (computed in f64).
pub fn normal_spectrum<S: Scalar>(t: &LinearOperator<S>) -> Result<NormalSpectrum> {
    let defect = t.normality_defect().to_f64_lossy();
    if !(defect <= NORMALITY_TOL) {
        return Err(Error::NotNormal { defect });
    }
    let d = t.dim();
    let a = DMatrix::from_fn(d, d, |i, j| t.matrix()[(i, j)].to_f64_lossy());
    let (mut q, mut r) = shifted_schur(&a)?;
    for i in 0..d {
        r[(i, i)] -= SCHUR_SHIFT;
    }
    let split = 1e-12 * r.abs().max().max(1.0);
    let mut blocks = Vec::with_capacity(d);
    let mut i = 0;
    while i < d {
        if i + 1 < d && r[(i + 1, i)].abs() > split {
            let (a11, a12, a21, a22) = (r[(i, i)], r[(i, i + 1)], r[(i + 1, i)], r[(i + 1, i + 1)]);
            let half = 0.5 * (a11 - a22);
            if half * half + a12 * a21 < 0.0 {
                let mu = Complex64::new(0.5 * (a11 + a22), 0.5 * (a21 - a12));
                blocks.push(SpectralBlock::Pair { index: i, mu });
            } else {
                // Real eigenvalues in a normal 2×2 block: the block is symmetric.
                let s = 0.5 * (a12 + a21);
                let phi = 0.5 * (2.0 * s).atan2(a11 - a22);
                let (sn, cs) = phi.sin_cos();
                let mu1 = a11 * cs * cs + 2.0 * s * sn * cs + a22 * sn * sn;
                let mu2 = a11 * sn * sn - 2.0 * s * sn * cs + a22 * cs * cs;
                for row in 0..d {
                    let (qa, qb) = (q[(row, i)], q[(row, i + 1)]);
                    q[(row, i)] = cs * qa + sn * qb;
                    q[(row, i + 1)] = -sn * qa + cs * qb;
                }
                blocks.push(SpectralBlock::Real { index: i, mu: mu1 });
                blocks.push(SpectralBlock::Real { index: i + 1, mu: mu2 });
            }
            i += 2;
        } else {
            blocks.push(SpectralBlock::Real { index: i, mu: r[(i, i)] });
            i += 1;
        }
    }
    Ok(NormalSpectrum { q, blocks })
}

/// Real Schur form of `a + SCHUR_SHIFT·Id`.
///
/// Francis QR deflates relative to the diagonal, which stalls on blocks with
/// zero trace, hence the shift. The unshifted double-shift iteration also
/// cycles on some repeated complex pairs; those get a fixed random orthogonal
/// change of basis before the retry.
fn shifted_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = a.nrows();
    let cap = 1000 * d.max(1);
    let shifted = |m: &DMatrix<f64>| m + DMatrix::identity(d, d) * SCHUR_SHIFT;
    if let Some(schur) = Schur::try_new(shifted(a), f64::EPSILON, cap) {
        return Ok(schur.unpack());
    }
    let mut rng = SeededRng::new(SCHUR_RETRY_SEED);
    for _ in 0..SCHUR_RETRIES {
        let g = DMatrix::from_fn(d, d, |_, _| rng.standard_normal());
        let basis = g.qr().q();
        let conjugated = basis.tr_mul(a) * &basis;
        if let Some(schur) = Schur::try_new(shifted(&conjugated), f64::EPSILON, cap) {
            let (q, r) = schur.unpack();
            return Ok((basis * q, r));
        }
    }
    Err(Error::NotConverged { what: "real Schur decomposition", iterations: cap })
}

impl NormalSpectrum {
    pub fn blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    /// All eigenvalues, conjugate pairs listed twice.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.q.ncols());
        for b in &self.blocks {
            out.push(b.mu());
            if let SpectralBlock::Pair { mu, .. } = b {
                out.push(mu.conj());
            }
        }
        out
    }

    /// Per-block products `Π_{k<n} (1 − λ_k + λ_k μ)`.
    pub fn scale_factors<F>(&self, lambda: F, n: usize) -> Result<Vec<Complex64>>
    where
        F: Fn(usize) -> Result<f64>,
    {
        let mut factors = vec![Complex64::new(1.0, 0.0); self.blocks.len()];
        for k in 0..n {
            let l = lambda(k)?;
            for (f, b) in factors.iter_mut().zip(&self.blocks) {
                *f *= Complex64::new(1.0 - l, 0.0) + b.mu() * l;
            }
        }
        Ok(factors)
    }

    /// Largest `|Π_{k<n} (1 − λ_k + λ_k μ)|` over eigenvalues with
    /// `|μ − 1| > fixed_tol`, i.e. the worst-case contraction of the part of
    /// `x₀` off the fixed subspace. Returns 0 when there is no such eigenvalue.
    pub fn off_fixed_envelope<F>(&self, lambda: F, n: usize, fixed_tol: f64) -> Result<f64>
    where
        F: Fn(usize) -> Result<f64>,
    {
        let factors = self.scale_factors(lambda, n)?;
        Ok(factors
            .iter()
            .zip(&self.blocks)
            .filter(|(_, b)| (b.mu() - 1.0).norm() > fixed_tol)
            .map(|(f, _)| f.norm())
            .fold(0.0, f64::max))
    }

    /// Smallest `n ≤ max_n` at which [`off_fixed_envelope`](Self::off_fixed_envelope)
    /// is at most `target`, or `None` if it never gets there.
    pub fn iterations_to_envelope<F>(&self, lambda: F, max_n: usize, fixed_tol: f64, target: f64) -> Result<Option<usize>>
    where
        F: Fn(usize) -> Result<f64>,
    {
        let off: Vec<Complex64> =
            self.blocks.iter().map(SpectralBlock::mu).filter(|mu| (mu - 1.0).norm() > fixed_tol).collect();
        let mut factors = vec![Complex64::new(1.0, 0.0); off.len()];
        for n in 0..=max_n {
            if factors.iter().all(|f| f.norm() <= target) {
                return Ok(Some(n));
            }
            if n == max_n {
                break;
            }
            let l = lambda(n)?;
            for (f, mu) in factors.iter_mut().zip(&off) {
                *f *= Complex64::new(1.0 - l, 0.0) + mu * l;
            }
        }
        Ok(None)
    }

    fn apply_factors(&self, factors: &[Complex64], x0: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(x0);
        let mut y = self.q.tr_mul(&x);
        for (f, b) in factors.iter().zip(&self.blocks) {
            match *b {
                SpectralBlock::Real { index, .. } => y[index] *= f.re,
                SpectralBlock::Pair { index, .. } => {
                    let z = Complex64::new(y[index], y[index + 1]) * f;
                    y[index] = z.re;
                    y[index + 1] = z.im;
                }
            }
        }
        (&self.q * y).as_slice().to_vec()
    }
}

/// `xₙ` for normal `T` from eigen-coordinates scaled by `Π_k (1 − λ_k + λ_k μ)`.
pub fn eigen_oracle<S: Scalar>(t: &LinearOperator<S>, schedule: &Schedule<S>, x0: &Vector<S>, n: usize) -> Result<Vector<S>> {
    let spectrum = normal_spectrum(t)?;
    eigen_oracle_with(&spectrum, |k| schedule.lambda_at(k).map(|l| l.to_f64_lossy()), x0, n)
}

/// [`eigen_oracle`] on a precomputed spectrum with parameters from a closure.
pub fn eigen_oracle_with<S, F>(spectrum: &NormalSpectrum, lambda: F, x0: &Vector<S>, n: usize) -> Result<Vector<S>>
where
    S: Scalar,
    F: Fn(usize) -> Result<f64>,
{
    x0.check_dim(spectrum.q.nrows())?;
    let factors = spectrum.scale_factors(lambda, n)?;
    Vector::from_f64_slice(&spectrum.apply_factors(&factors, &x0.to_f64_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// `max_k ‖x_k − f₀ − h_k‖` where `h_k` is the iterate started from `g₀`.
    pub max_defect: f64,
    /// `max_k (‖h_{k+1}‖ − ‖h_k‖)`; nonpositive when the norms decrease.
    pub max_norm_increase: f64,
    pub steps: usize,
    pub pass: bool,
}

/// Splits `x₀ = f₀ + g₀` with `f₀ = P_F x₀` and checks, for `k ≤ n`, that the
/// iterate from `x₀` equals `f₀` plus the iterate from `g₀`, and that the norm
/// of the latter never increases.
///
/// For affine maps `g₀` is iterated with the linear part, which is what the
/// translation reduction prescribes.
pub fn decomposition_check<S: Scalar, M: NonexpansiveMap<S> + ?Sized>(
    map: &M,
    schedule: &Schedule<S>,
    x0: &Vector<S>,
    n: usize,
    tol: S,
) -> Result<DecompositionReport> {
    if !(tol >= S::zero()) {
        return Err(Error::invalid(format!("tolerance {tol} must be nonnegative")));
    }
    let fixed = fixed_set(map, default_rank_tol())?;
    x0.check_dim(map.dim())?;
    let f0 = fixed.project(x0)?;
    let g0 = x0 - &f0;
    let linear = map.linear_part();
    let slack = S::lit(1e-12) * g0.norm().max(S::one());
    let bound = tol * (S::one() + x0.norm());

    let mut x = x0.clone();
    let mut h = g0;
    let mut max_defect = S::zero();
    let mut max_increase = S::neg_infinity();
    for k in 0..=n {
        max_defect = max_defect.max(x.distance(&(&f0 + &h)));
        if k == n {
            break;
        }
        let l = schedule.lambda_at(k)?;
        x = super::km_step(map, l, &x).map_err(|e| at_step(e, k))?;
        let next = super::km_step(linear, l, &h).map_err(|e| at_step(e, k))?;
        max_increase = max_increase.max(next.norm() - h.norm());
        h = next;
    }
    let max_norm_increase = if n == 0 { S::zero() } else { max_increase };
    Ok(DecompositionReport {
        max_defect: max_defect.to_f64_lossy(),
        max_norm_increase: max_norm_increase.to_f64_lossy(),
        steps: n,
        pass: max_defect <= bound && max_norm_increase <= slack,
    })
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NumericalAbort { reason, .. } => Error::NumericalAbort { step, reason },
        other => other,
    }
}
