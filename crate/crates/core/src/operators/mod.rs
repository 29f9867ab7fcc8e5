//! Linear and affine nonexpansive operators on `R^d`.

mod spec;
mod synth;

pub use spec::{BuiltOperator, FactorySpec, OperatorSpec};
pub use synth::{synthesize_nonexpansive, BlockKind, SynthesisSpec, SynthesizedOperator};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, Matrix, Vector};
use crate::scalar::Scalar;

/// Slack allowed above 1 when certifying `‖T‖ ≤ 1`.
///
/// `1e-9`, raised to `16·eps` for scalar types too coarse to resolve it.
pub fn norm_tolerance<S: Scalar>() -> S {
    S::lit(1e-9).max(S::lit(16.0) * S::epsilon())
}

/// Largest singular value of a square matrix.
///
/// Computed by one-sided Jacobi SVD, accurate to a few ulps relative. A
/// Jacobi sweep count above `10·d²` is reported as an error instead of
/// returning a partial value.
pub fn operator_norm<S: Scalar>(matrix: &Matrix<S>) -> Result<S> {
    Ok(jacobi_svd(matrix)?.max_singular_value())
}

/// A square real matrix `T` together with a certified upper bound on `‖T‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator<S> {
    matrix: Matrix<S>,
    certified_norm: S,
    nonexpansive: bool,
}

impl<S: Scalar> LinearOperator<S> {
    /// Wraps a matrix, computing its operator norm for certification.
    pub fn new(matrix: Matrix<S>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.rows(), found: matrix.cols() });
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("operator matrix".into()));
        }
        let norm = operator_norm(&matrix)?;
        Ok(Self::with_bound(matrix, norm))
    }

    fn with_bound(matrix: Matrix<S>, certified_norm: S) -> Self {
        let nonexpansive = certified_norm <= S::one() + norm_tolerance::<S>();
        Self { matrix, certified_norm, nonexpansive }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self::with_bound(Matrix::identity(dim), S::one())
    }

    /// `factor · Id`.
    pub fn scaled_identity(dim: usize, factor: S) -> Self {
        Self::with_bound(Matrix::identity(dim).scale(factor), factor.abs())
    }

    pub fn diagonal(entries: &[S]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("diagonal operator needs at least one entry"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("diagonal entries".into()));
        }
        let bound = entries.iter().fold(S::zero(), |m, v| m.max(v.abs()));
        Ok(Self::with_bound(Matrix::from_diagonal(entries), bound))
    }

    /// Counter-clockwise plane rotation by `theta` radians.
    pub fn rotation(theta: S) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("rotation angle".into()));
        }
        let (s, c) = theta.sin_cos();
        let m = Matrix::from_rows(&[vec![c, -s], vec![s, c]])?;
        // Orthogonal up to rounding; the computed norm keeps the bound honest.
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.matrix
    }

    pub fn certified_norm(&self) -> S {
        self.certified_norm
    }

    /// Whether the certified norm is within [`norm_tolerance`] of 1.
    pub fn is_certified_nonexpansive(&self) -> bool {
        self.nonexpansive
    }

    pub fn ensure_nonexpansive(&self) -> Result<()> {
        if self.nonexpansive {
            Ok(())
        } else {
            Err(Error::NotNonexpansive {
                norm: self.certified_norm.to_f64_lossy(),
                tol: norm_tolerance::<S>().to_f64_lossy(),
            })
        }
    }

    /// Recomputes `‖T‖` from scratch.
    pub fn operator_norm(&self) -> Result<S> {
        operator_norm(&self.matrix)
    }

    /// `‖T‖ ≤ 1 + tol`, with the norm recomputed.
    pub fn is_nonexpansive(&self, tol: S) -> Result<bool> {
        if tol < S::zero() || !tol.is_finite() {
            return Err(Error::invalid("nonexpansiveness tolerance must be finite and >= 0"));
        }
        Ok(self.operator_norm()? <= S::one() + tol)
    }

    /// The relaxed operator `(1 − λ)·Id + λ·T`.
    ///
    /// For a certified operator and `λ ∈ [0, 1]` the bound `(1 − λ) + λ‖T‖` is
    /// carried over; otherwise the norm is recomputed.
    pub fn relax(&self, lambda: S) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::NonFinite("relaxation parameter".into()));
        }
        let matrix = relaxed_matrix(&self.matrix, lambda);
        if self.nonexpansive && lambda >= S::zero() && lambda <= S::one() {
            let bound = (S::one() - lambda) + lambda * self.certified_norm;
            Ok(Self::with_bound(matrix, bound))
        } else {
            Self::new(matrix)
        }
    }

    pub fn apply(&self, x: &Vector<S>) -> Result<Vector<S>> {
        x.check_dim(self.dim())?;
        Ok(self.matrix.mul_vec(x))
    }

    pub fn transpose(&self) -> Self {
        Self { matrix: self.matrix.transpose(), ..self.clone() }
    }

    /// Scales the operator, `factor · T`.
    pub fn scale(&self, factor: S) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::NonFinite("scale factor".into()));
        }
        Ok(Self::with_bound(self.matrix.scale(factor), self.certified_norm * factor.abs()))
    }

    /// Frobenius norm of `T Tᵀ − Tᵀ T`.
    pub fn normality_defect(&self) -> S {
        let t = &self.matrix;
        let tt = t.transpose();
        t.matmul(&tt).sub(&tt.matmul(t)).frobenius_norm()
    }
}

/// `(1 − λ)·I + λ·T` entrywise.
pub(crate) fn relaxed_matrix<S: Scalar>(t: &Matrix<S>, lambda: S) -> Matrix<S> {
    let n = t.rows();
    let keep = S::one() - lambda;
    let mut m = t.scale(lambda);
    for i in 0..n {
        m[(i, i)] += keep;
    }
    m
}

/// `x ↦ Lx + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator<S> {
    linear: LinearOperator<S>,
    translation: Vector<S>,
}

impl<S: Scalar> AffineOperator<S> {
    pub fn new(linear: LinearOperator<S>, translation: Vector<S>) -> Result<Self> {
        translation.check_dim(linear.dim())?;
        Ok(Self { linear, translation })
    }

    pub fn linear(&self) -> &LinearOperator<S> {
        &self.linear
    }

    pub fn translation(&self) -> &Vector<S> {
        &self.translation
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn apply(&self, x: &Vector<S>) -> Result<Vector<S>> {
        let mut y = self.linear.apply(x)?;
        y.axpy(S::one(), &self.translation);
        Ok(y)
    }
}

/// Common interface of the maps the iteration engine drives: a linear
/// nonexpansive part plus an optional translation.
pub trait NonexpansiveMap<S: Scalar> {
    fn dim(&self) -> usize;

    fn linear_part(&self) -> &LinearOperator<S>;

    fn translation(&self) -> Option<&Vector<S>>;

    /// `T x`. Dimensions are checked.
    fn apply(&self, x: &Vector<S>) -> Result<Vector<S>> {
        x.check_dim(self.dim())?;
        let mut y = self.linear_part().matrix().mul_vec(x);
        if let Some(b) = self.translation() {
            y.axpy(S::one(), b);
        }
        Ok(y)
    }

    fn describe(&self) -> String {
        let kind = if self.translation().is_some() { "affine" } else { "linear" };
        format!("{kind}(dim={}, norm<={})", self.dim(), self.linear_part().certified_norm())
    }
}

impl<S: Scalar> NonexpansiveMap<S> for LinearOperator<S> {
    fn dim(&self) -> usize {
        LinearOperator::dim(self)
    }

    fn linear_part(&self) -> &LinearOperator<S> {
        self
    }

    fn translation(&self) -> Option<&Vector<S>> {
        None
    }
}

impl<S: Scalar> NonexpansiveMap<S> for AffineOperator<S> {
    fn dim(&self) -> usize {
        AffineOperator::dim(self)
    }

    fn linear_part(&self) -> &LinearOperator<S> {
        &self.linear
    }

    fn translation(&self) -> Option<&Vector<S>> {
        Some(&self.translation)
    }
}
