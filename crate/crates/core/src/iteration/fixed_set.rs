use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, Vector};
use crate::operators::NonexpansiveMap;
use crate::scalar::Scalar;
use crate::subspace::{displacement_rank, SubspaceBasis};

/// `Fix T` as an affine set `anchor + span(directions)`.
///
/// For linear `T` the anchor is the origin. For affine `T = L· + b` it is the
/// minimum-norm solution of `(Id − L)x = b`, which lies in `(Fix L)^⊥`.
#[derive(Debug, Clone)]
pub struct FixedSet<S> {
    anchor: Vector<S>,
    directions: SubspaceBasis<S>,
}

impl<S: Scalar> FixedSet<S> {
    pub fn new(anchor: Vector<S>, directions: SubspaceBasis<S>) -> Result<Self> {
        anchor.check_dim(directions.dim_ambient())?;
        Ok(Self { anchor, directions })
    }

    pub fn linear(directions: SubspaceBasis<S>) -> Self {
        Self { anchor: Vector::zeros(directions.dim_ambient()), directions }
    }

    pub fn anchor(&self) -> &Vector<S> {
        &self.anchor
    }

    pub fn directions(&self) -> &SubspaceBasis<S> {
        &self.directions
    }

    /// Nearest point of the fixed set: `anchor + P(x − anchor)`.
    pub fn project(&self, x: &Vector<S>) -> Result<Vector<S>> {
        let shifted = x - &self.anchor;
        Ok(&self.anchor + &self.directions.project(&shifted)?)
    }

    pub fn distance(&self, x: &Vector<S>) -> Result<S> {
        Ok(x.distance(&self.project(x)?))
    }
}

/// Computes `Fix T` for a certified nonexpansive linear or affine map.
///
/// Errors with [`Error::EmptyFixedSet`] when `(Id − L)x = b` has no solution.
pub fn fixed_set<S: Scalar, M: NonexpansiveMap<S> + ?Sized>(map: &M, rank_tol: S) -> Result<FixedSet<S>> {
    let linear = map.linear_part();
    linear.ensure_nonexpansive()?;
    let d = linear.dim();
    let a = linear.matrix().identity_minus();
    let svd = jacobi_svd(&a)?;
    let rank = displacement_rank(&svd, rank_tol);
    let directions = SubspaceBasis::from_orthonormal_unchecked(d, svd.kernel_basis(rank));
    let Some(b) = map.translation() else {
        return Ok(FixedSet::linear(directions));
    };
    // x* = V Σ⁺ Uᵀ b over the numerically nonzero singular values.
    let mut anchor = Vector::zeros(d);
    for j in 0..rank {
        let coeff = svd.u.column(j).dot(b) / svd.singular_values[j];
        anchor.axpy(coeff, &svd.v.column(j));
    }
    let residual = (&a.mul_vec(&anchor) - b).norm();
    let tol = consistency_tol::<S>() * (S::one() + b.norm());
    if !(residual <= tol) {
        return Err(Error::EmptyFixedSet { residual: residual.to_f64_lossy() });
    }
    Ok(FixedSet { anchor, directions })
}

fn consistency_tol<S: Scalar>() -> S {
    S::lit(1e-9).max(S::lit(1024.0) * S::epsilon())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{AffineOperator, LinearOperator};

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn affine_fixed_line() {
        // L = diag(1, 0), b = (0, 1): Fix T = {(t, 1)}.
        let t = AffineOperator::new(LinearOperator::diagonal(&[1.0, 0.0]).unwrap(), v(&[0.0, 1.0])).unwrap();
        let f = fixed_set(&t, 1e-10).unwrap();
        assert_eq!(f.directions().dim(), 1);
        assert!(f.anchor().distance(&v(&[0.0, 1.0])) < 1e-15);
        let p = f.project(&v(&[3.0, -7.0])).unwrap();
        assert!(p.distance(&v(&[3.0, 1.0])) < 1e-15);
    }

    #[test]
    fn inconsistent_affine_rejected() {
        // Id with b ≠ 0 has no fixed point.
        let t = AffineOperator::new(LinearOperator::identity(2), v(&[1.0, 0.0])).unwrap();
        assert!(matches!(fixed_set(&t, 1e-10), Err(Error::EmptyFixedSet { .. })));
    }

    #[test]
    fn constant_map_fixed_point() {
        let t = AffineOperator::new(LinearOperator::scaled_identity(3, 0.0), v(&[1.0, 2.0, 3.0])).unwrap();
        let f = fixed_set(&t, 1e-10).unwrap();
        assert_eq!(f.directions().dim(), 0);
        assert!(f.anchor().distance(&v(&[1.0, 2.0, 3.0])) < 1e-15);
    }

    #[test]
    fn non_nonexpansive_rejected() {
        assert!(fixed_set(&LinearOperator::scaled_identity(2, 3.0), 1e-10).is_err());
    }
}
