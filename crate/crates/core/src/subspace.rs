//! Fixed subspaces, displacement ranges, orthogonal projectors, and the
//! identities `(Fix T)^⊥ = ran(Id − T)` and `ker(Id − T) = ker(Id − Tᵀ)` for
//! nonexpansive linear `T`.
//!
//! Subspaces are compared through principal angles, never by basis matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, Matrix, Svd, Vector};
use crate::operators::LinearOperator;
use crate::scalar::Scalar;

/// Default relative threshold below which singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

pub fn default_rank_tol<S: Scalar>() -> S {
    S::lit(DEFAULT_RANK_TOL).max(S::lit(64.0) * S::epsilon())
}

fn orthonormality_tol<S: Scalar>() -> S {
    S::lit(1e-10).max(S::lit(64.0) * S::epsilon())
}

/// Orthonormal basis of a subspace of `R^dim_ambient`, possibly empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis<S> {
    dim_ambient: usize,
    vectors: Vec<Vector<S>>,
}

impl<S: Scalar> SubspaceBasis<S> {
    /// Validates that `vectors` are orthonormal (within `1e-10` of `δᵢⱼ`).
    pub fn new(dim_ambient: usize, vectors: Vec<Vector<S>>) -> Result<Self> {
        if vectors.len() > dim_ambient {
            return Err(Error::invalid(format!(
                "{} basis vectors exceed ambient dimension {dim_ambient}",
                vectors.len()
            )));
        }
        for v in &vectors {
            v.check_dim(dim_ambient)?;
        }
        let tol = orthonormality_tol::<S>();
        for (i, a) in vectors.iter().enumerate() {
            for (j, b) in vectors.iter().enumerate().skip(i) {
                let target = if i == j { S::one() } else { S::zero() };
                if (a.dot(b) - target).abs() > tol {
                    return Err(Error::invalid(format!("basis vectors {i} and {j} are not orthonormal")));
                }
            }
        }
        Ok(Self { dim_ambient, vectors })
    }

    pub(crate) fn from_orthonormal_unchecked(dim_ambient: usize, vectors: Vec<Vector<S>>) -> Self {
        Self { dim_ambient, vectors }
    }

    pub fn empty(dim_ambient: usize) -> Self {
        Self { dim_ambient, vectors: Vec::new() }
    }

    pub fn full(dim_ambient: usize) -> Self {
        Self { dim_ambient, vectors: (0..dim_ambient).map(|i| Vector::basis(dim_ambient, i)).collect() }
    }

    /// Dimension of the subspace.
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn vectors(&self) -> &[Vector<S>] {
        &self.vectors
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `Σᵢ ⟨x, bᵢ⟩ bᵢ`.
    pub fn project(&self, x: &Vector<S>) -> Result<Vector<S>> {
        x.check_dim(self.dim_ambient)?;
        let mut out = Vector::zeros(self.dim_ambient);
        for b in &self.vectors {
            out.axpy(b.dot(x), b);
        }
        Ok(out)
    }

    /// `x − P x`.
    pub fn reject(&self, x: &Vector<S>) -> Result<Vector<S>> {
        Ok(x - &self.project(x)?)
    }

    /// Orthonormal basis of the orthogonal complement.
    ///
    /// Taken from the left singular vectors of `I − BBᵀ` with singular value
    /// above 1/2 (the exact values are 0 and 1).
    pub fn complement(&self) -> Result<Self> {
        let d = self.dim_ambient;
        if self.vectors.is_empty() {
            return Ok(Self::full(d));
        }
        if self.vectors.len() == d {
            return Ok(Self::empty(d));
        }
        let b = self.as_matrix();
        let proj = Matrix::identity(d).sub(&b.matmul(&b.transpose()));
        let svd = jacobi_svd(&proj)?;
        let vectors = (0..d)
            .filter(|&j| svd.singular_values[j] > S::lit(0.5))
            .map(|j| svd.u.column(j))
            .collect();
        Ok(Self { dim_ambient: d, vectors })
    }

    /// `dim_ambient × dim` matrix with the basis vectors as columns.
    pub fn as_matrix(&self) -> Matrix<S> {
        Matrix::from_columns(self.dim_ambient, &self.vectors)
    }
}

fn displacement_svd<S: Scalar>(t: &LinearOperator<S>) -> Result<Svd<S>> {
    t.ensure_nonexpansive()?;
    jacobi_svd(&t.matrix().identity_minus())
}

fn check_rank_tol<S: Scalar>(rank_tol: S) -> Result<()> {
    if rank_tol >= S::zero() && rank_tol.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("rank tolerance must be finite and >= 0"))
    }
}

/// Numerical rank of `Id − T`: singular values at most
/// `rank_tol · max(σ_max, 1)` count as zero. The floor of 1 is the scale of
/// `Id`, so an `Id − T` consisting only of rounding noise has rank 0.
pub fn displacement_rank<S: Scalar>(svd: &Svd<S>, rank_tol: S) -> usize {
    svd.rank_with_floor(rank_tol, S::one())
}

/// `Fix T = ker(Id − T)` from an SVD of `Id − T`, with the rank rule of
/// [`displacement_rank`].
pub fn fixed_subspace<S: Scalar>(t: &LinearOperator<S>, rank_tol: S) -> Result<SubspaceBasis<S>> {
    check_rank_tol(rank_tol)?;
    let svd = displacement_svd(t)?;
    let rank = displacement_rank(&svd, rank_tol);
    Ok(SubspaceBasis::from_orthonormal_unchecked(t.dim(), svd.kernel_basis(rank)))
}

/// Column space of `Id − T`, with the same rank rule as [`fixed_subspace`].
pub fn range_of_displacement<S: Scalar>(t: &LinearOperator<S>, rank_tol: S) -> Result<SubspaceBasis<S>> {
    check_rank_tol(rank_tol)?;
    let svd = displacement_svd(t)?;
    let rank = displacement_rank(&svd, rank_tol);
    Ok(SubspaceBasis::from_orthonormal_unchecked(t.dim(), svd.range_basis(rank)))
}

/// Principal angles between two subspaces of the same ambient space, in
/// ascending order; there are `min(dim a, dim b)` of them.
///
/// Cosines come from the singular values of `AᵀB`, sines from those of
/// `(I − BBᵀ)A` (with `A` the smaller subspace); each angle is taken from
/// whichever is better conditioned, so angles near zero are resolved to
/// roughly machine precision rather than `√eps`.
pub fn principal_angles<S: Scalar>(a: &SubspaceBasis<S>, b: &SubspaceBasis<S>) -> Result<Vec<S>> {
    if a.dim_ambient != b.dim_ambient {
        return Err(Error::DimensionMismatch { expected: a.dim_ambient, found: b.dim_ambient });
    }
    let (small, large) = if a.dim() <= b.dim() { (a, b) } else { (b, a) };
    let k = small.dim();
    if k == 0 {
        return Ok(Vec::new());
    }
    let am = small.as_matrix();
    let bm = large.as_matrix();
    let cosines = jacobi_svd(&am.transpose().matmul(&bm))?.singular_values;
    let mut residual = Matrix::zeros(small.dim_ambient, k);
    for (j, v) in small.vectors.iter().enumerate() {
        let r = large.reject(v)?;
        for i in 0..small.dim_ambient {
            residual[(i, j)] = r[i];
        }
    }
    let mut sines = jacobi_svd(&residual)?.singular_values;
    sines.reverse();
    let threshold = S::FRAC_1_SQRT_2();
    Ok((0..k)
        .map(|i| {
            let c = cosines[i].min(S::one());
            if c >= threshold {
                sines[i].min(S::one()).asin()
            } else {
                c.max(S::zero()).acos()
            }
        })
        .collect())
}

/// Largest principal angle, or 0 when either subspace is trivial.
pub fn max_principal_angle<S: Scalar>(a: &SubspaceBasis<S>, b: &SubspaceBasis<S>) -> Result<S> {
    Ok(principal_angles(a, b)?.into_iter().fold(S::zero(), S::max))
}

/// Outcome of comparing `(Fix T)^⊥` with `ran(Id − T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerpIdentityReport {
    #[serde(rename = "dim_F")]
    pub dim_fixed: usize,
    pub dim_ran: usize,
    pub max_principal_angle: f64,
    pub pass: bool,
}

/// Checks `(Fix T)^⊥ = ran(Id − T)`: equal dimensions and largest principal
/// angle at most `tol`. `T` must be certified nonexpansive.
pub fn check_perp_identity<S: Scalar>(t: &LinearOperator<S>, tol: S) -> Result<PerpIdentityReport> {
    check_perp_identity_with(t, tol, default_rank_tol())
}

pub fn check_perp_identity_with<S: Scalar>(t: &LinearOperator<S>, tol: S, rank_tol: S) -> Result<PerpIdentityReport> {
    let fixed = fixed_subspace(t, rank_tol)?;
    let perp = fixed.complement()?;
    let range = range_of_displacement(t, rank_tol)?;
    let angle = max_principal_angle(&perp, &range)?;
    Ok(PerpIdentityReport {
        dim_fixed: fixed.dim(),
        dim_ran: range.dim(),
        max_principal_angle: angle.to_f64_lossy(),
        pass: perp.dim() == range.dim() && angle <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjointKernelReport {
    pub dim_kernel: usize,
    pub dim_adjoint_kernel: usize,
    pub max_principal_angle: f64,
    pub pass: bool,
}

/// Checks `ker(Id − T) = ker(Id − Tᵀ)` for certified nonexpansive `T`.
pub fn check_adjoint_kernel_identity<S: Scalar>(t: &LinearOperator<S>, tol: S) -> Result<AdjointKernelReport> {
    let rank_tol = default_rank_tol();
    let kernel = fixed_subspace(t, rank_tol)?;
    let adjoint_kernel = fixed_subspace(&t.transpose(), rank_tol)?;
    let angle = max_principal_angle(&kernel, &adjoint_kernel)?;
    Ok(AdjointKernelReport {
        dim_kernel: kernel.dim(),
        dim_adjoint_kernel: adjoint_kernel.dim(),
        max_principal_angle: angle.to_f64_lossy(),
        pass: kernel.dim() == adjoint_kernel.dim() && angle <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::new(xs.to_vec()).unwrap()
    }

    const TOL: f64 = DEFAULT_RANK_TOL;

    #[test]
    fn fixed_subspace_examples() {
        assert_eq!(fixed_subspace(&LinearOperator::<f64>::identity(3), TOL).unwrap().dim(), 3);
        assert_eq!(fixed_subspace(&LinearOperator::scaled_identity(3, -1.0), TOL).unwrap().dim(), 0);
        let f = fixed_subspace(&LinearOperator::diagonal(&[1.0, -1.0]).unwrap(), TOL).unwrap();
        assert_eq!(f.dim(), 1);
        let e1 = SubspaceBasis::new(2, vec![v(&[1.0, 0.0])]).unwrap();
        assert!(max_principal_angle(&f, &e1).unwrap() < 1e-15);
    }

    #[test]
    fn range_examples() {
        assert_eq!(range_of_displacement(&LinearOperator::<f64>::identity(2), TOL).unwrap().dim(), 0);
        assert_eq!(range_of_displacement(&LinearOperator::scaled_identity(2, -1.0), TOL).unwrap().dim(), 2);
        // Id − diag(1, 0) = diag(0, 1): column space span{e₂}.
        let r = range_of_displacement(&LinearOperator::diagonal(&[1.0, 0.0]).unwrap(), TOL).unwrap();
        let e2 = SubspaceBasis::new(2, vec![v(&[0.0, 1.0])]).unwrap();
        assert_eq!(r.dim(), 1);
        assert!(max_principal_angle(&r, &e2).unwrap() < 1e-15);
    }

    #[test]
    fn project_examples() {
        let x = v(&[3.0, 4.0]);
        assert_eq!(SubspaceBasis::full(2).project(&x).unwrap(), x);
        assert_eq!(SubspaceBasis::empty(2).project(&x).unwrap(), Vector::zeros(2));
        let e1 = SubspaceBasis::new(2, vec![v(&[1.0, 0.0])]).unwrap();
        assert_eq!(e1.project(&x).unwrap(), v(&[3.0, 0.0]));
        assert!(e1.project(&v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        assert!(SubspaceBasis::new(2, vec![v(&[1.0, 0.0]), v(&[1.0, 1.0])]).is_err());
        assert!(SubspaceBasis::new(1, vec![v(&[1.0]), v(&[1.0])]).is_err());
    }

    #[test]
    fn perp_identity_examples() {
        let r = check_perp_identity(&LinearOperator::diagonal(&[1.0, 0.0]).unwrap(), 1e-8).unwrap();
        assert!(r.pass);
        assert_eq!((r.dim_fixed, r.dim_ran), (1, 1));
        assert!(r.max_principal_angle < 1e-15);

        let id = check_perp_identity(&LinearOperator::<f64>::identity(3), 1e-8).unwrap();
        assert!(id.pass && id.dim_ran == 0 && id.dim_fixed == 3);

        assert!(matches!(
            check_perp_identity(&LinearOperator::scaled_identity(2, 2.0), 1e-8),
            Err(Error::NotNonexpansive { .. })
        ));
    }

    #[test]
    fn perp_report_json_shape() {
        let r = PerpIdentityReport { dim_fixed: 2, dim_ran: 3, max_principal_angle: 0.0, pass: true };
        let json = serde_json::to_value(r).unwrap();
        assert_eq!(json["dim_F"], 2);
        assert_eq!(json["dim_ran"], 3);
        assert_eq!(json["pass"], true);
    }

    #[test]
    fn adjoint_kernel_examples() {
        // rotation(π/2) ⊕ I₁: both kernels are span{e₃}.
        let t = LinearOperator::from_rows(&[
            vec![0.0, -1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let r = check_adjoint_kernel_identity(&t, 1e-8).unwrap();
        assert!(r.pass);
        assert_eq!(r.dim_kernel, 1);

        assert!(check_adjoint_kernel_identity(&LinearOperator::<f64>::identity(2), 1e-8).unwrap().pass);

        // [[1,1],[0,0]] has norm √2; scaled to norm 1.
        let raw = LinearOperator::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!((raw.certified_norm() - 2f64.sqrt()).abs() < 1e-15);
        let scaled = LinearOperator::new(raw.matrix().scale(1.0 / raw.certified_norm())).unwrap();
        let r = check_adjoint_kernel_identity(&scaled, 1e-8).unwrap();
        assert!(r.pass);
        assert_eq!((r.dim_kernel, r.dim_adjoint_kernel), (0, 0));
    }

    #[test]
    fn principal_angles_known_configuration() {
        // span{e₁} vs span{(cos θ, sin θ)}: angle θ, including tiny θ.
        for &theta in &[1e-12, 1e-9, 0.3, 1.2, std::f64::consts::FRAC_PI_2] {
            let a = SubspaceBasis::new(2, vec![v(&[1.0, 0.0])]).unwrap();
            let b = SubspaceBasis::new(2, vec![v(&[theta.cos(), theta.sin()])]).unwrap();
            let got = max_principal_angle(&a, &b).unwrap();
            assert!((got - theta).abs() <= 1e-15 * theta.max(1.0), "{theta}: {got}");
        }
    }

    #[test]
    fn complement_of_line_in_plane() {
        let s = 0.5f64.sqrt();
        let a = SubspaceBasis::new(2, vec![v(&[s, s])]).unwrap();
        let c = a.complement().unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.vectors()[0].dot(&a.vectors()[0]).abs() < 1e-15);
    }

    #[test]
    fn invalid_rank_tol() {
        assert!(fixed_subspace(&LinearOperator::<f64>::identity(2), -1.0).is_err());
    }
}
