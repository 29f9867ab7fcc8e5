//! One-sided (Hestenes) Jacobi singular value decomposition.
//!
//! Columns of a working copy of `A` are rotated pairwise until mutually
//! orthogonal; the accumulated rotations form `V` and the column norms are the
//! singular values. Small singular values come out with absolute error of
//! order `eps·‖A‖`, which is what the rank decisions downstream need.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;

/// Thin SVD `A = U diag(σ) Vᵀ` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd<S> {
    /// `rows × k` left singular vectors, `k = min(rows, cols)`. Columns whose
    /// singular value is exactly zero are zero.
    pub u: Matrix<S>,
    pub singular_values: Vec<S>,
    /// `cols × cols` right singular vectors (full basis).
    pub v: Matrix<S>,
    pub sweeps: usize,
}

impl<S: Scalar> Svd<S> {
    pub fn max_singular_value(&self) -> S {
        self.singular_values.first().copied().unwrap_or_else(S::zero)
    }

    /// Number of singular values strictly above `rel_tol · σ_max`. A zero
    /// matrix has rank 0.
    pub fn rank(&self, rel_tol: S) -> usize {
        self.rank_with_floor(rel_tol, S::zero())
    }

    /// Like [`Svd::rank`] but with the threshold `rel_tol · max(σ_max, scale_floor)`,
    /// so that a matrix made only of rounding noise has rank 0.
    pub fn rank_with_floor(&self, rel_tol: S, scale_floor: S) -> usize {
        let scale = self.max_singular_value().max(scale_floor);
        if scale == S::zero() {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s > rel_tol * scale).count()
    }

    /// Orthonormal basis of the column space: the first `rank` left singular
    /// vectors.
    pub fn range_basis(&self, rank: usize) -> Vec<Vector<S>> {
        (0..rank).map(|j| self.u.column(j)).collect()
    }

    /// Orthonormal basis of the null space: right singular vectors past
    /// `rank`, including the `cols − rows` extra directions of a wide matrix.
    pub fn kernel_basis(&self, rank: usize) -> Vec<Vector<S>> {
        (rank..self.v.cols()).map(|j| self.v.column(j)).collect()
    }
}

/// Computes the SVD with a cap of `10·n²` sweeps (`n` = number of columns of
/// the factorized orientation). Exceeding the cap is an error.
pub fn jacobi_svd<S: Scalar>(a: &Matrix<S>) -> Result<Svd<S>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix passed to SVD".into()));
    }
    if a.rows() >= a.cols() {
        tall_svd(a)
    } else {
        // A = U Σ Vᵀ  ⇔  Aᵀ = V Σ Uᵀ
        let t = tall_svd(&a.transpose())?;
        let k = t.singular_values.len();
        let rows = a.rows();
        let cols = a.cols();
        // Left vectors of A are the (square) right vectors of Aᵀ.
        let mut u = Matrix::zeros(rows, k);
        for i in 0..rows {
            for j in 0..k {
                u[(i, j)] = t.v[(i, j)];
            }
        }
        // Right vectors of A: the thin left vectors of Aᵀ, completed to a full
        // orthonormal basis of R^cols.
        let mut cols_vecs: Vec<Vector<S>> = Vec::with_capacity(cols);
        for j in 0..k {
            cols_vecs.push(t.u.column(j));
        }
        complete_basis(&mut cols_vecs, cols);
        let v = Matrix::from_columns(cols, &cols_vecs);
        Ok(Svd { u, singular_values: t.singular_values, v, sweeps: t.sweeps })
    }
}

fn tall_svd<S: Scalar>(a: &Matrix<S>) -> Result<Svd<S>> {
    let m = a.rows();
    let n = a.cols();
    // Column-major working copies for cache-friendly column rotations.
    let mut w: Vec<Vec<S>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<S>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { S::one() } else { S::zero() }).collect())
        .collect();

    let eps = S::epsilon();
    let max_sweeps = (10 * n * n).max(1);
    let mut sweeps = 0;
    loop {
        if sweeps >= max_sweeps {
            return Err(Error::NotConverged { what: "Jacobi SVD", iterations: sweeps });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = column_products(&w[p], &w[q]);
                if alpha == S::zero() || beta == S::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (S::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (S::one() + zeta * zeta).sqrt());
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(S, usize)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|&x| x * x).sum::<S>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)));

    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (jj, &(sigma, j)) in order.iter().enumerate() {
        singular_values.push(sigma);
        if sigma > S::zero() {
            for i in 0..m {
                u[(i, jj)] = w[j][i] / sigma;
            }
        }
        for i in 0..n {
            vm[(i, jj)] = v[j][i];
        }
    }
    Ok(Svd { u, singular_values, v: vm, sweeps })
}

fn column_products<S: Scalar>(x: &[S], y: &[S]) -> (S, S, S) {
    let mut a = S::zero();
    let mut b = S::zero();
    let mut g = S::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        a += xi * xi;
        b += yi * yi;
        g += xi * yi;
    }
    (a, b, g)
}

fn rotate<S: Scalar>(cols: &mut [Vec<S>], p: usize, q: usize, c: S, s: S) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Extends an orthonormal family to an orthonormal basis of `R^dim`.
///
/// Each new vector is the standard basis vector with the largest component
/// outside the current span, orthogonalized twice. That component has norm at
/// least `1/√dim` while the family is incomplete.
pub(crate) fn complete_basis<S: Scalar>(family: &mut Vec<Vector<S>>, dim: usize) {
    let orthogonalize = |family: &[Vector<S>], mut c: Vector<S>| {
        for _ in 0..2 {
            for b in family {
                let proj = b.dot(&c);
                c.axpy(-proj, b);
            }
        }
        c
    };
    while family.len() < dim {
        let best = (0..dim)
            .map(|i| orthogonalize(family, Vector::basis(dim, i)))
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("dim >= 1");
        match best.normalized() {
            Some(u) => family.push(u),
            None => break,
        }
    }
}
