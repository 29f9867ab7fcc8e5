use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Householder QR of a square or tall matrix.
///
/// Returns `(Q, R)` with `Q` square orthogonal (`rows × rows`) and `R` upper
/// trapezoidal, `A = Q R`. No sign normalization is applied to `R`'s diagonal.
pub fn householder_qr<S: Scalar>(a: &Matrix<S>) -> (Matrix<S>, Matrix<S>) {
    let m = a.rows();
    let n = a.cols();
    let mut r = a.clone();
    let mut q = Matrix::identity(m);
    let mut v = vec![S::zero(); m];

    for k in 0..n.min(m.saturating_sub(1)) {
        let norm: S = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<S>().sqrt();
        if norm == S::zero() {
            continue;
        }
        let alpha = if r[(k, k)] > S::zero() { -norm } else { norm };
        for i in 0..m {
            v[i] = if i < k { S::zero() } else { r[(i, k)] };
        }
        v[k] -= alpha;
        let vnorm_sq: S = (k..m).map(|i| v[i] * v[i]).sum();
        if vnorm_sq == S::zero() {
            continue;
        }
        let two = S::lit(2.0);
        // R ← (I − 2vvᵀ/vᵀv) R
        for j in 0..n {
            let dot: S = (k..m).map(|i| v[i] * r[(i, j)]).sum();
            let f = two * dot / vnorm_sq;
            for i in k..m {
                r[(i, j)] -= f * v[i];
            }
        }
        // Q ← Q (I − 2vvᵀ/vᵀv)
        for i in 0..m {
            let dot: S = (k..m).map(|l| q[(i, l)] * v[l]).sum();
            let f = two * dot / vnorm_sq;
            for l in k..m {
                q[(i, l)] -= f * v[l];
            }
        }
        for i in (k + 1)..m {
            r[(i, k)] = S::zero();
        }
    }
    (q, r)
}
