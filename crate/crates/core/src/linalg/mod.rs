//! Dense real vectors and matrices, plus the factorizations the operator and
//! subspace code relies on.

mod matrix;
mod qr;
mod svd;
mod vector;

pub use matrix::Matrix;
pub use qr::householder_qr;
pub use svd::{jacobi_svd, Svd};
pub use vector::Vector;
