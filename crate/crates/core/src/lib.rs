//! Krasnoselskii–Mann iteration `x_{n+1} = (1 − λₙ)xₙ + λₙ T xₙ` for linear and
//! affine nonexpansive operators on `R^d`, with instrumentation and
//! independent oracles for its limit `P_F x₀`.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below are what the experiment suite and CLI use.

pub mod error;
pub mod experiments;
pub mod iteration;
pub mod linalg;
pub mod operators;
pub mod rng;
pub mod scalar;
pub mod schedules;
pub mod subspace;
pub mod sum;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vector64 = linalg::Vector<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type LinearOperator64 = operators::LinearOperator<f64>;
pub type AffineOperator64 = operators::AffineOperator<f64>;
pub type Schedule64 = schedules::Schedule<f64>;
pub type SubspaceBasis64 = subspace::SubspaceBasis<f64>;
pub type IterationTrace64 = iteration::IterationTrace<f64>;

pub type Vector32 = linalg::Vector<f32>;
pub type LinearOperator32 = operators::LinearOperator<f32>;
pub type Schedule32 = schedules::Schedule<f32>;
