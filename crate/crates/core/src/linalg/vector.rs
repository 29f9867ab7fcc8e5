use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An element of the ambient space `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector<S> {
    entries: Vec<S>,
}

impl<S: Scalar> Vector<S> {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(entries: Vec<S>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("vector dimension must be at least 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector entries".into()));
        }
        Ok(Self { entries })
    }

    /// Wraps entries without validation. Used on hot paths where finiteness is
    /// checked separately.
    pub(crate) fn from_vec_unchecked(entries: Vec<S>) -> Self {
        Self { entries }
    }

    pub fn from_f64_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| S::lit(v)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: vec![S::zero(); dim] }
    }

    /// The `i`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[i] = S::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<S> {
        self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.entries.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> S {
        debug_assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm_squared(&self) -> S {
        self.dot(self)
    }

    pub fn norm(&self) -> S {
        self.norm_squared().sqrt()
    }

    /// `‖self − other‖` without allocating.
    pub fn distance(&self, other: &Self) -> S {
        debug_assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<S>()
            .sqrt()
    }

    pub fn scale(&self, factor: S) -> Self {
        Self::from_vec_unchecked(self.entries.iter().map(|&v| v * factor).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: S, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a += factor * b;
        }
    }

    /// The convex combination `(1 − t)·self + t·other`, evaluated entrywise in
    /// exactly that form.
    pub fn lerp(&self, other: &Self, t: S) -> Self {
        let s = S::one() - t;
        Self::from_vec_unchecked(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| s * a + t * b)
                .collect(),
        )
    }

    /// Returns the unit vector in this direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > S::zero() {
            Some(self.scale(S::one() / n))
        } else {
            None
        }
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found: self.dim() })
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.entries.iter().map(|v| v.to_f64_lossy()).collect()
    }
}

impl<S> Index<usize> for Vector<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.entries[i]
    }
}

impl<S> IndexMut<usize> for Vector<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.entries[i]
    }
}

impl<'a, S: Scalar> Add for &'a Vector<S> {
    type Output = Vector<S>;
    fn add(self, rhs: Self) -> Vector<S> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector::from_vec_unchecked(self.entries.iter().zip(&rhs.entries).map(|(&a, &b)| a + b).collect())
    }
}

impl<'a, S: Scalar> Sub for &'a Vector<S> {
    type Output = Vector<S>;
    fn sub(self, rhs: Self) -> Vector<S> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector::from_vec_unchecked(self.entries.iter().zip(&rhs.entries).map(|(&a, &b)| a - b).collect())
    }
}

impl<'a, S: Scalar> Mul<S> for &'a Vector<S> {
    type Output = Vector<S>;
    fn mul(self, rhs: S) -> Vector<S> {
        self.scale(rhs)
    }
}

impl<'a, S: Scalar> Neg for &'a Vector<S> {
    type Output = Vector<S>;
    fn neg(self) -> Vector<S> {
        Vector::from_vec_unchecked(self.entries.iter().map(|&a| -a).collect())
    }
}
