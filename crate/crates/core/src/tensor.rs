//! Dense cubic and quartic arrays over a chart of dimension `d`.
//!
//! Index order is whatever the owning type documents; storage is row-major in
//! that order.

use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    #[inline]
    fn offset(&self, [a, b, c]: [usize; 3]) -> usize {
        debug_assert!(a < self.dim && b < self.dim && c < self.dim);
        (a * self.dim + b) * self.dim + c
    }
}

impl Index<[usize; 3]> for Tensor3 {
    type Output = f64;
    #[inline]
    fn index(&self, idx: [usize; 3]) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<[usize; 3]> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, idx: [usize; 3]) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    #[inline]
    fn offset(&self, [a, b, c, e]: [usize; 4]) -> usize {
        debug_assert!(a < self.dim && b < self.dim && c < self.dim && e < self.dim);
        ((a * self.dim + b) * self.dim + c) * self.dim + e
    }
}

impl Index<[usize; 4]> for Tensor4 {
    type Output = f64;
    #[inline]
    fn index(&self, idx: [usize; 4]) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<[usize; 4]> for Tensor4 {
    #[inline]
    fn index_mut(&mut self, idx: [usize; 4]) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}
