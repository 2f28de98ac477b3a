//! Dense row-major `f64` tensors.
//!
//! Only the handful of kernels the network needs are provided: row access,
//! `A·Bᵀ`, `Aᵀ·B`, `A·B` and column sums. Everything is written for rank-1 and
//! rank-2 tensors; higher ranks are accepted for storage (model files) but not
//! for arithmetic.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            bail!(
                Shape,
                "shape {:?} holds {} values but {} were given",
                shape,
                expected,
                data.len()
            );
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            bail!(Parameter, "non-finite value {} at flat index {}", data[pos], pos);
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    /// Builds an `N×D` matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                bail!(Shape, "row {} has {} columns, expected {}", i, r.len(), cols);
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows of a matrix; a vector counts as one row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols().max(1))
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let c = self.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            shape: vec![indices.len(), c],
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub(crate) fn matrix_dims(&self) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            bail!(Shape, "expected a matrix, got shape {:?}", self.shape);
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// `self · otherᵀ` for `self: N×K`, `other: M×K`, giving `N×M`.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.matrix_dims()?;
        let (m, k2) = other.matrix_dims()?;
        if k != k2 {
            bail!(Shape, "cannot multiply {:?} by transpose of {:?}", self.shape, other.shape);
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * m + j] = dot(a, b);
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    /// `self · other` for `self: N×K`, `other: K×M`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.matrix_dims()?;
        let (k2, m) = other.matrix_dims()?;
        if k != k2 {
            bail!(Shape, "cannot multiply {:?} by {:?}", self.shape, other.shape);
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let dst = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[p * m..(p + 1) * m];
                for (d, &bv) in dst.iter_mut().zip(b) {
                    *d += a * bv;
                }
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    /// Accumulates `selfᵀ · other` into `acc` for `self: N×A`, `other: N×B`,
    /// `acc: A×B`.
    pub(crate) fn add_t_matmul_into(&self, other: &Tensor, acc: &mut Tensor) -> Result<()> {
        let (n, a) = self.matrix_dims()?;
        let (n2, b) = other.matrix_dims()?;
        if n != n2 || acc.shape != [a, b] {
            bail!(
                Shape,
                "cannot accumulate transpose of {:?} times {:?} into {:?}",
                self.shape,
                other.shape,
                acc.shape
            );
        }
        for r in 0..n {
            let lhs = &self.data[r * a..(r + 1) * a];
            let rhs = &other.data[r * b..(r + 1) * b];
            for (i, &l) in lhs.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let dst = &mut acc.data[i * b..(i + 1) * b];
                for (d, &rv) in dst.iter_mut().zip(rhs) {
                    *d += l * rv;
                }
            }
        }
        Ok(())
    }

    /// Adds every row of `self` into `acc` (length = columns).
    pub(crate) fn add_col_sums_into(&self, acc: &mut Tensor) {
        let c = self.cols();
        for r in self.data.chunks_exact(c) {
            for (d, v) in acc.data.iter_mut().zip(r) {
                *d += v;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_length() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 4]).is_ok());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn products_agree() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[19.0, 22.0, 43.0, 50.0]);
        // a · bᵀ
        let abt = a.matmul_t(&b).unwrap();
        assert_eq!(abt.data(), &[17.0, 23.0, 39.0, 53.0]);
        let mut acc = Tensor::zeros(&[2, 2]);
        a.add_t_matmul_into(&b, &mut acc).unwrap();
        assert_eq!(acc.data(), &[26.0, 30.0, 38.0, 44.0]);
    }
}
