//! Dense row-major `f64` arrays.
//!
//! Only the handful of operations the networks need are provided. Matrices are
//! always 2-D `[rows × cols]`; vectors are 1-D.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strided view of a matrix stored in a flat slice.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub row_stride: usize,
    pub col_stride: usize,
}

/// `c[m × n] ← a[m × k] · b[k × n] + beta · c`, with `c` row-major.
pub(crate) fn gemm((m, k, n): (usize, usize, usize), a: MatRef, b: MatRef, beta: f64, c: &mut [f64]) {
    assert!(c.len() == m * n, "gemm output has {} entries, expected {}", c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: MatRef, rows: usize, cols: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * r.row_stride + (cols - 1) * r.col_stride
        }
    };
    assert!(k == 0 || last(a, m, k) < a.data.len(), "gemm left operand too short");
    assert!(k == 0 || last(b, k, n) < b.data.len(), "gemm right operand too short");
    // SAFETY: the assertions above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim("Tensor::new", &[expected], &[data.len()]));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {bad}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim("Tensor::from_rows", &[cols], &[r.len()]));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(vec![rows.len(), cols], data)
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

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self[b × in] · w[in × out] + bias[out]`.
    pub fn affine(&self, w: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let (b, inp) = (self.rows(), self.cols());
        let out = w.cols();
        if w.rows() != inp || bias.len() != out {
            return Err(Error::dim("affine", &[inp, out], &[w.rows(), bias.len()]));
        }
        let mut y = Vec::with_capacity(b * out);
        for _ in 0..b {
            y.extend_from_slice(bias.data());
        }
        gemm(
            (b, inp, out),
            MatRef { data: &self.data, row_stride: inp, col_stride: 1 },
            MatRef { data: &w.data, row_stride: out, col_stride: 1 },
            1.0,
            &mut y,
        );
        Ok(Tensor {
            shape: vec![b, out],
            data: y,
        })
    }

    /// Concatenate two matrices along columns.
    pub fn hcat(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows() != other.rows() {
            return Err(Error::dim("hcat", &[self.rows()], &[other.rows()]));
        }
        let (ca, cb) = (self.cols(), other.cols());
        let mut data = Vec::with_capacity(self.rows() * (ca + cb));
        for i in 0..self.rows() {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Tensor {
            shape: vec![self.rows(), ca + cb],
            data,
        })
    }

    /// Columns `[start, end)` of a matrix.
    pub fn col_slice(&self, start: usize, end: usize) -> Tensor {
        let mut data = Vec::with_capacity(self.rows() * (end - start));
        for i in 0..self.rows() {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        Tensor {
            shape: vec![self.rows(), end - start],
            data,
        }
    }

    /// Select a subset of rows.
    pub fn gather_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor {
            shape: vec![idx.len(), c],
            data,
        }
    }
}
