//! Dense two-site operators on `C^n ⊗ C^n`.
//!
//! A [`ComplexTensor4`] stores the `n^2 × n^2` matrix of an operator acting
//! on a two-site tensor product space.  Rows index the output pair, columns
//! the input pair, both flattened as `site1 * n + site2`, so composition of
//! operators is ordinary matrix multiplication.  Four-index accessors
//! expose the element `⟨o1 o2| T |i1 i2⟩` directly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, WqpError};
use crate::theta::{ONE, ZERO};

/// Dense operator on a two-site product space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor4 {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexTensor4 {
    /// Zero operator on `C^n ⊗ C^n`.
    pub fn zeros(n: usize) -> Self {
        ComplexTensor4 {
            n,
            data: vec![ZERO; n * n * n * n],
        }
    }

    /// Identity operator on `C^n ⊗ C^n`.
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                t.set(a, b, a, b, ONE);
            }
        }
        t
    }

    /// Builds the operator element-wise from `f(o1, o2, i1, i2)`.
    pub fn from_fn<F>(n: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize, usize, usize) -> Complex64,
    {
        let mut t = Self::zeros(n);
        for o1 in 0..n {
            for o2 in 0..n {
                for i1 in 0..n {
                    for i2 in 0..n {
                        t.set(o1, o2, i1, i2, f(o1, o2, i1, i2));
                    }
                }
            }
        }
        t
    }

    /// Tensor (Kronecker) product of two one-site operators:
    /// `⟨o1 o2| a ⊗ b |i1 i2⟩ = a[o1, i1] b[o2, i2]`.
    pub fn from_kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Self {
        let n = a.nrows();
        assert_eq!(a.ncols(), n, "one-site factors must be square");
        assert_eq!(b.nrows(), n, "one-site factors must share a dimension");
        assert_eq!(b.ncols(), n, "one-site factors must be square");
        Self::from_fn(n, |o1, o2, i1, i2| a[(o1, i1)] * b[(o2, i2)])
    }

    /// Site dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn flat(&self, s1: usize, s2: usize) -> usize {
        s1 * self.n + s2
    }

    /// Element `⟨o1 o2| T |i1 i2⟩`.
    #[inline]
    pub fn get(&self, o1: usize, o2: usize, i1: usize, i2: usize) -> Complex64 {
        let row = self.flat(o1, o2);
        let col = self.flat(i1, i2);
        self.data[row * self.n * self.n + col]
    }

    /// Sets the element `⟨o1 o2| T |i1 i2⟩`.
    #[inline]
    pub fn set(&mut self, o1: usize, o2: usize, i1: usize, i2: usize, value: Complex64) {
        let row = self.flat(o1, o2);
        let col = self.flat(i1, i2);
        let nn = self.n * self.n;
        self.data[row * nn + col] = value;
    }

    /// Matrix product `self · rhs` (composition of operators).
    pub fn matmul(&self, rhs: &ComplexTensor4) -> ComplexTensor4 {
        assert_eq!(self.n, rhs.n, "operator dimensions must agree");
        let nn = self.n * self.n;
        let mut out = ComplexTensor4::zeros(self.n);
        for row in 0..nn {
            for k in 0..nn {
                let a = self.data[row * nn + k];
                if a == ZERO {
                    continue;
                }
                for col in 0..nn {
                    out.data[row * nn + col] += a * rhs.data[k * nn + col];
                }
            }
        }
        out
    }

    /// Partial transpose on the second site:
    /// `⟨o1 o2| T^{t2} |i1 i2⟩ = ⟨o1 i2| T |i1 o2⟩`.
    pub fn transpose_second(&self) -> ComplexTensor4 {
        let n = self.n;
        ComplexTensor4::from_fn(n, |o1, o2, i1, i2| self.get(o1, i2, i1, o2))
    }

    /// Conjugation by the site-swap permutation: the operator acting as
    /// `self` with the two sites interchanged.
    pub fn swap_sites(&self) -> ComplexTensor4 {
        let n = self.n;
        ComplexTensor4::from_fn(n, |o1, o2, i1, i2| self.get(o2, o1, i2, i1))
    }

    /// Multiplies every element by a scalar.
    pub fn scale(&self, s: Complex64) -> ComplexTensor4 {
        ComplexTensor4 {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// Element-wise sum `self + rhs`.
    pub fn add(&self, rhs: &ComplexTensor4) -> ComplexTensor4 {
        assert_eq!(self.n, rhs.n, "operator dimensions must agree");
        ComplexTensor4 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    /// Element-wise difference `self - rhs`.
    pub fn sub(&self, rhs: &ComplexTensor4) -> ComplexTensor4 {
        assert_eq!(self.n, rhs.n, "operator dimensions must agree");
        ComplexTensor4 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    /// Largest element modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Conversion to a dense nalgebra matrix (rows = output pairs).
    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        let nn = self.n * self.n;
        DMatrix::from_row_slice(nn, nn, &self.data)
    }

    /// Conversion from a dense `n^2 × n^2` nalgebra matrix.
    pub fn from_dmatrix(n: usize, m: &DMatrix<Complex64>) -> ComplexTensor4 {
        let nn = n * n;
        assert_eq!(m.nrows(), nn, "matrix must be n^2 x n^2");
        assert_eq!(m.ncols(), nn, "matrix must be n^2 x n^2");
        let mut data = Vec::with_capacity(nn * nn);
        for row in 0..nn {
            for col in 0..nn {
                data.push(m[(row, col)]);
            }
        }
        ComplexTensor4 { n, data }
    }

    /// Inverse through LU decomposition, together with a condition-number
    /// estimate `‖T‖_F ‖T^{-1}‖_F` used by verification reports.
    pub fn inverse_with_condition(&self) -> Result<(ComplexTensor4, f64)> {
        let m = self.to_dmatrix();
        let lu = m.clone().lu();
        let inv = lu.try_inverse().ok_or_else(|| {
            WqpError::SamplePointDegenerate {
                context: "operator is numerically singular".into(),
            }
        })?;
        let cond = self.frobenius() * inv.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        Ok((Self::from_dmatrix(self.n, &inv), cond))
    }

    /// Inverse without the condition estimate.
    pub fn inverse(&self) -> Result<ComplexTensor4> {
        Ok(self.inverse_with_condition()?.0)
    }

    /// Embeds the operator into three sites, acting on sites 1 and 2.
    pub fn embed12(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let dim = n * n * n;
        let mut out = DMatrix::from_element(dim, dim, ZERO);
        for o1 in 0..n {
            for o2 in 0..n {
                for o3 in 0..n {
                    for i1 in 0..n {
                        for i2 in 0..n {
                            let v = self.get(o1, o2, i1, i2);
                            if v != ZERO {
                                let row = (o1 * n + o2) * n + o3;
                                let col = (i1 * n + i2) * n + o3;
                                out[(row, col)] += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Embeds the operator into three sites, acting on sites 2 and 3.
    pub fn embed23(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let dim = n * n * n;
        let mut out = DMatrix::from_element(dim, dim, ZERO);
        for o1 in 0..n {
            for o2 in 0..n {
                for o3 in 0..n {
                    for i2 in 0..n {
                        for i3 in 0..n {
                            let v = self.get(o2, o3, i2, i3);
                            if v != ZERO {
                                let row = (o1 * n + o2) * n + o3;
                                let col = (o1 * n + i2) * n + i3;
                                out[(row, col)] += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Embeds the operator into three sites, acting on sites 1 and 3.
    pub fn embed13(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let dim = n * n * n;
        let mut out = DMatrix::from_element(dim, dim, ZERO);
        for o1 in 0..n {
            for o2 in 0..n {
                for o3 in 0..n {
                    for i1 in 0..n {
                        for i3 in 0..n {
                            let v = self.get(o1, o3, i1, i3);
                            if v != ZERO {
                                let row = (o1 * n + o2) * n + o3;
                                let col = (i1 * n + o2) * n + i3;
                                out[(row, col)] += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Largest element modulus of a dense matrix.
pub fn dmatrix_max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
