//! Classical dense factorizations. Every "invert the small core matrix" step of the
//! solver hierarchy goes through here.

use crate::error::{MspError, Result};
use crate::linalg::dense::DenseMatrix;

/// Relative pivot threshold: a pivot below `PIVOT_TOL * max|A|` is treated as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(MspError::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let n = a.rows();
        let tol = PIVOT_TOL * a.max_abs();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > tol) {
                return Err(MspError::Singular { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                for k in 0..j {
                    s -= ri[k] * rj[k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            let row = &self.l[i * n..i * n + i];
            for (k, lk) in row.iter().enumerate() {
                s -= lk * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = y[i] / self.l[i * n + i];
            y[i] = xi;
            for k in 0..i {
                y[k] -= self.l[i * n + k] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// `L^{-1} b`
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        x
    }

    pub fn factor_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_row_major(self.n, self.n, self.l.clone()).expect("square factor")
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}

/// LU with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(MspError::DimensionMismatch("LU needs a square matrix".into()));
        }
        let n = a.rows();
        let tol = PIVOT_TOL * a.max_abs();
        let mut lu = a.data().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pv > tol) {
                return Err(MspError::Singular { index: k, pivot: pv });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// A cached factorization of a square matrix.
#[derive(Clone, Debug)]
pub enum Factorization {
    Cholesky(Cholesky),
    Lu(Lu),
}

impl Factorization {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factorization::Cholesky(c) => c.solve(b),
            Factorization::Lu(l) => l.solve(b),
        }
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.column(j));
            out.set_column(j, &x);
        }
        out
    }
}
