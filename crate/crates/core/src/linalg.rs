//! Small dense least-squares solver used by the regression fairness metrics.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition number above which the normal equations get a ridge term.
pub const CONDITION_LIMIT: f64 = 1e12;
pub const RIDGE: f64 = 1e-8;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `X^T X`.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..p {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                for j in i..p {
                    g.data[i * p + j] += xi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                g.data[i * p + j] = g.data[j * p + i];
            }
        }
        g
    }

    /// `X^T y`.
    pub fn xty(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate().take(self.rows) {
            for (o, x) in out.iter_mut().zip(self.row(r)) {
                *o += x * yr;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gauss-Jordan inverse with partial pivoting. `None` when a pivot vanishes.
pub fn invert(a: &Matrix) -> Option<Matrix> {
    let n = a.rows;
    let mut m = a.clone();
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        inv.set(i, i, 1.0);
    }
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if m.get(r, col).abs() > m.get(pivot, col).abs() {
                pivot = r;
            }
        }
        let pv = m.get(pivot, col);
        if pv == 0.0 || !pv.is_finite() {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                m.data.swap(pivot * n + c, col * n + c);
                inv.data.swap(pivot * n + c, col * n + c);
            }
        }
        for c in 0..n {
            m.data[col * n + c] /= pv;
            inv.data[col * n + c] /= pv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m.get(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m.data[r * n + c] -= f * m.data[col * n + c];
                inv.data[r * n + c] -= f * inv.data[col * n + c];
            }
        }
    }
    Some(inv)
}

/// One-norm condition number; infinite for a singular matrix.
pub fn condition_number(a: &Matrix) -> f64 {
    match invert(a) {
        Some(inv) => {
            let c = a.norm1() * inv.norm1();
            if c.is_finite() { c } else { f64::INFINITY }
        }
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    /// The Gram matrix was ill-conditioned and a ridge term was added.
    pub ridge: bool,
    /// The response had zero variance; `r_squared` is reported as 0.
    pub constant_target: bool,
}

/// Normal-equation solver with the Gram inverse cached, so repeated fits
/// against the same design only cost `O(n p)` each.
#[derive(Debug, Clone)]
pub struct OlsSolver<'a> {
    x: &'a Matrix,
    gram_inv: Matrix,
    ridge: bool,
}

impl<'a> OlsSolver<'a> {
    pub fn new(x: &'a Matrix) -> Result<Self> {
        if x.rows < x.cols {
            return Err(Error::Underdetermined { rows: x.rows, cols: x.cols });
        }
        if x.cols == 0 {
            return Err(Error::EmptyInput("design matrix has no columns"));
        }
        let gram = x.gram();
        let cond = condition_number(&gram);
        let (gram_inv, ridge) = if cond > CONDITION_LIMIT {
            let mut g = gram;
            for i in 0..g.rows {
                let v = g.get(i, i) + RIDGE;
                g.set(i, i, v);
            }
            // The ridge term makes a symmetric PSD matrix positive definite.
            (invert(&g).ok_or(Error::EmptyInput("singular design matrix"))?, true)
        } else {
            (invert(&gram).ok_or(Error::EmptyInput("singular design matrix"))?, false)
        };
        Ok(OlsSolver { x, gram_inv, ridge })
    }

    pub fn fit(&self, y: &[f64]) -> Result<OlsFit> {
        if y.len() != self.x.rows {
            return Err(Error::DimensionMismatch { expected: self.x.rows, actual: y.len() });
        }
        let xty = self.x.xty(y);
        let coefficients = self.gram_inv.mul_vec(&xty);
        if y.iter().all(|&v| v == y[0]) {
            return Ok(OlsFit { coefficients, r_squared: 0.0, ridge: self.ridge, constant_target: true });
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let ss_res = if self.ridge {
            y.iter().enumerate().map(|(r, &yr)| (yr - dot(self.x.row(r), &coefficients)).powi(2)).sum()
        } else {
            // exact least squares: residual sum is y'y - b'X'y
            (dot(y, y) - dot(&coefficients, &xty)).max(0.0)
        };
        let r_squared = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);
        Ok(OlsFit { coefficients, r_squared, ridge: self.ridge, constant_target: false })
    }
}

/// Least squares via the normal equations.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    OlsSolver::new(x)?.fit(y)
}
