//! Dense row-major matrices and the handful of vector operations the solvers
//! need. Sizes here are desk scale (hundreds of rows/columns), so everything
//! is plain `Vec<f64>` with sequential loops.

use crate::error::{Error, Result};

/// Dense matrix, row-major storage, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// `data` is row-major with `rows * cols` finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("DenseMatrix::new data length", rows * cols, data.len()));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "data",
                format!("non-finite entry at flat index {bad}"),
            ));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim("matvec input", self.cols, x.len()));
        }
        let mut y = vec![0.0; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yi = acc;
        }
        Ok(y)
    }

    /// y = Aᵀ x.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::dim("matvec_t input", self.rows, x.len()));
        }
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += a * xi;
            }
        }
        Ok(y)
    }

    /// Largest eigenvalue of AᵀA (the squared spectral norm of A) by power
    /// iteration, converged when the relative Rayleigh-quotient change drops
    /// below `tol`.
    ///
    /// Deterministic: starts from the normalized all-ones vector. That start
    /// can be exactly orthogonal to the dominant eigenvector (A = [1 −1] maps
    /// it to zero), so on collapse the iteration restarts from basis vectors
    /// e_0, e_1, … in order; if every start collapses the matrix is zero and
    /// the result is 0.
    pub fn spectral_norm_sq(&self, tol: f64, max_iter: usize) -> Result<f64> {
        if tol <= 0.0 {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if self.rows == 0 || self.cols == 0 {
            return Ok(0.0);
        }
        let n = self.cols;
        // Start vectors: all-ones normalized, then e_0, e_1, ...
        'starts: for start in 0..=n {
            let mut v = if start == 0 {
                vec![1.0 / (n as f64).sqrt(); n]
            } else {
                let mut e = vec![0.0; n];
                e[start - 1] = 1.0;
                e
            };
            let mut lambda = 0.0;
            for it in 0..max_iter {
                let av = self.matvec(&v)?;
                let w = self.matvec_t(&av)?; // w = AᵀA v
                let wn = norm2(&w);
                if wn == 0.0 {
                    // v is in the null space of AᵀA; try the next start.
                    continue 'starts;
                }
                // Rayleigh quotient at unit v equals ‖Av‖².
                let lambda_new = dot_raw(&av, &av);
                for (vi, wi) in v.iter_mut().zip(&w) {
                    *vi = wi / wn;
                }
                if it > 0 && (lambda_new - lambda).abs() <= tol * lambda_new.abs() {
                    return Ok(lambda_new);
                }
                lambda = lambda_new;
            }
            return Err(Error::PowerIterationNonConvergence {
                iterations: max_iter,
                last_estimate: lambda,
            });
        }
        Ok(0.0)
    }

    /// [`Self::spectral_norm_sq`] with the default settings (tol 1e−10,
    /// max_iter 5000).
    pub fn spectral_norm_sq_default(&self) -> Result<f64> {
        self.spectral_norm_sq(1e-10, 5000)
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot_raw(x, x).sqrt()
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Inner product with a dimension check.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("dot", a.len(), b.len()));
    }
    Ok(dot_raw(a, b))
}

/// Inner product where the caller has already established equal lengths.
pub(crate) fn dot_raw(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// z = x − y.
pub(crate) fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub(crate) fn norm2_sq(x: &[f64]) -> f64 {
    dot_raw(x, x)
}
