//! Small dense symmetric linear algebra used across the crate.
//!
//! Dimensions here are tiny (observation dimension, or node count for the
//! design problems), so everything is dense and `O(n^3)` per call.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Symmetry tolerance for covariance-like inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative rank cutoff used for pseudoinverses: eigenvalues below
/// `RANK_TOL * lambda_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
        if off <= 1e-32 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    (values, vectors)
}

/// Largest eigenvalue and a unit eigenvector of a symmetric PSD matrix.
///
/// Power iteration with a Rayleigh-quotient stopping rule; falls back to
/// [`jacobi_eigen`] when it fails to converge or lands on a non-dominant
/// eigenvector (detected by `lambda_max >= max_i S_ii`).
pub fn sym_lambda_max(s: &DMatrix<f64>, tol: f64) -> (f64, DVector<f64>) {
    let n = s.nrows();
    if n == 0 {
        return (0.0, DVector::zeros(0));
    }
    if n == 1 {
        return (s[(0, 0)], DVector::from_element(1, 1.0));
    }
    let max_diag = (0..n).map(|i| s[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if max_diag <= 0.0 {
        return jacobi_top(s);
    }
    let mut v = DVector::from_iterator(n, (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()));
    v /= v.norm();
    let mut rayleigh = f64::NAN;
    for _ in 0..10_000 {
        let w = s * &v;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        let next = w.dot(&v);
        v = w / norm;
        if (next - rayleigh).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            rayleigh = (s * &v).dot(&v);
            if rayleigh >= max_diag * (1.0 - 1e-12) {
                return (rayleigh, v);
            }
            break;
        }
        rayleigh = next;
    }
    jacobi_top(s)
}

fn jacobi_top(s: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (vals, vecs) = jacobi_eigen(s);
    let n = vals.len();
    (vals[n - 1], vecs.column(n - 1).into_owned())
}

/// Symmetric PSD matrix with a cached spectral decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl PsdMatrix {
    /// Validates symmetry and semidefiniteness; eigenvalues in
    /// `[-1e-12, 0)` are clamped to zero and the matrix rebuilt.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(invalid(format!("matrix is {}x{}, not square", n, matrix.ncols())));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(invalid(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let (mut values, vectors) = jacobi_eigen(&sym);
        let mut clamped = false;
        for v in values.iter_mut() {
            if *v < -SYMMETRY_TOL {
                return Err(invalid(format!("matrix not positive semidefinite (eigenvalue {v:e})")));
            }
            if *v < 0.0 {
                *v = 0.0;
                clamped = true;
            }
        }
        let matrix = if clamped {
            &vectors * DMatrix::from_diagonal(&values) * vectors.transpose()
        } else {
            sym
        };
        Ok(Self { matrix, eigenvalues: values, eigenvectors: vectors })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    fn cutoff(&self) -> f64 {
        RANK_TOL * self.lambda_max()
    }

    /// True when every eigenvalue exceeds the rank cutoff.
    pub fn is_nonsingular(&self) -> bool {
        let lmax = self.lambda_max();
        lmax > 0.0 && self.eigenvalues.iter().all(|&v| v > self.cutoff())
    }

    /// `L` with `L L^T = S`, from the eigendecomposition (valid for singular `S`).
    pub fn square_root_factor(&self) -> DMatrix<f64> {
        let roots = self.eigenvalues.map(|v| v.max(0.0).sqrt());
        &self.eigenvectors * DMatrix::from_diagonal(&roots)
    }

    /// Quadratic form `v^T S^+ v` and the residual of `v` off `range(S)`.
    ///
    /// The residual is the norm of the component of `v` in the numerical
    /// null space.
    pub fn pinv_quadratic(&self, v: &DVector<f64>) -> (f64, f64) {
        let cutoff = self.cutoff();
        let coords = self.eigenvectors.transpose() * v;
        let mut quad = 0.0;
        let mut off_range = 0.0;
        for (c, &lam) in coords.iter().zip(self.eigenvalues.iter()) {
            if lam > cutoff && lam > 0.0 {
                quad += c * c / lam;
            } else {
                off_range += c * c;
            }
        }
        (quad, off_range.sqrt())
    }
}

/// Largest singular value of `b` with left and right singular vectors,
/// by power iteration on `b^T b` warm-started from `start`.
pub fn top_singular_pair(
    b: &DMatrix<f64>,
    start: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> (f64, DVector<f64>, DVector<f64>) {
    let n = b.ncols();
    let mut v = match start {
        Some(s) if s.len() == n && s.norm() > 0.0 => s.normalize(),
        _ => DVector::from_iterator(n, (0..n).map(|i| 1.0 + 0.37 * ((i * 7 + 3) % 11) as f64)).normalize(),
    };
    let btb = b.transpose() * b;
    let mut sigma2 = 0.0;
    for _ in 0..max_iter {
        let w = &btb * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, DVector::zeros(b.nrows()), v);
        }
        let next = v.dot(&w);
        v = w / norm;
        let converged = (next - sigma2).abs() <= tol * next;
        sigma2 = next;
        if converged {
            break;
        }
    }
    let bv = b * &v;
    let sigma = bv.norm();
    let u = if sigma > 0.0 { bv / sigma } else { DVector::zeros(b.nrows()) };
    (sigma, u, v)
}

/// Spectral norm of a dense matrix, computed from the Jacobi eigenvalues of
/// `b^T b` (exact up to rounding; used where an independent check matters).
pub fn spectral_norm(b: &DMatrix<f64>) -> f64 {
    let (vals, _) = jacobi_eigen(&(b.transpose() * b));
    vals.iter().copied().fold(0.0, f64::max).sqrt()
}
