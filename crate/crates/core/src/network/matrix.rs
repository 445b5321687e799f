use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::Topology;
use crate::error::{invalid, Error, Result};

/// Tolerance on row sums of a stochastic matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Entries in `[-NEG_CLAMP, 0)` are rounded to zero; anything lower is rejected.
pub const NEG_CLAMP: f64 = 1e-14;

/// Square non-negative matrix with unit row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        Self::validate_with(&mut m, ROW_SUM_TOL)?;
        Ok(Self(m))
    }

    /// Like [`StochasticMatrix::new`] with a caller-chosen row-sum tolerance,
    /// for matrices produced by iterative solvers.
    pub fn with_tolerance(mut m: DMatrix<f64>, row_tol: f64) -> Result<Self> {
        Self::validate_with(&mut m, row_tol)?;
        Ok(Self(m))
    }

    /// Also checks that every off-pattern entry is exactly zero.
    pub fn on_topology(m: DMatrix<f64>, topology: &Topology) -> Result<Self> {
        let s = Self::new(m)?;
        s.check_pattern(topology)?;
        Ok(s)
    }

    fn validate_with(m: &mut DMatrix<f64>, row_tol: f64) -> Result<()> {
        let n = m.nrows();
        if n == 0 || n != m.ncols() {
            return Err(invalid(format!("stochastic matrix must be square and non-empty, got {}x{}", n, m.ncols())));
        }
        for x in m.iter_mut() {
            if !x.is_finite() || *x < -NEG_CLAMP {
                return Err(invalid(format!("entry {x} is negative or non-finite")));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        for i in 0..n {
            let sum: f64 = m.row(i).iter().sum();
            if (sum - 1.0).abs() > row_tol {
                return Err(invalid(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Wraps a matrix known to be stochastic by construction.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(Self::new(m.clone()).is_ok());
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// `J_n`, every entry `1/n`.
    pub fn averaging(n: usize) -> Self {
        Self(DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    /// The rank-one matrix `1 a^T` for a probability vector `a`.
    pub fn rank_one(a: &DVector<f64>) -> Result<Self> {
        let n = a.len();
        Self::new(DMatrix::from_fn(n, n, |_, j| a[j]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn check_pattern(&self, topology: &Topology) -> Result<()> {
        if topology.n() != self.n() {
            return Err(invalid(format!("topology has {} nodes, matrix {}", topology.n(), self.n())));
        }
        for i in 0..self.n() {
            for j in 0..self.n() {
                if self.0[(i, j)] != 0.0 && !topology.allows(i, j) {
                    return Err(invalid(format!("entry ({i},{j}) is off the topology")));
                }
            }
        }
        Ok(())
    }

    /// Dense CSV, one row per line, full `f64` round-trip precision.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.0)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let m = matrix_from_csv(text)?;
        Self::new(m)
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Parse("matrix CSV must be rectangular and non-empty".into()));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}
