//! Network design: the left Perron vector that maximizes the decay rate over
//! the complement of a ball, and a weight matrix on a given topology that
//! realizes it.

mod eigvec;
mod synth;

use nalgebra::DVector;

use crate::error::{invalid, Result};
use crate::linalg::PsdMatrix;
use crate::network::{StochasticMatrix, Topology};

pub use eigvec::{design_rate, optimize_left_eigenvector, project_simplex, EigenvectorSolution};
pub use synth::{metropolis_seed, synthesize_weight_matrix, WeightSynthesis, CONSTRAINT_TOL, INFEASIBLE_RESIDUAL};

/// Per-node covariances (all nodes share the mean), the topology and the
/// radius `zeta` of the accuracy ball.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub covariances: Vec<PsdMatrix>,
    pub topology: Topology,
    pub zeta: f64,
}

impl DesignProblem {
    pub fn new(covariances: Vec<PsdMatrix>, topology: Topology, zeta: f64) -> Result<Self> {
        if covariances.len() != topology.n() {
            return Err(invalid(format!("{} covariances for {} nodes", covariances.len(), topology.n())));
        }
        if !(zeta > 0.0) {
            return Err(invalid(format!("radius must be positive, got {zeta}")));
        }
        Ok(Self { covariances, topology, zeta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub a_star: DVector<f64>,
    /// `min_a lambda_max(sum_j a_j^2 S_j)`.
    pub lambda_star: f64,
    /// `zeta^2 / (2 lambda_star)`; `+inf` when `lambda_star = 0`.
    pub rate_star: f64,
    pub duality_gap: f64,
    pub matrix: StochasticMatrix,
    pub gamma: f64,
    pub synthesis: WeightSynthesis,
}

/// Solves for `a*` and synthesizes `A` with that left Perron vector.
pub fn design(problem: &DesignProblem, tol: f64) -> Result<DesignResult> {
    let sol = optimize_left_eigenvector(&problem.covariances, tol)?;
    let rate_star = if sol.lambda_star > 0.0 { design_rate(sol.lambda_star, problem.zeta)? } else { f64::INFINITY };
    let synthesis = synthesize_weight_matrix(&problem.topology, &sol.a, tol)?;
    Ok(DesignResult {
        a_star: sol.a,
        lambda_star: sol.lambda_star,
        rate_star,
        duality_gap: sol.duality_gap,
        matrix: synthesis.matrix.clone(),
        gamma: synthesis.gamma,
        synthesis,
    })
}
