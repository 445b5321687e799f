//! Optimal left Perron vector for heterogeneous nodes on a random geometric
//! graph, and a weight matrix on that graph realizing it.

use consensus_ldp::design::{design, DesignProblem};
use consensus_ldp::linalg::PsdMatrix;
use consensus_ldp::network::{left_perron_vector, random_geometric_graph, subdominant_modulus};
use consensus_ldp::rng::{stream, StreamRole};
use nalgebra::DMatrix;

fn main() -> consensus_ldp::Result<()> {
    let topology = random_geometric_graph(8, 0.5, &mut stream(2, 0, StreamRole::Topology))?;
    let variances = [0.9, 0.2, 0.5, 0.35, 0.8, 0.15, 0.6, 0.4];
    let covariances =
        variances.iter().map(|&v| PsdMatrix::new(DMatrix::from_element(1, 1, v))).collect::<Result<Vec<_>, _>>()?;
    let zeta = 0.1;
    let result = design(&DesignProblem::new(covariances, topology.clone(), zeta)?, 1e-6)?;

    let uniform_lambda = variances.iter().sum::<f64>() / (variances.len() as f64).powi(2);
    println!("edges: {}", topology.edges().len());
    println!("a*      = {:.4?}", result.a_star.as_slice());
    println!("lambda* = {:.5} (uniform {:.5})", result.lambda_star, uniform_lambda);
    println!("rate*   = {:.5} (uniform {:.5})", result.rate_star, zeta * zeta / (2.0 * uniform_lambda));
    println!("gap {:.2e}, gamma {:.4}, constraint residual {:.1e}", result.duality_gap, result.gamma, result.synthesis.residual);

    let realized = left_perron_vector(&result.matrix)?;
    println!("realized Perron vector = {:.4?}", realized.as_slice());
    println!("|lambda_2| = {:.4}", subdominant_modulus(&result.matrix).modulus);
    Ok(())
}
