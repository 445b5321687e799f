//! One trajectory of the recursion `X_t = W_t((t-1)/t X_{t-1} + Z_t / t)`,
//! checked against the closed form through products of weight matrices.

use consensus_ldp::consensus::{run_via_phi_products, step};
use consensus_ldp::network::{StochasticMatrix, Topology, WeightProcess};
use consensus_ldp::observation::{GaussianModel, ObservationModel};
use consensus_ldp::rng::{stream, StreamRole};
use nalgebra::DMatrix;

fn main() -> consensus_ldp::Result<()> {
    let topology = Topology::path(5)?;
    let mut process = WeightProcess::iid(topology, 0.6, 0.3)?;
    let model = ObservationModel::Gaussian(GaussianModel::scalar(1.0, 2.0)?);
    let (n, horizon) = (5, 50);

    let mut link_rng = stream(3, 0, StreamRole::Links);
    let mut obs_rng = stream(3, 0, StreamRole::Observations);
    let mut ws: Vec<StochasticMatrix> = Vec::new();
    let mut zs = Vec::new();
    let mut x = DMatrix::zeros(n, 1);
    for t in 1..=horizon {
        let w = process.next_weight_matrix(&mut link_rng).clone();
        let z = DMatrix::from_fn(n, 1, |_, _| model.sample(&mut obs_rng)[0]);
        x = step(&x, &w, &z, t)?;
        ws.push(w);
        zs.push(z);
    }
    for i in 0..n {
        let oracle = run_via_phi_products(&ws, &zs, i, horizon)?;
        println!("node {i}: recursion {:.6}, product form {:.6}", x[(i, 0)], oracle[0]);
    }
    Ok(())
}
