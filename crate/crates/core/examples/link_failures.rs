//! Monte Carlo decay rates under i.i.d. and Markov link failures, against the
//! isolation and fusion rates of the same observation model.

use consensus_ldp::consensus::{estimate_decay_rate, monte_carlo_error_probs, AccuracyRegion, SimulationConfig, WindowPolicy};
use consensus_ldp::network::{stationary_online, Topology, WeightProcess};
use consensus_ldp::observation::{GaussianModel, ObservationModel};
use consensus_ldp::rates::isolation_fusion_rates;
use nalgebra::dvector;

fn main() -> consensus_ldp::Result<()> {
    let n = 6;
    let topology = Topology::path(n)?;
    let alpha = topology.default_alpha();
    let model = ObservationModel::Gaussian(GaussianModel::scalar(0.0, 0.5)?);
    let zeta = 0.15;
    let (iso, fus) = isolation_fusion_rates(&model, n, &dvector![zeta])?;
    println!("isolation {:.4}, fusion {:.4}", iso.to_f64(), fus.to_f64());
    println!("markov (0.9, 0.5) links are up {:.3} of the time", stationary_online(0.9, 0.5));

    let processes = [
        ("iid p = 0.5", WeightProcess::iid(topology.clone(), 0.5, alpha)?),
        ("markov 0.9/0.5", WeightProcess::markov(topology, 0.9, 0.5, alpha)?),
    ];
    let window = WindowPolicy::Resolvable { min_count: 30, fraction: 0.6 };
    for (label, process) in processes {
        let config = SimulationConfig {
            models: vec![model.clone(); n],
            process,
            horizon: 200,
            runs: 20_000,
            region: AccuracyRegion::ball(dvector![0.0], zeta)?,
            seed: 5,
        };
        let table = monte_carlo_error_probs(&config, None)?;
        let rates: Vec<String> = (0..n)
            .map(|i| {
                let fit = window.resolve(table.node_counts(i)).and_then(|w| estimate_decay_rate(&table.node_series(i), w));
                fit.map_or_else(|e| format!("({e})"), |f| format!("{:.4}", f.rate))
            })
            .collect();
        println!("{label}: {}", rates.join(" "));
    }
    Ok(())
}
