//! The consensus+innovations recursion, its product-form oracle, and Monte
//! Carlo estimation of per-node error probabilities and decay rates.

mod decay;
mod engine;

pub use decay::{estimate_decay_rate, estimate_time_to_accuracy, DecayEstimate, WindowPolicy, MIN_POINTS};
pub use engine::{
    monte_carlo_error_probs, run_via_phi_products, simulate_trajectory, step, AccuracyRegion, ErrorProbabilityTable,
    SimulationConfig,
};
