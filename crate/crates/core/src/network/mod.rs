//! Topologies, stochastic weight matrices, link-failure processes and
//! spectral utilities.

mod matrix;
mod process;
mod spectral;
mod topology;

pub use matrix::{matrix_from_csv, matrix_to_csv, StochasticMatrix, NEG_CLAMP, ROW_SUM_TOL};
pub use process::{
    laplacian_weight_matrix, stationary_online, IidFailures, LinkFailureState, MarkovFailures, WeightProcess,
};
pub use spectral::{left_perron_vector, subdominant_modulus, SubdominantEstimate, PRIMITIVE_MARGIN};
pub use topology::{random_geometric_graph, Topology, MAX_GEOMETRIC_ATTEMPTS};
