use nalgebra::DMatrix;
use rand::Rng;

use super::{StochasticMatrix, Topology};
use crate::error::{invalid, Result};

/// Per-edge online/offline flags, aligned with [`Topology::edges`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkFailureState {
    online: Vec<bool>,
}

impl LinkFailureState {
    /// All links online.
    pub fn all_online(edges: usize) -> Self {
        Self { online: vec![true; edges] }
    }

    pub fn online(&self) -> &[bool] {
        &self.online
    }

    pub fn len(&self) -> usize {
        self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        self.online.is_empty()
    }

    /// One step of every link's two-state chain: an online link stays online
    /// with probability `q1`, an offline link stays offline with probability `q2`.
    pub fn advance<R: Rng + ?Sized>(&mut self, q1: f64, q2: f64, rng: &mut R) {
        for on in self.online.iter_mut() {
            let u: f64 = rng.random();
            *on = if *on { u < q1 } else { u >= q2 };
        }
    }
}

fn check_alpha(topology: &Topology, alpha: f64) -> Result<()> {
    let bound = topology.default_alpha();
    if !(alpha > 0.0) || alpha > bound * (1.0 + 1e-12) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1/(d_max+1)] = (0, {bound}]")));
    }
    Ok(())
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

fn fill_laplacian_weights(topology: &Topology, active: &[bool], alpha: f64, out: &mut DMatrix<f64>) {
    out.fill(0.0);
    out.fill_diagonal(1.0);
    for (&(j, i), &on) in topology.edges().iter().zip(active) {
        if on {
            out[(i, j)] = alpha;
            out[(i, i)] -= alpha;
        }
    }
}

/// `I - alpha L` where `L` is the in-degree Laplacian of the active edges.
///
/// `active` is a mask aligned with [`Topology::edges`]. Row `i` puts weight
/// `alpha` on every active in-neighbour and the remainder on itself, so the
/// result is stochastic for `0 < alpha <= 1/(d_max + 1)`.
pub fn laplacian_weight_matrix(topology: &Topology, active: &[bool], alpha: f64) -> Result<StochasticMatrix> {
    if active.len() != topology.edges().len() {
        return Err(invalid(format!("mask has {} entries for {} edges", active.len(), topology.edges().len())));
    }
    check_alpha(topology, alpha)?;
    let n = topology.n();
    let mut m = DMatrix::zeros(n, n);
    fill_laplacian_weights(topology, active, alpha, &mut m);
    Ok(StochasticMatrix::from_trusted(m))
}

#[derive(Debug, Clone)]
pub struct IidFailures {
    topology: Topology,
    p: f64,
    alpha: f64,
    active: Vec<bool>,
    current: StochasticMatrix,
}

#[derive(Debug, Clone)]
pub struct MarkovFailures {
    topology: Topology,
    q1: f64,
    q2: f64,
    alpha: f64,
    state: LinkFailureState,
    current: StochasticMatrix,
}

impl MarkovFailures {
    pub fn state(&self) -> &LinkFailureState {
        &self.state
    }

    /// Long-run fraction of time a link is online, `(1-q2) / (2-q1-q2)`.
    pub fn stationary_online(&self) -> f64 {
        stationary_online(self.q1, self.q2)
    }
}

pub fn stationary_online(q1: f64, q2: f64) -> f64 {
    let denom = 2.0 - q1 - q2;
    if denom == 0.0 {
        // Both chains are absorbing; the all-online start never leaves.
        1.0
    } else {
        (1.0 - q2) / denom
    }
}

/// Rule producing the weight matrix `W_t` at each iteration.
#[derive(Debug, Clone)]
pub enum WeightProcess {
    Constant(StochasticMatrix),
    /// Each directed edge is independently active with probability `p` at each step.
    IidFailures(IidFailures),
    /// Each directed edge follows its own two-state Markov chain, starting online.
    MarkovFailures(MarkovFailures),
}

impl WeightProcess {
    pub fn constant(a: StochasticMatrix) -> Self {
        WeightProcess::Constant(a)
    }

    pub fn iid(topology: Topology, p: f64, alpha: f64) -> Result<Self> {
        check_probability("p", p)?;
        check_alpha(&topology, alpha)?;
        let active = vec![false; topology.edges().len()];
        let current = StochasticMatrix::identity(topology.n());
        Ok(WeightProcess::IidFailures(IidFailures { topology, p, alpha, active, current }))
    }

    pub fn markov(topology: Topology, q1: f64, q2: f64, alpha: f64) -> Result<Self> {
        check_probability("q1", q1)?;
        check_probability("q2", q2)?;
        check_alpha(&topology, alpha)?;
        let state = LinkFailureState::all_online(topology.edges().len());
        let current = StochasticMatrix::identity(topology.n());
        Ok(WeightProcess::MarkovFailures(MarkovFailures { topology, q1, q2, alpha, state, current }))
    }

    pub fn n(&self) -> usize {
        match self {
            WeightProcess::Constant(a) => a.n(),
            WeightProcess::IidFailures(p) => p.topology.n(),
            WeightProcess::MarkovFailures(p) => p.topology.n(),
        }
    }

    pub fn as_constant(&self) -> Option<&StochasticMatrix> {
        match self {
            WeightProcess::Constant(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_markov(&self) -> Option<&MarkovFailures> {
        match self {
            WeightProcess::MarkovFailures(m) => Some(m),
            _ => None,
        }
    }

    /// Draws the next weight matrix. Link draws come only from `rng`, which
    /// callers keep separate from the observation stream.
    pub fn next_weight_matrix<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &StochasticMatrix {
        match self {
            WeightProcess::Constant(a) => a,
            WeightProcess::IidFailures(p) => {
                for on in p.active.iter_mut() {
                    *on = rng.random::<f64>() < p.p;
                }
                fill_laplacian_weights(&p.topology, &p.active, p.alpha, p.current.matrix_mut());
                &p.current
            }
            WeightProcess::MarkovFailures(m) => {
                m.state.advance(m.q1, m.q2, rng);
                fill_laplacian_weights(&m.topology, &m.state.online, m.alpha, m.current.matrix_mut());
                &m.current
            }
        }
    }
}
