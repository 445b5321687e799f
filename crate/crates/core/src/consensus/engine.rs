use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::network::{StochasticMatrix, WeightProcess};
use crate::observation::ObservationModel;
use crate::rng::{stream, StreamRole};

/// One iteration of the consensus+innovations update.
///
/// `states` and `z` are `N x d` (one row per node). Returns
/// `W ((t-1)/t X_{t-1} + Z_t / t)`.
pub fn step(states: &DMatrix<f64>, w: &StochasticMatrix, z: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 {
        return Err(invalid("t starts at 1"));
    }
    let n = w.n();
    if states.nrows() != n || z.nrows() != n || states.ncols() != z.ncols() {
        return Err(invalid(format!(
            "shape mismatch: W is {n}x{n}, states {}x{}, observations {}x{}",
            states.nrows(),
            states.ncols(),
            z.nrows(),
            z.ncols()
        )));
    }
    let tf = t as f64;
    let mixed = states * ((tf - 1.0) / tf) + z / tf;
    Ok(w.as_matrix() * mixed)
}

/// State of node `i` at time `t` from the product form
/// `X_{i,t} = (1/t) sum_s sum_j [W_t ... W_s]_{ij} Z_{j,s}`.
///
/// `ws[s-1]` and `zs[s-1]` hold `W_s` and `Z_s`; only the first `t` are used.
pub fn run_via_phi_products(ws: &[StochasticMatrix], zs: &[DMatrix<f64>], i: usize, t: usize) -> Result<DVector<f64>> {
    if t == 0 || ws.len() < t || zs.len() < t {
        return Err(invalid(format!("need {t} weight matrices and observations")));
    }
    let n = ws[0].n();
    if i >= n {
        return Err(invalid(format!("node {i} out of range")));
    }
    let d = zs[0].ncols();
    // Row i of Phi(t, s), built right-to-left: e_i^T W_t, then times W_{t-1}, ...
    let mut row = ws[t - 1].as_matrix().row(i).into_owned();
    let mut acc = DVector::zeros(d);
    for s in (1..=t).rev() {
        acc += (&row * &zs[s - 1]).transpose();
        if s > 1 {
            row = &row * ws[s - 2].as_matrix();
        }
    }
    Ok(acc / t as f64)
}

/// Deviation region `D = {x : |x - center| >= zeta}`, the complement of the
/// open Euclidean accuracy ball.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRegion {
    center: DVector<f64>,
    zeta: f64,
}

impl AccuracyRegion {
    pub fn ball(center: DVector<f64>, zeta: f64) -> Result<Self> {
        if !(zeta > 0.0) {
            return Err(invalid(format!("region radius must be positive, got {zeta}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("region center must be finite"));
        }
        Ok(Self { center, zeta })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn exceeds(&self, x: &[f64]) -> bool {
        let d2: f64 = x.iter().zip(self.center.iter()).map(|(a, c)| (a - c) * (a - c)).sum();
        d2 >= self.zeta * self.zeta
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub models: Vec<ObservationModel>,
    pub process: WeightProcess,
    pub horizon: usize,
    pub runs: usize,
    pub region: AccuracyRegion,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.models.len();
        if n == 0 {
            return Err(invalid("need at least one node"));
        }
        if self.process.n() != n {
            return Err(invalid(format!("process has {} nodes, {} models given", self.process.n(), n)));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        let d = self.models[0].dim();
        if self.models.iter().any(|m| m.dim() != d) {
            return Err(invalid("observation models have different dimensions"));
        }
        if self.region.dim() != d {
            return Err(invalid(format!("region has dimension {}, observations {d}", self.region.dim())));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }
}

/// Per-node, per-iteration exceedance counts over `runs` trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProbabilityTable {
    n: usize,
    horizon: usize,
    runs: usize,
    /// Node-major: entry `i * horizon + (t - 1)`.
    counts: Vec<u64>,
    final_mean: DMatrix<f64>,
    final_sq_mean: DMatrix<f64>,
}

impl ErrorProbabilityTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    /// Exceedance count for node `i` at iteration `t` (1-based).
    pub fn count(&self, i: usize, t: usize) -> u64 {
        self.counts[i * self.horizon + t - 1]
    }

    pub fn p_hat(&self, i: usize, t: usize) -> f64 {
        self.count(i, t) as f64 / self.runs as f64
    }

    pub fn censored(&self, i: usize, t: usize) -> bool {
        self.count(i, t) == 0
    }

    pub fn node_counts(&self, i: usize) -> &[u64] {
        &self.counts[i * self.horizon..(i + 1) * self.horizon]
    }

    /// `P_hat_{i,t}` for `t = 1..=horizon`.
    pub fn node_series(&self, i: usize) -> Vec<f64> {
        self.node_counts(i).iter().map(|&c| c as f64 / self.runs as f64).collect()
    }

    /// `N x T` matrix of `P_hat`.
    pub fn p_hat_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.horizon, |i, t| self.p_hat(i, t + 1))
    }

    /// Sample mean of `X_{i,T}` over runs, `N x d`.
    pub fn final_state_mean(&self) -> &DMatrix<f64> {
        &self.final_mean
    }

    /// Sample mean of the squared entries of `X_{i,T}`, `N x d`.
    pub fn final_state_sq_mean(&self) -> &DMatrix<f64> {
        &self.final_sq_mean
    }

    /// CSV with columns `node,t,count,p_hat,censored`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.counts.len() * 24);
        out.push_str("node,t,count,p_hat,censored\n");
        for i in 0..self.n {
            for t in 1..=self.horizon {
                let c = self.count(i, t);
                out.push_str(&format!("{i},{t},{c},{},{}\n", self.p_hat(i, t), c == 0));
            }
        }
        out
    }
}

/// Reusable buffers for simulating one trajectory.
struct Trajectory<'a> {
    config: &'a SimulationConfig,
    process: WeightProcess,
    obs_rng: ChaCha8Rng,
    link_rng: ChaCha8Rng,
    x: Vec<f64>,
    mixed: Vec<f64>,
}

impl<'a> Trajectory<'a> {
    fn new(config: &'a SimulationConfig, run: u64) -> Self {
        let nd = config.n() * config.dim();
        Self {
            config,
            process: config.process.clone(),
            obs_rng: stream(config.seed, run, StreamRole::Observations),
            link_rng: stream(config.seed, run, StreamRole::Links),
            x: vec![0.0; nd],
            mixed: vec![0.0; nd],
        }
    }

    /// Advances to iteration `t`; the new states are in `self.x` (row-major `N x d`).
    fn advance(&mut self, t: usize) {
        let (n, d) = (self.config.n(), self.config.dim());
        let tf = t as f64;
        let keep = (tf - 1.0) / tf;
        for (i, model) in self.config.models.iter().enumerate() {
            let row = &mut self.mixed[i * d..(i + 1) * d];
            model.sample_into(&mut self.obs_rng, row);
            for (m, x) in row.iter_mut().zip(&self.x[i * d..(i + 1) * d]) {
                *m = keep * x + *m / tf;
            }
        }
        let w = self.process.next_weight_matrix(&mut self.link_rng).as_matrix();
        for i in 0..n {
            for k in 0..d {
                let mut s = 0.0;
                for j in 0..n {
                    s += w[(i, j)] * self.mixed[j * d + k];
                }
                self.x[i * d + k] = s;
            }
        }
    }
}

/// Simulates a single run and returns `X_t` for `t = 1..=horizon`.
///
/// Uses the same streams as run `run` of [`monte_carlo_error_probs`].
pub fn simulate_trajectory(config: &SimulationConfig, run: u64) -> Result<Vec<DMatrix<f64>>> {
    config.validate()?;
    let (n, d) = (config.n(), config.dim());
    let mut traj = Trajectory::new(config, run);
    let mut out = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        traj.advance(t);
        out.push(DMatrix::from_row_slice(n, d, &traj.x));
    }
    Ok(out)
}

const BLOCK_RUNS: usize = 256;

struct BlockTotals {
    counts: Vec<u64>,
    sum: Vec<f64>,
    sq_sum: Vec<f64>,
}

fn run_block(config: &SimulationConfig, runs: std::ops::Range<usize>) -> BlockTotals {
    let (n, d, horizon) = (config.n(), config.dim(), config.horizon);
    let mut totals = BlockTotals { counts: vec![0; n * horizon], sum: vec![0.0; n * d], sq_sum: vec![0.0; n * d] };
    for run in runs {
        let mut traj = Trajectory::new(config, run as u64);
        for t in 1..=horizon {
            traj.advance(t);
            for i in 0..n {
                if config.region.exceeds(&traj.x[i * d..(i + 1) * d]) {
                    totals.counts[i * horizon + t - 1] += 1;
                }
            }
        }
        for (k, &x) in traj.x.iter().enumerate() {
            totals.sum[k] += x;
            totals.sq_sum[k] += x * x;
        }
    }
    totals
}

/// Monte Carlo estimate of `P(X_{i,t} in D)` for every node and iteration.
///
/// Run `k` draws observations and link states from streams keyed by
/// `(seed, k)`, and runs are grouped into fixed blocks whose results are
/// merged in block order, so the table is identical for any `threads`.
/// `threads = None` uses rayon's global pool.
pub fn monte_carlo_error_probs(config: &SimulationConfig, threads: Option<usize>) -> Result<ErrorProbabilityTable> {
    config.validate()?;
    let blocks: Vec<std::ops::Range<usize>> =
        (0..config.runs).step_by(BLOCK_RUNS).map(|s| s..(s + BLOCK_RUNS).min(config.runs)).collect();
    let compute = || blocks.par_iter().map(|r| run_block(config, r.clone())).collect::<Vec<_>>();
    let results = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(compute),
        None => compute(),
    };
    let (n, d, horizon) = (config.n(), config.dim(), config.horizon);
    let mut counts = vec![0u64; n * horizon];
    let mut sum = vec![0.0; n * d];
    let mut sq_sum = vec![0.0; n * d];
    for b in &results {
        counts.iter_mut().zip(&b.counts).for_each(|(a, c)| *a += c);
        sum.iter_mut().zip(&b.sum).for_each(|(a, c)| *a += c);
        sq_sum.iter_mut().zip(&b.sq_sum).for_each(|(a, c)| *a += c);
    }
    let k = config.runs as f64;
    Ok(ErrorProbabilityTable {
        n,
        horizon,
        runs: config.runs,
        counts,
        final_mean: DMatrix::from_row_iterator(n, d, sum.iter().map(|s| s / k)),
        final_sq_mean: DMatrix::from_row_iterator(n, d, sq_sum.iter().map(|s| s / k)),
    })
}
