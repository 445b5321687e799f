use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::consensus::{AccuracyRegion, SimulationConfig, WindowPolicy};
use crate::design::{optimize_left_eigenvector, synthesize_weight_matrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::PsdMatrix;
use crate::network::{
    laplacian_weight_matrix, left_perron_vector, matrix_from_csv, random_geometric_graph, StochasticMatrix, Topology,
    WeightProcess,
};
use crate::observation::{ModelConfig, ObservationModel};
use crate::rng::{stream, StreamRole};

/// Tolerance used when a spec asks for a designed weight matrix.
pub const DESIGN_TOL: f64 = 1e-6;

/// Where the topology comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// Random geometric graph on the unit square, drawn from the spec seed.
    Geometric { n: usize, r: f64 },
    Complete { n: usize },
    Star { n: usize, center: usize },
    Path { n: usize },
    /// Edge-list file (`n=<count>` header, then `j i` per line).
    File { path: PathBuf },
}

impl NetworkSpec {
    pub fn build(&self, seed: u64, base: &Path) -> Result<Topology> {
        match self {
            NetworkSpec::Geometric { n, r } => random_geometric_graph(*n, *r, &mut stream(seed, 0, StreamRole::Topology)),
            NetworkSpec::Complete { n } => Topology::complete(*n),
            NetworkSpec::Star { n, center } => {
                if center >= n {
                    return Err(invalid(format!("network.center: {center} out of range for n = {n}")));
                }
                Topology::star(*n, *center)
            }
            NetworkSpec::Path { n } => Topology::path(*n),
            NetworkSpec::File { path } => {
                let text = std::fs::read_to_string(base.join(path))
                    .map_err(|e| Error::Parse(format!("network.path: {}: {e}", path.display())))?;
                Topology::from_edge_list(&text)
            }
        }
    }

    fn absolutize(&mut self, base: &Path) {
        if let NetworkSpec::File { path } = self {
            *path = absolute(base, path);
        }
    }
}

/// The constant weight matrix of a deterministic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightsSpec {
    /// Left Perron vector optimized for the models, matrix synthesized on the topology.
    Designed,
    /// Matrix synthesized on the topology with a uniform left Perron vector.
    Uniform,
    /// `I - alpha L`; `alpha` defaults to `1 / (d_max + 1)`.
    Laplacian { alpha: Option<f64> },
    /// No communication.
    Identity,
    /// `J_N`: every node sees the network average.
    Averaging,
    /// CSV file with one row per line.
    File { path: PathBuf },
}

/// How weight matrices evolve over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessSpec {
    Constant { weights: WeightsSpec },
    /// Every directed link is independently up with probability `p`.
    Iid { p: f64, alpha: Option<f64> },
    /// Every directed link is a two-state chain: up stays up w.p. `q1`,
    /// down stays down w.p. `q2`.
    Markov { q1: f64, q2: f64, alpha: Option<f64> },
}

/// Observation models, one shared by all nodes or one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelsSpec {
    Shared(ModelConfig),
    PerNode(Vec<ModelConfig>),
    /// Scalar Gaussians with a common mean and per-node variances.
    ScalarGaussian { mean: f64, variances: Vec<f64> },
}

impl ModelsSpec {
    /// Models for `n` nodes; `n = None` takes the count from the spec itself.
    pub fn build(&self, n: Option<usize>) -> Result<Vec<ObservationModel>> {
        let models: Vec<ObservationModel> = match self {
            ModelsSpec::Shared(cfg) => {
                let n = n.ok_or_else(|| invalid("models.shared: node count unknown"))?;
                vec![ObservationModel::try_from(cfg.clone()).map_err(|e| keyed("models.shared", e))?; n]
            }
            ModelsSpec::PerNode(cfgs) => cfgs
                .iter()
                .enumerate()
                .map(|(k, c)| ObservationModel::try_from(c.clone()).map_err(|e| keyed(&format!("models.per-node[{k}]"), e)))
                .collect::<Result<_>>()?,
            ModelsSpec::ScalarGaussian { mean, variances } => variances
                .iter()
                .map(|&v| {
                    ObservationModel::try_from(ModelConfig::Gaussian { mean: vec![*mean], cov: vec![vec![v]] })
                        .map_err(|e| keyed("models.scalar-gaussian.variances", e))
                })
                .collect::<Result<_>>()?,
        };
        if models.is_empty() {
            return Err(invalid("models: at least one model is required"));
        }
        if let Some(n) = n {
            if models.len() != n {
                return Err(invalid(format!("models: {} models for {n} nodes", models.len())));
            }
        }
        let d = models[0].dim();
        if models.iter().any(|m| m.dim() != d) {
            return Err(invalid("models: observation dimensions differ"));
        }
        Ok(models)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMode {
    /// `sum_j a_j m_j`, the point the node states concentrate around.
    TrueMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    Mode(CenterMode),
    Explicit(Vec<f64>),
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::Mode(CenterMode::TrueMean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(default)]
    pub center: CenterSpec,
    pub zeta: f64,
}

fn default_confidence() -> f64 {
    0.97
}

/// A Monte Carlo experiment, as read from a JSON or TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkSpec,
    pub process: ProcessSpec,
    pub models: ModelsSpec,
    pub horizon: usize,
    pub runs: usize,
    pub region: RegionSpec,
    #[serde(default)]
    pub window: WindowPolicy,
    /// Confidence level for the reported time to accuracy.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

/// A resolved experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub topology: Topology,
    pub config: SimulationConfig,
    /// Left Perron vector of the constant weight matrix.
    pub perron: Option<DVector<f64>>,
    /// Whether the region is centered at the true mean.
    pub centered: bool,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        load_file(path)
    }

    /// Checks ranges, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon: must be at least 1"));
        }
        if self.runs == 0 {
            return Err(invalid("runs: must be at least 1"));
        }
        if !(self.region.zeta > 0.0 && self.region.zeta.is_finite()) {
            return Err(invalid(format!("region.zeta: must be positive, got {}", self.region.zeta)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid(format!("confidence: must be in (0, 1), got {}", self.confidence)));
        }
        self.window.validate().map_err(|e| keyed("window", e))?;
        match self.process {
            ProcessSpec::Iid { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(invalid(format!("process.p: must be in [0, 1], got {p}")))
            }
            ProcessSpec::Markov { q1, q2, .. } if !(0.0..=1.0).contains(&q1) || !(0.0..=1.0).contains(&q2) => {
                Err(invalid(format!("process.q1/q2: must be in [0, 1], got {q1}, {q2}")))
            }
            _ => Ok(()),
        }
    }

    /// Makes file paths absolute so the spec can be re-read from anywhere.
    pub fn absolutize(&mut self, base: &Path) {
        self.network.absolutize(base);
        if let ProcessSpec::Constant { weights: WeightsSpec::File { path } } = &mut self.process {
            *path = absolute(base, path);
        }
    }

    /// Builds the topology, models, weight process and region. Relative paths
    /// are resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<Experiment> {
        self.validate()?;
        let topology = self.network.build(self.seed, base).map_err(|e| keyed("network", e))?;
        let n = topology.n();
        let models = self.models.build(Some(n))?;
        let (process, perron) = match &self.process {
            ProcessSpec::Constant { weights } => {
                let w = build_weights(weights, &topology, &models, base)?;
                let a = left_perron_vector(&w).ok();
                (WeightProcess::constant(w), a)
            }
            ProcessSpec::Iid { p, alpha } => {
                let alpha = alpha.unwrap_or_else(|| topology.default_alpha());
                (WeightProcess::iid(topology.clone(), *p, alpha).map_err(|e| keyed("process", e))?, None)
            }
            ProcessSpec::Markov { q1, q2, alpha } => {
                let alpha = alpha.unwrap_or_else(|| topology.default_alpha());
                (WeightProcess::markov(topology.clone(), *q1, *q2, alpha).map_err(|e| keyed("process", e))?, None)
            }
        };
        let means: Vec<DVector<f64>> = models.iter().map(ObservationModel::mean).collect();
        let common = means.iter().all(|m| (m - &means[0]).amax() <= 1e-12 * (1.0 + means[0].amax()));
        let (center, centered) = match &self.region.center {
            CenterSpec::Explicit(c) => {
                let c = DVector::from_vec(c.clone());
                let centered = common && c.len() == means[0].len() && (&c - &means[0]).amax() == 0.0;
                (c, centered)
            }
            CenterSpec::Mode(CenterMode::TrueMean) => {
                let weights = if common {
                    None
                } else if let Some(a) = &perron {
                    Some(a.clone())
                } else if topology.is_symmetric() && !matches!(self.process, ProcessSpec::Constant { .. }) {
                    Some(DVector::from_element(n, 1.0 / n as f64))
                } else {
                    return Err(invalid(
                        "region.center: true-mean needs equal means, a primitive constant matrix, or a symmetric topology",
                    ));
                };
                let c = match weights {
                    None => means[0].clone(),
                    Some(a) => means.iter().zip(a.iter()).fold(DVector::zeros(means[0].len()), |acc, (m, &w)| acc + m * w),
                };
                (c, true)
            }
        };
        let region = AccuracyRegion::ball(center, self.region.zeta).map_err(|e| keyed("region", e))?;
        let config =
            SimulationConfig { models, process, horizon: self.horizon, runs: self.runs, region, seed: self.seed };
        config.validate().map_err(|e| keyed("spec", e))?;
        Ok(Experiment { spec: self.clone(), topology, config, perron, centered })
    }
}

fn build_weights(
    weights: &WeightsSpec,
    topology: &Topology,
    models: &[ObservationModel],
    base: &Path,
) -> Result<StochasticMatrix> {
    let n = topology.n();
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    match weights {
        WeightsSpec::Designed => {
            let covs = covariances(models).map_err(|e| keyed("process.weights", e))?;
            let sol = optimize_left_eigenvector(&covs, DESIGN_TOL)?;
            Ok(synthesize_weight_matrix(topology, &sol.a, DESIGN_TOL)?.matrix)
        }
        WeightsSpec::Uniform => Ok(synthesize_weight_matrix(topology, &uniform, DESIGN_TOL)?.matrix),
        WeightsSpec::Laplacian { alpha } => {
            let alpha = alpha.unwrap_or_else(|| topology.default_alpha());
            laplacian_weight_matrix(topology, &vec![true; topology.edges().len()], alpha)
                .map_err(|e| keyed("process.weights.laplacian.alpha", e))
        }
        WeightsSpec::Identity => Ok(StochasticMatrix::identity(n)),
        WeightsSpec::Averaging => Ok(StochasticMatrix::averaging(n)),
        WeightsSpec::File { path } => {
            let text = std::fs::read_to_string(base.join(path))
                .map_err(|e| Error::Parse(format!("process.weights.file: {}: {e}", path.display())))?;
            let m = matrix_from_csv(&text).map_err(|e| keyed("process.weights.file", e))?;
            if m.nrows() != n {
                return Err(invalid(format!("process.weights.file: {}x{} matrix for {n} nodes", m.nrows(), m.ncols())));
            }
            StochasticMatrix::on_topology(m, topology).map_err(|e| keyed("process.weights.file", e))
        }
    }
}

/// Covariances of Gaussian models; other models are rejected.
pub fn covariances(models: &[ObservationModel]) -> Result<Vec<PsdMatrix>> {
    models
        .iter()
        .map(|m| m.as_gaussian().map(|g| g.covariance().clone()).ok_or_else(|| invalid("design needs Gaussian models")))
        .collect()
}

/// A design problem file: per-node noise plus a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkSpec,
    /// Per-node covariance matrices.
    pub covariances: Option<Vec<Vec<Vec<f64>>>>,
    /// Per-node scalar variances, a shorthand for `d = 1`.
    pub variances: Option<Vec<f64>>,
    pub zeta: f64,
    pub tol: Option<f64>,
}

impl DesignSpec {
    pub fn load(path: &Path) -> Result<Self> {
        load_file(path)
    }

    pub fn covariance_matrices(&self) -> Result<Vec<PsdMatrix>> {
        let rows: Vec<Vec<Vec<f64>>> = match (&self.covariances, &self.variances) {
            (Some(c), None) => c.clone(),
            (None, Some(v)) => v.iter().map(|&x| vec![vec![x]]).collect(),
            _ => return Err(invalid("covariances/variances: give exactly one of the two")),
        };
        if rows.is_empty() {
            return Err(invalid("covariances: at least one node is required"));
        }
        rows.iter()
            .enumerate()
            .map(|(k, r)| {
                let d = r.len();
                if d == 0 || r.iter().any(|row| row.len() != d) {
                    return Err(invalid(format!("covariances[{k}]: must be a non-empty square matrix")));
                }
                PsdMatrix::new(DMatrix::from_fn(d, d, |i, j| r[i][j])).map_err(|e| keyed(&format!("covariances[{k}]"), e))
            })
            .collect()
    }
}

/// Models for rate tabulation, with optional weights `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    pub models: ModelsSpec,
    /// Node count when `models` is `shared`.
    pub n: Option<usize>,
    pub a: Option<Vec<f64>>,
}

impl RatesSpec {
    pub fn load(path: &Path) -> Result<Self> {
        load_file(path)
    }
}

fn absolute(base: &Path, path: &Path) -> PathBuf {
    let joined = base.join(path);
    std::fs::canonicalize(&joined).unwrap_or(joined)
}

/// Prefixes an error message with the spec key it refers to.
pub(crate) fn keyed(key: &str, e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{key}: {m}")),
        Error::Parse(m) => Error::Parse(format!("{key}: {m}")),
        other => other,
    }
}

/// Reads JSON (`.json`) or TOML (anything else).
pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// 1-based line where `key` first appears in `text`, for diagnostics.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| {
        let t = l.trim_start();
        t.contains(&quoted) || t.starts_with(&format!("{key} ")) || t.starts_with(&format!("{key}="))
    })
    .map(|k| k + 1)
}
