use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use super::spec::{keyed, locate_key, DesignSpec, Experiment, ExperimentSpec, RatesSpec};
use super::CliError;
use crate::consensus::{estimate_decay_rate, estimate_time_to_accuracy, monte_carlo_error_probs, ErrorProbabilityTable};
use crate::design::{design, synthesize_weight_matrix, DesignProblem};
use crate::error::{invalid, Error, Result};
use crate::network::subdominant_modulus;
use crate::observation::{conjugate_numeric, ObservationModel};
use crate::rate::Rate;
use crate::rates::{rate_over_ball_complement, tilde_lmgf, tilde_rate_numeric, RateFunction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSlope {
    pub node: usize,
    /// Estimated decay rate (negated slope of `log P_hat`); absent when the
    /// window held too few uncensored points.
    pub rate: Option<f64>,
    pub stderr: Option<f64>,
    pub intercept: Option<f64>,
    pub points: usize,
    pub window: Option<(usize, usize)>,
    pub time_to_accuracy: Option<f64>,
    pub error: Option<String>,
}

/// Theoretical decay rates over the deviation region, when they apply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    /// `I(D)` of one node in isolation (identical models only).
    pub isolation: Option<f64>,
    /// `N I(D)`, the fusion-center rate (identical models only).
    pub fusion: Option<f64>,
    /// `I~(D)` for the constant weight matrix (Gaussian models, common mean).
    pub tilde: Option<f64>,
    pub tilde_time_to_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopesReport {
    pub name: String,
    pub seed: u64,
    pub runs: usize,
    pub horizon: usize,
    pub zeta: f64,
    pub confidence: f64,
    /// Left Perron vector of the constant weight matrix.
    pub perron: Option<Vec<f64>>,
    /// `|lambda_2|` of the constant weight matrix.
    pub subdominant_modulus: Option<f64>,
    pub reference: Reference,
    pub nodes: Vec<NodeSlope>,
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ErrorProbabilityTable,
    pub slopes: SlopesReport,
}

/// Runs the Monte Carlo experiment and fits per-node decay rates.
pub fn run_experiment(exp: &Experiment, threads: Option<usize>) -> Result<ExperimentOutput> {
    let table = monte_carlo_error_probs(&exp.config, threads)?;
    let spec = &exp.spec;
    let nodes = (0..table.n())
        .map(|i| {
            let fit = spec
                .window
                .resolve(table.node_counts(i))
                .and_then(|w| estimate_decay_rate(&table.node_series(i), w));
            match fit {
                Ok(e) => NodeSlope {
                    node: i,
                    rate: Some(e.rate),
                    stderr: Some(e.stderr),
                    intercept: Some(e.intercept),
                    points: e.points,
                    window: Some(e.window),
                    time_to_accuracy: estimate_time_to_accuracy(e.rate, spec.confidence).ok(),
                    error: None,
                },
                Err(err) => NodeSlope {
                    node: i,
                    rate: None,
                    stderr: None,
                    intercept: None,
                    points: 0,
                    window: None,
                    time_to_accuracy: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let slopes = SlopesReport {
        name: spec.name.clone(),
        seed: spec.seed,
        runs: spec.runs,
        horizon: spec.horizon,
        zeta: spec.region.zeta,
        confidence: spec.confidence,
        perron: exp.perron.as_ref().map(|a| a.as_slice().to_vec()),
        subdominant_modulus: exp.config.process.as_constant().map(|w| subdominant_modulus(w).modulus),
        reference: reference(exp),
        nodes,
    };
    Ok(ExperimentOutput { table, slopes })
}

fn reference(exp: &Experiment) -> Reference {
    let models = &exp.config.models;
    let zeta = exp.spec.region.zeta;
    let finite = |r: Result<Rate>| r.ok().and_then(|r| r.finite());
    let identical = models.iter().all(|m| m == &models[0]);
    let iso = if identical && exp.centered {
        finite(rate_over_ball_complement(std::slice::from_ref(&models[0]), &DVector::from_element(1, 1.0), zeta))
    } else {
        None
    };
    let tilde = match &exp.perron {
        Some(a) if exp.centered => finite(rate_over_ball_complement(models, a, zeta)),
        _ => None,
    };
    Reference {
        isolation: iso,
        fusion: iso.map(|r| r * models.len() as f64),
        tilde,
        tilde_time_to_accuracy: tilde.and_then(|r| estimate_time_to_accuracy(r, exp.spec.confidence).ok()),
    }
}

/// Maps a library error to an exit status: configuration problems give 2,
/// infeasible designs 4, numeric failures 3.
fn classify(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(m) | Error::Parse(m) | Error::Io(m) => CliError::config(m),
        Error::GenerationFailure { .. } => CliError::config(e.to_string()),
        Error::Infeasible { residual } => CliError::infeasible(format!(
            "weight-matrix synthesis infeasible: Dykstra residual {residual:e} exceeds {:e}",
            crate::design::INFEASIBLE_RESIDUAL
        )),
        other => CliError::numeric(other.to_string()),
    }
}

/// Adds the line of the offending key to a configuration message.
fn with_line(err: CliError, path: &Path) -> CliError {
    if err.code != super::EXIT_CONFIG {
        return err;
    }
    let key = err.message.split(':').next().unwrap_or("").trim().to_string();
    let leaf = key.rsplit('.').next().unwrap_or(&key).split('[').next().unwrap_or("").to_string();
    let line = fs::read_to_string(path).ok().and_then(|t| locate_key(&t, &leaf));
    match line {
        Some(l) if !leaf.is_empty() => CliError { message: format!("{} (line {l}): {}", path.display(), err.message), ..err },
        _ => err,
    }
}

fn write(path: &Path, contents: &str) -> std::result::Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn base_dir(path: &Path) -> std::path::PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf()
}

/// `simulate`: writes `probs.csv`, `slopes.json` and `config-echo.json` to `out`.
pub fn cmd_simulate(
    spec_path: &Path,
    out: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> std::result::Result<SlopesReport, CliError> {
    let mut spec = ExperimentSpec::load(spec_path).map_err(classify)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let base = base_dir(spec_path);
    spec.absolutize(&base);
    let exp = spec.build(&base).map_err(|e| with_line(classify(e), spec_path))?;
    let output = run_experiment(&exp, threads).map_err(classify)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    write(&out.join("probs.csv"), &output.table.to_csv())?;
    write(&out.join("slopes.json"), &to_json(&output.slopes))?;
    write(&out.join("config-echo.json"), &to_json(&spec))?;
    Ok(output.slopes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBaseline {
    pub a: Vec<f64>,
    /// `lambda_max(sum_j S_j) / N^2`.
    pub lambda: f64,
    pub rate: Option<f64>,
    pub gamma: f64,
    pub subdominant_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub a_star: Vec<f64>,
    pub lambda_star: f64,
    /// `zeta^2 / (2 lambda_star)`; absent when infinite.
    pub rate_star: Option<f64>,
    pub duality_gap: f64,
    pub gamma: f64,
    pub seed_gamma: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Set when `gamma >= 1`.
    pub warning: bool,
    pub subdominant_modulus: f64,
    pub uniform: UniformBaseline,
}

/// `design`: writes `design.json`, `A.csv`, the uniform baseline `A_unif.csv`
/// and the topology as `topology.txt`.
pub fn cmd_design(problem_path: &Path, out: &Path, seed: Option<u64>) -> std::result::Result<DesignReport, CliError> {
    let mut spec = DesignSpec::load(problem_path).map_err(classify)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let base = base_dir(problem_path);
    let tol = spec.tol.unwrap_or(super::spec::DESIGN_TOL);
    let build = || -> Result<DesignProblem> {
        if !(tol > 0.0) {
            return Err(invalid(format!("tol: must be positive, got {tol}")));
        }
        let covs = spec.covariance_matrices()?;
        let topology = spec.network.build(spec.seed, &base).map_err(|e| keyed("network", e))?;
        DesignProblem::new(covs, topology, spec.zeta).map_err(|e| keyed("zeta", e))
    };
    let problem = build().map_err(|e| with_line(classify(e), problem_path))?;
    let result = design(&problem, tol).map_err(classify)?;
    let n = problem.topology.n();
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    let unif = synthesize_weight_matrix(&problem.topology, &uniform, tol).map_err(classify)?;
    let mut total = nalgebra::DMatrix::zeros(problem.covariances[0].dim(), problem.covariances[0].dim());
    for c in &problem.covariances {
        total += c.matrix();
    }
    let lambda_unif = crate::linalg::sym_lambda_max(&total, 1e-12).0 / (n * n) as f64;
    let report = DesignReport {
        a_star: result.a_star.as_slice().to_vec(),
        lambda_star: result.lambda_star,
        rate_star: Some(result.rate_star).filter(|r| r.is_finite()),
        duality_gap: result.duality_gap,
        gamma: result.gamma,
        seed_gamma: result.synthesis.seed_gamma,
        residual: result.synthesis.residual,
        iterations: result.synthesis.iterations,
        warning: result.synthesis.warning,
        subdominant_modulus: subdominant_modulus(&result.matrix).modulus,
        uniform: UniformBaseline {
            a: uniform.as_slice().to_vec(),
            lambda: lambda_unif,
            rate: (lambda_unif > 0.0).then(|| problem.zeta * problem.zeta / (2.0 * lambda_unif)),
            gamma: unif.gamma,
            subdominant_modulus: subdominant_modulus(&unif.matrix).modulus,
        },
    };
    fs::create_dir_all(out).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    write(&out.join("design.json"), &to_json(&report))?;
    write(&out.join("A.csv"), &result.matrix.to_csv())?;
    write(&out.join("A_unif.csv"), &unif.matrix.to_csv())?;
    write(&out.join("topology.txt"), &problem.topology.to_edge_list())?;
    if report.warning {
        eprintln!("warning: gamma = {} >= 1, |lambda_2| < 1 is not certified by the norm bound", report.gamma);
    }
    Ok(report)
}

/// Parses `lo:hi:steps[,lo:hi:steps...]`, one range per coordinate.
pub fn parse_grid(spec: &str) -> Result<Vec<Vec<f64>>> {
    spec.split(',')
        .map(|part| {
            let f: Vec<&str> = part.trim().split(':').collect();
            let bad = || invalid(format!("grid: expected lo:hi:steps, got `{part}`"));
            if f.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = f[0].parse().map_err(|_| bad())?;
            let hi: f64 = f[1].parse().map_err(|_| bad())?;
            let steps: usize = f[2].parse().map_err(|_| bad())?;
            if steps == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(bad());
            }
            Ok(if steps == 1 {
                vec![lo]
            } else {
                (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
            })
        })
        .collect()
}

fn rate_cell(r: Rate) -> String {
    match r {
        Rate::Finite(v) => format!("{v}"),
        Rate::Infinite => "inf".into(),
    }
}

/// Rate table over a grid: columns `x..., I, I_tilde, N_I`. `I` and `N_I`
/// are left empty unless all models are identical.
pub fn rates_table(
    models: &[ObservationModel],
    a: &DVector<f64>,
    axes: &[Vec<f64>],
    numeric: bool,
) -> Result<String> {
    let d = models[0].dim();
    if axes.len() != d {
        return Err(invalid(format!("grid: {} ranges for dimension {d}", axes.len())));
    }
    // Also checks that `a` matches the models.
    tilde_lmgf(models, a, &DVector::zeros(d)).map_err(|e| keyed("a", e))?;
    let n = models.len();
    let identical = models.iter().all(|m| m == &models[0]);
    let tilde = RateFunction::tilde(models, a).map_err(|e| keyed("a", e))?;
    let mut out = String::new();
    let names: Vec<String> = if d == 1 { vec!["x".into()] } else { (0..d).map(|k| format!("x{k}")).collect() };
    out.push_str(&names.join(","));
    out.push_str(",I,I_tilde,N_I\n");
    let total: usize = axes.iter().map(Vec::len).product();
    for flat in 0..total {
        let mut rem = flat;
        let mut x = DVector::zeros(d);
        for k in (0..d).rev() {
            let len = axes[k].len();
            x[k] = axes[k][rem % len];
            rem /= len;
        }
        let i_tilde = if numeric { tilde_rate_numeric(models, a, &x)? } else { tilde.eval(&x)? };
        let (iso, fus) = if identical {
            let i = if numeric { conjugate_numeric(&models[0], &x)? } else { models[0].conjugate(&x)? };
            (rate_cell(i), rate_cell(i.scaled(n as f64)))
        } else {
            (String::new(), String::new())
        };
        let xs: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!("{},{iso},{},{fus}\n", xs.join(","), rate_cell(i_tilde)));
    }
    Ok(out)
}

/// `rates`: tabulates `I`, `I~` and `N I` on a grid. Weights come from
/// `a_override`, then the spec's `a`, then uniform.
pub fn cmd_rates(
    spec_path: &Path,
    grid: &str,
    out: &Path,
    a_override: Option<Vec<f64>>,
    numeric: bool,
) -> std::result::Result<(), CliError> {
    let spec = RatesSpec::load(spec_path).map_err(classify)?;
    let axes = parse_grid(grid).map_err(classify)?;
    let models = spec.models.build(spec.n).map_err(|e| with_line(classify(e), spec_path))?;
    let n = models.len();
    let a = match a_override.or(spec.a) {
        Some(a) if a.len() == n => DVector::from_vec(a),
        Some(a) => return Err(CliError::config(format!("a: {} weights for {n} models", a.len()))),
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let table = rates_table(&models, &a, &axes, numeric).map_err(classify)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    write(out, &table)
}
