//! Observation distributions, their log-moment generating functions and
//! Fenchel–Legendre conjugates.
//!
//! Two families are first-class: multivariate Gaussians (possibly singular
//! covariance) and discrete distributions on a finite set of atoms. Both have
//! a log-MGF that is finite everywhere, which is what the conjugate solver in
//! [`conjugate_numeric`] relies on.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::PsdMatrix;
use crate::rate::Rate;

/// Value, gradient and (optionally) Hessian of a log-MGF at one point.
#[derive(Debug, Clone)]
pub struct LmgfEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// A convex, everywhere-finite, differentiable function `R^d -> R`, typically
/// a log-moment generating function.
pub trait LogMgf {
    fn dim(&self) -> usize;

    fn value(&self, lambda: &DVector<f64>) -> f64;

    fn evaluate(&self, lambda: &DVector<f64>) -> LmgfEval;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    cov: PsdMatrix,
    factor: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("gaussian model needs dimension >= 1"));
        }
        if cov.nrows() != mean.len() {
            return Err(invalid(format!(
                "covariance is {}x{} but mean has dimension {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("gaussian mean has non-finite entries"));
        }
        let cov = PsdMatrix::new(cov)?;
        let factor = cov.square_root_factor();
        Ok(Self { mean, cov, factor })
    }

    /// Scalar `N(mean, variance)`.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &PsdMatrix {
        &self.cov
    }

    /// `(x - m)^T S^+ (x - m) / 2` on `m + range(S)`, `+inf` elsewhere.
    pub fn rate(&self, x: &DVector<f64>) -> Rate {
        gaussian_quadratic_rate(&self.mean, &self.cov, x)
    }
}

/// Quadratic rate `(x-m)^T S^+ (x-m) / 2` with the off-range test used for
/// singular covariances.
pub(crate) fn gaussian_quadratic_rate(mean: &DVector<f64>, cov: &PsdMatrix, x: &DVector<f64>) -> Rate {
    let diff = x - mean;
    let (quad, residual) = cov.pinv_quadratic(&diff);
    if cov.is_nonsingular() || residual <= 1e-9 * diff.norm() {
        Rate::Finite(0.5 * quad)
    } else {
        Rate::Infinite
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    atoms: Vec<DVector<f64>>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    ln_pmf: Vec<f64>,
}

impl DiscreteModel {
    pub fn new(atoms: Vec<DVector<f64>>, pmf: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("discrete model needs at least one atom"));
        }
        if atoms.len() != pmf.len() {
            return Err(invalid(format!("{} atoms but pmf of length {}", atoms.len(), pmf.len())));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(invalid("atoms must share a positive dimension"));
        }
        if atoms.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
            return Err(invalid("atoms have non-finite entries"));
        }
        if pmf.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("pmf entries must be finite and non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("pmf sums to {total}, not 1")));
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if atoms[i] == atoms[j] {
                    return Err(invalid(format!("atoms {i} and {j} coincide")));
                }
            }
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("non-empty") = 1.0;
        let ln_pmf = pmf.iter().map(|p| p.ln()).collect();
        Ok(Self { atoms, pmf, cdf, ln_pmf })
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> DVector<f64> {
        self.atoms.iter().zip(&self.pmf).fold(DVector::zeros(self.dim()), |acc, (a, p)| acc + a * *p)
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// Position of atom `e_l` for each `l`, when the atoms are exactly the
    /// canonical basis of `R^d` (in any order).
    fn canonical_order(&self) -> Option<Vec<usize>> {
        let d = self.dim();
        if self.atoms.len() != d {
            return None;
        }
        let mut order = vec![usize::MAX; d];
        for (idx, a) in self.atoms.iter().enumerate() {
            let ones: Vec<usize> = (0..d).filter(|&k| a[k] == 1.0).collect();
            let zeros = a.iter().filter(|&&v| v == 0.0).count();
            if ones.len() != 1 || zeros != d - 1 {
                return None;
            }
            order[ones[0]] = idx;
        }
        Some(order)
    }

    /// Relative entropy `sum x_l log(x_l / p_l)` on the simplex (canonical atoms only).
    fn relative_entropy(&self, order: &[usize], x: &DVector<f64>) -> Rate {
        const TOL: f64 = 1e-12;
        let total: f64 = x.iter().sum();
        if x.iter().any(|&v| v < -TOL) || (total - 1.0).abs() > TOL {
            return Rate::Infinite;
        }
        let mut sum = 0.0;
        for (l, &xl) in x.iter().enumerate() {
            if xl <= 0.0 {
                continue;
            }
            let pl = self.pmf[order[l]];
            if pl == 0.0 {
                return Rate::Infinite;
            }
            sum += xl * (xl / pl).ln();
        }
        Rate::Finite(sum.max(0.0))
    }

    /// Log-sum-exp scores `lambda^T a_l + log p_l` with their maximum.
    fn scores(&self, lambda: &DVector<f64>) -> (Vec<f64>, f64) {
        let scores: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.ln_pmf)
            .map(|(a, lp)| if lp.is_finite() { lambda.dot(a) + lp } else { f64::NEG_INFINITY })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (scores, max)
    }
}

/// Distribution of one node's observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub enum ObservationModel {
    Gaussian(GaussianModel),
    Discrete(DiscreteModel),
}

impl ObservationModel {
    pub fn dim(&self) -> usize {
        match self {
            ObservationModel::Gaussian(g) => g.mean.len(),
            ObservationModel::Discrete(m) => m.dim(),
        }
    }

    /// `E[Z]`.
    pub fn mean(&self) -> DVector<f64> {
        match self {
            ObservationModel::Gaussian(g) => g.mean.clone(),
            ObservationModel::Discrete(m) => m.mean(),
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianModel> {
        match self {
            ObservationModel::Gaussian(g) => Some(g),
            ObservationModel::Discrete(_) => None,
        }
    }

    fn check_dim(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(invalid(format!("{what} has dimension {}, model has {}", v.len(), self.dim())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    /// `log E[exp(lambda^T Z)]`.
    pub fn lmgf(&self, lambda: &DVector<f64>) -> Result<f64> {
        self.check_dim(lambda, "lambda")?;
        Ok(self.value(lambda))
    }

    /// Conjugate `sup_lambda x^T lambda - lmgf(lambda)` where a closed form exists:
    /// every Gaussian, and discrete models whose atoms are the canonical basis.
    pub fn conjugate_closed_form(&self, x: &DVector<f64>) -> Result<Rate> {
        self.check_dim(x, "x")?;
        match self {
            ObservationModel::Gaussian(g) => Ok(g.rate(x)),
            ObservationModel::Discrete(m) => match m.canonical_order() {
                Some(order) => Ok(m.relative_entropy(&order, x)),
                None => Err(Error::NoClosedForm),
            },
        }
    }

    /// Conjugate by closed form when available, numerically otherwise.
    pub fn conjugate(&self, x: &DVector<f64>) -> Result<Rate> {
        match self.conjugate_closed_form(x) {
            Err(Error::NoClosedForm) => conjugate_numeric(self, x),
            other => other,
        }
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.sample_into(rng, out.as_mut_slice());
        out
    }

    /// One draw written into `out` (length `dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            ObservationModel::Gaussian(g) => {
                let d = g.mean.len();
                if d == 1 {
                    let xi: f64 = rng.sample(StandardNormal);
                    out[0] = g.mean[0] + g.factor[(0, 0)] * xi;
                    return;
                }
                let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for (r, o) in out.iter_mut().enumerate() {
                    *o = g.mean[r] + (0..d).map(|c| g.factor[(r, c)] * xi[c]).sum::<f64>();
                }
            }
            ObservationModel::Discrete(m) => {
                let u: f64 = rng.random();
                let idx = m.cdf.iter().position(|&c| u < c).unwrap_or(m.cdf.len() - 1);
                out.copy_from_slice(m.atoms[idx].as_slice());
            }
        }
    }
}

impl LogMgf for ObservationModel {
    fn dim(&self) -> usize {
        ObservationModel::dim(self)
    }

    fn value(&self, lambda: &DVector<f64>) -> f64 {
        match self {
            ObservationModel::Gaussian(g) => g.mean.dot(lambda) + 0.5 * lambda.dot(&(g.cov.matrix() * lambda)),
            ObservationModel::Discrete(m) => {
                let (scores, max) = m.scores(lambda);
                max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
            }
        }
    }

    fn evaluate(&self, lambda: &DVector<f64>) -> LmgfEval {
        match self {
            ObservationModel::Gaussian(g) => {
                let s_lambda = g.cov.matrix() * lambda;
                LmgfEval {
                    value: g.mean.dot(lambda) + 0.5 * lambda.dot(&s_lambda),
                    gradient: &g.mean + s_lambda,
                    hessian: Some(g.cov.matrix().clone()),
                }
            }
            ObservationModel::Discrete(m) => {
                let d = m.dim();
                let (scores, max) = m.scores(lambda);
                let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mut mu = DVector::zeros(d);
                let mut second = DMatrix::zeros(d, d);
                for (a, w) in m.atoms.iter().zip(&weights) {
                    let w = w / total;
                    mu.axpy(w, a, 1.0);
                    second.ger(w, a, a, 1.0);
                }
                second.ger(-1.0, &mu, &mu, 1.0);
                LmgfEval { value: max + total.ln(), gradient: mu, hessian: Some(second) }
            }
        }
    }
}

/// Norm of `lambda` beyond which the conjugate is declared `+inf`.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// `sup_lambda x^T lambda - f(lambda)` by damped Newton ascent from `lambda = 0`.
///
/// Newton directions use the Hessian when the evaluator supplies one (with a
/// small Levenberg shift for singular Hessians), otherwise the gradient;
/// steps are chosen by Armijo backtracking. Stops when the gradient norm
/// drops to `1e-10` or the objective moves by at most `1e-12`. Iterates
/// leaving the ball of radius [`DIVERGENCE_NORM`] mean `x` lies outside the
/// closure of the gradient range, and `+inf` is returned.
pub fn conjugate_numeric<F: LogMgf + ?Sized>(f: &F, x: &DVector<f64>) -> Result<Rate> {
    const GRAD_TOL: f64 = 1e-10;
    const OBJ_TOL: f64 = 1e-12;
    const MAX_ITER: usize = 10_000;
    let d = f.dim();
    if x.len() != d {
        return Err(invalid(format!("x has dimension {}, function has {d}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x has non-finite entries"));
    }

    let objective = |lambda: &DVector<f64>| -> Result<f64> {
        let v = f.value(lambda);
        if !v.is_finite() {
            return Err(Error::NumericFailure { lambda: lambda.as_slice().to_vec() });
        }
        Ok(x.dot(lambda) - v)
    };

    let mut lambda = DVector::zeros(d);
    let mut obj = objective(&lambda)?;
    for _ in 0..MAX_ITER {
        let eval = f.evaluate(&lambda);
        if !eval.value.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericFailure { lambda: lambda.as_slice().to_vec() });
        }
        let grad = x - &eval.gradient;
        if grad.norm() <= GRAD_TOL {
            break;
        }
        let newton = eval.hessian.as_ref().and_then(|h| newton_direction(h, &grad));
        let newton_first = newton.is_some();
        let mut candidates = Vec::with_capacity(2);
        if let Some(dir) = newton {
            candidates.push(dir);
        }
        candidates.push(grad.clone());

        let mut accepted = None;
        for (k, dir) in candidates.into_iter().enumerate() {
            let slope = grad.dot(&dir);
            if !(slope > 0.0) {
                continue;
            }
            // Trial points stop just past the divergence radius.
            let max_step = (2.0 * DIVERGENCE_NORM - lambda.norm()) / scaled_norm(&dir);
            let mut step = max_step.min(1.0);
            while step > 1e-30 {
                let trial = &lambda + &dir * step;
                let trial_obj = objective(&trial)?;
                if trial_obj >= obj + 1e-4 * step * slope {
                    accepted = Some((trial, trial_obj));
                    break;
                }
                step *= 0.5;
            }
            // Gradient steps carry no curvature scale, so a full step that
            // succeeds is expanded while the objective keeps improving. This
            // lets iterates reach the divergence radius when `x` is outside
            // the gradient range and the Hessian has underflowed.
            let is_gradient = k == 1 || !newton_first;
            if is_gradient && step == max_step.min(1.0) {
                while let Some((_, best_obj)) = accepted.as_ref() {
                    let bigger = step * 2.0;
                    if bigger > max_step {
                        break;
                    }
                    let trial = &lambda + &dir * bigger;
                    let trial_obj = objective(&trial)?;
                    if trial_obj < best_obj + 1e-4 * step * slope {
                        break;
                    }
                    step = bigger;
                    accepted = Some((trial, trial_obj));
                }
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((next, next_obj)) = accepted else {
            break;
        };
        let change = next_obj - obj;
        lambda = next;
        obj = next_obj;
        if lambda.norm() > DIVERGENCE_NORM {
            return Ok(Rate::Infinite);
        }
        if change.abs() <= OBJ_TOL {
            break;
        }
    }
    Ok(Rate::Finite(obj.max(0.0)))
}

/// Euclidean norm without overflow for entries near `f64::MAX`.
fn scaled_norm(v: &DVector<f64>) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * (v / m).norm()
}

fn newton_direction(hessian: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let d = hessian.nrows();
    let scale = (hessian.trace() / d as f64).abs().max(1e-300);
    let mut shift = 1e-12 * scale;
    for _ in 0..8 {
        let shifted = hessian + DMatrix::identity(d, d) * shift;
        if let Some(chol) = shifted.cholesky() {
            let dir = chol.solve(grad);
            if dir.iter().all(|v| v.is_finite()) {
                return Some(dir);
            }
        }
        shift *= 100.0;
    }
    None
}

/// On-disk form of an [`ObservationModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Discrete { atoms: Vec<Vec<f64>>, pmf: Vec<f64> },
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("{what} must be a square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl TryFrom<ModelConfig> for ObservationModel {
    type Error = Error;

    fn try_from(cfg: ModelConfig) -> Result<Self> {
        match cfg {
            ModelConfig::Gaussian { mean, cov } => {
                let cov = rows_to_matrix(&cov, "cov")?;
                Ok(ObservationModel::Gaussian(GaussianModel::new(DVector::from_vec(mean), cov)?))
            }
            ModelConfig::Discrete { atoms, pmf } => {
                let atoms = atoms.into_iter().map(DVector::from_vec).collect();
                Ok(ObservationModel::Discrete(DiscreteModel::new(atoms, pmf)?))
            }
        }
    }
}

impl From<ObservationModel> for ModelConfig {
    fn from(model: ObservationModel) -> Self {
        match model {
            ObservationModel::Gaussian(g) => {
                let s = g.cov.matrix();
                ModelConfig::Gaussian {
                    mean: g.mean.as_slice().to_vec(),
                    cov: (0..s.nrows()).map(|i| s.row(i).iter().copied().collect()).collect(),
                }
            }
            ObservationModel::Discrete(m) => ModelConfig::Discrete {
                atoms: m.atoms.iter().map(|a| a.as_slice().to_vec()).collect(),
                pmf: m.pmf.clone(),
            },
        }
    }
}
