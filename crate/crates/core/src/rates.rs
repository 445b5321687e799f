//! Rate functions of the node states: isolation and fusion benchmarks, the
//! constant-matrix rate `I~` built from the left Perron vector, and its
//! infimum over the complement of a ball.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::linalg::{sym_lambda_max, PsdMatrix};
use crate::observation::{conjugate_numeric, gaussian_quadratic_rate, LmgfEval, LogMgf, ObservationModel};
use crate::rate::Rate;

/// Tolerance for `a` being a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

pub(crate) fn check_simplex(a: &DVector<f64>, n: usize) -> Result<()> {
    if a.len() != n {
        return Err(invalid(format!("weight vector has length {}, expected {n}", a.len())));
    }
    if a.iter().any(|&v| !v.is_finite() || v < -SIMPLEX_TOL) || (a.sum() - 1.0).abs() > SIMPLEX_TOL {
        return Err(invalid("weight vector is not a probability vector"));
    }
    Ok(())
}

fn check_models(models: &[ObservationModel]) -> Result<usize> {
    let first = models.first().ok_or_else(|| invalid("need at least one model"))?;
    let d = first.dim();
    if models.iter().any(|m| m.dim() != d) {
        return Err(invalid("models have different dimensions"));
    }
    Ok(d)
}

/// `Lambda~(lambda) = sum_j Lambda_j(a_j lambda)`.
#[derive(Debug, Clone, Copy)]
pub struct TildeLmgf<'a> {
    models: &'a [ObservationModel],
    a: &'a DVector<f64>,
    dim: usize,
}

impl<'a> TildeLmgf<'a> {
    pub fn new(models: &'a [ObservationModel], a: &'a DVector<f64>) -> Result<Self> {
        let dim = check_models(models)?;
        check_simplex(a, models.len())?;
        Ok(Self { models, a, dim })
    }
}

impl LogMgf for TildeLmgf<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, lambda: &DVector<f64>) -> f64 {
        self.models.iter().zip(self.a.iter()).map(|(m, &aj)| m.value(&(lambda * aj))).sum()
    }

    fn evaluate(&self, lambda: &DVector<f64>) -> LmgfEval {
        let d = self.dim;
        let mut value = 0.0;
        let mut gradient = DVector::zeros(d);
        let mut hessian = Some(DMatrix::zeros(d, d));
        for (m, &aj) in self.models.iter().zip(self.a.iter()) {
            let e = m.evaluate(&(lambda * aj));
            value += e.value;
            gradient.axpy(aj, &e.gradient, 1.0);
            hessian = match (hessian, e.hessian) {
                (Some(h), Some(hj)) => Some(h + hj * (aj * aj)),
                _ => None,
            };
        }
        LmgfEval { value, gradient, hessian }
    }
}

pub fn tilde_lmgf(models: &[ObservationModel], a: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64> {
    let f = TildeLmgf::new(models, a)?;
    if lambda.len() != f.dim || lambda.iter().any(|v| !v.is_finite()) {
        return Err(invalid("lambda has wrong dimension or non-finite entries"));
    }
    Ok(f.value(lambda))
}

/// `m~ = sum_j a_j m_j` and `S~ = sum_j a_j^2 S_j` for Gaussian models.
pub fn tilde_gaussian_params(models: &[ObservationModel], a: &DVector<f64>) -> Result<(DVector<f64>, PsdMatrix)> {
    let d = check_models(models)?;
    check_simplex(a, models.len())?;
    let mut mean = DVector::zeros(d);
    let mut cov = DMatrix::zeros(d, d);
    for (m, &aj) in models.iter().zip(a.iter()) {
        let g = m.as_gaussian().ok_or_else(|| invalid("closed-form tilde rate needs Gaussian models"))?;
        mean.axpy(aj, g.mean(), 1.0);
        cov += g.covariance().matrix() * (aj * aj);
    }
    Ok((mean, PsdMatrix::new(cov)?))
}

/// `I~(x) = (x - m~)^T S~^{-1} (x - m~) / 2`, with the pseudoinverse and `+inf`
/// off `m~ + range(S~)` when `S~` is singular.
pub fn tilde_rate_gaussian(models: &[ObservationModel], a: &DVector<f64>, x: &DVector<f64>) -> Result<Rate> {
    let (mean, cov) = tilde_gaussian_params(models, a)?;
    if x.len() != mean.len() {
        return Err(invalid("x has wrong dimension"));
    }
    Ok(gaussian_quadratic_rate(&mean, &cov, x))
}

/// `I~(x)` as the numeric conjugate of `Lambda~`.
pub fn tilde_rate_numeric(models: &[ObservationModel], a: &DVector<f64>, x: &DVector<f64>) -> Result<Rate> {
    conjugate_numeric(&TildeLmgf::new(models, a)?, x)
}

/// `inf { I~(x) : |x - m| >= zeta } = zeta^2 / (2 lambda_max(S~))` for Gaussian
/// models sharing the mean `m`.
pub fn rate_over_ball_complement(models: &[ObservationModel], a: &DVector<f64>, zeta: f64) -> Result<Rate> {
    if !(zeta > 0.0) {
        return Err(invalid(format!("radius must be positive, got {zeta}")));
    }
    let m0 = models.first().ok_or_else(|| invalid("need at least one model"))?.mean();
    for m in models {
        let diff = (m.mean() - &m0).amax();
        if diff > 1e-12 * (1.0 + m0.amax()) {
            return Err(invalid("models have different means; the ball must be centered at the common mean"));
        }
    }
    let (_, cov) = tilde_gaussian_params(models, a)?;
    let (lmax, _) = sym_lambda_max(cov.matrix(), 1e-12);
    if lmax <= 0.0 {
        return Ok(Rate::Infinite);
    }
    Ok(Rate::Finite(zeta * zeta / (2.0 * lmax)))
}

/// `(I(x), N I(x))`: a node in isolation and a fusion center seeing all `n`
/// i.i.d. observation streams.
pub fn isolation_fusion_rates(model: &ObservationModel, n: usize, x: &DVector<f64>) -> Result<(Rate, Rate)> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let i = model.conjugate(x)?;
    Ok((i, i.scaled(n as f64)))
}

/// `(I(x), I~(x), N I(x))` for `N = a.len()` copies of `model`.
pub fn check_sandwich(model: &ObservationModel, a: &DVector<f64>, x: &DVector<f64>) -> Result<(Rate, Rate, Rate)> {
    let n = a.len();
    let models = vec![model.clone(); n];
    let (iso, fus) = isolation_fusion_rates(model, n, x)?;
    let tilde = match model {
        ObservationModel::Gaussian(_) => tilde_rate_gaussian(&models, a, x)?,
        ObservationModel::Discrete(_) => tilde_rate_numeric(&models, a, x)?,
    };
    Ok((iso, tilde, fus))
}

/// A rate function that can be evaluated pointwise.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    /// `(x - mean)^T cov^+ (x - mean) / 2`; `pseudo` records that `cov` is singular.
    GaussianQuadratic { mean: DVector<f64>, cov: PsdMatrix, pseudo: bool },
    /// Numeric conjugate of `sum_j Lambda_j(a_j lambda)`.
    NumericConjugate { models: Vec<ObservationModel>, a: DVector<f64> },
    Scaled { base: Box<RateFunction>, factor: f64 },
}

impl RateFunction {
    /// `I~` for weights `a`: closed form when every model is Gaussian.
    pub fn tilde(models: &[ObservationModel], a: &DVector<f64>) -> Result<Self> {
        check_models(models)?;
        check_simplex(a, models.len())?;
        if models.iter().all(|m| m.as_gaussian().is_some()) {
            let (mean, cov) = tilde_gaussian_params(models, a)?;
            let pseudo = !cov.is_nonsingular();
            Ok(RateFunction::GaussianQuadratic { mean, cov, pseudo })
        } else {
            Ok(RateFunction::NumericConjugate { models: models.to_vec(), a: a.clone() })
        }
    }

    pub fn isolation(model: &ObservationModel) -> Self {
        Self::tilde(std::slice::from_ref(model), &DVector::from_element(1, 1.0)).expect("single model is valid")
    }

    pub fn fusion(model: &ObservationModel, n: usize) -> Result<Self> {
        Self::isolation(model).scaled(n as f64)
    }

    pub fn scaled(self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(invalid(format!("scale factor must be positive, got {factor}")));
        }
        Ok(RateFunction::Scaled { base: Box::new(self), factor })
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<Rate> {
        match self {
            RateFunction::GaussianQuadratic { mean, cov, .. } => {
                if x.len() != mean.len() {
                    return Err(invalid("x has wrong dimension"));
                }
                Ok(gaussian_quadratic_rate(mean, cov, x))
            }
            RateFunction::NumericConjugate { models, a } => match models.as_slice() {
                [single] => single.conjugate(x),
                _ => tilde_rate_numeric(models, a, x),
            },
            RateFunction::Scaled { base, factor } => Ok(base.eval(x)?.scaled(*factor)),
        }
    }
}
