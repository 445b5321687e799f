use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimum number of uncensored points a slope fit needs.
pub const MIN_POINTS: usize = 10;

/// Least-squares fit of `log p_t = c - rate * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// Negated slope, i.e. the estimated exponential decay rate.
    pub rate: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
    pub window: (usize, usize),
}

/// How to choose the regression window `[t_lo, t_hi]` (inclusive, 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindowPolicy {
    /// A fixed window.
    Fixed { lo: usize, hi: usize },
    /// The last `fraction` of the horizon (default 0.6).
    Tail { fraction: f64 },
    /// The last `fraction` of the resolvable range: `t_hi` is the last
    /// iteration before the exceedance count first drops below `min_count`.
    Resolvable { min_count: u64, fraction: f64 },
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::Tail { fraction: 0.6 }
    }
}

impl WindowPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WindowPolicy::Fixed { lo, hi } if lo == 0 || hi < lo => {
                Err(invalid(format!("window [{lo}, {hi}] is empty or starts before t = 1")))
            }
            WindowPolicy::Tail { fraction } | WindowPolicy::Resolvable { fraction, .. }
                if !(fraction > 0.0 && fraction <= 1.0) =>
            {
                Err(invalid(format!("window fraction {fraction} not in (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Resolves the window for one node's count series (`counts[t-1]`).
    pub fn resolve(&self, counts: &[u64]) -> Result<(usize, usize)> {
        self.validate()?;
        let horizon = counts.len();
        let tail = |hi: usize, fraction: f64| {
            let lo = ((1.0 - fraction) * hi as f64).floor() as usize + 1;
            (lo.min(hi.max(1)), hi)
        };
        match *self {
            WindowPolicy::Fixed { lo, hi } => {
                if hi > horizon {
                    return Err(invalid(format!("window end {hi} beyond horizon {horizon}")));
                }
                Ok((lo, hi))
            }
            WindowPolicy::Tail { fraction } => Ok(tail(horizon, fraction)),
            WindowPolicy::Resolvable { min_count, fraction } => {
                let hi = counts.iter().position(|&c| c < min_count).unwrap_or(horizon);
                if hi == 0 {
                    return Err(Error::InsufficientData { points: 0, required: MIN_POINTS });
                }
                Ok(tail(hi, fraction))
            }
        }
    }
}

/// Fits `log p_t` against `t` over the window, skipping censored (`p = 0`)
/// points. `p_series[t-1]` is the value at iteration `t`.
pub fn estimate_decay_rate(p_series: &[f64], window: (usize, usize)) -> Result<DecayEstimate> {
    let (lo, hi) = window;
    if lo == 0 || hi < lo || hi > p_series.len() {
        return Err(invalid(format!("window [{lo}, {hi}] outside horizon 1..={}", p_series.len())));
    }
    let pts: Vec<(f64, f64)> =
        (lo..=hi).filter(|&t| p_series[t - 1] > 0.0).map(|t| (t as f64, p_series[t - 1].ln())).collect();
    let k = pts.len();
    if k < MIN_POINTS {
        return Err(Error::InsufficientData { points: k, required: MIN_POINTS });
    }
    let kf = k as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / kf;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (kf - 2.0) / sxx).sqrt();
    Ok(DecayEstimate { rate: -slope, stderr, intercept, points: k, window })
}

/// Iterations needed for `P(error) <= 1 - confidence` at decay `rate`:
/// `-log(1 - confidence) / rate`.
pub fn estimate_time_to_accuracy(rate: f64, confidence: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(invalid(format!("rate must be positive and finite, got {rate}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must be in (0, 1), got {confidence}")));
    }
    Ok(-(1.0 - confidence).ln() / rate)
}
