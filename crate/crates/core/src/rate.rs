use std::cmp::Ordering;
use std::fmt;

/// A rate-function value: finite and non-negative, or `+inf`.
///
/// `+inf` is a separate variant rather than `f64::INFINITY` so that it cannot
/// silently take part in arithmetic. Use [`Rate::scaled`] for the one
/// operation that is well defined on both variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn is_finite(&self) -> bool {
        matches!(self, Rate::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Rate::Finite(v) => Some(v),
            Rate::Infinite => None,
        }
    }

    /// Finite value; panics on `+inf`.
    pub fn expect_finite(&self) -> f64 {
        self.finite().expect("rate is +inf")
    }

    /// Multiplication by a positive constant.
    pub fn scaled(&self, factor: f64) -> Rate {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive, got {factor}");
        match *self {
            Rate::Finite(v) => Rate::Finite(v * factor),
            Rate::Infinite => Rate::Infinite,
        }
    }

    /// Lossy conversion for output formats (`+inf` becomes `f64::INFINITY`).
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Rate::Finite(a), Rate::Finite(b)) => a.partial_cmp(b),
            (Rate::Finite(_), Rate::Infinite) => Some(Ordering::Less),
            (Rate::Infinite, Rate::Finite(_)) => Some(Ordering::Greater),
            (Rate::Infinite, Rate::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Finite(v) => write!(f, "{v}"),
            Rate::Infinite => write!(f, "inf"),
        }
    }
}
