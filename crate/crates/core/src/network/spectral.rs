use nalgebra::{DMatrix, DVector};

use super::StochasticMatrix;
use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 100_000;
/// Matrices with `|lambda_2|` at or above `1 - PRIMITIVE_MARGIN` are rejected.
pub const PRIMITIVE_MARGIN: f64 = 1e-9;
pub const PERRON_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdominantEstimate {
    pub modulus: f64,
    /// Set when the plain ratio did not settle (typically a complex pair) and
    /// the value comes from the two-step fit instead.
    pub approximate: bool,
}

/// Two-step fit `y2 ~ c1 y1 + c0 y0`. The roots of `z^2 - c1 z - c0` estimate
/// the two dominant eigenvalues, which covers complex pairs and `+-rho`.
/// Returns the larger root modulus and the relative fit residual.
fn two_step_fit(y0: &DVector<f64>, y1: &DVector<f64>, y2: &DVector<f64>) -> Option<(f64, f64)> {
    let (a00, a01, a11) = (y0.dot(y0), y0.dot(y1), y1.dot(y1));
    let (b0, b1) = (y0.dot(y2), y1.dot(y2));
    let det = a00 * a11 - a01 * a01;
    if !(det.abs() > 1e-14 * a00 * a11) {
        return None;
    }
    let c0 = (b0 * a11 - b1 * a01) / det;
    let c1 = (a00 * b1 - a01 * b0) / det;
    let res = (y2 - y1 * c1 - y0 * c0).norm() / y2.norm().max(f64::MIN_POSITIVE);
    let disc = c1 * c1 + 4.0 * c0;
    let rho = if disc < 0.0 { (-c0).sqrt() } else { (c1.abs() + disc.sqrt()) / 2.0 };
    Some((rho, res))
}

/// `|lambda_2(A)|`, the largest modulus among the non-unit eigenvalues.
///
/// Runs power iteration on `B = A - 1 b^T` with `b` uniform. Because `A 1 = 1`,
/// the spectrum of `B` is that of `A` with the unit eigenvalue replaced by
/// `1 - b^T 1 = 0`, so no Perron vector is needed up front.
pub fn subdominant_modulus(a: &StochasticMatrix) -> SubdominantEstimate {
    let n = a.n();
    if n == 1 {
        return SubdominantEstimate { modulus: 0.0, approximate: false };
    }
    let m = a.as_matrix();
    // B x = A x - (1/n)(1^T x) 1, without forming B.
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let s = x.sum() / n as f64;
        m * x - DVector::from_element(n, s)
    };
    let mut x = DVector::from_iterator(n, (0..n).map(|i| 1.0 + ((i * 7 + 3) % 11) as f64 / 11.0 + i as f64 * 0.01));
    x = apply(&x);
    let norm = x.norm();
    if norm == 0.0 {
        return SubdominantEstimate { modulus: 0.0, approximate: false };
    }
    x /= norm;
    let mut prev_ratio = f64::NAN;
    let mut prev_fit = f64::NAN;
    let mut prev_x = x.clone();
    let mut ratio = 0.0;
    for k in 0..POWER_MAX_ITER {
        let y = apply(&x);
        ratio = y.norm();
        if ratio == 0.0 {
            return SubdominantEstimate { modulus: 0.0, approximate: false };
        }
        if (ratio - prev_ratio).abs() <= POWER_TOL {
            return SubdominantEstimate { modulus: ratio, approximate: false };
        }
        if k >= 2 {
            // prev_x and x are consecutive normalized iterates: x = B prev_x / r_prev.
            let y0 = &prev_x;
            let y1 = &x * prev_ratio;
            let y2 = &y * prev_ratio;
            if let Some((rho, res)) = two_step_fit(y0, &y1, &y2) {
                if res <= 1e-8 && (rho - prev_fit).abs() <= POWER_TOL {
                    return SubdominantEstimate { modulus: rho, approximate: true };
                }
                prev_fit = rho;
            }
        }
        prev_ratio = ratio;
        prev_x = x;
        x = y / ratio;
    }
    let modulus = if prev_fit.is_finite() { prev_fit } else { ratio };
    SubdominantEstimate { modulus, approximate: true }
}

/// The probability vector `a` with `a^T A = a^T`.
///
/// Fails with [`Error::NotPrimitive`] when `|lambda_2| >= 1 - 1e-9`. The
/// linear system `(I - A^T + 1 1^T) a = 1` gives a starting point that power
/// iteration on `A^T` then polishes to residual `<= 1e-10`.
pub fn left_perron_vector(a: &StochasticMatrix) -> Result<DVector<f64>> {
    let n = a.n();
    let est = subdominant_modulus(a);
    if est.modulus >= 1.0 - PRIMITIVE_MARGIN {
        return Err(Error::NotPrimitive { modulus: est.modulus });
    }
    let at = a.as_matrix().transpose();
    let system = DMatrix::identity(n, n) - &at + DMatrix::from_element(n, n, 1.0);
    let mut v = system.lu().solve(&DVector::from_element(n, 1.0)).unwrap_or_else(|| DVector::from_element(n, 1.0 / n as f64));
    let normalize = |v: &mut DVector<f64>| {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        let s = v.sum();
        if s > 0.0 {
            *v /= s;
        } else {
            v.fill(1.0 / n as f64);
        }
    };
    normalize(&mut v);
    let residual = |v: &DVector<f64>| (&at * v - v).amax();
    for _ in 0..POWER_MAX_ITER {
        if residual(&v) <= 0.1 * PERRON_RESIDUAL_TOL {
            break;
        }
        v = &at * &v;
        normalize(&mut v);
    }
    let r = residual(&v);
    if r > PERRON_RESIDUAL_TOL {
        return Err(Error::NoConvergence(format!("left Perron vector residual {r:e}")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{laplacian_weight_matrix, Topology};
    use crate::rng::{stream, StreamRole};
    use rand::Rng;

    fn sm(n: usize, v: &[f64]) -> StochasticMatrix {
        StochasticMatrix::new(DMatrix::from_row_slice(n, n, v)).unwrap()
    }

    /// Second-largest eigenvalue modulus from the dense complex spectrum.
    fn oracle_modulus(a: &StochasticMatrix) -> f64 {
        let mut mods: Vec<f64> = a.as_matrix().complex_eigenvalues().iter().map(|z| z.norm()).collect();
        mods.sort_by(|x, y| y.partial_cmp(x).unwrap());
        mods[1]
    }

    #[test]
    fn modulus_examples() {
        let j = subdominant_modulus(&StochasticMatrix::averaging(5));
        assert!(j.modulus < 1e-12);
        let i = subdominant_modulus(&StochasticMatrix::identity(4));
        assert!((i.modulus - 1.0).abs() < 1e-10);
        let two = subdominant_modulus(&sm(2, &[0.5, 0.5, 0.25, 0.75]));
        assert!((two.modulus - 0.25).abs() < 1e-9, "{two:?}");
        assert!(!two.approximate);
    }

    #[test]
    fn modulus_handles_complex_pairs() {
        // Directed 3-cycle with self-weight: eigenvalues 1 and a complex pair.
        let a = sm(3, &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5]);
        let est = subdominant_modulus(&a);
        assert!((est.modulus - oracle_modulus(&a)).abs() < 1e-8, "{est:?}");
        // Pure rotation is periodic: |lambda_2| = 1.
        let rot = sm(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!((subdominant_modulus(&rot).modulus - 1.0).abs() < 1e-8);
    }

    #[test]
    fn modulus_matches_dense_spectrum_on_random_matrices() {
        let mut rng = stream(21, 0, StreamRole::Auxiliary);
        for n in 2..9 {
            for _ in 0..10 {
                let mut m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
                for mut row in m.row_iter_mut() {
                    let s = row.sum();
                    row /= s;
                }
                let a = StochasticMatrix::with_tolerance(m, 1e-12).unwrap();
                let est = subdominant_modulus(&a);
                let o = oracle_modulus(&a);
                assert!((est.modulus - o).abs() < 1e-6 * o.max(1e-3), "n={n} {est:?} vs {o}");
            }
        }
    }

    #[test]
    fn perron_examples() {
        let a = left_perron_vector(&sm(2, &[0.5, 0.5, 0.25, 0.75])).unwrap();
        assert!((a[0] - 1.0 / 3.0).abs() < 1e-12 && (a[1] - 2.0 / 3.0).abs() < 1e-12);

        let ring = Topology::new(5, (0..5).flat_map(|k| [(k, (k + 1) % 5), ((k + 1) % 5, k)])).unwrap();
        let w = laplacian_weight_matrix(&ring, &vec![true; ring.edges().len()], ring.default_alpha()).unwrap();
        let u = left_perron_vector(&w).unwrap();
        assert!(u.iter().all(|&x| (x - 0.2).abs() < 1e-12));

        // Leader: node 0 keeps its own state, everyone else listens to it.
        let leader = sm(3, &[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
        let e = left_perron_vector(&leader).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12 && e[1].abs() < 1e-12 && e[2].abs() < 1e-12);
    }

    #[test]
    fn perron_rejects_reducible_and_periodic() {
        assert!(matches!(left_perron_vector(&StochasticMatrix::identity(3)), Err(Error::NotPrimitive { .. })));
        assert!(matches!(left_perron_vector(&sm(2, &[0.0, 1.0, 1.0, 0.0])), Err(Error::NotPrimitive { .. })));
    }

    #[test]
    fn perron_fixed_point_on_random_matrices() {
        let mut rng = stream(22, 0, StreamRole::Auxiliary);
        for n in 1..12 {
            let mut m = DMatrix::from_fn(n, n, |_, _| if rng.random::<f64>() < 0.5 { rng.random::<f64>() } else { 0.0 });
            m.fill_diagonal(1.0);
            for mut row in m.row_iter_mut() {
                let s = row.sum();
                row /= s;
            }
            let a = StochasticMatrix::with_tolerance(m, 1e-12).unwrap();
            if let Ok(v) = left_perron_vector(&a) {
                assert!((a.as_matrix().transpose() * &v - &v).amax() <= 1e-10);
                assert!((v.sum() - 1.0).abs() < 1e-12 && v.iter().all(|&x| x >= 0.0));
            }
        }
    }
}
