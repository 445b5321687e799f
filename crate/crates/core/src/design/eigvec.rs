use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::linalg::{jacobi_eigen, PsdMatrix};

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    DVector::from_iterator(n, v.iter().map(|&x| (x - theta).max(0.0)))
}

/// Outcome of minimizing `lambda_max(sum_j a_j^2 S_j)` over the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvectorSolution {
    pub a: DVector<f64>,
    pub lambda_star: f64,
    /// Certified bound on `lambda_star - optimum` from the dual problem.
    pub duality_gap: f64,
    pub subgradient_iterations: usize,
    pub dual_iterations: usize,
}

/// Largest eigenvalue and a unit top eigenvector of `sum_j a_j^2 S_j`.
fn tilde_top(covs: &[PsdMatrix], a: &DVector<f64>) -> (f64, DVector<f64>) {
    let d = covs[0].dim();
    let mut s = DMatrix::zeros(d, d);
    for (c, &aj) in covs.iter().zip(a.iter()) {
        s += c.matrix() * (aj * aj);
    }
    let (vals, vecs) = jacobi_eigen(&s);
    (vals[d - 1].max(0.0), vecs.column(d - 1).into_owned())
}

fn tilde_value(covs: &[PsdMatrix], a: &DVector<f64>) -> f64 {
    tilde_top(covs, a).0
}

/// Dual value `1 / sum_j 1/<S_j, V>` and the matching primal candidate
/// `a_j ~ 1/<S_j, V>`. Returns `None` when some `<S_j, V>` vanishes.
fn dual_value(covs: &[PsdMatrix], v: &DMatrix<f64>) -> Option<(f64, Vec<f64>)> {
    let s: Vec<f64> = covs.iter().map(|c| c.matrix().dot(v)).collect();
    if s.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let h: f64 = s.iter().map(|x| 1.0 / x).sum();
    Some((1.0 / h, s))
}

/// Projection onto `{V symmetric PSD, tr V = 1}`.
fn project_spectraplex(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = jacobi_eigen(&sym);
    let p = project_simplex(&vals);
    &vecs * DMatrix::from_diagonal(&p) * vecs.transpose()
}

/// Minimizes `f(a) = lambda_max(sum_j a_j^2 S_j)` over the probability simplex.
///
/// Projected subgradient first: subgradient `2 a_j v^T S_j v` with `v` the
/// top eigenvector, steps `c/sqrt(k) * g/|g|^2` with `c = f(uniform)`, and
/// best-iterate tracking; stops when the best value improves by less than a
/// relative `tol` over 200 iterations, or after 10^5 iterations.
///
/// The result is then polished on the dual `max_V 1/sum_j 1/<S_j, V>` over
/// unit-trace PSD `V` by projected gradient ascent. Each dual point gives a
/// primal candidate `a_j ~ 1/<S_j, V>` and a lower bound, so the returned
/// `duality_gap` certifies the value. For `d = 1` the dual is solved at the
/// first point, giving `a_j ~ 1/sigma_j^2` exactly.
pub fn optimize_left_eigenvector(covariances: &[PsdMatrix], tol: f64) -> Result<EigenvectorSolution> {
    let n = covariances.len();
    if n == 0 {
        return Err(invalid("need at least one covariance"));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let d = covariances[0].dim();
    if covariances.iter().any(|c| c.dim() != d) {
        return Err(invalid("covariances have different dimensions"));
    }
    // A node with zero noise makes the optimum zero.
    if let Some(j) = covariances.iter().position(|c| c.lambda_max() == 0.0) {
        let a = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        return Ok(EigenvectorSolution { a, lambda_star: 0.0, duality_gap: 0.0, subgradient_iterations: 0, dual_iterations: 0 });
    }

    let mut a = DVector::from_element(n, 1.0 / n as f64);
    let c = tilde_value(covariances, &a);
    let mut best_a = a.clone();
    let mut best = c;
    let mut stall_ref = best;
    let mut since = 0usize;
    let mut sub_iters = 0;
    for k in 1..=100_000usize {
        sub_iters = k;
        let (f, v) = tilde_top(covariances, &a);
        if f < best {
            best = f;
            best_a = a.clone();
        }
        since += 1;
        if since >= 200 {
            if stall_ref - best <= tol * best {
                break;
            }
            stall_ref = best;
            since = 0;
        }
        let g = DVector::from_iterator(n, covariances.iter().zip(a.iter()).map(|(s, &aj)| 2.0 * aj * (s.matrix() * &v).dot(&v)));
        let g2 = g.norm_squared();
        if g2 == 0.0 {
            break;
        }
        a = project_simplex(&(&a - &g * (c / (k as f64).sqrt() / g2)));
    }

    // Dual polish.
    let mut v = DMatrix::identity(d, d) / d as f64;
    let mut lower = 0.0;
    let mut dual_iters = 0;
    let mut step = 1.0;
    let consider = |s: &[f64], best: &mut f64, best_a: &mut DVector<f64>| {
        let w = DVector::from_iterator(n, s.iter().map(|x| 1.0 / x));
        let cand = &w / w.sum();
        let f = tilde_value(covariances, &cand);
        // Ties within round-off go to the dual candidate, which is exact when
        // the dual is solved exactly (d = 1).
        if f <= *best * (1.0 + 1e-13) {
            *best = f;
            *best_a = cand;
        }
    };
    if let Some((g0, s0)) = dual_value(covariances, &v) {
        lower = g0;
        consider(&s0, &mut best, &mut best_a);
        let mut cur = (g0, s0);
        for _ in 0..20_000 {
            if best - lower <= 1e-3 * tol * best {
                break;
            }
            dual_iters += 1;
            let (g, s) = &cur;
            let mut grad = DMatrix::zeros(d, d);
            for (cov, sj) in covariances.iter().zip(s) {
                grad += cov.matrix() * (g * g / (sj * sj));
            }
            let mut accepted = None;
            while step > 1e-20 {
                let trial = project_spectraplex(&(&v + &grad * step));
                if let Some((gt, st)) = dual_value(covariances, &trial) {
                    let ascent = grad.dot(&(&trial - &v));
                    if gt >= g + 1e-4 * ascent {
                        accepted = Some((trial, gt, st));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((trial, gt, st)) = accepted else { break };
            let moved = (&trial - &v).norm();
            v = trial;
            lower = lower.max(gt);
            consider(&st, &mut best, &mut best_a);
            cur = (gt, st);
            step *= 2.0;
            if moved <= 1e-15 {
                break;
            }
        }
    }
    Ok(EigenvectorSolution {
        a: best_a,
        lambda_star: best,
        duality_gap: (best - lower).max(0.0),
        subgradient_iterations: sub_iters,
        dual_iterations: dual_iters,
    })
}

/// `I*_C = zeta^2 / (2 lambda_star)`.
pub fn design_rate(lambda_star: f64, zeta: f64) -> Result<f64> {
    if !(lambda_star > 0.0) {
        return Err(invalid(format!("lambda_star must be positive, got {lambda_star}")));
    }
    if !(zeta > 0.0) {
        return Err(invalid(format!("radius must be positive, got {zeta}")));
    }
    Ok(zeta * zeta / (2.0 * lambda_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamRole};
    use proptest::prelude::*;
    use rand::Rng;

    fn scalars(vars: &[f64]) -> Vec<PsdMatrix> {
        vars.iter().map(|&s| PsdMatrix::new(DMatrix::from_element(1, 1, s)).unwrap()).collect()
    }

    #[test]
    fn simplex_projection_examples() {
        let on = DVector::from_column_slice(&[0.2, 0.3, 0.5]);
        assert!((project_simplex(&on) - &on).amax() < 1e-15);
        assert_eq!(project_simplex(&DVector::from_column_slice(&[2.0, 0.0])), DVector::from_column_slice(&[1.0, 0.0]));
        for c in [-3.0, 0.0, 0.7, 12.0] {
            let p = project_simplex(&DVector::from_element(4, c));
            assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn simplex_projection_matches_grid_in_two_dimensions() {
        let v = DVector::from_column_slice(&[0.9, -0.4]);
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=10_000 {
            let x = k as f64 * 1e-4;
            let dist = (x - v[0]).powi(2) + (1.0 - x - v[1]).powi(2);
            if dist < best.0 {
                best = (dist, x);
            }
        }
        assert!((project_simplex(&v)[0] - best.1).abs() <= 1e-4);
    }

    #[test]
    fn scalar_closed_form() {
        let sol = optimize_left_eigenvector(&scalars(&[1.0, 4.0]), 1e-10).unwrap();
        assert!((sol.a[0] - 0.8).abs() < 1e-12 && (sol.a[1] - 0.2).abs() < 1e-12);
        assert!((sol.lambda_star - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_covariances_give_uniform_weights() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let covs = vec![PsdMatrix::new(s.clone()).unwrap(); 4];
        let sol = optimize_left_eigenvector(&covs, 1e-10).unwrap();
        assert!(sol.a.iter().all(|&x| (x - 0.25).abs() < 1e-4), "{}", sol.a);
        let lmax = covs[0].lambda_max();
        assert!((sol.lambda_star - lmax / 4.0).abs() < 1e-9 * lmax);
    }

    #[test]
    fn zero_covariance_node_takes_all_weight() {
        let sol = optimize_left_eigenvector(&scalars(&[1.0, 0.0, 2.0]), 1e-8).unwrap();
        assert_eq!(sol.a.as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(sol.lambda_star, 0.0);
    }

    #[test]
    fn dual_gap_closes_on_random_matrix_instances() {
        let mut rng = stream(9, 0, StreamRole::Auxiliary);
        for _ in 0..20 {
            let d = rng.random_range(2..=4);
            let n = rng.random_range(2..=8);
            let covs: Vec<_> = (0..n)
                .map(|_| {
                    let b = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
                    PsdMatrix::new(&b * b.transpose()).unwrap()
                })
                .collect();
            let sol = optimize_left_eigenvector(&covs, 1e-9).unwrap();
            assert!(sol.duality_gap <= 1e-7 * sol.lambda_star, "{sol:?}");
            assert!((sol.a.sum() - 1.0).abs() < 1e-12 && sol.a.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn design_rate_examples() {
        assert!((design_rate(0.1, 0.035).unwrap() - 0.006125).abs() < 1e-15);
        assert!((design_rate(0.1, 0.07).unwrap() - 4.0 * 0.006125).abs() < 1e-15);
        assert!(design_rate(0.0, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn simplex_projection_properties(v in proptest::collection::vec(-5.0f64..5.0, 1..10)) {
            let v = DVector::from_vec(v);
            let p = project_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
            prop_assert!((project_simplex(&p) - &p).amax() < 1e-12);
            if v.len() == 2 {
                let x = ((v[0] - v[1] + 1.0) / 2.0).clamp(0.0, 1.0);
                prop_assert!((p[0] - x).abs() < 1e-12 && (p[1] - (1.0 - x)).abs() < 1e-12);
            }
        }

        #[test]
        fn scalar_optimum_matches_inverse_variance_weights(vars in proptest::collection::vec(0.01f64..1.0, 1..12)) {
            let sol = optimize_left_eigenvector(&scalars(&vars), 1e-10).unwrap();
            let h: f64 = vars.iter().map(|s| 1.0 / s).sum();
            prop_assert!((sol.lambda_star - 1.0 / h).abs() <= 1e-6 / h);
            for (aj, s) in sol.a.iter().zip(&vars) {
                prop_assert!((aj - 1.0 / s / h).abs() <= 1e-4);
            }
        }
    }
}
