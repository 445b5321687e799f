use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::{spectral_norm, top_singular_pair};
use crate::network::{subdominant_modulus, StochasticMatrix, Topology, PRIMITIVE_MARGIN};
use crate::rates::check_simplex;

/// Residual above which the feasible-set projection is declared infeasible.
pub const INFEASIBLE_RESIDUAL: f64 = 1e-6;
/// Constraint residual required of the returned matrix.
pub const CONSTRAINT_TOL: f64 = 1e-8;

const DYKSTRA_MAX_ITER: usize = 20_000;
const STALL_WINDOW: usize = 200;

/// A weight matrix with left Perron vector `a` on a given topology.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSynthesis {
    pub matrix: StochasticMatrix,
    /// `|A - 1 a^T|_2`.
    pub gamma: f64,
    /// `gamma` of the feasible starting point.
    pub seed_gamma: f64,
    /// Largest violation of `A 1 = 1` and `a^T A = a^T`.
    pub residual: f64,
    pub iterations: usize,
    /// `gamma >= 1`: `|lambda_2| < 1` is not certified by the norm bound.
    pub warning: bool,
}

/// The entries of `A` that may be non-zero, with the linear constraints
/// `A 1 = 1` and `a^T A = a^T` written on them.
struct FeasibleSet {
    n: usize,
    entries: Vec<(usize, usize)>,
    c: DMatrix<f64>,
    b: DVector<f64>,
    c_pinv: DMatrix<f64>,
}

impl FeasibleSet {
    fn new(topology: &Topology, a: &DVector<f64>) -> Result<Self> {
        let n = topology.n();
        let entries: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| topology.allows(i, j)).collect();
        let m = entries.len();
        let mut c = DMatrix::zeros(2 * n, m);
        for (k, &(i, j)) in entries.iter().enumerate() {
            c[(i, k)] = 1.0;
            c[(n + j, k)] = a[i];
        }
        let b = DVector::from_fn(2 * n, |r, _| if r < n { 1.0 } else { a[r - n] });
        let c_pinv = c.clone().pseudo_inverse(1e-12).map_err(|e| invalid(format!("constraint pseudoinverse: {e}")))?;
        Ok(Self { n, entries, c, b, c_pinv })
    }

    fn to_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &v) in self.entries.iter().zip(x.iter()) {
            m[(i, j)] = v;
        }
        m
    }

    fn from_matrix(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.entries.len(), self.entries.iter().map(|&(i, j)| m[(i, j)]))
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.c * x - &self.b).amax()
    }

    fn project_affine(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.c_pinv * (&self.c * x - &self.b)
    }

    /// Dykstra's alternating projections onto the affine constraints and the
    /// `[0, 1]` box. The affine set needs no correction term. Returns the last
    /// box iterate and its affine residual.
    fn project(&self, z: &DVector<f64>, tol: f64) -> (DVector<f64>, f64) {
        let mut x = z.clone();
        let mut q = DVector::zeros(z.len());
        let mut best = (x.clone(), f64::INFINITY);
        for _ in 0..DYKSTRA_MAX_ITER {
            let y = self.project_affine(&x);
            let shifted = &y + &q;
            x = shifted.map(|v| v.clamp(0.0, 1.0));
            q = shifted - &x;
            let r = self.residual(&x);
            if r < best.1 {
                best = (x.clone(), r);
            }
            if r <= tol {
                break;
            }
        }
        best
    }
}

/// Metropolis–Hastings chain on a symmetric topology with stationary
/// distribution `a`: `A_ij = min(1/(d_i+1), a_j / (a_i (d_j+1)))` for
/// neighbours, remainder on the diagonal. Rows with `a_i = 0` use `1/(d_i+1)`.
pub fn metropolis_seed(topology: &Topology, a: &DVector<f64>) -> Option<StochasticMatrix> {
    if !topology.is_symmetric() || a.len() != topology.n() {
        return None;
    }
    let n = topology.n();
    let deg: Vec<f64> = (0..n).map(|i| topology.in_neighbors(i).len() as f64).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for &j in topology.in_neighbors(i) {
            let w = if a[i] == 0.0 { 1.0 / (deg[i] + 1.0) } else { (1.0 / (deg[i] + 1.0)).min(a[j] / (a[i] * (deg[j] + 1.0))) };
            m[(i, j)] = w;
            off += w;
        }
        m[(i, i)] = 1.0 - off;
    }
    StochasticMatrix::with_tolerance(m, 1e-12).ok()
}

fn deviation(a_mat: &DMatrix<f64>, a: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    a_mat - DMatrix::from_fn(n, n, |_, j| a[j])
}

/// Approximately minimizes `|A - 1 a^T|_2` subject to `A 1 = 1`,
/// `a^T A = a^T`, `A >= 0` and the sparsity pattern of `topology`.
///
/// Projected subgradient from a feasible seed (Metropolis–Hastings when the
/// topology is symmetric, the identity otherwise). The subgradient `u v^T`
/// comes from the top singular pair; steps `c/sqrt(k)` with `c` half the
/// seed's norm; projections by Dykstra. Stops when the best value improves
/// by less than a relative `tol` over 200 iterations. The best feasible
/// iterate is returned, so the result is never worse than the seed. While
/// `gamma >= 1` an iterate is only accepted if its `|lambda_2|` is no larger
/// than the seed's.
pub fn synthesize_weight_matrix(topology: &Topology, a: &DVector<f64>, tol: f64) -> Result<WeightSynthesis> {
    let n = topology.n();
    check_simplex(a, n)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let a = project_to_exact_simplex(a);
    let set = FeasibleSet::new(topology, &a)?;
    let seed = metropolis_seed(topology, &a).unwrap_or_else(|| StochasticMatrix::identity(n));
    let seed_x = set.from_matrix(seed.as_matrix());
    let seed_residual = set.residual(&seed_x);
    if seed_residual > CONSTRAINT_TOL {
        return Err(Error::Infeasible { residual: seed_residual });
    }
    let seed_gamma = spectral_norm(&deviation(seed.as_matrix(), &a));
    let seed_modulus = if seed_gamma >= 1.0 { subdominant_modulus(&seed).modulus } else { seed_gamma };

    let mut best = (seed_x.clone(), seed_gamma, seed_residual);
    let mut x = seed_x;
    let c = 0.5 * seed_gamma.max(1e-3);
    let mut v_start: Option<DVector<f64>> = None;
    let mut stall_ref = seed_gamma;
    let mut since = 0;
    let mut iterations = 0;
    let max_iter = 20 * STALL_WINDOW;
    for k in 1..=max_iter {
        iterations = k;
        if best.1 <= 1e-14 {
            break;
        }
        let b = deviation(&set.to_matrix(&x), &a);
        let (sigma, u, v) = top_singular_pair(&b, v_start.as_ref(), 1e-12, 10_000);
        v_start = Some(v.clone());
        if sigma == 0.0 {
            break;
        }
        let g = DVector::from_iterator(set.entries.len(), set.entries.iter().map(|&(i, j)| u[i] * v[j]));
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        let z = &x - &g * (c / (k as f64).sqrt() / gn);
        let (next, residual) = set.project(&z, 1e-12);
        if residual > INFEASIBLE_RESIDUAL {
            return Err(Error::Infeasible { residual });
        }
        x = next;
        if residual <= 0.1 * CONSTRAINT_TOL {
            let m = set.to_matrix(&x);
            let gamma = spectral_norm(&deviation(&m, &a));
            // Above 1 the norm no longer bounds |lambda_2|, so the iterate
            // must also mix at least as fast as the seed.
            if gamma < best.1 && (gamma < 1.0 || mixes_as_fast(&m, seed_modulus)) {
                best = (x.clone(), gamma, residual);
            }
        }
        since += 1;
        if since >= STALL_WINDOW {
            if stall_ref - best.1 <= tol * stall_ref {
                break;
            }
            stall_ref = best.1;
            since = 0;
        }
    }
    let (x, gamma, residual) = best;
    let matrix = StochasticMatrix::with_tolerance(set.to_matrix(&x), CONSTRAINT_TOL)?;
    Ok(WeightSynthesis { matrix, gamma, seed_gamma, residual, iterations, warning: gamma >= 1.0 })
}

fn mixes_as_fast(m: &DMatrix<f64>, seed_modulus: f64) -> bool {
    StochasticMatrix::with_tolerance(m.clone(), 1e-9)
        .map(|a| subdominant_modulus(&a).modulus <= seed_modulus.min(1.0 - PRIMITIVE_MARGIN))
        .unwrap_or(false)
}

/// Clamps round-off negatives and renormalizes so the constraints are posed
/// with an exact probability vector.
fn project_to_exact_simplex(a: &DVector<f64>) -> DVector<f64> {
    let clamped = a.map(|x| x.max(0.0));
    let s = clamped.sum();
    clamped / s
}
