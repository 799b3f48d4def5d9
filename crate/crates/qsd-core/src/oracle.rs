//! Finite-difference spectral reference for one-dimensional absorbed
//! diffusions.
//!
//! For `dX = dB + b(X) dt` killed at the endpoints of an interval, the
//! quasi-stationary density is the normalized principal left eigenfunction
//! of the generator `L = ½ d²/dx² + b(x) d/dx` with Dirichlet boundary
//! conditions, and the associated eigenvalue is the extinction rate. This
//! module computes that pair by second-order central differences plus
//! inverse power iteration — a deliberately independent route from the
//! particle simulator, so the two can be compared as estimator vs ground
//! truth.
//!
//! Two internal cross-checks guard the solver itself: a similarity
//! transform reduces the (nonsymmetric) discrete operator to a symmetric
//! tridiagonal matrix whose smallest eigenvalue is found by Sturm-sequence
//! bisection, and for gradient drifts the density can be rebuilt from the
//! potential via [`qsd_density_from_potential`].

use crate::stats::{GridDensity1d, StatsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid must have at least 50 points, got {0}")]
    InvalidGrid(usize),
    #[error("interval ({0}, {1}) is empty or not finite")]
    InvalidInterval(f64, f64),
    #[error("drift is not finite at x = {x}")]
    NonFiniteDrift { x: f64 },
    #[error("inverse power iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("non-Perron mode: converged eigenvector has entry {min_entry:e} below -1e-10")]
    NonPerron { min_entry: f64 },
    #[error("principal eigenvalue {0} is not positive")]
    NonPositiveLambda(f64),
    #[error("density has zero mass")]
    ZeroMass,
    #[error("symmetric form unavailable: {0}")]
    NotSymmetrizable(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Principal eigenvalue and quasi-stationary density on a uniform grid.
#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Extinction rate (the eigenvalue of smallest real part).
    pub lambda: f64,
    /// Normalized density sampled on the full grid, zero at the endpoints.
    pub density: GridDensity1d,
    pub grid_n: usize,
    /// `max |M w - λ w| / (λ max |w|)` at the accepted iterate, where `M`
    /// is the negated transpose of the discrete generator.
    pub residual: f64,
}

/// Tridiagonal matrix stored by diagonals; `sub[0]` and `sup[k-1]` are
/// unused padding.
struct Tridiag {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl Tridiag {
    fn order(&self) -> usize {
        self.diag.len()
    }

    fn mul(&self, v: &[f64], out: &mut [f64]) {
        let k = self.order();
        for i in 0..k {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.sub[i] * v[i - 1];
            }
            if i + 1 < k {
                acc += self.sup[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    /// LU factorization without pivoting (fine for these diagonally
    /// dominant M-matrices). Returns the multipliers and modified pivots.
    fn lu(&self) -> Option<TriLu> {
        let k = self.order();
        let mut pivots = vec![0.0; k];
        let mut mults = vec![0.0; k];
        pivots[0] = self.diag[0];
        for i in 1..k {
            if pivots[i - 1] == 0.0 {
                return None;
            }
            mults[i] = self.sub[i] / pivots[i - 1];
            pivots[i] = self.diag[i] - mults[i] * self.sup[i - 1];
        }
        if pivots[k - 1] == 0.0 {
            return None;
        }
        Some(TriLu { mults, pivots })
    }
}

struct TriLu {
    mults: Vec<f64>,
    pivots: Vec<f64>,
}

impl TriLu {
    /// Solve `M x = rhs` in place using the factorization plus `M`'s
    /// superdiagonal.
    fn solve(&self, sup: &[f64], x: &mut [f64]) {
        let k = self.pivots.len();
        for i in 1..k {
            x[i] -= self.mults[i] * x[i - 1];
        }
        x[k - 1] /= self.pivots[k - 1];
        for i in (0..k - 1).rev() {
            x[i] = (x[i] - sup[i] * x[i + 1]) / self.pivots[i];
        }
    }
}

/// The grid and the matrix `M = -Lᵀ` on the interior nodes, whose
/// smallest-eigenvalue eigenvector is the unnormalized QSD density.
fn discretize<F: Fn(f64) -> f64>(
    b: F,
    a: f64,
    b_end: f64,
    grid_n: usize,
) -> Result<(Vec<f64>, f64, Tridiag), OracleError> {
    if grid_n < 50 {
        return Err(OracleError::InvalidGrid(grid_n));
    }
    if !(a.is_finite() && b_end.is_finite() && b_end > a) {
        return Err(OracleError::InvalidInterval(a, b_end));
    }
    let h = (b_end - a) / (grid_n - 1) as f64;
    let xs: Vec<f64> = (0..grid_n).map(|j| a + h * j as f64).collect();
    let k = grid_n - 2;
    let drift: Vec<f64> = xs[1..grid_n - 1]
        .iter()
        .map(|&x| {
            let v = b(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(OracleError::NonFiniteDrift { x })
            }
        })
        .collect::<Result<_, _>>()?;
    // Row j of the discrete generator L (interior index i = j - 1):
    //   (v[j-1] - 2 v[j] + v[j+1]) / (2h²) + b_j (v[j+1] - v[j-1]) / (2h).
    // M = -Lᵀ swaps the coupling directions: the entry of row i that
    // multiplies w[i-1] came from L's upward coupling at node i-1, and
    // vice versa.
    let inv_h2 = 1.0 / (h * h);
    let inv_2h = 1.0 / (2.0 * h);
    let diag = vec![inv_h2; k];
    let mut sub = vec![0.0; k];
    let mut sup = vec![0.0; k];
    for i in 1..k {
        sub[i] = -(0.5 * inv_h2 + drift[i - 1] * inv_2h);
    }
    for i in 0..k - 1 {
        sup[i] = -(0.5 * inv_h2 - drift[i + 1] * inv_2h);
    }
    Ok((xs, h, Tridiag { sub, diag, sup }))
}

const MAX_ITERATIONS: usize = 10_000;
const RESIDUAL_GATE: f64 = 1e-6;

/// Compute the principal eigenpair of the absorbed generator on `(a, b_end)`.
///
/// The drift is evaluated at interior grid nodes only (the endpoint rows
/// are Dirichlet), so integrable endpoint singularities are fine. Inverse
/// power iteration targets the eigenvalue of smallest magnitude of the
/// negated transpose, which for these operators is the positive, simple
/// Perron value; iteration stops once the relative residual reaches the
/// rounding floor of the matrix-vector product.
pub fn principal_eigenpair<F: Fn(f64) -> f64>(
    b: F,
    a: f64,
    b_end: f64,
    grid_n: usize,
) -> Result<EigenPair, OracleError> {
    let (xs, h, m) = discretize(b, a, b_end, grid_n)?;
    let k = m.order();
    let lu = m.lu().ok_or(OracleError::NonConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut w = vec![1.0; k];
    let mut mw = vec![0.0; k];
    let mut best_w = w.clone();
    let mut best_lambda = 0.0;
    let mut best_residual = f64::INFINITY;
    let mut stale = 0usize;
    let mut iterations = 0usize;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        lu.solve(&m.sup, &mut w);
        let sup_norm = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !(sup_norm > 0.0 && sup_norm.is_finite()) {
            return Err(OracleError::NonConvergence { iterations: it, residual: f64::INFINITY });
        }
        for v in &mut w {
            *v /= sup_norm;
        }
        m.mul(&w, &mut mw);
        let num: f64 = w.iter().zip(&mw).map(|(a, b)| a * b).sum();
        let den: f64 = w.iter().map(|a| a * a).sum();
        let lambda = num / den;
        let residual = w
            .iter()
            .zip(&mw)
            .map(|(wi, mwi)| (mwi - lambda * wi).abs())
            .fold(0.0f64, f64::max)
            / lambda.abs().max(f64::MIN_POSITIVE);
        if residual < best_residual {
            if residual < 0.5 * best_residual {
                stale = 0;
            }
            best_residual = residual;
            best_lambda = lambda;
            best_w.copy_from_slice(&w);
        } else {
            stale += 1;
        }
        // Either we hit near-machine accuracy, or the residual has
        // plateaued at its rounding floor — accept if below the gate.
        if residual <= 1e-10 || (stale >= 50 && best_residual <= 0.5 * RESIDUAL_GATE) {
            break;
        }
    }
    if best_residual > RESIDUAL_GATE {
        return Err(OracleError::NonConvergence { iterations, residual: best_residual });
    }
    if !(best_lambda > 0.0) {
        return Err(OracleError::NonPositiveLambda(best_lambda));
    }
    // Perron sign fix: the physical mode is the one-signed one.
    if best_w.iter().sum::<f64>() < 0.0 {
        for v in &mut best_w {
            *v = -*v;
        }
    }
    let min_entry = best_w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_entry < -1e-10 {
        return Err(OracleError::NonPerron { min_entry });
    }
    // Zero-pad the Dirichlet endpoints and normalize by trapezoid mass.
    let mut density = Vec::with_capacity(grid_n);
    density.push(0.0);
    density.extend(best_w.iter().map(|&v| v.max(0.0)));
    density.push(0.0);
    let mass: f64 = h * density.iter().sum::<f64>(); // endpoints are zero
    if !(mass > 0.0) {
        return Err(OracleError::ZeroMass);
    }
    for v in &mut density {
        *v /= mass;
    }
    Ok(EigenPair {
        lambda: best_lambda,
        density: GridDensity1d::new(xs, density)?,
        grid_n,
        residual: best_residual,
    })
}

/// The same eigenvalue through an unrelated algorithm: a diagonal
/// similarity turns the discrete operator into a symmetric tridiagonal
/// matrix (possible whenever paired off-diagonal entries have a positive
/// product, i.e. the cell Péclet number is below 1), whose smallest
/// eigenvalue is isolated by Sturm-sequence bisection.
pub fn symmetric_form_lambda<F: Fn(f64) -> f64>(
    b: F,
    a: f64,
    b_end: f64,
    grid_n: usize,
) -> Result<f64, OracleError> {
    let (_, _, m) = discretize(b, a, b_end, grid_n)?;
    let k = m.order();
    let mut off = vec![0.0; k - 1];
    for i in 0..k - 1 {
        let product = m.sup[i] * m.sub[i + 1];
        if product <= 0.0 {
            return Err(OracleError::NotSymmetrizable(format!(
                "off-diagonal product {product:e} at node {i} is not positive (cell Péclet ≥ 1)"
            )));
        }
        off[i] = -product.sqrt();
    }
    // Gershgorin bounds bracket the whole spectrum.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let radius = (if i > 0 { off[i - 1].abs() } else { 0.0 })
            + (if i + 1 < k { off[i].abs() } else { 0.0 });
        lo = lo.min(m.diag[i] - radius);
        hi = hi.max(m.diag[i] + radius);
    }
    let count_below = |sigma: f64| -> usize {
        // Sturm sequence: the number of negative pivots of T - σI equals
        // the number of eigenvalues below σ.
        let mut count = 0;
        let mut q = m.diag[0] - sigma;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..k {
            let denom = if q == 0.0 { 1e-300 } else { q };
            q = (m.diag[i] - sigma) - off[i - 1] * off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break; // interval at floating-point resolution
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rebuild the QSD density from the right eigenfunction and a known
/// potential: for gradient drift `b = -V'`, the density is proportional to
/// `η(x) e^{-2V(x)}`. Returns the normalized result on `eta`'s grid.
pub fn qsd_density_from_potential<F: Fn(f64) -> f64>(
    v: F,
    eta: &GridDensity1d,
) -> Result<GridDensity1d, OracleError> {
    let xs = eta.xs().to_vec();
    let vals: Vec<f64> = xs
        .iter()
        .zip(eta.values())
        .map(|(&x, &e)| e * (-2.0 * v(x)).exp())
        .collect();
    let mut density = GridDensity1d::new(xs, vals)?;
    if !(density.mass() > 0.0) {
        return Err(OracleError::ZeroMass);
    }
    density.normalize()?;
    Ok(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn brownian_benchmark_eigenpair() {
        let pair = principal_eigenpair(|_| 0.0, 0.0, 1.0, 2000).unwrap();
        assert!((pair.lambda - PI * PI / 2.0).abs() < 1e-3, "lambda = {}", pair.lambda);
        assert!(pair.residual <= 1e-6);
        assert!(pair.lambda > 0.0);
        assert!((pair.density.mass() - 1.0).abs() < 1e-8);
        let mut max_err = 0.0f64;
        for (&x, &d) in pair.density.xs().iter().zip(pair.density.values()) {
            assert!(d >= 0.0);
            max_err = max_err.max((d - (PI / 2.0) * (PI * x).sin()).abs());
        }
        assert!(max_err < 1e-3, "sup density error {max_err}");
    }

    #[test]
    fn eigenvalue_scales_diffusively_with_length() {
        let pair = principal_eigenpair(|_| 0.0, 0.0, 2.0, 2000).unwrap();
        assert!((pair.lambda - PI * PI / 8.0).abs() < 1e-3, "lambda = {}", pair.lambda);
    }

    #[test]
    fn wright_fisher_density_matches_its_closed_form() {
        // In the angular coordinate the known quasi-stationary density is
        // (1 + cos x) sin(x) / 2; the solver must find it from the drift
        // alone.
        let b = |x: f64| -(2.0 - x.cos()) / (2.0 * x.sin());
        let pair = principal_eigenpair(b, 0.01, PI - 0.01, 2000).unwrap();
        let mut reference = GridDensity1d::from_fn(0.01, PI - 0.01, 2000, |x| {
            (1.0 + x.cos()) * x.sin() / 2.0
        })
        .unwrap();
        reference.normalize().unwrap();
        let w1 = crate::stats::wasserstein1_1d(&pair.density, &reference).unwrap();
        assert!(w1 <= 0.01, "W1 = {w1}");
    }

    #[test]
    fn grid_convergence_is_second_order() {
        let exact = PI * PI / 2.0;
        let grids = [500usize, 1000, 2000, 4000];
        let errors: Vec<f64> = grids
            .iter()
            .map(|&n| (principal_eigenpair(|_| 0.0, 0.0, 1.0, n).unwrap().lambda - exact).abs())
            .collect();
        for i in 0..grids.len() - 1 {
            let h_ratio = (grids[i + 1] - 1) as f64 / (grids[i] - 1) as f64;
            let order = (errors[i] / errors[i + 1]).ln() / h_ratio.ln();
            assert!(order >= 1.9, "observed order {order} between grids {} and {}", grids[i], grids[i + 1]);
        }
    }

    #[test]
    fn symmetric_route_agrees_on_brownian() {
        let pair = principal_eigenpair(|_| 0.0, 0.0, 1.0, 2000).unwrap();
        let sym = symmetric_form_lambda(|_| 0.0, 0.0, 1.0, 2000).unwrap();
        assert!((pair.lambda - sym).abs() <= 1e-8, "{} vs {}", pair.lambda, sym);
    }

    #[test]
    fn symmetric_route_agrees_on_gradient_drifts() {
        let wf = |x: f64| -(2.0 - x.cos()) / (2.0 * x.sin());
        let pair = principal_eigenpair(wf, 0.01, PI - 0.01, 2000).unwrap();
        let sym = symmetric_form_lambda(wf, 0.01, PI - 0.01, 2000).unwrap();
        assert!((pair.lambda - sym).abs() <= 1e-8, "{} vs {}", pair.lambda, sym);

        let logistic = |x: f64| -1.0 / (2.0 * x) + x / 2.0 - x.powi(3) / 8.0;
        let pair = principal_eigenpair(logistic, 0.1, 10.0, 4001).unwrap();
        let sym = symmetric_form_lambda(logistic, 0.1, 10.0, 4001).unwrap();
        assert!((pair.lambda - sym).abs() <= 1e-8, "{} vs {}", pair.lambda, sym);
    }

    #[test]
    fn oversized_drift_on_a_coarse_grid_is_rejected() {
        // Cell Péclet far above 1: central differences produce a matrix
        // whose principal mode is no longer the clean Perron vector.
        let result = principal_eigenpair(|_| 300.0, 0.0, 1.0, 50);
        assert!(
            matches!(
                result,
                Err(OracleError::NonConvergence { .. }) | Err(OracleError::NonPerron { .. })
            ),
            "expected failure, got {result:?}"
        );
        assert!(matches!(
            symmetric_form_lambda(|_| 300.0, 0.0, 1.0, 50),
            Err(OracleError::NotSymmetrizable(_))
        ));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            principal_eigenpair(|_| 0.0, 0.0, 1.0, 49),
            Err(OracleError::InvalidGrid(49))
        ));
        assert!(matches!(
            principal_eigenpair(|_| 0.0, 1.0, 0.0, 100),
            Err(OracleError::InvalidInterval(..))
        ));
        assert!(matches!(
            principal_eigenpair(|x| (x - 0.5).ln(), 0.0, 1.0, 100),
            Err(OracleError::NonFiniteDrift { .. })
        ));
    }

    #[test]
    fn potential_route_identity_for_zero_potential() {
        let pair = principal_eigenpair(|_| 0.0, 0.0, 1.0, 500).unwrap();
        let rebuilt = qsd_density_from_potential(|_| 0.0, &pair.density).unwrap();
        for (a, b) in pair.density.values().iter().zip(rebuilt.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn potential_route_reproduces_the_exponential_density() {
        // Constant η with V(x) = x must normalize by (1 - e^{-2})/2.
        let eta = GridDensity1d::from_fn(0.0, 1.0, 2000, |_| 1.0).unwrap();
        let density = qsd_density_from_potential(|x| x, &eta).unwrap();
        let normalizer = (1.0 - (-2.0f64).exp()) / 2.0;
        for (&x, &d) in density.xs().iter().zip(density.values()) {
            let expected = (-2.0 * x).exp() / normalizer;
            assert!((d - expected).abs() < 1e-5, "at x = {x}: {d} vs {expected}");
        }
    }

    #[test]
    fn potential_route_rejects_zero_mass() {
        let eta = GridDensity1d::from_fn(0.0, 1.0, 100, |_| 1.0).unwrap();
        assert!(matches!(
            qsd_density_from_potential(|_| 400.0, &eta),
            Err(OracleError::ZeroMass)
        ));
    }
}
