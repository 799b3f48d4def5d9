//! Drift fields for the diffusions under study, in unit-diffusion form.
//!
//! Every model here is the transformed version of a population process: a
//! change of variables turns the original state-dependent noise into unit
//! noise, at the price of a drift with a singular `-1/(2x)`-type term at the
//! absorbing boundary. The simulation always runs in the transformed
//! coordinate; [`ChangeOfVariables`] and [`push_forward_density`] map
//! results back to the original one.
//!
//! For the Wright-Fisher and logistic models two published variants of the
//! transformed drift circulate that differ in one coefficient; a direct Itô
//! computation supports the [`DriftSource::ItoConsistent`] form, which is
//! the default, while [`DriftSource::PaperLiteral`] retains the other
//! printed form for comparison. The Monte-Carlo cross-checks in the test
//! suite simulate the original and transformed coordinates independently
//! and compare their laws.

use crate::geometry::{DomainGeometry, Point};
use crate::stats::{GridDensity1d, StatsError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("singular drift at {0:?}")]
    SingularDrift(Point),
    #[error("dimension mismatch: model is {expected}-dimensional, point is {got}-dimensional")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("G undefined: drift is not of gradient form")]
    GUndefined,
    #[error("point {0:?} outside the map's natural domain")]
    OutsideNaturalDomain(Point),
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Which printed variant of the transformed drift to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSource {
    /// Drift recomputed from the original SDE by Itô's formula (default).
    #[default]
    ItoConsistent,
    /// Drift exactly as printed in the source derivations.
    PaperLiteral,
}

/// Coefficients of the two-type cooperative system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LvParams {
    pub r1: f64,
    pub r2: f64,
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl LvParams {
    /// Validated constructor enforcing the symmetric weak-cooperation
    /// condition: `c11, c22 > 0`, `c12·γ2 = c21·γ1 < 0`, and
    /// `c11·c22 − c12·c21 > 0`, with positive noise scales.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r1: f64,
        r2: f64,
        c11: f64,
        c12: f64,
        c21: f64,
        c22: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self, ModelError> {
        let p = LvParams { r1, r2, c11, c12, c21, c22, gamma1, gamma2 };
        if [r1, r2, c11, c12, c21, c22, gamma1, gamma2].iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameters("coefficients must be finite".into()));
        }
        if gamma1 <= 0.0 || gamma2 <= 0.0 {
            return Err(ModelError::InvalidParameters(format!(
                "noise scales must be positive, got gamma1 = {gamma1}, gamma2 = {gamma2}"
            )));
        }
        if c11 <= 0.0 || c22 <= 0.0 {
            return Err(ModelError::InvalidParameters(format!(
                "self-competition must be positive, got c11 = {c11}, c22 = {c22}"
            )));
        }
        let cross = c12 * gamma2;
        let scale = f64::max(1.0, cross.abs());
        if (cross - c21 * gamma1).abs() > 1e-12 * scale {
            return Err(ModelError::InvalidParameters(format!(
                "cooperation must be symmetric: c12*gamma2 = {cross} vs c21*gamma1 = {}",
                c21 * gamma1
            )));
        }
        if cross >= 0.0 {
            return Err(ModelError::InvalidParameters(format!(
                "cooperative coupling requires c12*gamma2 < 0, got {cross}"
            )));
        }
        if c11 * c22 - c12 * c21 <= 0.0 {
            return Err(ModelError::InvalidParameters(
                "competition must dominate: c11*c22 - c12*c21 must be positive".into(),
            ));
        }
        Ok(p)
    }

    /// Constructor without the weak-cooperation check, for experiments with
    /// parameters outside the cooperative regime.
    #[allow(clippy::too_many_arguments)]
    pub fn unvalidated(
        r1: f64,
        r2: f64,
        c11: f64,
        c12: f64,
        c21: f64,
        c22: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Self {
        LvParams { r1, r2, c11, c12, c21, c22, gamma1, gamma2 }
    }
}

/// A drift field `b` for the unit-diffusion SDE `dX = dB + b(X) dt`.
#[derive(Clone, Debug, PartialEq)]
pub enum DriftModel {
    /// Zero drift in the given dimension.
    BrownianMotion { dim: usize },
    /// Angular transform of the Wright-Fisher diffusion, on `(0, π)`.
    WrightFisher { source: DriftSource },
    /// Transformed logistic branching diffusion, on `(0, ∞)`.
    LogisticFeller { r: f64, c: f64, source: DriftSource },
    /// Transformed two-type cooperative system, on the open quadrant.
    LotkaVolterra { params: LvParams },
    /// Drift tabulated on a 1D grid, linearly interpolated. Not of gradient
    /// form as far as this crate knows, so the `G` diagnostic is undefined.
    CustomTabulated { xs: Vec<f64>, bs: Vec<f64> },
}

impl DriftModel {
    /// Tabulated 1D drift; `xs` strictly increasing, values finite.
    pub fn custom_tabulated(xs: Vec<f64>, bs: Vec<f64>) -> Result<Self, ModelError> {
        if xs.len() != bs.len() || xs.len() < 2 {
            return Err(ModelError::InvalidParameters(
                "tabulated drift needs matching xs/bs with at least two nodes".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ModelError::InvalidParameters(
                "tabulation grid must be strictly increasing".into(),
            ));
        }
        if bs.iter().chain(xs.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameters("tabulated values must be finite".into()));
        }
        Ok(DriftModel::CustomTabulated { xs, bs })
    }

    pub fn dimension(&self) -> usize {
        match self {
            DriftModel::BrownianMotion { dim } => *dim,
            DriftModel::LotkaVolterra { .. } => 2,
            _ => 1,
        }
    }

    /// The cut-off family matching this model's natural state space, if the
    /// state space is not already bounded.
    pub fn cutoff_family(&self) -> Option<crate::geometry::CutoffFamily> {
        match self {
            DriftModel::WrightFisher { .. } => Some(crate::geometry::CutoffFamily::WrightFisher),
            DriftModel::LogisticFeller { .. } => Some(crate::geometry::CutoffFamily::Logistic),
            DriftModel::LotkaVolterra { .. } => Some(crate::geometry::CutoffFamily::LotkaVolterra),
            _ => None,
        }
    }

    /// Evaluate the drift at a strictly interior point of the natural
    /// domain.
    pub fn drift(&self, p: &Point) -> Result<Point, ModelError> {
        let expected = self.dimension();
        if p.dim() != expected {
            return Err(ModelError::DimensionMismatch { expected, got: p.dim() });
        }
        match self {
            DriftModel::BrownianMotion { dim } => {
                Ok(if *dim == 1 { Point::d1(0.0) } else { Point::d2(0.0, 0.0) })
            }
            DriftModel::WrightFisher { source } => {
                let x = p.x();
                if x <= 0.0 || x >= PI {
                    return Err(ModelError::SingularDrift(*p));
                }
                let (s, c) = x.sin_cos();
                Ok(Point::d1(match source {
                    DriftSource::ItoConsistent => -(2.0 - c) / (2.0 * s),
                    DriftSource::PaperLiteral => -(1.0 - 2.0 * c) / (2.0 * s),
                }))
            }
            DriftModel::LogisticFeller { r, c, source } => {
                let x = p.x();
                if x <= 0.0 {
                    return Err(ModelError::SingularDrift(*p));
                }
                let cubic = match source {
                    DriftSource::ItoConsistent => 0.125,
                    DriftSource::PaperLiteral => 0.25,
                };
                Ok(Point::d1(-0.5 / x + 0.5 * r * x - cubic * c * x.powi(3)))
            }
            DriftModel::LotkaVolterra { params: q } => {
                let (y1, y2) = (p.x(), p.y());
                if y1 <= 0.0 || y2 <= 0.0 {
                    return Err(ModelError::SingularDrift(*p));
                }
                let b1 = 0.5 * q.r1 * y1
                    - 0.125 * q.c11 * q.gamma1 * y1.powi(3)
                    - 0.125 * q.c12 * q.gamma2 * y1 * y2 * y2
                    - 0.5 / y1;
                let b2 = 0.5 * q.r2 * y2
                    - 0.125 * q.c22 * q.gamma2 * y2.powi(3)
                    - 0.125 * q.c21 * q.gamma1 * y2 * y1 * y1
                    - 0.5 / y2;
                Ok(Point::d2(b1, b2))
            }
            DriftModel::CustomTabulated { xs, bs } => {
                let x = p.x();
                if x < xs[0] || x > *xs.last().unwrap() {
                    return Err(ModelError::SingularDrift(*p));
                }
                let k = xs.partition_point(|&v| v < x).max(1).min(xs.len() - 1);
                let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                Ok(Point::d1(bs[k - 1] * (1.0 - t) + bs[k] * t))
            }
        }
    }

    /// 1D drift as a scalar (errors on 2D models).
    pub fn drift_1d(&self, x: f64) -> Result<f64, ModelError> {
        if self.dimension() != 1 {
            return Err(ModelError::DimensionMismatch { expected: self.dimension(), got: 1 });
        }
        Ok(self.drift(&Point::d1(x))?.x())
    }

    /// The diagnostic `G(x) = |∇V|²(x) − ΔV(x)` for gradient drifts
    /// `b = −∇V`, i.e. `|b|² + div b`, from closed-form derivatives.
    pub fn hypothesis4_g(&self, p: &Point) -> Result<f64, ModelError> {
        let b = self.drift(p)?;
        let div = match self {
            DriftModel::BrownianMotion { .. } => 0.0,
            DriftModel::WrightFisher { source } => {
                let (s, c) = p.x().sin_cos();
                match source {
                    DriftSource::ItoConsistent => -(1.0 - 2.0 * c) / (2.0 * s * s),
                    DriftSource::PaperLiteral => -(2.0 - c) / (2.0 * s * s),
                }
            }
            DriftModel::LogisticFeller { r, c, source } => {
                let x = p.x();
                let cubic = match source {
                    DriftSource::ItoConsistent => 0.375,
                    DriftSource::PaperLiteral => 0.75,
                };
                0.5 / (x * x) + 0.5 * r - cubic * c * x * x
            }
            DriftModel::LotkaVolterra { params: q } => {
                // The cross terms form a gradient only when the coupling is
                // symmetric in the noise scales.
                let cross = q.c12 * q.gamma2;
                if (cross - q.c21 * q.gamma1).abs() > 1e-12 * f64::max(1.0, cross.abs()) {
                    return Err(ModelError::GUndefined);
                }
                let (y1, y2) = (p.x(), p.y());
                let d1 = 0.5 * q.r1
                    - 0.375 * q.c11 * q.gamma1 * y1 * y1
                    - 0.125 * q.c12 * q.gamma2 * y2 * y2
                    + 0.5 / (y1 * y1);
                let d2 = 0.5 * q.r2
                    - 0.375 * q.c22 * q.gamma2 * y2 * y2
                    - 0.125 * q.c21 * q.gamma1 * y1 * y1
                    + 0.5 / (y2 * y2);
                d1 + d2
            }
            DriftModel::CustomTabulated { .. } => return Err(ModelError::GUndefined),
        };
        Ok(b.dot(&b) + div)
    }

    /// Minimum of `G` over an interior grid of the domain (a reported
    /// diagnostic for how strongly the drift confines the process).
    pub fn min_g_on_grid(
        &self,
        domain: &DomainGeometry,
        grid_n: usize,
    ) -> Result<f64, ModelError> {
        let (lo, hi) = domain.bounding_box();
        let n = grid_n.max(2);
        let mut min_g = f64::INFINITY;
        match domain.dimension() {
            1 => {
                for i in 1..n {
                    let x = lo.x() + (hi.x() - lo.x()) * i as f64 / n as f64;
                    min_g = min_g.min(self.hypothesis4_g(&Point::d1(x))?);
                }
            }
            _ => {
                for i in 1..n {
                    for j in 1..n {
                        let p = Point::d2(
                            lo.x() + (hi.x() - lo.x()) * i as f64 / n as f64,
                            lo.y() + (hi.y() - lo.y()) * j as f64 / n as f64,
                        );
                        if domain.contains(&p).unwrap_or(false) {
                            min_g = min_g.min(self.hypothesis4_g(&p)?);
                        }
                    }
                }
            }
        }
        Ok(min_g)
    }

    /// The change of variables between original and transformed coordinates
    /// for this model.
    pub fn change_of_variables(&self) -> ChangeOfVariables {
        match self {
            DriftModel::WrightFisher { .. } => ChangeOfVariables::WrightFisher,
            DriftModel::LogisticFeller { .. } => ChangeOfVariables::Logistic,
            DriftModel::LotkaVolterra { params } => ChangeOfVariables::LotkaVolterra {
                gamma1: params.gamma1,
                gamma2: params.gamma2,
            },
            _ => ChangeOfVariables::Identity,
        }
    }
}

/// Invertible map between original coordinates `z` (population scale) and
/// transformed coordinates `x` (unit-diffusion scale).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChangeOfVariables {
    Identity,
    /// `x = arccos(1 − 2z)`, `z = (1 − cos x)/2`, between `(0,1)` and `(0,π)`.
    WrightFisher,
    /// `x = 2√z`, `z = x²/4`.
    Logistic,
    /// Componentwise `x_i = 2√(z_i/γ_i)`, `z_i = γ_i x_i²/4`.
    LotkaVolterra { gamma1: f64, gamma2: f64 },
}

impl ChangeOfVariables {
    pub fn dimension(&self) -> usize {
        match self {
            ChangeOfVariables::LotkaVolterra { .. } => 2,
            _ => 1,
        }
    }

    /// Map an original-coordinate point to the transformed coordinate.
    pub fn forward(&self, z: &Point) -> Result<Point, ModelError> {
        self.check_dim(z)?;
        match *self {
            ChangeOfVariables::Identity => Ok(*z),
            ChangeOfVariables::WrightFisher => {
                if !(0.0..=1.0).contains(&z.x()) {
                    return Err(ModelError::OutsideNaturalDomain(*z));
                }
                Ok(Point::d1((1.0 - 2.0 * z.x()).acos()))
            }
            ChangeOfVariables::Logistic => {
                if z.x() < 0.0 {
                    return Err(ModelError::OutsideNaturalDomain(*z));
                }
                Ok(Point::d1(2.0 * z.x().sqrt()))
            }
            ChangeOfVariables::LotkaVolterra { gamma1, gamma2 } => {
                if z.x() < 0.0 || z.y() < 0.0 {
                    return Err(ModelError::OutsideNaturalDomain(*z));
                }
                Ok(Point::d2(2.0 * (z.x() / gamma1).sqrt(), 2.0 * (z.y() / gamma2).sqrt()))
            }
        }
    }

    /// Map a transformed-coordinate point back to the original coordinate.
    pub fn inverse(&self, x: &Point) -> Result<Point, ModelError> {
        self.check_dim(x)?;
        match *self {
            ChangeOfVariables::Identity => Ok(*x),
            ChangeOfVariables::WrightFisher => {
                if !(0.0..=PI).contains(&x.x()) {
                    return Err(ModelError::OutsideNaturalDomain(*x));
                }
                Ok(Point::d1(0.5 * (1.0 - x.x().cos())))
            }
            ChangeOfVariables::Logistic => {
                if x.x() < 0.0 {
                    return Err(ModelError::OutsideNaturalDomain(*x));
                }
                Ok(Point::d1(0.25 * x.x() * x.x()))
            }
            ChangeOfVariables::LotkaVolterra { gamma1, gamma2 } => {
                if x.x() < 0.0 || x.y() < 0.0 {
                    return Err(ModelError::OutsideNaturalDomain(*x));
                }
                Ok(Point::d2(0.25 * gamma1 * x.x() * x.x(), 0.25 * gamma2 * x.y() * x.y()))
            }
        }
    }

    /// `|dz/dx|` at a transformed-coordinate point (1D maps only), the
    /// Jacobian needed to push densities back to original coordinates.
    pub fn jacobian_inverse(&self, x: f64) -> Result<f64, ModelError> {
        match *self {
            ChangeOfVariables::Identity => Ok(1.0),
            ChangeOfVariables::WrightFisher => Ok(0.5 * x.sin()),
            ChangeOfVariables::Logistic => Ok(0.5 * x),
            ChangeOfVariables::LotkaVolterra { .. } => {
                Err(ModelError::DimensionMismatch { expected: 2, got: 1 })
            }
        }
    }

    fn check_dim(&self, p: &Point) -> Result<(), ModelError> {
        let expected = self.dimension();
        if p.dim() != expected {
            Err(ModelError::DimensionMismatch { expected, got: p.dim() })
        } else {
            Ok(())
        }
    }
}

/// Push a density on the transformed domain back to original coordinates:
/// `f_Z(z) = f_X(x(z)) / |dz/dx|(x(z))`, tabulated on a uniform grid over
/// the image of the input's support and renormalized to unit mass.
///
/// Returns the renormalized density together with the mass it carried
/// before renormalization (exactly one up to quadrature and interpolation
/// error when the input was normalized).
pub fn push_forward_density(
    cov: &ChangeOfVariables,
    density_x: &GridDensity1d,
) -> Result<(GridDensity1d, f64), ModelError> {
    if cov.dimension() != 1 {
        return Err(ModelError::DimensionMismatch { expected: cov.dimension(), got: 1 });
    }
    let xs = density_x.xs();
    let z_lo = cov.inverse(&Point::d1(xs[0]))?.x();
    let z_hi = cov.inverse(&Point::d1(*xs.last().unwrap()))?.x();
    if !(z_lo < z_hi) {
        return Err(ModelError::InvalidParameters(
            "change of variables must be increasing over the density support".into(),
        ));
    }
    let n = xs.len();
    let mut zs = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for j in 0..n {
        let z = z_lo + (z_hi - z_lo) * j as f64 / (n - 1) as f64;
        let x = cov.forward(&Point::d1(z))?.x();
        let jac = cov.jacobian_inverse(x)?;
        if jac <= 0.0 {
            return Err(ModelError::InvalidParameters(format!(
                "jacobian vanishes at x = {x}; shrink the density support"
            )));
        }
        zs.push(z);
        vals.push(density_x.interp(x) / jac);
    }
    let mut out = GridDensity1d::new(zs, vals)?;
    let raw_mass = out.mass();
    if raw_mass <= 0.0 {
        return Err(ModelError::InvalidParameters("pushed density has zero mass".into()));
    }
    out.normalize()?;
    Ok((out, raw_mass))
}
