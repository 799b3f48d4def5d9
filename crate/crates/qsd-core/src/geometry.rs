//! Simulation domains and their boundary geometry.
//!
//! A domain here is a bounded open set `U` in one or two dimensions on which
//! the diffusion lives until absorption at the boundary. Everything the rest
//! of the crate needs from a domain is membership, the distance to the
//! boundary `phi(p) = dist(p, ∂U)` together with its first two derivatives,
//! and an axis-aligned bounding box for sampling and binning.
//!
//! Unbounded state spaces enter through [`CutoffFamily`]: each supported
//! model family comes with a growing sequence of bounded cut-off domains
//! `U_m` that exhausts the natural state space as `m → ∞`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in one or two dimensions, tagged with its dimension.
///
/// One-dimensional points store their coordinate in the first slot; the
/// second slot is unused and kept at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    dim: u8,
    c: [f64; 2],
}

impl Point {
    /// A one-dimensional point.
    pub fn d1(x: f64) -> Self {
        Point { dim: 1, c: [x, 0.0] }
    }

    /// A two-dimensional point.
    pub fn d2(x: f64, y: f64) -> Self {
        Point { dim: 2, c: [x, y] }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// First coordinate.
    pub fn x(&self) -> f64 {
        self.c[0]
    }

    /// Second coordinate (zero for one-dimensional points).
    pub fn y(&self) -> f64 {
        self.c[1]
    }

    /// The live coordinates as a slice of length `dim()`.
    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim as usize]
    }

    /// Euclidean inner product with another point of the same dimension.
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.c[0] * other.c[0] + self.c[1] * other.c[1]
    }

}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("dimension mismatch: domain is {expected}-dimensional, point is {got}-dimensional")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point lies outside the domain")]
    OutsideDomain,
    #[error("degenerate cutoff: m = {m} is below the smallest admissible index 2")]
    DegenerateCutoff { m: u32 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// A bounded open domain in dimension one or two.
///
/// Construct through [`DomainGeometry::interval`] /
/// [`DomainGeometry::rounded_rectangle`] (or a [`CutoffFamily`]), which
/// validate the parameters; the enum fields themselves are read-only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainGeometry {
    /// The open interval `(a, b)`.
    Interval { a: f64, b: f64 },
    /// An axis-aligned rectangle with circular corner fillets of radius
    /// `corner_radius`: the set of points at distance less than
    /// `corner_radius` from the inset "core" rectangle
    /// `[x_min + r, x_max - r] × [y_min + r, y_max - r]`.
    RoundedRectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        corner_radius: f64,
    },
}

impl DomainGeometry {
    /// The open interval `(a, b)`; requires `a < b`, both finite.
    pub fn interval(a: f64, b: f64) -> Result<Self, DomainError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(DomainError::InvalidGeometry(format!(
                "interval endpoints must be finite, got ({a}, {b})"
            )));
        }
        if a >= b {
            return Err(DomainError::InvalidGeometry(format!(
                "interval requires a < b, got ({a}, {b})"
            )));
        }
        Ok(DomainGeometry::Interval { a, b })
    }

    /// A rounded rectangle; requires positive side lengths and
    /// `0 < corner_radius <= min(width, height) / 2`.
    pub fn rounded_rectangle(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        corner_radius: f64,
    ) -> Result<Self, DomainError> {
        for v in [x_min, x_max, y_min, y_max, corner_radius] {
            if !v.is_finite() {
                return Err(DomainError::InvalidGeometry(
                    "rounded rectangle parameters must be finite".into(),
                ));
            }
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(DomainError::InvalidGeometry(format!(
                "rounded rectangle requires x_min < x_max and y_min < y_max, \
                 got x: ({x_min}, {x_max}), y: ({y_min}, {y_max})"
            )));
        }
        let half_min_side = 0.5 * f64::min(x_max - x_min, y_max - y_min);
        if corner_radius <= 0.0 || corner_radius > half_min_side {
            return Err(DomainError::InvalidGeometry(format!(
                "corner radius must lie in (0, {half_min_side}], got {corner_radius}"
            )));
        }
        Ok(DomainGeometry::RoundedRectangle { x_min, x_max, y_min, y_max, corner_radius })
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainGeometry::Interval { .. } => 1,
            DomainGeometry::RoundedRectangle { .. } => 2,
        }
    }

    fn check_dim(&self, p: &Point) -> Result<(), DomainError> {
        let expected = self.dimension();
        if p.dim() != expected {
            Err(DomainError::DimensionMismatch { expected, got: p.dim() })
        } else {
            Ok(())
        }
    }

    /// Whether `p` lies strictly inside the domain (boundary points do not).
    pub fn contains(&self, p: &Point) -> Result<bool, DomainError> {
        self.check_dim(p)?;
        Ok(match *self {
            DomainGeometry::Interval { a, b } => p.x() > a && p.x() < b,
            DomainGeometry::RoundedRectangle { corner_radius, .. } => {
                self.core_signed_distance(p.x(), p.y()).0 < corner_radius
            }
        })
    }

    /// Distance from an interior point to the boundary.
    ///
    /// Errors with [`DomainError::OutsideDomain`] if `p` is not strictly
    /// inside.
    pub fn phi(&self, p: &Point) -> Result<f64, DomainError> {
        self.check_dim(p)?;
        let d = match *self {
            DomainGeometry::Interval { a, b } => f64::min(p.x() - a, b - p.x()),
            DomainGeometry::RoundedRectangle { corner_radius, .. } => {
                corner_radius - self.core_signed_distance(p.x(), p.y()).0
            }
        };
        if d <= 0.0 {
            return Err(DomainError::OutsideDomain);
        }
        Ok(d)
    }

    /// Gradient of `phi` at an interior point: the unit vector pointing away
    /// from the nearest boundary piece.
    ///
    /// `phi` is smooth away from the medial axis (the ridge of points with
    /// more than one nearest boundary point); on that measure-zero set one
    /// of the competing branches is returned.
    pub fn grad_phi(&self, p: &Point) -> Result<Point, DomainError> {
        self.check_dim(p)?;
        match *self {
            DomainGeometry::Interval { a, b } => {
                if p.x() <= a || p.x() >= b {
                    return Err(DomainError::OutsideDomain);
                }
                // Nearest endpoint decides the sign; midpoint resolves left.
                Ok(Point::d1(if p.x() - a <= b - p.x() { 1.0 } else { -1.0 }))
            }
            DomainGeometry::RoundedRectangle { corner_radius, .. } => {
                let (s, gx, gy) = self.core_signed_distance(p.x(), p.y());
                if s >= corner_radius {
                    return Err(DomainError::OutsideDomain);
                }
                Ok(Point::d2(-gx, -gy))
            }
        }
    }

    /// Laplacian of `phi` at an interior point.
    ///
    /// Zero everywhere except in the four corner sectors of a rounded
    /// rectangle, where the boundary is a circular arc of some radius `rho`
    /// around the corner center and `Δphi = -1/rho`.
    pub fn laplacian_phi(&self, p: &Point) -> Result<f64, DomainError> {
        self.check_dim(p)?;
        match *self {
            DomainGeometry::Interval { a, b } => {
                if p.x() <= a || p.x() >= b {
                    return Err(DomainError::OutsideDomain);
                }
                Ok(0.0)
            }
            DomainGeometry::RoundedRectangle {
                x_min, x_max, y_min, y_max, corner_radius,
            } => {
                let (s, _, _) = self.core_signed_distance(p.x(), p.y());
                if s >= corner_radius {
                    return Err(DomainError::OutsideDomain);
                }
                let dx = f64::max(x_min + corner_radius - p.x(), p.x() - (x_max - corner_radius));
                let dy = f64::max(y_min + corner_radius - p.y(), p.y() - (y_max - corner_radius));
                if dx > 0.0 && dy > 0.0 {
                    // Corner sector: nearest boundary piece is the fillet arc
                    // around the core corner at distance rho.
                    Ok(-1.0 / dx.hypot(dy))
                } else {
                    Ok(0.0)
                }
            }
        }
    }

    /// Whether `phi(p) > r`, i.e. `p` lies in the open `r`-interior.
    pub fn in_sublevel(&self, p: &Point, r: f64) -> Result<bool, DomainError> {
        self.check_dim(p)?;
        match self.phi(p) {
            Ok(d) => Ok(d > r),
            Err(DomainError::OutsideDomain) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Axis-aligned bounding box as `(lower corner, upper corner)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            DomainGeometry::Interval { a, b } => (Point::d1(a), Point::d1(b)),
            DomainGeometry::RoundedRectangle { x_min, x_max, y_min, y_max, .. } => {
                (Point::d2(x_min, y_min), Point::d2(x_max, y_max))
            }
        }
    }

    /// The largest value `phi` attains on the domain (the inradius).
    pub fn max_phi(&self) -> f64 {
        match *self {
            DomainGeometry::Interval { a, b } => 0.5 * (b - a),
            DomainGeometry::RoundedRectangle { x_min, x_max, y_min, y_max, .. } => {
                0.5 * f64::min(x_max - x_min, y_max - y_min)
            }
        }
    }

    /// Signed distance from `(px, py)` to the boundary of the core rectangle
    /// (negative inside), together with its gradient.
    ///
    /// This is the standard box signed-distance decomposition: with
    /// `dx`, `dy` the per-axis overshoots beyond the core slabs (negative
    /// inside them),
    ///
    /// ```text
    /// s = |(max(dx,0), max(dy,0))| + min(max(dx, dy), 0)
    /// ```
    ///
    /// Outside the core the first term is the distance to the nearest face,
    /// edge, or corner; inside, the second term is minus the depth. The
    /// rounded rectangle's boundary distance is then `corner_radius - s`.
    fn core_signed_distance(&self, px: f64, py: f64) -> (f64, f64, f64) {
        let DomainGeometry::RoundedRectangle { x_min, x_max, y_min, y_max, corner_radius } = *self
        else {
            unreachable!("core_signed_distance is only defined for rounded rectangles");
        };
        let (cx_min, cx_max) = (x_min + corner_radius, x_max - corner_radius);
        let (cy_min, cy_max) = (y_min + corner_radius, y_max - corner_radius);
        let dx = f64::max(cx_min - px, px - cx_max);
        let dy = f64::max(cy_min - py, py - cy_max);
        // Direction in which dx (resp. dy) increases: +1 when the nearer
        // x-wall is the right one, -1 when it is the left one.
        let sx = if px - cx_max >= cx_min - px { 1.0 } else { -1.0 };
        let sy = if py - cy_max >= cy_min - py { 1.0 } else { -1.0 };
        if dx > 0.0 && dy > 0.0 {
            let rho = dx.hypot(dy);
            (rho, sx * dx / rho, sy * dy / rho)
        } else if dx > 0.0 {
            (dx, sx, 0.0)
        } else if dy > 0.0 {
            (dy, 0.0, sy)
        } else if dx >= dy {
            (dx, sx, 0.0)
        } else {
            (dy, 0.0, sy)
        }
    }
}

/// Families of growing cut-off domains `U_m` for models whose natural state
/// space is unbounded or has singular boundary behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffFamily {
    /// Angular coordinate on `(0, π)`: `U_m = (1/m, π - 1/m)`.
    WrightFisher,
    /// Positive half-line: `U_m = (1/m, m)`.
    Logistic,
    /// Positive quadrant: `U_m` is the square `[1/m, m]²` with corners
    /// rounded at radius `1/(2m)`, keeping the boundary C².
    LotkaVolterra,
}

impl CutoffFamily {
    /// The `m`-th cut-off domain. Requires `m >= 2`.
    pub fn cutoff(&self, m: u32) -> Result<DomainGeometry, DomainError> {
        if m < 2 {
            return Err(DomainError::DegenerateCutoff { m });
        }
        let m = f64::from(m);
        match self {
            CutoffFamily::WrightFisher => {
                DomainGeometry::interval(1.0 / m, std::f64::consts::PI - 1.0 / m)
            }
            CutoffFamily::Logistic => DomainGeometry::interval(1.0 / m, m),
            CutoffFamily::LotkaVolterra => DomainGeometry::rounded_rectangle(
                1.0 / m,
                m,
                1.0 / m,
                m,
                0.5 / m,
            ),
        }
    }
}
