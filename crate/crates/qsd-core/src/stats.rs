//! Empirical measures and the distances used to compare them.
//!
//! The estimators in this crate all reduce to uniformly-binned histograms
//! ([`EmpiricalMeasure`]) or densities tabulated on a grid
//! ([`GridDensity1d`]). Comparisons go through [`wasserstein1_1d`], which is
//! exact for the piecewise-linear CDFs both representations induce, and
//! [`tv_binned`] for total variation on a shared binning.

use crate::geometry::{DomainGeometry, Point};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("position {0:?} lies outside the histogram support")]
    OutOfRange(Point),
    #[error("histograms have different binnings")]
    BinningMismatch,
    #[error("total masses differ beyond tolerance: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// One uniformly-binned axis.
#[derive(Clone, Debug, PartialEq)]
struct Axis {
    lo: f64,
    hi: f64,
    bins: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, bins: usize) -> Result<Self, StatsError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || bins == 0 {
            return Err(StatsError::Degenerate(format!(
                "axis needs finite lo < hi and at least one bin, got ({lo}, {hi}) x {bins}"
            )));
        }
        Ok(Axis { lo, hi, bins })
    }

    fn index(&self, x: f64) -> Option<usize> {
        if x < self.lo || x > self.hi || !x.is_finite() {
            return None;
        }
        let i = ((x - self.lo) / (self.hi - self.lo) * self.bins as f64) as usize;
        Some(i.min(self.bins - 1))
    }

    fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * (self.hi - self.lo) / self.bins as f64
    }

    fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * (self.hi - self.lo) / self.bins as f64
    }
}

/// A weighted histogram over a box, in one or two dimensions.
///
/// Weights are arbitrary nonnegative reals; the stored `total_mass` tracks
/// the sum of everything accumulated so it can be checked or renormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    x: Axis,
    y: Option<Axis>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl EmpiricalMeasure {
    /// A 1D histogram with `bins` uniform bins over `(lo, hi)`.
    pub fn new_1d(lo: f64, hi: f64, bins: usize) -> Result<Self, StatsError> {
        let x = Axis::new(lo, hi, bins)?;
        Ok(EmpiricalMeasure { x, y: None, weights: vec![0.0; bins], total_mass: 0.0 })
    }

    /// A 2D histogram over the box `(x_lo, x_hi) × (y_lo, y_hi)`.
    pub fn new_2d(
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
        bins_x: usize,
        bins_y: usize,
    ) -> Result<Self, StatsError> {
        let x = Axis::new(x_lo, x_hi, bins_x)?;
        let y = Axis::new(y_lo, y_hi, bins_y)?;
        Ok(EmpiricalMeasure {
            x,
            y: Some(y),
            weights: vec![0.0; bins_x * bins_y],
            total_mass: 0.0,
        })
    }

    /// A histogram over the bounding box of `domain` (200 bins in 1D,
    /// 100 × 100 in 2D).
    pub fn for_domain(domain: &DomainGeometry) -> Self {
        let (lo, hi) = domain.bounding_box();
        match domain.dimension() {
            1 => Self::new_1d(lo.x(), hi.x(), 200).expect("valid domain box"),
            _ => Self::new_2d(lo.x(), hi.x(), lo.y(), hi.y(), 100, 100)
                .expect("valid domain box"),
        }
    }

    pub fn dimension(&self) -> usize {
        if self.y.is_some() { 2 } else { 1 }
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bin edges along x (length `bins + 1`).
    pub fn edges_x(&self) -> Vec<f64> {
        (0..=self.x.bins).map(|i| self.x.edge(i)).collect()
    }

    /// The exact `(lo, hi)` the x axis was built with, for constructing
    /// another histogram on the identical binning.
    pub fn bounds_x(&self) -> (f64, f64) {
        (self.x.lo, self.x.hi)
    }

    pub fn bins_x(&self) -> usize {
        self.x.bins
    }

    pub fn bins_y(&self) -> usize {
        self.y.as_ref().map_or(0, |a| a.bins)
    }

    /// Center of bin `i` (1D) as a scalar.
    pub fn center_1d(&self, i: usize) -> f64 {
        self.x.center(i)
    }

    /// Center of the flat-index bin as a point of matching dimension.
    pub fn center(&self, flat: usize) -> Point {
        match &self.y {
            None => Point::d1(self.x.center(flat)),
            Some(y) => {
                let (i, j) = (flat / y.bins, flat % y.bins);
                Point::d2(self.x.center(i), y.center(j))
            }
        }
    }

    /// Spread `weight` evenly over the given positions.
    ///
    /// Errors if a position is outside the box or has the wrong dimension;
    /// the histogram is left unmodified in that case.
    pub fn accumulate(&mut self, positions: &[Point], weight: f64) -> Result<(), StatsError> {
        if positions.is_empty() {
            return Ok(());
        }
        let w = weight / positions.len() as f64;
        let dim = self.dimension();
        // Validate before mutating so a failed call leaves no partial update.
        let mut indices = Vec::with_capacity(positions.len());
        for p in positions {
            if p.dim() != dim {
                return Err(StatsError::DimensionMismatch { expected: dim, got: p.dim() });
            }
            let flat = match &self.y {
                None => self.x.index(p.x()).ok_or(StatsError::OutOfRange(*p))?,
                Some(y) => {
                    let i = self.x.index(p.x()).ok_or(StatsError::OutOfRange(*p))?;
                    let j = y.index(p.y()).ok_or(StatsError::OutOfRange(*p))?;
                    i * y.bins + j
                }
            };
            indices.push(flat);
        }
        for flat in indices {
            self.weights[flat] += w;
        }
        self.total_mass += weight;
        Ok(())
    }

    /// Rescale the weights so they sum to `target`.
    pub fn normalize(&mut self, target: f64) -> Result<(), StatsError> {
        let sum: f64 = self.weights.iter().sum();
        if sum <= 0.0 {
            return Err(StatsError::Degenerate("cannot normalize an empty histogram".into()));
        }
        let scale = target / sum;
        for w in &mut self.weights {
            *w *= scale;
        }
        self.total_mass = target;
        Ok(())
    }

    /// Merge consecutive groups of `factor` bins (1D only).
    pub fn rebin_1d(&self, factor: usize) -> Result<EmpiricalMeasure, StatsError> {
        if self.dimension() != 1 {
            return Err(StatsError::DimensionMismatch { expected: 1, got: 2 });
        }
        if factor == 0 || self.x.bins % factor != 0 {
            return Err(StatsError::Degenerate(format!(
                "cannot merge {} bins in groups of {factor}",
                self.x.bins
            )));
        }
        let mut out = EmpiricalMeasure::new_1d(self.x.lo, self.x.hi, self.x.bins / factor)?;
        for (i, w) in self.weights.iter().enumerate() {
            out.weights[i / factor] += w;
        }
        out.total_mass = self.total_mass;
        Ok(out)
    }

    /// Mean of the first coordinate under the (weight-normalized) measure.
    pub fn mean_x(&self) -> Result<f64, StatsError> {
        if self.total_mass <= 0.0 {
            return Err(StatsError::Degenerate("empty histogram has no mean".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.center(i).x())
            .sum::<f64>()
            / sum)
    }

    /// Mean boundary distance under the measure, with bin centers that fall
    /// outside the domain counted as distance zero.
    pub fn mean_phi(&self, domain: &DomainGeometry) -> Result<f64, StatsError> {
        if self.total_mass <= 0.0 {
            return Err(StatsError::Degenerate("empty histogram has no mean".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let phi = domain.phi(&self.center(i)).unwrap_or(0.0);
            acc += w * phi;
        }
        Ok(acc / sum)
    }
}

/// A density tabulated on a strictly increasing 1D grid, integrated by the
/// trapezoid rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity1d {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl GridDensity1d {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self, StatsError> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(StatsError::Degenerate(format!(
                "grid density needs matching xs/values of length >= 2, got {} and {}",
                xs.len(),
                values.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StatsError::Degenerate("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < -1e-12) {
            return Err(StatsError::Degenerate("density values must be finite and >= 0".into()));
        }
        let values = values.into_iter().map(|v| v.max(0.0)).collect();
        Ok(GridDensity1d { xs, values })
    }

    /// Tabulate `f` on `n` uniform points over `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, StatsError> {
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let values = xs.iter().map(|&x| f(x)).collect();
        GridDensity1d::new(xs, values)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid-rule mass.
    pub fn mass(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| 0.5 * (v[0] + v[1]) * (x[1] - x[0]))
            .sum()
    }

    /// Rescale so the trapezoid mass is one.
    pub fn normalize(&mut self) -> Result<(), StatsError> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(StatsError::Degenerate("cannot normalize zero-mass density".into()));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(())
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interp(&self, x: f64) -> f64 {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return 0.0;
        }
        let k = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.values[k],
            Err(k) => k,
        };
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }
}

/// A nondecreasing piecewise-linear CDF.
///
/// Repeated knot abscissae encode jumps, so point masses are represented
/// exactly. All distribution-like inputs (histograms, grid densities, sample
/// sets) convert into this form before Wasserstein distances are taken.
#[derive(Clone, Debug)]
pub struct Cdf1d {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl Cdf1d {
    fn validated(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self, StatsError> {
        if xs.len() != fs.len() || xs.len() < 2 {
            return Err(StatsError::Degenerate("CDF needs at least two knots".into()));
        }
        if xs.windows(2).any(|w| w[0] > w[1]) || fs.windows(2).any(|w| w[0] > w[1] + 1e-15) {
            return Err(StatsError::Degenerate("CDF knots must be nondecreasing".into()));
        }
        Ok(Cdf1d { xs, fs })
    }

    pub fn total_mass(&self) -> f64 {
        *self.fs.last().unwrap()
    }

    /// CDF of a finite set of weighted point masses.
    pub fn from_point_masses(points: &[(f64, f64)]) -> Result<Self, StatsError> {
        if points.is_empty() {
            return Err(StatsError::Degenerate("no point masses given".into()));
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut xs = Vec::with_capacity(2 * sorted.len());
        let mut fs = Vec::with_capacity(2 * sorted.len());
        let mut acc = 0.0;
        for (x, w) in sorted {
            if !x.is_finite() || w < 0.0 {
                return Err(StatsError::Degenerate("point masses must be finite with w >= 0".into()));
            }
            xs.push(x);
            fs.push(acc);
            acc += w;
            xs.push(x);
            fs.push(acc);
        }
        Cdf1d::validated(xs, fs)
    }

    fn from_histogram(h: &EmpiricalMeasure) -> Result<Self, StatsError> {
        if h.dimension() != 1 {
            return Err(StatsError::DimensionMismatch { expected: 1, got: 2 });
        }
        let edges = h.edges_x();
        let mut fs = Vec::with_capacity(edges.len());
        fs.push(0.0);
        let mut acc = 0.0;
        for w in h.weights() {
            acc += w;
            fs.push(acc);
        }
        Cdf1d::validated(edges, fs)
    }

    fn from_density(g: &GridDensity1d) -> Result<Self, StatsError> {
        let mut fs = Vec::with_capacity(g.xs.len());
        let mut acc = 0.0;
        fs.push(0.0);
        for (x, v) in g.xs.windows(2).zip(g.values.windows(2)) {
            acc += 0.5 * (v[0] + v[1]) * (x[1] - x[0]);
            fs.push(acc);
        }
        Cdf1d::validated(g.xs.clone(), fs)
    }

    /// Value just right of `x` (after any jump at `x`).
    fn eval_right(&self, x: f64) -> f64 {
        // partition_point: first index with xs[i] > x; knots <= x all apply.
        let i = self.xs.partition_point(|&k| k <= x);
        if i == 0 {
            return 0.0;
        }
        if i == self.xs.len() {
            return *self.fs.last().unwrap();
        }
        if self.xs[i - 1] == x {
            return self.fs[i - 1];
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.fs[i - 1] * (1.0 - t) + self.fs[i] * t
    }

    /// Value just left of `x` (before any jump at `x`).
    fn eval_left(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|&k| k < x);
        if i == 0 {
            return 0.0;
        }
        if i == self.xs.len() {
            return *self.fs.last().unwrap();
        }
        if self.xs[i] == x {
            return self.fs[i];
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.fs[i - 1] * (1.0 - t) + self.fs[i] * t
    }
}

/// Conversion into a piecewise-linear CDF, for distance computations.
pub trait ToCdf1d {
    fn to_cdf(&self) -> Result<Cdf1d, StatsError>;
}

impl ToCdf1d for EmpiricalMeasure {
    fn to_cdf(&self) -> Result<Cdf1d, StatsError> {
        Cdf1d::from_histogram(self)
    }
}

impl ToCdf1d for GridDensity1d {
    fn to_cdf(&self) -> Result<Cdf1d, StatsError> {
        Cdf1d::from_density(self)
    }
}

impl ToCdf1d for Cdf1d {
    fn to_cdf(&self) -> Result<Cdf1d, StatsError> {
        Ok(self.clone())
    }
}

/// Exact 1-Wasserstein distance `∫ |F_p - F_q|` between two distributions
/// with piecewise-linear CDFs.
///
/// Both inputs must carry the same total mass (within `1e-9`). The integral
/// is evaluated segment by segment on the merged knot set, splitting
/// segments where the CDF difference changes sign, so no quadrature error
/// enters beyond the CDF representation itself.
pub fn wasserstein1_1d<P: ToCdf1d + ?Sized, Q: ToCdf1d + ?Sized>(
    p: &P,
    q: &Q,
) -> Result<f64, StatsError> {
    let p = p.to_cdf()?;
    let q = q.to_cdf()?;
    if (p.total_mass() - q.total_mass()).abs() > 1e-9 {
        return Err(StatsError::MassMismatch {
            left: p.total_mass(),
            right: q.total_mass(),
        });
    }
    let mut breaks: Vec<f64> = p.xs.iter().chain(q.xs.iter()).copied().collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (u, v) = (w[0], w[1]);
        let d0 = p.eval_right(u) - q.eval_right(u);
        let d1 = p.eval_left(v) - q.eval_left(v);
        let len = v - u;
        if d0 * d1 >= 0.0 {
            total += 0.5 * (d0.abs() + d1.abs()) * len;
        } else {
            // Linear difference crosses zero inside the segment.
            let t = d0 / (d0 - d1);
            total += 0.5 * (d0.abs() * t + d1.abs() * (1.0 - t)) * len;
        }
    }
    Ok(total)
}

/// Total variation distance between two histograms on the same binning,
/// after normalizing each to unit mass.
pub fn tv_binned(p: &EmpiricalMeasure, q: &EmpiricalMeasure) -> Result<f64, StatsError> {
    if p.x != q.x || p.y != q.y {
        return Err(StatsError::BinningMismatch);
    }
    let (mp, mq) = (p.total_mass(), q.total_mass());
    if mp <= 0.0 || mq <= 0.0 {
        return Err(StatsError::Degenerate("total variation of an empty histogram".into()));
    }
    let (sp, sq): (f64, f64) = (p.weights.iter().sum(), q.weights.iter().sum());
    Ok(0.5
        * p.weights
            .iter()
            .zip(&q.weights)
            .map(|(a, b)| (a / sp - b / sq).abs())
            .sum::<f64>())
}

/// Fraction of mass within distance `r` of the boundary, for each `r` in
/// `r_grid` (returned sorted ascending).
///
/// Bin centers that fall outside the domain are counted at distance zero,
/// which errs on the side of calling their mass boundary mass.
pub fn tightness_profile(
    h: &EmpiricalMeasure,
    domain: &DomainGeometry,
    r_grid: &[f64],
) -> Result<Vec<(f64, f64)>, StatsError> {
    if h.dimension() != domain.dimension() {
        return Err(StatsError::DimensionMismatch {
            expected: domain.dimension(),
            got: h.dimension(),
        });
    }
    let sum: f64 = h.weights.iter().sum();
    if sum <= 0.0 {
        return Err(StatsError::Degenerate("tightness profile of an empty histogram".into()));
    }
    let mut rs: Vec<f64> = r_grid.to_vec();
    rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut phis: Vec<(f64, f64)> = Vec::new();
    for (i, w) in h.weights.iter().enumerate() {
        if *w > 0.0 {
            phis.push((domain.phi(&h.center(i)).unwrap_or(0.0), *w));
        }
    }
    Ok(rs
        .into_iter()
        .map(|r| {
            let mass: f64 = phis.iter().filter(|(phi, _)| *phi <= r).map(|(_, w)| w).sum();
            (r, mass / sum)
        })
        .collect())
}

/// Write a histogram as CSV: `x,weight` in 1D, `x,y,weight` in 2D.
pub fn write_histogram_csv<W: std::io::Write>(
    h: &EmpiricalMeasure,
    out: &mut W,
) -> std::io::Result<()> {
    match h.dimension() {
        1 => {
            writeln!(out, "x,weight")?;
            for (i, w) in h.weights.iter().enumerate() {
                writeln!(out, "{},{}", h.center_1d(i), w)?;
            }
        }
        _ => {
            writeln!(out, "x,y,weight")?;
            for (i, w) in h.weights.iter().enumerate() {
                let c = h.center(i);
                writeln!(out, "{},{},{}", c.x(), c.y(), w)?;
            }
        }
    }
    Ok(())
}

/// Write a tightness profile as CSV: `r,mass`.
pub fn write_profile_csv<W: std::io::Write>(
    profile: &[(f64, f64)],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "r,mass")?;
    for (r, mass) in profile {
        writeln!(out, "{r},{mass}")?;
    }
    Ok(())
}

/// Write a grid density as CSV: `x,density`.
pub fn write_density_csv<W: std::io::Write>(
    g: &GridDensity1d,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "x,density")?;
    for (x, v) in g.xs().iter().zip(g.values()) {
        writeln!(out, "{x},{v}")?;
    }
    Ok(())
}
