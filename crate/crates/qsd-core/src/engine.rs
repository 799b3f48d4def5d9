//! The interacting-particle simulator.
//!
//! `N` particles follow the Euler-Maruyama discretization of
//! `dX = dB + b(X) dt` inside a bounded domain. When a particle's update
//! would take it out of the domain (or the optional Brownian-bridge test
//! detects an excursion within the step), the particle instead jumps onto
//! the position of another particle chosen uniformly at random, and a
//! global jump counter increments. The long-run empirical measure of the
//! system estimates the quasi-stationary distribution of the absorbed
//! diffusion, and the jump counter tracks the mass the absorbed process
//! would have lost: each jump discounts it by `(N-1)/N`.
//!
//! Reproducibility is a hard requirement here: every particle owns one
//! stream of a counter-based generator (`ChaCha8`, streams split by
//! particle index), proposals are computed from the pre-step state only,
//! and boundary hits are resolved in ascending particle index. Serial and
//! parallel execution therefore produce identical trajectories bit for bit.

use crate::geometry::{DomainError, DomainGeometry, Point};
use crate::models::{DriftModel, ModelError};
use crate::stats::{EmpiricalMeasure, StatsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initial point not interior: {0:?}")]
    NotInterior(Point),
    #[error("jump target outside the domain: {0:?}")]
    JumpTargetOutside(Point),
    #[error("could not sample an interior point after {0} attempts")]
    SamplingExhausted(usize),
    #[error("mass-loss curve has {0} points; at least 10 are needed")]
    CurveTooShort(usize),
    #[error("mass-loss curve contains non-positive mass")]
    NonPositiveMass,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Where a particle restarts after hitting the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpPolicy {
    /// Copy the position of one of the other `N-1` particles, uniformly.
    UniformOther,
    /// Sample afresh from a fixed interior measure.
    FixedMeasure(FixedMeasureSpec),
}

/// The fixed restart measures supported by [`JumpPolicy::FixedMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedMeasureSpec {
    /// Always restart at this point.
    Point {
        x: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<f64>,
    },
    /// Uniform on the set of points at boundary distance greater than
    /// `margin`.
    UniformSublevel { margin: f64 },
}

impl FixedMeasureSpec {
    fn to_point(&self, dim: usize) -> Option<Point> {
        match *self {
            FixedMeasureSpec::Point { x, y: None } if dim == 1 => Some(Point::d1(x)),
            FixedMeasureSpec::Point { x, y: Some(y) } if dim == 2 => Some(Point::d2(x, y)),
            _ => None,
        }
    }
}

/// How boundary hits are detected within a time step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitTest {
    /// A hit is an update landing outside the domain.
    #[default]
    CrossingOnly,
    /// Additionally flag in-domain updates as hits with the half-space
    /// Brownian-bridge excursion probability `exp(-2 φ(x) φ(x') / dt)`,
    /// since the continuous path may leave and return within one step.
    BridgeCorrected,
}

/// Whether particle proposals are computed on one thread or many. Results
/// are identical either way; this is purely a throughput knob.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecutionMode {
    #[default]
    Serial,
    Parallel,
}

/// Simulation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Particle count, at least 2.
    pub n_particles: usize,
    /// Cut-off index of the domain, when it came from a cut-off family
    /// (metadata echoed into reports).
    pub cutoff_m: Option<u32>,
    /// Time step.
    pub dt: f64,
    /// Time to discard before sampling starts.
    pub burn_in: f64,
    /// Length of the sampling window.
    pub sample_horizon: f64,
    pub seed: u64,
    pub jump_policy: JumpPolicy,
    pub hit_test: HitTest,
    /// Steps between empirical-measure accumulations.
    pub snapshot_stride: u32,
}

impl SimulationConfig {
    /// A config with the given size and step, uniform-other jumps,
    /// crossing-only hit detection, and snapshot stride 10.
    pub fn new(n_particles: usize, dt: f64, burn_in: f64, sample_horizon: f64, seed: u64) -> Self {
        SimulationConfig {
            n_particles,
            cutoff_m: None,
            dt,
            burn_in,
            sample_horizon,
            seed,
            jump_policy: JumpPolicy::UniformOther,
            hit_test: HitTest::default(),
            snapshot_stride: 10,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_particles < 2 {
            return Err(EngineError::InvalidConfig(format!(
                "need at least 2 particles, got {}",
                self.n_particles
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EngineError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.burn_in < 0.0 || self.sample_horizon < 0.0 {
            return Err(EngineError::InvalidConfig(
                "burn_in and sample_horizon must be nonnegative".into(),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(EngineError::InvalidConfig("snapshot_stride must be positive".into()));
        }
        Ok(())
    }
}

/// How the particles start out.
#[derive(Clone, Debug)]
pub enum InitialCondition {
    /// Independent uniform draws from the domain's interior.
    UniformInterior,
    /// All particles at one interior point.
    Point(Point),
    /// One position per particle.
    Explicit(Vec<Point>),
}

/// The state of the `N`-particle system.
pub struct ParticleSystem {
    positions: Vec<Point>,
    t: f64,
    total_jumps: u64,
    per_particle_jumps: Vec<u64>,
    streams: Vec<ChaCha8Rng>,
    jump_policy: JumpPolicy,
    hit_test: HitTest,
    // Per-step scratch, kept to avoid reallocating in the hot loop.
    proposals: Vec<Point>,
    hits: Vec<bool>,
}

impl ParticleSystem {
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Total number of boundary jumps so far (`A_t`).
    pub fn total_jumps(&self) -> u64 {
        self.total_jumps
    }

    pub fn per_particle_jumps(&self) -> &[u64] {
        &self.per_particle_jumps
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len()
    }

    /// The retained mass `((N-1)/N)^{A_t}` of the absorbed process this
    /// system mimics: each jump forfeits a `1/N` fraction.
    pub fn mass_loss(&self) -> f64 {
        mass_loss_factor(self.n_particles(), self.total_jumps)
    }
}

/// `((N-1)/N)^jumps`, computed in log space so large counts stay exact to
/// f64 precision instead of underflowing via repeated multiplication.
pub fn mass_loss_factor(n_particles: usize, jumps: u64) -> f64 {
    if jumps == 0 {
        return 1.0;
    }
    let per_jump = ((n_particles - 1) as f64 / n_particles as f64).ln();
    (jumps as f64 * per_jump).exp()
}

/// Initialize the particle system.
///
/// Per-particle RNG streams all derive from `config.seed`: the generator is
/// seeded identically everywhere and split by stream index (stream 0 is
/// reserved for initial-condition sampling, particle `i` gets stream
/// `i + 1`), so any particle's randomness is reproducible independently of
/// the others.
pub fn init_system(
    config: &SimulationConfig,
    domain: &DomainGeometry,
    initial: &InitialCondition,
) -> Result<ParticleSystem, EngineError> {
    config.validate()?;
    let n = config.n_particles;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(0);
    let positions: Vec<Point> = match initial {
        InitialCondition::UniformInterior => (0..n)
            .map(|_| sample_uniform_interior(domain, &mut init_rng))
            .collect::<Result<_, _>>()?,
        InitialCondition::Point(p) => {
            if !domain.contains(p)? {
                return Err(EngineError::NotInterior(*p));
            }
            vec![*p; n]
        }
        InitialCondition::Explicit(list) => {
            if list.len() != n {
                return Err(EngineError::InvalidConfig(format!(
                    "explicit initial condition has {} points for {} particles",
                    list.len(),
                    n
                )));
            }
            for p in list {
                if !domain.contains(p)? {
                    return Err(EngineError::NotInterior(*p));
                }
            }
            list.clone()
        }
    };
    let streams = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();
    Ok(ParticleSystem {
        positions,
        t: 0.0,
        total_jumps: 0,
        per_particle_jumps: vec![0; n],
        streams,
        jump_policy: config.jump_policy.clone(),
        hit_test: config.hit_test,
        proposals: vec![Point::d1(0.0); n],
        hits: vec![false; n],
    })
}

pub(crate) fn sample_uniform_interior(
    domain: &DomainGeometry,
    rng: &mut ChaCha8Rng,
) -> Result<Point, EngineError> {
    let (lo, hi) = domain.bounding_box();
    const MAX_ATTEMPTS: usize = 100_000;
    for _ in 0..MAX_ATTEMPTS {
        let p = match domain.dimension() {
            1 => Point::d1(lo.x() + (hi.x() - lo.x()) * rng.random::<f64>()),
            _ => Point::d2(
                lo.x() + (hi.x() - lo.x()) * rng.random::<f64>(),
                lo.y() + (hi.y() - lo.y()) * rng.random::<f64>(),
            ),
        };
        if domain.contains(&p)? {
            return Ok(p);
        }
    }
    Err(EngineError::SamplingExhausted(MAX_ATTEMPTS))
}

/// One particle's proposal for the step: its Euler update from the pre-step
/// state, and whether it hits the boundary. Consumes draws only from the
/// particle's own stream, in a fixed order (Gaussians, then the bridge
/// uniform when that test is live), so the stream stays aligned no matter
/// what the other particles do.
#[inline]
fn propose(
    pos: &Point,
    stream: &mut ChaCha8Rng,
    model: &DriftModel,
    domain: &DomainGeometry,
    dt: f64,
    sqrt_dt: f64,
    hit_test: HitTest,
) -> Result<(Point, bool), EngineError> {
    let b = model.drift(pos)?;
    let proposal = match pos.dim() {
        1 => {
            let z: f64 = StandardNormal.sample(stream);
            Point::d1(pos.x() + b.x() * dt + sqrt_dt * z)
        }
        _ => {
            let z1: f64 = StandardNormal.sample(stream);
            let z2: f64 = StandardNormal.sample(stream);
            Point::d2(
                pos.x() + b.x() * dt + sqrt_dt * z1,
                pos.y() + b.y() * dt + sqrt_dt * z2,
            )
        }
    };
    if !domain.contains(&proposal)? {
        return Ok((proposal, true));
    }
    if hit_test == HitTest::BridgeCorrected {
        let exponent = -2.0 * domain.phi(pos)? * domain.phi(&proposal)? / dt;
        // exp(-40) < 1e-17 is below the resolution of a uniform f64 draw;
        // skipping the draw there saves work on every bulk particle. The
        // branch depends only on particle state, so reproducibility and the
        // serial/parallel equivalence are unaffected.
        if exponent > -40.0 {
            let u: f64 = stream.random();
            if u < exponent.exp() {
                return Ok((proposal, true));
            }
        }
    }
    Ok((proposal, false))
}

/// Advance the system by one Euler step of size `dt`.
///
/// Phase one computes every particle's proposal and hit flag from the
/// pre-step state (concurrently in parallel mode). Phase two commits them
/// in ascending particle index: a non-hit particle moves to its proposal; a
/// hit particle jumps per the jump policy, seeing already-updated positions
/// of lower-indexed particles and pre-step positions of higher-indexed
/// ones.
pub fn step(
    system: &mut ParticleSystem,
    model: &DriftModel,
    domain: &DomainGeometry,
    dt: f64,
    mode: ExecutionMode,
) -> Result<(), EngineError> {
    let n = system.positions.len();
    let sqrt_dt = dt.sqrt();
    let hit_test = system.hit_test;
    match mode {
        ExecutionMode::Serial => {
            for i in 0..n {
                let (p, hit) = propose(
                    &system.positions[i],
                    &mut system.streams[i],
                    model,
                    domain,
                    dt,
                    sqrt_dt,
                    hit_test,
                )?;
                system.proposals[i] = p;
                system.hits[i] = hit;
            }
        }
        ExecutionMode::Parallel => {
            let positions = &system.positions;
            system
                .proposals
                .par_iter_mut()
                .zip(system.hits.par_iter_mut())
                .zip(system.streams.par_iter_mut())
                .zip(positions.par_iter())
                .try_for_each(|(((prop, hit), stream), pos)| {
                    let (p, h) = propose(pos, stream, model, domain, dt, sqrt_dt, hit_test)?;
                    *prop = p;
                    *hit = h;
                    Ok::<(), EngineError>(())
                })?;
        }
    }
    // Sequential resolution, ascending index.
    let mut jumps_this_step = 0u64;
    for i in 0..n {
        if !system.hits[i] {
            system.positions[i] = system.proposals[i];
            continue;
        }
        let target = match &system.jump_policy {
            JumpPolicy::UniformOther => {
                let k = system.streams[i].random_range(0..n - 1);
                let j = if k >= i { k + 1 } else { k };
                system.positions[j]
            }
            JumpPolicy::FixedMeasure(spec) => {
                sample_fixed_measure(spec, domain, &mut system.streams[i])?
            }
        };
        system.positions[i] = target;
        system.per_particle_jumps[i] += 1;
        jumps_this_step += 1;
    }
    system.total_jumps += jumps_this_step;
    system.t += dt;
    debug_assert!(
        system
            .positions
            .iter()
            .all(|p| domain.contains(p).unwrap_or(false)),
        "interior invariant violated at t = {}",
        system.t
    );
    debug_assert_eq!(
        system.total_jumps,
        system.per_particle_jumps.iter().sum::<u64>()
    );
    Ok(())
}

fn sample_fixed_measure(
    spec: &FixedMeasureSpec,
    domain: &DomainGeometry,
    rng: &mut ChaCha8Rng,
) -> Result<Point, EngineError> {
    match spec {
        FixedMeasureSpec::Point { .. } => {
            let p = spec
                .to_point(domain.dimension())
                .ok_or_else(|| EngineError::InvalidConfig(
                    "fixed restart point has the wrong dimension".into(),
                ))?;
            if !domain.contains(&p)? {
                return Err(EngineError::JumpTargetOutside(p));
            }
            Ok(p)
        }
        FixedMeasureSpec::UniformSublevel { margin } => {
            let (lo, hi) = domain.bounding_box();
            const MAX_ATTEMPTS: usize = 100_000;
            for _ in 0..MAX_ATTEMPTS {
                let p = match domain.dimension() {
                    1 => Point::d1(lo.x() + (hi.x() - lo.x()) * rng.random::<f64>()),
                    _ => Point::d2(
                        lo.x() + (hi.x() - lo.x()) * rng.random::<f64>(),
                        lo.y() + (hi.y() - lo.y()) * rng.random::<f64>(),
                    ),
                };
                if domain.in_sublevel(&p, *margin)? {
                    return Ok(p);
                }
            }
            Err(EngineError::SamplingExhausted(MAX_ATTEMPTS))
        }
    }
}

/// Extra outputs describing a run.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    /// `(r, mass within distance r of the boundary)` of the time-averaged
    /// empirical measure, on a default grid of fractions of the inradius.
    pub tightness: Vec<(f64, f64)>,
    pub seed: u64,
    pub config: SimulationConfig,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct SimulationResult {
    /// Time-averaged empirical measure over the sampling window,
    /// normalized to unit mass.
    pub empirical: EmpiricalMeasure,
    /// The particle positions at the final step.
    pub final_snapshot: EmpiricalMeasure,
    /// Jumps per unit time per particle over the sampling window.
    pub jump_rate: f64,
    /// Sampled `(t, ((N-1)/N)^{A_t})` pairs over the sampling window.
    pub mass_loss_curve: Vec<(f64, f64)>,
    /// Extinction-rate estimate: the slope of `-log mass` over the window.
    pub lambda_hat: f64,
    /// Set when `lambda_hat` could not be estimated (no jumps, or too few
    /// curve points) and was reported as zero.
    pub lambda_degenerate: bool,
    pub diagnostics: Diagnostics,
}

/// Run burn-in plus sampling window from a uniform interior start.
pub fn run(
    config: &SimulationConfig,
    model: &DriftModel,
    domain: &DomainGeometry,
    mode: ExecutionMode,
) -> Result<SimulationResult, EngineError> {
    run_from(config, model, domain, &InitialCondition::UniformInterior, mode)
}

/// Run burn-in plus sampling window from the given initial condition.
pub fn run_from(
    config: &SimulationConfig,
    model: &DriftModel,
    domain: &DomainGeometry,
    initial: &InitialCondition,
    mode: ExecutionMode,
) -> Result<SimulationResult, EngineError> {
    if model.dimension() != domain.dimension() {
        return Err(EngineError::InvalidConfig(format!(
            "model is {}-dimensional but domain is {}-dimensional",
            model.dimension(),
            domain.dimension()
        )));
    }
    let mut system = init_system(config, domain, initial)?;
    let dt = config.dt;
    let n_burn = (config.burn_in / dt).round() as u64;
    let n_sample = (config.sample_horizon / dt).round() as u64;
    for _ in 0..n_burn {
        step(&mut system, model, domain, dt, mode)?;
    }
    let jumps_at_window_start = system.total_jumps;
    let mut empirical = EmpiricalMeasure::for_domain(domain);
    let stride = config.snapshot_stride as u64;
    let mut mass_loss_curve = Vec::with_capacity((n_sample / stride) as usize);
    for s in 1..=n_sample {
        step(&mut system, model, domain, dt, mode)?;
        if s % stride == 0 {
            empirical.accumulate(&system.positions, 1.0)?;
            mass_loss_curve.push((system.t, system.mass_loss()));
        }
    }
    let mut final_snapshot = EmpiricalMeasure::for_domain(domain);
    final_snapshot.accumulate(&system.positions, 1.0)?;
    if empirical.total_mass() > 0.0 {
        empirical.normalize(1.0)?;
    } else {
        // Degenerate window: the time average collapses to the final state.
        empirical = final_snapshot.clone();
    }
    let window_jumps = system.total_jumps - jumps_at_window_start;
    let jump_rate = if config.sample_horizon > 0.0 {
        window_jumps as f64 / (config.n_particles as f64 * config.sample_horizon)
    } else {
        0.0
    };
    let (lambda_hat, lambda_degenerate) = match estimate_lambda(&mass_loss_curve) {
        Ok(pair) => pair,
        Err(EngineError::CurveTooShort(_)) => (0.0, true),
        Err(e) => return Err(e),
    };
    let r_grid: Vec<f64> = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
        .iter()
        .map(|f| f * domain.max_phi())
        .collect();
    let tightness = crate::stats::tightness_profile(&empirical, domain, &r_grid)?;
    Ok(SimulationResult {
        empirical,
        final_snapshot,
        jump_rate,
        mass_loss_curve,
        lambda_hat,
        lambda_degenerate,
        diagnostics: Diagnostics { tightness, seed: config.seed, config: config.clone() },
    })
}

/// Least-squares slope of `-log(mass)` against `t` over a mass-loss curve.
///
/// Returns `(0, true)` for a curve with no jumps (the regression would be
/// on identically-zero data); `(slope, false)` otherwise.
pub fn estimate_lambda(curve: &[(f64, f64)]) -> Result<(f64, bool), EngineError> {
    if curve.len() < 10 {
        return Err(EngineError::CurveTooShort(curve.len()));
    }
    if curve.iter().any(|(_, m)| !(*m > 0.0)) {
        return Err(EngineError::NonPositiveMass);
    }
    if curve.first().unwrap().1 == curve.last().unwrap().1 {
        // Mass is nonincreasing, so equal endpoints mean no jumps at all.
        return Ok((0.0, true));
    }
    let n = curve.len() as f64;
    let t_bar = curve.iter().map(|(t, _)| t).sum::<f64>() / n;
    let y_bar = curve.iter().map(|(_, m)| -m.ln()).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, m) in curve {
        let dt = t - t_bar;
        num += dt * (-m.ln() - y_bar);
        den += dt * dt;
    }
    if den == 0.0 {
        return Err(EngineError::InvalidConfig("mass-loss curve has zero time spread".into()));
    }
    Ok((num / den, false))
}

/// Dump the particle state as CSV: `t,particle_id,x1[,x2],jumps`.
pub fn write_particles_csv<W: std::io::Write>(
    system: &ParticleSystem,
    dim: usize,
    out: &mut W,
) -> std::io::Result<()> {
    if dim == 1 {
        writeln!(out, "t,particle_id,x1,jumps")?;
        for (i, p) in system.positions.iter().enumerate() {
            writeln!(out, "{},{},{},{}", system.t, i, p.x(), system.per_particle_jumps[i])?;
        }
    } else {
        writeln!(out, "t,particle_id,x1,x2,jumps")?;
        for (i, p) in system.positions.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                system.t,
                i,
                p.x(),
                p.y(),
                system.per_particle_jumps[i]
            )?;
        }
    }
    Ok(())
}
