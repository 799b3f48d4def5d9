//! Command execution: build the pieces from a validated config, run them,
//! and write artifacts.

use std::path::PathBuf;

use qsd_core::coupling::{coupling_check, estimate_q, CouplingReport};
use qsd_core::engine::{run, ExecutionMode, SimulationResult};
use qsd_core::geometry::{DomainGeometry, Point};
use qsd_core::models::{ChangeOfVariables, DriftModel, DriftSource};
use qsd_core::oracle::principal_eigenpair;
use qsd_core::stats::{
    tv_binned, wasserstein1_1d, write_density_csv, write_histogram_csv, write_profile_csv,
    Cdf1d, EmpiricalMeasure, GridDensity1d,
};
use serde::Serialize;

use crate::config::{
    build_domain, build_engine, build_formats, build_model, CliError, CoupleTable, RunConfig,
};

trait IntoRuntime<T> {
    fn rt(self) -> Result<T, CliError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> IntoRuntime<T> for Result<T, E> {
    fn rt(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(anyhow::Error::new(e)))
    }
}

/// Everything `run` leaves behind, for callers that want more than files.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub result: SimulationResult,
    pub mean_phi: f64,
    pub summary_json: Option<String>,
    pub comparison: Option<Comparison>,
}

#[derive(Serialize)]
struct Summary<'a> {
    lambda_hat: f64,
    lambda_degenerate: bool,
    jump_rate: f64,
    mean_phi: f64,
    /// Smallest value of the drift-regularity diagnostic `G` on a coarse
    /// interior grid; absent when the drift is not of gradient form.
    g_min: Option<f64>,
    seed: u64,
    config: &'a RunConfig,
    wall_time_seconds: f64,
}

/// Distances between the run's empirical measure and the model's known
/// target, written as `comparison.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    /// Which target was used: a closed-form density or the spectral solver.
    pub target: String,
    pub w1: f64,
    pub tv: f64,
    pub lambda_target: f64,
    pub lambda_hat: f64,
    pub lambda_rel_error: f64,
    /// Wasserstein distance after mapping back to population coordinates,
    /// for models defined by a change of variables.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1_pushforward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_grid_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_residual: Option<f64>,
}

fn domain_dim_hint(cfg: &RunConfig) -> usize {
    match cfg.domain.kind.as_deref() {
        Some("rounded_rectangle") => 2,
        Some("cutoff") if cfg.model.id.as_deref() == Some("lotka_volterra") => 2,
        _ => 1,
    }
}

/// Build model, domain, and engine config from a parsed file.
pub fn build_all(
    cfg: &RunConfig,
) -> Result<(DriftModel, DomainGeometry, qsd_core::engine::SimulationConfig), CliError> {
    let engine_table = cfg
        .engine
        .as_ref()
        .ok_or_else(|| CliError::Config("engine table required".into()))?;
    let model = build_model(&cfg.model, domain_dim_hint(cfg))?;
    let (domain, cutoff_m) = build_domain(&cfg.domain, model.cutoff_family(), engine_table.m)?;
    let sim = build_engine(engine_table, cutoff_m)?;
    Ok((model, domain, sim))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg
        .output
        .directory
        .as_deref()
        .ok_or_else(|| CliError::Config("output.directory required".into()))?;
    Ok(PathBuf::from(dir))
}

/// Run one simulation and write its artifacts.
pub fn execute_run(cfg: &RunConfig, mode: ExecutionMode) -> Result<RunOutcome, CliError> {
    let started = std::time::Instant::now();
    let (model, domain, sim) = build_all(cfg)?;
    let (want_csv, want_json) = build_formats(&cfg.output)?;
    let dir = out_dir(cfg)?;
    std::fs::create_dir_all(&dir).rt()?;

    let result = run(&sim, &model, &domain, mode).rt()?;
    let mean_phi = result.empirical.mean_phi(&domain).rt()?;
    let g_min = model.min_g_on_grid(&domain, 200).ok();

    if want_csv {
        let mut f = Vec::new();
        write_histogram_csv(&result.empirical, &mut f).rt()?;
        std::fs::write(dir.join("empirical.csv"), f).rt()?;

        let mut f = Vec::new();
        use std::io::Write;
        writeln!(f, "t,mass").rt()?;
        for (t, mass) in &result.mass_loss_curve {
            writeln!(f, "{t},{mass}").rt()?;
        }
        std::fs::write(dir.join("mass_loss.csv"), f).rt()?;

        let mut f = Vec::new();
        write_profile_csv(&result.diagnostics.tightness, &mut f).rt()?;
        std::fs::write(dir.join("tightness.csv"), f).rt()?;
    }

    let comparison = if cfg.output.compare.unwrap_or(false) {
        compare_to_target(cfg, &model, &domain, &result)?
    } else {
        None
    };
    if let Some(ref cmp) = comparison {
        if want_json {
            let text = serde_json::to_string_pretty(cmp).rt()?;
            std::fs::write(dir.join("comparison.json"), text + "\n").rt()?;
        }
    }

    let summary_json = if want_json {
        let summary = Summary {
            lambda_hat: result.lambda_hat,
            lambda_degenerate: result.lambda_degenerate,
            jump_rate: result.jump_rate,
            mean_phi,
            g_min,
            seed: sim.seed,
            config: cfg,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&summary).rt()? + "\n";
        std::fs::write(dir.join("summary.json"), &text).rt()?;
        Some(text)
    } else {
        None
    };

    Ok(RunOutcome { dir, result, mean_phi, summary_json, comparison })
}

/// Sampled upper bound for |b| along an interval.
fn max_drift_1d(model: &DriftModel, lo: f64, hi: f64) -> f64 {
    let mut maxb = 0.0f64;
    let n = 10_000;
    for i in 1..n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        if let Ok(b) = model.drift_1d(x) {
            maxb = maxb.max(b.abs());
        }
    }
    maxb
}

/// Grid for the spectral solver: keep the cell Péclet number |b| h under
/// 0.4 so the discrete operator stays an M-matrix with headroom.
fn spectral_grid_n(model: &DriftModel, lo: f64, hi: f64, requested: Option<usize>) -> usize {
    if let Some(g) = requested {
        return g;
    }
    let needed = ((hi - lo) * max_drift_1d(model, lo, hi) / 0.4).ceil() as usize + 2;
    needed.clamp(2000, 800_000)
}

fn compare_to_target(
    cfg: &RunConfig,
    model: &DriftModel,
    domain: &DomainGeometry,
    result: &SimulationResult,
) -> Result<Option<Comparison>, CliError> {
    let (lo, hi) = match *domain {
        DomainGeometry::Interval { a, b } => (a, b),
        // No independent target in two dimensions.
        DomainGeometry::RoundedRectangle { .. } => return Ok(None),
    };
    let emp = &result.empirical;
    let make = |target: &str,
                density: GridDensity1d,
                lambda_target: f64,
                grid_res: Option<(usize, f64)>|
     -> Result<Comparison, CliError> {
        let w1 = wasserstein1_1d(emp, &density).rt()?;
        let tv = tv_binned(emp, &density_as_histogram(&density, emp)?).rt()?;
        Ok(Comparison {
            target: target.to_string(),
            w1,
            tv,
            lambda_target,
            lambda_hat: result.lambda_hat,
            lambda_rel_error: (result.lambda_hat - lambda_target).abs() / lambda_target,
            w1_pushforward: None,
            oracle_grid_n: grid_res.map(|g| g.0),
            oracle_residual: grid_res.map(|g| g.1),
        })
    };
    match model {
        DriftModel::BrownianMotion { dim: 1 } => {
            let span = hi - lo;
            let mut density = GridDensity1d::from_fn(lo, hi, 2001, |x| {
                (std::f64::consts::PI * (x - lo) / span).sin()
            })
            .rt()?;
            density.normalize().rt()?;
            let lambda = std::f64::consts::PI.powi(2) / (2.0 * span * span);
            Ok(Some(make("analytic_sine", density, lambda, None)?))
        }
        DriftModel::WrightFisher { source: DriftSource::ItoConsistent } => {
            let mut density =
                GridDensity1d::from_fn(lo, hi, 4001, |x| (1.0 + x.cos()) * x.sin() / 2.0).rt()?;
            density.normalize().rt()?;
            let mut cmp = make("analytic_wright_fisher", density, 1.0, None)?;
            // Also compare in population coordinates against 2 - 2z.
            let cov = ChangeOfVariables::WrightFisher;
            let mut pts = Vec::with_capacity(emp.bins_x());
            for i in 0..emp.bins_x() {
                let w = emp.weights()[i];
                if w > 0.0 {
                    let z = cov.inverse(&Point::d1(emp.center_1d(i))).rt()?.x();
                    pts.push((z, w));
                }
            }
            let pushed = Cdf1d::from_point_masses(&pts).rt()?;
            let mut target_z = GridDensity1d::from_fn(0.0, 1.0, 2001, |z| 2.0 - 2.0 * z).rt()?;
            target_z.normalize().rt()?;
            cmp.w1_pushforward = Some(wasserstein1_1d(&pushed, &target_z).rt()?);
            Ok(Some(cmp))
        }
        m if m.dimension() == 1 => {
            // Anything else one-dimensional: solve the eigenproblem for the
            // configured drift.
            let grid_n =
                spectral_grid_n(m, lo, hi, cfg.oracle.as_ref().and_then(|o| o.grid_n));
            let pair =
                principal_eigenpair(|x| m.drift_1d(x).unwrap_or(f64::NAN), lo, hi, grid_n)
                    .rt()?;
            Ok(Some(make(
                "spectral",
                pair.density,
                pair.lambda,
                Some((grid_n, pair.residual)),
            )?))
        }
        _ => Ok(None),
    }
}

/// Integrate a density over the bins of `like` so binned distances apply.
fn density_as_histogram(
    target: &GridDensity1d,
    like: &EmpiricalMeasure,
) -> Result<EmpiricalMeasure, CliError> {
    let (lo, hi) = like.bounds_x();
    let bins = like.bins_x();
    let width = (hi - lo) / bins as f64;
    let mut h = EmpiricalMeasure::new_1d(lo, hi, bins).rt()?;
    for i in 0..bins {
        let c = like.center_1d(i);
        let w = target.interp(c) * width;
        if w > 0.0 {
            h.accumulate(&[Point::d1(c)], w).rt()?;
        }
    }
    h.normalize(1.0).rt()?;
    Ok(h)
}

/// One row of a sweep's index.
pub struct SweepCell {
    pub index: usize,
    pub value: f64,
    pub lambda_hat: Option<f64>,
    pub mean_phi: Option<f64>,
    pub status: String,
    pub dir: PathBuf,
}

fn apply_sweep_value(cfg: &mut RunConfig, parameter: &str, value: f64) {
    match parameter {
        "r" => cfg.model.r = Some(value),
        "c" => cfg.model.c = Some(value),
        "c12_c21" => {
            cfg.model.c12 = Some(value);
            cfg.model.c21 = Some(value);
        }
        _ => unreachable!("validated earlier"),
    }
}

/// Run every sweep cell, never aborting on a failing cell, and write
/// `index.csv` in the output directory.
pub fn execute_sweep(
    cfg: &RunConfig,
    mode: ExecutionMode,
) -> Result<(PathBuf, Vec<SweepCell>), CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep table required".into()))?;
    let parameter = sweep
        .parameter
        .as_deref()
        .ok_or_else(|| CliError::Config("sweep.parameter required".into()))?;
    let values = sweep
        .values
        .as_deref()
        .ok_or_else(|| CliError::Config("sweep.values required".into()))?;
    if values.is_empty() {
        return Err(CliError::Config("sweep.values must not be empty".into()));
    }
    let model_id = cfg.model.id.as_deref().unwrap_or("");
    let applicable = match parameter {
        "r" | "c" => model_id == "logistic_feller",
        "c12_c21" => model_id == "lotka_volterra",
        other => {
            return Err(CliError::Config(format!(
                "sweep.parameter \"{other}\" unknown; expected r, c, or c12_c21"
            )))
        }
    };
    if !applicable {
        return Err(CliError::Config(format!(
            "sweep.parameter \"{parameter}\" does not apply to model.id \"{model_id}\""
        )));
    }
    let base_seed = cfg
        .engine
        .as_ref()
        .and_then(|e| e.seed)
        .ok_or_else(|| CliError::Config("engine.seed required".into()))?;
    let base_dir = out_dir(cfg)?;
    std::fs::create_dir_all(&base_dir).rt()?;

    let mut cells = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let mut child = cfg.clone();
        child.sweep = None;
        apply_sweep_value(&mut child, parameter, value);
        if let Some(engine) = child.engine.as_mut() {
            engine.seed = Some(base_seed + i as u64);
        }
        let cell_dir = base_dir.join(format!("run_{i:03}"));
        child.output.directory = Some(cell_dir.to_string_lossy().into_owned());
        let cell = match execute_run(&child, mode) {
            Ok(out) => SweepCell {
                index: i,
                value,
                lambda_hat: Some(out.result.lambda_hat),
                mean_phi: Some(out.mean_phi),
                status: "ok".into(),
                dir: out.dir,
            },
            Err(e) => SweepCell {
                index: i,
                value,
                lambda_hat: None,
                mean_phi: None,
                status: format!("error: {}", e.to_string().replace(',', ";")),
                dir: cell_dir,
            },
        };
        cells.push(cell);
    }

    let mut index = String::from("run,parameter,value,lambda_hat,mean_phi,status\n");
    for cell in &cells {
        let lambda = cell.lambda_hat.map(|v| v.to_string()).unwrap_or_default();
        let phi = cell.mean_phi.map(|v| v.to_string()).unwrap_or_default();
        index.push_str(&format!(
            "run_{:03},{},{},{},{},{}\n",
            cell.index, parameter, cell.value, lambda, phi, cell.status
        ));
    }
    let index_path = base_dir.join("index.csv");
    std::fs::write(&index_path, index).rt()?;
    Ok((index_path, cells))
}

/// Outcome of the spectral-solver subcommand.
pub struct OracleOutcome {
    pub lambda: f64,
    pub residual: f64,
    pub grid_n: usize,
    pub dir: PathBuf,
}

/// Solve the eigenproblem for the configured 1D model and write
/// `oracle.csv` (grid density) and `oracle.json`.
pub fn execute_oracle(cfg: &RunConfig) -> Result<OracleOutcome, CliError> {
    let model = build_model(&cfg.model, domain_dim_hint(cfg))?;
    if model.dimension() != 1 {
        return Err(CliError::Config(
            "the oracle subcommand requires a one-dimensional model".into(),
        ));
    }
    let (domain, _) =
        build_domain(&cfg.domain, model.cutoff_family(), cfg.engine.as_ref().and_then(|e| e.m))?;
    let (lo, hi) = match domain {
        DomainGeometry::Interval { a, b } => (a, b),
        _ => return Err(CliError::Config("the oracle subcommand requires an interval domain".into())),
    };
    let grid_n = spectral_grid_n(&model, lo, hi, cfg.oracle.as_ref().and_then(|o| o.grid_n));
    let pair =
        principal_eigenpair(|x| model.drift_1d(x).unwrap_or(f64::NAN), lo, hi, grid_n).rt()?;

    let dir = out_dir(cfg)?;
    std::fs::create_dir_all(&dir).rt()?;
    let (want_csv, want_json) = build_formats(&cfg.output)?;
    if want_csv {
        let mut f = Vec::new();
        write_density_csv(&pair.density, &mut f).rt()?;
        std::fs::write(dir.join("oracle.csv"), f).rt()?;
    }
    if want_json {
        #[derive(Serialize)]
        struct OracleJson {
            lambda: f64,
            residual: f64,
            grid_n: usize,
        }
        let text = serde_json::to_string_pretty(&OracleJson {
            lambda: pair.lambda,
            residual: pair.residual,
            grid_n,
        })
        .rt()?;
        std::fs::write(dir.join("oracle.json"), text + "\n").rt()?;
    }
    Ok(OracleOutcome { lambda: pair.lambda, residual: pair.residual, grid_n, dir })
}

fn require_couple<T: Copy>(field: Option<T>, key: &str) -> Result<T, CliError> {
    field.ok_or_else(|| CliError::Config(format!("{key} required")))
}

/// Run the reflected-comparison coupling check and write `couple.json`.
pub fn execute_couple(cfg: &RunConfig, table_override: Option<&CoupleTable>) -> Result<(CouplingReport, PathBuf), CliError> {
    let table = table_override
        .or(cfg.couple.as_ref())
        .ok_or_else(|| CliError::Config("couple table required".into()))?;
    let model = build_model(&cfg.model, domain_dim_hint(cfg))?;
    let (domain, _) =
        build_domain(&cfg.domain, model.cutoff_family(), cfg.engine.as_ref().and_then(|e| e.m))?;
    let a = require_couple(table.a, "couple.a")?;
    let dt = require_couple(table.dt, "couple.dt")?;
    let horizon = require_couple(table.horizon, "couple.horizon")?;
    let n_paths = require_couple(table.n_paths, "couple.n_paths")?;
    let seed = require_couple(table.seed, "couple.seed")?;
    let q = match table.q {
        Some(q) => q,
        None => estimate_q(
            &model,
            &domain,
            table.band_alpha.unwrap_or(a),
            table.grid_n.unwrap_or(1000),
        )
        .rt()?,
    };
    let report = coupling_check(&model, &domain, q, a, dt, horizon, n_paths, seed).rt()?;
    let dir = out_dir(cfg)?;
    std::fs::create_dir_all(&dir).rt()?;
    let text = serde_json::to_string_pretty(&report).rt()?;
    std::fs::write(dir.join("couple.json"), text + "\n").rt()?;
    Ok((report, dir))
}
