//! Run-configuration files: flat TOML tables, strictly validated.
//!
//! Unknown keys are rejected outright, and every key that is present must
//! be meaningful for the selected model and domain kind. Silent
//! misconfiguration is the main failure mode of simulation studies, so the
//! parser is deliberately humorless.

use qsd_core::engine::{HitTest, JumpPolicy, SimulationConfig};
use qsd_core::geometry::{CutoffFamily, DomainGeometry};
use qsd_core::models::{DriftModel, DriftSource, LvParams};
use serde::{Deserialize, Serialize};

/// Errors split by exit status: configuration problems exit with 2,
/// anything that goes wrong after validation exits with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

/// A parsed configuration file. Tables other than `model` and `domain` are
/// optional at parse time; each subcommand checks for the ones it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelTable,
    pub domain: DomainTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineTable>,
    pub output: OutputTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couple: Option<CoupleTable>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c11: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c21: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c22: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_source: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_m: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineTable {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Cut-off index; alternative spelling of `domain.cutoff_m` for
    /// cut-off domains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_policy: Option<JumpPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_test: Option<HitTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Subset of {"csv", "json"}; both by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
    /// Emit `comparison.json` against the model's analytic or spectral
    /// target, when one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleTable {
    /// Downward drift of the reflected comparison process; estimated from
    /// the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Reflection ceiling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Width of the boundary band used when estimating `q`; defaults to
    /// the ceiling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Per-axis resolution of the drift scan behind the `q` estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
}

impl RunConfig {
    /// Parse a TOML document; unknown keys and type mismatches are
    /// configuration errors.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }
}

fn require<T: Copy>(field: Option<T>, key: &str) -> Result<T, CliError> {
    field.ok_or_else(|| CliError::Config(format!("{key} required")))
}

fn reject_if_set<T>(field: &Option<T>, key: &str, model: &str) -> Result<(), CliError> {
    if field.is_some() {
        return config_err(format!("model.{key} is not a {model} parameter"));
    }
    Ok(())
}

fn drift_source(table: &ModelTable) -> Result<DriftSource, CliError> {
    match table.drift_source.as_deref() {
        None | Some("ito_consistent") => Ok(DriftSource::ItoConsistent),
        Some("paper_literal") => Ok(DriftSource::PaperLiteral),
        Some(other) => config_err(format!(
            "model.drift_source must be \"ito_consistent\" or \"paper_literal\", got \"{other}\""
        )),
    }
}

/// Build the drift model, checking that exactly the parameters the model
/// uses are present. `dim` is the domain's dimension (a zero-drift model
/// takes its dimension from the domain).
pub fn build_model(table: &ModelTable, dim: usize) -> Result<DriftModel, CliError> {
    let id = table.id.as_deref().ok_or_else(|| CliError::Config("model.id required".into()))?;
    let scalar_params: [(&Option<f64>, &str); 10] = [
        (&table.r, "r"),
        (&table.c, "c"),
        (&table.r1, "r1"),
        (&table.r2, "r2"),
        (&table.c11, "c11"),
        (&table.c12, "c12"),
        (&table.c21, "c21"),
        (&table.c22, "c22"),
        (&table.gamma1, "gamma1"),
        (&table.gamma2, "gamma2"),
    ];
    let allowed: &[&str] = match id {
        "brownian_motion" | "wright_fisher" => &[],
        "logistic_feller" => &["r", "c"],
        "lotka_volterra" => &["r1", "r2", "c11", "c12", "c21", "c22", "gamma1", "gamma2"],
        other => {
            return config_err(format!(
                "model.id \"{other}\" unknown; expected one of brownian_motion, \
                 wright_fisher, logistic_feller, lotka_volterra"
            ))
        }
    };
    for (field, key) in scalar_params {
        if !allowed.contains(&key) {
            reject_if_set(field, key, id)?;
        }
    }
    match id {
        "brownian_motion" => {
            reject_if_set(&table.drift_source, "drift_source", id)?;
            Ok(DriftModel::BrownianMotion { dim })
        }
        "wright_fisher" => Ok(DriftModel::WrightFisher { source: drift_source(table)? }),
        "logistic_feller" => {
            let r = require(table.r, "model.r")?;
            let c = require(table.c, "model.c")?;
            for (value, key) in [(r, "model.r"), (c, "model.c")] {
                if !(value > 0.0 && value.is_finite()) {
                    return config_err(format!("{key} must be positive, got {value}"));
                }
            }
            Ok(DriftModel::LogisticFeller { r, c, source: drift_source(table)? })
        }
        "lotka_volterra" => {
            reject_if_set(&table.drift_source, "drift_source", id)?;
            let params = LvParams::new(
                require(table.r1, "model.r1")?,
                require(table.r2, "model.r2")?,
                require(table.c11, "model.c11")?,
                require(table.c12, "model.c12")?,
                require(table.c21, "model.c21")?,
                require(table.c22, "model.c22")?,
                require(table.gamma1, "model.gamma1")?,
                require(table.gamma2, "model.gamma2")?,
            )
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
            Ok(DriftModel::LotkaVolterra { params })
        }
        _ => unreachable!(),
    }
}

/// Build the domain. For `kind = "cutoff"` the index may be spelled either
/// `domain.cutoff_m` or `engine.m`; returns the index used, if any, so the
/// engine config can echo it.
pub fn build_domain(
    table: &DomainTable,
    model_family: Option<CutoffFamily>,
    engine_m: Option<u32>,
) -> Result<(DomainGeometry, Option<u32>), CliError> {
    let kind = table.kind.as_deref().ok_or_else(|| CliError::Config("domain.kind required".into()))?;
    let check_absent = |field: &Option<f64>, key: &str| -> Result<(), CliError> {
        if field.is_some() {
            return config_err(format!("domain.{key} does not apply to kind = \"{kind}\""));
        }
        Ok(())
    };
    match kind {
        "interval" => {
            for (f, k) in [
                (&table.x_min, "x_min"),
                (&table.x_max, "x_max"),
                (&table.y_min, "y_min"),
                (&table.y_max, "y_max"),
                (&table.corner_radius, "corner_radius"),
            ] {
                check_absent(f, k)?;
            }
            if table.cutoff_m.is_some() {
                return config_err("domain.cutoff_m does not apply to kind = \"interval\"");
            }
            if engine_m.is_some() {
                return config_err("engine.m requires domain.kind = \"cutoff\"");
            }
            let a = require(table.a, "domain.a")?;
            let b = require(table.b, "domain.b")?;
            let dom = DomainGeometry::interval(a, b)
                .map_err(|e| CliError::Config(format!("domain: {e}")))?;
            Ok((dom, None))
        }
        "rounded_rectangle" => {
            check_absent(&table.a, "a")?;
            check_absent(&table.b, "b")?;
            if table.cutoff_m.is_some() {
                return config_err("domain.cutoff_m does not apply to kind = \"rounded_rectangle\"");
            }
            if engine_m.is_some() {
                return config_err("engine.m requires domain.kind = \"cutoff\"");
            }
            let dom = DomainGeometry::rounded_rectangle(
                require(table.x_min, "domain.x_min")?,
                require(table.x_max, "domain.x_max")?,
                require(table.y_min, "domain.y_min")?,
                require(table.y_max, "domain.y_max")?,
                require(table.corner_radius, "domain.corner_radius")?,
            )
            .map_err(|e| CliError::Config(format!("domain: {e}")))?;
            Ok((dom, None))
        }
        "cutoff" => {
            for (f, k) in [
                (&table.a, "a"),
                (&table.b, "b"),
                (&table.x_min, "x_min"),
                (&table.x_max, "x_max"),
                (&table.y_min, "y_min"),
                (&table.y_max, "y_max"),
                (&table.corner_radius, "corner_radius"),
            ] {
                check_absent(f, k)?;
            }
            let m = match (table.cutoff_m, engine_m) {
                (Some(dm), Some(em)) if dm != em => {
                    return config_err(format!(
                        "domain.cutoff_m = {dm} and engine.m = {em} disagree"
                    ))
                }
                (Some(m), _) | (None, Some(m)) => m,
                (None, None) => return config_err("domain.cutoff_m or engine.m required"),
            };
            let family = model_family.ok_or_else(|| {
                CliError::Config(
                    "domain.kind = \"cutoff\" needs a model with a cut-off family \
                     (brownian_motion has none; use an explicit domain)"
                        .into(),
                )
            })?;
            let dom =
                family.cutoff(m).map_err(|e| CliError::Config(format!("domain: {e}")))?;
            Ok((dom, Some(m)))
        }
        other => config_err(format!(
            "domain.kind \"{other}\" unknown; expected interval, rounded_rectangle, or cutoff"
        )),
    }
}

/// Build the engine parameters; `cutoff_m` is the index recovered while
/// building the domain.
pub fn build_engine(table: &EngineTable, cutoff_m: Option<u32>) -> Result<SimulationConfig, CliError> {
    let config = SimulationConfig {
        n_particles: require(table.n, "engine.N")?,
        cutoff_m,
        dt: require(table.dt, "engine.dt")?,
        burn_in: require(table.burn_in, "engine.burn_in")?,
        sample_horizon: require(table.sample_horizon, "engine.sample_horizon")?,
        seed: require(table.seed, "engine.seed")?,
        jump_policy: table.jump_policy.clone().unwrap_or(JumpPolicy::UniformOther),
        hit_test: table.hit_test.unwrap_or_default(),
        snapshot_stride: table.snapshot_stride.unwrap_or(10),
    };
    config.validate().map_err(|e| CliError::Config(format!("engine: {e}")))?;
    Ok(config)
}

/// Output formats requested (validated): `(csv, json)`.
pub fn build_formats(table: &OutputTable) -> Result<(bool, bool), CliError> {
    match &table.formats {
        None => Ok((true, true)),
        Some(list) => {
            if list.is_empty() {
                return config_err("output.formats must not be empty");
            }
            let (mut csv, mut json) = (false, false);
            for f in list {
                match f.as_str() {
                    "csv" => csv = true,
                    "json" => json = true,
                    other => {
                        return config_err(format!(
                            "output.formats entry \"{other}\" unknown; expected \"csv\" or \"json\""
                        ))
                    }
                }
            }
            Ok((csv, json))
        }
    }
}
