//! Run configuration: flat `key = value` text with either dotted keys
//! (`surface.tube_radius = 0.1`) or `[section]` headers prefixing the keys
//! below them. `#` starts a comment. Environment variables with the
//! `PROPELLER_` prefix override file values.

use crate::flow::{FlowConfig, TimeStep};
use crate::geometry::SurfaceParams;
use crate::region::PropellerRegion;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("config field {key}: {reason}")]
    Field { key: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which verification stages a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CheckSelection {
    /// Region obstruction checks, flow, and all post-flow analysis.
    All,
    /// Only the target-region obstruction checks; no mesh, no flow.
    RegionOnly,
}

/// Target region layout: band half-width and removed-arc arrangement.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegionSettings {
    pub epsilon: f64,
    pub arc_count: usize,
    pub phase: f64,
}

impl Default for RegionSettings {
    fn default() -> Self {
        RegionSettings { epsilon: 0.05, arc_count: 3, phase: 0.0 }
    }
}

impl RegionSettings {
    pub fn build(&self) -> Result<PropellerRegion, ConfigError> {
        PropellerRegion::new(self.epsilon, self.arc_count, self.phase)
            .map_err(|e| ConfigError::Field { key: "region".into(), reason: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub surface: SurfaceParams,
    pub flow: FlowConfig,
    pub region: RegionSettings,
    pub out: PathBuf,
    pub checks: CheckSelection,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: SurfaceParams::default(),
            flow: FlowConfig::default(),
            region: RegionSettings::default(),
            out: PathBuf::from("out"),
            checks: CheckSelection::All,
            seed: 42,
        }
    }
}

impl RunConfig {
    /// Checks every nested invariant and reports the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.surface
            .validate()
            .map_err(|e| ConfigError::Field { key: "surface".into(), reason: e.to_string() })?;
        self.region.build()?;
        if self.flow.max_steps == 0 {
            return Err(field_err("flow.max_steps", "must be at least 1"));
        }
        if self.flow.snapshot_every == 0 {
            return Err(field_err("flow.snapshot_every", "must be at least 1"));
        }
        if !(self.flow.tension_tol > 0.0) {
            return Err(field_err("flow.tension_tol", "must be positive"));
        }
        if !(self.flow.equivariance_tol > 0.0) {
            return Err(field_err("flow.equivariance_tol", "must be positive"));
        }
        if !(self.flow.energy_drop_alarm > 0.0) {
            return Err(field_err("flow.energy_drop_alarm", "must be positive"));
        }
        if let TimeStep::Fixed(dt) = self.flow.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(field_err("flow.dt", "fixed step must be positive and finite"));
            }
        }
        Ok(())
    }
}

fn field_err(key: &str, reason: &str) -> ConfigError {
    ConfigError::Field { key: key.into(), reason: reason.into() }
}

/// Parses config text over the defaults. Later assignments override earlier
/// ones, which is also how the environment overrides work.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let name = header.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                reason: "unclosed [section] header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Parse { line, reason: format!("expected key = value, got '{content}'") });
        };
        let k = k.trim();
        let key = if section.is_empty() || k.contains('.') {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        assign(&mut cfg, &key, v.trim())
            .map_err(|reason| ConfigError::Parse { line, reason: format!("{key}: {reason}") })?;
    }
    Ok(cfg)
}

/// Reads a config file and applies `PROPELLER_*` environment overrides.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    apply_env_overrides(&mut cfg)?;
    Ok(cfg)
}

pub const ENV_PREFIX: &str = "PROPELLER_";

pub fn apply_env_overrides(cfg: &mut RunConfig) -> Result<(), ConfigError> {
    let mut vars: Vec<(String, String)> = std::env::vars()
        .filter(|(name, _)| name.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    apply_overrides(cfg, vars.into_iter())
}

/// `PROPELLER_SURFACE_TUBE_RADIUS=0.2` maps to `surface.tube_radius` and so
/// on; `PROPELLER_OUT`, `PROPELLER_SEED`, `PROPELLER_CHECKS` map to the
/// top-level keys.
pub fn apply_overrides(
    cfg: &mut RunConfig,
    vars: impl Iterator<Item = (String, String)>,
) -> Result<(), ConfigError> {
    for (name, value) in vars {
        let Some(tail) = name.strip_prefix(ENV_PREFIX) else { continue };
        let lower = tail.to_ascii_lowercase();
        let key = match lower.split_once('_') {
            Some((head @ ("surface" | "flow" | "region"), rest)) => format!("{head}.{rest}"),
            _ => lower,
        };
        assign(cfg, &key, &value)
            .map_err(|reason| ConfigError::Field { key: name.clone(), reason })?;
    }
    Ok(())
}

/// Mesh resolution from a level name or a positive integer.
pub fn parse_resolution(value: &str) -> Result<u32, String> {
    match value {
        "low" => Ok(1),
        "medium" => Ok(2),
        "high" => Ok(3),
        other => match other.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("expected low, medium, high, or a positive integer, got '{value}'")),
        },
    }
}

fn assign(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(value: &str, kind: &str) -> Result<T, String> {
        value.parse().map_err(|_| format!("expected {kind}, got '{value}'"))
    }
    match key {
        "surface.tube_radius" => cfg.surface.tube_radius = num(value, "a number")?,
        "surface.tube_half_height" => cfg.surface.tube_half_height = num(value, "a number")?,
        "surface.sphere_gap" => cfg.surface.sphere_gap = num(value, "a number")?,
        "surface.hole_radius" => cfg.surface.hole_radius = num(value, "a number")?,
        "surface.half_genus" => cfg.surface.half_genus = num(value, "an integer")?,
        "surface.resolution" => cfg.surface.resolution = parse_resolution(value)?,
        "flow.dt" => {
            cfg.flow.dt = if value == "auto" {
                TimeStep::Auto
            } else {
                TimeStep::Fixed(num(value, "a number or 'auto'")?)
            }
        }
        "flow.max_steps" => cfg.flow.max_steps = num(value, "an integer")?,
        "flow.tension_tol" => cfg.flow.tension_tol = num(value, "a number")?,
        "flow.energy_drop_alarm" => cfg.flow.energy_drop_alarm = num(value, "a number")?,
        "flow.equivariance_tol" => cfg.flow.equivariance_tol = num(value, "a number")?,
        "flow.snapshot_every" => cfg.flow.snapshot_every = num(value, "an integer")?,
        "flow.deterministic_reduction" => {
            cfg.flow.deterministic_reduction = num(value, "true or false")?
        }
        "region.epsilon" => cfg.region.epsilon = num(value, "a number")?,
        "region.arc_count" => cfg.region.arc_count = num(value, "an integer")?,
        "region.phase" => cfg.region.phase = num(value, "a number")?,
        "out" => cfg.out = PathBuf::from(value),
        "checks" => {
            cfg.checks = match value {
                "all" => CheckSelection::All,
                "region-only" => CheckSelection::RegionOnly,
                _ => return Err(format!("expected all or region-only, got '{value}'")),
            }
        }
        "seed" => {
            cfg.seed = num(value, "an integer")?;
            cfg.flow.seed = cfg.seed;
        }
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}
