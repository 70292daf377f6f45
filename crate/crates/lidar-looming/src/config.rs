//! Run configuration shared by the CLI commands: a flat `key=value`
//! text file plus flag overrides (flags win). Every constraint of the
//! owning modules is re-validated when a configuration is loaded.

use std::fmt;
use std::path::Path;

use crate::geometry::Vec3;
use crate::looming::{ThreatThresholds, DEFAULT_CLAMP, DEFAULT_EDGE_RADIUS};
use crate::range_image::{GridSpec, DEFAULT_HEIGHT, DEFAULT_R_MAX, DEFAULT_WIDTH};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Line { line: usize, msg: String },
    Invalid(String),
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Line { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
            ConfigError::Io(msg) => write!(f, "cannot read config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// All tunables of the pipeline with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub width: usize,
    pub height: usize,
    /// Azimuth span in radians.
    pub theta_min: f64,
    pub theta_max: f64,
    /// Elevation span in radians.
    pub phi_min: f64,
    pub phi_max: f64,
    /// Scan separation in seconds (10 Hz sensor by default).
    pub dt: f64,
    pub thresholds: (f64, f64, f64),
    /// Symmetric looming clamp, s⁻¹.
    pub clamp: f64,
    /// Max gap filled along a row, cells; 0 disables interpolation.
    pub fill: usize,
    pub decimate: (usize, usize),
    /// Color scale saturation for renderings, s⁻¹.
    pub scale: f64,
    /// Simulated range noise sigma in meters; 0 disables noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Edge exclusion radius for evaluation, cells.
    pub edge: usize,
    /// Sensor-frame translation velocity, m/s.
    pub velocity: Vec3,
    pub r_max: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            theta_min: -std::f64::consts::PI,
            theta_max: std::f64::consts::PI,
            phi_min: crate::range_image::DEFAULT_PHI_MIN_DEG.to_radians(),
            phi_max: crate::range_image::DEFAULT_PHI_MAX_DEG.to_radians(),
            dt: 0.1,
            thresholds: (0.2, 0.5, 1.0),
            clamp: DEFAULT_CLAMP,
            fill: 0,
            decimate: (1, 1),
            scale: 1.0,
            noise_sigma: 0.0,
            seed: 0,
            edge: DEFAULT_EDGE_RADIUS,
            velocity: Vec3::new(5.0, 0.0, 0.0),
            r_max: DEFAULT_R_MAX,
        }
    }
}

impl RunConfig {
    /// Parse a `key=value` config text. `#` starts a comment; unknown
    /// keys are rejected.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Line {
                line: line_no,
                msg: "expected key=value".into(),
            })?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|msg| ConfigError::Line { line: line_no, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "grid" => {
                let (w, h) = parse_grid_dims(value)?;
                self.width = w;
                self.height = h;
            }
            "theta_deg" => {
                let (a, b) = parse_pair(value)?;
                self.theta_min = a.to_radians();
                self.theta_max = b.to_radians();
            }
            "phi_deg" => {
                let (a, b) = parse_pair(value)?;
                self.phi_min = a.to_radians();
                self.phi_max = b.to_radians();
            }
            "dt" => self.dt = parse_num(value)?,
            "thresholds" => self.thresholds = parse_triple_nums(value)?,
            "clamp" => self.clamp = parse_num(value)?,
            "fill" => self.fill = parse_int(value)?,
            "decimate" => {
                let (a, b) = parse_int_pair(value)?;
                self.decimate = (a, b);
            }
            "scale" => self.scale = parse_num(value)?,
            "noise" => self.noise_sigma = parse_num(value)?,
            "seed" => self.seed = parse_int(value)? as u64,
            "edge" => self.edge = parse_int(value)?,
            "velocity" => self.velocity = parse_velocity(value)?,
            "r_max" => self.r_max = parse_num(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Re-check every module constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid_spec()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.threat_thresholds()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(ConfigError::Invalid("dt must be finite and > 0".into()));
        }
        if self.clamp <= 0.0 || !self.clamp.is_finite() {
            return Err(ConfigError::Invalid("clamp must be finite and > 0".into()));
        }
        if self.scale <= 0.0 || !self.scale.is_finite() {
            return Err(ConfigError::Invalid("scale must be finite and > 0".into()));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(ConfigError::Invalid(
                "noise sigma must be finite and >= 0".into(),
            ));
        }
        if self.decimate.0 == 0 || self.decimate.1 == 0 {
            return Err(ConfigError::Invalid(
                "decimation factors must be >= 1".into(),
            ));
        }
        if self.r_max <= 0.0 || !self.r_max.is_finite() {
            return Err(ConfigError::Invalid("r_max must be finite and > 0".into()));
        }
        if !self.velocity.is_finite() {
            return Err(ConfigError::Invalid("velocity must be finite".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, crate::range_image::GridError> {
        GridSpec::new(
            self.width,
            self.height,
            self.theta_min,
            self.theta_max,
            self.phi_min,
            self.phi_max,
        )
    }

    pub fn threat_thresholds(&self) -> Result<ThreatThresholds, crate::looming::LoomingError> {
        ThreatThresholds::new(self.thresholds.0, self.thresholds.1, self.thresholds.2)
    }
}

pub fn parse_num(value: &str) -> Result<f64, String> {
    value
        .parse()
        .map_err(|e| format!("bad number {value:?}: {e}"))
}

pub fn parse_int(value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|e| format!("bad integer {value:?}: {e}"))
}

/// Parse `WxH` grid dimensions.
pub fn parse_grid_dims(value: &str) -> Result<(usize, usize), String> {
    let (w, h) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {value:?}"))?;
    Ok((parse_int(w.trim())?, parse_int(h.trim())?))
}

pub fn parse_pair(value: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected A,B, got {value:?}"));
    }
    Ok((parse_num(parts[0])?, parse_num(parts[1])?))
}

pub fn parse_int_pair(value: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected A,B, got {value:?}"));
    }
    Ok((parse_int(parts[0])?, parse_int(parts[1])?))
}

/// Parse `L1,L2,L3` thresholds.
pub fn parse_triple_nums(value: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected L1,L2,L3, got {value:?}"));
    }
    Ok((
        parse_num(parts[0])?,
        parse_num(parts[1])?,
        parse_num(parts[2])?,
    ))
}

/// Parse `X,Y,Z` into a vector.
pub fn parse_velocity(value: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got {value:?}"));
    }
    Ok(Vec3::new(
        parse_num(parts[0])?,
        parse_num(parts[1])?,
        parse_num(parts[2])?,
    ))
}
