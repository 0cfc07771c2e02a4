//! `section.key = value` run configuration.
//!
//! Every key has a default; files and `--set` overrides may only name keys
//! listed here. Validation runs once, after all overrides are applied.

use std::fmt;
use std::path::PathBuf;

use sublevy::kou::KouSpec;
use sublevy::transform::Tail;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Gaussian,
    SmoothBump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailFamily {
    Exponential,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailConfig {
    pub family: TailFamily,
    pub mass: f64,
    pub rate: f64,
    pub scale: f64,
    pub exponent: f64,
}

impl TailConfig {
    pub fn tail(&self) -> Tail {
        match self.family {
            TailFamily::Exponential => Tail::exponential(self.mass, self.rate),
            TailFamily::PowerLaw => Tail::power_law(self.scale, self.exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub b_lo: f64,
    pub b_hi: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_star: f64,
    pub lambda_floor: Option<f64>,

    pub resolution: usize,

    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub horizon: f64,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub z_cut: f64,
    pub nz: usize,

    pub payoff: PayoffKind,
    pub payoff_center: f64,
    pub payoff_width: f64,
    pub payoff_height: f64,
    pub payoff_value: f64,

    pub paths: usize,
    pub mc_dt: f64,
    pub seed: u64,
    pub x0: f64,

    pub points: Vec<f64>,
    pub fourier_tolerance: f64,
    pub dpp_tolerance: f64,
    pub mc_tolerance: f64,
    pub inner_fraction: f64,

    pub audit_samples: usize,
    pub box_lo: f64,
    pub box_hi: f64,

    pub kernel: TailConfig,
    pub reference: TailConfig,
    pub y_min: f64,
    pub y_max: f64,
    pub y_points: usize,
    pub quantile_tol: f64,
    pub z_max: f64,
    pub transport_tolerance: f64,
    pub thresholds: Vec<f64>,

    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            b_lo: 0.0,
            b_hi: 0.1,
            a_lo: 0.1,
            a_hi: 0.3,
            lambda_lo: 1.0,
            lambda_hi: 2.0,
            lambda_star: 2.0,
            lambda_floor: None,
            resolution: 2,
            x_min: -10.0,
            x_max: 10.0,
            nx: 801,
            horizon: 1.0,
            cfl_safety: 0.9,
            dt_max: 1e-2,
            z_cut: 10.0,
            nz: 401,
            payoff: PayoffKind::Gaussian,
            payoff_center: 0.0,
            payoff_width: 1.0,
            payoff_height: 1.0,
            payoff_value: 1.0,
            paths: 100_000,
            mc_dt: 1e-3,
            seed: 1,
            x0: 0.0,
            points: vec![-1.0, 0.0, 1.0],
            fourier_tolerance: 1e-2,
            dpp_tolerance: 2e-2,
            mc_tolerance: 1e-2,
            inner_fraction: 0.6,
            audit_samples: 2000,
            box_lo: -5.0,
            box_hi: 5.0,
            kernel: TailConfig { family: TailFamily::Exponential, mass: 1.0, rate: 1.0, scale: 1.0, exponent: 1.0 },
            reference: TailConfig { family: TailFamily::Exponential, mass: 2.0, rate: 1.0, scale: 1.0, exponent: 1.0 },
            y_min: -5.0,
            y_max: 5.0,
            y_points: 201,
            quantile_tol: 1e-10,
            z_max: 1e6,
            transport_tolerance: 1e-6,
            thresholds: vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0],
            directory: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

fn real(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => invalid(format!("{key}: expected a finite number, got '{v}'")),
    }
}

fn count(key: &str, v: &str) -> Result<usize, ConfigError> {
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    // scientific notation such as 1e5
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => Ok(x as usize),
        _ => invalid(format!("{key}: expected a nonnegative integer, got '{v}'")),
    }
}

fn reals(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',').map(|s| real(key, s.trim())).collect()
}

fn family(key: &str, v: &str) -> Result<TailFamily, ConfigError> {
    match v {
        "exponential" => Ok(TailFamily::Exponential),
        "power-law" => Ok(TailFamily::PowerLaw),
        _ => invalid(format!("{key}: expected 'exponential' or 'power-law', got '{v}'")),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "model.kind" => {
                if v != "kou" {
                    return invalid(format!("model.kind: only 'kou' is supported, got '{v}'"));
                }
            }
            "model.b_lo" => self.b_lo = real(key, v)?,
            "model.b_hi" => self.b_hi = real(key, v)?,
            "model.a_lo" => self.a_lo = real(key, v)?,
            "model.a_hi" => self.a_hi = real(key, v)?,
            "model.lambda_lo" => self.lambda_lo = real(key, v)?,
            "model.lambda_hi" => self.lambda_hi = real(key, v)?,
            "model.lambda_star" => self.lambda_star = real(key, v)?,
            "model.lambda_floor" => self.lambda_floor = Some(real(key, v)?),
            "control.resolution" => self.resolution = count(key, v)?,
            "pide.x_min" => self.x_min = real(key, v)?,
            "pide.x_max" => self.x_max = real(key, v)?,
            "pide.nx" => self.nx = count(key, v)?,
            "pide.T" => self.horizon = real(key, v)?,
            "pide.cfl_safety" => self.cfl_safety = real(key, v)?,
            "pide.dt_max" => self.dt_max = real(key, v)?,
            "pide.z_cut" => self.z_cut = real(key, v)?,
            "pide.nz" => self.nz = count(key, v)?,
            "payoff.kind" => {
                self.payoff = match v {
                    "gaussian" => PayoffKind::Gaussian,
                    "smooth-bump" => PayoffKind::SmoothBump,
                    "constant" => PayoffKind::Constant,
                    _ => return invalid(format!("payoff.kind: expected gaussian, smooth-bump or constant, got '{v}'")),
                }
            }
            "payoff.center" => self.payoff_center = real(key, v)?,
            "payoff.width" => self.payoff_width = real(key, v)?,
            "payoff.height" => self.payoff_height = real(key, v)?,
            "payoff.value" => self.payoff_value = real(key, v)?,
            "mc.paths" => self.paths = count(key, v)?,
            "mc.dt" => self.mc_dt = real(key, v)?,
            "mc.seed" => {
                self.seed = v.parse().map_err(|_| ConfigError(format!("mc.seed: expected an unsigned integer, got '{v}'")))?
            }
            "mc.x0" => self.x0 = real(key, v)?,
            "check.points" => self.points = reals(key, v)?,
            "check.fourier_tolerance" => self.fourier_tolerance = real(key, v)?,
            "check.dpp_tolerance" => self.dpp_tolerance = real(key, v)?,
            "check.mc_tolerance" => self.mc_tolerance = real(key, v)?,
            "check.inner_fraction" => self.inner_fraction = real(key, v)?,
            "validate.samples" => self.audit_samples = count(key, v)?,
            "validate.box_lo" => self.box_lo = real(key, v)?,
            "validate.box_hi" => self.box_hi = real(key, v)?,
            "transform.kernel" => self.kernel.family = family(key, v)?,
            "transform.kernel_mass" => self.kernel.mass = real(key, v)?,
            "transform.kernel_rate" => self.kernel.rate = real(key, v)?,
            "transform.kernel_scale" => self.kernel.scale = real(key, v)?,
            "transform.kernel_exponent" => self.kernel.exponent = real(key, v)?,
            "transform.reference" => self.reference.family = family(key, v)?,
            "transform.reference_mass" => self.reference.mass = real(key, v)?,
            "transform.reference_rate" => self.reference.rate = real(key, v)?,
            "transform.reference_scale" => self.reference.scale = real(key, v)?,
            "transform.reference_exponent" => self.reference.exponent = real(key, v)?,
            "transform.y_min" => self.y_min = real(key, v)?,
            "transform.y_max" => self.y_max = real(key, v)?,
            "transform.points" => self.y_points = count(key, v)?,
            "transform.tol" => self.quantile_tol = real(key, v)?,
            "transform.z_max" => self.z_max = real(key, v)?,
            "transform.tolerance" => self.transport_tolerance = real(key, v)?,
            "transform.thresholds" => self.thresholds = reals(key, v)?,
            "output.directory" => self.directory = PathBuf::from(v),
            "output.formats" => {
                let formats: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
                if let Some(bad) = formats.iter().find(|f| f.as_str() != "csv") {
                    return invalid(format!("output.formats: only csv is supported, got '{bad}'"));
                }
                self.formats = formats;
            }
            _ => return invalid(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Apply every `section.key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return invalid(format!("line {}: expected 'section.key = value'", n + 1));
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return invalid(format!("line {}: duplicate key '{key}'", n + 1));
            }
            self.set(key, value).map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        match assignment.split_once('=') {
            Some((k, v)) => self.set(k.trim(), v),
            None => invalid(format!("override '{assignment}' is not of the form key=value")),
        }
    }

    pub fn kou_spec(&self) -> KouSpec {
        let mut spec = KouSpec::intervals(
            (self.b_lo, self.b_hi),
            (self.a_lo, self.a_hi),
            (self.lambda_lo, self.lambda_hi),
            self.lambda_star,
        );
        if let Some(floor) = self.lambda_floor {
            spec.lambda_floor = floor;
        }
        spec
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.kou_spec().validate().map_err(|e| ConfigError(format!("model: {e}")))?;
        let checks: [(bool, &str); 22] = [
            (self.resolution >= 1, "control.resolution must be at least 1"),
            (self.x_min < self.x_max, "pide.x_min must be below pide.x_max"),
            (self.nx >= 3, "pide.nx must be at least 3"),
            (self.horizon > 0.0, "pide.T must be positive"),
            (self.cfl_safety > 0.0 && self.cfl_safety <= 1.0, "pide.cfl_safety must lie in (0, 1]"),
            (self.dt_max > 0.0, "pide.dt_max must be positive"),
            (self.z_cut > 0.0, "pide.z_cut must be positive"),
            (self.nz >= 2, "pide.nz must be at least 2"),
            (self.payoff_width > 0.0, "payoff.width must be positive"),
            (self.paths >= 2, "mc.paths must be at least 2"),
            (self.mc_dt > 0.0, "mc.dt must be positive"),
            (!self.points.is_empty(), "check.points must not be empty"),
            (self.fourier_tolerance > 0.0 && self.dpp_tolerance > 0.0 && self.mc_tolerance > 0.0, "check tolerances must be positive"),
            (self.inner_fraction > 0.0 && self.inner_fraction <= 1.0, "check.inner_fraction must lie in (0, 1]"),
            (self.audit_samples >= 1, "validate.samples must be at least 1"),
            (self.box_lo <= self.box_hi, "validate.box_lo must not exceed validate.box_hi"),
            (self.y_min < self.y_max, "transform.y_min must be below transform.y_max"),
            (self.y_points >= 2, "transform.points must be at least 2"),
            (self.quantile_tol > 0.0 && self.z_max > 0.0, "transform.tol and transform.z_max must be positive"),
            (self.transport_tolerance > 0.0, "transform.tolerance must be positive"),
            (self.thresholds.iter().all(|&y| y != 0.0), "transform.thresholds must be nonzero"),
            (!self.formats.is_empty(), "output.formats must not be empty"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return invalid(msg);
            }
        }
        Ok(())
    }
}
