//! Subcommand runners. Each returns a one-line summary for stdout.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sublevy::functions::Constant;
use sublevy::kou::{build_field, fourier_reference, LinearKouTriplet};
use sublevy::transform::transported_tail;
use sublevy::*;

use crate::config::{PayoffKind, RunConfig};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Numerical(#[from] sublevy::Error),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "CONFIG_INVALID",
            CliError::Io(_) => "IO_ERROR",
            CliError::Numerical(_) => "NUMERICAL_ERROR",
            CliError::Tolerance(_) => "TOLERANCE_FAILED",
        }
    }

    pub fn exit_status(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Tolerance(_) => 5,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Files written by one run. Unless `keep` is called, they are removed on
/// drop so that a failed run leaves no partial artifacts behind.
struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    keep: bool,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), keep: false })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        self.written.push(path.clone());
        let mut out = BufWriter::new(file);
        body(&mut out).and_then(|_| out.flush()).map_err(|e| io_err(&path, e))
    }

    fn keep(mut self) {
        self.keep = true;
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn payoff(cfg: &RunConfig) -> Box<dyn TestFunction> {
    match cfg.payoff {
        PayoffKind::Gaussian => Box::new(GaussianBump::new(cfg.payoff_center, cfg.payoff_width, cfg.payoff_height)),
        PayoffKind::SmoothBump => Box::new(SmoothBump::new(cfg.payoff_center, cfg.payoff_width, cfg.payoff_height)),
        PayoffKind::Constant => Box::new(Constant(cfg.payoff_value)),
    }
}

fn field(cfg: &RunConfig) -> Result<CoefficientField> {
    let spec = cfg.kou_spec();
    // a degenerate model needs one control only
    let resolution = if spec.is_degenerate() { 1 } else { cfg.resolution };
    Ok(build_field(&spec, resolution, QuadratureSpec::window(cfg.z_cut, cfg.nz))?)
}

fn grid(cfg: &RunConfig) -> Result<SpatialGrid> {
    Ok(SpatialGrid::new(cfg.x_min, cfg.x_max, cfg.nx)?)
}

fn options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions::default().safety(cfg.cfl_safety).dt_max(cfg.dt_max)
}

fn solve_pide(cfg: &RunConfig, field: &CoefficientField, horizon: f64) -> Result<ValueField> {
    let grid = grid(cfg)?;
    let psi = grid.sample(payoff(cfg).as_ref());
    Ok(sublevy::solve(field, &psi, horizon, &grid, &options(cfg))?)
}

fn inside(cfg: &RunConfig, x: f64) -> Result<()> {
    if x < cfg.x_min || x > cfg.x_max {
        return Err(CliError::Config(format!("point {x} lies outside [{}, {}]", cfg.x_min, cfg.x_max)));
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> Result<String> {
    let field = field(cfg)?;
    let u = solve_pide(cfg, &field, cfg.horizon)?;
    let mut art = Artifacts::open(&cfg.directory)?;
    art.write("u.csv", |w| u.write_csv(w))?;
    art.write("meta.txt", |w| write!(w, "{}", u.meta()))?;
    art.keep();
    let m = u.meta();
    Ok(format!("solve: {} steps of dt = {:.3e}, tail bound {:.2e}", m.steps, m.dt, m.tail_error_bound))
}

pub fn simulate(cfg: &RunConfig) -> Result<String> {
    inside(cfg, cfg.x0)?;
    let field = field(cfg)?;
    let u = solve_pide(cfg, &field, cfg.horizon)?;
    let psi = payoff(cfg);
    let cmp = mc_lower_bound(&field, &u, psi.as_ref(), cfg.x0, cfg.horizon, cfg.mc_dt, cfg.paths, cfg.seed)?;
    let mut art = Artifacts::open(&cfg.directory)?;
    art.write("mc.csv", |w| {
        writeln!(w, "x0,mean,stderr,pide_value")?;
        writeln!(w, "{},{},{},{}", cfg.x0, cmp.mean, cmp.stderr, cmp.pide_value)
    })?;
    art.keep();
    let line = format!("simulate: mc {:.6} +- {:.2e} vs pide {:.6}", cmp.mean, cmp.stderr, cmp.pide_value);
    if !cmp.is_lower_bound(cfg.mc_tolerance) {
        return Err(CliError::Tolerance(format!("{line}: mean exceeds pide + 3 stderr + {}", cfg.mc_tolerance)));
    }
    Ok(line)
}

pub fn validate(cfg: &RunConfig) -> Result<String> {
    let spec = cfg.kou_spec();
    let field = field(cfg)?;
    let audit_spec = spec.audit_spec(StateBox::interval(cfg.box_lo, cfg.box_hi));
    let audit = audit_conditions(&field, &audit_spec, cfg.audit_samples, cfg.seed)?;
    let mut report = String::new();
    let _ = writeln!(report, "samples = {}", audit.samples);
    let _ = writeln!(report, "lipschitz_constant_estimate = {:e}", audit.lipschitz_constant_estimate);
    let _ = writeln!(report, "jump_lipschitz_estimate = {:e}", audit.jump_lipschitz_estimate);
    let _ = writeln!(report, "drift_dispersion_sup = {:e}", audit.drift_dispersion_sup);
    let _ = writeln!(report, "jump_moment_sup = {:e}", audit.jump_moment_sup);
    let _ = writeln!(report, "violations = {}", audit.violations.len());
    for v in &audit.violations {
        let _ = writeln!(report, "violation {:?} at control {:?} x {:?}: {:e}", v.condition, v.witness.control, v.witness.x, v.witness.value);
    }
    let mut art = Artifacts::open(&cfg.directory)?;
    art.write("audit.txt", |w| w.write_all(report.as_bytes()))?;
    art.keep();
    if !audit.passed() {
        return Err(CliError::Tolerance(format!("validate: {} condition violations", audit.violations.len())));
    }
    Ok(format!("validate: {} samples, no violations", audit.samples))
}

pub fn fourier_check(cfg: &RunConfig) -> Result<String> {
    let spec = cfg.kou_spec();
    if !spec.is_degenerate() {
        return Err(CliError::Config("fourier-check needs a degenerate model (each interval a single point)".into()));
    }
    if cfg.payoff != PayoffKind::Gaussian {
        return Err(CliError::Config("fourier-check needs payoff.kind = gaussian".into()));
    }
    for &x in &cfg.points {
        inside(cfg, x)?;
    }
    let tri = LinearKouTriplet { b: cfg.b_lo, a: cfg.a_lo, lambda: cfg.lambda_lo };
    let psi = GaussianBump::new(cfg.payoff_center, cfg.payoff_width, cfg.payoff_height);
    let field = field(cfg)?;
    let u = solve_pide(cfg, &field, cfg.horizon)?;
    let mut rows = Vec::with_capacity(cfg.points.len());
    for &x0 in &cfg.points {
        let reference = fourier_reference(&tri, field.truncation(), &psi, cfg.horizon, x0)?;
        let pide = u.value_at(x0);
        rows.push((x0, pide, reference.value, (pide - reference.value).abs()));
    }
    let mut art = Artifacts::open(&cfg.directory)?;
    art.write("fourier.csv", |w| {
        writeln!(w, "x0,pide,fourier,diff")?;
        rows.iter().try_for_each(|r| writeln!(w, "{},{},{},{}", r.0, r.1, r.2, r.3))
    })?;
    art.keep();
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let line = format!("fourier-check: max |pide - fourier| = {worst:.3e} (tol {})", cfg.fourier_tolerance);
    if !(worst <= cfg.fourier_tolerance) {
        return Err(CliError::Tolerance(line));
    }
    Ok(line)
}

pub fn transform(cfg: &RunConfig) -> Result<String> {
    let tails = TailPair::new(cfg.kernel.tail(), cfg.kernel.tail(), cfg.reference.tail(), cfg.reference.tail());
    tails.validate()?;
    let opts = QuantileOptions { tol: cfg.quantile_tol, z_max: cfg.z_max };
    let n = cfg.y_points;
    let mut rows = Vec::with_capacity(n);
    let mut truncated = 0;
    for i in 0..n {
        let y = cfg.y_min + (cfg.y_max - cfg.y_min) * i as f64 / (n - 1) as f64;
        let q = quantile_k(&tails, y, &opts)?;
        truncated += q.truncated as usize;
        rows.push((y, q.z, q.truncated));
    }
    let err = verify_transport(&tails, &cfg.thresholds, &opts)?;
    let mut art = Artifacts::open(&cfg.directory)?;
    art.write("k.csv", |w| {
        writeln!(w, "y,k,truncated")?;
        rows.iter().try_for_each(|r| writeln!(w, "{},{},{}", r.0, r.1, r.2 as u8))
    })?;
    art.write("transport.csv", |w| {
        writeln!(w, "y,kernel_tail,transported_tail")?;
        for &y in &cfg.thresholds {
            let t = transported_tail(&tails, y, &opts).map_err(std::io::Error::other)?;
            writeln!(w, "{y},{},{t}", cfg.kernel.tail().eval(y.abs()))?;
        }
        Ok(())
    })?;
    art.keep();
    let line = format!("transform: {n} points, {truncated} truncated, transport error {err:.3e} (tol {})", cfg.transport_tolerance);
    if !(err <= cfg.transport_tolerance) {
        return Err(CliError::Tolerance(line));
    }
    Ok(line)
}

pub fn dpp_check(cfg: &RunConfig) -> Result<String> {
    let field = field(cfg)?;
    let half = 0.5 * cfg.horizon;
    let whole = solve_pide(cfg, &field, cfg.horizon)?;
    let first = solve_pide(cfg, &field, half)?;
    let continued = restart(&first, &field, half, cfg.horizon - half)?;
    let grid = whole.grid();
    let inner = grid.inner(cfg.inner_fraction);
    let mut art = Artifacts::open(&cfg.directory)?;
    art.write("dpp.csv", |w| {
        writeln!(w, "x,direct,restarted,diff")?;
        for i in inner.clone() {
            let (a, b) = (whole.terminal()[i], continued.terminal()[i]);
            writeln!(w, "{},{a},{b},{}", grid.node(i), (a - b).abs())?;
        }
        Ok(())
    })?;
    art.keep();
    let worst = inner.map(|i| (whole.terminal()[i] - continued.terminal()[i]).abs()).fold(0.0, f64::max);
    let line = format!("dpp-check: inner sup |direct - restarted| = {worst:.3e} (tol {})", cfg.dpp_tolerance);
    if !(worst <= cfg.dpp_tolerance) {
        return Err(CliError::Tolerance(line));
    }
    Ok(line)
}
