//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use sublevy::functions::{Logistic, SmoothBump};
use sublevy::kou::{build_field, clamped_jump, fourier_reference, verify_pushforward, KouSpec, LinearKouTriplet};
use sublevy::simulate::{ks_statistic, sample_paths};
use sublevy::*;

type Outcome = std::result::Result<String, String>;
type Criterion = fn() -> Result<Outcome>;

fn full_spec() -> KouSpec {
    KouSpec::intervals((0.0, 0.1), (0.1, 0.3), (1.0, 2.0), 2.0)
}

fn degenerate() -> LinearKouTriplet {
    LinearKouTriplet { b: 0.05, a: 0.2, lambda: 1.5 }
}

fn desk_quadrature() -> QuadratureSpec {
    QuadratureSpec::window(10.0, 401)
}

fn desk_grid() -> SpatialGrid {
    SpatialGrid::new(-10.0, 10.0, 801).expect("grid")
}

fn psi() -> GaussianBump {
    GaussianBump::new(0.0, 1.0, 1.0)
}

fn sup_diff(a: &[f64], b: &[f64], range: std::ops::Range<usize>) -> f64 {
    range.map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn linear_levy_reduction() -> Result<Outcome> {
    let start = Instant::now();
    let tri = degenerate();
    let field = build_field(&tri.spec(), 1, desk_quadrature())?;
    let grid = desk_grid();
    let u = solve(&field, &grid.sample(&psi()), 1.0, &grid, &SolveOptions::default())?;
    let mut worst = 0.0_f64;
    for x0 in [-1.0, 0.0, 1.0] {
        let reference = fourier_reference(&tri, field.truncation(), &psi(), 1.0, x0)?;
        worst = worst.max((u.value_at(x0) - reference.value).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(check(
        worst <= 1e-2 && secs <= 60.0,
        format!("max |pide - fourier| = {worst:.3e} (tol 1e-2), {secs:.1} s (limit 60 s)"),
    ))
}

fn controlled_drift() -> Result<Outcome> {
    let coeffs = ScalarCoefficients::new(|f, _| f[0], |_, _| 0.0, |_, _, _| 0.0);
    let field = CoefficientField::new(
        std::sync::Arc::new(coeffs),
        JumpReferenceMeasure::none(),
        TruncationFunction::default(),
        ControlGrid::uniform(&[-1.0], &[1.0], 5)?,
    )?;
    let grid = desk_grid();
    let psi = Logistic { center: 0.0, scale: 1.0, low: -1.0, high: 1.0 };
    let u = solve(&field, &grid.sample(&psi), 1.0, &grid, &SolveOptions::default())?;
    let exact: Vec<f64> = grid.nodes().iter().map(|x| psi.value1(x + 1.0)).collect();
    let err = sup_diff(u.terminal(), &exact, grid.inner(0.6));
    Ok(check(err <= 1e-2, format!("inner sup |u - psi(x + T)| = {err:.3e} (tol 1e-2)")))
}

fn semigroup_restart() -> Result<Outcome> {
    let field = build_field(&full_spec(), 2, desk_quadrature())?;
    let grid = desk_grid();
    let opts = SolveOptions::default();
    let psi = grid.sample(&psi());
    let whole = solve(&field, &psi, 1.0, &grid, &opts)?;
    let half = solve(&field, &psi, 0.5, &grid, &opts)?;
    let continued = restart(&half, &field, 0.5, 0.5)?;
    let err = sup_diff(whole.terminal(), continued.terminal(), grid.inner(0.6));
    Ok(check(err <= 2e-2, format!("inner sup |restart(T/2, T/2) - solve(T)| = {err:.3e} (tol 2e-2)")))
}

fn semigroup_axioms() -> Result<Outcome> {
    let grid = desk_grid();
    // one step size for every run so that only the control sets differ
    let opts = SolveOptions::default().dt_max(1e-3);
    let q = desk_quadrature();
    let full = build_field(&full_spec(), 3, q)?;
    let horizon = 0.5;

    let c = solve(&full, &grid.sample(&sublevy::functions::Constant(0.7)), horizon, &grid, &opts)?;
    let const_err = c.terminal().iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max);

    let low = grid.sample(&GaussianBump::new(0.0, 1.0, 1.0));
    let bump = grid.sample(&SmoothBump::new(1.0, 2.0, 0.5));
    let high: Vec<f64> = low.iter().zip(&bump).map(|(a, b)| a + b).collect();
    let u_low = solve(&full, &low, horizon, &grid, &opts)?;
    let u_bump = solve(&full, &bump, horizon, &grid, &opts)?;
    let u_high = solve(&full, &high, horizon, &grid, &opts)?;
    let mut mono = 0.0_f64;
    let mut sub = 0.0_f64;
    for k in 0..u_low.times().len() {
        for i in 0..grid.len() {
            mono = mono.max(u_low.at(k)[i] - u_high.at(k)[i]);
            sub = sub.max(u_high.at(k)[i] - u_low.at(k)[i] - u_bump.at(k)[i]);
        }
    }

    // nested uncertainty sets whose grid coefficients coincide
    let small = build_field(&KouSpec::intervals((0.0, 0.05), (0.1, 0.2), (1.0, 1.5), 2.0), 2, q)?;
    let point = build_field(&KouSpec::intervals((0.05, 0.05), (0.2, 0.2), (1.5, 1.5), 2.0), 1, q)?;
    let signed = grid.sample(&sublevy::functions::Sum(&GaussianBump::new(-1.0, 0.8, 1.0), &GaussianBump::new(1.5, 0.5, -0.6)));
    let u_full = solve(&full, &signed, horizon, &grid, &opts)?;
    let u_small = solve(&small, &signed, horizon, &grid, &opts)?;
    let u_point = solve(&point, &signed, horizon, &grid, &opts)?;
    let mut nested = 0.0_f64;
    for i in 0..grid.len() {
        nested = nested.max(u_small.terminal()[i] - u_full.terminal()[i]);
        nested = nested.max(u_point.terminal()[i] - u_small.terminal()[i]);
    }
    Ok(check(
        const_err <= 1e-12 && mono <= 1e-10 && sub <= 1e-2 && nested <= 1e-10,
        format!(
            "constants {const_err:.1e} (tol 1e-12), monotonicity {mono:.1e} (tol 1e-10), sublinearity {sub:.1e} (tol 1e-2), nested sets {nested:.1e} (tol 1e-10)"
        ),
    ))
}

fn generator_limit() -> Result<Outcome> {
    let field = build_field(&full_spec(), 2, desk_quadrature())?;
    let grid = SpatialGrid::new(-6.0, 6.0, 2401)?;
    let bumps = [SmoothBump::new(0.0, 2.5, 1.0), SmoothBump::new(0.4, 3.0, -0.8), SmoothBump::new(-0.5, 3.5, 1.5)];
    let mut worst_ratio = 0.0_f64;
    for phi in &bumps {
        let data = grid.sample(phi);
        let coarse = solve(&field, &data, 1e-2, &grid, &SolveOptions::default())?;
        let fine = solve(&field, &data, 1e-3, &grid, &SolveOptions::default())?;
        for x0 in [-1.0, 0.0, 1.0] {
            let (g, _) = hamiltonian_g(&field, phi, &[x0])?;
            let e_coarse = ((coarse.value_at(x0) - phi.value1(x0)) / 1e-2 - g).abs();
            let e_fine = ((fine.value_at(x0) - phi.value1(x0)) / 1e-3 - g).abs();
            worst_ratio = worst_ratio.max(e_fine / e_coarse);
        }
    }
    Ok(check(
        worst_ratio <= 0.5,
        format!("worst error ratio t=1e-3 vs t=1e-2 over 3 bumps x 3 points = {worst_ratio:.3} (limit 0.5)"),
    ))
}

fn pushforward_identity() -> Result<Outcome> {
    let thresholds = [-3.0, -1.0, -0.1, 0.1, 1.0, 3.0];
    let mut worst = 0.0_f64;
    for f3 in [0.0, 0.5, 1.0] {
        worst = worst.max(verify_pushforward(&full_spec(), &[0.0, 0.0, f3], 0.0, &thresholds)?);
    }
    Ok(check(worst <= 1e-8, format!("max tail error over lambda in {{1, 1.5, 2}} = {worst:.3e} (tol 1e-8)")))
}

fn kernel_transform() -> Result<Outcome> {
    let opts = QuantileOptions::default();
    let mut transport = 0.0_f64;
    for lambda in [1.0, 1.25, 1.5, 2.0] {
        let tails = TailPair::symmetric(Tail::exponential(lambda, 1.0), Tail::exponential(2.0, 1.0));
        transport = transport.max(verify_transport(&tails, &[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0], &opts)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut clamp = 0.0_f64;
    for _ in 0..1000 {
        let lambda = rng.random_range(1.0..=2.0);
        let y = rng.random_range(-6.0..6.0);
        let tails = TailPair::symmetric(Tail::exponential(lambda, 1.0), Tail::exponential(2.0, 1.0));
        clamp = clamp.max((quantile_k(&tails, y, &opts)?.z - clamped_jump(lambda, 2.0, y)).abs());
    }
    Ok(check(
        transport <= 1e-6 && clamp <= 1e-8,
        format!("transport error {transport:.3e} (tol 1e-6), clamp reproduction on 1000 pairs {clamp:.3e} (tol 1e-8)"),
    ))
}

fn monte_carlo() -> Result<Outcome> {
    let start = Instant::now();
    let grid = desk_grid();
    let data = grid.sample(&psi());

    let tri = degenerate();
    let field = build_field(&tri.spec(), 1, desk_quadrature())?;
    let u = solve(&field, &data, 1.0, &grid, &SolveOptions::default())?;
    let lin = mc_lower_bound(&field, &u, &psi(), 0.0, 1.0, 1e-3, 100_000, 11)?;

    let field = build_field(&full_spec(), 2, desk_quadrature())?;
    let u = solve(&field, &data, 1.0, &grid, &SolveOptions::default())?;
    let robust = mc_lower_bound(&field, &u, &psi(), 0.0, 1.0, 1e-3, 100_000, 12)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(check(
        lin.agrees(1e-2) && robust.is_lower_bound(1e-2) && secs <= 120.0,
        format!(
            "linear: mc {:.5} +- {:.1e} vs pide {:.5}; robust: mc {:.5} +- {:.1e} <= pide {:.5}; {secs:.1} s (limit 120 s)",
            lin.mean, lin.stderr, lin.pide_value, robust.mean, robust.stderr, robust.pide_value
        ),
    ))
}

fn symbol_limit() -> Result<Outcome> {
    let spec = full_spec();
    let field = build_field(&spec, 2, desk_quadrature())?;
    let state_box = StateBox::interval(-5.0, 5.0);
    let audit = audit_conditions(&field, &spec.audit_spec(state_box.clone()), 2000, 5)?;
    let bound = audit.coefficient_sup();
    let radii = [1e-1, 1e-2, 1e-3];
    let sups: Vec<f64> = radii
        .iter()
        .map(|&r| small_symbol_sup(&field, r, &state_box, 2000, 9))
        .collect::<Result<_>>()?;
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let bounded = sups.iter().zip(radii).all(|(s, r)| *s <= 2.0 * r * bound);
    Ok(check(
        decreasing && bounded,
        format!(
            "sup |q| = {:.3e}, {:.3e}, {:.3e} at r = 1e-1, 1e-2, 1e-3; 2r bound = {:.3e}, {:.3e}, {:.3e}",
            sups[0],
            sups[1],
            sups[2],
            0.2 * bound,
            0.02 * bound,
            0.002 * bound
        ),
    ))
}

fn jump_law() -> Result<Outcome> {
    // f = 0 gives lambda = 1 against lambda* = 2: half the marks hit the zero atom
    let field = build_field(&full_spec(), 2, desk_quadrature())?;
    let policy = PolicySchedule::constant(ControlId(0));
    let paths = sample_paths(&field, &policy, 0.0, 1.0, 0.05, 3000, 31)?;
    let sizes: Vec<f64> = paths.iter().flat_map(|p| p.jumps.iter().map(|j| j.size)).take(10_000).collect();
    if sizes.len() < 10_000 {
        return Ok(Err(format!("only {} jumps sampled", sizes.len())));
    }
    let n = sizes.len() as f64;
    let zeros = sizes.iter().filter(|&&k| k == 0.0).count() as f64;
    let p0 = 0.5;
    let atom_z = (zeros / n - p0).abs() / (p0 * (1.0 - p0) / n).sqrt();

    // conditional law off the atom: symmetric unit exponential
    let nonzero: Vec<f64> = sizes.iter().copied().filter(|&k| k != 0.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let reference: Vec<f64> = (0..nonzero.len())
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            if rng.random::<bool>() {
                e
            } else {
                -e
            }
        })
        .collect();
    let d = ks_statistic(&nonzero, &reference);
    let m = nonzero.len() as f64;
    let critical = 1.628 * ((m + m) / (m * m)).sqrt();
    Ok(check(
        atom_z <= 2.576 && d <= critical,
        format!("zero-atom z score {atom_z:.2} (limit 2.576), KS {d:.4} (1% critical {critical:.4}) on {} samples", sizes.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("linear Levy reduction", linear_levy_reduction),
        ("controlled drift HJB", controlled_drift),
        ("semigroup restart", semigroup_restart),
        ("semigroup axioms", semigroup_axioms),
        ("generator limit", generator_limit),
        ("push-forward identity", pushforward_identity),
        ("kernel transform", kernel_transform),
        ("Monte Carlo consistency", monte_carlo),
        ("symbol small limit", symbol_limit),
        ("jump law", jump_law),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let line = match run() {
            Ok(Ok(detail)) => format!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Ok(Err(detail)) => {
                failed += 1;
                format!("criterion {:>2} FAIL  {name}: {detail}", i + 1)
            }
            Err(e) => {
                failed += 1;
                format!("criterion {:>2} FAIL  {name}: error: {e}", i + 1)
            }
        };
        println!("{line}");
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
