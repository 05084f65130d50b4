//! The five subcommands. Every run that gets as far as a parsed config writes
//! `manifest.txt` into the output directory, whatever the outcome.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use quasilin_core::coeffs::PairSamples;
use quasilin_core::diag::{EllipticFamily, MeshFamily, Quantity};
use quasilin_core::evolve::EvolutionError;
use quasilin_core::io::{field_csv, trajectory_csv, vtk_string};
use quasilin_core::reference::RobinSeriesSquare;
use quasilin_core::*;

use crate::config::Config;
use crate::scenario::{self, expr, BoundaryMode, Scenario};
use crate::CliError;

pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub command: &'static str,
}

/// Plain-text run record.
#[derive(Default)]
struct Manifest {
    entries: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl Manifest {
    fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn mesh(&mut self, mesh: &Mesh64) {
        self.set("mesh", mesh.stats());
        self.set("mesh_size", g(mesh.mesh_size()));
    }

    fn solver(&mut self, o: &SolverOptions, mode: MassMode) {
        self.set("solver.tol", g(o.tol));
        self.set("solver.max_newton", o.max_newton);
        self.set("solver.max_picard", o.max_picard);
        self.set("solver.armijo", g(o.armijo_factor));
        self.set("solver.max_halvings", o.max_halvings);
        self.set("solver.theta", g(o.picard_theta));
        self.set("solver.linear_tol", g(o.linear_tol));
        self.set("solver.strategy", format!("{:?}", o.strategy).to_lowercase());
        self.set("solver.smoothing_rounds", o.smoothing_rounds);
        self.set("solver.smoothing_sweeps", o.smoothing_sweeps);
        self.set("solver.mass", if mode.is_lumped() { "lumped" } else { "consistent" });
    }
}

/// Floats are written with 17 significant digits.
fn g(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| g(x)).collect::<Vec<_>>().join(", ")
}

fn write(ctx: &Context, m: &mut Manifest, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::write(ctx.out.join(name), contents)?;
    m.outputs.push(name.to_string());
    Ok(())
}

fn execute(ctx: &Context, body: impl FnOnce(&Context, &mut Manifest) -> Result<(), CliError>) -> Result<(), CliError> {
    std::fs::create_dir_all(&ctx.out)?;
    let mut m = Manifest::default();
    let result = body(ctx, &mut m);
    let mut s = String::from("quasilin run manifest\n");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command = {}", ctx.command);
    let _ = writeln!(s, "config_sha256 = {}", ctx.cfg.hash);
    let _ = writeln!(s, "seed = {}", ctx.seed);
    let _ = writeln!(s, "threads = {}", ctx.threads.map_or("default".to_string(), |n| n.to_string()));
    for (k, v) in &m.entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    for (sec, k, v) in ctx.cfg.entries() {
        let _ = writeln!(s, "config.{sec}.{k} = {v}");
    }
    let _ = writeln!(s, "outputs = {}", m.outputs.join(", "));
    let _ = writeln!(s, "status = {}", match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => e.to_string(),
    });
    std::fs::write(ctx.out.join("manifest.txt"), s)?;
    result
}

fn report_solve(s: &mut String, r: &SolveReport) {
    let _ = writeln!(s, "converged = {}", r.converged);
    let _ = writeln!(s, "method = {}", r.method);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    let _ = writeln!(s, "newton_iterations = {}", r.newton_iterations);
    let _ = writeln!(s, "picard_iterations = {}", r.picard_iterations);
    let _ = writeln!(s, "linear_iterations = {}", r.linear_iterations);
    let _ = writeln!(s, "smoothing_sweeps = {}", r.smoothing_sweeps);
    let _ = writeln!(s, "final_residual = {}", g(r.final_residual));
    let _ = writeln!(s, "residual_history = {}", join(&r.residual_history));
}

fn norms(s: &mut String, prefix: &str, f: &DiscreteField64) -> Result<(), CliError> {
    let _ = writeln!(s, "{prefix}_l2 = {}", g(lq_norm(f, 2.0, Region::Domain)?));
    let _ = writeln!(s, "{prefix}_max = {}", g(lq_norm(f, f64::INFINITY, Region::Domain)?));
    let _ = writeln!(s, "{prefix}_boundary_l2 = {}", g(lq_norm(f, 2.0, Region::Boundary)?));
    Ok(())
}

pub fn solve_elliptic(ctx: &Context) -> Result<(), CliError> {
    execute(ctx, |ctx, m| {
        let sc = scenario::build(&ctx.cfg)?;
        if sc.boundary == BoundaryMode::Wentzell {
            return Err(CliError::Config("wentzell boundary conditions are dynamic; use solve-parabolic".into()));
        }
        describe(m, &sc);
        let exact = expr(&ctx.cfg, "reference", "exact", &["x", "y"])?;
        let (u, rep) = solve_elliptic_problem(&sc)?;
        let mut report = String::new();
        report_solve(&mut report, &rep);
        norms(&mut report, "norm", &u)?;
        let mut scalars: Vec<(&str, &[f64])> = vec![("u", &u.values)];
        let diff: Vec<f64>;
        if let Some(e) = &exact {
            diff = u.mesh.vertices.iter().zip(&u.values).map(|(x, v)| v - e.eval(&[x[0], x[1]])).collect();
            let d = u.with_values(diff.clone())?;
            norms(&mut report, "error", &d)?;
            scalars.push(("error", &diff));
        }
        if ctx.cfg.bool_or("output", "vtk", true)? {
            write(ctx, m, "solution.vtk", &vtk_string(&u.mesh, &scalars))?;
        }
        if ctx.cfg.bool_or("output", "csv", true)? {
            write(ctx, m, "solution.csv", &field_csv(&u))?;
        }
        write(ctx, m, "report.txt", &report)
    })
}

fn solve_elliptic_problem(sc: &Scenario) -> Result<(DiscreteField64, SolveReport), CliError> {
    Ok(quasilin_core::solve_elliptic(sc.mesh.clone(), &sc.coeffs, sc.mass_mode, None, &sc.solver)?)
}

fn describe(m: &mut Manifest, sc: &Scenario) {
    m.set("family", &sc.family);
    m.set("p", g(sc.p));
    m.set("boundary", sc.boundary.name());
    m.mesh(&sc.mesh);
    m.solver(&sc.solver, sc.mass_mode);
}

/// Evolution settings, initial state and the optional series reference.
struct Evolution {
    config: EvolutionConfig64,
    u0: DiscreteField64,
    forced: bool,
    series: Option<RobinSeriesSquare>,
}

fn evolution(cfg: &Config, sc: &Scenario) -> Result<Evolution, CliError> {
    let t_final = cfg.f64_or("evolution", "t_final", 0.1)?;
    let steps = cfg.usize_or("evolution", "steps", 100)?;
    let stride = cfg.usize_or("evolution", "stride", 1)?;
    let mut config = EvolutionConfig::new(t_final, steps).with_stride(stride).with_mass_mode(sc.mass_mode).with_solver(sc.solver);
    config.validate()?;
    let forcing = expr(cfg, "evolution", "forcing", &["t", "x", "y"])?;
    let forced = forcing.is_some();
    if let Some(f) = forcing {
        config = config.with_forcing(move |t, x: [f64; 2]| f.eval(&[t, x[0], x[1]]));
    }
    if sc.boundary == BoundaryMode::Wentzell {
        let beta = sc.coeffs.beta.clone().ok_or_else(|| CliError::Config("wentzell mode requires [boundary] beta".into()))?;
        config = config.with_wentzell(beta);
    }
    let series = reference_series(cfg, sc, forced)?;
    let initial = expr(cfg, "evolution", "initial", &["x", "y"])?;
    let u0 = match (&initial, &series) {
        (Some(e), _) => DiscreteField::from_fn(sc.mesh.clone(), |x: [f64; 2]| e.eval(&[x[0], x[1]]))?,
        (None, Some(_)) => {
            let fx = expr(cfg, "reference", "x_factor", &["x"])?.expect("checked by reference_series");
            let fy = expr(cfg, "reference", "y_factor", &["y"])?.expect("checked by reference_series");
            DiscreteField::from_fn(sc.mesh.clone(), |x: [f64; 2]| fx.eval(&[x[0]]) * fy.eval(&[x[1]]))?
        }
        (None, None) => return Err(CliError::Config("[evolution] initial is required".into())),
    };
    Ok(Evolution { config, u0, forced, series })
}

/// Separated Fourier-Robin series for the linear Robin heat equation on the
/// unit square with constant `h0`.
fn reference_series(cfg: &Config, sc: &Scenario, forced: bool) -> Result<Option<RobinSeriesSquare>, CliError> {
    match cfg.str("reference", "series") {
        None => Ok(None),
        Some("fourier_robin") => {
            let bad = |why: &str| CliError::Config(format!("fourier_robin reference needs {why}"));
            if sc.p != 2.0 || sc.family == "rotation" {
                return Err(bad("a linear problem (p = 2)"));
            }
            if cfg.str("coefficients", "a0").is_some_and(|a| a.trim() != "1") {
                return Err(bad("a0 = 1"));
            }
            if forced || sc.coeffs.source.is_some() || sc.coeffs.boundary_load.is_some() || sc.coeffs.omega != 0.0 {
                return Err(bad("no forcing, loads or omega term"));
            }
            if cfg.str("coefficients", "b0").is_some_and(|b| b.trim() != "0") || cfg.str("coefficients", "reaction").is_some() {
                return Err(bad("b0 = 0"));
            }
            if cfg.str("coefficients", "boundary_reaction").is_some() || sc.boundary == BoundaryMode::Wentzell {
                return Err(bad("a Robin or Neumann boundary with constant h0"));
            }
            if cfg.str_or("mesh", "generator", "unit_square") != "unit_square" {
                return Err(bad("the unit square mesh"));
            }
            let h = match (sc.boundary, cfg.str("coefficients", "h0")) {
                (BoundaryMode::Neumann, _) => 0.0,
                (_, None) => 1.0,
                (_, Some(v)) => v.trim().parse::<f64>().map_err(|_| bad("a numeric h0"))?,
            };
            let fx = expr(cfg, "reference", "x_factor", &["x"])?.ok_or_else(|| bad("[reference] x_factor"))?;
            let fy = expr(cfg, "reference", "y_factor", &["y"])?.ok_or_else(|| bad("[reference] y_factor"))?;
            let modes = cfg.usize_or("reference", "modes", 50)?;
            Ok(Some(RobinSeriesSquare::new(h, |x| fx.eval(&[x]), |y| fy.eval(&[y]), modes)?))
        }
        Some(other) => Err(CliError::Config(format!("unknown reference series '{other}' (expected fourier_robin)"))),
    }
}

pub fn solve_parabolic(ctx: &Context) -> Result<(), CliError> {
    execute(ctx, |ctx, m| {
        let sc = scenario::build(&ctx.cfg)?;
        describe(m, &sc);
        let ev = evolution(&ctx.cfg, &sc)?;
        m.set("evolution.t_final", g(ev.config.t_final));
        m.set("evolution.steps", ev.config.n_steps);
        m.set("evolution.dt", g(ev.config.dt()));
        m.set("evolution.stride", ev.config.stride);
        let traj = match evolve(&ev.u0, &sc.coeffs, &ev.config) {
            Ok(t) => t,
            Err(EvolutionError::Step { step, source, partial }) => {
                if !partial.is_empty() {
                    write(ctx, m, "trajectory_partial.csv", &trajectory_csv(&partial))?;
                }
                return Err(CliError::Solver(format!("time step {step} failed: {source}")));
            }
            Err(EvolutionError::Setup(e)) => return Err(e.into()),
        };
        let mass = ev.config.mass(&sc.mesh, &sc.coeffs)?;
        let weights = mass.row_sums();
        let conserved: Vec<f64> = traj.fields.iter().map(|f| weights.iter().zip(&f.values).map(|(w, u)| w * u).sum()).collect();
        let drift = conserved.iter().map(|q| (q - conserved[0]).abs()).fold(0.0, f64::max);

        let mut history = String::from("index,time,max_norm,conserved\n");
        for (k, (t, f)) in traj.times.iter().zip(&traj.fields).enumerate() {
            let _ = writeln!(history, "{k},{},{},{}", g(*t), g(f.max_abs()), g(conserved[k]));
        }
        let mut steps = String::from("step,iterations,final_residual,method\n");
        for (k, r) in traj.reports.iter().enumerate() {
            let _ = writeln!(steps, "{},{},{},{}", k + 1, r.iterations, g(r.final_residual), r.method);
        }

        let mut report = String::new();
        let _ = writeln!(report, "steps = {}", traj.reports.len());
        let _ = writeln!(report, "final_time = {}", g(traj.final_time()));
        let _ = writeln!(report, "total_iterations = {}", traj.reports.iter().map(|r| r.iterations).sum::<usize>());
        let _ = writeln!(report, "max_step_residual = {}", g(traj.reports.iter().map(|r| r.final_residual).fold(0.0, f64::max)));
        let label = if sc.boundary == BoundaryMode::Wentzell { "domain plus beta-weighted boundary integral" } else { "domain integral" };
        let _ = writeln!(report, "conserved_quantity = {label}");
        let _ = writeln!(report, "conserved_initial = {}", g(conserved[0]));
        let _ = writeln!(report, "conserved_drift = {}", g(drift));
        if !ev.forced {
            let d = linf_decay_check(&traj);
            let _ = writeln!(report, "max_norm_nonincreasing = {}", d.passed);
            let _ = writeln!(report, "max_norm_violation = {}", g(d.max_violation));
        }
        norms(&mut report, "final_norm", traj.final_field())?;
        let fin = traj.final_field();
        let mut scalars: Vec<(&str, &[f64])> = vec![("u", &fin.values)];
        let reference: Vec<f64>;
        if let Some(series) = &ev.series {
            let t = traj.final_time();
            reference = fin.mesh.vertices.iter().map(|&x| series.eval(t, x)).collect();
            let err = reference.iter().zip(&fin.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let _ = writeln!(report, "reference = fourier_robin");
            let _ = writeln!(report, "reference_modes = {}", series.x.eigenvalues.len());
            let _ = writeln!(report, "reference_max_error = {}", g(err));
            scalars.push(("reference", &reference));
        }
        if ctx.cfg.bool_or("output", "csv", true)? {
            write(ctx, m, "trajectory.csv", &trajectory_csv(&traj))?;
            write(ctx, m, "history.csv", &history)?;
            write(ctx, m, "steps.csv", &steps)?;
        }
        if ctx.cfg.bool_or("output", "vtk", true)? {
            write(ctx, m, "final.vtk", &vtk_string(&fin.mesh, &scalars))?;
        }
        write(ctx, m, "report.txt", &report)
    })
}

pub fn check_coefficients(ctx: &Context) -> Result<(), CliError> {
    execute(ctx, |ctx, m| {
        let cfg = &ctx.cfg;
        let mode = scenario::boundary_mode(cfg)?;
        let (c, family, p) = scenario::build_coefficients(cfg, mode, false)?;
        m.set("family", &family);
        m.set("p", g(p));
        let mut report = String::new();
        let mut ok = true;
        let _ = writeln!(report, "family = {family}");
        let _ = writeln!(report, "p = {}", g(p));
        let _ = writeln!(report, "declared_nu = {}", g(c.structure.nu));
        let _ = writeln!(report, "declared_mu = {}", g(c.structure.mu));

        match scenario::build_coefficients(cfg, mode, true) {
            Ok(_) => {
                let _ = writeln!(report, "parameters = pass");
            }
            Err(CliError::Config(msg)) => {
                ok = false;
                let _ = writeln!(report, "parameters = fail: {msg}");
            }
            Err(e) => return Err(e),
        }

        let grid_k = cfg.usize_or("checks", "grid", 6)?;
        let magnitudes = cfg.list::<f64>("checks", "magnitudes")?.unwrap_or_else(|| vec![0.5, 2.0, 8.0]);
        let grid = SampleGrid::standard(grid_k, &magnitudes);
        m.set("checks.grid", grid_k);
        m.set("checks.magnitudes", join(&magnitudes));
        let st = check_structure(&c, &grid)?;
        let _ = writeln!(report, "structure_samples = {}", grid.len());
        let _ = writeln!(report, "structure.psi_nonnegative = {}", st.psi_nonnegative);
        for chk in &st.checks {
            let _ = writeln!(
                report,
                "structure.{} = {} (samples {}, worst margin {}, at {})",
                chk.name,
                if chk.passed { "pass" } else { "fail" },
                chk.samples,
                g(chk.worst_margin),
                chk.worst_sample.as_deref().unwrap_or("-")
            );
        }
        ok &= st.passed();

        if let Some(model) = &c.radial {
            let k = cfg.usize_or("checks", "radial_points", 10)?;
            let ymax = cfg.f64_or("checks", "radial_max", 10.0)?;
            let ny = cfg.usize_or("checks", "radial_samples", 1001)?;
            if k == 0 || ny < 2 || !(ymax > 0.0) {
                return Err(CliError::Config("radial check needs radial_points >= 1, radial_samples >= 2 and radial_max > 0".into()));
            }
            let xs: Vec<[f64; 2]> = (0..k).map(|i| [(i as f64 + 0.5) / k as f64, 0.5]).collect();
            let ys: Vec<f64> = (0..ny).map(|j| ymax * j as f64 / (ny - 1) as f64).collect();
            let r = check_monotone_radial(model, &xs, &ys)?;
            monotone_lines(&mut report, &r);
            ok &= r.passed();
        }
        let samples = cfg.usize_or("checks", "samples", 10_000)?;
        let magnitude = cfg.f64_or("checks", "magnitude", 4.0)?;
        m.set("checks.samples", samples);
        m.set("checks.magnitude", g(magnitude));
        let pairs = PairSamples::random(ctx.seed, samples, magnitude);
        let r = check_monotone_pairwise(&c, &pairs)?;
        monotone_lines(&mut report, &r);
        ok &= r.passed();
        let _ = writeln!(report, "result = {}", if ok { "pass" } else { "fail" });
        write(ctx, m, "check_report.txt", &report)?;
        if ok {
            Ok(())
        } else {
            Err(CliError::Checks("see check_report.txt".into()))
        }
    })
}

fn monotone_lines(report: &mut String, r: &quasilin_core::coeffs::MonotonicityReport) {
    for chk in &r.checks {
        let _ = writeln!(
            report,
            "monotonicity.{} = {} (samples {}, smallest value {}, witness {})",
            chk.name,
            chk.verdict(),
            chk.samples,
            g(chk.worst_value),
            chk.witness.as_deref().unwrap_or("-")
        );
    }
}

pub fn study(ctx: &Context) -> Result<(), CliError> {
    execute(ctx, |ctx, m| {
        let cfg = &ctx.cfg;
        let kind = cfg.str("study", "kind").ok_or_else(|| CliError::Config("[study] kind is required (refinement, crandall_liggett or semigroup)".into()))?;
        m.set("study.kind", kind);
        match kind {
            "refinement" => refinement(ctx, m),
            "crandall_liggett" => crandall_liggett(ctx, m),
            "semigroup" => semigroup(ctx, m),
            other => Err(CliError::Config(format!("unknown study kind '{other}' (expected refinement, crandall_liggett or semigroup)"))),
        }
    })
}

fn refinement(ctx: &Context, m: &mut Manifest) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mode = scenario::boundary_mode(cfg)?;
    if mode == BoundaryMode::Wentzell {
        return Err(CliError::Config("refinement studies solve the stationary problem; wentzell mode is not available".into()));
    }
    let (coeffs, family, p) = scenario::build_coefficients(cfg, mode, true)?;
    let (solver, mass_mode) = scenario::solver_options(cfg)?;
    let base = cfg.usize_or("study", "base", 2)?;
    let meshes = match cfg.str_or("study", "family", "unit_square") {
        "unit_square" => MeshFamily::UnitSquare { base },
        "l_shape" => MeshFamily::LShape { base },
        other => return Err(CliError::Config(format!("unknown mesh family '{other}' (expected unit_square or l_shape)"))),
    };
    let levels = cfg.usize("study", "levels")?.ok_or_else(|| CliError::Config("[study] levels is required".into()))?;
    if levels < 2 {
        return Err(CliError::Config(format!("[study] levels = {levels}: a refinement study needs at least 2 levels")));
    }
    let quantity = match cfg.str_or("study", "quantity", "hoelder") {
        "hoelder" => Quantity::Hoelder {
            alpha: cfg.f64_or("study", "alpha", 0.25)?,
            pair_budget: cfg.usize_or("study", "pair_budget", 2_000_000)?,
        },
        "error" => Quantity::Error,
        "contraction" => Quantity::Contraction { norm: NormKind::parse(cfg.str_or("study", "norm", "2"))? },
        other => return Err(CliError::Config(format!("unknown study quantity '{other}' (expected hoelder, error or contraction)"))),
    };
    let mut fam = EllipticFamily::new(meshes, coeffs);
    fam.mass_mode = mass_mode;
    fam.solver = solver;
    fam.seed = ctx.seed;
    if let Some(e) = expr(cfg, "reference", "exact", &["x", "y"])? {
        fam = fam.with_exact(move |x: [f64; 2]| e.eval(&[x[0], x[1]]));
    } else if quantity == Quantity::Error {
        return Err(CliError::Config("an error study needs [reference] exact".into()));
    }
    m.set("family", family);
    m.set("p", g(p));
    m.set("boundary", mode.name());
    m.set("study.levels", levels);
    m.set("study.base", base);
    m.set("study.quantity", format!("{quantity:?}"));
    m.solver(&solver, mass_mode);
    let table = refinement_study(&fam, levels, quantity)?;
    for r in &table.rows {
        m.set(&format!("mesh.level{}", r.level), format!("vertices={} h={}", r.vertices, g(r.h)));
    }
    write(ctx, m, "study.csv", &table.to_csv())?;
    let variation = table.relative_variation();
    let mut summary = format!("relative_variation = {}\n", g(variation));
    let limit = cfg.f64("study", "max_variation")?;
    if let Some(limit) = limit {
        let _ = writeln!(summary, "max_variation = {}\nbounded = {}", g(limit), variation <= limit);
    }
    write(ctx, m, "study_summary.txt", &summary)?;
    match limit {
        Some(limit) if variation > limit => Err(CliError::Checks(format!("relative variation {variation:e} exceeds {limit:e}"))),
        _ => Ok(()),
    }
}

fn step_list(cfg: &Config, default: &[usize]) -> Result<Vec<usize>, CliError> {
    let list = cfg.list::<usize>("study", "n_list")?.unwrap_or_else(|| default.to_vec());
    if list.is_empty() {
        return Err(CliError::Config("[study] n_list is empty".into()));
    }
    if list.windows(2).any(|w| w[1] <= w[0]) || list[0] == 0 {
        return Err(CliError::Config("[study] n_list must be positive and strictly increasing".into()));
    }
    Ok(list)
}

fn crandall_liggett(ctx: &Context, m: &mut Manifest) -> Result<(), CliError> {
    let sc = scenario::build(&ctx.cfg)?;
    describe(m, &sc);
    let ev = evolution(&ctx.cfg, &sc)?;
    let n_list = step_list(&ctx.cfg, &[4, 8, 16, 32])?;
    let t = ctx.cfg.f64_or("study", "t", ev.config.t_final)?;
    m.set("study.t", g(t));
    m.set("study.n_list", n_list.iter().map(usize::to_string).collect::<Vec<_>>().join(", "));
    let table = crandall_liggett_probe(&ev.u0, &sc.coeffs, &ev.config, t, &n_list)?;
    let mut csv = String::from("n_coarse,n_fine,diff_mass,diff_max,observed_order\n");
    for r in &table.rows {
        let order = r.order_max.map(g).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", r.n_coarse, r.n_fine, g(r.diff_mass), g(r.diff_max), order);
    }
    write(ctx, m, "study.csv", &csv)?;
    let decreasing = table.strictly_decreasing();
    let summary = format!(
        "strictly_decreasing = {decreasing}\nmin_observed_order = {}\n",
        table.min_order().map(g).unwrap_or_else(|| "-".into())
    );
    write(ctx, m, "study_summary.txt", &summary)?;
    if decreasing {
        Ok(())
    } else {
        Err(CliError::Checks("step-count differences are not strictly decreasing".into()))
    }
}

fn semigroup(ctx: &Context, m: &mut Manifest) -> Result<(), CliError> {
    let sc = scenario::build(&ctx.cfg)?;
    describe(m, &sc);
    let ev = evolution(&ctx.cfg, &sc)?;
    let n_list = step_list(&ctx.cfg, &[32, 64])?;
    let t = ctx.cfg.f64_or("study", "t", 0.05)?;
    let s = ctx.cfg.f64_or("study", "s", 0.05)?;
    m.set("study.t", g(t));
    m.set("study.s", g(s));
    let mut csv = String::from("n,defect,defect_max\n");
    let mut defects = Vec::new();
    for &n in &n_list {
        let r = semigroup_property_check(&ev.u0, &sc.coeffs, t, s, &ev.config.rescaled(t + s, n))?;
        let _ = writeln!(csv, "{n},{},{}", g(r.defect), g(r.defect_max));
        defects.push(r.defect);
    }
    write(ctx, m, "study.csv", &csv)?;
    let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
    write(ctx, m, "study_summary.txt", &format!("defect_decreasing = {decreasing}\n"))?;
    if decreasing || defects.iter().all(|&d| d == 0.0) {
        Ok(())
    } else {
        Err(CliError::Checks("semigroup defect does not decrease with the step count".into()))
    }
}

pub fn export_mesh(ctx: &Context) -> Result<(), CliError> {
    execute(ctx, |ctx, m| {
        let mesh: Arc<Mesh64> = scenario::build_mesh(&ctx.cfg)?;
        m.mesh(&mesh);
        m.set("delaunay", mesh.is_delaunay());
        write(ctx, m, "mesh.vtk", &vtk_string(&mesh, &[]))?;
        write(ctx, m, "mesh.txt", &mesh.to_text())
    })
}
