//! Turns a [`Config`] into meshes, coefficients and solver settings.

use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use quasilin_core::coeffs::{FnBoundaryReaction, FnFlux, FnReaction, ScalarField};
use quasilin_core::expr::Expr;
use quasilin_core::*;

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Neumann,
    Robin,
    Wentzell,
}

impl BoundaryMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::Neumann => "neumann",
            BoundaryMode::Robin => "robin",
            BoundaryMode::Wentzell => "wentzell",
        }
    }
}

/// Everything a run needs, resolved from the config.
pub struct Scenario {
    pub mesh: Arc<Mesh64>,
    pub coeffs: CoefficientSet64,
    pub boundary: BoundaryMode,
    pub mass_mode: MassMode,
    pub solver: SolverOptions,
    pub family: String,
    pub p: f64,
}

pub fn expr(cfg: &Config, section: &str, key: &str, vars: &[&str]) -> Result<Option<Expr>, CliError> {
    cfg.str(section, key)
        .map(|src| Expr::parse(src, vars).map_err(|e| CliError::Config(format!("[{section}] {key}: {e}"))))
        .transpose()
}

/// Scalar field of `(x, y)` from an expression key, or the constant `default`.
fn field_xy(cfg: &Config, key: &str, default: f64) -> Result<(ScalarField<f64>, bool), CliError> {
    Ok(match expr(cfg, "coefficients", key, &["x", "y"])? {
        Some(e) => (Arc::new(move |x: [f64; 2]| e.eval(&[x[0], x[1]])), true),
        None => (Arc::new(move |_| default), false),
    })
}

pub fn build_mesh(cfg: &Config) -> Result<Arc<Mesh64>, CliError> {
    let generator = cfg.str_or("mesh", "generator", "unit_square");
    let n = cfg.usize_or("mesh", "n", 16)?;
    let mut mesh = match generator {
        "unit_square" => Mesh::unit_square(n)?,
        "l_shape" => Mesh::l_shape(n)?,
        "file" => {
            let rel = cfg.str("mesh", "file").ok_or_else(|| CliError::Config("[mesh] generator = file needs a 'file' key".into()))?;
            let path = cfg.base_dir.join(rel);
            let f = File::open(&path).map_err(|e| CliError::Config(format!("cannot open mesh file {}: {e}", path.display())))?;
            Mesh::read_text(BufReader::new(f)).map_err(|e| CliError::Config(format!("mesh file {}: {e}", path.display())))?
        }
        other => return Err(CliError::Config(format!("unknown mesh generator '{other}' (expected unit_square, l_shape or file)"))),
    };
    for _ in 0..cfg.usize_or("mesh", "refine", 0)? {
        mesh = mesh.refine_uniform();
    }
    Ok(Arc::new(mesh))
}

pub fn boundary_mode(cfg: &Config) -> Result<BoundaryMode, CliError> {
    let mode = match cfg.str_or("boundary", "mode", "robin") {
        "neumann" => BoundaryMode::Neumann,
        "robin" => BoundaryMode::Robin,
        "wentzell" => BoundaryMode::Wentzell,
        other => return Err(CliError::Config(format!("unknown boundary mode '{other}' (expected neumann, robin or wentzell)"))),
    };
    let has_beta = cfg.str("boundary", "beta").is_some();
    if mode == BoundaryMode::Wentzell && !has_beta {
        return Err(CliError::Config("wentzell boundary mode requires [boundary] beta".into()));
    }
    if mode != BoundaryMode::Wentzell && has_beta {
        return Err(CliError::Config(format!("[boundary] beta is only used in wentzell mode, not {}", mode.name())));
    }
    if mode == BoundaryMode::Neumann && (cfg.str("coefficients", "h0").is_some() || cfg.str("coefficients", "boundary_reaction").is_some()) {
        return Err(CliError::Config("neumann boundary mode takes no boundary reaction (h0 or boundary_reaction)".into()));
    }
    Ok(mode)
}

pub fn solver_options(cfg: &Config) -> Result<(SolverOptions, MassMode), CliError> {
    let d = SolverOptions::default();
    let strategy = match cfg.str_or("solver", "strategy", "auto") {
        "auto" => Strategy::Auto,
        "newton" => Strategy::Newton,
        "picard" => Strategy::Picard,
        other => return Err(CliError::Config(format!("unknown solver strategy '{other}' (expected auto, newton or picard)"))),
    };
    let mass = match cfg.str_or("solver", "mass", "lumped") {
        "lumped" => MassMode::Lumped,
        "consistent" => MassMode::Consistent,
        other => return Err(CliError::Config(format!("unknown mass mode '{other}' (expected lumped or consistent)"))),
    };
    let opts = SolverOptions {
        tol: cfg.f64_or("solver", "tol", d.tol)?,
        max_newton: cfg.usize_or("solver", "max_newton", d.max_newton)?,
        max_picard: cfg.usize_or("solver", "max_picard", d.max_picard)?,
        armijo_factor: cfg.f64_or("solver", "armijo", d.armijo_factor)?,
        max_halvings: cfg.usize_or("solver", "max_halvings", d.max_halvings)?,
        linear_tol: cfg.f64_or("solver", "linear_tol", d.linear_tol)?,
        strategy,
        ..d
    };
    if !(opts.tol > 0.0) || !(opts.linear_tol > 0.0) {
        return Err(CliError::Config("solver tolerances must be positive".into()));
    }
    if !(opts.armijo_factor > 0.0 && opts.armijo_factor < 1.0) {
        return Err(CliError::Config(format!("armijo = {} must lie in (0, 1)", opts.armijo_factor)));
    }
    Ok((opts, mass))
}

/// Builds the coefficient set. With `validate` off, out-of-range fields
/// (such as a negative `b0`) are kept so the checkers can locate them.
pub fn build_coefficients(cfg: &Config, mode: BoundaryMode, validate: bool) -> Result<(CoefficientSet64, String, f64), CliError> {
    let family = cfg.str_or("coefficients", "family", "p_laplace").to_string();
    let p_key = cfg.f64("coefficients", "p")?;
    let s_key = cfg.f64("coefficients", "s")?;
    let (p, s, default_variant) = match family.as_str() {
        "p_laplace" => {
            let s = s_key.unwrap_or(0.0);
            if s != 0.0 {
                return Err(CliError::Config("family p_laplace has s = 0; use p_laplace_regularized for s > 0".into()));
            }
            (p_key.ok_or_else(|| CliError::Config("family p_laplace needs [coefficients] p".into()))?, 0.0, "additive")
        }
        "p_laplace_regularized" => {
            let s = s_key.unwrap_or(1.0);
            if !(s > 0.0) {
                return Err(CliError::Config(format!("family p_laplace_regularized needs s > 0, got {s}")));
            }
            (p_key.ok_or_else(|| CliError::Config("family p_laplace_regularized needs [coefficients] p".into()))?, s, "quadratic")
        }
        "linear_diffusion" | "rotation" => {
            if p_key.is_some_and(|p| p != 2.0) || s_key.is_some_and(|s| s != 0.0) {
                return Err(CliError::Config(format!("family {family} is linear: p = 2 and s = 0")));
            }
            (2.0, 0.0, "additive")
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown coefficient family '{other}' (expected p_laplace, p_laplace_regularized, linear_diffusion or rotation)"
            )))
        }
    };
    if !(p > 1.0) || !p.is_finite() {
        return Err(CliError::Config(format!("growth exponent p = {p} must lie in (1, inf)")));
    }
    let variant = match cfg.str_or("coefficients", "variant", default_variant) {
        "additive" => PLaplaceVariant::Additive,
        "quadratic" => PLaplaceVariant::Quadratic,
        other => return Err(CliError::Config(format!("unknown variant '{other}' (expected additive or quadratic)"))),
    };

    let rotation = family == "rotation";
    // the rotation family uses a0 only as the coercive part of its own flux
    let (a0, a0_given) = if rotation { (Arc::new(|_: [f64; 2]| 1.0) as ScalarField<f64>, false) } else { field_xy(cfg, "a0", 1.0)? };
    let (b0, _) = field_xy(cfg, "b0", 0.0)?;
    let h0_default = if mode == BoundaryMode::Robin { 1.0 } else { 0.0 };
    let (h0, _) = field_xy(cfg, "h0", h0_default)?;
    let mut pl = PLaplace::new(p, s, variant, 0.0, 0.0);
    pl.a0 = a0;
    pl.b0 = b0;
    pl.h0 = h0;
    pl.a0_bounds = match cfg.list::<f64>("coefficients", "a0_bounds")? {
        Some(b) if b.len() == 2 => (b[0], b[1]),
        Some(_) => return Err(CliError::Config("[coefficients] a0_bounds needs two values: lower, upper".into())),
        None if a0_given => {
            // sampled bounds when none are declared
            let v: Vec<f64> = pl.probes.iter().map(|&x| (pl.a0)(x)).collect();
            (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        }
        None => (1.0, 1.0),
    };
    let mut c = if validate { pl.build()? } else { pl.build_unchecked() };

    if rotation {
        let k = cfg.f64_or("coefficients", "rotation", 1.0)?;
        let (a0, _) = field_xy(cfg, "a0", 0.0)?;
        let nu = cfg.f64_or("coefficients", "nu", 1.0)?;
        let mu = cfg.f64_or("coefficients", "mu", 1.0)?;
        let mut structure = StructureParams::new(2.0, nu, mu)?;
        structure.psi1 = c.structure.psi1.clone();
        structure.psi4 = c.structure.psi4.clone();
        // coercive part a0 z plus the skew part k J z
        c.flux = Arc::new(FnFlux::new(move |x: [f64; 2], z: [f64; 2]| {
            let a = a0(x);
            [a * z[0] + k * z[1], a * z[1] - k * z[0]]
        }));
        c.radial = None;
        c.structure = structure;
    } else if cfg.str("coefficients", "rotation").is_some() {
        return Err(CliError::Config("[coefficients] rotation is only used by the rotation family".into()));
    } else {
        if let Some(nu) = cfg.f64("coefficients", "nu")? {
            c.structure.nu = nu;
        }
        if let Some(mu) = cfg.f64("coefficients", "mu")? {
            c.structure.mu = mu;
        }
        if validate {
            c.structure.validate()?;
        }
    }

    if let Some(e) = expr(cfg, "coefficients", "reaction", &["x", "y", "u"])? {
        c.reaction = Arc::new(FnReaction::new(move |x: [f64; 2], u| e.eval(&[x[0], x[1], u])));
    }
    if let Some(e) = expr(cfg, "coefficients", "boundary_reaction", &["x", "y", "u"])? {
        c.boundary_reaction = Arc::new(FnBoundaryReaction::new(move |bp: &BoundaryPoint<f64>, u| e.eval(&[bp.x[0], bp.x[1], u])));
    }
    c.omega = cfg.f64_or("coefficients", "omega", 0.0)?;
    if !(c.omega >= 0.0) {
        return Err(CliError::Config(format!("omega = {} must be nonnegative", c.omega)));
    }
    if let Some(e) = expr(cfg, "coefficients", "source", &["x", "y"])? {
        c = c.with_source(move |x: [f64; 2]| e.eval(&[x[0], x[1]]));
    }
    if let Some(e) = expr(cfg, "coefficients", "boundary_load", &["x", "y", "nx", "ny"])? {
        c = c.with_boundary_load(move |bp: &BoundaryPoint<f64>| e.eval(&[bp.x[0], bp.x[1], bp.normal[0], bp.normal[1]]));
    }
    if let Some(e) = expr(cfg, "boundary", "beta", &["x", "y"])? {
        c = c.with_beta(move |bp: &BoundaryPoint<f64>| e.eval(&[bp.x[0], bp.x[1]]));
    }
    Ok((c, family, p))
}

pub fn build(cfg: &Config) -> Result<Scenario, CliError> {
    let boundary = boundary_mode(cfg)?;
    let mesh = build_mesh(cfg)?;
    let (coeffs, family, p) = build_coefficients(cfg, boundary, true)?;
    let (solver, mass_mode) = solver_options(cfg)?;
    Ok(Scenario { mesh, coeffs, boundary, mass_mode, solver, family, p })
}
