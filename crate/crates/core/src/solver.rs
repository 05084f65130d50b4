//! Nonlinear resolvent solver for `M u + alpha R(u) = M rhs` and the inner
//! linear solves.
//!
//! Newton's method with Armijo backtracking is tried first whenever the
//! tangent is symmetric. When it stalls, nonlinear Gauss-Seidel sweeps (exact
//! solves of the single vertex equations) repair the iterate near points
//! where the power laws are singular and Newton restarts. A damped
//! lagged-coefficient (Kacanov) iteration takes over when that fails or the
//! tangent is nonsymmetric.

use std::fmt;
use std::sync::Arc;

use crate::coeffs::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::fem::{assemble_boundary_mass, assemble_mass, assemble_residual, assemble_secant, assemble_tangent, DiscreteField, MassMode, RowResidual};
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::sparse::{conjugate_gradient, gmres, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Newton first, lagged-coefficient iteration on stall.
    #[default]
    Auto,
    Newton,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on the `M^{-1}`-weighted residual norm.
    pub tol: f64,
    pub max_newton: usize,
    pub max_picard: usize,
    pub armijo_factor: f64,
    pub max_halvings: usize,
    pub picard_theta: f64,
    /// Relative tolerance of the inner linear solves.
    pub linear_tol: f64,
    pub strategy: Strategy,
    /// Newton restarts after smoothing, and sweeps per restart.
    pub smoothing_rounds: usize,
    pub smoothing_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 50,
            max_picard: 2000,
            armijo_factor: 0.5,
            max_halvings: 30,
            picard_theta: 0.5,
            linear_tol: 1e-12,
            strategy: Strategy::Auto,
            smoothing_rounds: 20,
            smoothing_sweeps: 2,
        }
    }
}

/// Which method produced the final iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    None,
    Newton,
    Picard,
    NewtonThenPicard,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::None => "none",
            Method::Newton => "newton",
            Method::Picard => "picard",
            Method::NewtonThenPicard => "newton+picard",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    pub linear_iterations: usize,
    pub smoothing_sweeps: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    /// Step length accepted at each iteration.
    pub damping_history: Vec<f64>,
    pub converged: bool,
    pub method: Method,
}

impl SolveReport {
    fn new(r0: f64) -> Self {
        Self {
            iterations: 0,
            newton_iterations: 0,
            picard_iterations: 0,
            linear_iterations: 0,
            smoothing_sweeps: 0,
            final_residual: r0,
            residual_history: vec![r0],
            damping_history: Vec::new(),
            converged: false,
            method: Method::None,
        }
    }

    fn push(&mut self, residual: f64, step: f64) {
        self.iterations += 1;
        self.final_residual = residual;
        self.residual_history.push(residual);
        self.damping_history.push(step);
    }
}

/// Discrete resolvent problem `M u + alpha R(u) = M rhs`, with `M` the domain
/// mass plus, in Wentzell mode, the `beta`-weighted boundary mass.
#[derive(Clone)]
pub struct ResolventProblem<T> {
    pub mesh: Arc<Mesh<T>>,
    pub coeffs: CoefficientSet<T>,
    pub alpha: T,
    pub rhs: Vec<T>,
    pub mass_mode: MassMode,
    pub wentzell: bool,
    pub initial_guess: Option<Vec<T>>,
}

impl<T: Real> fmt::Debug for ResolventProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolventProblem")
            .field("vertices", &self.mesh.num_vertices())
            .field("coeffs", &self.coeffs)
            .field("alpha", &self.alpha)
            .field("mass_mode", &self.mass_mode)
            .field("wentzell", &self.wentzell)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ResolventProblem<T> {
    pub fn new(mesh: Arc<Mesh<T>>, coeffs: CoefficientSet<T>, alpha: T, rhs: Vec<T>) -> Result<Self> {
        let p = Self { mesh, coeffs, alpha, rhs, mass_mode: MassMode::Lumped, wentzell: false, initial_guess: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_mass_mode(mut self, mode: MassMode) -> Self {
        self.mass_mode = mode;
        self
    }

    pub fn with_wentzell(mut self, on: bool) -> Self {
        self.wentzell = on;
        self
    }

    pub fn with_initial_guess(mut self, u0: Vec<T>) -> Self {
        self.initial_guess = Some(u0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return Err(invalid(format!("alpha = {} must be finite and nonnegative", self.alpha)));
        }
        DiscreteField::new(self.mesh.clone(), self.rhs.clone())?;
        if let Some(u0) = &self.initial_guess {
            DiscreteField::new(self.mesh.clone(), u0.clone())?;
        }
        if self.wentzell && self.coeffs.beta.is_none() {
            return Err(invalid("Wentzell mode needs a boundary weight beta"));
        }
        Ok(())
    }

    /// Mass matrix of the problem's inner product.
    pub fn mass(&self) -> Result<SparseMatrix<T>> {
        total_mass(&self.mesh, &self.coeffs, self.mass_mode.is_lumped(), self.wentzell)
    }
}

pub(crate) fn total_mass<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, lumped: bool, wentzell: bool) -> Result<SparseMatrix<T>> {
    let m = assemble_mass(mesh, lumped);
    match (&coeffs.beta, wentzell) {
        (Some(beta), true) => m.add_scaled(T::one(), &assemble_boundary_mass(mesh, beta, lumped)?),
        (None, true) => Err(invalid("Wentzell mode needs a boundary weight beta")),
        _ => Ok(m),
    }
}

/// Solves `A x = b` for a symmetric positive definite `A` by Jacobi
/// preconditioned conjugate gradients.
pub fn solve_linear_spd<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
    conjugate_gradient(a, b, None, tol, max_iter).map(|(x, _)| x)
}

/// `G(u) = c M (u - rhs) + alpha R(u)` and its norm.
struct System<'a, T: Real> {
    mesh: &'a Mesh<T>,
    coeffs: &'a CoefficientSet<T>,
    mode: MassMode,
    alpha: T,
    mass_scale: T,
    mass: SparseMatrix<T>,
    target: Vec<T>,
    inv_weights: Vec<T>,
    rows: RowResidual<'a, T>,
}

impl<'a, T: Real> System<'a, T> {
    fn new(mesh: &'a Mesh<T>, coeffs: &'a CoefficientSet<T>, mode: MassMode, wentzell: bool, alpha: T, mass_scale: T, rhs: &[T]) -> Result<Self> {
        let mass = total_mass(mesh, coeffs, mode.is_lumped(), wentzell)?;
        let target = mass.mul_vec(rhs).into_iter().map(|v| v * mass_scale).collect();
        let inv_weights = total_mass(mesh, coeffs, true, wentzell)?.diagonal().into_iter().map(|d| T::one() / d).collect();
        let rows = RowResidual::new(mesh, coeffs, mode);
        Ok(Self { mesh, coeffs, mode, alpha, mass_scale, mass, target, inv_weights, rows })
    }

    fn residual(&self, u: &[T]) -> Result<Vec<T>> {
        let mu = self.mass.mul_vec(u);
        let mut g: Vec<T> = mu.iter().zip(&self.target).map(|(&a, &b)| self.mass_scale * a - b).collect();
        if self.alpha != T::zero() {
            let r = assemble_residual(self.mesh, self.coeffs, u, self.mode)?;
            for (gi, ri) in g.iter_mut().zip(r) {
                *gi += self.alpha * ri;
            }
        }
        Ok(g)
    }

    fn row(&self, u: &[T], i: usize) -> Result<T> {
        let mut g = -self.target[i];
        if self.mass_scale != T::zero() {
            g += self.mass_scale * self.mass.row(i).map(|(j, m)| m * u[j]).sum::<T>();
        }
        if self.alpha != T::zero() {
            g += self.alpha * self.rows.row(u, i)?;
        }
        Ok(g)
    }

    fn norm(&self, g: &[T]) -> f64 {
        g.iter().zip(&self.inv_weights).map(|(&v, &w)| v * v * w).sum::<T>().sqrt().to_f64_lossy()
    }

    fn matrix(&self, op: SparseMatrix<T>) -> Result<SparseMatrix<T>> {
        self.mass.scaled(self.mass_scale).add_scaled(self.alpha, &op)
    }

    fn linear_solve(&self, a: &SparseMatrix<T>, b: &[T], opts: &SolverOptions, report: &mut SolveReport) -> Result<Vec<T>> {
        let n = b.len();
        let tol = T::lit(opts.linear_tol);
        let res = if a.is_symmetric(T::lit(1e-12)) {
            conjugate_gradient(a, b, None, tol, 20 * n + 200)
        } else {
            gmres(a, b, tol, 60, 40 * n + 400)
        };
        match res {
            Ok((x, out)) => {
                report.linear_iterations += out.iterations;
                Ok(x)
            }
            Err(Error::LinearNonConvergence { .. }) => {
                // accept a loosely converged direction; the outer iteration checks descent
                let (x, out) = conjugate_gradient(a, b, None, T::lit(1e-6), 40 * n + 400).or_else(|_| gmres(a, b, T::lit(1e-6), 80, 80 * n + 800))?;
                report.linear_iterations += out.iterations;
                Ok(x)
            }
            Err(e) => Err(e),
        }
    }
}

fn axpy<T: Real>(u: &[T], s: T, d: &[T]) -> Vec<T> {
    u.iter().zip(d).map(|(&a, &b)| a + s * b).collect()
}

/// Root of `lambda -> d . G(u + lambda d)`, which is nondecreasing for a
/// monotone system. Used when residual backtracking fails.
fn monotone_line_search<T: Real>(sys: &System<T>, u: &[T], g: &[T], d: &[T]) -> Result<Option<(f64, Vec<T>, Vec<T>, f64)>> {
    let phi_of = |g: &[T]| g.iter().zip(d).map(|(&a, &b)| a * b).sum::<T>().to_f64_lossy();
    let phi0 = phi_of(g);
    if !(phi0 < 0.0) {
        return Ok(None);
    }
    let eval = |lambda: f64| -> Result<(Vec<T>, Vec<T>, f64)> {
        let trial = axpy(u, T::lit(lambda), d);
        let gt = sys.residual(&trial)?;
        let phi = phi_of(&gt);
        Ok((trial, gt, phi))
    };
    let (mut lo, mut flo) = (0.0, phi0);
    let mut hi = 1.0;
    let mut hit = eval(hi)?;
    let mut expansions = 0;
    while hit.2 < 0.0 {
        if expansions == 60 {
            return Ok(None);
        }
        lo = hi;
        flo = hit.2;
        hi *= 2.0;
        hit = eval(hi)?;
        expansions += 1;
    }
    let mut fhi = hit.2;
    let mut best = hit;
    let mut best_lambda = hi;
    let mut side = 0;
    for _ in 0..200 {
        if fhi == 0.0 || hi - lo <= 1e-13 * hi {
            break;
        }
        let c = (lo * fhi - hi * flo) / (fhi - flo);
        let c = if c > lo && c < hi { c } else { 0.5 * (lo + hi) };
        let at = eval(c)?;
        let fc = at.2;
        if fc.abs() < best.2.abs() {
            best_lambda = c;
            best = at.clone();
        }
        if fc == 0.0 {
            break;
        }
        if fc > 0.0 {
            hi = c;
            fhi = fc;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        } else {
            lo = c;
            flo = fc;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        }
    }
    let (trial, gt, _) = best;
    let tn = sys.norm(&gt);
    Ok(Some((best_lambda, trial, gt, tn)))
}

/// Solves `G_i(u) = 0` for `u_i` at every vertex in turn. Each `G_i` is
/// nondecreasing in `u_i` for a monotone system, so a bracketing search is
/// safe however steep or flat the equation is.
fn smoothing_sweep<T: Real>(sys: &System<T>, u: &mut [T]) -> Result<()> {
    for i in 0..u.len() {
        let u0 = u[i];
        let g0 = sys.row(u, i)?;
        if g0 == T::zero() {
            continue;
        }
        let eval = |s: T, u: &mut [T]| -> Result<T> {
            u[i] = s;
            sys.row(u, i)
        };
        let delta = T::lit(1e-7) * (T::one() + u0.abs());
        let gd = eval(u0 + delta, u)?;
        let slope = (gd - g0) / delta;
        let dir = if g0 > T::zero() { -T::one() } else { T::one() };
        let mut step = if slope > T::zero() && slope.is_finite() { (g0 / slope).abs() } else { delta };
        let (mut a, mut fa) = (u0, g0);
        let (mut b, mut fb) = (u0, g0);
        let mut bracketed = false;
        for _ in 0..200 {
            b = u0 + dir * step;
            fb = eval(b, u)?;
            if (fb > T::zero()) != (g0 > T::zero()) || fb == T::zero() {
                bracketed = true;
                break;
            }
            a = b;
            fa = fb;
            step *= T::lit(2.0);
        }
        if !bracketed {
            u[i] = if fb.abs() < g0.abs() { b } else { u0 };
            continue;
        }
        let mut side = 0;
        let (mut best, mut fbest) = if fb.abs() < fa.abs() { (b, fb) } else { (a, fa) };
        for _ in 0..100 {
            if fb == T::zero() || (b - a).abs() <= T::epsilon() * (a.abs() + b.abs()) {
                break;
            }
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !c.is_finite() || (c - a) * (c - b) > T::zero() {
                c = T::lit(0.5) * (a + b);
            }
            let fc = eval(c, u)?;
            if fc.abs() < fbest.abs() {
                best = c;
                fbest = fc;
            }
            if (fc > T::zero()) == (fb > T::zero()) {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= T::lit(0.5);
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= T::lit(0.5);
                }
                side = 1;
            }
        }
        u[i] = best;
    }
    Ok(())
}

enum Outcome {
    Converged,
    Stalled(String),
}

fn newton<T: Real>(sys: &System<T>, u: &mut Vec<T>, g: &mut Vec<T>, opts: &SolverOptions, report: &mut SolveReport) -> Result<Outcome> {
    let mut gn = sys.norm(g);
    for _ in 0..opts.max_newton {
        if gn <= opts.tol {
            return Ok(Outcome::Converged);
        }
        let jac = sys.matrix(assemble_tangent(sys.mesh, sys.coeffs, u, sys.mode)?)?;
        let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        let d = sys.linear_solve(&jac, &rhs, opts, report)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = axpy(u, T::lit(lambda), &d);
            let gt = sys.residual(&trial)?;
            let tn = sys.norm(&gt);
            if tn <= (1.0 - 1e-4 * lambda) * gn || tn <= opts.tol {
                accepted = Some((trial, gt, tn));
                break;
            }
            lambda *= opts.armijo_factor;
        }
        let accepted = match accepted {
            Some((trial, gt, tn)) => Some((lambda, trial, gt, tn)),
            None => monotone_line_search(sys, u, g, &d)?.filter(|s| s.3 < gn),
        };
        match accepted {
            Some((lambda, trial, gt, tn)) => {
                *u = trial;
                *g = gt;
                gn = tn;
                report.newton_iterations += 1;
                report.push(gn, lambda);
            }
            None => return Ok(Outcome::Stalled(format!("Armijo backtracking failed after {} halvings", opts.max_halvings))),
        }
    }
    if gn <= opts.tol {
        Ok(Outcome::Converged)
    } else {
        Ok(Outcome::Stalled(format!("Newton reached {} iterations", opts.max_newton)))
    }
}

fn picard<T: Real>(sys: &System<T>, u: &mut Vec<T>, g: &mut Vec<T>, opts: &SolverOptions, report: &mut SolveReport) -> Result<Outcome> {
    let mut gn = sys.norm(g);
    let mut theta = opts.picard_theta;
    for _ in 0..opts.max_picard {
        if gn <= opts.tol {
            return Ok(Outcome::Converged);
        }
        let s = sys.matrix(assemble_secant(sys.mesh, sys.coeffs, u, sys.mode)?)?;
        let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        let d = sys.linear_solve(&s, &rhs, opts, report)?;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = axpy(u, T::lit(theta), &d);
            let gt = sys.residual(&trial)?;
            let tn = sys.norm(&gt);
            if tn < gn || tn <= opts.tol {
                accepted = Some((trial, gt, tn));
                break;
            }
            theta *= 0.5;
        }
        let accepted = match accepted {
            Some(step) => Some(step),
            None => monotone_line_search(sys, u, g, &d)?.map(|(lambda, trial, gt, tn)| {
                theta = lambda.min(1.0);
                (trial, gt, tn)
            }),
        };
        match accepted {
            Some((trial, gt, tn)) => {
                *u = trial;
                *g = gt;
                gn = tn;
                report.picard_iterations += 1;
                report.push(gn, theta);
                theta = (theta * 1.5).min(1.0);
            }
            None => return Ok(Outcome::Stalled("damped lagged-coefficient iteration made no progress".into())),
        }
    }
    if gn <= opts.tol {
        Ok(Outcome::Converged)
    } else {
        Ok(Outcome::Stalled(format!("lagged-coefficient iteration reached {} iterations", opts.max_picard)))
    }
}

fn tangent_is_symmetric<T: Real>(coeffs: &CoefficientSet<T>) -> bool {
    coeffs.flux.has_symmetric_jacobian() && !coeffs.reaction.gradient_dependent()
}

#[allow(clippy::too_many_arguments)]
fn solve_system<T: Real>(
    mesh: &Mesh<T>,
    coeffs: &CoefficientSet<T>,
    mode: MassMode,
    wentzell: bool,
    alpha: T,
    mass_scale: T,
    rhs: &[T],
    u0: Vec<T>,
    opts: &SolverOptions,
) -> Result<(Vec<T>, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    let sys = System::new(mesh, coeffs, mode, wentzell, alpha, mass_scale, rhs)?;
    let mut u = u0;
    let mut g = sys.residual(&u)?;
    let mut report = SolveReport::new(sys.norm(&g));
    if report.final_residual <= opts.tol {
        report.converged = true;
        return Ok((u, report));
    }
    let use_newton = match opts.strategy {
        Strategy::Picard => false,
        Strategy::Newton => true,
        Strategy::Auto => tangent_is_symmetric(coeffs),
    };
    let mut reason = String::new();
    if use_newton {
        report.method = Method::Newton;
        let mut round = 0;
        loop {
            match newton(&sys, &mut u, &mut g, opts, &mut report)? {
                Outcome::Converged => {
                    report.converged = true;
                    return Ok((u, report));
                }
                Outcome::Stalled(why) => reason = why,
            }
            if round == opts.smoothing_rounds {
                break;
            }
            round += 1;
            let before = sys.norm(&g);
            for _ in 0..opts.smoothing_sweeps {
                smoothing_sweep(&sys, &mut u)?;
                report.smoothing_sweeps += 1;
            }
            g = sys.residual(&u)?;
            let after = sys.norm(&g);
            report.push(after, 0.0);
            if after <= opts.tol {
                report.converged = true;
                return Ok((u, report));
            }
            if !(after < before) {
                break;
            }
        }
        if opts.strategy == Strategy::Newton {
            return Err(Error::NonConvergence { reason, report: Box::new(report) });
        }
    }
    report.method = if use_newton { Method::NewtonThenPicard } else { Method::Picard };
    match picard(&sys, &mut u, &mut g, opts, &mut report)? {
        Outcome::Converged => {
            report.converged = true;
            Ok((u, report))
        }
        Outcome::Stalled(why) => {
            let reason = if reason.is_empty() { why } else { format!("{reason}; {why}") };
            Err(Error::NonConvergence { reason, report: Box::new(report) })
        }
    }
}

/// Solves `M u + alpha R(u) = M rhs`. The initial guess defaults to `rhs`.
pub fn solve_resolvent<T: Real>(problem: &ResolventProblem<T>, opts: &SolverOptions) -> Result<(DiscreteField<T>, SolveReport)> {
    problem.validate()?;
    let u0 = problem.initial_guess.clone().unwrap_or_else(|| problem.rhs.clone());
    let (u, report) = solve_system(&problem.mesh, &problem.coeffs, problem.mass_mode, problem.wentzell, problem.alpha, T::one(), &problem.rhs, u0, opts)?;
    Ok((DiscreteField::new(problem.mesh.clone(), u)?, report))
}

/// Solves the stationary problem `R(u) = 0`, starting from `u0` (zero when
/// absent). Unique solvability needs a coercive lower order part, such as
/// `omega > 0`.
pub fn solve_elliptic<T: Real>(
    mesh: Arc<Mesh<T>>,
    coeffs: &CoefficientSet<T>,
    mode: MassMode,
    u0: Option<Vec<T>>,
    opts: &SolverOptions,
) -> Result<(DiscreteField<T>, SolveReport)> {
    let n = mesh.num_vertices();
    let u0 = u0.unwrap_or_else(|| vec![T::zero(); n]);
    DiscreteField::new(mesh.clone(), u0.clone())?;
    let zero = vec![T::zero(); n];
    let (u, report) = solve_system(&mesh, coeffs, mode, false, T::one(), T::zero(), &zero, u0, opts)?;
    Ok((DiscreteField::new(mesh, u)?, report))
}

/// Discrete norm kinds used for contraction estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `sqrt(v^T M v)` with the problem's mass matrix.
    L2,
    /// `(sum_i m_i |v_i|^q)^{1/q}` with lumped masses `m_i`.
    Lq(f64),
    /// `max_i |v_i|`.
    Inf,
}

impl NormKind {
    /// Parses `2`, `inf` or a finite exponent `q >= 1`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "inf" || s == "infinity" {
            return Ok(NormKind::Inf);
        }
        let q: f64 = s.parse().map_err(|_| invalid(format!("bad norm exponent '{s}'")))?;
        NormKind::from_exponent(q)
    }

    pub fn from_exponent(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(NormKind::Inf)
        } else if q == 2.0 {
            Ok(NormKind::L2)
        } else if q >= 1.0 && q.is_finite() {
            Ok(NormKind::Lq(q))
        } else {
            Err(invalid(format!("norm exponent must be >= 1, got {q}")))
        }
    }
}

/// Mass-weighted discrete norm of a nodal vector.
pub fn discrete_norm<T: Real>(v: &[T], mass: &SparseMatrix<T>, kind: NormKind) -> T {
    match kind {
        NormKind::Inf => v.iter().fold(T::zero(), |m, x| m.max(x.abs())),
        NormKind::L2 => {
            let mv = mass.mul_vec(v);
            v.iter().zip(&mv).map(|(&a, &b)| a * b).sum::<T>().max(T::zero()).sqrt()
        }
        NormKind::Lq(q) => {
            let q = T::lit(q);
            let w = mass.row_sums();
            v.iter().zip(&w).map(|(&a, &m)| m * a.abs().powf(q)).sum::<T>().powf(T::one() / q)
        }
    }
}

/// Ratio `|u1 - u2|_q / |rhs1 - rhs2|_q` of two resolvent solves that differ
/// only in their right-hand sides.
pub fn contraction_ratio<T: Real>(p1: &ResolventProblem<T>, p2: &ResolventProblem<T>, kind: NormKind, opts: &SolverOptions) -> Result<T> {
    if !Arc::ptr_eq(&p1.mesh, &p2.mesh) && *p1.mesh != *p2.mesh {
        return Err(invalid("contraction ratio needs both problems on the same mesh"));
    }
    if p1.alpha != p2.alpha || p1.mass_mode != p2.mass_mode || p1.wentzell != p2.wentzell {
        return Err(invalid("contraction ratio needs equal alpha, mass mode and boundary mode"));
    }
    let mass = p1.mass()?;
    let df: Vec<T> = p1.rhs.iter().zip(&p2.rhs).map(|(&a, &b)| a - b).collect();
    let den = discrete_norm(&df, &mass, kind);
    if den == T::zero() {
        return Err(Error::UndefinedRatio("right-hand sides coincide".into()));
    }
    let (u1, _) = solve_resolvent(p1, opts)?;
    let (u2, _) = solve_resolvent(p2, opts)?;
    let du: Vec<T> = u1.values.iter().zip(&u2.values).map(|(&a, &b)| a - b).collect();
    Ok(discrete_norm(&du, &mass, kind) / den)
}
