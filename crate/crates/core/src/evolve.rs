//! Implicit Euler time stepping for the parabolic problem and checks of the
//! resulting discrete semigroup.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::coeffs::{BoundaryField, CoefficientSet};
use crate::error::{invalid, Error, Result};
use crate::fem::{DiscreteField, MassMode};
use crate::scalar::{Point, Real};
use crate::solver::{discrete_norm, solve_resolvent, total_mass, NormKind, ResolventProblem, SolveReport, SolverOptions};
use crate::sparse::SparseMatrix;

/// Time dependent source `f(t, x)`.
pub type Forcing<T> = Arc<dyn Fn(T, Point<T>) -> T + Send + Sync>;

/// Absolute slack allowed by [`linf_decay_check`].
pub const LINF_SLACK: f64 = 1e-6;

#[derive(Clone)]
pub struct EvolutionConfig<T> {
    pub t_final: T,
    pub n_steps: usize,
    pub forcing: Option<Forcing<T>>,
    /// Boundary weight `beta` of the dynamic boundary condition. Absent means
    /// a Robin/Neumann boundary.
    pub wentzell: Option<BoundaryField<T>>,
    /// Every `stride`-th step is stored; the final step is always kept.
    pub stride: usize,
    pub mass_mode: MassMode,
    pub solver: SolverOptions,
}

impl<T: Real> fmt::Debug for EvolutionConfig<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolutionConfig")
            .field("t_final", &self.t_final)
            .field("n_steps", &self.n_steps)
            .field("forcing", &self.forcing.is_some())
            .field("wentzell", &self.wentzell.is_some())
            .field("stride", &self.stride)
            .field("mass_mode", &self.mass_mode)
            .field("solver", &self.solver)
            .finish()
    }
}

impl<T: Real> EvolutionConfig<T> {
    pub fn new(t_final: T, n_steps: usize) -> Self {
        Self {
            t_final,
            n_steps,
            forcing: None,
            wentzell: None,
            stride: 1,
            mass_mode: MassMode::Lumped,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_forcing(mut self, f: impl Fn(T, Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn with_wentzell(mut self, beta: BoundaryField<T>) -> Self {
        self.wentzell = Some(beta);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_mass_mode(mut self, mode: MassMode) -> Self {
        self.mass_mode = mode;
        self
    }

    pub fn with_solver(mut self, opts: SolverOptions) -> Self {
        self.solver = opts;
        self
    }

    /// Same configuration over a different horizon and step count.
    pub fn rescaled(&self, t_final: T, n_steps: usize) -> Self {
        Self { t_final, n_steps, ..self.clone() }
    }

    pub fn dt(&self) -> T {
        self.t_final / T::from_usize_lossy(self.n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be positive"));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        if !self.t_final.is_finite() || self.t_final < T::zero() {
            return Err(invalid(format!("t_final = {} must be finite and nonnegative", self.t_final)));
        }
        Ok(())
    }

    fn coefficients(&self, coeffs: &CoefficientSet<T>) -> CoefficientSet<T> {
        let mut c = coeffs.clone();
        if let Some(beta) = &self.wentzell {
            c.beta = Some(beta.clone());
        }
        c
    }

    /// Mass matrix of the scheme, including the boundary mass in Wentzell mode.
    pub fn mass(&self, mesh: &crate::mesh::Mesh<T>, coeffs: &CoefficientSet<T>) -> Result<SparseMatrix<T>> {
        total_mass(mesh, &self.coefficients(coeffs), self.mass_mode.is_lumped(), self.wentzell.is_some())
    }
}

/// Stored time levels of an evolution.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub fields: Vec<DiscreteField<T>>,
    /// One report per completed step.
    pub reports: Vec<SolveReport>,
    pub dt: T,
}

impl<T: Real> Trajectory<T> {
    pub fn final_field(&self) -> &DiscreteField<T> {
        self.fields.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("trajectory holds the initial time")
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Failure of [`evolve`]. A step failure carries everything computed before it.
#[derive(Debug, thiserror::Error)]
pub enum EvolutionError<T: Real> {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Error,
        partial: Box<Trajectory<T>>,
    },
}

impl<T: Real> From<EvolutionError<T>> for Error {
    fn from(e: EvolutionError<T>) -> Self {
        match e {
            EvolutionError::Setup(e) => e,
            EvolutionError::Step { step, source, .. } => Error::Evolution { step, source: Box::new(source) },
        }
    }
}

/// Runs `n_steps` implicit Euler steps of size `t_final / n_steps` from `u0`.
///
/// Step `k` solves `M u_k + dt R(u_k) = M (u_{k-1} + dt f(t_k))`.
pub fn evolve<T: Real>(
    u0: &DiscreteField<T>,
    coeffs: &CoefficientSet<T>,
    config: &EvolutionConfig<T>,
) -> std::result::Result<Trajectory<T>, EvolutionError<T>> {
    config.validate()?;
    if coeffs.reaction.gradient_dependent() {
        return Err(Error::UnsupportedCase("gradient dependent reaction in the evolution problem".into()).into());
    }
    let mesh = u0.mesh.clone();
    let c = config.coefficients(coeffs);
    let wentzell = config.wentzell.is_some();
    total_mass(&mesh, &c, config.mass_mode.is_lumped(), wentzell)?;

    let dt = config.dt();
    let mut traj = Trajectory { times: vec![T::zero()], fields: vec![u0.clone()], reports: Vec::with_capacity(config.n_steps), dt };
    let mut u = u0.values.clone();
    for k in 1..=config.n_steps {
        let t = dt * T::from_usize_lossy(k);
        let rhs: Vec<T> = match &config.forcing {
            Some(f) => u.iter().zip(&mesh.vertices).map(|(&v, &x)| v + dt * f(t, x)).collect(),
            None => u.clone(),
        };
        let problem = ResolventProblem {
            mesh: mesh.clone(),
            coeffs: c.clone(),
            alpha: dt,
            rhs,
            mass_mode: config.mass_mode,
            wentzell,
            initial_guess: Some(u.clone()),
        };
        match solve_resolvent(&problem, &config.solver) {
            Ok((field, report)) => {
                u = field.values.clone();
                traj.reports.push(report);
                if k % config.stride == 0 || k == config.n_steps {
                    traj.times.push(t);
                    traj.fields.push(field);
                }
            }
            Err(source) => return Err(EvolutionError::Step { step: k, source, partial: Box::new(traj) }),
        }
    }
    Ok(traj)
}

fn final_state<T: Real>(u0: &DiscreteField<T>, coeffs: &CoefficientSet<T>, config: &EvolutionConfig<T>) -> Result<DiscreteField<T>> {
    if config.t_final == T::zero() {
        return Ok(u0.clone());
    }
    let cfg = config.clone().with_stride(config.n_steps.max(1));
    Ok(evolve(u0, coeffs, &cfg)?.final_field().clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// `|u_coarse - u_fine|` in the scheme's mass norm.
    pub diff_mass: f64,
    pub diff_max: f64,
    /// Observed order from the previous row's max-norm difference.
    pub order_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub t_final: f64,
    pub rows: Vec<ProbeRow>,
}

impl ConvergenceTable {
    /// True when the max-norm differences strictly decrease down the table.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].diff_max < w[0].diff_max)
    }

    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order_max).reduce(f64::min)
    }
}

/// Differences between final states computed with consecutive step counts of
/// `n_list` over the horizon `t_final`. A single entry gives an empty table.
pub fn crandall_liggett_probe<T: Real>(
    u0: &DiscreteField<T>,
    coeffs: &CoefficientSet<T>,
    config: &EvolutionConfig<T>,
    t_final: T,
    n_list: &[usize],
) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(invalid("empty list of step counts"));
    }
    if n_list.contains(&0) {
        return Err(invalid("step counts must be positive"));
    }
    let mass = config.mass(&u0.mesh, coeffs)?;
    let finals: Vec<DiscreteField<T>> = n_list
        .par_iter()
        .map(|&n| final_state(u0, coeffs, &config.rescaled(t_final, n)))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ProbeRow> = Vec::with_capacity(n_list.len().saturating_sub(1));
    for (i, w) in finals.windows(2).enumerate() {
        let d: Vec<T> = w[0].values.iter().zip(&w[1].values).map(|(&a, &b)| a - b).collect();
        let diff_mass = discrete_norm(&d, &mass, NormKind::L2).to_f64_lossy();
        let diff_max = discrete_norm(&d, &mass, NormKind::Inf).to_f64_lossy();
        let order_max = rows.last().map(|prev: &ProbeRow| {
            let growth = n_list[i + 1] as f64 / n_list[i] as f64;
            (prev.diff_max / diff_max).ln() / growth.ln()
        });
        rows.push(ProbeRow { n_coarse: n_list[i], n_fine: n_list[i + 1], diff_mass, diff_max, order_max });
    }
    Ok(ConvergenceTable { t_final: t_final.to_f64_lossy(), rows })
}

#[derive(Debug, Clone)]
pub struct SemigroupReport<T> {
    pub t: T,
    pub s: T,
    pub n_steps: usize,
    /// Mass-norm deviation between the direct and the composed evolutions.
    pub defect: f64,
    pub defect_max: f64,
    pub direct: DiscreteField<T>,
    pub composed: DiscreteField<T>,
}

/// Compares `S(t+s) u0` with `S(t) S(s) u0`, each evolution using
/// `config.n_steps` steps over its own horizon. A zero time is the identity,
/// so the defect vanishes when `t = 0` or `s = 0`.
pub fn semigroup_property_check<T: Real>(
    u0: &DiscreteField<T>,
    coeffs: &CoefficientSet<T>,
    t: T,
    s: T,
    config: &EvolutionConfig<T>,
) -> Result<SemigroupReport<T>> {
    if t < T::zero() || s < T::zero() || !t.is_finite() || !s.is_finite() {
        return Err(invalid("semigroup times must be finite and nonnegative"));
    }
    let n = config.n_steps;
    let mass = config.mass(&u0.mesh, coeffs)?;
    let (direct, composed) = if t == T::zero() || s == T::zero() {
        let only = final_state(u0, coeffs, &config.rescaled(t + s, n))?;
        (only.clone(), only)
    } else {
        let direct = final_state(u0, coeffs, &config.rescaled(t + s, n))?;
        let mid = final_state(u0, coeffs, &config.rescaled(s, n))?;
        let composed = final_state(&mid, coeffs, &config.rescaled(t, n))?;
        (direct, composed)
    };
    let d: Vec<T> = direct.values.iter().zip(&composed.values).map(|(&a, &b)| a - b).collect();
    Ok(SemigroupReport {
        t,
        s,
        n_steps: n,
        defect: discrete_norm(&d, &mass, NormKind::L2).to_f64_lossy(),
        defect_max: discrete_norm(&d, &mass, NormKind::Inf).to_f64_lossy(),
        direct,
        composed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub norms: Vec<f64>,
    /// Largest increase of the max norm between stored levels (0 when none).
    pub max_violation: f64,
    pub worst_index: Option<usize>,
    pub passed: bool,
}

/// Checks that the max norm does not increase along the trajectory, up to
/// [`LINF_SLACK`]. Only meaningful without forcing.
pub fn linf_decay_check<T: Real>(trajectory: &Trajectory<T>) -> DecayReport {
    let norms: Vec<f64> = trajectory.fields.iter().map(|f| f.max_abs().to_f64_lossy()).collect();
    let mut max_violation = 0.0;
    let mut worst_index = None;
    for (i, w) in norms.windows(2).enumerate() {
        let inc = w[1] - w[0];
        if inc > max_violation {
            max_violation = inc;
            worst_index = Some(i + 1);
        }
    }
    DecayReport { passed: max_violation <= LINF_SLACK, norms, max_violation, worst_index }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{boundary_constant, make_p_laplace, FnReaction, PLaplaceVariant};
    use crate::mesh::Mesh;

    fn setup(n: usize) -> (DiscreteField<f64>, CoefficientSet<f64>) {
        let mesh = Arc::new(Mesh::unit_square(n).unwrap());
        let u0 = DiscreteField::from_fn(mesh, |x: [f64; 2]| (std::f64::consts::PI * x[0]).cos()).unwrap();
        let c = make_p_laplace(2.0, 0.0, PLaplaceVariant::Additive, 0.0, 1.0).unwrap();
        (u0, c)
    }

    #[test]
    fn stride_keeps_final_step() {
        let (u0, c) = setup(4);
        let tr = evolve(&u0, &c, &EvolutionConfig::new(0.1, 5).with_stride(2)).unwrap();
        assert_eq!(tr.fields.len(), 4);
        assert!((tr.final_time() - 0.1).abs() < 1e-15);
        assert_eq!(tr.reports.len(), 5);
    }

    #[test]
    fn zero_horizon_is_identity() {
        let (u0, c) = setup(4);
        let tr = evolve(&u0, &c, &EvolutionConfig::new(0.0, 3)).unwrap();
        for f in &tr.fields {
            assert_eq!(f.values, u0.values);
        }
    }

    #[test]
    fn gradient_reaction_rejected() {
        let (u0, c) = setup(3);
        let c = c.with_reaction(Arc::new(FnReaction::with_gradient(|_, u, z: [f64; 2]| u * z[0])));
        let err = evolve(&u0, &c, &EvolutionConfig::new(0.1, 2)).unwrap_err();
        assert!(matches!(err, EvolutionError::Setup(Error::UnsupportedCase(_))));
    }

    #[test]
    fn semigroup_zero_time() {
        let (u0, c) = setup(4);
        let r = semigroup_property_check(&u0, &c, 0.0, 0.05, &EvolutionConfig::new(0.0, 8)).unwrap();
        assert_eq!(r.defect, 0.0);
    }

    #[test]
    fn decay_holds_for_heat() {
        let (u0, c) = setup(6);
        let tr = evolve(&u0, &c, &EvolutionConfig::new(0.1, 10)).unwrap();
        let rep = linf_decay_check(&tr);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn single_step_count_gives_empty_table() {
        let (u0, c) = setup(3);
        let t = crandall_liggett_probe(&u0, &c, &EvolutionConfig::new(0.1, 1), 0.1, &[4]).unwrap();
        assert!(t.rows.is_empty());
    }

    #[test]
    fn wentzell_mass_is_larger() {
        let (u0, c) = setup(3);
        let cfg = EvolutionConfig::new(0.1, 2).with_wentzell(boundary_constant(1.0));
        let m = cfg.mass(&u0.mesh, &c).unwrap();
        let total: f64 = m.row_sums().iter().sum();
        assert!((total - 5.0).abs() < 1e-12);
    }
}
