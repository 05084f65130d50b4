//! Coefficient model: flux `a(x,z)`, reaction `b(x,u)`, boundary reaction
//! `h(x,u)`, loads `f`, `F`, `g`, the shift `omega` and the Wentzell weight
//! `beta`, together with sampling checks for the growth and monotonicity
//! conditions the solver relies on.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, norm, Mat2, Point, Real};

pub type ScalarField<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(Point<T>) -> Point<T> + Send + Sync>;
pub type BoundaryField<T> = Arc<dyn Fn(&BoundaryPoint<T>) -> T + Send + Sync>;

/// Floor applied to `|z|` (and `|u|`) inside derivatives of singular power
/// laws. Residuals are never regularized.
pub const TANGENT_FLOOR: f64 = 1e-8;

/// A point on the boundary together with the outward unit normal of the
/// boundary edge it lies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint<T> {
    pub x: Point<T>,
    pub normal: Point<T>,
    pub tag: u32,
}

pub fn constant<T: Real>(c: T) -> ScalarField<T> {
    Arc::new(move |_| c)
}

pub fn boundary_constant<T: Real>(c: T) -> BoundaryField<T> {
    Arc::new(move |_| c)
}

pub(crate) fn fd_step<T: Real>() -> T {
    T::lit(1e-6).max(T::epsilon().sqrt())
}

/// Flux `a(x, z)` of the principal part.
pub trait Flux<T: Real>: Send + Sync {
    fn eval(&self, x: Point<T>, z: Point<T>) -> Point<T>;

    /// Jacobian `da_i/dz_j`, by central differences unless overridden.
    fn derivative(&self, x: Point<T>, z: Point<T>) -> Mat2<T> {
        let mut d = [[T::zero(); 2]; 2];
        for j in 0..2 {
            let h = fd_step::<T>() * z[j].abs().max(T::one());
            let (mut zp, mut zm) = (z, z);
            zp[j] += h;
            zm[j] -= h;
            let (ap, am) = (self.eval(x, zp), self.eval(x, zm));
            for i in 0..2 {
                d[i][j] = (ap[i] - am[i]) / (h + h);
            }
        }
        d
    }

    /// True when `a(x,z) = m(x,|z|) z`; such fluxes have symmetric Jacobians.
    fn is_radial(&self) -> bool {
        false
    }

    /// True when the Jacobian is symmetric for all arguments.
    fn has_symmetric_jacobian(&self) -> bool {
        self.is_radial()
    }
}

/// Secant modulus `a(x,z).z / |z|^2`, clipped at zero, used by the lagged
/// (Kacanov) linearization. Small gradients are lifted to the tangent floor.
pub fn secant_modulus<T: Real>(flux: &dyn Flux<T>, x: Point<T>, z: Point<T>) -> T {
    let floor = T::lit(TANGENT_FLOOR);
    let r = norm(z);
    let z = if r < floor {
        if r > T::zero() {
            [z[0] * floor / r, z[1] * floor / r]
        } else {
            [floor, T::zero()]
        }
    } else {
        z
    };
    let a = flux.eval(x, z);
    (dot(a, z) / dot(z, z)).max(T::zero())
}

/// Radial flux `a(x,z) = m(x,|z|) z`.
#[derive(Clone)]
pub struct RadialFluxModel<T> {
    pub m: Arc<dyn Fn(Point<T>, T) -> T + Send + Sync>,
    pub dm: Option<Arc<dyn Fn(Point<T>, T) -> T + Send + Sync>>,
}

impl<T: Real> RadialFluxModel<T> {
    pub fn new(m: impl Fn(Point<T>, T) -> T + Send + Sync + 'static) -> Self {
        Self { m: Arc::new(m), dm: None }
    }

    pub fn with_derivative(mut self, dm: impl Fn(Point<T>, T) -> T + Send + Sync + 'static) -> Self {
        self.dm = Some(Arc::new(dm));
        self
    }

    pub fn modulus(&self, x: Point<T>, y: T) -> T {
        (self.m)(x, y)
    }

    pub fn modulus_derivative(&self, x: Point<T>, y: T) -> T {
        match &self.dm {
            Some(dm) => dm(x, y),
            None => {
                let h = fd_step::<T>() * y.abs().max(T::one());
                let lo = (y - h).max(y * T::lit(0.5));
                ((self.m)(x, y + h) - (self.m)(x, lo)) / (y + h - lo)
            }
        }
    }
}

impl<T: Real> Flux<T> for RadialFluxModel<T> {
    fn eval(&self, x: Point<T>, z: Point<T>) -> Point<T> {
        let r = norm(z);
        if r == T::zero() {
            // limit value, also for singular moduli with p < 2
            return [T::zero(), T::zero()];
        }
        let m = (self.m)(x, r);
        [m * z[0], m * z[1]]
    }

    fn derivative(&self, x: Point<T>, z: Point<T>) -> Mat2<T> {
        let r = norm(z);
        if r == T::zero() {
            let m0 = (self.m)(x, r);
            if m0.is_finite() {
                return [[m0, T::zero()], [T::zero(), m0]];
            }
        }
        let r = r.max(T::lit(TANGENT_FLOOR));
        let m = (self.m)(x, r);
        let c = self.modulus_derivative(x, r) / r;
        [[m + c * z[0] * z[0], c * z[0] * z[1]], [c * z[1] * z[0], m + c * z[1] * z[1]]]
    }

    fn is_radial(&self) -> bool {
        true
    }
}

type FluxFn<T> = Arc<dyn Fn(Point<T>, Point<T>) -> Point<T> + Send + Sync>;
type FluxDerivFn<T> = Arc<dyn Fn(Point<T>, Point<T>) -> Mat2<T> + Send + Sync>;

/// Flux given by closures; the Jacobian falls back to finite differences.
#[derive(Clone)]
pub struct FnFlux<T> {
    pub f: FluxFn<T>,
    pub df: Option<FluxDerivFn<T>>,
}

impl<T: Real> FnFlux<T> {
    pub fn new(f: impl Fn(Point<T>, Point<T>) -> Point<T> + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), df: None }
    }
}

impl<T: Real> Flux<T> for FnFlux<T> {
    fn eval(&self, x: Point<T>, z: Point<T>) -> Point<T> {
        (self.f)(x, z)
    }

    fn derivative(&self, x: Point<T>, z: Point<T>) -> Mat2<T> {
        match &self.df {
            Some(df) => df(x, z),
            None => {
                let mut d = [[T::zero(); 2]; 2];
                for j in 0..2 {
                    let h = fd_step::<T>() * z[j].abs().max(T::one());
                    let (mut zp, mut zm) = (z, z);
                    zp[j] += h;
                    zm[j] -= h;
                    let (ap, am) = ((self.f)(x, zp), (self.f)(x, zm));
                    for i in 0..2 {
                        d[i][j] = (ap[i] - am[i]) / (h + h);
                    }
                }
                d
            }
        }
    }
}

/// Lower order term `B(x,u,z)`. The parabolic theory only admits terms that do
/// not depend on the gradient.
pub trait Reaction<T: Real>: Send + Sync {
    fn eval(&self, x: Point<T>, u: T, z: Point<T>) -> T;

    fn du(&self, x: Point<T>, u: T, z: Point<T>) -> T {
        let h = fd_step::<T>() * u.abs().max(T::one());
        (self.eval(x, u + h, z) - self.eval(x, u - h, z)) / (h + h)
    }

    fn dz(&self, x: Point<T>, u: T, z: Point<T>) -> Point<T> {
        if !self.gradient_dependent() {
            return [T::zero(), T::zero()];
        }
        let mut d = [T::zero(); 2];
        for j in 0..2 {
            let h = fd_step::<T>() * z[j].abs().max(T::one());
            let (mut zp, mut zm) = (z, z);
            zp[j] += h;
            zm[j] -= h;
            d[j] = (self.eval(x, u, zp) - self.eval(x, u, zm)) / (h + h);
        }
        d
    }

    fn gradient_dependent(&self) -> bool {
        false
    }
}

/// Boundary term `h(x,u)`.
pub trait BoundaryReaction<T: Real>: Send + Sync {
    fn eval(&self, bp: &BoundaryPoint<T>, u: T) -> T;

    fn du(&self, bp: &BoundaryPoint<T>, u: T) -> T {
        let h = fd_step::<T>() * u.abs().max(T::one());
        (self.eval(bp, u + h) - self.eval(bp, u - h)) / (h + h)
    }
}

#[inline]
fn signed_power<T: Real>(u: T, e: T) -> T {
    // |u|^e sign(u), with 0 at u = 0 for every e > 0
    if u == T::zero() {
        T::zero()
    } else {
        u.abs().powf(e) * u.signum()
    }
}

/// `c(x) |u|^{p-2} u`.
#[derive(Clone)]
pub struct PowerReaction<T> {
    pub coef: ScalarField<T>,
    pub p: T,
}

impl<T: Real> Reaction<T> for PowerReaction<T> {
    fn eval(&self, x: Point<T>, u: T, _z: Point<T>) -> T {
        (self.coef)(x) * signed_power(u, self.p - T::one())
    }

    fn du(&self, x: Point<T>, u: T, _z: Point<T>) -> T {
        let r = u.abs().max(T::lit(TANGENT_FLOOR));
        (self.coef)(x) * (self.p - T::one()) * r.powf(self.p - T::lit(2.0))
    }
}

/// `c(x) |u|^{p-2} u` on the boundary.
#[derive(Clone)]
pub struct PowerBoundaryReaction<T> {
    pub coef: ScalarField<T>,
    pub p: T,
}

impl<T: Real> BoundaryReaction<T> for PowerBoundaryReaction<T> {
    fn eval(&self, bp: &BoundaryPoint<T>, u: T) -> T {
        (self.coef)(bp.x) * signed_power(u, self.p - T::one())
    }

    fn du(&self, bp: &BoundaryPoint<T>, u: T) -> T {
        let r = u.abs().max(T::lit(TANGENT_FLOOR));
        (self.coef)(bp.x) * (self.p - T::one()) * r.powf(self.p - T::lit(2.0))
    }
}

type ReactionFn<T> = Arc<dyn Fn(Point<T>, T, Point<T>) -> T + Send + Sync>;

/// Reaction given by a closure of `(x, u, z)`.
#[derive(Clone)]
pub struct FnReaction<T> {
    pub f: ReactionFn<T>,
    pub uses_gradient: bool,
}

impl<T: Real> FnReaction<T> {
    pub fn new(f: impl Fn(Point<T>, T) -> T + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(move |x, u, _| f(x, u)), uses_gradient: false }
    }

    pub fn with_gradient(f: impl Fn(Point<T>, T, Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), uses_gradient: true }
    }
}

impl<T: Real> Reaction<T> for FnReaction<T> {
    fn eval(&self, x: Point<T>, u: T, z: Point<T>) -> T {
        (self.f)(x, u, z)
    }

    fn gradient_dependent(&self) -> bool {
        self.uses_gradient
    }
}

/// Boundary reaction given by a closure.
#[derive(Clone)]
pub struct FnBoundaryReaction<T> {
    pub f: Arc<dyn Fn(&BoundaryPoint<T>, T) -> T + Send + Sync>,
}

impl<T: Real> FnBoundaryReaction<T> {
    pub fn new(f: impl Fn(&BoundaryPoint<T>, T) -> T + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }
}

impl<T: Real> BoundaryReaction<T> for FnBoundaryReaction<T> {
    fn eval(&self, bp: &BoundaryPoint<T>, u: T) -> T {
        (self.f)(bp, u)
    }
}

/// Structure parameters of the growth conditions. `eps` only records the
/// integrability margin of the psi-classes and never enters a computation.
#[derive(Clone)]
pub struct StructureParams<T> {
    pub p: T,
    pub nu: T,
    pub mu: T,
    pub eps: T,
    pub psi1: ScalarField<T>,
    pub psi2: ScalarField<T>,
    pub psi3: ScalarField<T>,
    pub psi4: ScalarField<T>,
}

impl<T: Real> StructureParams<T> {
    /// Parameters with all psi-fields zero.
    pub fn new(p: T, nu: T, mu: T) -> Result<Self> {
        let z = constant(T::zero());
        let s = Self { p, nu, mu, eps: T::lit(0.5), psi1: z.clone(), psi2: z.clone(), psi3: z.clone(), psi4: z };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::one()) || !self.p.is_finite() {
            return Err(invalid(format!("growth exponent p = {} must lie in (1, inf)", self.p)));
        }
        if !(self.nu > T::zero() && self.nu <= self.mu) {
            return Err(invalid(format!("need 0 < nu <= mu, got nu = {}, mu = {}", self.nu, self.mu)));
        }
        if !(self.eps > T::zero() && self.eps < T::one()) {
            return Err(invalid(format!("eps = {} must lie in (0,1)", self.eps)));
        }
        Ok(())
    }
}

impl<T: Real> fmt::Debug for StructureParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureParams").field("p", &self.p).field("nu", &self.nu).field("mu", &self.mu).field("eps", &self.eps).finish_non_exhaustive()
    }
}

/// Complete coefficient data of the quasilinear problem
/// `-div a(x,grad u) + b(x,u) + omega w(x) u = f - div F` in the domain,
/// `a.n + h(x,u) = g + F.n` on the boundary.
#[derive(Clone)]
pub struct CoefficientSet<T> {
    pub flux: Arc<dyn Flux<T>>,
    pub reaction: Arc<dyn Reaction<T>>,
    pub boundary_reaction: Arc<dyn BoundaryReaction<T>>,
    pub omega: T,
    /// Spatial weight `w(x)` of the omega term (1 when absent).
    pub omega_density: Option<ScalarField<T>>,
    pub source: Option<ScalarField<T>>,
    pub load_flux: Option<VectorField<T>>,
    pub boundary_load: Option<BoundaryField<T>>,
    pub beta: Option<BoundaryField<T>>,
    pub structure: StructureParams<T>,
    /// Radial representation of `flux`, when it has one.
    pub radial: Option<RadialFluxModel<T>>,
}

impl<T: Real> fmt::Debug for CoefficientSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("omega", &self.omega)
            .field("structure", &self.structure)
            .field("radial", &self.radial.is_some())
            .field("has_source", &self.source.is_some())
            .field("has_load_flux", &self.load_flux.is_some())
            .field("has_boundary_load", &self.boundary_load.is_some())
            .field("has_beta", &self.beta.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Real> CoefficientSet<T> {
    /// Coefficients with the given flux and zero lower order terms and loads.
    pub fn from_flux(flux: Arc<dyn Flux<T>>, structure: StructureParams<T>) -> Self {
        Self {
            flux,
            reaction: Arc::new(PowerReaction { coef: constant(T::zero()), p: T::lit(2.0) }),
            boundary_reaction: Arc::new(PowerBoundaryReaction { coef: constant(T::zero()), p: T::lit(2.0) }),
            omega: T::zero(),
            omega_density: None,
            source: None,
            load_flux: None,
            boundary_load: None,
            beta: None,
            structure,
            radial: None,
        }
    }

    pub fn with_omega(mut self, omega: T) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_source(mut self, f: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(f));
        self
    }

    pub fn with_load_flux(mut self, big_f: impl Fn(Point<T>) -> Point<T> + Send + Sync + 'static) -> Self {
        self.load_flux = Some(Arc::new(big_f));
        self
    }

    pub fn with_boundary_load(mut self, g: impl Fn(&BoundaryPoint<T>) -> T + Send + Sync + 'static) -> Self {
        self.boundary_load = Some(Arc::new(g));
        self
    }

    pub fn with_beta(mut self, beta: impl Fn(&BoundaryPoint<T>) -> T + Send + Sync + 'static) -> Self {
        self.beta = Some(Arc::new(beta));
        self
    }

    pub fn with_reaction(mut self, b: Arc<dyn Reaction<T>>) -> Self {
        self.reaction = b;
        self
    }

    pub fn with_boundary_reaction(mut self, h: Arc<dyn BoundaryReaction<T>>) -> Self {
        self.boundary_reaction = h;
        self
    }

    /// Same operator with all loads (`f`, `F`, `g`) removed.
    pub fn without_loads(&self) -> Self {
        let mut c = self.clone();
        c.source = None;
        c.load_flux = None;
        c.boundary_load = None;
        c
    }

    #[inline]
    pub fn omega_at(&self, x: Point<T>) -> T {
        match &self.omega_density {
            Some(w) => self.omega * w(x),
            None => self.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PLaplaceVariant {
    /// `a0 (s + |z|^{p-2}) z`
    Additive,
    /// `a0 (s^2 + |z|^2)^{(p-2)/2} z`
    Quadratic,
}

/// p-Laplace type coefficient family with power-law lower order terms.
#[derive(Clone)]
pub struct PLaplace<T> {
    pub p: T,
    pub s: T,
    pub variant: PLaplaceVariant,
    pub a0: ScalarField<T>,
    /// Declared bounds `nu <= a0 <= mu`.
    pub a0_bounds: (T, T),
    pub b0: ScalarField<T>,
    pub h0: ScalarField<T>,
    /// Points where `a0`, `b0` and `h0` are validated.
    pub probes: Vec<Point<T>>,
}

impl<T: Real> PLaplace<T> {
    /// Constant-coefficient family: `a0 = 1`, `b0`, `h0` constants.
    pub fn new(p: T, s: T, variant: PLaplaceVariant, b0: T, h0: T) -> Self {
        let k = 10;
        let probes = (0..=k)
            .flat_map(|j| (0..=k).map(move |i| [T::from_usize_lossy(i) / T::from_usize_lossy(k), T::from_usize_lossy(j) / T::from_usize_lossy(k)]))
            .collect();
        Self { p, s, variant, a0: constant(T::one()), a0_bounds: (T::one(), T::one()), b0: constant(b0), h0: constant(h0), probes }
    }

    /// Builds the coefficient set, validating parameters and sampling
    /// `a0`, `b0`, `h0` at the probe points.
    pub fn build(&self) -> Result<CoefficientSet<T>> {
        if !(self.p > T::one()) || !self.p.is_finite() {
            return Err(invalid(format!("growth exponent p = {} must lie in (1, inf)", self.p)));
        }
        if !(self.s >= T::zero()) {
            return Err(invalid(format!("regularization s = {} must be nonnegative", self.s)));
        }
        let (nu, mu) = self.a0_bounds;
        if !(nu > T::zero() && nu <= mu) {
            return Err(invalid(format!("a0 bounds must satisfy 0 < nu <= mu, got ({nu}, {mu})")));
        }
        if self.variant == PLaplaceVariant::Additive && self.p < T::lit(2.0) && self.s > T::zero() {
            return Err(invalid(format!(
                "additive variant with s = {} > 0 and p = {} < 2 grows linearly in |z| and violates |a| <= mu |z|^(p-1) + psi2; use the quadratic variant",
                self.s, self.p
            )));
        }
        for &x in &self.probes {
            let (a0, b0, h0) = ((self.a0)(x), (self.b0)(x), (self.h0)(x));
            if !(a0 >= nu && a0 <= mu) {
                return Err(invalid(format!("a0 = {a0} outside [{nu}, {mu}] at ({}, {})", x[0], x[1])));
            }
            if !(b0 >= T::zero()) {
                return Err(invalid(format!("b0 = {b0} is negative at ({}, {})", x[0], x[1])));
            }
            if !(h0 >= T::zero()) {
                return Err(invalid(format!("h0 = {h0} is negative at ({}, {})", x[0], x[1])));
            }
        }
        Ok(self.build_unchecked())
    }

    /// Builds the coefficient set without validating the fields.
    pub fn build_unchecked(&self) -> CoefficientSet<T> {
        let (p, s, a0) = (self.p, self.s, self.a0.clone());
        let two = T::lit(2.0);
        let radial = match self.variant {
            PLaplaceVariant::Additive => {
                let a0d = a0.clone();
                RadialFluxModel::new(move |x, y| a0(x) * (s + y.powf(p - two)))
                    .with_derivative(move |x, y| a0d(x) * (p - two) * y.powf(p - T::lit(3.0)))
            }
            PLaplaceVariant::Quadratic => {
                let a0d = a0.clone();
                RadialFluxModel::new(move |x, y| a0(x) * (s * s + y * y).powf((p - two) / two))
                    .with_derivative(move |x, y| a0d(x) * (p - two) * y * (s * s + y * y).powf((p - T::lit(4.0)) / two))
            }
        };
        let (nu, mu) = self.a0_bounds;
        let growth = two.powf((p - two) / two);
        let ge2 = p >= two;
        // structure parameters of the p-Laplace family
        let (nu_hat, mu_hat, psi1_extra, psi2) = match self.variant {
            PLaplaceVariant::Additive if s == T::zero() => (nu, mu, T::zero(), T::zero()),
            PLaplaceVariant::Additive => (nu, mu * (T::one() + s), T::zero(), mu * s),
            PLaplaceVariant::Quadratic if ge2 => (nu, mu * growth, T::zero(), mu * growth * s.powf(p - T::one())),
            PLaplaceVariant::Quadratic => (nu * growth, mu, nu * growth * s.powf(p), T::zero()),
        };
        let b0 = self.b0.clone();
        let structure = StructureParams {
            p,
            nu: nu_hat,
            mu: mu_hat,
            eps: T::lit(0.5),
            psi1: Arc::new(move |x| b0(x) + psi1_extra),
            psi2: constant(psi2),
            psi3: constant(T::zero()),
            psi4: self.h0.clone(),
        };
        let mut c = CoefficientSet::from_flux(Arc::new(radial.clone()), structure);
        c.radial = Some(radial);
        c.reaction = Arc::new(PowerReaction { coef: self.b0.clone(), p });
        c.boundary_reaction = Arc::new(PowerBoundaryReaction { coef: self.h0.clone(), p });
        c
    }
}

/// Shorthand for a constant-coefficient p-Laplace set.
pub fn make_p_laplace<T: Real>(p: T, s: T, variant: PLaplaceVariant, b0: T, h0: T) -> Result<CoefficientSet<T>> {
    PLaplace::new(p, s, variant, b0, h0).build()
}

/// Sample grid for the structure checks.
#[derive(Debug, Clone)]
pub struct SampleGrid<T> {
    pub points: Vec<Point<T>>,
    pub u_values: Vec<T>,
    pub z_values: Vec<Point<T>>,
    pub boundary_points: Vec<BoundaryPoint<T>>,
}

impl<T: Real> SampleGrid<T> {
    /// `k x k` interior points of the unit square, `k` points per side on the
    /// boundary, and the given `u` and `z` samples.
    pub fn unit_square(k: usize, u_values: Vec<T>, z_values: Vec<Point<T>>) -> Self {
        let kf = T::from_usize_lossy(k);
        let half = T::lit(0.5);
        let c = |i: usize| (T::from_usize_lossy(i) + half) / kf;
        let points = (0..k).flat_map(|j| (0..k).map(move |i| [c(i), c(j)])).collect();
        let (o, z) = (T::one(), T::zero());
        let mut boundary_points = Vec::new();
        for i in 0..k {
            boundary_points.push(BoundaryPoint { x: [c(i), z], normal: [z, -o], tag: 1 });
            boundary_points.push(BoundaryPoint { x: [o, c(i)], normal: [o, z], tag: 2 });
            boundary_points.push(BoundaryPoint { x: [c(i), o], normal: [z, o], tag: 3 });
            boundary_points.push(BoundaryPoint { x: [z, c(i)], normal: [-o, z], tag: 4 });
        }
        Self { points, u_values, z_values, boundary_points }
    }

    /// Symmetric `u` samples and `z` samples on rings of the given radii.
    pub fn standard(k: usize, magnitudes: &[f64]) -> Self {
        let mut us = vec![T::zero()];
        let mut zs = vec![[T::zero(), T::zero()]];
        for &m in magnitudes {
            us.push(T::lit(m));
            us.push(T::lit(-m));
            for d in 0..8 {
                let th = std::f64::consts::PI * d as f64 / 4.0;
                zs.push([T::lit(m * th.cos()), T::lit(m * th.sin())]);
            }
        }
        Self::unit_square(k, us, zs)
    }

    pub fn len(&self) -> usize {
        self.points.len() * (self.u_values.len() + self.z_values.len()) + self.boundary_points.len() * self.u_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() || (self.u_values.is_empty() && self.z_values.is_empty())
    }
}

/// Outcome of one sampled inequality. Margins are `rhs - lhs`, so a sample
/// passes when its margin is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    pub worst_sample: Option<String>,
    pub samples: usize,
}

impl InequalityCheck {
    fn new(name: &'static str) -> Self {
        Self { name, passed: true, worst_margin: f64::INFINITY, worst_sample: None, samples: 0 }
    }

    fn record(&mut self, margin: f64, scale: f64, location: impl FnOnce() -> String) {
        self.samples += 1;
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_sample = Some(location());
        }
        if margin < -1e-12 * (1.0 + scale) {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub checks: Vec<InequalityCheck>,
    /// psi-fields were nonnegative at every sampled point.
    pub psi_nonnegative: bool,
    pub grid_description: String,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.psi_nonnegative && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn finite<T: Real>(v: T, what: &str, at: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v.to_f64_lossy())
    } else {
        Err(Error::Evaluation { what: format!("{what} = {v}"), location: at() })
    }
}

/// Samples the four growth conditions
/// `z.a >= nu|z|^p - psi1`, `|a| <= mu|z|^{p-1} + psi2`,
/// `|b| <= psi3|z|^{p-1} + psi1|u|^{p-1} + psi1`, `|h| <= psi4|u|^{p-1} + psi4`.
pub fn check_structure<T: Real>(coeffs: &CoefficientSet<T>, grid: &SampleGrid<T>) -> Result<StructureReport> {
    if grid.is_empty() {
        return Err(Error::EmptySelection("structure check needs a nonempty sample grid".into()));
    }
    let sp = &coeffs.structure;
    let (p, nu, mu) = (sp.p, sp.nu, sp.mu);
    let pm1 = p - T::one();
    let zero = [T::zero(), T::zero()];

    // evaluate per interior point in parallel, then merge in index order
    type PointChecks = (InequalityCheck, InequalityCheck, InequalityCheck, bool);
    let per_point: Vec<Result<PointChecks>> = grid
        .points
        .par_iter()
        .map(|&x| {
            let at = |extra: String| format!("x=({}, {}) {extra}", x[0], x[1]);
            let (psi1, psi2, psi3) = ((sp.psi1)(x), (sp.psi2)(x), (sp.psi3)(x));
            let nonneg = psi1 >= T::zero() && psi2 >= T::zero() && psi3 >= T::zero();
            let mut coerc = InequalityCheck::new("coercivity");
            let mut growth = InequalityCheck::new("flux_growth");
            let mut react = InequalityCheck::new("reaction_growth");
            for &z in &grid.z_values {
                let a = coeffs.flux.eval(x, z);
                let r = norm(z);
                let za = finite(dot(z, a), "z.a(x,z)", || at(format!("z=({}, {})", z[0], z[1])))?;
                let lower = (nu * r.powf(p) - psi1).to_f64_lossy();
                coerc.record(za - lower, za.abs() + lower.abs(), || at(format!("z=({}, {})", z[0], z[1])));
                let na = finite(norm(a), "|a(x,z)|", || at(format!("z=({}, {})", z[0], z[1])))?;
                let upper = (mu * r.powf(pm1) + psi2).to_f64_lossy();
                growth.record(upper - na, na + upper.abs(), || at(format!("z=({}, {})", z[0], z[1])));
            }
            let zs: &[Point<T>] = if coeffs.reaction.gradient_dependent() { &grid.z_values } else { std::slice::from_ref(&zero) };
            for &u in &grid.u_values {
                for &z in zs {
                    let b = finite(coeffs.reaction.eval(x, u, z).abs(), "|b(x,u)|", || at(format!("u={u}")))?;
                    let bound = (psi3 * norm(z).powf(pm1) + psi1 * u.abs().powf(pm1) + psi1).to_f64_lossy();
                    react.record(bound - b, b + bound.abs(), || at(format!("u={u} z=({}, {})", z[0], z[1])));
                }
            }
            Ok((coerc, growth, react, nonneg))
        })
        .collect();

    let mut coerc = InequalityCheck::new("coercivity");
    let mut growth = InequalityCheck::new("flux_growth");
    let mut react = InequalityCheck::new("reaction_growth");
    let mut psi_nonnegative = true;
    let merge = |acc: &mut InequalityCheck, c: InequalityCheck| {
        acc.samples += c.samples;
        acc.passed &= c.passed;
        if c.worst_margin < acc.worst_margin {
            acc.worst_margin = c.worst_margin;
            acc.worst_sample = c.worst_sample;
        }
    };
    for r in per_point {
        let (c, g, b, nn) = r?;
        merge(&mut coerc, c);
        merge(&mut growth, g);
        merge(&mut react, b);
        psi_nonnegative &= nn;
    }

    let mut bdry = InequalityCheck::new("boundary_growth");
    for bp in &grid.boundary_points {
        let psi4 = (sp.psi4)(bp.x);
        psi_nonnegative &= psi4 >= T::zero();
        for &u in &grid.u_values {
            let at = || format!("boundary x=({}, {}) u={u}", bp.x[0], bp.x[1]);
            let h = finite(coeffs.boundary_reaction.eval(bp, u).abs(), "|h(x,u)|", at)?;
            let bound = (psi4 * u.abs().powf(pm1) + psi4).to_f64_lossy();
            bdry.record(bound - h, h + bound.abs(), at);
        }
    }
    Ok(StructureReport {
        checks: vec![coerc, growth, react, bdry],
        psi_nonnegative,
        grid_description: format!(
            "{} points, {} u-values, {} z-values, {} boundary points",
            grid.points.len(),
            grid.u_values.len(),
            grid.z_values.len(),
            grid.boundary_points.len()
        ),
    })
}

/// Outcome of one sampled monotonicity condition. `worst_value` is the
/// smallest observed product (or increment for the radial criterion).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Every sample with distinct arguments gave a strictly positive value.
    pub strict: bool,
    pub worst_value: f64,
    pub witness: Option<String>,
    pub samples: usize,
}

impl MonotoneCheck {
    fn new(name: &'static str) -> Self {
        Self { name, passed: true, strict: true, worst_value: f64::INFINITY, witness: None, samples: 0 }
    }

    fn record(&mut self, value: f64, scale: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        let tol = 1e-12 * (1.0 + scale);
        if value < self.worst_value {
            self.worst_value = value;
            self.witness = Some(witness());
        }
        if value < -tol {
            self.passed = false;
        }
        if value <= tol {
            self.strict = false;
        }
    }

    /// Human readable verdict.
    pub fn verdict(&self) -> &'static str {
        match (self.passed, self.strict) {
            (false, _) => "fail",
            (true, true) => "pass (strict)",
            (true, false) => "boundary case: >= 0 with equality",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub checks: Vec<MonotoneCheck>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&MonotoneCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks that `y -> m(x,y) y` is nondecreasing over consecutive samples at
/// each point `x`.
pub fn check_monotone_radial<T: Real>(model: &RadialFluxModel<T>, x_points: &[Point<T>], y_samples: &[T]) -> Result<MonotonicityReport> {
    if y_samples.first().is_some_and(|&y| y < T::zero()) || y_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("radial samples must be nonnegative and strictly increasing"));
    }
    let g = |x: Point<T>, y: T| if y == T::zero() { T::zero() } else { model.modulus(x, y) * y };
    let mut check = MonotoneCheck::new("radial");
    for &x in x_points {
        for w in y_samples.windows(2) {
            let (g0, g1) = (g(x, w[0]), g(x, w[1]));
            let at = || format!("x=({}, {})", x[0], x[1]);
            let g0f = finite(g0, "m(x,y) y", at)?;
            let g1f = finite(g1, "m(x,y) y", at)?;
            check.record(g1f - g0f, g0f.abs() + g1f.abs(), || {
                format!("x=({}, {}) y1={} y2={}: m(y1)y1={} > m(y2)y2={}", x[0], x[1], w[0], w[1], g0f, g1f)
            });
        }
    }
    Ok(MonotonicityReport { checks: vec![check] })
}

/// Pair samples for [`check_monotone_pairwise`].
#[derive(Debug, Clone, Default)]
pub struct PairSamples<T> {
    pub flux: Vec<(Point<T>, Point<T>, Point<T>)>,
    pub reaction: Vec<(Point<T>, T, T)>,
    pub boundary: Vec<(BoundaryPoint<T>, T, T)>,
}

impl<T: Real> PairSamples<T> {
    /// Deterministic random pairs on the unit square: a third aligned, a
    /// third anti-aligned and a third in general position.
    pub fn random(seed: u64, count: usize, magnitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Self::default();
        let l = T::lit;
        for k in 0..count {
            let x = [l(rng.random::<f64>()), l(rng.random::<f64>())];
            let th = rng.random::<f64>() * std::f64::consts::TAU;
            let r1 = rng.random::<f64>() * magnitude;
            let r2 = rng.random::<f64>() * magnitude;
            let z1 = [l(r1 * th.cos()), l(r1 * th.sin())];
            let z2 = match k % 3 {
                0 => [l(r2 * th.cos()), l(r2 * th.sin())],
                1 => [l(-r2 * th.cos()), l(-r2 * th.sin())],
                _ => {
                    let th2 = rng.random::<f64>() * std::f64::consts::TAU;
                    [l(r2 * th2.cos()), l(r2 * th2.sin())]
                }
            };
            out.flux.push((x, z1, z2));
            let u1 = l((2.0 * rng.random::<f64>() - 1.0) * magnitude);
            let u2 = l((2.0 * rng.random::<f64>() - 1.0) * magnitude);
            out.reaction.push((x, u1, u2));
            let side = rng.random_range(0..4u32);
            let s = l(rng.random::<f64>());
            let (o, z) = (T::one(), T::zero());
            let bp = match side {
                0 => BoundaryPoint { x: [s, z], normal: [z, -o], tag: 1 },
                1 => BoundaryPoint { x: [o, s], normal: [o, z], tag: 2 },
                2 => BoundaryPoint { x: [s, o], normal: [z, o], tag: 3 },
                _ => BoundaryPoint { x: [z, s], normal: [-o, z], tag: 4 },
            };
            out.boundary.push((bp, u1, u2));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.flux.len() + self.reaction.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Samples the three monotonicity conditions on `a`, `b` and `h`.
pub fn check_monotone_pairwise<T: Real>(coeffs: &CoefficientSet<T>, pairs: &PairSamples<T>) -> Result<MonotonicityReport> {
    let mut flux = MonotoneCheck::new("flux");
    let values: Vec<Result<(f64, f64)>> = pairs
        .flux
        .par_iter()
        .map(|&(x, z1, z2)| {
            let (a1, a2) = (coeffs.flux.eval(x, z1), coeffs.flux.eval(x, z2));
            let dz = [z1[0] - z2[0], z1[1] - z2[1]];
            let da = [a1[0] - a2[0], a1[1] - a2[1]];
            let v = finite(dot(dz, da), "(z1-z2).(a(z1)-a(z2))", || format!("x=({}, {})", x[0], x[1]))?;
            Ok((v, (norm(dz) * (norm(a1) + norm(a2))).to_f64_lossy()))
        })
        .collect();
    for (k, r) in values.into_iter().enumerate() {
        let (v, scale) = r?;
        let (x, z1, z2) = pairs.flux[k];
        flux.record(v, scale, || format!("x=({}, {}) z1=({}, {}) z2=({}, {}): value {v}", x[0], x[1], z1[0], z1[1], z2[0], z2[1]));
    }
    let zero = [T::zero(), T::zero()];
    let mut react = MonotoneCheck::new("reaction");
    for &(x, u1, u2) in &pairs.reaction {
        let (b1, b2) = (coeffs.reaction.eval(x, u1, zero), coeffs.reaction.eval(x, u2, zero));
        let v = finite((u1 - u2) * (b1 - b2), "(u1-u2)(b(u1)-b(u2))", || format!("x=({}, {})", x[0], x[1]))?;
        react.record(v, ((u1 - u2).abs() * (b1.abs() + b2.abs())).to_f64_lossy(), || {
            format!("x=({}, {}) u1={u1} u2={u2}: value {v}", x[0], x[1])
        });
    }
    let mut bdry = MonotoneCheck::new("boundary_reaction");
    for (bp, u1, u2) in &pairs.boundary {
        let (h1, h2) = (coeffs.boundary_reaction.eval(bp, *u1), coeffs.boundary_reaction.eval(bp, *u2));
        let v = finite((*u1 - *u2) * (h1 - h2), "(u1-u2)(h(u1)-h(u2))", || format!("x=({}, {})", bp.x[0], bp.x[1]))?;
        bdry.record(v, ((*u1 - *u2).abs() * (h1.abs() + h2.abs())).to_f64_lossy(), || {
            format!("boundary x=({}, {}) u1={u1} u2={u2}: value {v}", bp.x[0], bp.x[1])
        });
    }
    Ok(MonotonicityReport { checks: vec![flux, react, bdry] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(p: f64, s: f64, v: PLaplaceVariant) -> CoefficientSet<f64> {
        make_p_laplace(p, s, v, 0.0, 0.0).unwrap()
    }

    #[test]
    fn p_laplace_flux_values() {
        let o = [0.3, 0.7];
        assert_eq!(pl(2.0, 0.0, PLaplaceVariant::Additive).flux.eval(o, [1.0, 2.0]), [1.0, 2.0]);
        let a = pl(3.0, 0.0, PLaplaceVariant::Additive).flux.eval(o, [3.0, 4.0]);
        assert!((a[0] - 15.0).abs() < 1e-13 && (a[1] - 20.0).abs() < 1e-13);
        assert_eq!(pl(4.0, 1.0, PLaplaceVariant::Quadratic).flux.eval(o, [0.0, 0.0]), [0.0, 0.0]);
        // singular modulus: a(x,0) is the limit value 0
        assert_eq!(pl(1.5, 0.0, PLaplaceVariant::Additive).flux.eval(o, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn p_laplace_rejects_bad_parameters() {
        assert!(matches!(make_p_laplace(1.0, 0.0, PLaplaceVariant::Additive, 0.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_p_laplace(0.5, 0.0, PLaplaceVariant::Additive, 0.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_p_laplace(3.0, 0.0, PLaplaceVariant::Additive, -1.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_p_laplace(3.0, 0.0, PLaplaceVariant::Additive, 0.0, -0.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_p_laplace(1.5, 1.0, PLaplaceVariant::Additive, 0.0, 0.0), Err(Error::InvalidParameter(_))));
        let mut fam = PLaplace::new(3.0, 0.0, PLaplaceVariant::Additive, 0.0, 0.0);
        fam.b0 = Arc::new(|x: Point<f64>| if x[0] > 0.75 { -1.0 } else { 1.0 });
        let err = fam.build().unwrap_err().to_string();
        assert!(err.contains("negative") && err.contains("(0.8"), "{err}");
    }

    #[test]
    fn lower_order_terms_are_odd() {
        let c = make_p_laplace(3.0, 0.0, PLaplaceVariant::Additive, 2.0, 1.5).unwrap();
        let bp = BoundaryPoint { x: [0.0, 0.5], normal: [-1.0, 0.0], tag: 4 };
        for u in [0.0, 0.3, 1.0, 2.7] {
            assert_eq!(c.reaction.eval([0.2, 0.2], -u, [0.0, 0.0]), -c.reaction.eval([0.2, 0.2], u, [0.0, 0.0]));
            assert_eq!(c.boundary_reaction.eval(&bp, -u), -c.boundary_reaction.eval(&bp, u));
        }
        assert_eq!(c.reaction.eval([0.2, 0.2], 2.0, [0.0, 0.0]), 8.0);
    }

    #[test]
    fn structure_passes_for_linear_case() {
        let c = pl(2.0, 0.0, PLaplaceVariant::Additive);
        let rep = check_structure(&c, &SampleGrid::standard(4, &[0.5, 1.0, 3.0])).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.checks.len(), 4);
    }

    #[test]
    fn structure_detects_excess_growth() {
        let flux = FnFlux::new(|_, z: Point<f64>| [2.0 * z[0], 2.0 * z[1]]);
        let c = CoefficientSet::from_flux(Arc::new(flux), StructureParams::new(2.0, 1.0, 1.0).unwrap());
        let grid = SampleGrid::unit_square(1, vec![0.0], vec![[1.0, 0.0]]);
        let rep = check_structure(&c, &grid).unwrap();
        let g = rep.check("flux_growth").unwrap();
        assert!(!g.passed);
        assert!((g.worst_margin + 1.0).abs() < 1e-14);
        assert!(rep.check("coercivity").unwrap().passed);
    }

    #[test]
    fn reaction_growth_cubic_case() {
        let mut c = make_p_laplace(3.0, 0.0, PLaplaceVariant::Additive, 1.0, 0.0).unwrap();
        c.structure.psi1 = constant(1.0);
        let grid = SampleGrid::unit_square(2, vec![-2.0, 0.0, 2.0], vec![[1.0, 0.0]]);
        let rep = check_structure(&c, &grid).unwrap();
        assert!(rep.check("reaction_growth").unwrap().passed);
    }

    #[test]
    fn structure_reports_nonfinite_evaluation() {
        let flux = FnFlux::new(|_, z: Point<f64>| [z[0] / 0.0, z[1]]);
        let c = CoefficientSet::from_flux(Arc::new(flux), StructureParams::new(2.0, 1.0, 1.0).unwrap());
        let grid = SampleGrid::unit_square(1, vec![0.0], vec![[1.0, 0.0]]);
        assert!(matches!(check_structure(&c, &grid), Err(Error::Evaluation { .. })));
        let empty = SampleGrid::<f64>::unit_square(0, vec![], vec![]);
        assert!(matches!(check_structure(&c, &empty), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn radial_criterion_examples() {
        let ys: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let xs = [[0.5, 0.5]];
        let cubic = RadialFluxModel::new(|_, y: f64| y);
        assert!(check_monotone_radial(&cubic, &xs, &ys).unwrap().passed());
        let decreasing = RadialFluxModel::new(|_, y: f64| 1.0 / (y * y));
        let rep = check_monotone_radial(&decreasing, &xs, &ys[1..]).unwrap();
        assert!(!rep.passed());
        assert!(rep.checks[0].witness.is_some());
        let quad = RadialFluxModel::new(|_, y: f64| (1.0 + y * y).powf(-0.25));
        assert!(check_monotone_radial(&quad, &xs, &ys).unwrap().passed());
        assert!(check_monotone_radial(&cubic, &xs, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn pairwise_examples() {
        let c = pl(3.0, 0.0, PLaplaceVariant::Additive);
        let pairs = PairSamples { flux: vec![([0.5, 0.5], [1.0, 0.0], [0.0, 1.0])], ..Default::default() };
        let rep = check_monotone_pairwise(&c, &pairs).unwrap();
        assert!(rep.passed());
        assert!((rep.check("flux").unwrap().worst_value - 2.0).abs() < 1e-14);

        let cubic = CoefficientSet::from_flux(c.flux.clone(), c.structure.clone()).with_reaction(Arc::new(FnReaction::new(|_, u: f64| u * u * u)));
        let pairs = PairSamples { reaction: vec![([0.5, 0.5], 1.0, -1.0)], ..Default::default() };
        let rep = check_monotone_pairwise(&cubic, &pairs).unwrap();
        assert_eq!(rep.check("reaction").unwrap().worst_value, 4.0);

        let rotation = CoefficientSet::from_flux(Arc::new(FnFlux::new(|_, z: Point<f64>| [z[1], -z[0]])), StructureParams::new(2.0, 1.0, 1.0).unwrap());
        let pairs = PairSamples::random(7, 300, 3.0);
        let rep = check_monotone_pairwise(&rotation, &pairs).unwrap();
        let flux = rep.check("flux").unwrap();
        assert!(flux.passed && !flux.strict);
        assert_eq!(flux.verdict(), "boundary case: >= 0 with equality");
    }

    #[test]
    fn analytic_flux_derivative_matches_differences() {
        for (p, s, v) in [(3.0, 0.0, PLaplaceVariant::Additive), (1.5, 0.0, PLaplaceVariant::Additive), (4.0, 0.5, PLaplaceVariant::Quadratic), (1.5, 1.0, PLaplaceVariant::Quadratic)] {
            let c = pl(p, s, v);
            let radial = c.radial.clone().unwrap();
            let fd = FnFlux::new(move |x, z| radial.eval(x, z));
            for z in [[0.3, -0.8], [2.0, 1.0], [-0.05, 0.02]] {
                let (da, dn) = (c.flux.derivative([0.1, 0.1], z), fd.derivative([0.1, 0.1], z));
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((da[i][j] - dn[i][j]).abs() <= 1e-6 * (1.0 + da[i][j].abs()), "p={p} z={z:?}");
                    }
                }
            }
        }
    }
}
