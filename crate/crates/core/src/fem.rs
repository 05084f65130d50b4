//! P1 finite element assembly of the Robin weak form.
//!
//! The residual of `u` tested against the hat function `phi_i` is
//!
//! ```text
//! R_i(u) = int grad phi_i . a(x, grad u) + int phi_i (b(x,u) + omega w(x) u - f)
//!        - int grad phi_i . F + int_bdry phi_i (h(x,u) - g)
//! ```
//!
//! Flux and `F` are evaluated at element centroids (the P1 gradient is
//! element-constant). Lower order and boundary terms use nodal quadrature in
//! [`MassMode::Lumped`] and exact-for-P2 rules in [`MassMode::Consistent`].

use std::sync::Arc;

use rayon::prelude::*;

use crate::coeffs::{secant_modulus, BoundaryField, BoundaryPoint, CoefficientSet, TANGENT_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::mesh::{BoundaryEdge, EdgeRule, Mesh, TriangleRule};
use crate::scalar::{dot, mat_vec, Point, Real};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassMode {
    Consistent,
    #[default]
    Lumped,
}

impl MassMode {
    pub fn is_lumped(self) -> bool {
        self == MassMode::Lumped
    }

    pub(crate) fn triangle_rule<T: Real>(self) -> TriangleRule<T> {
        match self {
            MassMode::Lumped => TriangleRule::triangle_vertices(),
            MassMode::Consistent => TriangleRule::triangle(2).expect("degree 2 rule exists"),
        }
    }

    pub(crate) fn edge_rule<T: Real>(self) -> EdgeRule<T> {
        match self {
            MassMode::Lumped => EdgeRule::edge_endpoints(),
            MassMode::Consistent => EdgeRule::edge(2).expect("degree 2 rule exists"),
        }
    }
}

impl std::str::FromStr for MassMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lumped" => Ok(MassMode::Lumped),
            "consistent" => Ok(MassMode::Consistent),
            other => Err(invalid(format!("unknown mass mode '{other}' (expected lumped or consistent)"))),
        }
    }
}

/// Piecewise linear field given by its vertex values.
#[derive(Debug, Clone)]
pub struct DiscreteField<T> {
    pub mesh: Arc<Mesh<T>>,
    pub values: Vec<T>,
}

impl<T: Real> DiscreteField<T> {
    pub fn new(mesh: Arc<Mesh<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(invalid(format!("field has {} values but mesh has {} vertices", values.len(), mesh.num_vertices())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation { what: format!("field value {}", values[k]), location: format!("vertex {k}") });
        }
        Ok(Self { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh<T>>, f: impl Fn(Point<T>) -> T) -> Result<Self> {
        let values = mesh.vertices.iter().map(|&x| f(x)).collect();
        Self::new(mesh, values)
    }

    pub fn constant(mesh: Arc<Mesh<T>>, c: T) -> Self {
        let n = mesh.num_vertices();
        Self { mesh, values: vec![c; n] }
    }

    pub fn zeros(mesh: Arc<Mesh<T>>) -> Self {
        Self::constant(mesh, T::zero())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> Point<T> {
        element_gradient(&self.mesh, t, &self.values)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Value at barycentric coordinates of triangle `t`.
    pub fn eval_bary(&self, t: usize, bary: &[T; 3]) -> T {
        let tri = self.mesh.triangles[t];
        bary[0] * self.values[tri[0]] + bary[1] * self.values[tri[1]] + bary[2] * self.values[tri[2]]
    }

    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.mesh.clone(), values)
    }
}

pub(crate) fn element_gradient<T: Real>(mesh: &Mesh<T>, t: usize, u: &[T]) -> Point<T> {
    let g = mesh.hat_gradients(t);
    let tri = mesh.triangles[t];
    let mut z = [T::zero(); 2];
    for k in 0..3 {
        z[0] += u[tri[k]] * g[k][0];
        z[1] += u[tri[k]] * g[k][1];
    }
    z
}

pub(crate) fn boundary_point<T: Real>(mesh: &Mesh<T>, e: &BoundaryEdge, bary: &[T; 2]) -> BoundaryPoint<T> {
    BoundaryPoint { x: mesh.edge_point(e, bary), normal: mesh.outward_normal(e), tag: e.tag }
}

fn check_len<T>(mesh: &Mesh<T>, u: &[T]) -> Result<()> {
    if u.len() != mesh.vertices.len() {
        return Err(invalid(format!("vector has {} entries but mesh has {} vertices", u.len(), mesh.vertices.len())));
    }
    Ok(())
}

fn finite_or<T: Real>(vals: &[T], what: &str, location: impl FnOnce() -> String) -> Result<()> {
    match vals.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::Evaluation { what: format!("{what} = {v}"), location: location() }),
        None => Ok(()),
    }
}

fn element_residual<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], t: usize, rule: &TriangleRule<T>) -> Result<[T; 3]> {
    let tri = mesh.triangles[t];
    let area = mesh.signed_area(t);
    let g = mesh.hat_gradients(t);
    let z = element_gradient(mesh, t, u);
    let xc = mesh.centroid(t);
    let mut a = coeffs.flux.eval(xc, z);
    if let Some(big_f) = &coeffs.load_flux {
        let fv = big_f(xc);
        a = [a[0] - fv[0], a[1] - fv[1]];
    }
    let mut r = [area * dot(g[0], a), area * dot(g[1], a), area * dot(g[2], a)];
    for (bary, &w) in rule.points.iter().zip(&rule.weights) {
        let x = mesh.triangle_point(t, bary);
        let uq = bary[0] * u[tri[0]] + bary[1] * u[tri[1]] + bary[2] * u[tri[2]];
        let mut s = coeffs.reaction.eval(x, uq, z) + coeffs.omega_at(x) * uq;
        if let Some(f) = &coeffs.source {
            s -= f(x);
        }
        for k in 0..3 {
            r[k] += area * w * bary[k] * s;
        }
    }
    finite_or(&r, "residual contribution", || format!("element {t}"))?;
    Ok(r)
}

fn edge_residual<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], ei: usize, rule: &EdgeRule<T>) -> Result<[T; 2]> {
    let e = &mesh.boundary_edges[ei];
    let len = mesh.edge_length(e);
    let mut r = [T::zero(); 2];
    for (bary, &w) in rule.points.iter().zip(&rule.weights) {
        let bp = boundary_point(mesh, e, bary);
        let uq = bary[0] * u[e.v[0]] + bary[1] * u[e.v[1]];
        let mut s = coeffs.boundary_reaction.eval(&bp, uq);
        if let Some(g) = &coeffs.boundary_load {
            s -= g(&bp);
        }
        r[0] += len * w * bary[0] * s;
        r[1] += len * w * bary[1] * s;
    }
    finite_or(&r, "boundary residual contribution", || format!("boundary edge {ei}"))?;
    Ok(r)
}

/// Weak-form residual `R(u)`.
pub fn assemble_residual<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], mode: MassMode) -> Result<Vec<T>> {
    check_len(mesh, u)?;
    let rule = mode.triangle_rule::<T>();
    let local: Vec<Result<[T; 3]>> = (0..mesh.num_triangles()).into_par_iter().map(|t| element_residual(mesh, coeffs, u, t, &rule)).collect();
    let mut res = vec![T::zero(); mesh.num_vertices()];
    for (t, r) in local.into_iter().enumerate() {
        let r = r?;
        for (k, &v) in mesh.triangles[t].iter().enumerate() {
            res[v] += r[k];
        }
    }
    let erule = mode.edge_rule::<T>();
    for ei in 0..mesh.boundary_edges.len() {
        let r = edge_residual(mesh, coeffs, u, ei, &erule)?;
        let e = &mesh.boundary_edges[ei];
        res[e.v[0]] += r[0];
        res[e.v[1]] += r[1];
    }
    Ok(res)
}

/// Evaluates single rows of the residual from the elements around a vertex.
pub(crate) struct RowResidual<'a, T: Real> {
    mesh: &'a Mesh<T>,
    coeffs: &'a CoefficientSet<T>,
    rule: TriangleRule<T>,
    erule: EdgeRule<T>,
    /// `(element, local index)` pairs around each vertex.
    stars: Vec<Vec<(usize, usize)>>,
    edge_stars: Vec<Vec<(usize, usize)>>,
}

impl<'a, T: Real> RowResidual<'a, T> {
    pub(crate) fn new(mesh: &'a Mesh<T>, coeffs: &'a CoefficientSet<T>, mode: MassMode) -> Self {
        let n = mesh.num_vertices();
        let mut stars = vec![Vec::new(); n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for (k, &v) in tri.iter().enumerate() {
                stars[v].push((t, k));
            }
        }
        let mut edge_stars = vec![Vec::new(); n];
        for (ei, e) in mesh.boundary_edges.iter().enumerate() {
            for (k, &v) in e.v.iter().enumerate() {
                edge_stars[v].push((ei, k));
            }
        }
        Self { mesh, coeffs, rule: mode.triangle_rule(), erule: mode.edge_rule(), stars, edge_stars }
    }

    pub(crate) fn row(&self, u: &[T], i: usize) -> Result<T> {
        let mut r = T::zero();
        for &(t, k) in &self.stars[i] {
            r += element_residual(self.mesh, self.coeffs, u, t, &self.rule)?[k];
        }
        for &(ei, k) in &self.edge_stars[i] {
            r += edge_residual(self.mesh, self.coeffs, u, ei, &self.erule)?[k];
        }
        Ok(r)
    }
}

#[derive(Clone, Copy)]
enum Linearization {
    Tangent,
    Secant,
}

fn assemble_operator<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], mode: MassMode, lin: Linearization) -> Result<SparseMatrix<T>> {
    check_len(mesh, u)?;
    let rule = mode.triangle_rule::<T>();
    let floor = T::lit(TANGENT_FLOOR);
    let grad_dep = coeffs.reaction.gradient_dependent();
    let local: Vec<Result<[[T; 3]; 3]>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles[t];
            let area = mesh.signed_area(t);
            let g = mesh.hat_gradients(t);
            let z = element_gradient(mesh, t, u);
            let xc = mesh.centroid(t);
            let mut k = [[T::zero(); 3]; 3];
            match lin {
                Linearization::Tangent => {
                    let d = coeffs.flux.derivative(xc, z);
                    for j in 0..3 {
                        let dg = mat_vec(&d, g[j]);
                        for i in 0..3 {
                            k[i][j] = area * dot(g[i], dg);
                        }
                    }
                }
                Linearization::Secant => {
                    let m = secant_modulus(coeffs.flux.as_ref(), xc, z);
                    for j in 0..3 {
                        for i in 0..3 {
                            k[i][j] = area * m * dot(g[i], g[j]);
                        }
                    }
                }
            }
            for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.triangle_point(t, bary);
                let uq = bary[0] * u[tri[0]] + bary[1] * u[tri[1]] + bary[2] * u[tri[2]];
                let db = match lin {
                    Linearization::Tangent => coeffs.reaction.du(x, uq, z),
                    Linearization::Secant => {
                        if uq.abs() > floor {
                            (coeffs.reaction.eval(x, uq, z) / uq).max(T::zero())
                        } else {
                            coeffs.reaction.du(x, uq, z).max(T::zero())
                        }
                    }
                };
                let c = db + coeffs.omega_at(x);
                let bz = if grad_dep && matches!(lin, Linearization::Tangent) { coeffs.reaction.dz(x, uq, z) } else { [T::zero(); 2] };
                for i in 0..3 {
                    for j in 0..3 {
                        k[i][j] += area * w * bary[i] * (c * bary[j] + dot(bz, g[j]));
                    }
                }
            }
            finite_or(&k.concat(), "tangent contribution", || format!("element {t}"))?;
            Ok(k)
        })
        .collect();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles() + 4 * mesh.boundary_edges.len());
    for (t, k) in local.into_iter().enumerate() {
        let k = k?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], k[i][j]));
            }
        }
    }
    let erule = mode.edge_rule::<T>();
    for (ei, e) in mesh.boundary_edges.iter().enumerate() {
        let len = mesh.edge_length(e);
        let mut k = [[T::zero(); 2]; 2];
        for (bary, &w) in erule.points.iter().zip(&erule.weights) {
            let bp = boundary_point(mesh, e, bary);
            let uq = bary[0] * u[e.v[0]] + bary[1] * u[e.v[1]];
            let dh = match lin {
                Linearization::Tangent => coeffs.boundary_reaction.du(&bp, uq),
                Linearization::Secant => {
                    if uq.abs() > floor {
                        (coeffs.boundary_reaction.eval(&bp, uq) / uq).max(T::zero())
                    } else {
                        coeffs.boundary_reaction.du(&bp, uq).max(T::zero())
                    }
                }
            };
            for i in 0..2 {
                for j in 0..2 {
                    k[i][j] += len * w * dh * bary[i] * bary[j];
                }
            }
        }
        finite_or(&k.concat(), "boundary tangent contribution", || format!("boundary edge {ei}"))?;
        for i in 0..2 {
            for j in 0..2 {
                trip.push((e.v[i], e.v[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.num_vertices(), trip)
}

/// Jacobian of [`assemble_residual`] at `u`. Singular power laws are
/// regularized at vanishing arguments, the residual itself is not.
pub fn assemble_tangent<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], mode: MassMode) -> Result<SparseMatrix<T>> {
    assemble_operator(mesh, coeffs, u, mode, Linearization::Tangent)
}

/// Lagged-coefficient (Kacanov) operator at `u`: secant moduli of the flux
/// and the lower order terms, always symmetric positive semidefinite.
pub fn assemble_secant<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], mode: MassMode) -> Result<SparseMatrix<T>> {
    assemble_operator(mesh, coeffs, u, mode, Linearization::Secant)
}

/// P1 mass matrix, consistent or row-sum lumped.
pub fn assemble_mass<T: Real>(mesh: &Mesh<T>, lumped: bool) -> SparseMatrix<T> {
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        for i in 0..3 {
            if lumped {
                trip.push((tri[i], tri[i], area / T::lit(3.0)));
            } else {
                for j in 0..3 {
                    let c = if i == j { T::lit(2.0) } else { T::one() };
                    trip.push((tri[i], tri[j], area * c / T::lit(12.0)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(mesh.num_vertices(), trip).expect("mesh indices are in range")
}

/// `beta`-weighted P1 mass on the boundary edges; interior rows are empty.
/// The consistent variant integrates `beta` with two-point Gauss quadrature,
/// the lumped one with the trapezoidal rule.
pub fn assemble_boundary_mass<T: Real>(mesh: &Mesh<T>, beta: &BoundaryField<T>, lumped: bool) -> Result<SparseMatrix<T>> {
    let rule = if lumped { MassMode::Lumped } else { MassMode::Consistent }.edge_rule::<T>();
    let mut trip = Vec::with_capacity(4 * mesh.boundary_edges.len());
    for (ei, e) in mesh.boundary_edges.iter().enumerate() {
        let len = mesh.edge_length(e);
        let mut k = [[T::zero(); 2]; 2];
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let bp = boundary_point(mesh, e, bary);
            let b = beta(&bp);
            if !(b > T::zero()) || !b.is_finite() {
                return Err(invalid(format!("Wentzell weight beta = {b} must be positive, at ({}, {}) on boundary edge {ei}", bp.x[0], bp.x[1])));
            }
            for i in 0..2 {
                for j in 0..2 {
                    k[i][j] += len * w * b * bary[i] * bary[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                trip.push((e.v[i], e.v[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.num_vertices(), trip)
}

/// Bundle of the assembled forms at a state `u`.
#[derive(Debug, Clone)]
pub struct AssembledForms<T> {
    pub residual: Vec<T>,
    pub tangent: SparseMatrix<T>,
    pub mass_consistent: SparseMatrix<T>,
    pub mass_lumped: SparseMatrix<T>,
    pub mass_boundary: Option<SparseMatrix<T>>,
}

pub fn assemble_all<T: Real>(mesh: &Mesh<T>, coeffs: &CoefficientSet<T>, u: &[T], mode: MassMode) -> Result<AssembledForms<T>> {
    Ok(AssembledForms {
        residual: assemble_residual(mesh, coeffs, u, mode)?,
        tangent: assemble_tangent(mesh, coeffs, u, mode)?,
        mass_consistent: assemble_mass(mesh, false),
        mass_lumped: assemble_mass(mesh, true),
        mass_boundary: coeffs.beta.as_ref().map(|b| assemble_boundary_mass(mesh, b, mode.is_lumped())).transpose()?,
    })
}
