//! Bi-Lipschitz changes of variables: Jacobian bounds, boundary measure
//! density, push-forward of coefficients and even reflection across a line.
//!
//! A map `psi` sends the source domain (where the transformed problem lives)
//! onto the image domain (where the original coefficients are defined). The
//! Jacobian `J = psi'` is stored with `J[i][j] = d psi_i / d x_j`, so
//! gradients of pulled-back functions transform as `z -> J^{-T} z`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::coeffs::{check_structure, BoundaryPoint, BoundaryReaction, CoefficientSet, Flux, Reaction, SampleGrid, StructureParams, StructureReport};
use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::fem::DiscreteField;
use crate::mesh::{BoundaryEdge, EdgeRule, Mesh};
use crate::scalar::{det, inverse, mat_t_vec, mat_vec, mat_mul, norm, spectral_norm, transpose, Mat2, Point, Real};

type PointMap<T> = Arc<dyn Fn(Point<T>) -> Point<T> + Send + Sync>;
type JacobianFn<T> = Arc<dyn Fn(Point<T>) -> Mat2<T> + Send + Sync>;

/// Planar bi-Lipschitz map with its inverse and declared Lipschitz constants
/// `(L_fwd, L_inv)` of the map and of its inverse.
#[derive(Clone)]
pub struct BiLipschitzMap<T> {
    pub name: String,
    forward: PointMap<T>,
    inverse: PointMap<T>,
    jacobian: Option<JacobianFn<T>>,
    pub lipschitz: (T, T),
}

impl<T: Real> fmt::Debug for BiLipschitzMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BiLipschitzMap")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl<T: Real> BiLipschitzMap<T> {
    pub fn new(
        name: impl Into<String>,
        forward: impl Fn(Point<T>) -> Point<T> + Send + Sync + 'static,
        inverse: impl Fn(Point<T>) -> Point<T> + Send + Sync + 'static,
        lipschitz: (T, T),
    ) -> Result<Self> {
        if !(lipschitz.0 > T::zero() && lipschitz.1 > T::zero()) {
            return Err(invalid(format!("Lipschitz constants must be positive, got ({}, {})", lipschitz.0, lipschitz.1)));
        }
        Ok(Self { name: name.into(), forward: Arc::new(forward), inverse: Arc::new(inverse), jacobian: None, lipschitz })
    }

    pub fn with_jacobian(mut self, j: impl Fn(Point<T>) -> Mat2<T> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// Linear map `x -> A x` with exact Lipschitz constants.
    pub fn linear(name: impl Into<String>, a: Mat2<T>) -> Result<Self> {
        let ainv = inverse(&a).ok_or_else(|| invalid("linear map matrix is singular"))?;
        let lips = (spectral_norm(&a), spectral_norm(&ainv));
        Ok(Self::new(name, move |x| mat_vec(&a, x), move |x| mat_vec(&ainv, x), lips)?.with_jacobian(move |_| a))
    }

    pub fn identity() -> Self {
        let i = [[T::one(), T::zero()], [T::zero(), T::one()]];
        Self::linear("identity", i).expect("identity is invertible")
    }

    pub fn scale(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(invalid(format!("scale factor must be positive, got {c}")));
        }
        Self::linear(format!("scale:{c}"), [[c, T::zero()], [T::zero(), c]])
    }

    /// `(x, y) -> (x + c y, y)`.
    pub fn shear(c: T) -> Result<Self> {
        if !c.is_finite() {
            return Err(invalid(format!("shear factor must be finite, got {c}")));
        }
        Self::linear(format!("shear:{c}"), [[T::one(), c], [T::zero(), T::one()]])
    }

    /// `(x, y) -> (x, -y)`.
    pub fn reflect_y() -> Self {
        Self::linear("reflect_y", [[T::one(), T::zero()], [T::zero(), -T::one()]]).expect("reflection is invertible")
    }

    /// Built-in map by name: `identity`, `scale:<c>`, `shear:<c>`, `reflect_y`.
    pub fn by_name(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let parse = |a: Option<&str>| -> Result<T> {
            let a = a.ok_or_else(|| invalid(format!("map '{name}' needs a parameter, as in '{name}:2'")))?;
            a.parse::<T>().map_err(|_| invalid(format!("bad map parameter '{a}'")))
        };
        match name {
            "identity" => Ok(Self::identity()),
            "scale" => Self::scale(parse(arg)?),
            "shear" => Self::shear(parse(arg)?),
            "reflect_y" => Ok(Self::reflect_y()),
            other => Err(invalid(format!("unknown map '{other}' (expected identity, scale:<c>, shear:<c>, reflect_y)"))),
        }
    }

    /// User map from expression strings over `x`, `y` for both directions.
    /// The Jacobian is obtained by central differences.
    pub fn from_expressions(forward: [&str; 2], inverse: [&str; 2], lipschitz: (T, T)) -> Result<Self> {
        let f = [Expr::parse(forward[0], &["x", "y"])?, Expr::parse(forward[1], &["x", "y"])?];
        let g = [Expr::parse(inverse[0], &["x", "y"])?, Expr::parse(inverse[1], &["x", "y"])?];
        let name = format!("({}, {})", forward[0], forward[1]);
        Self::new(name, move |p: Point<T>| [f[0].eval(&p), f[1].eval(&p)], move |p: Point<T>| [g[0].eval(&p), g[1].eval(&p)], lipschitz)
    }

    pub fn apply(&self, x: Point<T>) -> Point<T> {
        (self.forward)(x)
    }

    pub fn apply_inverse(&self, y: Point<T>) -> Point<T> {
        (self.inverse)(y)
    }

    /// `psi'(x)`, analytic when available, otherwise by central differences
    /// with relative step `1e-6`.
    pub fn jacobian(&self, x: Point<T>) -> Mat2<T> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let mut jac = [[T::zero(); 2]; 2];
        for k in 0..2 {
            let h = T::lit(1e-6) * x[k].abs().max(T::one());
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (self.apply(xp), self.apply(xm));
            for i in 0..2 {
                jac[i][k] = (fp[i] - fm[i]) / (h + h);
            }
        }
        jac
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Bounds `[L_inv^{-2}, 2 L_fwd^2]` for `|det psi'|` in the plane.
    pub fn determinant_bounds(&self) -> (T, T) {
        let (lf, li) = self.lipschitz;
        (T::one() / (li * li), T::lit(2.0) * lf * lf)
    }

    /// Bounds implied by the declared Lipschitz constants.
    pub fn declared_bounds(&self) -> MapBounds<T> {
        let (lf, li) = self.lipschitz;
        MapBounds { min_det: T::one() / (li * li), max_det: lf * lf, max_norm: lf, max_inv_norm: li, max_density: lf }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    /// Declared lower bound `L_inv^{-2}`.
    pub alpha: f64,
    /// Declared upper bound `2 L_fwd^2`.
    pub beta: f64,
    pub min_abs_det: f64,
    pub max_abs_det: f64,
    pub sign_consistent: bool,
    pub singular_points: Vec<[f64; 2]>,
    pub violations: Vec<([f64; 2], f64)>,
    /// Largest `|psi(psi^{-1}(x)) - x|` over the samples.
    pub max_roundtrip_error: f64,
    pub samples: usize,
}

impl JacobianReport {
    pub fn passed(&self) -> bool {
        self.singular_points.is_empty() && self.violations.is_empty() && self.sign_consistent && self.max_roundtrip_error <= 1e-10
    }
}

/// Checks `|det psi'| in [L_inv^{-2}, 2 L_fwd^2]` and invertibility of `psi'`
/// at each sample, plus the round trip `psi(psi^{-1}(x)) = x`.
pub fn jacobian_bounds_check<T: Real>(map: &BiLipschitzMap<T>, points: &[Point<T>]) -> Result<JacobianReport> {
    if points.is_empty() {
        return Err(Error::EmptySelection("Jacobian check needs sample points".into()));
    }
    let (lo, hi) = map.determinant_bounds();
    let tol = T::lit(1e-12);
    let mut rep = JacobianReport {
        alpha: lo.to_f64_lossy(),
        beta: hi.to_f64_lossy(),
        min_abs_det: f64::INFINITY,
        max_abs_det: 0.0,
        sign_consistent: true,
        singular_points: Vec::new(),
        violations: Vec::new(),
        max_roundtrip_error: 0.0,
        samples: points.len(),
    };
    let mut sign = None;
    for &x in points {
        let xf = [x[0].to_f64_lossy(), x[1].to_f64_lossy()];
        let j = map.jacobian(x);
        let d = det(&j);
        if inverse(&j).is_none() || !d.is_finite() || d.abs() <= T::epsilon() {
            rep.singular_points.push(xf);
            continue;
        }
        let s = d > T::zero();
        if *sign.get_or_insert(s) != s {
            rep.sign_consistent = false;
        }
        let a = d.abs();
        rep.min_abs_det = rep.min_abs_det.min(a.to_f64_lossy());
        rep.max_abs_det = rep.max_abs_det.max(a.to_f64_lossy());
        if a < lo * (T::one() - tol) || a > hi * (T::one() + tol) {
            rep.violations.push((xf, a.to_f64_lossy()));
        }
        let back = map.apply(map.apply_inverse(x));
        rep.max_roundtrip_error = rep.max_roundtrip_error.max(norm([back[0] - x[0], back[1] - x[1]]).to_f64_lossy());
    }
    Ok(rep)
}

/// Unit tangent of a boundary edge with outward normal `n`.
fn tangent_of_normal<T: Real>(n: Point<T>) -> Point<T> {
    [-n[1], n[0]]
}

/// Boundary measure density `m = |psi' tau|` at a boundary point.
pub fn density_at<T: Real>(map: &BiLipschitzMap<T>, bp: &BoundaryPoint<T>) -> T {
    norm(mat_vec(&map.jacobian(bp.x), tangent_of_normal(bp.normal)))
}

/// Image of a boundary point: mapped position and the outward unit normal
/// `J^{-T} n / |J^{-T} n|` of the image boundary.
pub fn map_boundary_point<T: Real>(map: &BiLipschitzMap<T>, bp: &BoundaryPoint<T>) -> BoundaryPoint<T> {
    let j = map.jacobian(bp.x);
    let n = match inverse(&j) {
        Some(ji) => mat_t_vec(&ji, bp.normal),
        None => [T::nan(), T::nan()],
    };
    let l = norm(n);
    BoundaryPoint { x: map.apply(bp.x), normal: [n[0] / l, n[1] / l], tag: bp.tag }
}

/// Values of the boundary density at the quadrature points of every boundary
/// edge of the source mesh.
#[derive(Debug, Clone)]
pub struct BoundaryDensity<T> {
    pub rule: EdgeRule<T>,
    /// `values[e][q]` for boundary edge `e` and quadrature point `q`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> BoundaryDensity<T> {
    pub fn min(&self) -> T {
        self.values.iter().flatten().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.values.iter().flatten().fold(T::zero(), |m, &v| m.max(v))
    }
}

/// Tangent push-forward density on the boundary of `source`, evaluated at
/// two-point Gauss nodes (never at mesh vertices).
pub fn boundary_density<T: Real>(map: &BiLipschitzMap<T>, source: &Mesh<T>) -> Result<BoundaryDensity<T>> {
    let rule = EdgeRule::<T>::edge(3)?;
    let mut values = Vec::with_capacity(source.boundary_edges.len());
    for (ei, e) in source.boundary_edges.iter().enumerate() {
        let n = source.outward_normal(e);
        let mut row = Vec::with_capacity(rule.points.len());
        for bary in &rule.points {
            let bp = BoundaryPoint { x: source.edge_point(e, bary), normal: n, tag: e.tag };
            let m = density_at(map, &bp);
            if !(m > T::zero()) || !m.is_finite() {
                return Err(Error::Evaluation {
                    what: format!("degenerate tangent image, density {m}"),
                    location: format!("boundary edge {ei} at ({}, {})", bp.x[0], bp.x[1]),
                });
            }
            row.push(m);
        }
        values.push(row);
    }
    Ok(BoundaryDensity { rule, values })
}

/// `int_{bdry source} (g o psi) m` with the density's quadrature.
pub fn pulled_back_boundary_integral<T: Real>(map: &BiLipschitzMap<T>, source: &Mesh<T>, density: &BoundaryDensity<T>, g: impl Fn(Point<T>) -> T) -> T {
    let mut s = T::zero();
    for (e, m) in source.boundary_edges.iter().zip(&density.values) {
        let len = source.edge_length(e);
        for ((bary, &w), &mq) in density.rule.points.iter().zip(&density.rule.weights).zip(m) {
            s += len * w * g(map.apply(source.edge_point(e, bary))) * mq;
        }
    }
    s
}

/// Extremal values of the Jacobian quantities entering the rescaled
/// structure parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapBounds<T> {
    pub min_det: T,
    pub max_det: T,
    pub max_norm: T,
    pub max_inv_norm: T,
    pub max_density: T,
}

impl<T: Real> MapBounds<T> {
    /// Sampled bounds over domain points and boundary points.
    pub fn sample(map: &BiLipschitzMap<T>, points: &[Point<T>], boundary: &[BoundaryPoint<T>]) -> Result<Self> {
        let mut b = MapBounds { min_det: T::infinity(), max_det: T::zero(), max_norm: T::zero(), max_inv_norm: T::zero(), max_density: T::zero() };
        let all = points.iter().copied().chain(boundary.iter().map(|bp| bp.x));
        for x in all {
            let j = map.jacobian(x);
            let ji = inverse(&j).ok_or_else(|| Error::Evaluation { what: "singular Jacobian".into(), location: format!("({}, {})", x[0], x[1]) })?;
            let d = det(&j).abs();
            b.min_det = b.min_det.min(d);
            b.max_det = b.max_det.max(d);
            b.max_norm = b.max_norm.max(spectral_norm(&j));
            b.max_inv_norm = b.max_inv_norm.max(spectral_norm(&ji));
        }
        for bp in boundary {
            b.max_density = b.max_density.max(density_at(map, bp));
        }
        if boundary.is_empty() {
            b.max_density = b.max_norm;
        }
        if !b.min_det.is_finite() {
            return Err(Error::EmptySelection("no sample points for map bounds".into()));
        }
        Ok(b)
    }

    /// Rescaled structure parameters for the transformed coefficients:
    /// `nu' = min|det| nu / max|J|^p`, `mu' = max|det| mu s^p`,
    /// `psi1' = max|det| psi1 o psi`, `psi2' = max|det| s psi2 o psi`,
    /// `psi3' = max|det| s^{p-1} psi3 o psi`, `psi4' = max m psi4 o psi`,
    /// with `s = max|J^{-1}|`.
    pub fn rescale(&self, sp: &StructureParams<T>, map: &BiLipschitzMap<T>) -> StructureParams<T> {
        let p = sp.p;
        let s = self.max_inv_norm;
        let (dmax, mmax) = (self.max_det, self.max_density);
        let compose = |psi: &Arc<dyn Fn(Point<T>) -> T + Send + Sync>, c: T| -> Arc<dyn Fn(Point<T>) -> T + Send + Sync> {
            let (psi, map) = (psi.clone(), map.clone());
            Arc::new(move |x| c * psi(map.apply(x)))
        };
        StructureParams {
            p,
            nu: self.min_det * sp.nu / self.max_norm.powf(p),
            mu: dmax * sp.mu * s.powf(p),
            eps: sp.eps,
            psi1: compose(&sp.psi1, dmax),
            psi2: compose(&sp.psi2, dmax * s),
            psi3: compose(&sp.psi3, dmax * s.powf(p - T::one())),
            psi4: compose(&sp.psi4, mmax),
        }
    }
}

struct TransformedFlux<T> {
    inner: Arc<dyn Flux<T>>,
    map: BiLipschitzMap<T>,
}

impl<T: Real> TransformedFlux<T> {
    fn frame(&self, x: Point<T>) -> (Mat2<T>, T) {
        let j = self.map.jacobian(x);
        match inverse(&j) {
            Some(ji) => (ji, det(&j).abs()),
            None => ([[T::nan(); 2]; 2], T::nan()),
        }
    }
}

impl<T: Real> Flux<T> for TransformedFlux<T> {
    fn eval(&self, x: Point<T>, z: Point<T>) -> Point<T> {
        let (ji, d) = self.frame(x);
        let a = self.inner.eval(self.map.apply(x), mat_t_vec(&ji, z));
        let v = mat_vec(&ji, a);
        [v[0] * d, v[1] * d]
    }

    fn derivative(&self, x: Point<T>, z: Point<T>) -> Mat2<T> {
        let (ji, d) = self.frame(x);
        let inner = self.inner.derivative(self.map.apply(x), mat_t_vec(&ji, z));
        let m = mat_mul(&mat_mul(&ji, &inner), &transpose(&ji));
        [[m[0][0] * d, m[0][1] * d], [m[1][0] * d, m[1][1] * d]]
    }

    fn has_symmetric_jacobian(&self) -> bool {
        self.inner.has_symmetric_jacobian()
    }
}

struct TransformedReaction<T> {
    inner: Arc<dyn Reaction<T>>,
    map: BiLipschitzMap<T>,
}

impl<T: Real> Reaction<T> for TransformedReaction<T> {
    fn eval(&self, x: Point<T>, u: T, z: Point<T>) -> T {
        let j = self.map.jacobian(x);
        let zi = match inverse(&j) {
            Some(ji) => mat_t_vec(&ji, z),
            None => [T::nan(); 2],
        };
        self.inner.eval(self.map.apply(x), u, zi) * det(&j).abs()
    }

    fn du(&self, x: Point<T>, u: T, z: Point<T>) -> T {
        let j = self.map.jacobian(x);
        let zi = inverse(&j).map(|ji| mat_t_vec(&ji, z)).unwrap_or([T::nan(); 2]);
        self.inner.du(self.map.apply(x), u, zi) * det(&j).abs()
    }

    fn gradient_dependent(&self) -> bool {
        self.inner.gradient_dependent()
    }
}

struct TransformedBoundaryReaction<T> {
    inner: Arc<dyn BoundaryReaction<T>>,
    map: BiLipschitzMap<T>,
}

impl<T: Real> BoundaryReaction<T> for TransformedBoundaryReaction<T> {
    fn eval(&self, bp: &BoundaryPoint<T>, u: T) -> T {
        self.inner.eval(&map_boundary_point(&self.map, bp), u) * density_at(&self.map, bp)
    }

    fn du(&self, bp: &BoundaryPoint<T>, u: T) -> T {
        self.inner.du(&map_boundary_point(&self.map, bp), u) * density_at(&self.map, bp)
    }
}

/// Push-forward of the coefficients to the source domain of `map`, with
/// structure parameters rescaled by the declared Lipschitz bounds.
pub fn transform_coefficients<T: Real>(coeffs: &CoefficientSet<T>, map: &BiLipschitzMap<T>) -> CoefficientSet<T> {
    transform_coefficients_with_bounds(coeffs, map, &map.declared_bounds())
}

/// Push-forward with structure parameters rescaled by the given bounds.
pub fn transform_coefficients_with_bounds<T: Real>(coeffs: &CoefficientSet<T>, map: &BiLipschitzMap<T>, bounds: &MapBounds<T>) -> CoefficientSet<T> {
    let m = map.clone();
    let abs_det = move |x: Point<T>| det(&m.jacobian(x)).abs();
    let mut out = coeffs.clone();
    out.flux = Arc::new(TransformedFlux { inner: coeffs.flux.clone(), map: map.clone() });
    out.radial = None;
    out.reaction = Arc::new(TransformedReaction { inner: coeffs.reaction.clone(), map: map.clone() });
    out.boundary_reaction = Arc::new(TransformedBoundaryReaction { inner: coeffs.boundary_reaction.clone(), map: map.clone() });
    {
        let (w, m, d) = (coeffs.omega_density.clone(), map.clone(), abs_det.clone());
        out.omega_density = Some(Arc::new(move |x| d(x) * w.as_ref().map_or(T::one(), |w| w(m.apply(x)))));
    }
    out.source = coeffs.source.clone().map(|f| {
        let (m, d) = (map.clone(), abs_det.clone());
        Arc::new(move |x: Point<T>| f(m.apply(x)) * d(x)) as Arc<dyn Fn(Point<T>) -> T + Send + Sync>
    });
    out.load_flux = coeffs.load_flux.clone().map(|big_f| {
        let m = map.clone();
        Arc::new(move |x: Point<T>| {
            let j = m.jacobian(x);
            let d = det(&j).abs();
            match inverse(&j) {
                Some(ji) => {
                    let v = mat_vec(&ji, big_f(m.apply(x)));
                    [v[0] * d, v[1] * d]
                }
                None => [T::nan(); 2],
            }
        }) as Arc<dyn Fn(Point<T>) -> Point<T> + Send + Sync>
    });
    let boundary = |g: Arc<dyn Fn(&BoundaryPoint<T>) -> T + Send + Sync>| {
        let m = map.clone();
        Arc::new(move |bp: &BoundaryPoint<T>| g(&map_boundary_point(&m, bp)) * density_at(&m, bp)) as Arc<dyn Fn(&BoundaryPoint<T>) -> T + Send + Sync>
    };
    out.boundary_load = coeffs.boundary_load.clone().map(boundary);
    out.beta = coeffs.beta.clone().map(boundary);
    out.structure = bounds.rescale(&coeffs.structure, map);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformReport {
    pub bounds: MapBounds<f64>,
    pub nu_hat: f64,
    pub mu_hat: f64,
    pub structure: StructureReport,
}

impl TransformReport {
    pub fn passed(&self) -> bool {
        self.structure.passed()
    }
}

/// Transforms the coefficients with bounds sampled on the grid and checks the
/// growth conditions of the result with the rescaled parameters.
pub fn verify_structure_preservation<T: Real>(coeffs: &CoefficientSet<T>, map: &BiLipschitzMap<T>, grid: &SampleGrid<T>) -> Result<TransformReport> {
    let bounds = MapBounds::sample(map, &grid.points, &grid.boundary_points)?;
    let t = transform_coefficients_with_bounds(coeffs, map, &bounds);
    let structure = check_structure(&t, grid)?;
    let f = |v: T| v.to_f64_lossy();
    Ok(TransformReport {
        bounds: MapBounds {
            min_det: f(bounds.min_det),
            max_det: f(bounds.max_det),
            max_norm: f(bounds.max_norm),
            max_inv_norm: f(bounds.max_inv_norm),
            max_density: f(bounds.max_density),
        },
        nu_hat: f(t.structure.nu),
        mu_hat: f(t.structure.mu),
        structure,
    })
}

/// Image mesh `psi(mesh)`. Orientation-reversing maps get their triangles
/// and boundary edges reordered so the result is counterclockwise again.
pub fn map_mesh<T: Real>(mesh: &Mesh<T>, map: &BiLipschitzMap<T>) -> Result<Mesh<T>> {
    let vertices: Vec<Point<T>> = mesh.vertices.iter().map(|&x| map.apply(x)).collect();
    let flip = !mesh.triangles.is_empty() && det(&map.jacobian(mesh.centroid(0))) < T::zero();
    let triangles = if flip { mesh.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect() } else { mesh.triangles.clone() };
    let boundary_edges = if flip {
        mesh.boundary_edges.iter().map(|e| BoundaryEdge { v: [e.v[1], e.v[0]], tag: e.tag }).collect()
    } else {
        mesh.boundary_edges.clone()
    };
    let out = Mesh { vertices, triangles, boundary_edges };
    out.validate()?;
    Ok(out)
}

/// Mesh of the half square `(-1,1) x (0,1)` with `2n x n` cells; the side on
/// the line `y = 0` carries tag 1.
pub fn half_square<T: Real>(n: usize) -> Result<Mesh<T>> {
    let base = Mesh::<T>::unit_square(n)?;
    let two = T::lit(2.0);
    let vertices = base.vertices.iter().map(|v| [two * v[0] - T::one(), v[1]]).collect();
    let m = Mesh { vertices, ..base };
    m.validate()?;
    Ok(m)
}

/// Even reflection across the line `y = 0` of a field on a mesh lying in
/// `y >= 0` and bounded by the axis along at least one edge. Returns the field
/// on the mirrored full mesh with `v(x, -y) = v(x, y)`.
pub fn reflect_extend<T: Real>(field: &DiscreteField<T>) -> Result<DiscreteField<T>> {
    let mesh = &field.mesh;
    let tol = T::lit(1e-12) * mesh.vertices.iter().fold(T::one(), |m, v| m.max(v[0].abs()).max(v[1].abs()));
    if let Some(v) = mesh.vertices.iter().position(|x| x[1] < -tol) {
        return Err(invalid(format!("vertex {v} lies below the reflection axis y = 0")));
    }
    let on_axis = |v: usize| mesh.vertices[v][1].abs() <= tol;
    let axis_edges: Vec<&BoundaryEdge> = mesh.boundary_edges.iter().filter(|e| on_axis(e.v[0]) && on_axis(e.v[1])).collect();
    if axis_edges.is_empty() {
        return Err(invalid("mesh has no boundary segment on the reflection axis y = 0"));
    }
    // every axis vertex must sit on an axis boundary edge, or the mirrored
    // triangles would overlap the original ones
    let mut axis_vertex = vec![false; mesh.num_vertices()];
    for e in &axis_edges {
        axis_vertex[e.v[0]] = true;
        axis_vertex[e.v[1]] = true;
    }
    if let Some(v) = (0..mesh.num_vertices()).find(|&v| on_axis(v) && !axis_vertex[v]) {
        return Err(invalid(format!("vertex {v} touches the axis away from a boundary edge on it; mesh is not mirror-compatible")));
    }
    let n = mesh.num_vertices();
    let mut mirror = vec![0usize; n];
    let mut vertices = mesh.vertices.clone();
    let mut values = field.values.clone();
    for v in 0..n {
        if on_axis(v) {
            mirror[v] = v;
            vertices[v][1] = T::zero();
        } else {
            mirror[v] = vertices.len();
            vertices.push([mesh.vertices[v][0], -mesh.vertices[v][1]]);
            values.push(field.values[v]);
        }
    }
    let mut triangles = mesh.triangles.clone();
    triangles.extend(mesh.triangles.iter().map(|&[a, b, c]| [mirror[a], mirror[c], mirror[b]]));
    let mut boundary_edges: Vec<BoundaryEdge> = Vec::new();
    let is_axis = |e: &BoundaryEdge| on_axis(e.v[0]) && on_axis(e.v[1]);
    boundary_edges.extend(mesh.boundary_edges.iter().filter(|e| !is_axis(e)).copied());
    boundary_edges.extend(mesh.boundary_edges.iter().filter(|e| !is_axis(e)).map(|e| BoundaryEdge { v: [mirror[e.v[1]], mirror[e.v[0]]], tag: e.tag }));
    let full = Mesh { vertices, triangles, boundary_edges };
    full.validate().map_err(|e| invalid(format!("mirrored mesh is invalid: {e}")))?;
    DiscreteField::new(Arc::new(full), values)
}

/// Vertex correspondence of a reflected mesh: pairs `(v, mirror(v))`.
pub fn mirror_pairs<T: Real>(full: &Mesh<T>) -> Vec<(usize, usize)> {
    let key = |p: Point<T>| ((p[0].to_f64_lossy() * 1e9).round() as i64, (p[1].to_f64_lossy() * 1e9).round() as i64);
    let index: HashMap<(i64, i64), usize> = full.vertices.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
    full.vertices
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| index.get(&key([p[0], -p[1]])).map(|&j| (i, j)))
        .collect()
}
