//! Norms, Hölder seminorm estimates, Moser exponent ladders and refinement
//! studies.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coeffs::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::fem::{DiscreteField, MassMode};
use crate::mesh::{EdgeRule, Mesh, TriangleRule};
use crate::scalar::{norm, sub, Point, Real};
use crate::solver::{contraction_ratio, discrete_norm, solve_elliptic, NormKind, ResolventProblem, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Domain,
    Boundary,
}

/// Discrete `L^q` norm of a P1 field over the domain or of its trace over the
/// boundary. `q = f64::INFINITY` gives the largest vertex value.
pub fn lq_norm<T: Real>(field: &DiscreteField<T>, q: f64, region: Region) -> Result<T> {
    if q.is_nan() || q < 1.0 {
        return Err(invalid(format!("norm exponent must be >= 1, got {q}")));
    }
    let mesh = &field.mesh;
    let u = &field.values;
    if q == f64::INFINITY {
        return Ok(match region {
            Region::Domain => field.max_abs(),
            Region::Boundary => mesh
                .boundary_edges
                .iter()
                .flat_map(|e| e.v)
                .fold(T::zero(), |m, v| m.max(u[v].abs())),
        });
    }
    let qt = T::lit(q);
    let sum: T = match region {
        Region::Domain => {
            let rule = TriangleRule::<T>::triangle(4)?;
            (0..mesh.num_triangles())
                .map(|t| {
                    let area = mesh.signed_area(t).abs();
                    let s: T = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(b, &w)| w * field.eval_bary(t, b).abs().powf(qt))
                        .sum();
                    area * s
                })
                .sum()
        }
        Region::Boundary => {
            let rule = EdgeRule::<T>::edge(5)?;
            mesh.boundary_edges
                .iter()
                .map(|e| {
                    let len = mesh.edge_length(e);
                    let s: T = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(b, &w)| w * (b[0] * u[e.v[0]] + b[1] * u[e.v[1]]).abs().powf(qt))
                        .sum();
                    len * s
                })
                .sum()
        }
    };
    Ok(sum.powf(T::one() / qt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoelderEstimate<T> {
    pub alpha: T,
    pub seminorm: T,
    /// Vertex pair attaining the maximum (absent when every quotient is zero).
    pub argmax: Option<(usize, usize)>,
    pub pairs_examined: usize,
    pub exhaustive: bool,
}

/// Default seed of the pair subsample.
pub const HOELDER_SEED: u64 = 0x484f_454c;

/// Largest vertex-pair quotient `|u(x) - u(y)| / |x - y|^alpha`.
pub fn hoelder_seminorm<T: Real>(field: &DiscreteField<T>, alpha: T, pair_budget: usize) -> Result<HoelderEstimate<T>> {
    hoelder_seminorm_seeded(field, alpha, pair_budget, HOELDER_SEED)
}

#[derive(Clone, Copy)]
struct Best<T> {
    value: T,
    pair: Option<(usize, usize)>,
}

impl<T: Real> Best<T> {
    fn none() -> Self {
        Self { value: T::zero(), pair: None }
    }

    fn offer(&mut self, value: T, pair: (usize, usize)) {
        let better = match self.pair {
            None => value > T::zero(),
            Some(p) => value > self.value || (value == self.value && pair < p),
        };
        if better {
            self.value = value;
            self.pair = Some(pair);
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if let Some(p) = other.pair {
            self.offer(other.value, p);
        }
        self
    }
}

pub fn hoelder_seminorm_seeded<T: Real>(field: &DiscreteField<T>, alpha: T, pair_budget: usize, seed: u64) -> Result<HoelderEstimate<T>> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(invalid(format!("Hoelder exponent must lie in (0, 1], got {alpha}")));
    }
    if pair_budget == 0 {
        return Err(invalid("pair budget must be positive"));
    }
    let mesh = &field.mesh;
    let n = mesh.num_vertices();
    if n < 2 {
        return Err(invalid("Hoelder seminorm needs at least two vertices"));
    }
    let x = &mesh.vertices;
    let u = &field.values;
    let quotient = |i: usize, j: usize| -> Option<T> {
        let d = norm(sub(x[i], x[j]));
        (d > T::zero()).then(|| (u[i] - u[j]).abs() / d.powf(alpha))
    };
    let order = |i: usize, j: usize| if i < j { (i, j) } else { (j, i) };

    let total = n * (n - 1) / 2;
    if total <= pair_budget {
        let best = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut b = Best::none();
                for j in i + 1..n {
                    if let Some(q) = quotient(i, j) {
                        b.offer(q, (i, j));
                    }
                }
                b
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Best::none(), Best::merge);
        return Ok(HoelderEstimate { alpha, seminorm: best.value, argmax: best.pair, pairs_examined: total, exhaustive: true });
    }

    let mut pairs: Vec<(usize, usize)> = mesh.edges().into_iter().map(|[a, b]| order(a, b)).collect();
    let flags = mesh.boundary_vertex_flags();
    let boundary: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
    for (k, &a) in boundary.iter().enumerate() {
        for &b in &boundary[k + 1..] {
            pairs.push((a, b));
        }
    }
    let radius = T::lit(4.0) * mesh.mesh_size();
    for c in mesh.corner_vertices() {
        for v in 0..n {
            if v != c && norm(sub(x[c], x[v])) <= radius {
                pairs.push(order(c, v));
            }
        }
    }

    // random pairs stratified by distance decade
    let remaining = pair_budget.saturating_sub(pairs.len());
    if remaining > 0 {
        let dists: Vec<f64> = mesh.edges().iter().map(|&[a, b]| norm(sub(x[a], x[b])).to_f64_lossy()).collect();
        let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300);
        let lo = dmin.log10().floor() as i64;
        let hi = mesh_diameter(mesh).to_f64_lossy().log10().floor() as i64;
        let decades = (hi - lo + 1).max(1) as usize;
        let quota = remaining.div_ceil(decades);
        let mut filled = vec![0usize; decades];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attempts = 20 * remaining;
        let mut added = 0;
        for _ in 0..attempts {
            if added >= remaining {
                break;
            }
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let d = norm(sub(x[i], x[j])).to_f64_lossy();
            if d <= 0.0 {
                continue;
            }
            let k = ((d.log10().floor() as i64 - lo).clamp(0, decades as i64 - 1)) as usize;
            if filled[k] < quota {
                filled[k] += 1;
                added += 1;
                pairs.push(order(i, j));
            }
        }
    }
    let pairs_examined = pairs.len();
    let best = pairs
        .par_chunks(4096)
        .map(|chunk| {
            let mut b = Best::none();
            for &(i, j) in chunk {
                if let Some(q) = quotient(i, j) {
                    b.offer(q, (i, j));
                }
            }
            b
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Best::none(), Best::merge);
    Ok(HoelderEstimate { alpha, seminorm: best.value, argmax: best.pair, pairs_examined, exhaustive: false })
}

fn mesh_diameter<T: Real>(mesh: &Mesh<T>) -> T {
    let (mut lo, mut hi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
    for v in &mesh.vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    norm(sub(hi, lo))
}

/// Exponents `q_n = (N / (N - p))^n p` for `n = 0..=levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoserLadder {
    pub p: f64,
    pub dim: usize,
    pub exponents: Vec<f64>,
}

impl MoserLadder {
    pub fn ratio(&self) -> f64 {
        self.dim as f64 / (self.dim as f64 - self.p)
    }
}

pub fn moser_ladder(p: f64, dim: usize, levels: usize) -> Result<MoserLadder> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid(format!("p must lie in (1, inf), got {p}")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if p >= dim as f64 {
        return Err(Error::UnsupportedCase(format!(
            "ladder needs p < N (got p = {p}, N = {dim}); the cases p = N and p > N are handled by embeddings without a ladder"
        )));
    }
    let r = dim as f64 / (dim as f64 - p);
    let mut exponents = Vec::with_capacity(levels + 1);
    let mut q = p;
    for _ in 0..=levels {
        exponents.push(q);
        q *= r;
    }
    Ok(MoserLadder { p, dim, exponents })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOptions {
    /// Growth ratio between consecutive rungs that raises the flag.
    pub ratio_threshold: f64,
    /// Certificate bound `cap_factor * |u|_p + cap_offset` for every rung.
    pub cap_factor: f64,
    pub cap_offset: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self { ratio_threshold: 2.0, cap_factor: 10.0, cap_offset: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub q: f64,
    pub domain: f64,
    pub boundary: f64,
    pub total: f64,
    /// `total / previous total`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderTable {
    pub rows: Vec<LadderRow>,
    /// Domain `L^p` norm with the ladder's base exponent.
    pub lp_norm: f64,
    pub cap: f64,
    /// Some rung grew faster than the ratio threshold.
    pub growth_flag: bool,
    /// Some rung exceeded the certificate cap.
    pub cap_exceeded: bool,
}

impl LadderTable {
    pub fn flagged(&self) -> bool {
        self.growth_flag || self.cap_exceeded
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("q,domain,boundary,total,ratio\n");
        for r in &self.rows {
            let ratio = r.ratio.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e},{}", r.q, r.domain, r.boundary, r.total, ratio);
        }
        s
    }
}

/// Domain plus boundary `L^{q_n}` norms of `field` along the ladder.
pub fn ladder_norm_monitor<T: Real>(field: &DiscreteField<T>, ladder: &MoserLadder, opts: &MonitorOptions) -> Result<LadderTable> {
    let lp_norm = lq_norm(field, ladder.p, Region::Domain)?.to_f64_lossy();
    let cap = opts.cap_factor * lp_norm + opts.cap_offset;
    let mut rows: Vec<LadderRow> = Vec::with_capacity(ladder.exponents.len());
    for &q in &ladder.exponents {
        let domain = lq_norm(field, q, Region::Domain)?.to_f64_lossy();
        let boundary = lq_norm(field, q, Region::Boundary)?.to_f64_lossy();
        let total = domain + boundary;
        let ratio = rows.last().map(|prev| if prev.total > 0.0 { total / prev.total } else if total > 0.0 { f64::INFINITY } else { 1.0 });
        rows.push(LadderRow { q, domain, boundary, total, ratio });
    }
    let growth_flag = rows.iter().filter_map(|r| r.ratio).any(|r| r > opts.ratio_threshold);
    let cap_exceeded = rows.iter().any(|r| r.total > cap);
    Ok(LadderTable { rows, lp_norm, cap, growth_flag, cap_exceeded })
}

/// Meshes of a refinement hierarchy. Level `k` has `2^k` times the base
/// resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    UnitSquare { base: usize },
    LShape { base: usize },
}

impl MeshFamily {
    pub fn mesh<T: Real>(&self, level: usize) -> Result<Mesh<T>> {
        match *self {
            MeshFamily::UnitSquare { base } => Mesh::unit_square(base << level),
            MeshFamily::LShape { base } => Mesh::l_shape(base << level),
        }
    }
}

/// A discretized problem that can be solved on every level of a hierarchy.
pub trait ProblemFamily<T: Real>: Sync {
    fn mesh(&self, level: usize) -> Result<Mesh<T>>;

    fn solve(&self, mesh: Arc<Mesh<T>>) -> Result<DiscreteField<T>>;

    /// Exact solution, when known.
    fn exact(&self, _x: Point<T>) -> Option<T> {
        None
    }

    /// Resolvent contraction ratio measured on `mesh`.
    fn contraction(&self, _mesh: Arc<Mesh<T>>, _kind: NormKind) -> Result<T> {
        Err(Error::UnsupportedCase("this problem family has no contraction experiment".into()))
    }
}

/// Elliptic problem `R(u) = 0` on a mesh hierarchy, with an optional exact
/// solution and a random resolvent pair for contraction measurements.
#[derive(Clone)]
pub struct EllipticFamily<T> {
    pub meshes: MeshFamily,
    pub coeffs: CoefficientSet<T>,
    pub mass_mode: MassMode,
    pub solver: SolverOptions,
    pub exact: Option<crate::coeffs::ScalarField<T>>,
    pub seed: u64,
}

impl<T: Real> EllipticFamily<T> {
    pub fn new(meshes: MeshFamily, coeffs: CoefficientSet<T>) -> Self {
        Self { meshes, coeffs, mass_mode: MassMode::Lumped, solver: SolverOptions::default(), exact: None, seed: 0 }
    }

    pub fn with_exact(mut self, u: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(u));
        self
    }
}

impl<T: Real> ProblemFamily<T> for EllipticFamily<T> {
    fn mesh(&self, level: usize) -> Result<Mesh<T>> {
        self.meshes.mesh(level)
    }

    fn solve(&self, mesh: Arc<Mesh<T>>) -> Result<DiscreteField<T>> {
        let u0 = self.exact.as_ref().map(|_| vec![T::zero(); mesh.num_vertices()]);
        solve_elliptic(mesh, &self.coeffs, self.mass_mode, u0, &self.solver).map(|(u, _)| u)
    }

    fn exact(&self, x: Point<T>) -> Option<T> {
        self.exact.as_ref().map(|u| u(x))
    }

    fn contraction(&self, mesh: Arc<Mesh<T>>, kind: NormKind) -> Result<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = mesh.num_vertices();
        let mut draw = || (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect::<Vec<T>>();
        let (r1, r2) = (draw(), draw());
        let p1 = ResolventProblem::new(mesh.clone(), self.coeffs.clone(), T::one(), r1)?.with_mass_mode(self.mass_mode);
        let p2 = ResolventProblem::new(mesh, self.coeffs.clone(), T::one(), r2)?.with_mass_mode(self.mass_mode);
        contraction_ratio(&p1, &p2, kind, &self.solver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Hoelder { alpha: f64, pair_budget: usize },
    /// Mass-norm distance between the solution and the vertex interpolant of
    /// the exact solution.
    Error,
    Contraction { norm: NormKind },
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Hoelder { .. } => "hoelder",
            Quantity::Error => "error",
            Quantity::Contraction { .. } => "contraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub vertices: usize,
    pub value: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub quantity: Quantity,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// `(max - min) / max` of the value column.
    pub fn relative_variation(&self) -> f64 {
        let v = self.values();
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi == 0.0 {
            0.0
        } else {
            (hi - lo) / hi.abs()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("level,h,vertices,{},observed_order\n", self.quantity.name());
        for r in &self.rows {
            let order = r.order.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.16e},{},{:.16e},{}", r.level, r.h, r.vertices, r.value, order);
        }
        s
    }
}

/// Solves `family` on `levels` successive refinements and tabulates
/// `quantity` with its observed order.
pub fn refinement_study<T: Real>(family: &dyn ProblemFamily<T>, levels: usize, quantity: Quantity) -> Result<StudyTable> {
    if levels < 2 {
        return Err(invalid(format!("a refinement study needs at least 2 levels, got {levels}")));
    }
    let mut rows: Vec<StudyRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let mesh = Arc::new(family.mesh(level)?);
        let value = match quantity {
            Quantity::Hoelder { alpha, pair_budget } => {
                let u = family.solve(mesh.clone())?;
                hoelder_seminorm(&u, T::lit(alpha), pair_budget)?.seminorm.to_f64_lossy()
            }
            Quantity::Error => {
                let u = family.solve(mesh.clone())?;
                let exact = mesh
                    .vertices
                    .iter()
                    .map(|&x| family.exact(x).ok_or_else(|| Error::UnsupportedCase("error study needs an exact solution".into())))
                    .collect::<Result<Vec<T>>>()?;
                let d: Vec<T> = u.values.iter().zip(&exact).map(|(&a, &b)| a - b).collect();
                let mass = crate::fem::assemble_mass(&mesh, false);
                discrete_norm(&d, &mass, NormKind::L2).to_f64_lossy()
            }
            Quantity::Contraction { norm } => family.contraction(mesh.clone(), norm)?.to_f64_lossy(),
        };
        let order = match quantity {
            Quantity::Error => rows.last().map(|prev| (prev.value / value).log2()),
            _ if rows.len() >= 2 => {
                let (a, b) = (rows[rows.len() - 2].value, rows[rows.len() - 1].value);
                Some(((b - a).abs() / (value - b).abs()).log2())
            }
            _ => None,
        };
        rows.push(StudyRow { level, h: mesh.mesh_size().to_f64_lossy(), vertices: mesh.num_vertices(), value, order });
    }
    Ok(StudyTable { quantity, rows })
}
