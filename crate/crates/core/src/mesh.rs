//! Conforming triangulations of planar polygons with tagged boundary edges.
//!
//! Triangles are stored counterclockwise. Every boundary edge is stored in the
//! orientation it has inside its (unique) adjacent triangle, so the domain lies
//! to the left of the edge and the outward normal is the edge direction rotated
//! clockwise.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::{norm, sub, Point, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub vertices: Vec<Point<T>>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// Boundary edge selector for boundary integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySelection {
    All,
    Tag(u32),
}

/// Quadrature on a reference simplex. Weights are relative to the element
/// measure and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T, const K: usize> {
    pub points: Vec<[T; K]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

pub type TriangleRule<T> = QuadratureRule<T, 3>;
pub type EdgeRule<T> = QuadratureRule<T, 2>;

impl<T: Real> QuadratureRule<T, 3> {
    /// Symmetric triangle rule exact up to `degree` (1, 2 or 4; 3 maps to 4).
    pub fn triangle(degree: usize) -> Result<Self> {
        let l = T::lit;
        let third = l(1.0 / 3.0);
        match degree {
            0 | 1 => Ok(Self { points: vec![[third, third, third]], weights: vec![T::one()], degree: 1 }),
            2 => {
                let (a, b) = (l(2.0 / 3.0), l(1.0 / 6.0));
                Ok(Self {
                    points: vec![[a, b, b], [b, a, b], [b, b, a]],
                    weights: vec![third; 3],
                    degree: 2,
                })
            }
            3 | 4 => {
                let (a1, b1, w1) = (l(0.108103018168070), l(0.445948490915965), l(0.223381589678011));
                let (a2, b2, w2) = (l(0.816847572980459), l(0.091576213509771), l(0.109951743655322));
                Ok(Self {
                    points: vec![[a1, b1, b1], [b1, a1, b1], [b1, b1, a1], [a2, b2, b2], [b2, a2, b2], [b2, b2, a2]],
                    weights: vec![w1, w1, w1, w2, w2, w2],
                    degree: 4,
                })
            }
            d => Err(Error::InvalidParameter(format!("no triangle rule of degree {d}"))),
        }
    }

    /// Nodal rule (weights 1/3 at the vertices); lumps P1 mass matrices.
    pub fn triangle_vertices() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self { points: vec![[o, z, z], [z, o, z], [z, z, o]], weights: vec![T::lit(1.0 / 3.0); 3], degree: 1 }
    }
}

impl<T: Real> QuadratureRule<T, 2> {
    /// Gauss-Legendre rule on an edge with `ceil((degree+1)/2)` points.
    pub fn edge(degree: usize) -> Result<Self> {
        let l = T::lit;
        let half = l(0.5);
        let gauss = |nodes: &[f64], weights: &[f64], degree: usize| {
            let points = nodes.iter().map(|&s| [half - half * l(s), half + half * l(s)]).collect();
            let weights = weights.iter().map(|&w| half * l(w)).collect();
            Self { points, weights, degree }
        };
        match degree {
            0 | 1 => Ok(gauss(&[0.0], &[2.0], 1)),
            2 | 3 => {
                let s = 1.0 / 3.0_f64.sqrt();
                Ok(gauss(&[-s, s], &[1.0, 1.0], 3))
            }
            4 | 5 => {
                let s = (3.0_f64 / 5.0).sqrt();
                Ok(gauss(&[-s, 0.0, s], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0], 5))
            }
            d => Err(Error::InvalidParameter(format!("no edge rule of degree {d}"))),
        }
    }

    /// Trapezoidal rule; lumps P1 boundary mass matrices.
    pub fn edge_endpoints() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self { points: vec![[o, z], [z, o]], weights: vec![T::lit(0.5); 2], degree: 1 }
    }
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh from counterclockwise triangles, extracting boundary edges
    /// and tagging each with `tagger(midpoint)`.
    pub fn from_triangles(
        vertices: Vec<Point<T>>,
        triangles: Vec<[usize; 3]>,
        tagger: impl Fn(Point<T>) -> u32,
    ) -> Result<Self> {
        let mut count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = count.entry((a.min(b), a.max(b))).or_insert((0, [a, b]));
                e.0 += 1;
            }
        }
        let half = T::lit(0.5);
        let mut boundary_edges = Vec::new();
        // keep boundary edges in triangle order for determinism
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if count[&(a.min(b), a.max(b))].0 == 1 {
                    let mid = [half * (vertices[a][0] + vertices[b][0]), half * (vertices[a][1] + vertices[b][1])];
                    boundary_edges.push(BoundaryEdge { v: [a, b], tag: tagger(mid) });
                }
            }
        }
        let mesh = Self { vertices, triangles, boundary_edges };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Structured right-triangle mesh of the unit square with `n` cells per
    /// side. Tags: bottom 1, right 2, top 3, left 4.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("unit square subdivision count must be at least 1".into()));
        }
        let nf = T::from_usize_lossy(n);
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([T::from_usize_lossy(i) / nf, T::from_usize_lossy(j) / nf]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let eps = T::lit(1e-12);
        Self::from_triangles(vertices, triangles, |m| {
            if m[1] < eps {
                1
            } else if m[0] > T::one() - eps {
                2
            } else if m[1] > T::one() - eps {
                3
            } else {
                4
            }
        })
    }

    /// L-shaped domain `[0,1]^2 \ [1/2,1) x [1/2,1)` with cells of size
    /// `1/(2n)`. Tags run counterclockwise from the bottom side: bottom 1,
    /// right 2, inner horizontal 3, inner vertical 4, top 5, left 6.
    pub fn l_shape(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("L-shape subdivision count must be at least 1".into()));
        }
        let m = 2 * n;
        let mf = T::from_usize_lossy(m);
        let inside = |i: usize, j: usize| !(i >= n && j >= n);
        let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
        let mut vertices = Vec::new();
        for j in 0..=m {
            for i in 0..=m {
                // a grid vertex is kept if it touches at least one kept cell
                let touches = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j.wrapping_sub(1))]
                    .iter()
                    .any(|&(ci, cj)| ci < m && cj < m && inside(ci, cj));
                if touches {
                    index[j * (m + 1) + i] = vertices.len();
                    vertices.push([T::from_usize_lossy(i) / mf, T::from_usize_lossy(j) / mf]);
                }
            }
        }
        let idx = |i: usize, j: usize| index[j * (m + 1) + i];
        let mut triangles = Vec::new();
        for j in 0..m {
            for i in 0..m {
                if !inside(i, j) {
                    continue;
                }
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let eps = T::lit(1e-12);
        let half = T::lit(0.5);
        Self::from_triangles(vertices, triangles, |p| {
            if p[1] < eps {
                1
            } else if p[0] > T::one() - eps {
                2
            } else if (p[1] - half).abs() < eps && p[0] > half {
                3
            } else if (p[0] - half).abs() < eps && p[1] > half {
                4
            } else if p[1] > T::one() - eps {
                5
            } else {
                6
            }
        })
    }

    /// Splits every triangle into four by its edge midpoints.
    pub fn refine_uniform(&self) -> Self {
        let half = T::lit(0.5);
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point<T>>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([half * (pa[0] + pb[0]), half * (pa[1] + pb[1])]);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let mid = midpoint(e.v[0], e.v[1], &mut vertices);
            boundary_edges.push(BoundaryEdge { v: [e.v[0], mid], tag: e.tag });
            boundary_edges.push(BoundaryEdge { v: [mid, e.v[1]], tag: e.tag });
        }
        Self { vertices, triangles, boundary_edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive for counterclockwise order).
    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        T::lit(0.5) * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Gradients of the three P1 hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [Point<T>; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let two_area = T::lit(2.0) * self.signed_area(t);
        [
            [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
            [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
            [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
        ]
    }

    pub fn centroid(&self, t: usize) -> Point<T> {
        let third = T::lit(1.0 / 3.0);
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [third * (pa[0] + pb[0] + pc[0]), third * (pa[1] + pb[1] + pc[1])]
    }

    /// Maps barycentric coordinates on triangle `t` to a point.
    pub fn triangle_point(&self, t: usize, bary: &[T; 3]) -> Point<T> {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [
            bary[0] * pa[0] + bary[1] * pb[0] + bary[2] * pc[0],
            bary[0] * pa[1] + bary[1] * pb[1] + bary[2] * pc[1],
        ]
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> T {
        norm(sub(self.vertices[e.v[1]], self.vertices[e.v[0]]))
    }

    /// Unit outward normal of a boundary edge.
    pub fn outward_normal(&self, e: &BoundaryEdge) -> Point<T> {
        let d = sub(self.vertices[e.v[1]], self.vertices[e.v[0]]);
        let l = norm(d);
        [d[1] / l, -d[0] / l]
    }

    pub fn edge_point(&self, e: &BoundaryEdge, bary: &[T; 2]) -> Point<T> {
        let (pa, pb) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
        [bary[0] * pa[0] + bary[1] * pb[0], bary[0] * pa[1] + bary[1] * pb[1]]
    }

    pub fn tags(&self) -> Vec<u32> {
        let mut tags: Vec<u32> = self.boundary_edges.iter().map(|e| e.tag).collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    /// Boundary edges matching `sel`; errors when nothing matches.
    pub fn select_edges(&self, sel: BoundarySelection) -> Result<Vec<&BoundaryEdge>> {
        let edges: Vec<_> = self
            .boundary_edges
            .iter()
            .filter(|e| match sel {
                BoundarySelection::All => true,
                BoundarySelection::Tag(t) => e.tag == t,
            })
            .collect();
        if edges.is_empty() {
            return Err(Error::EmptySelection(format!("no boundary edges match {sel:?}")));
        }
        Ok(edges)
    }

    pub fn boundary_length(&self, sel: BoundarySelection) -> Result<T> {
        Ok(self.select_edges(sel)?.into_iter().map(|e| self.edge_length(e)).sum())
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| [t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3])]))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// `V - E + F` with `F` the number of triangles.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            flags[e.v[0]] = true;
            flags[e.v[1]] = true;
        }
        flags
    }

    /// Boundary vertices where the boundary turns (polygon corners).
    pub fn corner_vertices(&self) -> Vec<usize> {
        let mut incoming: HashMap<usize, usize> = HashMap::new();
        for (k, e) in self.boundary_edges.iter().enumerate() {
            incoming.insert(e.v[1], k);
        }
        let tol = T::lit(1e-12);
        let mut corners: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter_map(|out| {
                let v = out.v[0];
                let inc = &self.boundary_edges[*incoming.get(&v)?];
                let d1 = sub(self.vertices[inc.v[1]], self.vertices[inc.v[0]]);
                let d2 = sub(self.vertices[out.v[1]], self.vertices[out.v[0]]);
                let cross = d1[0] * d2[1] - d1[1] * d2[0];
                (cross.abs() > tol * norm(d1) * norm(d2)).then_some(v)
            })
            .collect();
        corners.sort_unstable();
        corners
    }

    /// Number of maximal straight boundary segments (equals the number of
    /// corners on each closed loop).
    pub fn boundary_segment_count(&self) -> usize {
        self.corner_vertices().len()
    }

    /// True when every interior edge satisfies the Delaunay angle condition
    /// (opposite angles sum to at most pi) and every boundary edge's opposite
    /// angle is at most pi/2. These are the conditions under which the P1
    /// stiffness matrix has nonpositive off-diagonal entries.
    pub fn is_delaunay(&self) -> bool {
        let mut cot_sum: HashMap<(usize, usize), T> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let u = sub(self.vertices[a], self.vertices[c]);
                let v = sub(self.vertices[b], self.vertices[c]);
                let cross = (u[0] * v[1] - u[1] * v[0]).abs();
                let cot = (u[0] * v[0] + u[1] * v[1]) / cross;
                *cot_sum.entry((a.min(b), a.max(b))).or_insert(T::zero()) += cot;
            }
        }
        let tol = T::lit(-1e-12);
        cot_sum.values().all(|&c| c >= tol)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if !(self.signed_area(t) > T::zero()) {
                return Err(Error::InvalidMesh(format!("triangle {t} has nonpositive signed area")));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *directed.entry((a, b)).or_insert(0) += 1;
                *undirected.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if let Some(((a, b), _)) = undirected.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!("edge ({a},{b}) shared by more than two triangles")));
        }
        let expected = undirected.values().filter(|&&c| c == 1).count();
        if expected != self.boundary_edges.len() {
            return Err(Error::InvalidMesh(format!(
                "{} boundary edges stored but {} edges belong to a single triangle",
                self.boundary_edges.len(),
                expected
            )));
        }
        for e in &self.boundary_edges {
            let [a, b] = e.v;
            if a >= nv || b >= nv {
                return Err(Error::InvalidMesh(format!("boundary edge ({a},{b}) references a missing vertex")));
            }
            if undirected.get(&(a.min(b), a.max(b))) != Some(&1) || directed.get(&(a, b)) != Some(&1) {
                return Err(Error::InvalidMesh(format!("boundary edge ({a},{b}) is not a consistently oriented boundary edge")));
            }
        }
        Ok(())
    }

    /// Writes the plain-text mesh format.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertices {} triangles {} bedges {}", self.vertices.len(), self.triangles.len(), self.boundary_edges.len())?;
        for p in &self.vertices {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.boundary_edges {
            writeln!(w, "{} {} {}", e.v[0], e.v[1], e.tag)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_text(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("mesh text is ASCII")
    }

    /// Reads the plain-text mesh format and validates the result.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
        let header = header?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 6 || tok[0] != "vertices" || tok[2] != "triangles" || tok[4] != "bedges" {
            return Err(parse_err(hl, format!("bad header '{header}'")));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|e| parse_err(hl, format!("bad count '{s}': {e}")));
        let (nv, nt, nb) = (count(tok[1])?, count(tok[3])?, count(tok[5])?);
        let mut next_fields = |what: &str, n: usize| -> Result<(usize, Vec<String>)> {
            let (ln, line) = lines.next().ok_or_else(|| parse_err(0, format!("unexpected end of file reading {what}")))?;
            let fields: Vec<String> = line?.split_whitespace().map(str::to_owned).collect();
            if fields.len() != n {
                return Err(parse_err(ln, format!("expected {n} fields for {what}, found {}", fields.len())));
            }
            Ok((ln, fields))
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, f) = next_fields("vertex", 2)?;
            let x = f[0].parse::<T>().map_err(|_| parse_err(ln, format!("bad coordinate '{}'", f[0])))?;
            let y = f[1].parse::<T>().map_err(|_| parse_err(ln, format!("bad coordinate '{}'", f[1])))?;
            vertices.push([x, y]);
        }
        let idx = |ln: usize, s: &str| s.parse::<usize>().map_err(|e| parse_err(ln, format!("bad index '{s}': {e}")));
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, f) = next_fields("triangle", 3)?;
            triangles.push([idx(ln, &f[0])?, idx(ln, &f[1])?, idx(ln, &f[2])?]);
        }
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, f) = next_fields("boundary edge", 3)?;
            let tag = f[2].parse::<u32>().map_err(|e| parse_err(ln, format!("bad tag '{}': {e}", f[2])))?;
            boundary_edges.push(BoundaryEdge { v: [idx(ln, &f[0])?, idx(ln, &f[1])?], tag });
        }
        let mesh = Self { vertices, triangles, boundary_edges };
        mesh.validate()?;
        Ok(mesh)
    }

    /// One-line summary used in run manifests.
    pub fn stats(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "vertices={} triangles={} boundary_edges={} area={} boundary_length={}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len(),
            self.area(),
            self.boundary_edges.iter().map(|e| self.edge_length(e)).sum::<T>()
        );
        s
    }

    /// Largest edge length.
    pub fn mesh_size(&self) -> T {
        self.edges()
            .iter()
            .map(|&[a, b]| norm(sub(self.vertices[a], self.vertices[b])))
            .fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = Mesh::<f64>::unit_square(1).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles(), m.boundary_edges.len()), (4, 2, 4));
        let m = Mesh::<f64>::unit_square(2).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles(), m.boundary_edges.len()), (9, 8, 8));
        let m = Mesh::<f64>::unit_square(4).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(Mesh::<f64>::unit_square(0), Err(Error::InvalidParameter(_))));
        assert!(matches!(Mesh::<f64>::l_shape(0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn l_shape_geometry() {
        let m = Mesh::<f64>::l_shape(2).unwrap();
        assert!((m.area() - 0.75).abs() < 1e-14);
        assert_eq!(m.boundary_segment_count(), 6);
        assert!((m.boundary_length(BoundarySelection::All).unwrap() - 4.0).abs() < 1e-14);
        for n in 1..5 {
            let m = Mesh::<f64>::l_shape(n).unwrap();
            assert!(m.vertices.iter().any(|p| p[0] == 0.5 && p[1] == 0.5));
            assert!(m.corner_vertices().iter().any(|&v| m.vertices[v] == [0.5, 0.5]));
        }
        assert_eq!(m.tags(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn refine_counts_and_conservation() {
        let m = Mesh::<f64>::unit_square(1).unwrap();
        let r1 = m.refine_uniform();
        let r2 = r1.refine_uniform();
        assert_eq!(r1.num_triangles(), 8);
        assert_eq!(r2.num_triangles(), 32);
        r2.validate().unwrap();
        assert!((r2.area() - 1.0).abs() < 1e-14);
        let l = Mesh::<f64>::l_shape(1).unwrap();
        let lr = l.refine_uniform().refine_uniform();
        lr.validate().unwrap();
        assert!((lr.area() - 0.75).abs() < 1e-13);
        assert!((lr.boundary_length(BoundarySelection::All).unwrap() - 4.0).abs() < 1e-13);
        assert!((lr.boundary_length(BoundarySelection::Tag(3)).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn boundary_length_by_tag() {
        let m = Mesh::<f64>::unit_square(3).unwrap();
        assert!((m.boundary_length(BoundarySelection::All).unwrap() - 4.0).abs() < 1e-14);
        assert!((m.boundary_length(BoundarySelection::Tag(1)).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(m.boundary_length(BoundarySelection::Tag(9)), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn outward_normals_point_away_from_opposite_vertex() {
        for m in [Mesh::<f64>::unit_square(3).unwrap(), Mesh::<f64>::l_shape(2).unwrap().refine_uniform()] {
            for e in &m.boundary_edges {
                let tri = m.triangles.iter().find(|t| t.contains(&e.v[0]) && t.contains(&e.v[1])).unwrap();
                let opp = *tri.iter().find(|&&v| v != e.v[0] && v != e.v[1]).unwrap();
                let mid = m.edge_point(e, &[0.5, 0.5]);
                let to_opp = sub(m.vertices[opp], mid);
                assert!(crate::scalar::dot(m.outward_normal(e), to_opp) < 0.0);
            }
        }
    }

    #[test]
    fn euler_formula() {
        for m in [Mesh::<f64>::unit_square(5).unwrap(), Mesh::<f64>::l_shape(3).unwrap(), Mesh::<f64>::l_shape(1).unwrap().refine_uniform()] {
            assert_eq!(m.euler_characteristic(), 1);
        }
    }

    #[test]
    fn structured_meshes_are_delaunay() {
        assert!(Mesh::<f64>::unit_square(4).unwrap().is_delaunay());
        assert!(Mesh::<f64>::l_shape(2).unwrap().refine_uniform().refine_uniform().is_delaunay());
        // an obtuse triangle pair violates the angle condition
        let m = Mesh::<f64>::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, -0.1]],
            vec![[0, 1, 2], [0, 3, 1]],
            |_| 1,
        )
        .unwrap();
        assert!(!m.is_delaunay());
    }

    #[test]
    fn quadrature_exactness() {
        // integrate monomials over the reference triangle (0,0),(1,0),(0,1)
        let exact = |i: i32, j: i32| -> f64 {
            // int x^i y^j = i! j! / (i+j+2)!
            let f = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
            f(i) * f(j) / f(i + j + 2)
        };
        for deg in [1usize, 2, 4] {
            let rule = TriangleRule::<f64>::triangle(deg).unwrap();
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..=deg as i32 {
                for j in 0..=(deg as i32 - i) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(b, w)| 0.5 * w * b[1].powi(i) * b[2].powi(j))
                        .sum();
                    assert!((q - exact(i, j)).abs() < 1e-12, "deg {deg} monomial {i},{j}");
                }
            }
        }
        for deg in [1usize, 3, 5] {
            let rule = EdgeRule::<f64>::edge(deg).unwrap();
            for k in 0..=deg as i32 {
                let q: f64 = rule.points.iter().zip(&rule.weights).map(|(b, w)| w * b[1].powi(k)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn text_roundtrip() {
        let m = Mesh::<f64>::l_shape(2).unwrap().refine_uniform();
        let text = m.to_text();
        assert!(text.starts_with(&format!("vertices {} triangles {} bedges {}\n", m.num_vertices(), m.num_triangles(), m.boundary_edges.len())));
        let back = Mesh::<f64>::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn text_rejects_malformed() {
        assert!(matches!(Mesh::<f64>::read_text("vertices 1 triangles 0\n".as_bytes()), Err(Error::Parse { .. })));
        // clockwise triangle
        let cw = "vertices 3 triangles 1 bedges 3\n0 0\n1 0\n0 1\n0 2 1\n0 2 1\n2 1 1\n1 0 1\n";
        assert!(matches!(Mesh::<f64>::read_text(cw.as_bytes()), Err(Error::InvalidMesh(_))));
    }
}
