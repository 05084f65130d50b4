//! Compressed sparse row matrices and a diagonally preconditioned conjugate
//! gradient solver.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets. Duplicates
    /// are summed in a fixed order and exact zeros are dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(invalid(format!("triplet ({i}, {j}) out of range for dimension {n}")));
        }
        if let Some(&(i, j, v)) = triplets.iter().find(|t| !t.2.is_finite()) {
            return Err(Error::Evaluation { what: format!("matrix entry {v}"), location: format!("({i}, {j})") });
        }
        // stable sort keeps the summation order of duplicates deterministic
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
        let mut k = 0;
        while k < triplets.len() {
            let (i, j, mut v) = triplets[k];
            k += 1;
            while k < triplets.len() && triplets[k].0 == i && triplets[k].1 == j {
                v += triplets[k].2;
                k += 1;
            }
            if v != T::zero() {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, row_ptr, cols, vals })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), vals: vec![T::one(); n] }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let t = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), t).expect("diagonal entries in range")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n, "vector length must equal matrix dimension");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: T, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(invalid(format!("dimension mismatch {} vs {}", self.n, other.n)));
        }
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, c * v)));
        Self::from_triplets(self.n, t)
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * (T::one() + v.abs())))
    }

    /// Nonpositive off-diagonal entries and positive diagonal.
    pub fn has_m_matrix_sign_pattern(&self, tol: T) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| if i == j { v > T::zero() } else { v <= tol }))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Coordinate text, one `i j value` line per nonzero.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{i} {j} {v:.16e}");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi preconditioned conjugate gradients for a symmetric positive
/// definite matrix. Stops when `|b - A x|_2 <= tol |b|_2`.
pub fn conjugate_gradient<T: Real>(a: &SparseMatrix<T>, b: &[T], x0: Option<&[T]>, tol: T, max_iter: usize) -> Result<(Vec<T>, CgOutcome)> {
    let n = a.dim();
    if b.len() != n {
        return Err(invalid(format!("rhs length {} differs from matrix dimension {n}", b.len())));
    }
    if !(tol > T::zero()) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let dinv: Vec<T> = a.diagonal().into_iter().map(|d| if d > T::zero() { T::one() / d } else { T::one() }).collect();
    let bnorm = b.iter().map(|&v| v * v).sum::<T>().sqrt();
    let mut x = x0.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); n]);
    if bnorm == T::zero() {
        return Ok((vec![T::zero(); n], CgOutcome { iterations: 0, residual: 0.0 }));
    }
    let target = tol * bnorm;
    let mut ax = a.mul_vec(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut z: Vec<T> = r.iter().zip(&dinv).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    let mut rnorm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
    let mut it = 0;
    while rnorm > target {
        if it == max_iter {
            return Err(Error::LinearNonConvergence { iterations: it, residual: rnorm.to_f64_lossy() });
        }
        it += 1;
        a.mul_vec_into(&p, &mut ax);
        let pap: T = p.iter().zip(&ax).map(|(&a, &b)| a * b).sum();
        if !(pap > T::zero()) {
            return Err(Error::LinearNonConvergence { iterations: it, residual: rnorm.to_f64_lossy() });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        if it % 50 == 0 {
            // refresh the recursive residual to limit drift
            let axx = a.mul_vec(&x);
            for i in 0..n {
                r[i] = b[i] - axx[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
    }
    Ok((x, CgOutcome { iterations: it, residual: rnorm.to_f64_lossy() }))
}

/// Dense Gaussian elimination with partial pivoting, for small nonsymmetric
/// systems and as a fallback.
pub fn dense_solve<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap_or(std::cmp::Ordering::Equal)).unwrap_or(k);
        if a[piv][k] == T::zero() {
            return Err(invalid("singular matrix in dense solve"));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != T::zero() {
                for j in k..n {
                    let v = a[k][j];
                    a[i][j] -= f * v;
                }
                let bk = b[k];
                b[i] -= f * bk;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

/// Restarted GMRES(m) with Jacobi preconditioning, for nonsymmetric systems.
pub fn gmres<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: T, restart: usize, max_iter: usize) -> Result<(Vec<T>, CgOutcome)> {
    let n = a.dim();
    let dinv: Vec<T> = a.diagonal().into_iter().map(|d| if d != T::zero() { T::one() / d } else { T::one() }).collect();
    let dot = |u: &[T], v: &[T]| u.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>();
    let nrm = |u: &[T]| dot(u, u).sqrt();
    let bnorm = nrm(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok((x, CgOutcome { iterations: 0, residual: 0.0 }));
    }
    let target = tol * bnorm;
    let mut total = 0;
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<T> = (0..n).map(|i| b[i] - ax[i]).collect();
        let beta = nrm(&r);
        if beta <= target {
            return Ok((x, CgOutcome { iterations: total, residual: beta.to_f64_lossy() }));
        }
        if total >= max_iter {
            return Err(Error::LinearNonConvergence { iterations: total, residual: beta.to_f64_lossy() });
        }
        let m = restart.max(1);
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|&ri| ri / beta).collect()];
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let pz: Vec<T> = (0..n).map(|i| v[k][i] * dinv[i]).collect();
            let mut w = a.mul_vec(&pz);
            for (j, vj) in v.iter().enumerate() {
                h[j][k] = dot(&w, vj);
                for i in 0..n {
                    w[i] -= h[j][k] * vj[i];
                }
            }
            h[k + 1][k] = nrm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            let (c, s) = if d == T::zero() { (T::one(), T::zero()) } else { (h[k][k] / d, h[k + 1][k] / d) };
            cs[k] = c;
            sn[k] = s;
            let hk1 = h[k + 1][k];
            h[k][k] = c * h[k][k] + s * hk1;
            h[k + 1][k] = T::zero();
            g[k + 1] = -s * g[k];
            g[k] = c * g[k];
            k_used = k + 1;
            let wn = nrm(&w);
            if g[k + 1].abs() <= target || wn == T::zero() || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|&wi| wi / wn).collect());
        }
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let s: T = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, &yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i] * dinv[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(3, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 2, 5.0), (2, 1, 1.0), (2, 1, -1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 5.0, 0.0]);
        assert!(SparseMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, vec![(0, 0, f64::NAN)]).is_err());
        assert_eq!(m.to_coordinate_text().lines().count(), 2);
    }

    #[test]
    fn cg_identity_and_diagonal() {
        let (x, _) = conjugate_gradient(&SparseMatrix::<f64>::identity(4), &[1.0, 2.0, 3.0, 4.0], None, 1e-12, 10).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0]);
        let d = SparseMatrix::<f64>::from_diagonal(&[2.0, 4.0]);
        let (x, _) = conjugate_gradient(&d, &[2.0, 4.0], None, 1e-12, 10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, t).unwrap();
        let b = vec![1.0; n];
        assert!(matches!(conjugate_gradient(&a, &b, None, 1e-14, 2), Err(Error::LinearNonConvergence { iterations: 2, .. })));
    }

    #[test]
    fn gmres_nonsymmetric() {
        let a = SparseMatrix::<f64>::from_triplets(3, vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, -1.0), (1, 1, 3.0), (1, 2, 1.0), (2, 2, 2.0), (2, 0, 0.5)]).unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let (x, _) = gmres(&a, &b, 1e-13, 10, 100).unwrap();
        let dx = dense_solve(a.to_dense(), b).unwrap();
        for i in 0..3 {
            assert!((x[i] - dx[i]).abs() < 1e-11);
        }
    }
}
