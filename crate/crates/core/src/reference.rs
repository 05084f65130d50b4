//! Eigenfunction series for the heat equation with Robin conditions on the
//! unit interval and, by separation of variables, on the unit square.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn integrate(f: impl Fn(f64) -> f64, cells: usize) -> f64 {
    let h = 1.0 / cells as f64;
    (0..cells)
        .map(|c| {
            let mid = (c as f64 + 0.5) * h;
            GAUSS5.iter().map(|&(s, w)| w * f(mid + 0.5 * h * s)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Solution of `u_t = u_xx` on `(0, 1)` with `-u_x(0) + h u(0) = 0` and
/// `u_x(1) + h u(1) = 0`, expanded in the Robin eigenfunctions.
#[derive(Debug, Clone)]
pub struct RobinSeries1D {
    pub h: f64,
    pub eigenvalues: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl RobinSeries1D {
    pub fn new(h: f64, u0: impl Fn(f64) -> f64, modes: usize) -> Result<Self> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(invalid(format!("Robin coefficient h = {h} must be finite and nonnegative")));
        }
        if modes == 0 {
            return Err(invalid("at least one mode is needed"));
        }
        let eigenvalues: Vec<f64> = if h == 0.0 {
            (0..modes).map(|k| k as f64 * PI).collect()
        } else {
            let f = |l: f64| (l * l - h * h) * l.sin() - 2.0 * l * h * l.cos();
            (0..modes).map(|k| bisect(f, k as f64 * PI + 1e-14, (k as f64 + 1.0) * PI, 1e-12)).collect()
        };
        let cells = 64 + 8 * modes;
        let mut series = Self { h, eigenvalues, coefficients: Vec::new() };
        series.coefficients = (0..modes)
            .map(|k| {
                let num = integrate(|x| u0(x) * series.mode(k, x), cells);
                let den = integrate(|x| series.mode(k, x).powi(2), cells);
                num / den
            })
            .collect();
        Ok(series)
    }

    /// Eigenfunction `lambda cos(lambda x) + h sin(lambda x)`, or `cos(k pi x)`
    /// in the Neumann case.
    pub fn mode(&self, k: usize, x: f64) -> f64 {
        let l = self.eigenvalues[k];
        if self.h == 0.0 {
            (l * x).cos()
        } else {
            l * (l * x).cos() + self.h * (l * x).sin()
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.coefficients)
            .enumerate()
            .map(|(k, (&l, &c))| c * (-l * l * t).exp() * self.mode(k, x))
            .sum()
    }
}

/// Separated solution `X(t, x) Y(t, y)` on the unit square with the same
/// Robin coefficient on every side.
#[derive(Debug, Clone)]
pub struct RobinSeriesSquare {
    pub x: RobinSeries1D,
    pub y: RobinSeries1D,
}

impl RobinSeriesSquare {
    pub fn new(h: f64, x0: impl Fn(f64) -> f64, y0: impl Fn(f64) -> f64, modes: usize) -> Result<Self> {
        Ok(Self { x: RobinSeries1D::new(h, x0, modes)?, y: RobinSeries1D::new(h, y0, modes)? })
    }

    /// Benchmark with initial value `cos(pi x)`.
    pub fn cosine_benchmark(h: f64) -> Result<Self> {
        Self::new(h, |x| (PI * x).cos(), |_| 1.0, 50)
    }

    pub fn eval(&self, t: f64, p: [f64; 2]) -> f64 {
        self.x.eval(t, p[0]) * self.y.eval(t, p[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_satisfy_equation() {
        let s = RobinSeries1D::new(1.0, |_| 1.0, 10).unwrap();
        for (k, &l) in s.eigenvalues.iter().enumerate() {
            assert!(l > k as f64 * PI && l < (k + 1) as f64 * PI);
            let tan = l.tan();
            assert!((tan - 2.0 * l / (l * l - 1.0)).abs() < 1e-8 * (1.0 + tan.abs()));
        }
    }

    #[test]
    fn reproduces_initial_value() {
        let s = RobinSeries1D::new(1.0, |x| (PI * x).cos(), 50).unwrap();
        for x in [0.2, 0.5, 0.7] {
            assert!((s.eval(0.0, x) - (PI * x).cos()).abs() < 1e-2);
            assert!((s.eval(1e-3, x) - (PI * x).cos()).abs() < 2e-2);
        }
    }

    #[test]
    fn neumann_mode_decay() {
        let s = RobinSeries1D::new(0.0, |x| (PI * x).cos(), 5).unwrap();
        let t = 0.1;
        assert!((s.eval(t, 0.3) - (-PI * PI * t).exp() * (0.3 * PI).cos()).abs() < 1e-10);
    }
}
