//! Gauss–Legendre rules on `[0, 1]`.

use crate::error::{Error, Result};

/// Nodes and weights of an `order`-point Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("quadrature order must be positive".into()));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess, refined by Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `∫_a^b f(t) dt`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.points().map(|(t, w)| w * f(a + h * t)).sum::<f64>() * h
    }

    /// Componentwise `∫_a^b f(t) dt` for vector-valued integrands of length `len`.
    pub fn integrate_vec(&self, a: f64, b: f64, len: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Vec<f64> {
        let h = b - a;
        let mut acc = vec![0.0; len];
        for (t, w) in self.points() {
            for (s, v) in acc.iter_mut().zip(f(a + h * t)) {
                *s += w * h * v;
            }
        }
        acc
    }

    /// `∫_0^1 f` with one bisection pass: if the two-half estimate differs from
    /// the single-interval one by more than `rel_tol`, the halves are returned.
    pub fn integrate_refined(&self, rel_tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let whole = self.integrate(0.0, 1.0, &mut f);
        let halves = self.integrate(0.0, 0.5, &mut f) + self.integrate(0.5, 1.0, &mut f);
        if (whole - halves).abs() <= rel_tol * (1.0 + halves.abs()) {
            whole
        } else {
            halves
        }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
