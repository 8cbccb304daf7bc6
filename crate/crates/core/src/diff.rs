//! Central finite differences.

use crate::matnum::Matrix;

/// `eps^{1/3}·(1+|x|)`: first-derivative step.
pub(crate) fn step1(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

/// `eps^{1/4}·(1+|x|)`: second-derivative step.
pub(crate) fn step2(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + x.abs())
}

pub(crate) fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = step1(x[j]);
            probe[j] = x[j] + h;
            let fp = f(&probe);
            probe[j] = x[j] - h;
            let fm = f(&probe);
            probe[j] = x[j];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Hessian of a scalar function by second central differences.
pub(crate) fn hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Matrix {
    let n = x.len();
    let mut probe = x.to_vec();
    let f0 = f(x);
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        let hi = step2(x[i]);
        probe[i] = x[i] + hi;
        let fp = f(&probe);
        probe[i] = x[i] - hi;
        let fm = f(&probe);
        probe[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in i + 1..n {
            let hj = step2(x[j]);
            let mut eval = |si: f64, sj: f64| {
                probe[i] = x[i] + si * hi;
                probe[j] = x[j] + sj * hj;
                let v = f(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Jacobian of a vector function: column `j` is `∂f/∂x_j`.
pub(crate) fn jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], out_dim: usize) -> Matrix {
    let mut probe = x.to_vec();
    let mut jac = Matrix::zeros(out_dim, x.len());
    for j in 0..x.len() {
        let h = step1(x[j]);
        probe[j] = x[j] + h;
        let fp = f(&probe);
        probe[j] = x[j] - h;
        let fm = f(&probe);
        probe[j] = x[j];
        for i in 0..out_dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Partial derivatives of a matrix field: `out[k]` is `∂A/∂x_k`.
pub(crate) fn matrix_field_partials(a: impl Fn(&[f64]) -> Matrix, x: &[f64]) -> Vec<Matrix> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = step1(x[k]);
            probe[k] = x[k] + h;
            let ap = a(&probe);
            probe[k] = x[k] - h;
            let am = a(&probe);
            probe[k] = x[k];
            ap.sub(&am).scale(1.0 / (2.0 * h))
        })
        .collect()
}

/// Largest violation of `∂A_ij/∂x_k = ∂A_ik/∂x_j` together with `A = Aᵀ`.
pub(crate) fn integrability_residual(a: impl Fn(&[f64]) -> Matrix, x: &[f64]) -> f64 {
    let n = x.len();
    let a0 = a(x);
    let partials = matrix_field_partials(&a, x);
    let mut r = a0.sub(&a0.transpose()).max_abs();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                r = r.max((partials[k][(i, j)] - partials[j][(i, k)]).abs());
            }
        }
    }
    r
}
