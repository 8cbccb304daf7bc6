//! Lyapunov certificates for the PID closed loop.
//!
//! In the shifted coordinates `x = ∫e + f(y*,0)/k0`, `y = e`, `z = ė` the
//! closed loop reads `ẋ = y`, `ẏ = z`, `ż = g(y,z) − k0·x − k1·y − k2·z` with
//! `g(y,z) = f(y*,0) − f(y*−y, −z) = B(y)·y + A(y,z)·z`. The candidate is
//!
//! ```text
//! V = wᵀPw + H(y) [+ Hψ(y)],   P = ½·C ⊗ I,
//! C = [[μk0, k0, 0], [k0, φ0 + μψ, μ], [0, μ, 1]].
//! ```
//!
//! The constants `φ0, ψ0, ψ1` are replaced by the class bounds
//! `k1 − L1, k2 − L2, k2 + L2` ("class-bound mode"). Sharper sampled
//! constants are available from [`estimate_constants`] as a diagnostic; they
//! never produce a certificate.

use std::cell::RefCell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matnum::{dot, eig_extremes, kron3_with_identity, kron_identity, norm, sub, sym_part, Matrix, SymMatrix};
use crate::plants::{hessian_potential_with_gradient, jacobians, potential_from_field, ClassBounds, ClassTag, Plant};
use crate::quadrature::GaussLegendre;
use crate::regions::{in_omega1, in_omega2, ScaledGains};
use crate::sampling::SampleBox;
use crate::simulator::Trajectory;

/// Default Gauss–Legendre order for the `B`, `A` integrals and potentials.
pub const QUAD_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Sufficient region, any plant in `F(L1, L2)`.
    Theorem1,
    /// Necessary-and-sufficient region, plants in `G(L1, L2)`.
    Proposition1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub phi0: f64,
    pub psi0: f64,
    pub psi1: f64,
    pub psi: f64,
    pub mu: f64,
}

impl Constants {
    fn from_parts(phi0: f64, psi0: f64, psi1: f64, k0: f64, l2: f64, mode: Mode) -> Self {
        let psi = 0.5 * (psi0 + psi1);
        let mu = match mode {
            Mode::Theorem1 => (phi0 * psi0 + k0) / (2.0 * (phi0 + l2 * l2)),
            Mode::Proposition1 => (phi0 * psi0 + k0) / (2.0 * phi0),
        };
        Constants { phi0, psi0, psi1, psi, mu }
    }

    /// Class-bound constants: `φ0 = k1 − L1`, `ψ0 = k2 − L2`, `ψ1 = k2 + L2`.
    pub fn class_bound(s: &ScaledGains, b: ClassBounds, mode: Mode) -> Self {
        Constants::from_parts(s.k1() - b.l1, s.k2() - b.l2, s.k2() + b.l2, s.k0(), b.l2, mode)
    }
}

/// Shifted coordinates `(x, y, z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub mode: Mode,
    pub constants: Constants,
    /// `½·C`, the 3×3 core of `P`.
    pub core: SymMatrix,
    /// `P = ½·C ⊗ I_n`.
    pub p: SymMatrix,
    pub gains: ScaledGains,
    pub bounds: ClassBounds,
    pub ystar: Vec<f64>,
    pub quad_order: usize,
    f_star: Vec<f64>,
    plant: Plant,
}

fn core_matrix(k0: f64, phi0: f64, psi: f64, mu: f64) -> SymMatrix {
    let c = [[mu * k0, k0, 0.0], [k0, phi0 + mu * psi, mu], [0.0, mu, 1.0]];
    SymMatrix::from_upper(3, |i, j| 0.5 * c[i][j])
}

fn claimed_within(tag: ClassTag, b: ClassBounds) -> bool {
    match tag.bounds() {
        Some(c) => c.l1 <= b.l1 && c.l2 <= b.l2,
        None => true,
    }
}

pub fn build_certificate(s: &ScaledGains, b: ClassBounds, p: &Plant, ystar: &[f64], mode: Mode) -> Result<Certificate> {
    let n = p.dim();
    if ystar.len() != n {
        return Err(Error::Dimension(format!("setpoint has length {}, plant order is {n}", ystar.len())));
    }
    let verdict = match mode {
        Mode::Theorem1 => in_omega1(s, b),
        Mode::Proposition1 => in_omega2(s, b),
    };
    if let Some((inequality, margin)) = verdict.margins.first_failure() {
        return Err(Error::Region { inequality: inequality.into(), margin });
    }
    if mode == Mode::Proposition1 && !matches!(p.class(), ClassTag::ClaimsG(_)) {
        return Err(Error::CertificateInapplicable(format!("plant {:?} does not claim the affine-damping class", p.label())));
    }
    if !claimed_within(p.class(), b) {
        return Err(Error::CertificateInapplicable(format!("plant claims bounds {:?} wider than {b:?}", p.class().bounds())));
    }
    let constants = Constants::class_bound(s, b, mode);
    let core = core_matrix(s.k0(), constants.phi0, constants.psi, constants.mu);
    let p_full = kron3_with_identity(&core, n)?;
    let f_star = p.eval(ystar, &vec![0.0; n])?;
    Ok(Certificate {
        mode,
        constants,
        core,
        p: p_full,
        gains: *s,
        bounds: b,
        ystar: ystar.to_vec(),
        quad_order: QUAD_ORDER,
        f_star,
        plant: p.clone(),
    })
}

impl Certificate {
    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn dim(&self) -> usize {
        self.ystar.len()
    }

    /// `P̃`: `P` with `ψ0` in place of `ψ`.
    pub fn p_tilde(&self) -> SymMatrix {
        let c = self.constants;
        kron_identity(&core_matrix(self.gains.k0(), c.phi0, c.psi0, c.mu), self.dim())
    }
}

/// One named strict inequality `lhs > rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Inequality {
    fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Inequality { name, lhs, rhs, margin: lhs - rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PCheck {
    pub mode: Mode,
    pub inequalities: Vec<Inequality>,
    /// Largest deviation from `μφ0 − k0 = (φ0ψ0 − k0)/2` and `ψ0 − μ = (φ0ψ0 − k0)/(2φ0)`.
    pub identity_residual: Option<f64>,
    /// `λ_min(P)` (first mode) or `λ_min(P̃)` (second mode).
    pub min_eig: f64,
}

/// Checks the inequalities that make `P` (or `P̃`) positive definite, then the matrix itself.
pub fn check_p(cert: &Certificate) -> Result<PCheck> {
    let Constants { phi0, psi0, mu, .. } = cert.constants;
    let k0 = cert.gains.k0();
    let l2 = cert.bounds.l2;
    let (inequalities, identity_residual, matrix, label) = match cert.mode {
        Mode::Theorem1 => (
            vec![
                Inequality::new("B1: psi0 > mu", psi0, mu),
                Inequality::new("B2: (mu*phi0 - k0)(psi0 - mu) > mu^2 L2^2", (mu * phi0 - k0) * (psi0 - mu), mu * mu * l2 * l2),
                Inequality::new("B3: mu*phi0 > k0", mu * phi0, k0),
            ],
            None,
            cert.p.clone(),
            "P",
        ),
        Mode::Proposition1 => {
            let gap = phi0 * psi0 - k0;
            let r = ((mu * phi0 - k0) - gap / 2.0).abs().max(((psi0 - mu) - gap / (2.0 * phi0)).abs());
            (
                vec![Inequality::new("mu*phi0 - k0 > 0", mu * phi0 - k0, 0.0), Inequality::new("psi0 - mu > 0", psi0 - mu, 0.0)],
                Some(r),
                cert.p_tilde(),
                "P~",
            )
        }
    };
    if let Some(bad) = inequalities.iter().find(|q| !(q.margin > 0.0)) {
        return Err(Error::CertificateInvalid { inequality: bad.name.into(), margin: bad.margin });
    }
    let min_eig = eig_extremes(&matrix).0;
    if !matrix.is_positive_definite() {
        return Err(Error::CertificateInvalid { inequality: format!("{label} positive definite"), margin: min_eig });
    }
    Ok(PCheck { mode: cert.mode, inequalities, identity_residual, min_eig })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub b: Matrix,
    pub a: Matrix,
    /// `|g(y,z) − B·y − A·z|`.
    pub residual: f64,
    pub g: Vec<f64>,
}

fn integrate_pair(p: &Plant, ystar: &[f64], y: &[f64], z: &[f64], order: usize) -> Result<(Matrix, Matrix)> {
    let n = p.dim();
    let rule = GaussLegendre::new(order)?;
    let zero = vec![0.0; n];
    let mut b = Matrix::zeros(n, n);
    let mut a = Matrix::zeros(n, n);
    for (t, w) in rule.points() {
        let x1: Vec<f64> = (0..n).map(|i| ystar[i] - t * y[i]).collect();
        let (j1, _) = jacobians(p, &x1, &zero)?;
        b = b.add(&j1.scale(w));
        let x1: Vec<f64> = (0..n).map(|i| ystar[i] - y[i]).collect();
        let x2: Vec<f64> = z.iter().map(|v| -t * v).collect();
        let (_, j2) = jacobians(p, &x1, &x2)?;
        a = a.add(&j2.scale(w));
    }
    Ok((b, a))
}

/// `B(y) = ∫₀¹ ∂g/∂y(τy, 0) dτ`, `A(y,z) = ∫₀¹ ∂g/∂z(y, τz) dτ`.
///
/// Computed at `quad_order` and checked against `2·quad_order`.
pub fn decompose_g(p: &Plant, ystar: &[f64], y: &[f64], z: &[f64], quad_order: usize) -> Result<Decomposition> {
    let n = p.dim();
    if ystar.len() != n || y.len() != n || z.len() != n {
        return Err(Error::Dimension(format!("y*, y and z must have length {n}")));
    }
    let (b, a) = integrate_pair(p, ystar, y, z, quad_order)?;
    let (b2, a2) = integrate_pair(p, ystar, y, z, 2 * quad_order)?;
    let tol = if p.has_analytic_jacobians() { 1e-9 } else { 1e-6 };
    let change = b.sub(&b2).max_abs().max(a.sub(&a2).max_abs());
    let scale = 1.0 + b2.max_abs().max(a2.max_abs());
    if !(change <= tol * scale) {
        return Err(Error::Numeric(format!(
            "decomposition quadrature did not settle (order {quad_order} vs {}: {change:e})",
            2 * quad_order
        )));
    }
    let zero = vec![0.0; n];
    let f_star = p.eval(ystar, &zero)?;
    let f_shift = p.eval(&sub(ystar, y), &z.iter().map(|v| -v).collect::<Vec<_>>())?;
    let g = sub(&f_star, &f_shift);
    let by = b.mul_vec(y);
    let az = a.mul_vec(z);
    let residual = norm(&(0..n).map(|i| g[i] - by[i] - az[i]).collect::<Vec<_>>());
    Ok(Decomposition { b, a, residual, g })
}

/// `U(y* − y) − U(y*)`, analytic when the plant provides `U`.
fn potential_drop(cert: &Certificate, y: &[f64]) -> Result<f64> {
    let x = sub(&cert.ystar, y);
    match (cert.plant.potential(&x), cert.plant.potential(&cert.ystar)) {
        (Some(ux), Some(us)) => Ok(ux - us),
        _ => potential_from_field(&cert.plant, &cert.ystar, &x, cert.quad_order),
    }
}

/// `H(y) = (k1 − φ0)/2·|y|² − U(y*−y) + U(y*) − ∇U(y*)ᵀy`.
pub fn eval_h(cert: &Certificate, y: &[f64]) -> Result<f64> {
    if y.len() != cert.dim() {
        return Err(Error::Dimension("y has the wrong length".into()));
    }
    let q = 0.5 * (cert.gains.k1() - cert.constants.phi0) * dot(y, y);
    Ok(q - potential_drop(cert, y)? - dot(&cert.f_star, y))
}

/// `S(y*−y) − S(y*) + ∇S(y*−y)ᵀy`, which is gauge-free.
fn damping_term(cert: &Certificate, y: &[f64]) -> Result<f64> {
    let x = sub(&cert.ystar, y);
    if let (Some((sx, gx)), Some((ss, _))) = (cert.plant.damping_potential(&x), cert.plant.damping_potential(&cert.ystar)) {
        return Ok(sx - ss + dot(&gx, y));
    }
    let n = cert.dim();
    let zero = vec![0.0; n];
    let failure = RefCell::new(None);
    let field = |p: &[f64]| match jacobians(&cert.plant, p, &zero) {
        Ok((_, j2)) => j2,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            Matrix::zeros(n, n)
        }
    };
    // Gauge S(y*) = 0, ∇S(y*) = 0: the gauge terms cancel in this combination.
    let h = hessian_potential_with_gradient(&field, &cert.ystar, &x, cert.quad_order).map_err(|e| match e {
        Error::NotHessianField { residual } => {
            Error::CertificateInapplicable(format!("no damping potential: ∂f/∂x₂(·,0) is not a Hessian field (residual {residual:e})"))
        }
        other => other,
    })?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(h.value + dot(&h.gradient, y))
}

/// `Hψ(y) = μ·((k2 − ψ)/2·|y|² + S(y*−y) − S(y*) + ∇S(y*−y)ᵀy)`.
pub fn eval_hpsi(cert: &Certificate, y: &[f64]) -> Result<f64> {
    if cert.mode != Mode::Proposition1 {
        return Err(Error::CertificateInapplicable("Hψ belongs to the second-mode certificate".into()));
    }
    if y.len() != cert.dim() {
        return Err(Error::Dimension("y has the wrong length".into()));
    }
    let c = cert.constants;
    Ok(c.mu * (0.5 * (cert.gains.k2() - c.psi) * dot(y, y) + damping_term(cert, y)?))
}

fn stacked(t: &TransformedState) -> Vec<f64> {
    t.x.iter().chain(&t.y).chain(&t.z).copied().collect()
}

pub fn eval_v(cert: &Certificate, t: &TransformedState) -> Result<f64> {
    let n = cert.dim();
    if t.x.len() != n || t.y.len() != n || t.z.len() != n {
        return Err(Error::Dimension(format!("transformed state must have blocks of length {n}")));
    }
    let mut v = cert.p.quad_form(&stacked(t)) + eval_h(cert, &t.y)?;
    if cert.mode == Mode::Proposition1 {
        v += eval_hpsi(cert, &t.y)?;
    }
    Ok(v)
}

/// The matrix `Q(y,z)` with `V̇ = −[y; z]ᵀ Q [y; z]`.
///
/// First mode: `[[−Q11, Q12], [Q12ᵀ, −Q22]]` with `Q11 = (k0 − μk1)I + μB`,
/// `Q22 = A^sym + (μ − k2)I`, `Q12 = −½(μ(ψ − k2)I + μA)`. In the second
/// mode the `Hψ` term cancels the cross block.
pub fn q_matrix(cert: &Certificate, y: &[f64], z: &[f64]) -> Result<SymMatrix> {
    let n = cert.dim();
    let d = decompose_g(&cert.plant, &cert.ystar, y, z, cert.quad_order)?;
    let Constants { mu, psi, .. } = cert.constants;
    let (k1, k0, k2) = (cert.gains.k1(), cert.gains.k0(), cert.gains.k2());
    let eye = Matrix::identity(n);
    let neg_q11 = eye.scale(mu * k1 - k0).sub(&d.b.scale(mu));
    let neg_q22 = eye.scale(k2 - mu).sub(sym_part(&d.a)?.as_matrix());
    let q12 = match cert.mode {
        Mode::Theorem1 => eye.scale(mu * (psi - k2)).add(&d.a.scale(mu)).scale(-0.5),
        Mode::Proposition1 => Matrix::zeros(n, n),
    };
    let mut q = Matrix::zeros(2 * n, 2 * n);
    q.set_block(0, 0, &neg_q11);
    q.set_block(0, n, &q12);
    q.set_block(n, 0, &q12.transpose());
    q.set_block(n, n, &neg_q22);
    sym_part(&q)
}

pub fn q_min_eig(cert: &Certificate, y: &[f64], z: &[f64]) -> Result<f64> {
    Ok(q_matrix(cert, y, z)?.eig_extremes().0)
}

/// `V̇` from the quadratic form.
pub fn vdot_quadratic(cert: &Certificate, y: &[f64], z: &[f64]) -> Result<f64> {
    let yz: Vec<f64> = y.iter().chain(z).copied().collect();
    Ok(-q_matrix(cert, y, z)?.quad_form(&yz))
}

/// Closed-loop matrix `M` with `ẇ = M·w`, assembled from a decomposition.
#[cfg(test)]
pub(crate) fn closed_loop_matrix(cert: &Certificate, d: &Decomposition) -> Matrix {
    let n = cert.dim();
    let eye = Matrix::identity(n);
    let mut m = Matrix::zeros(3 * n, 3 * n);
    m.set_block(0, n, &eye);
    m.set_block(n, 2 * n, &eye);
    m.set_block(2 * n, 0, &eye.scale(-cert.gains.k0()));
    m.set_block(2 * n, n, &eye.scale(-cert.gains.k1()).add(&d.b));
    m.set_block(2 * n, 2 * n, &eye.scale(-cert.gains.k2()).add(&d.a));
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VdotSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub max: f64,
    pub v0: f64,
}

/// Central-difference `dV/dt` at the interior samples of a trajectory.
pub fn vdot_along(cert: &Certificate, traj: &Trajectory) -> Result<VdotSeries> {
    if traj.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {}", traj.len())));
    }
    let v = match &traj.v {
        Some(v) if v.len() == traj.len() => v.clone(),
        _ => (0..traj.len()).map(|i| eval_v(cert, &traj.transformed(cert, i)?)).collect::<Result<Vec<_>>>()?,
    };
    let mut times = Vec::with_capacity(traj.len() - 2);
    let mut values = Vec::with_capacity(traj.len() - 2);
    for i in 1..traj.len() - 1 {
        times.push(traj.times[i]);
        values.push((v[i + 1] - v[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(VdotSeries { times, values, max, v0: v[0] })
}

/// Sampled constants. Diagnostic only: no certificate is built from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalConstants {
    pub constants: Constants,
    pub max_stiffness_eig: f64,
    pub damping_sym_range: (f64, f64),
    pub samples: usize,
    pub certified: bool,
}

/// Estimates `φ0`, `ψ0`, `ψ1` from Jacobians sampled on a `2n`-dimensional box.
pub fn estimate_constants(
    p: &Plant,
    s: &ScaledGains,
    l2: f64,
    mode: Mode,
    domain: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalConstants> {
    let n = p.dim();
    if domain.dim() != 2 * n {
        return Err(Error::Dimension(format!("sample box must have dimension {}", 2 * n)));
    }
    let mut top = f64::NEG_INFINITY;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for pt in domain.halton(samples, seed) {
        let (j1, j2) = jacobians(p, &pt[..n], &pt[n..])?;
        top = top.max(sym_part(&j1)?.eig_extremes().1);
        let (a, b) = sym_part(&j2)?.eig_extremes();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let constants = Constants::from_parts(s.k1() - top, s.k2() - hi, s.k2() - lo, s.k0(), l2, mode);
    Ok(EmpiricalConstants { constants, max_stiffness_eig: top, damping_sym_range: (lo, hi), samples, certified: false })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub mode: Mode,
    pub constants: Constants,
    pub check: PCheck,
    pub samples: usize,
    /// Sampled minimum of `λ_min(Q)`; an estimate of `α*`, not a bound.
    pub sampled_q_min: f64,
    /// Sampled maximum of `V̇` from the quadratic form.
    pub sampled_vdot_max: f64,
}

/// Checks `P` and samples `Q` at Halton points `(y, z)` of a `2n`-dimensional box.
pub fn certificate_report(cert: &Certificate, domain: &SampleBox, samples: usize, seed: u64) -> Result<CertificateReport> {
    let n = cert.dim();
    if domain.dim() != 2 * n {
        return Err(Error::Dimension(format!("sample box must have dimension {}", 2 * n)));
    }
    let check = check_p(cert)?;
    let mut q_min = f64::INFINITY;
    let mut vdot_max = f64::NEG_INFINITY;
    for pt in domain.halton(samples, seed) {
        let q = q_matrix(cert, &pt[..n], &pt[n..])?;
        q_min = q_min.min(q.eig_extremes().0);
        vdot_max = vdot_max.max(-q.quad_form(&pt));
    }
    Ok(CertificateReport { mode: cert.mode, constants: cert.constants, check, samples, sampled_q_min: q_min, sampled_vdot_max: vdot_max })
}
