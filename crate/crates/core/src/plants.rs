//! Plant nonlinearities `f(x₁, x₂)` and the classes they are checked against.
//!
//! A plant belongs to `F(L1, L2)` when the symmetric part of `∂f/∂x₁` stays
//! below `L1·I`, the induced norm of `∂f/∂x₂` stays below `L2`, and
//! `∂f/∂x₁` is symmetric on the rest manifold `x₂ = 0` (so `f(·,0)` is a
//! gradient field). The subclass `G(L1, L2)` additionally asks for `f` affine
//! in `x₂` with `∂f/∂x₂(·,0)` a Hessian field.
//!
//! Membership over all of `ℝⁿ×ℝⁿ` cannot be settled by sampling. The
//! [`check_membership`] routine is a sample-scale verification on a box:
//! it reports residuals on scrambled Halton points and never claims more.
//! The built-in linear, worst-case and sinusoidal plants are in their classes
//! analytically, which is what [`make_builtin`] validates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diff;
use crate::error::{Error, Result};
use crate::matnum::{self, dot, norm, sub, Matrix};
use crate::quadrature::GaussLegendre;
use crate::sampling::{self, SampleBox};

/// Jacobian bounds `(L1, L2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBounds {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
}

impl ClassBounds {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !l1.is_finite() || !l2.is_finite() {
            return Err(Error::Domain("class bounds must be finite".into()));
        }
        if l2 < 0.0 {
            return Err(Error::Domain(format!("L2 must be nonnegative, got {l2}")));
        }
        Ok(ClassBounds { l1, l2 })
    }
}

/// Which class, if any, a plant claims to belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassTag {
    ClaimsF(ClassBounds),
    ClaimsG(ClassBounds),
    Unchecked,
}

impl ClassTag {
    pub fn bounds(&self) -> Option<ClassBounds> {
        match self {
            ClassTag::ClaimsF(b) | ClassTag::ClaimsG(b) => Some(*b),
            ClassTag::Unchecked => None,
        }
    }
}

/// Evaluators behind a [`Plant`]. Implementations must be pure.
pub trait Dynamics: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x1: &[f64], x2: &[f64]) -> Vec<f64>;

    /// Analytic `(∂f/∂x₁, ∂f/∂x₂)`, when known.
    fn jacobians(&self, _x1: &[f64], _x2: &[f64]) -> Option<(Matrix, Matrix)> {
        None
    }

    /// `U(x₁)` with `∇U = f(·, 0)`, when known.
    fn potential(&self, _x1: &[f64]) -> Option<f64> {
        None
    }

    /// `(S(x₁), ∇S(x₁))` with `∇²S = ∂f/∂x₂(·, 0)`, when known.
    fn damping_potential(&self, _x1: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }
}

/// A plant nonlinearity together with its class claim.
#[derive(Clone)]
pub struct Plant {
    dynamics: Arc<dyn Dynamics>,
    class: ClassTag,
    label: String,
}

impl fmt::Debug for Plant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Plant").field("label", &self.label).field("n", &self.dim()).field("class", &self.class).finish()
    }
}

impl Plant {
    pub fn new(dynamics: impl Dynamics + 'static, class: ClassTag, label: impl Into<String>) -> Self {
        Plant { dynamics: Arc::new(dynamics), class, label: label.into() }
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn class(&self) -> ClassTag {
        self.class
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        let z = vec![0.0; self.dim()];
        self.dynamics.jacobians(&z, &z).is_some()
    }

    /// `f(x₁, x₂)`, rejecting non-finite values.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if x1.len() != n || x2.len() != n {
            return Err(Error::Dimension(format!("plant of order {n} evaluated at lengths {} and {}", x1.len(), x2.len())));
        }
        let v = self.dynamics.eval(x1, x2);
        if v.len() != n || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation { x1: x1.to_vec(), x2: x2.to_vec() });
        }
        Ok(v)
    }

    pub fn potential(&self, x1: &[f64]) -> Option<f64> {
        self.dynamics.potential(x1)
    }

    pub fn damping_potential(&self, x1: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.dynamics.damping_potential(x1)
    }

    pub(crate) fn raw_eval(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        self.dynamics.eval(x1, x2)
    }
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// User-supplied potentials for a gradient plant `f = ∇U(x₁) + ∇²S(x₁)·x₂`.
///
/// Missing derivatives are taken by central finite differences of `U` and `S`.
#[derive(Clone)]
pub struct GradientPotentials {
    pub n: usize,
    pub u: ScalarFn,
    pub grad_u: Option<VectorFn>,
    pub s: Option<ScalarFn>,
    pub hess_s: Option<MatrixFn>,
}

impl fmt::Debug for GradientPotentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradientPotentials").field("n", &self.n).finish_non_exhaustive()
    }
}

/// The built-in plant families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BuiltinKind {
    /// `f = A x₁ + B x₂ + c`.
    Linear {
        #[serde(rename = "A")]
        a: Matrix,
        #[serde(rename = "B")]
        b: Matrix,
        #[serde(default)]
        c: Option<Vec<f64>>,
    },
    /// `f = L1 x₁ + L2 x₂ + c`, the plant that makes the necessary region tight.
    WorstCase {
        #[serde(rename = "L1")]
        l1: f64,
        #[serde(rename = "L2")]
        l2: f64,
        #[serde(default)]
        c: Option<Vec<f64>>,
    },
    /// `f = a·sin(x₁) (componentwise) + B x₂`.
    Sinusoidal {
        a: f64,
        #[serde(rename = "B")]
        b: Matrix,
    },
    #[serde(skip)]
    Gradient(GradientPotentials),
}

/// Class claimed in a plant specification file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub class: ClaimedClass,
    #[serde(flatten)]
    pub bounds: ClassBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimedClass {
    F,
    G,
}

/// Plant specification file: `{ kind, n, params, claimed }`, matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSpec {
    pub n: usize,
    #[serde(flatten)]
    pub model: BuiltinKind,
    #[serde(default)]
    pub claimed: Option<Claim>,
}

impl PlantSpec {
    pub fn build(&self) -> Result<Plant> {
        let tag = match self.claimed {
            None => ClassTag::Unchecked,
            Some(Claim { class: ClaimedClass::F, bounds }) => ClassTag::ClaimsF(ClassBounds::new(bounds.l1, bounds.l2)?),
            Some(Claim { class: ClaimedClass::G, bounds }) => ClassTag::ClaimsG(ClassBounds::new(bounds.l1, bounds.l2)?),
        };
        make_builtin(self.model.clone(), self.n, tag)
    }
}

#[derive(Debug, Clone)]
struct LinearDynamics {
    a: Matrix,
    b: Matrix,
    c: Vec<f64>,
}

impl Dynamics for LinearDynamics {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        let ax = self.a.mul_vec(x1);
        let bx = self.b.mul_vec(x2);
        (0..self.c.len()).map(|i| ax[i] + bx[i] + self.c[i]).collect()
    }

    fn jacobians(&self, _: &[f64], _: &[f64]) -> Option<(Matrix, Matrix)> {
        Some((self.a.clone(), self.b.clone()))
    }

    fn potential(&self, x1: &[f64]) -> Option<f64> {
        (self.a == self.a.transpose()).then(|| 0.5 * dot(x1, &self.a.mul_vec(x1)) + dot(&self.c, x1))
    }

    fn damping_potential(&self, x1: &[f64]) -> Option<(f64, Vec<f64>)> {
        (self.b == self.b.transpose()).then(|| {
            let bx = self.b.mul_vec(x1);
            (0.5 * dot(x1, &bx), bx)
        })
    }
}

#[derive(Debug, Clone)]
struct SinusoidalDynamics {
    a: f64,
    b: Matrix,
}

impl Dynamics for SinusoidalDynamics {
    fn dim(&self) -> usize {
        self.b.rows()
    }

    fn eval(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        let bx = self.b.mul_vec(x2);
        x1.iter().zip(bx).map(|(x, v)| self.a * x.sin() + v).collect()
    }

    fn jacobians(&self, x1: &[f64], _: &[f64]) -> Option<(Matrix, Matrix)> {
        let d: Vec<f64> = x1.iter().map(|x| self.a * x.cos()).collect();
        Some((Matrix::from_diag(&d), self.b.clone()))
    }

    fn potential(&self, x1: &[f64]) -> Option<f64> {
        Some(-self.a * x1.iter().map(|x| x.cos()).sum::<f64>())
    }

    fn damping_potential(&self, x1: &[f64]) -> Option<(f64, Vec<f64>)> {
        (self.b == self.b.transpose()).then(|| {
            let bx = self.b.mul_vec(x1);
            (0.5 * dot(x1, &bx), bx)
        })
    }
}

struct GradientDynamics(GradientPotentials);

impl GradientDynamics {
    fn grad_u(&self, x1: &[f64]) -> Vec<f64> {
        match &self.0.grad_u {
            Some(g) => g(x1),
            None => diff::gradient(|x| (self.0.u)(x), x1),
        }
    }

    fn hess_s(&self, x1: &[f64]) -> Matrix {
        match (&self.0.hess_s, &self.0.s) {
            (Some(h), _) => h(x1),
            (None, Some(s)) => diff::hessian(|x| s(x), x1),
            (None, None) => Matrix::zeros(self.0.n, self.0.n),
        }
    }
}

impl Dynamics for GradientDynamics {
    fn dim(&self) -> usize {
        self.0.n
    }

    fn eval(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        matnum::add(&self.grad_u(x1), &self.hess_s(x1).mul_vec(x2))
    }

    fn potential(&self, x1: &[f64]) -> Option<f64> {
        Some((self.0.u)(x1))
    }

    fn damping_potential(&self, x1: &[f64]) -> Option<(f64, Vec<f64>)> {
        match &self.0.s {
            Some(s) => Some((s(x1), diff::gradient(|x| s(x), x1))),
            None if self.0.hess_s.is_none() => Some((0.0, vec![0.0; self.0.n])),
            None => None,
        }
    }
}

/// Plant defined by an arbitrary closure, with no analytic extras.
pub struct FnDynamics<F> {
    pub n: usize,
    pub f: F,
}

impl<F> Dynamics for FnDynamics<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        (self.f)(x1, x2)
    }
}

const CLAIM_TOL: f64 = 1e-12;

fn check_bound(name: &str, value: f64, bound: f64) -> Result<()> {
    if value > bound + CLAIM_TOL * (1.0 + bound.abs()) {
        Err(Error::Construction(format!("{name} = {value} exceeds {bound}")))
    } else {
        Ok(())
    }
}

fn check_symmetric(name: &str, m: &Matrix) -> Result<()> {
    let r = m.sub(&m.transpose()).max_abs();
    if r > 0.0 {
        Err(Error::Construction(format!("{name} is not symmetric (residual {r})")))
    } else {
        Ok(())
    }
}

fn square_of(name: &str, m: &Matrix, n: usize) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::Dimension(format!("{name} must be {n}x{n}, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::Domain(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Builds one of the built-in plant families and validates its class claim.
pub fn make_builtin(kind: BuiltinKind, n: usize, class: ClassTag) -> Result<Plant> {
    if n == 0 {
        return Err(Error::Dimension("plant order must be positive".into()));
    }
    let offset = |c: Option<Vec<f64>>| -> Result<Vec<f64>> {
        let c = c.unwrap_or_else(|| vec![0.0; n]);
        if c.len() != n {
            return Err(Error::Dimension(format!("offset c must have length {n}")));
        }
        Ok(c)
    };
    match kind {
        BuiltinKind::Linear { a, b, c } => {
            square_of("A", &a, n)?;
            square_of("B", &b, n)?;
            let c = offset(c)?;
            if let Some(bounds) = class.bounds() {
                check_symmetric("A", &a)?;
                check_bound("lambda_max(A)", matnum::sym_part(&a)?.eig_extremes().1, bounds.l1)?;
                check_bound("||B||", matnum::spectral_norm(&b), bounds.l2)?;
                if matches!(class, ClassTag::ClaimsG(_)) {
                    check_symmetric("B", &b)?;
                }
            }
            Ok(Plant::new(LinearDynamics { a, b, c }, class, "linear"))
        }
        BuiltinKind::WorstCase { l1, l2, c } => {
            let own = ClassBounds::new(l1, l2)?;
            let c = offset(c)?;
            let tag = match class {
                ClassTag::Unchecked => ClassTag::ClaimsG(own),
                other => {
                    let b = other.bounds().unwrap();
                    check_bound("L1 of worst-case plant", l1, b.l1)?;
                    check_bound("L2 of worst-case plant", l2, b.l2)?;
                    other
                }
            };
            let dynamics = LinearDynamics { a: Matrix::identity(n).scale(l1), b: Matrix::identity(n).scale(l2), c };
            Ok(Plant::new(dynamics, tag, "worst_case"))
        }
        BuiltinKind::Sinusoidal { a, b } => {
            square_of("B", &b, n)?;
            if !a.is_finite() {
                return Err(Error::Domain("amplitude a must be finite".into()));
            }
            if let Some(bounds) = class.bounds() {
                check_bound("|a|", a.abs(), bounds.l1)?;
                check_bound("||B||", matnum::spectral_norm(&b), bounds.l2)?;
                if matches!(class, ClassTag::ClaimsG(_)) {
                    check_symmetric("B", &b)?;
                }
            }
            Ok(Plant::new(SinusoidalDynamics { a, b }, class, "sinusoidal"))
        }
        BuiltinKind::Gradient(p) => {
            if p.n != n {
                return Err(Error::Dimension(format!("gradient plant declares n={} but n={n} requested", p.n)));
            }
            Ok(Plant::new(GradientDynamics(p), class, "gradient"))
        }
    }
}

/// `(∂f/∂x₁, ∂f/∂x₂)`: analytic when available, otherwise central differences
/// with step `eps^{1/3}·(1+|x_j|)`.
pub fn jacobians(p: &Plant, x1: &[f64], x2: &[f64]) -> Result<(Matrix, Matrix)> {
    let n = p.dim();
    p.eval(x1, x2)?;
    if let Some(j) = p.dynamics.jacobians(x1, x2) {
        return Ok(j);
    }
    let j1 = diff::jacobian(|x| p.raw_eval(x, x2), x1, n);
    let j2 = diff::jacobian(|v| p.raw_eval(x1, v), x2, n);
    if !j1.is_finite() || !j2.is_finite() {
        return Err(Error::Evaluation { x1: x1.to_vec(), x2: x2.to_vec() });
    }
    Ok((j1, j2))
}

/// Per-condition verdicts of a [`MembershipReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MembershipVerdicts {
    pub stiffness_bound: bool,
    pub damping_bound: bool,
    pub conservative_at_rest: bool,
    pub affine_in_velocity: bool,
    pub hessian_field: bool,
}

/// Sample-scale residuals for the class conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub samples: usize,
    /// `max λ_max((∂f/∂x₁)^sym)`.
    pub max_stiffness_eig: f64,
    /// `max ‖∂f/∂x₂‖`.
    pub max_damping_norm: f64,
    pub stiffness_excess: f64,
    pub damping_excess: f64,
    /// `max |∂f/∂x₁ − (∂f/∂x₁)ᵀ|` at `x₂ = 0`, entrywise.
    pub symmetry_residual: f64,
    /// Largest violation of symmetry plus the integrability condition for
    /// `A(x₁) = ∂f/∂x₂(x₁, 0)`.
    pub integrability_residual: f64,
    /// Largest second derivative of `f` in `x₂` along sampled directions.
    pub velocity_hessian_residual: f64,
    /// `max |∇U − f(·,0)| / (1+|f|)` when the plant carries `U`.
    pub potential_residual: Option<f64>,
    pub verdicts: MembershipVerdicts,
}

impl MembershipReport {
    pub fn in_f(&self) -> bool {
        let v = self.verdicts;
        v.stiffness_bound && v.damping_bound && v.conservative_at_rest
    }

    pub fn in_g(&self) -> bool {
        let v = self.verdicts;
        self.in_f() && v.affine_in_velocity && v.hessian_field
    }
}

/// Threshold on the second-difference test of affinity in `x₂`.
pub const VELOCITY_HESSIAN_TOL: f64 = 1e-5;
/// Threshold on finite-difference symmetry and integrability residuals.
pub const FIELD_TOL: f64 = 1e-6;

/// Evaluates every class condition on `samples` scrambled Halton points of a
/// `2n`-dimensional box (first `n` coordinates are `x₁`). Deterministic in `seed`.
pub fn check_membership(p: &Plant, bounds: ClassBounds, domain: &SampleBox, samples: usize, seed: u64) -> Result<MembershipReport> {
    let n = p.dim();
    if domain.dim() != 2 * n {
        return Err(Error::Dimension(format!("sampling box must have dimension {}", 2 * n)));
    }
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let analytic = p.has_analytic_jacobians();
    let bound_tol = if analytic { 1e-12 } else { 1e-6 };
    let points = domain.halton(samples, seed);
    let mut dir_rng = sampling::rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let zero = vec![0.0; n];

    let mut max_eig = f64::NEG_INFINITY;
    let mut max_norm: f64 = 0.0;
    let mut sym_res: f64 = 0.0;
    let mut int_res: f64 = 0.0;
    let mut hess_res: f64 = 0.0;
    let mut pot_res: Option<f64> = None;

    for pt in &points {
        let (x1, x2) = pt.split_at(n);
        let (j1, j2) = jacobians(p, x1, x2)?;
        max_eig = max_eig.max(matnum::sym_part(&j1)?.eig_extremes().1);
        max_norm = max_norm.max(matnum::spectral_norm(&j2));

        let (j1_rest, _) = jacobians(p, x1, &zero)?;
        sym_res = sym_res.max(j1_rest.sub(&j1_rest.transpose()).max_abs());

        let a_field = |x: &[f64]| jacobians(p, x, &zero).map(|j| j.1).unwrap_or_else(|_| Matrix::zeros(n, n));
        int_res = int_res.max(diff::integrability_residual(a_field, x1));

        let d = random_unit(&mut dir_rng, n);
        hess_res = hess_res.max(second_difference_in_velocity(p, x1, x2, &d, analytic));

        if p.potential(x1).is_some() {
            let g = diff::gradient(|x| p.potential(x).unwrap_or(f64::NAN), x1);
            let f0 = p.eval(x1, &zero)?;
            let r = norm(&sub(&g, &f0)) / (1.0 + norm(&f0));
            pot_res = Some(pot_res.unwrap_or(0.0).max(r));
        }
    }

    let sym_tol = if analytic { 0.0 } else { FIELD_TOL };
    let stiffness_excess = (max_eig - bounds.l1).max(0.0);
    let damping_excess = (max_norm - bounds.l2).max(0.0);
    let verdicts = MembershipVerdicts {
        stiffness_bound: stiffness_excess <= bound_tol * (1.0 + bounds.l1.abs()),
        damping_bound: damping_excess <= bound_tol * (1.0 + bounds.l2),
        conservative_at_rest: sym_res <= sym_tol,
        affine_in_velocity: hess_res <= VELOCITY_HESSIAN_TOL,
        hessian_field: int_res <= FIELD_TOL,
    };
    Ok(MembershipReport {
        samples,
        max_stiffness_eig: max_eig,
        max_damping_norm: max_norm,
        stiffness_excess,
        damping_excess,
        symmetry_residual: sym_res,
        integrability_residual: int_res,
        velocity_hessian_residual: hess_res,
        potential_residual: pot_res,
        verdicts,
    })
}

fn random_unit(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = norm(&v);
        if l > 1e-3 {
            return matnum::scale(&v, 1.0 / l);
        }
    }
}

/// `|∇²_{x₂} f [d, d]|`. With analytic Jacobians this is the central
/// difference of `∂f/∂x₂·d` along `d`; otherwise the three-point second
/// difference of `f` itself.
fn second_difference_in_velocity(p: &Plant, x1: &[f64], x2: &[f64], d: &[f64], analytic: bool) -> f64 {
    let h = diff::step2(norm(x2));
    let plus = matnum::axpy(x2, h, d);
    let minus = matnum::axpy(x2, -h, d);
    if analytic {
        let jp = p.dynamics.jacobians(x1, &plus).unwrap().1;
        let jm = p.dynamics.jacobians(x1, &minus).unwrap().1;
        norm(&jp.sub(&jm).mul_vec(d)) / (2.0 * h)
    } else {
        let fp = p.raw_eval(x1, &plus);
        let fm = p.raw_eval(x1, &minus);
        let f0 = p.raw_eval(x1, x2);
        let dd: Vec<f64> = (0..fp.len()).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h)).collect();
        norm(&dd)
    }
}

fn segment_point(base: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    base.iter().zip(x).map(|(b, xi)| b + t * (xi - b)).collect()
}

const SEGMENT_CHECKS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const REFINE_TOL: f64 = 1e-10;

/// `U(x) = ∫₀¹ f(base + t(x−base), 0)·(x−base) dt`, so `U(base) = 0`.
///
/// Gauss–Legendre of the given order with one bisection pass. The Jacobian
/// `∂f/∂x₁(·,0)` must be symmetric at the checked points of the segment.
pub fn potential_from_field(p: &Plant, base: &[f64], x: &[f64], quad_order: usize) -> Result<f64> {
    let n = p.dim();
    if base.len() != n || x.len() != n {
        return Err(Error::Dimension("base and x must match the plant order".into()));
    }
    let zero = vec![0.0; n];
    let mut residual: f64 = 0.0;
    for t in SEGMENT_CHECKS {
        let (j1, _) = jacobians(p, &segment_point(base, x, t), &zero)?;
        residual = residual.max(j1.sub(&j1.transpose()).max_abs());
    }
    if residual > FIELD_TOL {
        return Err(Error::NotConservative { residual });
    }
    let dx = sub(x, base);
    let rule = GaussLegendre::new(quad_order)?;
    let mut failure = None;
    let u = rule.integrate_refined(REFINE_TOL, |t| match p.eval(&segment_point(base, x, t), &zero) {
        Ok(f) => dot(&f, &dx),
        Err(e) => {
            failure = Some(e);
            0.0
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(u),
    }
}

/// Reconstructed Hessian potential: `S(x)` and its gradient `G(x)`, in the
/// gauge `S(base) = 0`, `∇S(base) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianPotential {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Nested line integrals for `S` without any integrability precheck.
///
/// `G(x) = ∫₀¹ A(base+t(x−base))·(x−base) dt`, then
/// `S(x) = ∫₀¹ G(base+s(x−base))·(x−base) ds`. When the field is not a
/// Hessian field the result is still defined, it just fails to reproduce `A`.
pub fn reconstruct_hessian_potential(
    a_field: &dyn Fn(&[f64]) -> Matrix,
    base: &[f64],
    x: &[f64],
    quad_order: usize,
) -> Result<HessianPotential> {
    let n = base.len();
    if x.len() != n {
        return Err(Error::Dimension("base and x must have equal length".into()));
    }
    let rule = GaussLegendre::new(quad_order)?;
    let g_at = |p: &[f64]| -> Vec<f64> {
        let dp = sub(p, base);
        rule.integrate_vec(0.0, 1.0, n, |t| a_field(&segment_point(base, p, t)).mul_vec(&dp))
    };
    let dx = sub(x, base);
    let value = rule.integrate(0.0, 1.0, |s| dot(&g_at(&segment_point(base, x, s)), &dx));
    Ok(HessianPotential { value, gradient: g_at(x) })
}

/// `S(x)` with `∇²S = A`, after checking symmetry and the integrability
/// condition on the segment `base → x`.
pub fn hessian_potential_from_field(a_field: &dyn Fn(&[f64]) -> Matrix, base: &[f64], x: &[f64], quad_order: usize) -> Result<f64> {
    hessian_potential_with_gradient(a_field, base, x, quad_order).map(|h| h.value)
}

pub fn hessian_potential_with_gradient(
    a_field: &dyn Fn(&[f64]) -> Matrix,
    base: &[f64],
    x: &[f64],
    quad_order: usize,
) -> Result<HessianPotential> {
    if x.len() != base.len() {
        return Err(Error::Dimension("base and x must have equal length".into()));
    }
    let residual = SEGMENT_CHECKS.iter().map(|&t| diff::integrability_residual(a_field, &segment_point(base, x, t))).fold(0.0, f64::max);
    if !(residual <= FIELD_TOL) {
        return Err(Error::NotHessianField { residual });
    }
    reconstruct_hessian_potential(a_field, base, x, quad_order)
}
