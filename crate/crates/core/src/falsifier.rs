//! Worst-case falsification of gains outside the necessary region.
//!
//! With `f(x₁, x₂) = L1·x₁ + L2·x₂ + c` the closed loop splits into `n`
//! scalar loops. Writing `e = y* − x₁` for one coordinate,
//!
//! ```text
//! ë    = −(L1·x₁ + L2·ẋ₁ + c + b·u)
//! e''' = L1·ė + L2·ë − b·(kp·ė + ki·e + kd·ë)
//! ```
//!
//! so `e''' + (b·kd − L2)·ë + (b·kp − L1)·ė + b·ki·e = 0`, independently of
//! `c` and `y*`. The Routh–Hurwitz conditions of this cubic are exactly the
//! four inequalities of the necessary region; the tests check this rather
//! than assume it.

use nalgebra::{Complex, Matrix3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::plants::{make_builtin, BuiltinKind, ClassBounds, ClassTag, Plant};
use crate::regions::{in_omega2, GainTriple};
use crate::simulator::{simulate, Integrator, SimConfig, Trajectory, Verdict};

/// `s³ + a2·s² + a1·s + a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicPoly {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl CubicPoly {
    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        ((s + self.a2) * s + self.a1) * s + self.a0
    }

    fn derivative(&self, s: Complex<f64>) -> Complex<f64> {
        (s * 3.0 + 2.0 * self.a2) * s + self.a1
    }

    /// Each Hurwitz inequality with its margin, in order `a2 > 0, a1 > 0, a0 > 0, a2·a1 > a0`.
    pub fn hurwitz_margins(&self) -> [(&'static str, f64); 4] {
        [("a2 > 0", self.a2), ("a1 > 0", self.a1), ("a0 > 0", self.a0), ("a2*a1 > a0", self.a2 * self.a1 - self.a0)]
    }
}

/// `(b·kd − L2, b·kp − L1, b·ki)`. Requires `b > 0`.
pub fn worst_case_poly(g: &GainTriple, b: f64, bounds: ClassBounds) -> CubicPoly {
    CubicPoly { a2: b * g.kd - bounds.l2, a1: b * g.kp - bounds.l1, a0: b * g.ki }
}

pub fn hurwitz_cubic(p: &CubicPoly) -> bool {
    p.a2 > 0.0 && p.a1 > 0.0 && p.a0 > 0.0 && p.a2 * p.a1 > p.a0
}

/// Companion-matrix eigenvalues, each polished by one Newton step.
pub fn cubic_roots(p: &CubicPoly) -> [Complex<f64>; 3] {
    #[rustfmt::skip]
    let companion = Matrix3::new(
        -p.a2, -p.a1, -p.a0,
        1.0,   0.0,   0.0,
        0.0,   1.0,   0.0,
    );
    let ev = companion.complex_eigenvalues();
    let mut roots = [ev[0], ev[1], ev[2]];
    for r in &mut roots {
        let d = p.derivative(*r);
        if d.norm() > 1e-12 * (1.0 + r.norm()).powi(2) {
            let step = p.eval(*r) / d;
            let polished = *r - step;
            if p.eval(polished).norm() <= p.eval(*r).norm() {
                *r = polished;
            }
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    roots
}

pub fn max_real_part(roots: &[Complex<f64>]) -> f64 {
    roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsifyOptions {
    /// Plant order; the setpoint is nonzero on the first coordinate only.
    pub n: usize,
    pub setpoint: f64,
    pub sim: SimConfig,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        FalsifyOptions {
            n: 1,
            setpoint: 1.0,
            sim: SimConfig {
                integrator: Integrator::Rk45Adaptive { abs_tol: 1e-9, rel_tol: 1e-7 },
                horizon: 200.0,
                output_interval: 0.05,
                ..SimConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    pub failed_inequality: &'static str,
    pub margin: f64,
    pub poly: CubicPoly,
    /// Roots as `(re, im)`, sorted by decreasing real part.
    pub roots: Vec<(f64, f64)>,
    pub max_real_part: f64,
    pub verdict: Verdict,
    pub final_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub gains: GainTriple,
    pub bounds: ClassBounds,
    pub b: f64,
    pub c: Vec<f64>,
    pub ystar: Vec<f64>,
    pub x0: Vec<f64>,
    /// True when the offset `c = e₁` was needed to leave a coincidental equilibrium.
    pub offset_fallback: bool,
    pub evidence: Evidence,
    #[serde(skip)]
    pub plant: Plant,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Exhibits non-convergence of the worst-case plant at `b = b̲`.
///
/// Refuses gains inside the necessary region.
pub fn find_counterexample(g: &GainTriple, bounds: ClassBounds, opts: &FalsifyOptions) -> Result<Counterexample> {
    if in_omega2(&g.scaled_at_lower(), bounds).in_region {
        return Err(Error::NoCounterexampleClaimed);
    }
    let n = opts.n;
    if n == 0 {
        return Err(Error::Dimension("plant order must be positive".into()));
    }
    let b = g.b_lower;
    let poly = worst_case_poly(g, b, bounds);
    let roots = cubic_roots(&poly);
    let Some((failed, margin)) = poly.hurwitz_margins().into_iter().find(|(_, m)| !(*m > 0.0)) else {
        return Err(Error::Numeric("region and Hurwitz test disagree".into()));
    };
    let mut ystar = vec![0.0; n];
    ystar[0] = opts.setpoint;
    let x0 = vec![0.0; n];

    let run = |c: Vec<f64>| -> Result<(Plant, Trajectory, Vec<f64>)> {
        let plant =
            make_builtin(BuiltinKind::WorstCase { l1: bounds.l1, l2: bounds.l2, c: Some(c.clone()) }, n, ClassTag::ClaimsG(bounds))?;
        let traj = simulate(&plant, g, b, &ystar, &x0, &x0, &opts.sim)?;
        Ok((plant, traj, c))
    };
    let (mut plant, mut traj, mut c) = run(vec![0.0; n])?;
    let mut offset_fallback = false;
    if traj.verdict == Verdict::Converged {
        let mut c1 = vec![0.0; n];
        c1[0] = 1.0;
        (plant, traj, c) = run(c1)?;
        offset_fallback = true;
    }
    if traj.verdict == Verdict::Converged {
        return Err(Error::Numeric(format!("worst-case simulation converged although {failed} fails; try a longer horizon")));
    }
    let evidence = Evidence {
        failed_inequality: failed,
        margin,
        poly,
        roots: roots.iter().map(|r| (r.re, r.im)).collect(),
        max_real_part: max_real_part(&roots),
        verdict: traj.verdict,
        final_error: traj.final_error(),
    };
    Ok(Counterexample { gains: *g, bounds, b, c, ystar, x0, offset_fallback, evidence, plant, trajectory: traj })
}
