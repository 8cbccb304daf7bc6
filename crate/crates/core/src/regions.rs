//! Closed-form PID gain regions.
//!
//! Gains are checked after scaling by the input gain: `(k1, k0, k2) =
//! (b·kp, b·ki, b·kd)`. With `k̄ = 2·L2·sqrt(k0·(k2 + L2))`:
//!
//! ```text
//! sufficient:  k1 > L1,  k2 > L2,  k0 > 0,  (k1 − L1)(k2 − L2) > k0 + k̄
//! necessary:   k1 > L1,  k2 > L2,  k0 > 0,  (k1 − L1)(k2 − L2) > k0
//! ```
//!
//! Both regions are open. Boundary points are reported outside with a zero
//! margin.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plants::ClassBounds;

/// Raw PID gains together with the known lower bound on the input gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainTriple {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub b_lower: f64,
}

impl GainTriple {
    pub fn new(kp: f64, ki: f64, kd: f64, b_lower: f64) -> Result<Self> {
        if !(b_lower > 0.0) || !b_lower.is_finite() {
            return Err(Error::Domain(format!("b_lower must be positive, got {b_lower}")));
        }
        if ![kp, ki, kd].iter().all(|g| g.is_finite()) {
            return Err(Error::Domain("gains must be finite".into()));
        }
        Ok(GainTriple { kp, ki, kd, b_lower })
    }

    /// Gains scaled by the known lower bound `b̲`.
    pub fn scaled_at_lower(&self) -> ScaledGains {
        ScaledGains { k1: self.b_lower * self.kp, k0: self.b_lower * self.ki, k2: self.b_lower * self.kd }
    }

    pub fn in_omega1(&self, bounds: ClassBounds) -> RegionVerdict {
        in_omega1(&self.scaled_at_lower(), bounds)
    }

    pub fn in_omega2(&self, bounds: ClassBounds) -> RegionVerdict {
        in_omega2(&self.scaled_at_lower(), bounds)
    }
}

/// `(k1, k0, k2) = (b·kp, b·ki, b·kd)` for one particular `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledGains {
    k1: f64,
    k0: f64,
    k2: f64,
}

impl ScaledGains {
    pub fn k1(&self) -> f64 {
        self.k1
    }
    pub fn k0(&self) -> f64 {
        self.k0
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// `α·(k1, k0, k2)`.
    pub fn along_ray(&self, alpha: f64) -> ScaledGains {
        ScaledGains { k1: alpha * self.k1, k0: alpha * self.k0, k2: alpha * self.k2 }
    }
}

pub fn scale_gains(g: &GainTriple, b: f64) -> Result<ScaledGains> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("input gain b must be positive, got {b}")));
    }
    Ok(ScaledGains { k1: b * g.kp, k0: b * g.ki, k2: b * g.kd })
}

/// Signed margins of the four defining inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins {
    /// `k1 − L1`
    pub proportional: f64,
    /// `k2 − L2`
    pub derivative: f64,
    /// `k0`
    pub integral: f64,
    pub product_gap: f64,
}

impl Margins {
    pub fn min(&self) -> f64 {
        self.proportional.min(self.derivative).min(self.integral).min(self.product_gap)
    }

    /// Name of the first inequality that fails, if any.
    pub fn first_failure(&self) -> Option<(&'static str, f64)> {
        [("k1 > L1", self.proportional), ("k2 > L2", self.derivative), ("k0 > 0", self.integral), ("product inequality", self.product_gap)]
            .into_iter()
            .find(|(_, m)| !(*m > 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub in_region: bool,
    pub margins: Margins,
}

impl RegionVerdict {
    fn from_margins(margins: Margins) -> Self {
        let in_region = margins.proportional > 0.0 && margins.derivative > 0.0 && margins.integral > 0.0 && margins.product_gap > 0.0;
        debug_assert_eq!(in_region, margins.min() > 0.0);
        RegionVerdict { in_region, margins }
    }
}

/// `k̄ = 2·L2·sqrt(ki·(kd + L2))`.
pub fn kbar(ki: f64, kd: f64, l2: f64) -> Result<f64> {
    let radicand = ki * (kd + l2);
    if ki < 0.0 || kd + l2 < 0.0 || radicand.is_nan() {
        return Err(Error::Domain(format!("k̄ radicand {ki}·({kd}+{l2}) is negative")));
    }
    Ok(2.0 * l2 * radicand.sqrt())
}

/// `k̄` for margin reporting; where it is undefined the integral or
/// derivative margin already fails, and the penalty is clamped to zero.
fn kbar_or_zero(k0: f64, k2: f64, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    kbar(k0, k2, l2).unwrap_or(0.0)
}

pub fn in_omega1(s: &ScaledGains, b: ClassBounds) -> RegionVerdict {
    let proportional = s.k1 - b.l1;
    let derivative = s.k2 - b.l2;
    let product_gap = proportional * derivative - s.k0 - kbar_or_zero(s.k0, s.k2, b.l2);
    RegionVerdict::from_margins(Margins { proportional, derivative, integral: s.k0, product_gap })
}

pub fn in_omega2(s: &ScaledGains, b: ClassBounds) -> RegionVerdict {
    let proportional = s.k1 - b.l1;
    let derivative = s.k2 - b.l2;
    let product_gap = proportional * derivative - s.k0;
    RegionVerdict::from_margins(Margins { proportional, derivative, integral: s.k0, product_gap })
}

/// `ζ(α) = (αk1 − L1)(αk2 − L2) − αk0 − 2L2·sqrt(αk0(αk2 + L2))`.
///
/// `ζ(1)` is the sufficient-region product gap, and `ζ` is nondecreasing on
/// `α ≥ 1` for triples inside the region.
pub fn zeta(alpha: f64, s: &ScaledGains, b: ClassBounds) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("alpha must be at least 1, got {alpha}")));
    }
    let r = s.along_ray(alpha);
    let penalty = if b.l2 == 0.0 { 0.0 } else { kbar(r.k0, r.k2, b.l2)? };
    Ok((r.k1 - b.l1) * (r.k2 - b.l2) - r.k0 - penalty)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayReport {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    pub min_forward_difference: f64,
    pub passes: bool,
}

/// Tolerance on forward differences of `ζ`, relative to `1 + |ζ|`.
pub const RAY_TOL: f64 = 1e-9;

/// Evaluates `ζ` on an increasing grid of `α ≥ 1` and checks it never drops.
pub fn check_ray_monotonicity(s: &ScaledGains, b: ClassBounds, alphas: &[f64]) -> Result<RayReport> {
    if let Some((name, margin)) = in_omega1(s, b).margins.first_failure() {
        return Err(Error::Precondition(format!("gains outside the sufficient region ({name}, margin {margin})")));
    }
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("alpha grid must be strictly increasing".into()));
    }
    let values = alphas.iter().map(|&a| zeta(a, s, b)).collect::<Result<Vec<_>>>()?;
    let mut min_diff = f64::INFINITY;
    let mut passes = true;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        min_diff = min_diff.min(d);
        if d < -RAY_TOL * (1.0 + w[0].abs()) {
            passes = false;
        }
    }
    Ok(RayReport { alphas: alphas.to_vec(), values, min_forward_difference: min_diff, passes })
}

/// `lo, lo+step, …` up to and including `hi` (within half a step).
pub fn alpha_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 0.5).floor() as usize;
    (0..=count).map(|i| lo + step * i as f64).collect()
}

/// The gain held fixed on a two-dimensional slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedGain {
    Kp(f64),
    Ki(f64),
    Kd(f64),
}

impl FixedGain {
    /// Names of the `(x, y)` axes left free.
    pub fn axes(&self) -> (&'static str, &'static str) {
        match self {
            FixedGain::Ki(_) => ("kp", "kd"),
            FixedGain::Kd(_) => ("kp", "ki"),
            FixedGain::Kp(_) => ("ki", "kd"),
        }
    }

    fn gains(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match *self {
            FixedGain::Ki(ki) => (x, ki, y),
            FixedGain::Kd(kd) => (x, y, kd),
            FixedGain::Kp(kp) => (kp, x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub bounds: ClassBounds,
    pub b_lower: f64,
    pub fixed: FixedGain,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceCell {
    pub x: f64,
    pub y: f64,
    pub in_omega1: bool,
    pub in_omega2: bool,
    pub gap1: f64,
    pub gap2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub axes: (String, String),
    /// Row-major: `y` is the outer index, `x` the inner one.
    pub cells: Vec<SliceCell>,
}

fn linspace(range: (f64, f64), count: usize) -> Vec<f64> {
    (0..count).map(|i| range.0 + (range.1 - range.0) * i as f64 / (count - 1) as f64).collect()
}

/// Both verdicts and product gaps on a grid, evaluated at `b = b_lower`.
pub fn slice_grid(spec: &SliceSpec) -> Result<Slice> {
    let (nx, ny) = spec.resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::Domain("resolution must be at least 2 per axis".into()));
    }
    for (name, (lo, hi)) in [("x", spec.x_range), ("y", spec.y_range)] {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("degenerate {name} range [{lo}, {hi}]")));
        }
    }
    if !(spec.b_lower > 0.0) {
        return Err(Error::Domain("b_lower must be positive".into()));
    }
    let xs = linspace(spec.x_range, nx);
    let ys = linspace(spec.y_range, ny);
    let cells = ys
        .par_iter()
        .flat_map_iter(|&y| {
            xs.iter().map(move |&x| {
                let (kp, ki, kd) = spec.fixed.gains(x, y);
                let g = GainTriple { kp, ki, kd, b_lower: spec.b_lower };
                let s = g.scaled_at_lower();
                let v1 = in_omega1(&s, spec.bounds);
                let v2 = in_omega2(&s, spec.bounds);
                SliceCell {
                    x,
                    y,
                    in_omega1: v1.in_region,
                    in_omega2: v2.in_region,
                    gap1: v1.margins.product_gap,
                    gap2: v2.margins.product_gap,
                }
            })
        })
        .collect();
    let (ax, ay) = spec.fixed.axes();
    Ok(Slice { axes: (ax.into(), ay.into()), cells })
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Slice {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.axes.0.as_str(), self.axes.1.as_str(), "in_omega1", "in_omega2", "gap1", "gap2"])?;
        for c in &self.cells {
            w.write_record([
                fmt_f64(c.x),
                fmt_f64(c.y),
                c.in_omega1.to_string(),
                c.in_omega2.to_string(),
                fmt_f64(c.gap1),
                fmt_f64(c.gap2),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Slice> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 6 || &headers[2] != "in_omega1" || &headers[3] != "in_omega2" {
            return Err(Error::Io(format!("unexpected slice header {headers:?}")));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Io(format!("bad number {s:?}: {e}")));
        let parse_b = |s: &str| s.parse::<bool>().map_err(|e| Error::Io(format!("bad flag {s:?}: {e}")));
        let mut cells = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            cells.push(SliceCell {
                x: parse_f(&rec[0])?,
                y: parse_f(&rec[1])?,
                in_omega1: parse_b(&rec[2])?,
                in_omega2: parse_b(&rec[3])?,
                gap1: parse_f(&rec[4])?,
                gap2: parse_f(&rec[5])?,
            });
        }
        Ok(Slice { axes: (headers[0].to_string(), headers[1].to_string()), cells })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(l1: f64, l2: f64) -> ClassBounds {
        ClassBounds::new(l1, l2).unwrap()
    }

    fn scaled(k1: f64, k0: f64, k2: f64) -> ScaledGains {
        scale_gains(&GainTriple::new(k1, k0, k2, 1.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn kbar_examples() {
        assert_eq!(kbar(3.0, 7.0, 0.0).unwrap(), 0.0);
        assert_eq!(kbar(1.0, 3.0, 1.0).unwrap(), 4.0);
        assert_eq!(kbar(0.0, 2.0, 1.5).unwrap(), 0.0);
        assert!(kbar(-1.0, 2.0, 1.0).is_err());
        assert!(kbar(1.0, -2.0, 1.0).is_err());
    }

    #[test]
    fn scaling() {
        let g = GainTriple::new(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(scale_gains(&g, 1.0).unwrap(), scaled(2.0, 1.0, 1.0));
        let s = scale_gains(&g, 3.0).unwrap();
        assert_eq!((s.k1(), s.k0(), s.k2()), (6.0, 3.0, 3.0));
        assert!(scale_gains(&g, 0.0).is_err());
        assert!(GainTriple::new(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn omega1_examples() {
        let v = in_omega1(&scaled(5.0, 1.0, 3.0), bounds(1.0, 1.0));
        assert!(v.in_region);
        assert_eq!(v.margins.product_gap, 3.0);
        assert!(in_omega1(&scaled(2.0, 1.0, 1.0), bounds(0.0, 0.0)).in_region);
        let v = in_omega1(&scaled(3.0, 1.0, 2.0), bounds(1.0, 1.0));
        assert!(!v.in_region);
        assert!((v.margins.product_gap - (2.0 - 1.0 - 2.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn omega2_examples() {
        let v = in_omega2(&scaled(3.0, 1.0, 2.0), bounds(1.0, 1.0));
        assert!(v.in_region);
        assert_eq!(v.margins.product_gap, 1.0);
        let v = in_omega2(&scaled(2.0, 2.0, 2.0), bounds(1.0, 1.0));
        assert!(!v.in_region);
        assert_eq!(v.margins.product_gap, -1.0);
    }

    #[test]
    fn boundary_is_outside() {
        // (k1 − L1)(k2 − L2) = k0 exactly
        let v = in_omega2(&scaled(3.0, 2.0, 2.0), bounds(1.0, 1.0));
        assert!(!v.in_region);
        assert_eq!(v.margins.product_gap, 0.0);
        let v = in_omega1(&scaled(1.0, 1.0, 5.0), bounds(1.0, 0.0));
        assert!(!v.in_region);
        assert_eq!(v.margins.proportional, 0.0);
    }

    #[test]
    fn zeta_examples() {
        let s = scaled(5.0, 1.0, 3.0);
        let b = bounds(1.0, 1.0);
        assert_eq!(zeta(1.0, &s, b).unwrap(), 3.0);
        assert!((zeta(2.0, &s, b).unwrap() - (45.0 - 2.0 - 2.0 * 14f64.sqrt())).abs() < 1e-12);
        let b0 = bounds(0.5, 0.0);
        for alpha in [1.0, 1.7, 4.0] {
            let direct = (alpha * 5.0 - 0.5) * alpha * 3.0 - alpha;
            assert!((zeta(alpha, &s, b0).unwrap() - direct).abs() < 1e-12);
        }
        assert!(zeta(0.5, &s, b).is_err());
    }

    // Three hand-checked points on the chain of lower bounds for ζ′: the exact
    // derivative dominates 2·L2·sqrt(k0)·(sqrt(k2 + L2) − sqrt(k2 + L2/α)) ≥ 0.
    #[test]
    fn zeta_derivative_bound_chain() {
        let b = bounds(1.0, 1.0);
        let s = scaled(5.0, 1.0, 3.0);
        for alpha in [1.0, 2.0, 7.5] {
            let h = 1e-6;
            let fd = (zeta(alpha + h, &s, b).unwrap() - zeta(alpha, &s, b).unwrap()) / h;
            let (k1, k0, k2, l1, l2) = (s.k1(), s.k0(), s.k2(), b.l1, b.l2);
            let exact = 2.0 * alpha * k1 * k2
                - (l1 * k2 + l2 * k1 + k0)
                - l2 * (2.0 * alpha * k0 * k2 + k0 * l2) / (alpha * k0 * (alpha * k2 + l2)).sqrt();
            let floor = 2.0 * l2 * k0.sqrt() * ((k2 + l2).sqrt() - (k2 + l2 / alpha).sqrt());
            assert!((fd - exact).abs() < 1e-4 * (1.0 + exact.abs()));
            assert!(exact >= floor && floor >= 0.0);
        }
    }

    #[test]
    fn ray_monotonicity_examples() {
        let s = scaled(5.0, 1.0, 3.0);
        let b = bounds(1.0, 1.0);
        let grid = alpha_grid(1.0, 10.0, 0.1);
        assert_eq!(grid.len(), 91);
        let r = check_ray_monotonicity(&s, b, &grid).unwrap();
        assert!(r.passes && r.min_forward_difference > 0.0);
        assert_eq!(r.values[0], in_omega1(&s, b).margins.product_gap);

        let b0 = bounds(2.0, 0.0);
        let r = check_ray_monotonicity(&s, b0, &grid).unwrap();
        assert!(r.passes);
        for (a, w) in r.alphas.iter().zip(r.values.windows(2)) {
            // ζ′(α) = 2αk1k2 − L1k2 − k0 > 0 for α ≥ 1
            assert!(2.0 * a * 15.0 - 2.0 * 3.0 - 1.0 > 0.0 && w[1] > w[0]);
        }
        assert!(matches!(check_ray_monotonicity(&scaled(3.0, 1.0, 2.0), b, &grid), Err(Error::Precondition(_))));
    }

    #[test]
    fn negative_proportional_gain_leaves_region() {
        // L1 < 0 admits k1 < 0; then α·k1 − L1 shrinks as α grows
        let b = bounds(-2.0, 0.0);
        let s = scaled(-1.0, 0.5, 1.0);
        assert!(in_omega1(&s, b).in_region);
        assert!(!in_omega1(&s.along_ray(3.0), b).in_region);
        assert!(!in_omega2(&s.along_ray(3.0), b).in_region);
    }

    #[test]
    fn slice_examples() {
        let spec = SliceSpec {
            bounds: bounds(0.0, 0.0),
            b_lower: 1.0,
            fixed: FixedGain::Ki(1.0),
            x_range: (0.0, 3.0),
            y_range: (0.0, 3.0),
            resolution: (31, 31),
        };
        let s = slice_grid(&spec).unwrap();
        assert_eq!(s.axes, ("kp".to_string(), "kd".to_string()));
        assert_eq!(s.cells.len(), 31 * 31);
        for c in &s.cells {
            // unperturbed boundary is the hyperbola kp·kd = 1
            assert_eq!(c.in_omega1, c.x * c.y > 1.0 && c.x > 0.0 && c.y > 0.0);
            assert_eq!(c.in_omega1, c.in_omega2);
        }
        // row-major: x varies fastest
        assert_eq!((s.cells[1].x, s.cells[1].y), (0.1, 0.0));

        let spec = SliceSpec { bounds: bounds(1.0, 1.0), x_range: (1.0, 5.0), y_range: (1.0, 4.0), resolution: (5, 4), ..spec };
        let s = slice_grid(&spec).unwrap();
        let c = s.cells.iter().find(|c| c.x == 3.0 && c.y == 2.0).unwrap();
        assert!(c.in_omega2 && !c.in_omega1);
        assert!(s.cells.iter().all(|c| !c.in_omega1 || c.in_omega2));
    }

    #[test]
    fn slice_rejects_degenerate_specs() {
        let spec = SliceSpec {
            bounds: bounds(0.0, 0.0),
            b_lower: 1.0,
            fixed: FixedGain::Kd(1.0),
            x_range: (1.0, 1.0),
            y_range: (0.0, 3.0),
            resolution: (3, 3),
        };
        assert!(slice_grid(&spec).is_err());
        assert!(slice_grid(&SliceSpec { x_range: (0.0, 1.0), resolution: (1, 3), ..spec.clone() }).is_err());
    }

    #[test]
    fn slice_csv_round_trip() {
        let spec = SliceSpec {
            bounds: bounds(0.5, 0.25),
            b_lower: 2.0,
            fixed: FixedGain::Kp(3.0),
            x_range: (0.0, 2.0),
            y_range: (0.1, 1.3),
            resolution: (7, 5),
        };
        let s = slice_grid(&spec).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("ki,kd,in_omega1,in_omega2,gap1,gap2\n"));
        assert_eq!(Slice::read_csv(buf.as_slice()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn containment_and_l2_zero_identity(
            k1 in -3.0f64..8.0, k0 in -1.0f64..6.0, k2 in -3.0f64..8.0,
            l1 in -2.0f64..3.0, l2 in 0.0f64..3.0,
        ) {
            let s = scaled(k1, k0, k2);
            let v1 = in_omega1(&s, bounds(l1, l2));
            let v2 = in_omega2(&s, bounds(l1, l2));
            prop_assert!(!v1.in_region || v2.in_region);
            prop_assert_eq!(v1.in_region, v1.margins.min() > 0.0);
            let w1 = in_omega1(&s, bounds(l1, 0.0));
            let w2 = in_omega2(&s, bounds(l1, 0.0));
            prop_assert_eq!(w1, w2);
        }

        #[test]
        fn upward_closure_along_rays(
            phi in 0.05f64..5.0, psi in 0.05f64..5.0, frac in 0.01f64..0.99,
            l1 in -2.0f64..3.0, l2 in 0.0f64..3.0, alpha in 1.0f64..10.0,
        ) {
            // a triple inside the sufficient region: choose k0 below the largest admissible value
            let c = 2.0 * l2 * (psi + 2.0 * l2).sqrt();
            let root = (-c + (c * c + 4.0 * phi * psi).sqrt()) / 2.0;
            let k0 = (frac * root).powi(2);
            let s = scaled(phi + l1, k0, psi + l2);
            let b = bounds(l1, l2);
            prop_assume!(in_omega1(&s, b).in_region);
            // closure along rays needs k1 ≥ 0; see negative_proportional_gain_leaves_region
            prop_assume!(s.k1() >= 0.0);
            prop_assert!(in_omega1(&s.along_ray(alpha), b).in_region);
            prop_assert!(in_omega2(&s.along_ray(alpha), b).in_region);
        }
    }
}
