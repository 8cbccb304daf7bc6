//! Closed-loop simulation of `ẍ₁ = f(x₁, ẋ₁) + b·u` under the PID law.
//!
//! The integrated state is `w = [x_int, x₁, x₂]` of length `3n` with
//!
//! ```text
//! ẋ_int = e,   ẋ₁ = x₂,   ẋ₂ = f(x₁, x₂) + b·u,
//! e = y* − x₁,  u = kp·e + ki·x_int − kd·x₂.
//! ```
//!
//! Samples are recorded on a uniform output grid (adaptive integrator) or at
//! every step (fixed RK4), so that time differences of recorded quantities
//! are well conditioned.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::certificates::{eval_v, Certificate, TransformedState};
use crate::error::{Error, Result};
use crate::matnum::{axpy, norm, sub};
use crate::plants::Plant;
use crate::regions::{fmt_f64, GainTriple, Margins, ScaledGains};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Integrator {
    /// Classical fixed-step RK4; `step` is rounded down so that it divides the horizon.
    Rk4Fixed { step: f64 },
    /// Dormand–Prince 5(4) with error-per-step control.
    Rk45Adaptive { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub integrator: Integrator,
    pub horizon: f64,
    pub divergence_threshold: f64,
    pub convergence_tol: f64,
    pub dwell: f64,
    /// Output grid spacing for the adaptive integrator.
    pub output_interval: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            integrator: Integrator::Rk45Adaptive { abs_tol: 1e-9, rel_tol: 1e-7 },
            horizon: 100.0,
            divergence_threshold: 1e6,
            convergence_tol: 1e-6,
            dwell: 5.0,
            output_interval: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{what} must be positive and finite, got {v}")))
            }
        };
        match self.integrator {
            Integrator::Rk4Fixed { step } => positive(step, "step")?,
            Integrator::Rk45Adaptive { abs_tol, rel_tol } => {
                positive(abs_tol, "abs_tol")?;
                positive(rel_tol, "rel_tol")?;
            }
        }
        positive(self.horizon, "horizon")?;
        positive(self.divergence_threshold, "divergence_threshold")?;
        positive(self.convergence_tol, "convergence_tol")?;
        positive(self.output_interval, "output_interval")?;
        if !(self.dwell >= 0.0) {
            return Err(Error::Domain(format!("dwell must be nonnegative, got {}", self.dwell)));
        }
        Ok(())
    }
}

/// Horizon heuristic: `50 / min(1, smallest region margin)`, clamped to `[50, 2000]`.
///
/// Small margins mean slow closed-loop modes. This is a rule of thumb, not
/// a bound on the settling time.
pub fn horizon_heuristic(margins: &Margins) -> f64 {
    let m = margins.min();
    if !(m > 0.0) {
        return 2000.0;
    }
    (50.0 / m.min(1.0)).clamp(50.0, 2000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub n: usize,
    pub times: Vec<f64>,
    pub x1: Vec<Vec<f64>>,
    pub x2: Vec<Vec<f64>>,
    pub x_int: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub err_norm: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub verdict: Verdict,
    /// Start of the final dwell window (converged) or the first sample past the threshold (diverged).
    pub decided_at: Option<f64>,
    pub ystar: Vec<f64>,
    pub warnings: Vec<String>,
}

struct Closed<'a> {
    plant: &'a Plant,
    kp: f64,
    ki: f64,
    kd: f64,
    b: f64,
    ystar: &'a [f64],
}

impl Closed<'_> {
    fn n(&self) -> usize {
        self.ystar.len()
    }

    fn control(&self, x_int: &[f64], x1: &[f64], x2: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.kp * (self.ystar[i] - x1[i]) + self.ki * x_int[i] - self.kd * x2[i]).collect()
    }

    fn rhs(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let (x_int, rest) = w.split_at(n);
        let (x1, x2) = rest.split_at(n);
        let f = self.plant.eval(x1, x2)?;
        let u = self.control(x_int, x1, x2);
        let mut d = Vec::with_capacity(3 * n);
        d.extend((0..n).map(|i| self.ystar[i] - x1[i]));
        d.extend_from_slice(x2);
        d.extend((0..n).map(|i| f[i] + self.b * u[i]));
        Ok(d)
    }
}

struct Recorder<'a> {
    sys: &'a Closed<'a>,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, w: &[f64]) {
        let n = self.sys.n();
        let (x_int, rest) = w.split_at(n);
        let (x1, x2) = rest.split_at(n);
        self.traj.times.push(t);
        self.traj.u.push(self.sys.control(x_int, x1, x2));
        self.traj.err_norm.push(norm(&sub(self.sys.ystar, x1)));
        self.traj.x_int.push(x_int.to_vec());
        self.traj.x1.push(x1.to_vec());
        self.traj.x2.push(x2.to_vec());
    }
}

/// Integrate the closed loop from `x₁(0) = x0`, `x₂(0) = v0`, `x_int(0) = 0`.
pub fn simulate(p: &Plant, g: &GainTriple, b_actual: f64, ystar: &[f64], x0: &[f64], v0: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = p.dim();
    if ystar.len() != n || x0.len() != n || v0.len() != n {
        return Err(Error::Dimension(format!("setpoint and initial state must have length {n}")));
    }
    if ![ystar, x0, v0].iter().all(|v| v.iter().all(|c| c.is_finite())) || !b_actual.is_finite() {
        return Err(Error::Domain("initial state, setpoint and b must be finite".into()));
    }
    let mut warnings = Vec::new();
    if b_actual < g.b_lower {
        warnings.push(format!("b = {b_actual} is below the declared lower bound {}", g.b_lower));
    }
    let sys = Closed { plant: p, kp: g.kp, ki: g.ki, kd: g.kd, b: b_actual, ystar };
    let mut w0 = vec![0.0; n];
    w0.extend_from_slice(x0);
    w0.extend_from_slice(v0);

    let traj = Trajectory {
        n,
        times: Vec::new(),
        x1: Vec::new(),
        x2: Vec::new(),
        x_int: Vec::new(),
        u: Vec::new(),
        err_norm: Vec::new(),
        v: None,
        verdict: Verdict::Undecided,
        decided_at: None,
        ystar: ystar.to_vec(),
        warnings,
    };
    let mut rec = Recorder { sys: &sys, traj };
    rec.push(0.0, &w0);
    if norm(&w0) <= cfg.divergence_threshold {
        match cfg.integrator {
            Integrator::Rk4Fixed { step } => run_rk4(&sys, &mut rec, w0, step, cfg)?,
            Integrator::Rk45Adaptive { abs_tol, rel_tol } => run_dp45(&sys, &mut rec, w0, abs_tol, rel_tol, cfg)?,
        }
    }
    let mut traj = rec.traj;
    let (verdict, at) = classify(&traj, cfg);
    traj.verdict = verdict;
    traj.decided_at = at;
    Ok(traj)
}

fn rk4_step(sys: &Closed, w: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = sys.rhs(w)?;
    let k2 = sys.rhs(&axpy(w, 0.5 * h, &k1))?;
    let k3 = sys.rhs(&axpy(w, 0.5 * h, &k2))?;
    let k4 = sys.rhs(&axpy(w, h, &k3))?;
    Ok((0..w.len()).map(|i| w[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

fn run_rk4(sys: &Closed, rec: &mut Recorder, mut w: Vec<f64>, step: f64, cfg: &SimConfig) -> Result<()> {
    let steps = (cfg.horizon / step - 1e-9).ceil().max(1.0) as usize;
    let h = cfg.horizon / steps as f64;
    for i in 1..=steps {
        w = rk4_step(sys, &w, h)?;
        rec.push(i as f64 * h, &w);
        if norm(&w) > cfg.divergence_threshold {
            break;
        }
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// One DP45 attempt. Returns the fifth-order solution, its derivative (FSAL) and the error estimate.
fn dp_attempt(sys: &Closed, w: &[f64], k0: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let m = w.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k0.to_vec());
    for s in 1..7 {
        let stage: Vec<f64> = (0..m).map(|i| w[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
        debug_assert!(C[s] >= 0.0);
        k.push(sys.rhs(&stage)?);
    }
    // Row 6 of A holds the fifth-order weights, so the last stage is evaluated at the new point.
    let w_new: Vec<f64> = (0..m).map(|i| w[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>()).collect();
    let err: Vec<f64> = (0..m).map(|i| h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>()).collect();
    let k_new = k.pop().unwrap_or_default();
    Ok((w_new, k_new, err))
}

fn err_norm(err: &[f64], w: &[f64], w_new: &[f64], atol: f64, rtol: f64) -> f64 {
    let m = err.len() as f64;
    let s: f64 = (0..err.len())
        .map(|i| {
            let sc = atol + rtol * w[i].abs().max(w_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / m).sqrt()
}

fn initial_step(sys: &Closed, w: &[f64], k0: &[f64], atol: f64, rtol: f64) -> Result<f64> {
    let scale: Vec<f64> = w.iter().map(|v| atol + rtol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let d0 = rms(w);
    let d1 = rms(k0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let k1 = sys.rhs(&axpy(w, h0, k0))?;
    let d2 = rms(&sub(&k1, k0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1))
}

fn run_dp45(sys: &Closed, rec: &mut Recorder, mut w: Vec<f64>, atol: f64, rtol: f64, cfg: &SimConfig) -> Result<()> {
    let samples = (cfg.horizon / cfg.output_interval - 1e-9).ceil().max(1.0) as usize;
    let grid = |k: usize| if k == samples { cfg.horizon } else { k as f64 * cfg.output_interval };
    let mut t = 0.0;
    let mut k = sys.rhs(&w)?;
    let mut h = initial_step(sys, &w, &k, atol, rtol)?.min(cfg.output_interval);
    for next in 1..=samples {
        let target = grid(next);
        while t < target {
            let remaining = target - t;
            let clipped = remaining <= h * (1.0 + 1e-12);
            let h_try = if clipped { remaining } else { h };
            if h_try < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Stiffness { t, state: w });
            }
            let (w_new, k_new, err) = dp_attempt(sys, &w, &k, h_try)?;
            let e = err_norm(&err, &w, &w_new, atol, rtol);
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                t = if clipped { target } else { t + h_try };
                w = w_new;
                k = k_new;
                // A step shortened to hit the grid says nothing about the right size.
                if !clipped || factor < 1.0 {
                    h = h_try * factor;
                }
            } else {
                h = h_try * factor.min(1.0);
            }
        }
        rec.push(t, &w);
        if norm(&w) > cfg.divergence_threshold {
            break;
        }
    }
    Ok(())
}

/// Verdict from the recorded series alone.
///
/// Diverged if some sample's full state norm exceeds the threshold.
/// Converged if `|e| + |x₂| < tol` holds on a final run of samples lasting
/// at least `dwell`. Otherwise undecided.
pub fn classify(traj: &Trajectory, cfg: &SimConfig) -> (Verdict, Option<f64>) {
    for i in 0..traj.times.len() {
        let s = traj.x_int[i].iter().chain(&traj.x1[i]).chain(&traj.x2[i]).map(|v| v * v).sum::<f64>().sqrt();
        if !(s <= cfg.divergence_threshold) {
            return (Verdict::Diverged, Some(traj.times[i]));
        }
    }
    let Some(&t_end) = traj.times.last() else {
        return (Verdict::Undecided, None);
    };
    let mut start = None;
    for i in (0..traj.times.len()).rev() {
        if traj.err_norm[i] + norm(&traj.x2[i]) < cfg.convergence_tol {
            start = Some(traj.times[i]);
        } else {
            break;
        }
    }
    match start {
        Some(t0) if t_end - t0 >= cfg.dwell => (Verdict::Converged, Some(t0)),
        _ => (Verdict::Undecided, None),
    }
}

/// `x = x_int + f(y*,0)/k0`, `y = y* − x₁`, `z = −x₂`.
pub fn transform_state(p: &Plant, s: &ScaledGains, ystar: &[f64], x1: &[f64], x2: &[f64], x_int: &[f64]) -> Result<TransformedState> {
    if s.k0() == 0.0 {
        return Err(Error::Domain("k0 = 0: the integral coordinate is undefined".into()));
    }
    let n = p.dim();
    if [ystar, x1, x2, x_int].iter().any(|v| v.len() != n) {
        return Err(Error::Dimension(format!("all vectors must have length {n}")));
    }
    let f_star = p.eval(ystar, &vec![0.0; n])?;
    Ok(TransformedState {
        x: (0..n).map(|i| x_int[i] + f_star[i] / s.k0()).collect(),
        y: sub(ystar, x1),
        z: x2.iter().map(|v| -v).collect(),
    })
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_error(&self) -> f64 {
        self.err_norm.last().copied().unwrap_or(f64::NAN)
    }

    /// Transformed coordinates of sample `i` under the certificate's gains.
    pub fn transformed(&self, cert: &Certificate, i: usize) -> Result<TransformedState> {
        transform_state(cert.plant(), &cert.gains, &self.ystar, &self.x1[i], &self.x2[i], &self.x_int[i])
    }

    /// Fill the `V` column from a certificate built for the same plant, gains and setpoint.
    pub fn attach_lyapunov(&mut self, cert: &Certificate) -> Result<()> {
        if cert.ystar != self.ystar {
            return Err(Error::Precondition("certificate setpoint differs from the trajectory setpoint".into()));
        }
        let v = (0..self.len()).map(|i| eval_v(cert, &self.transformed(cert, i)?)).collect::<Result<Vec<_>>>()?;
        self.v = Some(v);
        Ok(())
    }

    /// CSV with columns `t, x1_*, x2_*, u_*, err_norm[, V]`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.n;
        let mut header = vec!["t".to_string()];
        for name in ["x1", "x2", "u"] {
            header.extend((1..=n).map(|i| format!("{name}_{i}")));
        }
        header.push("err_norm".into());
        if self.v.is_some() {
            header.push("V".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![fmt_f64(self.times[i])];
            row.extend(self.x1[i].iter().chain(&self.x2[i]).chain(&self.u[i]).map(|&v| fmt_f64(v)));
            row.push(fmt_f64(self.err_norm[i]));
            if let Some(v) = &self.v {
                row.push(fmt_f64(v[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The columns of a trajectory CSV, read back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub n: usize,
    pub times: Vec<f64>,
    pub x1: Vec<Vec<f64>>,
    pub x2: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub err_norm: Vec<f64>,
    pub v: Option<Vec<f64>>,
}

pub fn read_trajectory_csv(input: impl Read) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let has_v = headers.iter().next_back() == Some("V");
    let width = headers.len() - usize::from(has_v);
    if width < 5 || (width - 2) % 3 != 0 || &headers[0] != "t" || &headers[width - 1] != "err_norm" {
        return Err(Error::Io(format!("unexpected trajectory header {headers:?}")));
    }
    let n = (width - 2) / 3;
    let mut table = TrajectoryTable {
        n,
        times: Vec::new(),
        x1: Vec::new(),
        x2: Vec::new(),
        u: Vec::new(),
        err_norm: Vec::new(),
        v: has_v.then(Vec::new),
    };
    for rec in r.records() {
        let rec = rec?;
        let vals =
            rec.iter().map(|s| s.parse::<f64>().map_err(|e| Error::Io(format!("bad number {s:?}: {e}")))).collect::<Result<Vec<_>>>()?;
        if vals.len() != headers.len() {
            return Err(Error::Io("ragged trajectory row".into()));
        }
        table.times.push(vals[0]);
        table.x1.push(vals[1..1 + n].to_vec());
        table.x2.push(vals[1 + n..1 + 2 * n].to_vec());
        table.u.push(vals[1 + 2 * n..1 + 3 * n].to_vec());
        table.err_norm.push(vals[width - 1]);
        if let Some(v) = table.v.as_mut() {
            v.push(vals[width]);
        }
    }
    Ok(table)
}
