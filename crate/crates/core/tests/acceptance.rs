//! Acceptance criteria. Run with `cargo test -p pidgain --test acceptance`.
//! Prints one PASS/FAIL line per criterion with its runtime and budget.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pidgain::certificates::{build_certificate, check_p, decompose_g, vdot_along, Mode, QUAD_ORDER};
use pidgain::falsifier::{find_counterexample, hurwitz_cubic, worst_case_poly, FalsifyOptions};
use pidgain::matnum::{norm, Matrix};
use pidgain::plants::{
    hessian_potential_from_field, make_builtin, potential_from_field, reconstruct_hessian_potential, BuiltinKind, ClassBounds, ClassTag,
    GradientPotentials, Plant,
};
use pidgain::regions::{check_ray_monotonicity, in_omega1, in_omega2, scale_gains, GainTriple};
use pidgain::sampling::rng;
use pidgain::simulator::{simulate, Integrator, SimConfig, Verdict};
use pidgain::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn b11() -> ClassBounds {
    ClassBounds::new(1.0, 1.0).unwrap()
}

struct RegionSample {
    g: GainTriple,
    bounds: ClassBounds,
    b: f64,
}

fn region_sample(r: &mut ChaCha8Rng) -> RegionSample {
    let bl = r.gen_range(0.1..3.0);
    let g = GainTriple::new(r.gen_range(-3.0..8.0), r.gen_range(-1.0..8.0), r.gen_range(-3.0..8.0), bl).unwrap();
    let bounds = ClassBounds::new(r.gen_range(-2.0..3.0), r.gen_range(0.0..3.0)).unwrap();
    RegionSample { g, bounds, b: r.gen_range(bl..10.0 * bl) }
}

fn omega1_sample(r: &mut ChaCha8Rng, bounds: ClassBounds) -> GainTriple {
    loop {
        let g = GainTriple::new(r.gen_range(0.0..12.0), r.gen_range(0.0..6.0), r.gen_range(0.0..12.0), r.gen_range(0.2..3.0)).unwrap();
        if g.in_omega1(bounds).in_region {
            return g;
        }
    }
}

fn random_bounds(r: &mut ChaCha8Rng) -> ClassBounds {
    ClassBounds::new(r.gen_range(-2.0..3.0), r.gen_range(0.0..3.0)).unwrap()
}

fn c1_equivalence() -> Outcome {
    let mut r = rng(101);
    let (mut checked, mut band) = (0, 0);
    for _ in 0..10_000 {
        let s = region_sample(&mut r);
        let scaled = scale_gains(&s.g, s.b).unwrap();
        let region = in_omega2(&scaled, s.bounds);
        let poly = worst_case_poly(&s.g, s.b, s.bounds);
        let closest = poly.hurwitz_margins().iter().map(|(_, m)| m.abs()).fold(region.margins.min().abs(), f64::min);
        if closest < 1e-10 {
            band += 1;
            continue;
        }
        checked += 1;
        ensure(region.in_region == hurwitz_cubic(&poly), || format!("disagreement at {:?} L={:?} b={}", s.g, s.bounds, s.b))?;
    }
    Ok(format!("{checked} agree, {band} in margin band"))
}

fn c2_containment_scaling() -> Outcome {
    let mut r = rng(202);
    let mut in1 = 0;
    for _ in 0..10_000 {
        let s = region_sample(&mut r);
        let scaled = scale_gains(&s.g, s.b).unwrap();
        if in_omega1(&scaled, s.bounds).in_region {
            in1 += 1;
            ensure(in_omega2(&scaled, s.bounds).in_region, || format!("Ω¹ member outside Ω²: {:?}", s.g))?;
        }
    }
    let alphas = [1.0, 1.5, 2.0, 5.0, 10.0];
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let bounds = random_bounds(&mut r);
        let g = omega1_sample(&mut r, bounds);
        let s = g.scaled_at_lower();
        for &a in &alphas {
            ensure(in_omega1(&s.along_ray(a), bounds).in_region, || format!("α={a} leaves Ω¹ for {g:?}"))?;
        }
        let ray = check_ray_monotonicity(&s, bounds, &alphas).map_err(|e| e.to_string())?;
        worst = worst.min(ray.min_forward_difference);
        ensure(ray.passes, || format!("ζ decreases along the ray for {g:?}: {:?}", ray.values))?;
    }
    Ok(format!("{in1} Ω¹ members contained; min ζ step {worst:.3e}"))
}

fn c3_certificate_validity() -> Outcome {
    let mut r = rng(303);
    let mut min_eig = f64::INFINITY;
    for _ in 0..1000 {
        let bounds = random_bounds(&mut r);
        let g = omega1_sample(&mut r, bounds);
        let plant = make_builtin(BuiltinKind::WorstCase { l1: bounds.l1, l2: bounds.l2, c: None }, 2, ClassTag::ClaimsF(bounds)).unwrap();
        let cert =
            build_certificate(&g.scaled_at_lower(), bounds, &plant, &[1.0, -0.5], Mode::Theorem1).map_err(|e| format!("{g:?}: {e}"))?;
        let c = check_p(&cert).map_err(|e| format!("{g:?} L={bounds:?}: {e}"))?;
        ensure(c.inequalities.iter().all(|q| q.margin > 0.0), || format!("{c:?}"))?;
        min_eig = min_eig.min(c.min_eig);
    }
    let mut worst_rel: f64 = 0.0;
    for _ in 0..1000 {
        let bounds = random_bounds(&mut r);
        let g = loop {
            let g = GainTriple::new(r.gen_range(0.0..12.0), r.gen_range(0.0..6.0), r.gen_range(0.0..12.0), r.gen_range(0.2..3.0)).unwrap();
            if g.in_omega2(bounds).in_region {
                break g;
            }
        };
        let plant = make_builtin(BuiltinKind::WorstCase { l1: bounds.l1, l2: bounds.l2, c: None }, 2, ClassTag::ClaimsG(bounds)).unwrap();
        let s = g.scaled_at_lower();
        let cert = build_certificate(&s, bounds, &plant, &[1.0, -0.5], Mode::Proposition1).map_err(|e| format!("{g:?}: {e}"))?;
        let c = check_p(&cert).map_err(|e| format!("{g:?} L={bounds:?}: {e}"))?;
        let k = cert.constants;
        let scale = 1.0 + (k.phi0 * k.psi0).abs() + s.k0() + k.mu * k.phi0.abs();
        let rel = c.identity_residual.unwrap() / scale;
        worst_rel = worst_rel.max(rel);
        ensure(rel <= 1e-12, || format!("identity residual {rel:e} for {g:?}"))?;
        ensure(c.min_eig > 0.0, || format!("P~ not PD for {g:?}"))?;
    }
    Ok(format!("min λ(P) {min_eig:.3e}; max identity residual {worst_rel:.1e}"))
}

fn random_symmetric(r: &mut ChaCha8Rng, n: usize, bound: f64) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = r.gen_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let s = pidgain::matnum::spectral_norm(&m);
    m.scale(bound * 0.95 / s)
}

fn random_square(r: &mut ChaCha8Rng, n: usize, bound: f64) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = r.gen_range(-1.0..1.0);
        }
    }
    let s = pidgain::matnum::spectral_norm(&m);
    m.scale(bound * 0.95 / s)
}

/// Plants of class F(1, 1): worst case, linear with symmetric A, sinusoidal.
fn criterion4_plants(r: &mut ChaCha8Rng) -> Vec<Plant> {
    let dims = [1, 2, 3, 5];
    let tag = ClassTag::ClaimsF(b11());
    (0..20)
        .map(|i| {
            let n = dims[i % 4];
            match i % 3 {
                0 => make_builtin(BuiltinKind::WorstCase { l1: 1.0, l2: 1.0, c: None }, n, tag),
                1 => make_builtin(BuiltinKind::Linear { a: random_symmetric(r, n, 1.0), b: random_symmetric(r, n, 1.0), c: None }, n, tag),
                _ => make_builtin(BuiltinKind::Sinusoidal { a: r.gen_range(0.3..1.0), b: random_square(r, n, 1.0) }, n, tag),
            }
            .unwrap()
        })
        .collect()
}

/// Gains whose worst-case loop decays at rate at least `rate`.
fn gains_with_rate(r: &mut ChaCha8Rng, bounds: ClassBounds, rate: f64, keep: impl Fn(&GainTriple) -> bool) -> GainTriple {
    loop {
        let g = GainTriple::new(r.gen_range(0.0..10.0), r.gen_range(0.0..4.0), r.gen_range(0.0..10.0), 1.0).unwrap();
        if !keep(&g) {
            continue;
        }
        let roots = pidgain::falsifier::cubic_roots(&worst_case_poly(&g, 1.0, bounds));
        if pidgain::falsifier::max_real_part(&roots) <= -rate {
            return g;
        }
    }
}

fn tight_sim(horizon: f64) -> SimConfig {
    SimConfig {
        integrator: Integrator::Rk45Adaptive { abs_tol: 1e-11, rel_tol: 1e-10 },
        horizon,
        output_interval: 0.01,
        ..SimConfig::default()
    }
}

fn c4_lyapunov_decrease() -> Outcome {
    let mut r = rng(404);
    let plants = criterion4_plants(&mut r);
    let gains: Vec<GainTriple> = (0..20).map(|_| gains_with_rate(&mut r, b11(), 0.1, |g| g.in_omega1(b11()).in_region)).collect();
    let mut jobs = Vec::new();
    for (pi, p) in plants.iter().enumerate() {
        for g in &gains {
            for _ in 0..3 {
                let x0: Vec<f64> = (0..p.dim()).map(|_| r.gen_range(-2.0..2.0)).collect();
                let v0: Vec<f64> = (0..p.dim()).map(|_| r.gen_range(-2.0..2.0)).collect();
                let ystar: Vec<f64> = (0..p.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
                jobs.push((pi, *g, x0, v0, ystar));
            }
        }
    }
    let cfg = SimConfig { output_interval: 0.05, ..tight_sim(200.0) };
    let results: Vec<Result<f64, String>> = jobs
        .par_iter()
        .map(|(pi, g, x0, v0, ystar)| {
            let p = &plants[*pi];
            let ctx = || format!("plant {pi} ({}, n={}) gains {g:?}", p.label(), p.dim());
            let cert = build_certificate(&g.scaled_at_lower(), b11(), p, ystar, Mode::Theorem1).map_err(|e| format!("{}: {e}", ctx()))?;
            let traj = simulate(p, g, 1.0, ystar, x0, v0, &cfg).map_err(|e| format!("{}: {e}", ctx()))?;
            ensure(traj.verdict == Verdict::Converged && traj.final_error() < 1e-4, || {
                format!("{}: verdict {:?}, |e(T)| = {:e}", ctx(), traj.verdict, traj.final_error())
            })?;
            let vd = vdot_along(&cert, &traj).map_err(|e| e.to_string())?;
            let limit = 1e-6 * vd.v0.max(1.0);
            ensure(vd.max <= limit, || format!("{}: max dV/dt {:e} > {limit:e}", ctx(), vd.max))?;
            Ok(vd.max / vd.v0.max(1.0))
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for res in results {
        worst = worst.max(res?);
    }
    Ok(format!("{} trajectories; max dV/dt / max(1,V0) = {worst:.2e}", jobs.len()))
}

fn criterion5_plants(r: &mut ChaCha8Rng) -> Vec<Plant> {
    let tag = ClassTag::ClaimsG(b11());
    vec![
        make_builtin(BuiltinKind::WorstCase { l1: 1.0, l2: 1.0, c: None }, 1, tag).unwrap(),
        make_builtin(BuiltinKind::WorstCase { l1: 1.0, l2: 1.0, c: Some(vec![0.5, -1.0]) }, 2, tag).unwrap(),
        make_builtin(BuiltinKind::Linear { a: random_symmetric(r, 2, 1.0), b: random_symmetric(r, 2, 1.0), c: None }, 2, tag).unwrap(),
        make_builtin(BuiltinKind::Sinusoidal { a: 1.0, b: Matrix::identity(1) }, 1, tag).unwrap(),
        make_builtin(BuiltinKind::Sinusoidal { a: 0.8, b: random_symmetric(r, 3, 1.0) }, 3, tag).unwrap(),
    ]
}

fn c5_g_class_tightness() -> Outcome {
    let mut r = rng(505);
    let bounds = b11();
    let plants = criterion5_plants(&mut r);
    let gap: Vec<GainTriple> = (0..200)
        .map(|_| gains_with_rate(&mut r, bounds, 0.1, |g| g.in_omega2(bounds).in_region && !g.in_omega1(bounds).in_region))
        .collect();
    let cfg = SimConfig { horizon: 300.0, output_interval: 0.1, ..tight_sim(300.0) };
    let jobs: Vec<(usize, GainTriple)> = (0..plants.len()).flat_map(|p| gap.iter().map(move |g| (p, *g))).collect();
    jobs.par_iter()
        .map(|(pi, g)| {
            let p = &plants[*pi];
            let n = p.dim();
            let ystar: Vec<f64> = (0..n).map(|i| 1.0 - 0.5 * i as f64).collect();
            build_certificate(&g.scaled_at_lower(), bounds, p, &ystar, Mode::Proposition1)
                .and_then(|c| check_p(&c))
                .map_err(|e| format!("certificate for {g:?}: {e}"))?;
            let traj = simulate(p, g, 1.0, &ystar, &vec![0.0; n], &vec![0.0; n], &cfg).map_err(|e| e.to_string())?;
            ensure(traj.verdict == Verdict::Converged, || format!("plant {pi} gains {g:?}: {:?}", traj.verdict))
        })
        .collect::<Result<Vec<()>, String>>()?;

    let mut violators = Vec::new();
    while violators.len() < 100 {
        let g = GainTriple::new(r.gen_range(1.2..8.0), r.gen_range(0.1..30.0), r.gen_range(1.2..8.0), 1.0).unwrap();
        let s = g.scaled_at_lower();
        if (s.k1() - 1.0) * (s.k2() - 1.0) <= 0.9 * s.k0() {
            violators.push(g);
        }
    }
    let worst = violators
        .par_iter()
        .map(|g| {
            let cx = find_counterexample(g, bounds, &FalsifyOptions::default()).map_err(|e| format!("{g:?}: {e}"))?;
            ensure(cx.evidence.max_real_part > 0.0 && cx.evidence.verdict != Verdict::Converged, || format!("{g:?}: {:?}", cx.evidence))?;
            Ok(cx.evidence.max_real_part)
        })
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(format!("{} gap runs converged; 100 counterexamples, min Re {worst:.3e}", jobs.len()))
}

fn c6_potentials() -> Outcome {
    let mut r = rng(606);
    let plant = make_builtin(BuiltinKind::Sinusoidal { a: 1.7, b: Matrix::identity(2).scale(0.3) }, 2, ClassTag::Unchecked).unwrap();
    let base = [0.3, -1.1];
    let u_base = plant.potential(&base).unwrap();
    let mut worst_u: f64 = 0.0;
    for _ in 0..100 {
        let x = [r.gen_range(-6.0..6.0), r.gen_range(-6.0..6.0)];
        let rec = potential_from_field(&plant, &base, &x, QUAD_ORDER).map_err(|e| e.to_string())?;
        let exact = plant.potential(&x).unwrap() - u_base;
        let rel = (rec - exact).abs() / exact.abs().max(1.0);
        worst_u = worst_u.max(rel);
        ensure(rel <= 1e-8, || format!("U at {x:?}: {rec} vs {exact}"))?;
    }

    // S(x) = cos x₁ + x₁² x₂ + ½x₂²
    let a_field = |x: &[f64]| Matrix::from_rows(vec![vec![-x[0].cos() + 2.0 * x[1], 2.0 * x[0]], vec![2.0 * x[0], 1.0]]).unwrap();
    let origin = [0.0, 0.0];
    let s_at = |x: &[f64]| reconstruct_hessian_potential(&a_field, &origin, x, QUAD_ORDER).unwrap().value;
    let h = 1e-3;
    let mut worst_s: f64 = 0.0;
    for _ in 0..100 {
        let x = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        hessian_potential_from_field(&a_field, &origin, &x, QUAD_ORDER).map_err(|e| e.to_string())?;
        let a = a_field(&x);
        for i in 0..2 {
            for j in 0..2 {
                let shift = |di: f64, dj: f64| {
                    let mut p = x;
                    p[i] += di;
                    p[j] += dj;
                    s_at(&p)
                };
                let fd = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                worst_s = worst_s.max((fd - a[(i, j)]).abs());
                ensure((fd - a[(i, j)]).abs() <= 1e-5, || format!("Hessian ({i},{j}) at {x:?}: {fd} vs {}", a[(i, j)]))?;
            }
        }
    }

    let bad = |x: &[f64]| Matrix::from_rows(vec![vec![x[1], 0.0], vec![0.0, 1.0]]).unwrap();
    match hessian_potential_from_field(&bad, &origin, &[1.0, 2.0], QUAD_ORDER) {
        Err(Error::NotHessianField { residual }) => {
            Ok(format!("U rel err {worst_u:.1e}; Hessian err {worst_s:.1e}; non-integrable residual {residual:.2}"))
        }
        other => Err(format!("non-integrable field accepted: {other:?}")),
    }
}

fn gradient_plant() -> Plant {
    // U = Σ cos xᵢ + 0.1 x₁x₂, S = ½|x|² + 0.2 x₂ sin x₁
    let u = Arc::new(|x: &[f64]| x.iter().map(|v| v.cos()).sum::<f64>() + 0.1 * x[0] * x[1]);
    let grad_u = Arc::new(|x: &[f64]| vec![-x[0].sin() + 0.1 * x[1], -x[1].sin() + 0.1 * x[0]]);
    let s = Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.2 * x[0].sin() * x[1]);
    let hess_s = Arc::new(|x: &[f64]| {
        Matrix::from_rows(vec![vec![1.0 - 0.2 * x[0].sin() * x[1], 0.2 * x[0].cos()], vec![0.2 * x[0].cos(), 1.0]]).unwrap()
    });
    make_builtin(
        BuiltinKind::Gradient(GradientPotentials { n: 2, u, grad_u: Some(grad_u), s: Some(s), hess_s: Some(hess_s) }),
        2,
        ClassTag::Unchecked,
    )
    .unwrap()
}

fn c7_decomposition() -> Outcome {
    let mut r = rng(707);
    let plants = [
        make_builtin(BuiltinKind::WorstCase { l1: 1.5, l2: 0.5, c: Some(vec![1.0, 2.0]) }, 2, ClassTag::Unchecked).unwrap(),
        make_builtin(
            BuiltinKind::Linear { a: random_square(&mut r, 3, 2.0), b: random_square(&mut r, 3, 1.0), c: None },
            3,
            ClassTag::Unchecked,
        )
        .unwrap(),
        make_builtin(BuiltinKind::Sinusoidal { a: 2.0, b: random_square(&mut r, 2, 1.0) }, 2, ClassTag::Unchecked).unwrap(),
        gradient_plant(),
    ];
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let p = &plants[k % plants.len()];
        let n = p.dim();
        let draw = |r: &mut ChaCha8Rng| (0..n).map(|_| r.gen_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (ystar, y, z) = (draw(&mut r), draw(&mut r), draw(&mut r));
        let d = decompose_g(p, &ystar, &y, &z, QUAD_ORDER).map_err(|e| format!("{}: {e}", p.label()))?;
        let rel = d.residual / (1.0 + norm(&d.g));
        worst = worst.max(rel);
        ensure(rel <= 1e-8, || format!("{} residual {:e} at y={y:?} z={z:?}", p.label(), d.residual))?;
    }
    Ok(format!("max residual/(1+|g|) = {worst:.1e}"))
}

/// `exp(M)` by scaling and squaring a truncated Taylor series.
fn expm(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
    };
    let size: f64 = m.iter().flatten().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let squarings = size.log2().ceil().max(0.0) as u32 + 4;
    let scale = 0.5f64.powi(squarings as i32);
    let a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = mul(&term, &a).into_iter().map(|r| r.into_iter().map(|v| v / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

struct LinearLoop {
    a: Matrix,
    b: Matrix,
    c: Vec<f64>,
    g: GainTriple,
    bgain: f64,
    ystar: Vec<f64>,
    x0: Vec<f64>,
    v0: Vec<f64>,
}

impl LinearLoop {
    /// State `(x_int, x₁, x₂, 1)` evolves as `exp(t·M)` applied to the initial state.
    fn reference(&self, t: f64) -> Vec<f64> {
        let n = self.ystar.len();
        let dim = 3 * n + 1;
        let mut m = vec![vec![0.0; dim]; dim];
        let (kp, ki, kd, b) = (self.g.kp, self.g.ki, self.g.kd, self.bgain);
        for i in 0..n {
            m[i][n + i] = -1.0;
            m[i][dim - 1] = self.ystar[i];
            m[n + i][2 * n + i] = 1.0;
            let row = 2 * n + i;
            m[row][i] = b * ki;
            for j in 0..n {
                m[row][n + j] = self.a[(i, j)] - if i == j { b * kp } else { 0.0 };
                m[row][2 * n + j] = self.b[(i, j)] - if i == j { b * kd } else { 0.0 };
            }
            m[row][dim - 1] = self.c[i] + b * kp * self.ystar[i];
        }
        let e = expm(&m.iter().map(|r| r.iter().map(|v| v * t).collect()).collect::<Vec<_>>());
        let mut w0 = vec![0.0; n];
        w0.extend_from_slice(&self.x0);
        w0.extend_from_slice(&self.v0);
        w0.push(1.0);
        (0..3 * n).map(|i| (0..dim).map(|j| e[i][j] * w0[j]).sum()).collect()
    }

    fn plant(&self) -> Plant {
        let kind = BuiltinKind::Linear { a: self.a.clone(), b: self.b.clone(), c: Some(self.c.clone()) };
        make_builtin(kind, self.ystar.len(), ClassTag::Unchecked).unwrap()
    }

    /// Max deviation from the reference over the given times.
    fn error(&self, cfg: &SimConfig, times: &[f64]) -> Result<f64, String> {
        let traj = simulate(&self.plant(), &self.g, self.bgain, &self.ystar, &self.x0, &self.v0, cfg).map_err(|e| e.to_string())?;
        let n = self.ystar.len();
        let mut worst: f64 = 0.0;
        for &t in times {
            let i = traj.times.iter().position(|&s| (s - t).abs() < 1e-9).ok_or_else(|| format!("t={t} not on output grid"))?;
            let want = self.reference(t);
            let got: Vec<f64> = traj.x_int[i].iter().chain(&traj.x1[i]).chain(&traj.x2[i]).copied().collect();
            for k in 0..3 * n {
                worst = worst.max((got[k] - want[k]).abs());
            }
        }
        Ok(worst)
    }
}

fn c8_simulator_fidelity() -> Outcome {
    let mut r = rng(808);
    let mut worst: f64 = 0.0;
    for n in [1, 2, 3] {
        let lp = LinearLoop {
            a: random_square(&mut r, n, 1.0),
            b: random_square(&mut r, n, 0.5),
            c: (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
            g: GainTriple::new(6.0, 2.0, 4.0, 1.0).unwrap(),
            bgain: 1.3,
            ystar: (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
            x0: (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
            v0: (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
        };
        let cfg = SimConfig { horizon: 10.0, ..tight_sim(10.0) };
        let e = lp.error(&cfg, &[1.0, 5.0, 10.0])?;
        worst = worst.max(e);
        ensure(e <= 1e-6, || format!("n={n}: deviation {e:e} from the matrix exponential"))?;
    }
    let lp = LinearLoop {
        a: Matrix::from_rows(vec![vec![0.5]]).unwrap(),
        b: Matrix::from_rows(vec![vec![-0.2]]).unwrap(),
        c: vec![0.3],
        g: GainTriple::new(4.0, 1.0, 3.0, 1.0).unwrap(),
        bgain: 1.0,
        ystar: vec![1.0],
        x0: vec![-0.5],
        v0: vec![0.2],
    };
    let rk4 =
        |step: f64| SimConfig { integrator: Integrator::Rk4Fixed { step }, horizon: 1.0, output_interval: step, ..SimConfig::default() };
    let coarse = lp.error(&rk4(0.1), &[1.0])?;
    let fine = lp.error(&rk4(0.05), &[1.0])?;
    let ratio = coarse / fine;
    ensure((8.0..=32.0).contains(&ratio), || format!("RK4 halving ratio {ratio}"))?;
    Ok(format!("max DP45 deviation {worst:.1e}; RK4 halving ratio {ratio:.2}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 region/Hurwitz equivalence", 5, c1_equivalence),
        ("2 containment and ray scaling", 5, c2_containment_scaling),
        ("3 certificate validity", 10, c3_certificate_validity),
        ("4 Lyapunov decrease", 120, c4_lyapunov_decrease),
        ("5 G-class tightness", 120, c5_g_class_tightness),
        ("6 potential machinery", 10, c6_potentials),
        ("7 decomposition", 10, c7_decomposition),
        ("8 simulator fidelity", 10, c8_simulator_fidelity),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > Duration::from_secs(budget) => Err(format!("over budget; {d}")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        println!("{tag} {name:<32} {:>8.3}s / {budget}s  {detail}", took.as_secs_f64());
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
