use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use pidgain::certificates::{build_certificate, certificate_report, vdot_along};
use pidgain::falsifier::{find_counterexample, FalsifyOptions};
use pidgain::plants::{check_membership, ClaimedClass, Plant};
use pidgain::regions::{fmt_f64, in_omega1, in_omega2, kbar, scale_gains, slice_grid, GainTriple, SliceSpec};
use pidgain::sampling::SampleBox;
use pidgain::simulator::{simulate as run_sim, Verdict};

use crate::config::{self, Gains};
use crate::{json, CliError, Common};

fn emit<T: Serialize>(report: &T) -> Result<(), CliError> {
    let text = json::to_string(report)?;
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn artifact(common: &Common, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(&common.out)?;
    let path = common.out.join(name);
    let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

fn seed(cfg: Option<u64>, common: &Common) -> Result<u64, CliError> {
    common.seed.or(cfg).ok_or_else(|| CliError::Usage("a seed is required (config `seed` or --seed)".into()))
}

fn actual_b(g: &GainTriple, b: Option<f64>) -> f64 {
    b.unwrap_or(g.b_lower)
}

#[derive(Serialize)]
struct ScaledReport {
    k1: f64,
    k0: f64,
    k2: f64,
}

#[derive(Serialize)]
struct RegionReport {
    gains: GainTriple,
    b: f64,
    scaled: ScaledReport,
    kbar: Option<f64>,
    omega1: pidgain::regions::RegionVerdict,
    omega2: pidgain::regions::RegionVerdict,
}

/// Succeeds when the gains lie in the necessary region.
pub fn region_check(cfg: &config::RegionCheck, _: &Common) -> Result<bool, CliError> {
    let g = cfg.gains.triple()?;
    let bounds = cfg.bounds.class()?;
    let b = actual_b(&g, cfg.b);
    let s = scale_gains(&g, b)?;
    let report = RegionReport {
        gains: g,
        b,
        scaled: ScaledReport { k1: s.k1(), k0: s.k0(), k2: s.k2() },
        kbar: kbar(s.k0(), s.k2(), bounds.l2).ok(),
        omega1: in_omega1(&s, bounds),
        omega2: in_omega2(&s, bounds),
    };
    emit(&report)?;
    Ok(report.omega2.in_region)
}

#[derive(Serialize)]
struct SliceSummary {
    path: String,
    axes: (String, String),
    cells: usize,
    in_omega1: usize,
    in_omega2: usize,
}

pub fn region_slice(cfg: &config::RegionSlice, common: &Common) -> Result<bool, CliError> {
    let spec = SliceSpec {
        bounds: cfg.bounds.class()?,
        b_lower: cfg.b_lower,
        fixed: cfg.fixed,
        x_range: cfg.x_range,
        y_range: cfg.y_range,
        resolution: cfg.resolution,
    };
    let slice = slice_grid(&spec)?;
    let (path, mut w) = artifact(common, "slice.csv")?;
    slice.write_csv(&mut w)?;
    w.flush()?;
    emit(&SliceSummary {
        path: path.display().to_string(),
        axes: slice.axes.clone(),
        cells: slice.cells.len(),
        in_omega1: slice.cells.iter().filter(|c| c.in_omega1).count(),
        in_omega2: slice.cells.iter().filter(|c| c.in_omega2).count(),
    })?;
    Ok(true)
}

pub fn certify(cfg: &config::Certify, common: &Common) -> Result<bool, CliError> {
    let g = cfg.gains.triple()?;
    let bounds = cfg.bounds.class()?;
    let s = scale_gains(&g, actual_b(&g, cfg.b))?;
    let plant = cfg.plant.build()?;
    let cert = build_certificate(&s, bounds, &plant, &cfg.setpoint, cfg.mode)?;
    let domain = SampleBox::cube(2 * plant.dim(), cfg.radius);
    let report = certificate_report(&cert, &domain, cfg.samples, seed(cfg.seed, common)?)?;
    emit(&report)?;
    Ok(true)
}

#[derive(Serialize)]
struct SimulationSummary {
    path: String,
    verdict: Verdict,
    decided_at: Option<f64>,
    final_error: f64,
    samples: usize,
    max_vdot: Option<f64>,
    warnings: Vec<String>,
}

fn vector_or_zero(v: &Option<Vec<f64>>, n: usize) -> Vec<f64> {
    v.clone().unwrap_or_else(|| vec![0.0; n])
}

/// Succeeds when the trajectory converged.
pub fn simulate(cfg: &config::Simulate, common: &Common) -> Result<bool, CliError> {
    let plant = cfg.plant.build()?;
    let n = plant.dim();
    let g = cfg.gains.triple()?;
    let b = actual_b(&g, cfg.b);
    let mut traj = run_sim(&plant, &g, b, &cfg.setpoint, &vector_or_zero(&cfg.x0, n), &vector_or_zero(&cfg.v0, n), &cfg.sim)?;
    let mut max_vdot = None;
    if let Some(att) = &cfg.certificate {
        let cert = build_certificate(&scale_gains(&g, b)?, att.bounds.class()?, &plant, &cfg.setpoint, att.mode)?;
        traj.attach_lyapunov(&cert)?;
        if traj.len() >= 3 {
            max_vdot = Some(vdot_along(&cert, &traj)?.max);
        }
    }
    let (path, mut w) = artifact(common, "trajectory.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    emit(&SimulationSummary {
        path: path.display().to_string(),
        verdict: traj.verdict,
        decided_at: traj.decided_at,
        final_error: traj.final_error(),
        samples: traj.len(),
        max_vdot,
        warnings: traj.warnings.clone(),
    })?;
    Ok(traj.verdict == Verdict::Converged)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub plant: usize,
    pub label: String,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub in_omega1: bool,
    pub in_omega2: bool,
    /// `converged`, `diverged`, `undecided` or `error`.
    pub verdict: String,
    pub final_error: f64,
}

const SWEEP_HEADER: [&str; 9] = ["plant", "label", "kp", "ki", "kd", "in_omega1", "in_omega2", "verdict", "final_error"];

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.plant.to_string(),
            r.label.clone(),
            fmt_f64(r.kp),
            fmt_f64(r.ki),
            fmt_f64(r.kd),
            r.in_omega1.to_string(),
            r.in_omega2.to_string(),
            r.verdict.clone(),
            fmt_f64(r.final_error),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[allow(dead_code)]
pub fn read_sweep_csv(input: impl Read) -> Result<Vec<SweepRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |m: String| CliError::Io(format!("sweep csv: {m}"));
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(SWEEP_HEADER) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let flag = |s: &str| s.parse::<bool>().map_err(|e| bad(format!("{s:?}: {e}")));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            Ok(SweepRow {
                plant: rec[0].parse().map_err(|e| bad(format!("{e}")))?,
                label: rec[1].to_string(),
                kp: num(&rec[2])?,
                ki: num(&rec[3])?,
                kd: num(&rec[4])?,
                in_omega1: flag(&rec[5])?,
                in_omega2: flag(&rec[6])?,
                verdict: rec[7].to_string(),
                final_error: num(&rec[8])?,
            })
        })
        .collect()
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Diverged => "diverged",
        Verdict::Undecided => "undecided",
    }
}

#[derive(Serialize)]
struct SweepSummary {
    path: String,
    runs: usize,
    converged: usize,
    diverged: usize,
    undecided: usize,
    errors: usize,
}

pub fn sweep(cfg: &config::Sweep, common: &Common) -> Result<bool, CliError> {
    let bounds = cfg.bounds.class()?;
    let plants: Vec<Plant> = cfg.plants.iter().map(|p| p.build()).collect::<Result<_, _>>()?;
    if plants.is_empty() {
        return Err(CliError::Usage("sweep needs at least one plant".into()));
    }
    let (kps, kis, kds) = (cfg.grid.kp.values()?, cfg.grid.ki.values()?, cfg.grid.kd.values()?);
    let mut tasks = Vec::with_capacity(plants.len() * kps.len() * kis.len() * kds.len());
    for pi in 0..plants.len() {
        for &kp in &kps {
            for &ki in &kis {
                for &kd in &kds {
                    tasks.push((pi, Gains { kp, ki, kd, b_lower: cfg.b_lower }.triple()?));
                }
            }
        }
    }
    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(pi, g)| {
            let plant = &plants[pi];
            let n = plant.dim();
            let mut ystar = vec![0.0; n];
            ystar[0] = cfg.setpoint;
            let zero = vec![0.0; n];
            let s = g.scaled_at_lower();
            let (verdict, final_error) = match run_sim(plant, &g, actual_b(&g, cfg.b), &ystar, &zero, &zero, &cfg.sim) {
                Ok(t) => (verdict_name(t.verdict).to_string(), t.final_error()),
                Err(_) => ("error".to_string(), f64::NAN),
            };
            SweepRow {
                plant: pi,
                label: plant.label().to_string(),
                kp: g.kp,
                ki: g.ki,
                kd: g.kd,
                in_omega1: in_omega1(&s, bounds).in_region,
                in_omega2: in_omega2(&s, bounds).in_region,
                verdict,
                final_error,
            }
        })
        .collect();
    let (path, mut w) = artifact(common, "sweep.csv")?;
    write_sweep_csv(&rows, &mut w)?;
    let count = |v: &str| rows.iter().filter(|r| r.verdict == v).count();
    emit(&SweepSummary {
        path: path.display().to_string(),
        runs: rows.len(),
        converged: count("converged"),
        diverged: count("diverged"),
        undecided: count("undecided"),
        errors: count("error"),
    })?;
    Ok(true)
}

#[derive(Serialize)]
struct FalsifyReport<'a> {
    counterexample: &'a pidgain::falsifier::Counterexample,
    trajectory: String,
}

pub fn falsify(cfg: &config::Falsify, common: &Common) -> Result<bool, CliError> {
    let g = cfg.gains.triple()?;
    let mut opts = FalsifyOptions { n: cfg.n, setpoint: cfg.setpoint, ..FalsifyOptions::default() };
    if let Some(h) = cfg.horizon {
        opts.sim.horizon = h;
    }
    let cx = find_counterexample(&g, cfg.bounds.class()?, &opts)?;
    let (path, mut w) = artifact(common, "counterexample_trajectory.csv")?;
    cx.trajectory.write_csv(&mut w)?;
    w.flush()?;
    emit(&FalsifyReport { counterexample: &cx, trajectory: display(&path) })?;
    Ok(true)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Serialize)]
struct ClassReport {
    class: ClaimedClass,
    member: bool,
    report: pidgain::plants::MembershipReport,
}

/// Succeeds when every sampled condition of the requested class holds.
pub fn class_check(cfg: &config::ClassCheck, common: &Common) -> Result<bool, CliError> {
    let plant = cfg.plant.build()?;
    let domain = SampleBox::cube(2 * plant.dim(), cfg.radius);
    let report = check_membership(&plant, cfg.bounds.class()?, &domain, cfg.samples, seed(cfg.seed, common)?)?;
    let member = match cfg.class {
        ClaimedClass::F => report.in_f(),
        ClaimedClass::G => report.in_g(),
    };
    emit(&ClassReport { class: cfg.class, member, report })?;
    Ok(member)
}
