use std::path::Path;

use anyhow::{bail, Context, Result};
use invasion_core::asym::{inner_wave, outer_wave, validate_matching, AsymptoticConstants};
use invasion_core::io::Table;
use invasion_core::model::lambda_inner;
use invasion_core::numerics::rk::Tolerances;
use invasion_core::pde::{run, FrontTrace, Grid1D, IcKind, InitialCondition, PdeRun, RunOptions};
use invasion_core::speedfit::{default_window, fit_speed, SpeedFit};
use invasion_core::tw::{
    branch_orbit, branch_speed, classify_tail, connection_residual, gap_width, rear_orbit_to, shoot_from_front,
    BranchPoint, Origin, Regime, TwTrajectory, SEED_EPS,
};
use invasion_core::ModelParams;
use rayon::prelude::*;

use crate::config::{ic_for, ExperimentConfig, IcChoice};
use crate::output::OutputDir;

/// Above this gamma the rear seed is numerically unreachable and orbits at
/// a prescribed speed are shot from the front.
const REAR_GAMMA_LIMIT: f64 = 50.0;

pub struct PdeJob {
    pub gamma: f64,
    pub ic: InitialCondition,
    pub grid: Grid1D,
    pub t_end: f64,
    pub tol: Tolerances,
    pub output_times: Vec<f64>,
}

impl PdeJob {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            gamma: cfg.model.gamma,
            ic: cfg.initial_condition(),
            grid: cfg.grid()?,
            t_end: cfg.grid.t_end,
            tol: cfg.tolerances()?,
            output_times: Vec::new(),
        })
    }

    pub fn with(&self, gamma: f64, ic: InitialCondition) -> Self {
        Self { gamma, ic, output_times: self.output_times.clone(), ..*self }
    }

    pub fn run(&self) -> Result<PdeRun> {
        let opts = RunOptions { tol: self.tol, output_times: self.output_times.clone(), ..RunOptions::default() };
        Ok(run(ModelParams::new(self.gamma, self.ic.v0)?, self.ic, self.grid, self.t_end, &opts)?)
    }
}

pub fn fit_run(r: &PdeRun) -> Result<SpeedFit> {
    let w = default_window(&r.trace, 0.9 * r.grid.length)?;
    Ok(fit_speed(&r.trace, w)?)
}

fn ic_meta(t: Table, ic: &InitialCondition) -> Table {
    match ic.kind {
        IcKind::Compact { width, height } => t.with_meta("ic", "compact").with_meta("ic_width", width).with_meta("ic_height", height),
        IcKind::Exponential { a } => t.with_meta("ic", "exp").with_meta("a", a),
    }
}

fn ic_a(ic: &InitialCondition) -> f64 {
    match ic.kind {
        IcKind::Exponential { a } => a,
        IcKind::Compact { .. } => f64::NAN,
    }
}

fn run_meta(t: Table, r: &PdeRun) -> Table {
    ic_meta(
        t.with_meta("gamma", r.params.gamma)
            .with_meta("v0", r.ic.v0)
            .with_meta("L", r.grid.length)
            .with_meta("N", r.grid.cells)
            .with_meta("tol_rel", r.tol.rel)
            .with_meta("tol_abs", r.tol.abs),
        &r.ic,
    )
}

pub fn trace_table(r: &PdeRun) -> Table {
    let mut t = run_meta(Table::new(&["t", "x_f"]), r).with_meta("level", r.trace.level);
    if let Some((te, xe)) = r.escaped {
        t = t.with_meta("escaped_t", te).with_meta("escaped_x", xe);
    }
    for &(time, x) in &r.trace.samples {
        t.push(vec![time, x]);
    }
    t
}

/// Wide table: `x`, then `u_<t>` and `v_<t>` for each snapshot.
pub fn states_table(r: &PdeRun) -> Table {
    let mut header = vec!["x".to_string()];
    for s in &r.states {
        header.push(format!("u_{}", s.t));
    }
    for s in &r.states {
        header.push(format!("v_{}", s.t));
    }
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = run_meta(Table::new(&refs), r);
    for (i, x) in r.grid.centres().into_iter().enumerate() {
        let mut row = vec![x];
        row.extend(r.states.iter().map(|s| s.u[i]));
        row.extend(r.states.iter().map(|s| s.v[i]));
        t.push(row);
    }
    t
}

pub const FIT_COLUMNS: [&str; 10] = ["gamma", "v0", "a", "c", "k0", "k1", "rms", "t_min", "t_max", "c_stderr"];

pub fn fit_values(gamma: f64, ic: &InitialCondition, f: &SpeedFit) -> Vec<f64> {
    vec![gamma, ic.v0, ic_a(ic), f.c, f.k0, f.k1, f.rms, f.window.0, f.window.1, f.c_stderr]
}

pub fn simulate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let mut job = PdeJob::from_config(cfg)?;
    let n = cfg.grid.snapshots.max(1);
    job.output_times = (1..=n).map(|k| cfg.grid.t_end * k as f64 / n as f64).collect();
    let r = job.run()?;
    out.table("trace.csv", &trace_table(&r))?;
    out.table("states.csv", &states_table(&r))?;
    let f = fit_run(&r).context("fitting the front trace")?;
    let mut t = run_meta(Table::new(&FIT_COLUMNS), &r);
    t.push(fit_values(r.params.gamma, &r.ic, &f));
    out.table("fit.csv", &t)?;
    let status = match r.escaped {
        Some((te, xe)) => Err(format!("front passed 0.9 L (x_f = {xe}) at t = {te}; trace truncated")),
        None => Ok(()),
    };
    out.record("simulate", status);
    println!("c = {:.6}  k0 = {:.4}  k1 = {:.4}  window = [{:.2}, {:.2}]", f.c, f.k0, f.k1, f.window.0, f.window.1);
    Ok(())
}

pub fn fit_speed_file(cfg: &ExperimentConfig, trace: &Path, window: (Option<f64>, Option<f64>), out: &mut OutputDir) -> Result<()> {
    let table = Table::read(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    let (ts, xs) = match (table.column("t"), table.column("x_f")) {
        (Some(t), Some(x)) => (t, x),
        _ => bail!("{} needs columns t and x_f", trace.display()),
    };
    let ft = FrontTrace { samples: ts.into_iter().zip(xs).collect(), level: 0.5 };
    let length = table.meta("L").and_then(|s| s.parse().ok()).unwrap_or(cfg.grid.length);
    let auto = default_window(&ft, 0.9 * length);
    let w = match (window, auto) {
        ((Some(lo), Some(hi)), _) => (lo, hi),
        ((lo, hi), Ok(a)) => (lo.unwrap_or(a.0), hi.unwrap_or(a.1)),
        (_, Err(e)) => return Err(e.into()),
    };
    let f = fit_speed(&ft, w)?;
    let meta = |k: &str| table.meta(k).and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN);
    let mut t = Table::new(&FIT_COLUMNS).with_meta("source", trace.display());
    let row = vec![meta("gamma"), meta("v0"), meta("a"), f.c, f.k0, f.k1, f.rms, f.window.0, f.window.1, f.c_stderr];
    t.push(row);
    out.table("fit.csv", &t)?;
    out.record("fit-speed", Ok(()));
    println!("c = {:.6}  k0 = {:.4}  k1 = {:.4}", f.c, f.k0, f.k1);
    Ok(())
}

pub fn trajectory_table(traj: &TwTrajectory, n: usize) -> Table {
    let mut t = Table::new(&["z", "U", "V", "W"])
        .with_meta("gamma", traj.gamma)
        .with_meta("c", traj.c)
        .with_meta("V_end", traj.v_end)
        .with_meta("origin", format!("{:?}", traj.origin).to_lowercase());
    for p in traj.resample(n) {
        t.push(vec![p.z, p.u, p.v, p.w]);
    }
    t
}

/// Orbit at a prescribed speed into `v_inf`.
pub fn orbit_at(gamma: f64, c: f64, v_inf: f64) -> Result<TwTrajectory> {
    Ok(if gamma <= REAR_GAMMA_LIMIT {
        rear_orbit_to(gamma, c, v_inf)?
    } else {
        shoot_from_front(gamma, c, v_inf, SEED_EPS)?
    })
}

pub fn tw_trajectory(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let gamma = cfg.model.gamma;
    let v_inf = cfg.tw.v_inf.unwrap_or(cfg.model.v0);
    let traj = match cfg.tw.c {
        Some(c) => orbit_at(gamma, c, v_inf)?,
        None => branch_orbit(&branch_speed(gamma, v_inf)?)?,
    };
    let mut t = trajectory_table(&traj, cfg.tw.samples);
    let gap = gap_width(&traj, cfg.tw.theta).unwrap_or(f64::NAN);
    t = t.with_meta("gap_width", gap).with_meta("theta", cfg.tw.theta);
    match traj.origin {
        Origin::Rear => {
            let cls = classify_tail(&traj)?;
            t = t.with_meta("tail", format!("{:?}", cls.kind)).with_meta("r2", cls.r2).with_meta("r3", cls.r3);
        }
        Origin::Front => {
            t = t.with_meta("connection_residual", connection_residual(&traj)?);
            if let Some(m) = traj.front_miss {
                t = t.with_meta("front_miss", format!("{m:?}"));
            }
        }
    }
    out.table("trajectory.csv", &t)?;
    out.record("tw-trajectory", Ok(()));
    println!("c = {:.8}  V_end = {:.8}  gap = {gap:.4}", traj.c, traj.v_end);
    Ok(())
}

pub const BRANCH_COLUMNS: [&str; 4] = ["gamma", "c", "V_inf", "vs_limited"];

/// Branch points over `gammas`, in order, with per-point failures kept.
pub fn branch_points(gammas: &[f64], v_inf: f64) -> Vec<(f64, std::result::Result<BranchPoint, String>)> {
    gammas.par_iter().map(|&g| (g, branch_speed(g, v_inf).map_err(|e| e.to_string()))).collect()
}

pub fn branch_table(points: &[(f64, std::result::Result<BranchPoint, String>)], v_inf: f64) -> Table {
    let mut t = Table::new(&BRANCH_COLUMNS).with_meta("V_inf", v_inf).with_meta("vs_limited", "1 = V_s limited, 0 = V_c limited");
    for (g, p) in points {
        t.push(match p {
            Ok(b) => vec![b.gamma, b.c, b.v_inf, if b.regime == Regime::VsLimited { 1.0 } else { 0.0 }],
            Err(_) => vec![*g, f64::NAN, v_inf, f64::NAN],
        });
    }
    t
}

pub fn vinf_tag(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

pub fn tw_branch(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let gammas = cfg.gamma_grid();
    for &v in &cfg.branch.v_inf {
        let pts = branch_points(&gammas, v);
        for (g, p) in &pts {
            out.record(format!("branch V_inf={v} gamma={g:e}"), p.as_ref().map(|_| ()).map_err(Clone::clone));
        }
        out.table(&format!("branch_v{}.csv", vinf_tag(v)), &branch_table(&pts, v))?;
    }
    Ok(())
}

pub fn constants(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(f64, Vec<(f64, f64)>)> {
    let a0 = outer_wave(1e-6)?.a0;
    let mut t = Table::new(&["A0"]).with_meta("seed_eps", 1e-6);
    t.push(vec![a0]);
    out.table("constants_a0.csv", &t)?;
    let a_i: Vec<(f64, f64)> = cfg
        .branch
        .v_inf
        .par_iter()
        .map(|&v| inner_wave(v, 1e-6).map(|w| (v, w.a_i)))
        .collect::<std::result::Result<_, _>>()?;
    let mut t = Table::new(&["V_inf", "A_I", "Lambda"]);
    for &(v, a) in &a_i {
        t.push(vec![v, a, lambda_inner(v)?]);
    }
    out.table("constants_ai.csv", &t)?;
    Ok((a0, a_i))
}

pub const MATCH_COLUMNS: [&str; 8] = ["gamma", "V_inf", "delta_num", "delta_one", "delta_two", "delta_1", "ratio", "inv_log2"];

pub fn matching_table(points: &[(f64, std::result::Result<BranchPoint, String>)], consts: &AsymptoticConstants) -> Result<Table> {
    let mut t = Table::new(&MATCH_COLUMNS)
        .with_meta("A0", consts.a0)
        .with_meta("A_I", consts.a_i)
        .with_meta("delta_one", "pi^2 / (log gamma)^2")
        .with_meta("delta_two", "delta_one + 2 pi^2 log(A_I / A0) / (log gamma)^3")
        .with_meta("delta_1", "delta_num - delta_one");
    for (_, p) in points {
        let Ok(bp) = p else { continue };
        if bp.regime != Regime::VsLimited || bp.gamma <= 1.0 {
            continue;
        }
        let r = validate_matching(bp, consts)?;
        let lg = bp.gamma.ln();
        t.push(vec![r.gamma, r.v_inf, r.delta_num, r.prediction.one_term, r.prediction.two_term, r.delta_1, r.ratio, 1.0 / (lg * lg)]);
    }
    Ok(t)
}

pub fn asymptotics(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let (a0, a_i) = constants(cfg, out)?;
    println!("A0 = {a0:.6}");
    let gammas: Vec<f64> = cfg.gamma_grid().into_iter().filter(|&g| g >= 10.0).collect();
    for (v, a) in a_i {
        println!("A_I({v}) = {a:.6}");
        let consts = AsymptoticConstants { v_inf: v, a0, a_i: a, lambda: lambda_inner(v)? };
        let pts = branch_points(&gammas, v);
        for (g, p) in &pts {
            out.record(format!("matching V_inf={v} gamma={g:e}"), p.as_ref().map(|_| ()).map_err(Clone::clone));
        }
        out.table(&format!("matching_v{}.csv", vinf_tag(v)), &matching_table(&pts, &consts)?)?;
    }
    Ok(())
}

pub struct SweepPoint {
    pub gamma: f64,
    pub ic: InitialCondition,
}

pub fn sweep_grid(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    if cfg.sweep.gamma.is_empty() {
        bail!("sweep.gamma is empty: nothing to run");
    }
    let v0s = if cfg.sweep.v0.is_empty() { vec![cfg.model.v0] } else { cfg.sweep.v0.clone() };
    let mut pts = Vec::new();
    for &g in &cfg.sweep.gamma {
        for &v in &v0s {
            if cfg.sweep.a.is_empty() {
                pts.push(SweepPoint { gamma: g, ic: cfg.initial_condition().with_v0(v) });
            } else {
                for &a in &cfg.sweep.a {
                    pts.push(SweepPoint { gamma: g, ic: ic_for(IcChoice::Exp, a, v) });
                }
            }
        }
    }
    Ok(pts)
}

trait WithV0 {
    fn with_v0(self, v0: f64) -> Self;
}

impl WithV0 for InitialCondition {
    fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }
}

pub fn sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let grid = sweep_grid(cfg)?;
    let base = PdeJob::from_config(cfg)?;
    let results: Vec<Result<SpeedFit>> = grid.par_iter().map(|p| base.with(p.gamma, p.ic).run().and_then(|r| fit_run(&r))).collect();
    let mut cols = vec!["index"];
    cols.extend(FIT_COLUMNS);
    cols.push("ok");
    let mut t = Table::new(&cols).with_meta("L", cfg.grid.length).with_meta("N", cfg.grid.cells).with_meta("t_end", cfg.grid.t_end);
    for (i, (p, r)) in grid.iter().zip(&results).enumerate() {
        let mut row = vec![i as f64];
        match r {
            Ok(f) => {
                row.extend(fit_values(p.gamma, &p.ic, f));
                row.push(1.0);
            }
            Err(_) => {
                row.extend([p.gamma, p.ic.v0, ic_a(&p.ic)]);
                row.extend([f64::NAN; 7]);
                row.push(0.0);
            }
        }
        t.push(row);
        out.record(format!("sweep[{i}] gamma={} v0={} a={}", p.gamma, p.ic.v0, ic_a(&p.ic)), r.as_ref().map(|_| ()).map_err(|e| format!("{e:#}")));
    }
    out.table("sweep.csv", &t)?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    println!("{} runs, {failed} failed", grid.len());
    Ok(())
}
