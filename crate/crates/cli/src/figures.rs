//! `reproduce`: the data behind each figure, plus a layout descriptor.

use anyhow::{Context, Result};
use clap::ValueEnum;
use invasion_core::asym::AsymptoticConstants;
use invasion_core::io::Table;
use invasion_core::model::{dispersion_speed, lambda_inner};
use invasion_core::pde::{InitialCondition, PdeRun};
use invasion_core::tw::{branch_orbit, branch_speed, gap_width, selected_speed, InvaderTail, TwTrajectory};
use rayon::prelude::*;

use crate::commands::{
    branch_points, branch_table, constants, fit_run, fit_values, matching_table, orbit_at, states_table, trace_table,
    trajectory_table, vinf_tag, PdeJob, FIT_COLUMNS,
};
use crate::config::ExperimentConfig;
use crate::output::{Layout, OutputDir, Panel, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

pub fn reproduce(fig: Figure, cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    match fig {
        Figure::Fig1 => fig1(cfg, out),
        Figure::Fig2 => fig2(cfg, out),
        Figure::Fig3 => fig3(cfg, out),
        Figure::Fig4 => fig4(cfg, out),
        Figure::Fig5 => fig5(cfg, out),
        Figure::Fig6 => fig6(cfg, out),
    }
}

fn snapshot_job(cfg: &ExperimentConfig) -> Result<PdeJob> {
    let mut job = PdeJob::from_config(cfg)?;
    let n = cfg.grid.snapshots.max(1);
    job.output_times = (1..=n).map(|k| cfg.grid.t_end * k as f64 / n as f64).collect();
    Ok(job)
}

fn run_all(jobs: Vec<PdeJob>) -> Vec<Result<PdeRun>> {
    jobs.par_iter().map(PdeJob::run).collect()
}

/// Writes trace, states and fit for one run; the fit is returned for reuse.
fn write_run(out: &mut OutputDir, tag: &str, r: &PdeRun) -> Result<f64> {
    out.table(&format!("{tag}_trace.csv"), &trace_table(r))?;
    out.table(&format!("{tag}_states.csv"), &states_table(r))?;
    let f = fit_run(r).with_context(|| format!("fitting {tag}"))?;
    let mut t = Table::new(&FIT_COLUMNS);
    t.push(fit_values(r.params.gamma, &r.ic, &f));
    out.table(&format!("{tag}_fit.csv"), &t)?;
    out.record(tag, r.escaped.map_or(Ok(()), |(te, _)| Err(format!("front escaped at t = {te}"))));
    Ok(f.c)
}

fn profile_panels(tag: &str, r: &PdeRun, title: &str) -> Vec<Panel> {
    let file = format!("{tag}_states.csv");
    let mk = |field: &str| Panel {
        name: format!("{tag} {field}"),
        x_label: "x".into(),
        y_label: format!("{field} ({title})"),
        series: r.states.iter().map(|s| Series::new(format!("t = {}", s.t), &file, "x", &format!("{field}_{}", s.t), "line")).collect(),
        ..Panel::default()
    };
    vec![mk("u"), mk("v")]
}

fn fig1(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let base = snapshot_job(cfg)?;
    let v0 = cfg.model.v0;
    let cases = [("fig1a", 1.0), ("fig1b", 10.0)];
    let runs = run_all(cases.iter().map(|&(_, g)| base.with(g, InitialCondition::compact(v0))).collect());
    let mut layout = Layout { figure: "fig1".into(), title: format!("compact invasion into v0 = {v0}"), panels: Vec::new() };
    for ((tag, g), r) in cases.iter().zip(runs) {
        let r = r.with_context(|| format!("{tag} (gamma = {g})"))?;
        let c = write_run(out, tag, &r)?;
        println!("{tag}: gamma = {g}  c = {c:.4}");
        layout.panels.extend(profile_panels(tag, &r, &format!("gamma = {g}")));
    }
    layout.write(out)
}

fn fig2(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let gammas = cfg.gamma_grid();
    let mut layout = Layout { figure: "fig2".into(), title: "wave speed against gamma".into(), panels: Vec::new() };
    let mut panel = Panel { name: "speed".into(), x_label: "gamma".into(), y_label: "c".into(), log_x: true, series: Vec::new() };

    let pde_gammas = if cfg.sweep.gamma.is_empty() { vec![0.1, 1.0, 10.0] } else { cfg.sweep.gamma.clone() };
    let base = PdeJob::from_config(cfg)?;
    let mut jobs = Vec::new();
    for &v in &cfg.branch.v_inf {
        for &g in &pde_gammas {
            jobs.push((v, g));
        }
    }
    let fits: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(v, g)| base.with(g, InitialCondition::compact(v)).run().and_then(|r| Ok(fit_run(&r)?.c)))
        .collect();

    for &v in &cfg.branch.v_inf {
        let tag = vinf_tag(v);
        let pts = branch_points(&gammas, v);
        for (g, p) in &pts {
            out.record(format!("branch V_inf={v} gamma={g:e}"), p.as_ref().map(|_| ()).map_err(Clone::clone));
        }
        let file = format!("branch_v{tag}.csv");
        out.table(&file, &branch_table(&pts, v).with_meta("c_critical", 2.0 * (1.0 - v)))?;
        panel.series.push(Series::new(format!("travelling wave, V_inf = {v}"), &file, "gamma", "c", "line"));

        let mut t = Table::new(&["gamma", "c", "V_inf"]).with_meta("L", cfg.grid.length).with_meta("N", cfg.grid.cells);
        for ((vv, g), c) in jobs.iter().zip(&fits) {
            if *vv != v {
                continue;
            }
            out.record(format!("pde V_inf={v} gamma={g}"), c.as_ref().map(|_| ()).map_err(|e| format!("{e:#}")));
            t.push(vec![*g, *c.as_ref().unwrap_or(&f64::NAN), v]);
        }
        let file = format!("pde_v{tag}.csv");
        out.table(&file, &t)?;
        panel.series.push(Series::new(format!("PDE, V_inf = {v}"), &file, "gamma", "c", "marker"));
    }
    layout.panels.push(panel);
    layout.write(out)
}

struct PhaseCase {
    tag: &'static str,
    gamma: f64,
    v0: f64,
    tail: InvaderTail,
}

fn fig3(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let cases = [
        PhaseCase { tag: "fig3a", gamma: 1.0, v0: 0.5, tail: InvaderTail::Compact },
        PhaseCase { tag: "fig3b", gamma: 10.0, v0: 0.5, tail: InvaderTail::Compact },
        PhaseCase { tag: "fig3c", gamma: 1.0, v0: 0.75, tail: InvaderTail::Exponential { a: 0.27 } },
        PhaseCase { tag: "fig3d", gamma: 10.0, v0: 0.75, tail: InvaderTail::Exponential { a: 0.21 } },
    ];
    let base = PdeJob::from_config(cfg)?;
    let runs = run_all(
        cases
            .iter()
            .map(|k| {
                let ic = match k.tail {
                    InvaderTail::Compact => InitialCondition::compact(k.v0),
                    InvaderTail::Exponential { a } => InitialCondition::exponential(a, k.v0),
                };
                base.with(k.gamma, ic)
            })
            .collect(),
    );
    let orbits: Vec<Result<TwTrajectory>> = cases
        .par_iter()
        .map(|k| -> Result<TwTrajectory> {
            match k.tail {
                InvaderTail::Compact => Ok(branch_orbit(&branch_speed(k.gamma, k.v0)?)?),
                tail => orbit_at(k.gamma, selected_speed(k.gamma, k.v0, tail)?, k.v0),
            }
        })
        .collect();

    let mut layout = Layout { figure: "fig3".into(), title: "phase plane (U, V)".into(), panels: Vec::new() };
    for ((k, r), orbit) in cases.iter().zip(runs).zip(orbits) {
        let r = r.with_context(|| format!("{} PDE run", k.tag))?;
        let orbit = orbit.with_context(|| format!("{} travelling wave", k.tag))?;
        let tw_file = format!("{}_tw.csv", k.tag);
        out.table(&tw_file, &trajectory_table(&orbit, cfg.tw.samples))?;
        let pde_file = format!("{}_pde.csv", k.tag);
        let mut t = Table::new(&["x", "u", "v"]).with_meta("gamma", k.gamma).with_meta("v0", k.v0).with_meta("t", r.final_state.t);
        for (x, (u, v)) in r.grid.centres().into_iter().zip(r.final_state.u.iter().zip(&r.final_state.v)) {
            t.push(vec![x, *u, *v]);
        }
        out.table(&pde_file, &t)?;
        out.record(k.tag, Ok(()));
        layout.panels.push(Panel {
            name: k.tag.into(),
            x_label: "U".into(),
            y_label: "V".into(),
            series: vec![
                Series::new(format!("travelling wave, c = {:.4}", orbit.c), &tw_file, "U", "V", "line"),
                Series::new(format!("PDE at t = {}", r.final_state.t), &pde_file, "u", "v", "dashed"),
            ],
            ..Panel::default()
        });
    }
    layout.write(out)
}

fn fig4(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let v = cfg.tw.v_inf.unwrap_or(cfg.model.v0);
    let profile_gammas: Vec<f64> = [10.0, 1e3, 1e5, 1e7].into_iter().filter(|&g| g <= cfg.branch.gamma_max).collect();
    let orbits: Vec<Result<TwTrajectory>> =
        profile_gammas.par_iter().map(|&g| Ok(branch_orbit(&branch_speed(g, v)?)?)).collect();
    let mut layout = Layout { figure: "fig4".into(), title: format!("wave profiles into V_inf = {v}"), panels: Vec::new() };
    let mut panel = Panel { name: "profiles".into(), x_label: "z".into(), y_label: "U, V".into(), ..Panel::default() };
    for (g, orbit) in profile_gammas.iter().zip(orbits) {
        let orbit = orbit.with_context(|| format!("branch orbit at gamma = {g:e}"))?;
        let file = format!("profile_g{g:e}.csv");
        out.table(&file, &trajectory_table(&orbit, cfg.tw.samples).with_meta("gap_width", gap_width(&orbit, cfg.tw.theta).unwrap_or(f64::NAN)))?;
        panel.series.push(Series::new(format!("U, gamma = {g:e}"), &file, "z", "U", "line"));
        panel.series.push(Series::new(format!("V, gamma = {g:e}"), &file, "z", "V", "dashed"));
    }
    layout.panels.push(panel);

    let gammas: Vec<f64> = cfg.gamma_grid().into_iter().filter(|&g| g >= 1.0).collect();
    let gaps: Vec<std::result::Result<f64, String>> = gammas
        .par_iter()
        .map(|&g| {
            let orbit = branch_orbit(&branch_speed(g, v)?)?;
            gap_width(&orbit, cfg.tw.theta)
        })
        .map(|r| r.map_err(|e: invasion_core::Error| e.to_string()))
        .collect();
    let mut t = Table::new(&["gamma", "log_gamma", "gap_width"]).with_meta("V_inf", v).with_meta("theta", cfg.tw.theta);
    for (g, w) in gammas.iter().zip(&gaps) {
        out.record(format!("gap gamma={g:e}"), w.as_ref().map(|_| ()).map_err(Clone::clone));
        t.push(vec![*g, g.ln(), *w.as_ref().unwrap_or(&f64::NAN)]);
    }
    out.table("gap_width.csv", &t)?;
    layout.panels.push(Panel {
        name: "gap".into(),
        x_label: "gamma".into(),
        y_label: "gap width".into(),
        log_x: true,
        series: vec![Series::new("gap width", "gap_width.csv", "gamma", "gap_width", "line")],
    });
    layout.write(out)
}

fn fig5(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let (a0, a_i) = constants(cfg, out)?;
    let gammas: Vec<f64> = cfg.gamma_grid().into_iter().filter(|&g| g >= 10.0).collect();
    let mut layout = Layout { figure: "fig5".into(), title: "speed deficit against 1/(log gamma)^2".into(), panels: Vec::new() };
    for (v, a) in a_i {
        let consts = AsymptoticConstants { v_inf: v, a0, a_i: a, lambda: lambda_inner(v)? };
        let pts = branch_points(&gammas, v);
        for (g, p) in &pts {
            out.record(format!("matching V_inf={v} gamma={g:e}"), p.as_ref().map(|_| ()).map_err(Clone::clone));
        }
        let file = format!("matching_v{}.csv", vinf_tag(v));
        out.table(&file, &matching_table(&pts, &consts)?)?;
        layout.panels.push(Panel {
            name: format!("V_inf = {v}"),
            x_label: "1/(log gamma)^2".into(),
            y_label: "delta".into(),
            log_x: false,
            series: vec![
                Series::new("numerical", &file, "inv_log2", "delta_num", "marker"),
                Series::new("one term", &file, "inv_log2", "delta_one", "dashed"),
                Series::new("two terms", &file, "inv_log2", "delta_two", "line"),
            ],
        });
        layout.panels.push(Panel {
            name: format!("correction, V_inf = {v}"),
            x_label: "1/(log gamma)^2".into(),
            y_label: "delta - one term".into(),
            series: vec![Series::new("delta_1", &file, "inv_log2", "delta_1", "marker")],
            ..Panel::default()
        });
    }
    layout.write(out)
}

fn fig6(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    let v0 = cfg.model.v0;
    let rates = if cfg.sweep.a.is_empty() { vec![0.25, 0.325, 0.5] } else { cfg.sweep.a.clone() };
    let gammas = cfg.gamma_grid();
    let mut tails = vec![("compact".to_string(), InvaderTail::Compact)];
    tails.extend(rates.iter().map(|&a| (format!("a = {a}"), InvaderTail::Exponential { a })));

    let mut panel = Panel { name: "selection".into(), x_label: "gamma".into(), y_label: "c".into(), log_x: true, series: Vec::new() };
    for (k, (label, tail)) in tails.iter().enumerate() {
        let cs: Vec<std::result::Result<f64, String>> =
            gammas.par_iter().map(|&g| selected_speed(g, v0, *tail).map_err(|e| e.to_string())).collect();
        let mut t = Table::new(&["gamma", "c"]).with_meta("v0", v0).with_meta("tail", label);
        if let InvaderTail::Exponential { a } = tail {
            t = t.with_meta("dispersion_speed", dispersion_speed(*a, v0)?);
        }
        for (g, c) in gammas.iter().zip(&cs) {
            out.record(format!("selection {label} gamma={g:e}"), c.as_ref().map(|_| ()).map_err(Clone::clone));
            t.push(vec![*g, *c.as_ref().unwrap_or(&f64::NAN)]);
        }
        let file = format!("selection_{k}.csv");
        out.table(&file, &t)?;
        panel.series.push(Series::new(label.clone(), &file, "gamma", "c", if k == 0 { "line" } else { "dashed" }));
    }
    Layout { figure: "fig6".into(), title: format!("selected speed into v0 = {v0}"), panels: vec![panel] }.write(out)
}
