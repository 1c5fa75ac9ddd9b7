//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. PDE runs are shared between criteria and computed up front.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use invasion_core::asym::{asymptotic_constants, inner_wave, outer_wave, outer_wave_from, validate_matching};
use invasion_core::model::{dispersion_speed, eig_front, eig_rear, ModelParams};
use invasion_core::pde::{phase_curve, run, Grid1D, InitialCondition, PdeRun, RunOptions};
use invasion_core::speedfit::{default_window, fit_speed, fit_speed_linear, SpeedFit};
use invasion_core::tw::*;

type Outcome = Result<String, String>;

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Clone, Copy, Hash, PartialEq, Eq, Debug)]
enum Job {
    Fig1a,
    Fig1b,
    Dispersion,
    FisherKpp,
    Fig3c,
    Fig3d,
    Fig1aCoarse,
}

impl Job {
    const ALL: [Job; 7] =
        [Job::Fig1a, Job::Fig1b, Job::Dispersion, Job::FisherKpp, Job::Fig3c, Job::Fig3d, Job::Fig1aCoarse];

    fn setup(self) -> (f64, InitialCondition, usize) {
        match self {
            Job::Fig1a => (1.0, InitialCondition::compact(0.5), 6000),
            Job::Fig1b => (10.0, InitialCondition::compact(0.5), 6000),
            Job::Dispersion => (1.0, InitialCondition::exponential(0.25, 0.5), 6000),
            Job::FisherKpp => (1.0, InitialCondition::compact(0.0), 6000),
            Job::Fig3c => (1.0, InitialCondition::exponential(0.27, 0.75), 6000),
            Job::Fig3d => (10.0, InitialCondition::exponential(0.21, 0.75), 6000),
            Job::Fig1aCoarse => (1.0, InitialCondition::compact(0.5), 3000),
        }
    }

    fn run(self) -> Result<PdeRun, String> {
        let (gamma, ic, cells) = self.setup();
        let opts = RunOptions { output_times: (1..=6).map(|k| 10.0 * k as f64).collect(), ..RunOptions::default() };
        run(ModelParams::new(gamma, ic.v0).map_err(fail)?, ic, Grid1D::new(150.0, cells).map_err(fail)?, 60.0, &opts)
            .and_then(|r| r.check_contained())
            .map_err(fail)
    }
}

struct Runs(HashMap<Job, Result<PdeRun, String>>);

impl Runs {
    fn get(&self, job: Job) -> Result<&PdeRun, String> {
        self.0[&job].as_ref().map_err(|e| format!("{job:?} run failed: {e}"))
    }

    fn fit(&self, job: Job) -> Result<SpeedFit, String> {
        let r = self.get(job)?;
        let w = default_window(&r.trace, 0.9 * r.grid.length).map_err(fail)?;
        fit_speed(&r.trace, w).map_err(fail)
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    let msg = format!("{name} = {got:.6} (want {want:.4} +- {tol:.3})");
    if (got - want).abs() <= tol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let ok = parts.iter().all(|p| p.is_ok());
    let text = parts.into_iter().map(|p| p.unwrap_or_else(|e| format!("!! {e}"))).collect::<Vec<_>>().join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn c1(runs: &Runs) -> Outcome {
    all(vec![
        runs.fit(Job::Fig1a).and_then(|f| within("c(gamma=1)", f.c, 1.00, 0.03)),
        runs.fit(Job::Fig1b).and_then(|f| within("c(gamma=10)", f.c, 1.24, 0.03)),
    ])
}

fn c2(runs: &Runs) -> Outcome {
    let want = dispersion_speed(0.25, 0.5).map_err(fail)?;
    runs.fit(Job::Dispersion).and_then(|f| within("c(a=0.25)", f.c, want, 0.05))
}

fn c3(runs: &Runs) -> Outcome {
    let f = runs.fit(Job::FisherKpp)?;
    all(vec![within("c", f.c, 2.0, 0.05), within("k0", f.k0, -1.5, 0.3)])
}

fn c4() -> Outcome {
    let mut parts = vec![
        branch_speed(1.0, 0.5).map_err(fail).and_then(|b| within("c(1, 0.5)", b.c, 1.00, 0.01)),
        branch_speed(10.0, 0.5).map_err(fail).and_then(|b| within("c(10, 0.5)", b.c, 1.24, 0.01)),
    ];
    for v in [0.25, 0.5, 0.75] {
        parts.push(branch_speed(0.1, v).map_err(fail).and_then(|b| within(&format!("c(0.1, {v})"), b.c, 2.0 * (1.0 - v), 0.01)));
    }
    all(parts)
}

fn c5() -> Outcome {
    let mut parts = vec![outer_wave(1e-6).map_err(fail).and_then(|w| within("A0", w.a0, 0.1419, 5e-4))];
    for (v, want) in [(0.25, 0.515), (0.5, 1.485), (0.75, 2.943)] {
        parts.push(inner_wave(v, 1e-6).map_err(fail).and_then(|w| within(&format!("A_I({v})"), w.a_i, want, 5e-3 * want)));
    }
    all(parts)
}

fn c6() -> Outcome {
    let consts = asymptotic_constants(0.5).map_err(fail)?;
    let mut parts = Vec::new();
    let mut dist = Vec::new();
    for g in [1e4, 1e6, 1e8] {
        let bp = branch_speed(g, 0.5).map_err(fail)?;
        let r = validate_matching(&bp, &consts).map_err(fail)?;
        let msg = format!("gamma={g:e}: ratio {:.4}, |err2| {:.2e} vs |err1| {:.2e}", r.ratio, r.err_two.abs(), r.err_one.abs());
        let ok = r.err_two.abs() < r.err_one.abs() && (0.7..=1.3).contains(&r.ratio);
        parts.push(if ok { Ok(msg) } else { Err(msg) });
        dist.push((r.ratio - 1.0).abs());
    }
    let trend = if dist.windows(2).all(|d| d[1] < d[0]) {
        Ok("ratio approaches 1 monotonically".to_string())
    } else {
        Err(format!("|ratio - 1| not decreasing: {dist:?}"))
    };
    parts.push(trend);
    all(parts)
}

fn gap(g: f64) -> Result<f64, String> {
    let bp = branch_speed(g, 0.5).map_err(fail)?;
    gap_width(&branch_orbit(&bp).map_err(fail)?, 0.05).map_err(fail)
}

fn c7() -> Outcome {
    let d = gap(1e8)? - gap(1e4)?;
    within("gap(1e8) - gap(1e4)", d, 9.2, 2.0)
}

fn c8(runs: &Runs) -> Outcome {
    let case = |name: &str, job: Job, traj: Result<TwTrajectory, String>| -> Outcome {
        let traj = traj?;
        let r = runs.get(job)?;
        let d = phase_distance(&phase_curve(&r.final_state), &traj, 4000).map_err(fail)?;
        let msg = format!("({name}) c={:.4} sup {d:.2e}", traj.c);
        if d <= 0.02 {
            Ok(msg)
        } else {
            Err(msg)
        }
    };
    let exp_orbit = |g: f64, v0: f64, a: f64| -> Result<TwTrajectory, String> {
        let c = selected_speed(g, v0, InvaderTail::Exponential { a }).map_err(fail)?;
        rear_orbit_to(g, c, v0).map_err(fail)
    };
    let branch = |g: f64| branch_speed(g, 0.5).and_then(|b| branch_orbit(&b)).map_err(fail);
    all(vec![
        case("a", Job::Fig1a, branch(1.0)),
        case("b", Job::Fig1b, branch(10.0)),
        case("c", Job::Fig3c, exp_orbit(1.0, 0.75, 0.27)),
        case("d", Job::Fig3d, exp_orbit(10.0, 0.75, 0.21)),
    ])
}

fn eigen_residuals() -> Outcome {
    let mut worst = 0.0f64;
    for &c in &[0.3, 0.8, 1.24, 1.9, 2.5] {
        for &g in &[0.1, 1.0, 10.0, 1e4] {
            let e = eig_rear(c, g).map_err(fail)?;
            let j = [[0.0, 0.0, 1.0], [0.0, g / c, 0.0], [1.0, 1.0, -c]];
            for (l, v) in [(e.lambda1, e.e1), (e.lambda2, e.e2), (e.lambda3, e.e3)] {
                worst = worst.max(real_residual(j, l, v));
            }
            for &vi in &[0.1, 0.5, 0.9] {
                let f = eig_front(c, vi, g).map_err(fail)?;
                if let (Some((l2, l3)), Some((e2, e3))) = (f.real_pair(), f.real_vectors()) {
                    let j = [[0.0, 0.0, 1.0], [g * vi / c, 0.0, 0.0], [-1.0, 0.0, -c / (1.0 - vi)]];
                    worst = worst.max(real_residual(j, l2, e2)).max(real_residual(j, l3, e3));
                }
            }
        }
    }
    let msg = format!("eigen residual {worst:.1e}");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn real_residual(j: [[f64; 3]; 3], l: f64, v: [f64; 3]) -> f64 {
    let jn = j.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let vn = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (0..3)
        .map(|r| ((0..3).map(|k| j[r][k] * v[k]).sum::<f64>() - l * v[r]).abs())
        .fold(0.0, f64::max)
        / ((jn + l.abs()) * vn)
}

fn pde_invariants(runs: &Runs) -> Outcome {
    let mut parts = Vec::new();
    for job in [Job::Fig1a, Job::Fig1b, Job::Fig3d] {
        let r = runs.get(job)?;
        let mut prev = &r.states[0].v;
        let (mut grew, mut negative) = (0.0f64, 0.0f64);
        for s in &r.states {
            for (a, b) in prev.iter().zip(&s.v) {
                grew = grew.max(b - a);
            }
            negative = negative.max(s.u.iter().chain(&s.v).fold(0.0f64, |m, &x| m.max(-x)));
            prev = &s.v;
        }
        let msg = format!("{job:?}: v growth {grew:.1e}, negativity {negative:.1e}");
        parts.push(if grew <= 1e-12 && negative <= 1e-6 { Ok(msg) } else { Err(msg) });
    }
    let (fine, coarse) = (runs.fit(Job::Fig1a)?, runs.fit(Job::Fig1aCoarse)?);
    let rel = ((coarse.c - fine.c) / fine.c).abs();
    let msg = format!("refinement {:.2}%", 100.0 * rel);
    parts.push(if rel <= 5e-3 { Ok(msg) } else { Err(msg) });
    all(parts)
}

fn fit_properties(runs: &Runs) -> Outcome {
    let mut parts = Vec::new();
    let r = runs.get(Job::Fig1a)?;
    let t_end = r.trace.t_end().unwrap_or(0.0);
    let cs: Vec<f64> = [0.4, 0.5, 0.6]
        .iter()
        .map(|f| fit_speed(&r.trace, (f * t_end, t_end)).map(|s| s.c).map_err(fail))
        .collect::<Result<_, _>>()?;
    let spread = cs.iter().fold(0.0f64, |m, c| m.max((c - cs[1]).abs()));
    let msg = format!("window spread {spread:.1e}");
    parts.push(if spread <= 0.01 { Ok(msg) } else { Err(msg) });
    for job in [Job::Fig1a, Job::Fig1b] {
        let r = runs.get(job)?;
        let w = default_window(&r.trace, 0.9 * r.grid.length).map_err(fail)?;
        let (log, lin) = (fit_speed(&r.trace, w).map_err(fail)?, fit_speed_linear(&r.trace, w).map_err(fail)?);
        let msg = format!("{job:?} rms {:.1e} < {:.1e}", log.rms, lin.rms);
        parts.push(if log.rms < lin.rms { Ok(msg) } else { Err(msg) });
    }
    all(parts)
}

fn shooting_cross_check() -> Outcome {
    let bp = branch_speed(10.0, 0.5).map_err(fail)?;
    let front = branch_orbit(&bp).map_err(fail)?;
    let rear = rear_orbit_to(10.0, bp.c, 0.5).map_err(fail)?;
    let mut sup = 0.0f64;
    for k in 1..100 {
        let lv = k as f64 / 100.0;
        let (a, b) = (level_point(&front, lv)?, level_point(&rear, lv)?);
        sup = sup.max((a.v - b.v).abs()).max((a.w - b.w).abs());
    }
    let vs = find_vs(10.0, 1.24).map_err(fail)?.value;
    let vs_rear = find_vs_rear(10.0, 1.24).map_err(fail)?.value;
    let agree = match (vs, vs_rear) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    let msg = format!("front/rear orbit sup {sup:.1e}, V_s agreement {agree:.1e}");
    if sup <= 1e-5 && agree <= 1e-5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn level_point(t: &TwTrajectory, level: f64) -> Result<PhasePoint, String> {
    let mut pts = t.samples.clone();
    pts.sort_by(|a, b| a.z.total_cmp(&b.z));
    let i = pts
        .windows(2)
        .position(|w| w[0].u >= level && w[1].u < level)
        .ok_or_else(|| format!("U = {level} not crossed"))?;
    let (mut a, mut b) = (pts[i].z, pts[i + 1].z);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if t.at(m).ok_or("dense output")?.u >= level {
            a = m;
        } else {
            b = m;
        }
    }
    t.at(0.5 * (a + b)).ok_or_else(|| "dense output".into())
}

fn translation_invariance() -> Outcome {
    let w = outer_wave(1e-6).map_err(fail)?;
    let mut worst = 0.0f64;
    for frac in [0.2, 0.4, 0.6, 0.8] {
        let p = w.samples[((w.samples.len() - 1) as f64 * frac) as usize];
        worst = worst.max((outer_wave_from(p.u, p.w).map_err(fail)?.a0 - w.a0).abs());
    }
    let msg = format!("A0 restart spread {worst:.1e}");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9(runs: &Runs) -> Outcome {
    all(vec![eigen_residuals(), pde_invariants(runs), fit_properties(runs), shooting_cross_check(), translation_invariance()])
}

fn c10() -> Outcome {
    let bp = branch_speed(1e4, 0.5).map_err(fail)?;
    all(vec![
        selected_speed(1e4, 0.5, InvaderTail::Exponential { a: 0.5 })
            .map_err(fail)
            .and_then(|c| within("selected(a=0.5)", c, bp.c, 0.01)),
        selected_speed(1e4, 0.5, InvaderTail::Exponential { a: 0.25 })
            .map_err(fail)
            .and_then(|c| within("selected(a=0.25)", c, 2.125, 0.01)),
    ])
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = Runs(std::thread::scope(|s| {
        let handles: Vec<_> = Job::ALL.iter().map(|&j| (j, s.spawn(move || j.run()))).collect();
        handles.into_iter().map(|(j, h)| (j, h.join().unwrap_or_else(|_| Err("worker panicked".into())))).collect()
    }));
    eprintln!("PDE runs finished in {:.1?}", start.elapsed());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 PDE front speed, compact data", Box::new(|| c1(&runs))),
        ("2 dispersion speed, exponential data", Box::new(|| c2(&runs))),
        ("3 Fisher-KPP reduction", Box::new(|| c3(&runs))),
        ("4 travelling-wave branch speeds", Box::new(c4)),
        ("5 asymptotic constants", Box::new(c5)),
        ("6 matching quality", Box::new(c6)),
        ("7 gap-width scaling", Box::new(c7)),
        ("8 phase-plane consistency", Box::new(|| c8(&runs))),
        ("9 property invariants", Box::new(|| c9(&runs))),
        ("10 speed selection", Box::new(c10)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail}");
            }
        }
    }
    println!("{} of {} criteria passed ({:.1?})", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
