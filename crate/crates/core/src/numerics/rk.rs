//! Dormand-Prince 5(4) with continuous extension and event location.

use crate::error::{Error, Result};
use crate::numerics::roots::bracket_root;

/// Relative and absolute error targets for adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    pub const SHOOTING: Tolerances = Tolerances { rel: 1e-8, abs: 1e-10 };
    pub const PDE: Tolerances = Tolerances { rel: 1e-6, abs: 1e-9 };

    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        if !(rel > 0.0 && abs >= 0.0) {
            return Err(Error::Domain(format!("tolerances must be positive (rel {rel}, abs {abs})")));
        }
        Ok(Self { rel, abs })
    }
}

/// Initial value problem `y' = rhs(z, y)` on `span`, which may run backwards.
pub struct IvpProblem<F> {
    pub rhs: F,
    pub y0: Vec<f64>,
    pub span: (f64, f64),
    pub tol: Tolerances,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl<F> IvpProblem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(rhs: F, y0: Vec<f64>, span: (f64, f64), tol: Tolerances) -> Self {
        Self { rhs, y0, span, tol, h_init: None, h_max: None, max_steps: 200_000 }
    }
}

/// Sign convention for event crossings, taken along the direction of integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

pub struct EventSpec<'a> {
    pub func: Box<dyn Fn(f64, &[f64]) -> f64 + 'a>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a> EventSpec<'a> {
    pub fn new(func: impl Fn(f64, &[f64]) -> f64 + 'a, direction: Direction, terminal: bool) -> Self {
        Self { func: Box::new(func), direction, terminal }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    /// Index into the event list passed to the integrator.
    pub index: usize,
    pub z: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug)]
struct DenseSegment {
    z0: f64,
    /// Signed step.
    h: f64,
    /// Five coefficient rows of length `dim`.
    coef: Vec<f64>,
}

impl DenseSegment {
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        let n = out.len();
        let (r1, rest) = self.coef.split_at(n);
        let (r2, rest) = rest.split_at(n);
        let (r3, rest) = rest.split_at(n);
        let (r4, r5) = rest.split_at(n);
        let t1 = 1.0 - theta;
        for i in 0..n {
            out[i] = r1[i] + theta * (r2[i] + t1 * (r3[i] + theta * (r4[i] + t1 * r5[i])));
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Accepted steps of an integration plus the continuous extension between them.
#[derive(Clone, Debug)]
pub struct Solution {
    pub z: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub events: Vec<EventRecord>,
    /// Index of the terminal event that stopped the run, if any.
    pub terminated_by: Option<usize>,
    pub stats: Stats,
    segments: Vec<DenseSegment>,
}

impl Solution {
    pub fn dim(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> (f64, &[f64]) {
        let k = self.z.len() - 1;
        (self.z[k], &self.y[k])
    }

    fn segment_at(&self, z: f64) -> Option<(usize, f64)> {
        if self.segments.is_empty() {
            return None;
        }
        let forward = self.segments[0].h > 0.0;
        // segments are ordered along the direction of integration
        let k = self.segments.partition_point(|s| {
            let end = s.z0 + s.h;
            if forward { end < z } else { end > z }
        });
        let s = self.segments.get(k)?;
        let theta = (z - s.z0) / s.h;
        (-1e-12..=1.0 + 1e-12).contains(&theta).then_some((k, theta.clamp(0.0, 1.0)))
    }

    /// Dense-output state at `z`; `None` outside the integrated range.
    pub fn eval(&self, z: f64) -> Option<Vec<f64>> {
        let (k, theta) = self.segment_at(z)?;
        let mut out = vec![0.0; self.dim()];
        self.segments[k].eval_into(theta, &mut out);
        Some(out)
    }

    /// Every crossing of `g(z, y) = level` along the solution, located on the
    /// continuous extension.
    pub fn crossings<G>(&self, g: G, level: f64) -> Vec<f64>
    where
        G: Fn(f64, &[f64]) -> f64,
    {
        let n = self.dim();
        let mut out = Vec::new();
        let mut buf = vec![0.0; n];
        for seg in &self.segments {
            let ga = g(seg.z0, {
                seg.eval_into(0.0, &mut buf);
                &buf
            }) - level;
            let gb = g(seg.z0 + seg.h, {
                seg.eval_into(1.0, &mut buf);
                &buf
            }) - level;
            if ga == 0.0 {
                if out.last() != Some(&seg.z0) {
                    out.push(seg.z0);
                }
                continue;
            }
            if ga.signum() != gb.signum() {
                let mut tmp = vec![0.0; n];
                let f = |theta: f64| {
                    seg.eval_into(theta, &mut tmp);
                    g(seg.z0 + theta * seg.h, &tmp) - level
                };
                if let Ok(r) = bracket_root(f, 0.0, 1.0, 1e-13 / seg.h.abs().max(1e-300)) {
                    out.push(seg.z0 + r.x * seg.h);
                }
            }
        }
        out
    }
}

// Dormand-Prince coefficients
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn rms_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: Tolerances) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `problem` with adaptive Dormand-Prince steps, locating `events`
/// on the continuous extension. Terminal events end the integration at the
/// event location.
pub fn integrate_adaptive<F>(problem: &IvpProblem<F>, events: &[EventSpec<'_>]) -> Result<Solution>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = problem.y0.len();
    let (z_start, z_end) = problem.span;
    let dir = if z_end >= z_start { 1.0 } else { -1.0 };
    let span_len = (z_end - z_start).abs();
    let tol = problem.tol;
    let f = &problem.rhs;

    let mut sol = Solution {
        z: vec![z_start],
        y: vec![problem.y0.clone()],
        events: Vec::new(),
        terminated_by: None,
        stats: Stats::default(),
        segments: Vec::new(),
    };
    if span_len == 0.0 {
        return Ok(sol);
    }

    let mut z = z_start;
    let mut y = problem.y0.clone();
    let mut k1 = vec![0.0; n];
    f(z, &y, &mut k1);
    sol.stats.rhs_evals += 1;
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepUnderflow { z, h: 0.0, state: y });
    }

    let h_max = problem.h_max.unwrap_or(span_len).min(span_len);
    let mut h = match problem.h_init {
        Some(h) => h.abs().min(h_max),
        None => initial_step(f, z, &y, &k1, dir, tol, h_max),
    };

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.func)(z, &y)).collect();
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut rejected_last = false;

    loop {
        if sol.stats.accepted >= problem.max_steps {
            return Err(Error::TooManySteps { max_steps: problem.max_steps, z });
        }
        let remaining = (z_end - z).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < 1e-14 * z.abs().max(1.0) {
            return Err(Error::StepUnderflow { z, h, state: y });
        }
        let hs = dir * h;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        f(z + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(z + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(z + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(z + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(z + hs, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(z + hs, &ynew, &mut k7);
        sol.stats.rhs_evals += 6;
        for i in 0..n {
            err[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let mut e = rms_norm(&err, &y, &ynew, tol);
        if !e.is_finite() || ynew.iter().chain(&k7).any(|v| !v.is_finite()) {
            e = f64::INFINITY;
        }

        if e > 1.0 {
            sol.stats.rejected += 1;
            let fac = if e.is_finite() { (0.9 * e.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            rejected_last = true;
            continue;
        }

        // continuous extension
        let mut coef = vec![0.0; 5 * n];
        for i in 0..n {
            let ydiff = ynew[i] - y[i];
            let bspl = hs * k1[i] - ydiff;
            coef[i] = y[i];
            coef[n + i] = ydiff;
            coef[2 * n + i] = bspl;
            coef[3 * n + i] = ydiff - hs * k7[i] - bspl;
            coef[4 * n + i] = hs
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let seg = DenseSegment { z0: z, h: hs, coef };
        let z_new = if last { z_end } else { z + hs };

        // events inside this step
        let g_new: Vec<f64> = events.iter().map(|ev| (ev.func)(z_new, &ynew)).collect();
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for (idx, ev) in events.iter().enumerate() {
            let (ga, gb) = (g_prev[idx], g_new[idx]);
            let crossed = match ev.direction {
                Direction::Rising => ga < 0.0 && gb >= 0.0,
                Direction::Falling => ga > 0.0 && gb <= 0.0,
                Direction::Any => (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0),
            };
            if crossed {
                let mut buf = vec![0.0; n];
                let root = bracket_root(
                    |theta| {
                        seg.eval_into(theta, &mut buf);
                        (ev.func)(z + theta * hs, &buf)
                    },
                    0.0,
                    1.0,
                    1e-12 / h.max(1e-300),
                );
                let theta = match root {
                    Ok(r) => r.hi.min(1.0),
                    // the interpolant missed the sign change; attribute it to the step end
                    Err(_) => 1.0,
                };
                hits.push((theta, idx));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut stop_at: Option<(f64, usize)> = None;
        for &(theta, idx) in &hits {
            if let Some((t_stop, _)) = stop_at {
                if theta > t_stop {
                    break;
                }
            }
            let mut ye = vec![0.0; n];
            seg.eval_into(theta, &mut ye);
            sol.events.push(EventRecord { index: idx, z: z + theta * hs, y: ye });
            if events[idx].terminal && stop_at.is_none() {
                stop_at = Some((theta, idx));
            }
        }

        sol.stats.accepted += 1;
        if let Some((theta, idx)) = stop_at {
            let mut ye = vec![0.0; n];
            seg.eval_into(theta, &mut ye);
            let ze = z + theta * hs;
            sol.segments.push(DenseSegment { z0: seg.z0, h: seg.h, coef: seg.coef });
            sol.z.push(ze);
            sol.y.push(ye);
            sol.terminated_by = Some(idx);
            return Ok(sol);
        }
        sol.segments.push(seg);
        sol.z.push(z_new);
        sol.y.push(ynew.clone());
        if last {
            return Ok(sol);
        }

        z = z_new;
        std::mem::swap(&mut y, &mut ynew);
        std::mem::swap(&mut k1, &mut k7);
        g_prev = g_new;

        let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
        fac = fac.clamp(0.2, 10.0);
        if rejected_last {
            fac = fac.min(1.0);
        }
        rejected_last = false;
        h = (h * fac).min(h_max);
    }
}

fn initial_step<F>(f: &F, z: f64, y: &[f64], f0: &[f64], dir: f64, tol: Tolerances, h_max: f64) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
    let norm = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(z + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1).min(h_max);
    if h.is_finite() && h > 0.0 { h } else { 1e-6 }
}
