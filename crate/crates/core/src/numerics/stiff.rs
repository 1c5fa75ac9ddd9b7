//! TR-BDF2: a one-step, L-stable, second-order implicit scheme with an
//! embedded third-order error estimate. Stages are solved by simplified
//! Newton iteration on a banded iteration matrix.

use crate::error::{Error, Result};
use crate::numerics::banded::{BandLu, BandMatrix};
use crate::numerics::rk::Tolerances;

/// Semi-discrete system whose Jacobian is banded.
pub trait BandedSystem {
    fn dim(&self) -> usize;

    /// `(kl, ku)`: sub- and super-diagonal count of the Jacobian.
    fn bandwidth(&self) -> (usize, usize);

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Defaults to grouped one-sided differences: columns `j` and
    /// `j + kl + ku + 1` never share a row, so `kl + ku + 1` extra right-hand
    /// side evaluations fill the whole band. Each column is perturbed by
    /// `sqrt(eps) * (1 + |y_j|)`.
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut BandMatrix) {
        fd_jacobian(self, t, y, jac);
    }
}

pub fn fd_jacobian<S: BandedSystem + ?Sized>(sys: &S, t: f64, y: &[f64], jac: &mut BandMatrix) {
    let n = sys.dim();
    let (kl, ku) = sys.bandwidth();
    let groups = kl + ku + 1;
    let mut f0 = vec![0.0; n];
    sys.rhs(t, y, &mut f0);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut step = vec![0.0; n];
    jac.fill_zero();
    for g in 0..groups {
        for j in (g..n).step_by(groups) {
            step[j] = f64::EPSILON.sqrt() * (1.0 + y[j].abs());
            yp[j] = y[j] + step[j];
        }
        sys.rhs(t, &yp, &mut fp);
        for j in (g..n).step_by(groups) {
            for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                jac.set(i, j, (fp[i] - f0[i]) / step[j]);
            }
            yp[j] = y[j];
        }
    }
}

#[derive(Clone, Debug)]
pub struct StiffOptions {
    pub tol: Tolerances,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Times at which the state is recorded; steps land on them exactly.
    pub output_times: Vec<f64>,
}

impl Default for StiffOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::PDE,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
            output_times: Vec::new(),
        }
    }
}

/// Returned by the step observer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StiffStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_failures: usize,
    pub rhs_evals: usize,
    pub factorizations: usize,
}

#[derive(Clone, Debug)]
pub struct StiffSolution {
    pub outputs: Vec<(f64, Vec<f64>)>,
    pub t_final: f64,
    pub y_final: Vec<f64>,
    /// The observer asked to stop before `t_end`.
    pub stopped_early: bool,
    pub stats: StiffStats,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;
/// Location of the trapezoidal stage.
const GAMMA: f64 = 2.0 - SQRT2;
const D: f64 = GAMMA / 2.0;
const W: f64 = SQRT2 / 4.0;
// b - b_hat of the embedded third-order formula
const E0: f64 = (4.0 * W - 1.0) / 3.0;
const E1: f64 = -1.0 / 3.0;
const E2: f64 = 2.0 * D / 3.0;

fn scaled_inf_norm(v: &[f64], a: &[f64], b: &[f64], tol: Tolerances) -> f64 {
    v.iter()
        .zip(a.iter().zip(b))
        .map(|(e, (x, y))| (e / (tol.abs + tol.rel * x.abs().max(y.abs()))).abs())
        .fold(0.0, f64::max)
}

struct Workspace {
    f: Vec<f64>,
    r: Vec<f64>,
}

/// Solves `z = base + D h f(t, z)` by simplified Newton with factor `lu`.
#[allow(clippy::too_many_arguments)]
fn newton_stage<S: BandedSystem>(
    sys: &S,
    t: f64,
    h: f64,
    base: &[f64],
    z: &mut [f64],
    lu: &BandLu,
    tol: Tolerances,
    ws: &mut Workspace,
    stats: &mut StiffStats,
) -> bool {
    let mut prev = f64::INFINITY;
    for k in 0..8 {
        sys.rhs(t, z, &mut ws.f);
        stats.rhs_evals += 1;
        for i in 0..z.len() {
            ws.r[i] = base[i] + D * h * ws.f[i] - z[i];
        }
        lu.solve(&mut ws.r);
        for i in 0..z.len() {
            z[i] += ws.r[i];
        }
        let dn = scaled_inf_norm(&ws.r, z, z, tol);
        if !dn.is_finite() {
            return false;
        }
        if dn < 1e-2 {
            sys.rhs(t, z, &mut ws.f);
            stats.rhs_evals += 1;
            return true;
        }
        if k > 0 {
            let theta = dn / prev;
            if theta > 0.9 {
                return false;
            }
            if theta / (1.0 - theta) * dn < 1e-2 {
                sys.rhs(t, z, &mut ws.f);
                stats.rhs_evals += 1;
                return true;
            }
        }
        prev = dn;
    }
    false
}

/// Integrates `sys` from `span.0` to `span.1`. `observer` sees every accepted
/// step and may stop the run.
pub fn integrate_stiff<S, O>(
    sys: &S,
    y0: Vec<f64>,
    span: (f64, f64),
    opts: &StiffOptions,
    mut observer: O,
) -> Result<StiffSolution>
where
    S: BandedSystem,
    O: FnMut(f64, &[f64]) -> Control,
{
    let n = sys.dim();
    assert_eq!(y0.len(), n, "initial state has wrong length");
    let (t0, t_end) = span;
    if !(t_end > t0) {
        return Err(Error::Domain(format!("stiff integration needs t_end > t0 ({t0}, {t_end})")));
    }
    let (kl, ku) = sys.bandwidth();
    let tol = opts.tol;
    let mut out_times: Vec<f64> = opts.output_times.iter().copied().filter(|&t| t >= t0 && t <= t_end).collect();
    out_times.sort_by(f64::total_cmp);
    out_times.dedup();
    let mut next_out = 0;
    let mut outputs = Vec::new();
    while next_out < out_times.len() && out_times[next_out] <= t0 {
        outputs.push((t0, y0.clone()));
        next_out += 1;
    }

    let mut stats = StiffStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut f0 = vec![0.0; n];
    sys.rhs(t, &y, &mut f0);
    stats.rhs_evals += 1;
    let mut h = opts.h_init.min(t_end - t0);
    let h_min = 1e-14 * (t_end - t0).abs().max(1.0);

    let mut jac = BandMatrix::zeros(n, kl, ku);
    let mut ws = Workspace { f: vec![0.0; n], r: vec![0.0; n] };
    let mut z2 = vec![0.0; n];
    let mut z3 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut base = vec![0.0; n];
    let mut est = vec![0.0; n];
    let mut jac_fresh = false;

    while t < t_end {
        if stats.accepted >= opts.max_steps {
            return Err(Error::TooManySteps { max_steps: opts.max_steps, z: t });
        }
        let stop = if next_out < out_times.len() { out_times[next_out].min(t_end) } else { t_end };
        h = h.min(opts.h_max);
        let mut landing = false;
        if t + h >= stop - 1e-12 * stop.abs().max(1.0) {
            h = stop - t;
            landing = true;
        } else if t + 1.5 * h > stop {
            // avoid a sliver step before the stop
            h = 0.5 * (stop - t);
        }
        if h < h_min {
            return Err(Error::NewtonFailure { t });
        }

        if !jac_fresh {
            sys.jacobian(t, &y, &mut jac);
            jac_fresh = true;
        }
        let lu = BandLu::factor(jac.identity_minus(D * h))?;
        stats.factorizations += 1;

        // trapezoidal stage to t + GAMMA h
        for i in 0..n {
            base[i] = y[i] + D * h * f0[i];
            z2[i] = y[i] + GAMMA * h * f0[i];
        }
        if !newton_stage(sys, t + GAMMA * h, h, &base, &mut z2, &lu, tol, &mut ws, &mut stats) {
            stats.newton_failures += 1;
            h *= 0.25;
            continue;
        }
        f2.copy_from_slice(&ws.f);

        // BDF2 stage to t + h
        for i in 0..n {
            base[i] = y[i] + W * h * (f0[i] + f2[i]);
            z3[i] = y[i] + (z2[i] - y[i]) / GAMMA;
        }
        if !newton_stage(sys, t + h, h, &base, &mut z3, &lu, tol, &mut ws, &mut stats) {
            stats.newton_failures += 1;
            h *= 0.25;
            continue;
        }

        for i in 0..n {
            est[i] = h * (E0 * f0[i] + E1 * f2[i] + E2 * ws.f[i]);
        }
        lu.solve(&mut est);
        let err = scaled_inf_norm(&est, &y, &z3, tol);
        if !(err <= 1.0) {
            stats.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            continue;
        }

        stats.accepted += 1;
        t = if landing { stop } else { t + h };
        std::mem::swap(&mut y, &mut z3);
        f0.copy_from_slice(&ws.f);
        jac_fresh = false;
        if landing && next_out < out_times.len() && stop == out_times[next_out] {
            outputs.push((t, y.clone()));
            next_out += 1;
        }
        if observer(t, &y) == Control::Stop {
            return Ok(StiffSolution { outputs, t_final: t, y_final: y, stopped_early: true, stats });
        }
        let fac = (0.9 * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.2, 5.0);
        if !landing {
            h *= fac;
        } else {
            // a landing step may have been shortened; grow from the controller's choice
            h = h.max(h * fac);
        }
    }
    Ok(StiffSolution { outputs, t_final: t, y_final: y, stopped_early: false, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SlowManifold;
    impl BandedSystem for SlowManifold {
        fn dim(&self) -> usize {
            1
        }
        fn bandwidth(&self) -> (usize, usize) {
            (0, 0)
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -1e6 * (y[0] - t.cos());
        }
    }

    #[test]
    fn stiff_linear_tracks_slow_manifold() {
        let opts = StiffOptions { output_times: (0..=20).map(|k| 0.5 * f64::from(k)).collect(), ..Default::default() };
        let sol = integrate_stiff(&SlowManifold, vec![0.0], (0.0, 10.0), &opts, |_, _| Control::Continue).unwrap();
        for (t, y) in sol.outputs.iter().filter(|(t, _)| *t >= 0.5) {
            assert!((y[0] - t.cos()).abs() < 1e-4, "t = {t}: {} vs {}", y[0], t.cos());
        }
        // explicit stability would need ~ 5e6 steps
        assert!(sol.stats.accepted < 5_000, "{:?}", sol.stats);
    }

    /// Zero-flux heat equation on a cell-centred grid.
    struct Heat {
        n: usize,
        dx: f64,
    }
    impl BandedSystem for Heat {
        fn dim(&self) -> usize {
            self.n
        }
        fn bandwidth(&self) -> (usize, usize) {
            (1, 1)
        }
        fn rhs(&self, _: f64, y: &[f64], dy: &mut [f64]) {
            let k = 1.0 / (self.dx * self.dx);
            for i in 0..self.n {
                let left = if i > 0 { y[i - 1] - y[i] } else { 0.0 };
                let right = if i + 1 < self.n { y[i + 1] - y[i] } else { 0.0 };
                dy[i] = k * (left + right);
            }
        }
    }

    #[test]
    fn heat_equation_conserves_mass() {
        let sys = Heat { n: 100, dx: 0.1 };
        let y0: Vec<f64> = (0..100).map(|i| if (30..40).contains(&i) { 1.0 } else { 0.0 }).collect();
        let m0: f64 = y0.iter().sum();
        let opts = StiffOptions { output_times: vec![0.1, 1.0, 5.0], ..Default::default() };
        let sol = integrate_stiff(&sys, y0, (0.0, 5.0), &opts, |_, _| Control::Continue).unwrap();
        for (_, y) in &sol.outputs {
            let m: f64 = y.iter().sum();
            assert!((m - m0).abs() < 1e-10, "mass drift {}", m - m0);
        }
    }

    struct Logistic(usize);
    impl BandedSystem for Logistic {
        fn dim(&self) -> usize {
            self.0
        }
        fn bandwidth(&self) -> (usize, usize) {
            (0, 0)
        }
        fn rhs(&self, _: f64, y: &[f64], dy: &mut [f64]) {
            for i in 0..self.0 {
                dy[i] = y[i] * (1.0 - y[i]);
            }
        }
    }

    #[test]
    fn per_cell_logistic_matches_closed_form() {
        let y0: Vec<f64> = (1..=8).map(|k| 0.1 * f64::from(k)).collect();
        let opts = StiffOptions { output_times: vec![1.0, 3.0, 6.0], ..Default::default() };
        let sol = integrate_stiff(&Logistic(8), y0.clone(), (0.0, 6.0), &opts, |_, _| Control::Continue).unwrap();
        for (t, y) in &sol.outputs {
            for (u, u0) in y.iter().zip(&y0) {
                let exact = u0 / (u0 + (1.0 - u0) * (-t).exp());
                assert!((u - exact).abs() < 2e-5, "t = {t}: {u} vs {exact}");
            }
        }
    }

    #[test]
    fn tolerance_halving_converges() {
        let run = |rel: f64| {
            let opts = StiffOptions {
                tol: Tolerances { rel, abs: rel * 1e-3 },
                output_times: vec![4.0],
                ..Default::default()
            };
            let y0: Vec<f64> = (0..100).map(|i| (-(f64::from(i) * 0.1 - 3.0).powi(2)).exp()).collect();
            integrate_stiff(&Heat { n: 100, dx: 0.1 }, y0, (0.0, 4.0), &opts, |_, _| Control::Continue)
                .unwrap()
                .outputs[0]
                .1
                .clone()
        };
        let tol = 1e-6;
        let a = run(tol);
        let b = run(tol / 2.0);
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 10.0 * tol, "diff {diff}");
    }

    #[test]
    fn finite_difference_jacobian_matches_stencil() {
        let sys = Heat { n: 12, dx: 0.5 };
        let y: Vec<f64> = (0..12).map(|i| f64::from(i).sin()).collect();
        let mut jac = BandMatrix::zeros(12, 1, 1);
        fd_jacobian(&sys, 0.0, &y, &mut jac);
        assert!((jac.get(5, 5) + 8.0).abs() < 1e-5);
        assert!((jac.get(5, 6) - 4.0).abs() < 1e-5);
        assert!((jac.get(0, 0) + 4.0).abs() < 1e-5);
    }

    #[test]
    fn observer_can_stop() {
        let sys = Heat { n: 10, dx: 0.1 };
        let sol = integrate_stiff(&sys, vec![1.0; 10], (0.0, 1.0), &StiffOptions::default(), |t, _| {
            if t > 0.1 { Control::Stop } else { Control::Continue }
        })
        .unwrap();
        assert!(sol.stopped_early);
        assert!(sol.t_final > 0.1 && sol.t_final < 1.0);
    }
}
