//! Travelling waves `u(x, t) = U(z)`, `v(x, t) = V(z)`, `z = x - c t`:
//!
//! ```text
//! U' = W
//! V' = (gamma/c) U V
//! W' = [(gamma/c) U V W - c W - U (1 - U - V)] / (1 - V)
//! ```
//!
//! Orbits run from the rear equilibrium `(1, 0, 0)` to a point `(0, V_end, 0)`
//! of the V-axis. Two shooting directions are provided:
//!
//! * from the rear, forward in `z`, on the state `(U, log V, W)`; the seed
//!   mixes the two unstable rear eigenvectors and the orbit is followed onto
//!   the axis;
//! * from the front, backward in `z`, on `(log U, log V, W/U)`; the seed is
//!   the fast eigenvector at `(0, V_inf, 0)`, so the orbit is the tangent one
//!   by construction. Whether it reaches the rear equilibrium is read off from
//!   how it misses it: `U` overshooting 1 or turning back below 1.
//!
//! The front direction is the only one usable at large `gamma`, where the
//! rear eigenvalue `gamma/c` pushes any V seed below underflow.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{dispersion_speed, eig_front, eig_rear, v_critical};
use crate::numerics::rk::{integrate_adaptive, Direction, EventSpec, IvpProblem, Solution, Tolerances};
use crate::numerics::roots::bracket_root;

/// Overshoot margin above `U = 1`.
pub const U_GUARD: f64 = 1e-3;
/// Seed offset from an equilibrium.
pub const SEED_EPS: f64 = 1e-6;
/// Rear shots stop once `|U| + |W|` falls below this; the rest of the
/// approach to the axis is linear and summed in closed form.
pub const AXIS_ARRIVAL: f64 = 1e-7;
/// `z` budget for rear shots. The slow front eigenvalue can be as small as
/// `-0.05` in the sampled families, hence the generous value.
pub const REAR_Z_MAX: f64 = 400.0;

/// Integration window for front shots: `50 + 3 log gamma`, lengthened when
/// `gamma/c` is small because the approach to the rear is then slow.
pub fn z_max(gamma: f64, c: f64) -> f64 {
    50.0 + 3.0 * gamma.ln().max(0.0) + 10.0 * c / gamma
}

pub fn tw_rhs(point: [f64; 3], gamma: f64, c: f64) -> Result<[f64; 3]> {
    let [u, v, w] = point;
    if v == 1.0 {
        return Err(Error::Singularity("V = 1: the diffusivity 1 - V vanishes".into()));
    }
    let k = gamma / c;
    Ok([w, k * u * v, (k * u * v * w - c * w - u * (1.0 - u - v)) / (1.0 - v)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub z: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Spiral,
    NegApproach,
    Tangent,
    PosApproach,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Rear,
    Front,
}

/// How a rear shot ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RearEnd {
    /// Reached the linear neighbourhood of the V-axis.
    Axis,
    /// `U` fell below `-0.5`; the orbit is leaving through negative `U`.
    NegativeBlowup,
    /// `U` rose above `1 + U_GUARD`.
    Overshoot,
}

/// How a front shot missed the rear equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontMiss {
    /// `U` passed `1 + U_GUARD`.
    Overshoot,
    /// `U` turned back (`W = 0`) below 1.
    Undershoot,
}

impl FrontMiss {
    fn side(self) -> f64 {
        match self {
            FrontMiss::Overshoot => 1.0,
            FrontMiss::Undershoot => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TwTrajectory {
    pub gamma: f64,
    pub c: f64,
    pub origin: Origin,
    /// Accepted integration steps, ordered by integration direction.
    pub samples: Vec<PhasePoint>,
    /// Axis value reached (rear shots, extrapolated) or seeded (front shots).
    pub v_end: f64,
    pub rear_end: Option<RearEnd>,
    pub front_miss: Option<FrontMiss>,
    /// The orbit dipped below `U = -U_GUARD` on its way to the axis.
    pub dipped_below_guard: bool,
    sol: Solution,
}

impl TwTrajectory {
    fn to_phase(&self, z: f64, y: &[f64]) -> PhasePoint {
        to_phase(self.origin, z, y)
    }

    /// Dense-output point at `z`.
    pub fn at(&self, z: f64) -> Option<PhasePoint> {
        self.sol.eval(z).map(|y| self.to_phase(z, &y))
    }

    /// `(z_min, z_max)` of the computed piece.
    pub fn z_range(&self) -> (f64, f64) {
        let a = self.sol.z[0];
        let b = self.sol.last().0;
        (a.min(b), a.max(b))
    }

    /// `n` points evenly spaced in `z`, increasing.
    pub fn resample(&self, n: usize) -> Vec<PhasePoint> {
        let (a, b) = self.z_range();
        (0..n)
            .filter_map(|k| self.at(a + (b - a) * k as f64 / (n - 1).max(1) as f64))
            .collect()
    }
}

fn to_phase(origin: Origin, z: f64, y: &[f64]) -> PhasePoint {
    match origin {
        Origin::Rear => PhasePoint { z, u: y[0], v: y[1].exp(), w: y[2] },
        Origin::Front => {
            let u = y[0].exp();
            PhasePoint { z, u, v: y[1].exp(), w: y[2] * u }
        }
    }
}

fn finish(origin: Origin, gamma: f64, c: f64, sol: Solution) -> TwTrajectory {
    let samples = sol.z.iter().zip(&sol.y).map(|(&z, y)| to_phase(origin, z, y)).collect();
    TwTrajectory {
        gamma,
        c,
        origin,
        samples,
        v_end: f64::NAN,
        rear_end: None,
        front_miss: None,
        dipped_below_guard: false,
        sol,
    }
}

fn check_speed(gamma: f64, c: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return domain(format!("need gamma > 0 and c > 0, got ({gamma}, {c})"));
    }
    Ok(())
}

fn map_underflow(e: Error) -> Error {
    match e {
        Error::StepUnderflow { z, state, .. } => {
            Error::Singularity(format!("step size underflow at z = {z}, state {state:?}"))
        }
        other => other,
    }
}

/// Sums the remaining linear approach to the axis: along the linearisation
/// `log V_end - log V = (gamma/c) (W + 2 C U)` with `C` evaluated at `V_end`.
fn extrapolate_v_end(gamma: f64, c: f64, u: f64, v: f64, w: f64) -> f64 {
    let mut v_end = v;
    for _ in 0..50 {
        let cee = c / (2.0 * (1.0 - v_end));
        let next = v * ((gamma / c) * (w + 2.0 * cee * u)).exp();
        if (next - v_end).abs() <= 1e-15 * next {
            return next;
        }
        v_end = next.min(1.0 - 1e-12);
    }
    v_end
}

/// Shoots forward from `(1, 0, 0) - eps e2 + mix eps^(lambda1/lambda2) e1`,
/// where `e2` is the rear U-W unstable eigenvector and `e1` the resident one.
///
/// The resident mode grows at `lambda1 = gamma/c`, much faster than `e2`,
/// so a seed mixing the two at comparable size is swamped by `e1` long before
/// `U` leaves 1. Scaling the `e1` part by `eps^(lambda1/lambda2)` makes `mix`
/// a label of the orbit that does not depend on `eps`; the seed is stored as
/// `log V`, so the tiny power is representable.
pub fn shoot_from_rear(gamma: f64, c: f64, mix: f64, eps: f64) -> Result<TwTrajectory> {
    check_speed(gamma, c)?;
    if !(mix >= 0.0 && mix.is_finite()) {
        return domain(format!("mix must be finite and nonnegative, got {mix}"));
    }
    if !(1e-8..=1e-5).contains(&eps) {
        return domain(format!("seed offset {eps} outside [1e-8, 1e-5]"));
    }
    let eig = eig_rear(c, gamma)?;
    let log_amp = mix.ln() + (eig.lambda1 / eig.lambda2) * eps.ln();
    let amp = log_amp.exp();
    // V = exp(-1e4) is exactly zero: the invariant plane V = 0
    let s0 = if mix > 0.0 { log_amp + eig.e1[1].ln() } else { -1e4 };
    let y0 = vec![
        1.0 - eps * eig.e2[0] + amp * eig.e1[0],
        s0.max(-1e4),
        -eps * eig.e2[2] + amp * eig.e1[2],
    ];
    let k = gamma / c;
    let rhs = move |_z: f64, y: &[f64], dy: &mut [f64]| {
        let (u, w) = (y[0], y[2]);
        let v = y[1].exp();
        dy[0] = w;
        dy[1] = k * u;
        dy[2] = if v < 1.0 { (k * u * v * w - c * w - u * (1.0 - u - v)) / (1.0 - v) } else { f64::NAN };
    };
    let problem = IvpProblem::new(
        rhs,
        y0,
        (0.0, REAR_Z_MAX),
        Tolerances::SHOOTING,
    );
    let events = [
        EventSpec::new(|_, y| y[0].abs() + y[2].abs() - AXIS_ARRIVAL, Direction::Falling, true),
        EventSpec::new(|_, y| y[0] + 0.5, Direction::Falling, true),
        EventSpec::new(|_, y| y[0] - (1.0 + U_GUARD), Direction::Rising, true),
        EventSpec::new(|_, y| y[0] + U_GUARD, Direction::Falling, false),
    ];
    let sol = integrate_adaptive(&problem, &events).map_err(map_underflow)?;
    let dipped = sol.events.iter().any(|e| e.index == 3);
    let end = match sol.terminated_by {
        Some(0) => RearEnd::Axis,
        Some(1) => RearEnd::NegativeBlowup,
        Some(2) => RearEnd::Overshoot,
        _ => {
            let y = sol.last().1;
            if y[0].abs() + y[2].abs() < 1e-3 {
                RearEnd::Axis
            } else {
                return Err(Error::NoConvergence(format!(
                    "rear shot (gamma = {gamma}, c = {c}, mix = {mix}) did not reach the axis by z = {REAR_Z_MAX}"
                )));
            }
        }
    };
    let mut traj = finish(Origin::Rear, gamma, c, sol);
    let last = *traj.samples.last().expect("integrator returns the initial point");
    traj.v_end = if end == RearEnd::Axis { extrapolate_v_end(gamma, c, last.u, last.v, last.w) } else { last.v };
    traj.rear_end = Some(end);
    traj.dipped_below_guard = dipped;
    Ok(traj)
}

/// Shoots backward from `(0, V_inf, 0)` along the fast front eigenvector.
pub fn shoot_from_front(gamma: f64, c: f64, v_inf: f64, eps: f64) -> Result<TwTrajectory> {
    check_speed(gamma, c)?;
    if !(v_inf > 0.0 && v_inf < 1.0) {
        return domain(format!("V_inf must lie in (0, 1), got {v_inf}"));
    }
    let eig = eig_front(c, v_inf, gamma)?;
    let (_, e3) = eig
        .real_vectors()
        .ok_or_else(|| Error::Domain(format!("V_inf = {v_inf} is below V_c at c = {c}: front eigenvalues are complex")))?;
    let norm = e3.iter().map(|x| x * x).sum::<f64>().sqrt();
    // orient so that U > 0 (then V < V_inf and W < 0)
    let sgn = if e3[0] < 0.0 { -1.0 } else { 1.0 } / norm;
    let seed = [eps * sgn * e3[0], v_inf + eps * sgn * e3[1], eps * sgn * e3[2]];
    let k = gamma / c;
    let rhs = move |_z: f64, y: &[f64], dy: &mut [f64]| {
        let (q, p) = (y[0], y[2]);
        let u = q.exp();
        let v = y[1].exp();
        dy[0] = p;
        dy[1] = k * u;
        dy[2] = (k * v * p * u - c * p - (1.0 - u - v)) / (1.0 - v) - p * p;
    };
    let problem = IvpProblem::new(
        rhs,
        vec![seed[0].ln(), seed[1].ln(), seed[2] / seed[0]],
        (0.0, -z_max(gamma, c)),
        Tolerances::SHOOTING,
    );
    let events = [
        EventSpec::new(|_, y| y[2], Direction::Any, true),
        EventSpec::new(|_, y| y[0] - U_GUARD.ln_1p(), Direction::Any, true),
    ];
    let sol = integrate_adaptive(&problem, &events).map_err(map_underflow)?;
    let miss = match sol.terminated_by {
        Some(0) if sol.last().1[0] < 0.0 => FrontMiss::Undershoot,
        Some(_) => FrontMiss::Overshoot,
        None => {
            // still near the rear after the whole window: the sign of the
            // backward-growing rear mode decides
            let y = sol.last().1;
            let p = to_phase(Origin::Front, 0.0, y);
            let (_, a3) = rear_modes(gamma, c, [p.u, p.v, p.w])?;
            if a3 >= 0.0 {
                FrontMiss::Overshoot
            } else {
                FrontMiss::Undershoot
            }
        }
    };
    let mut traj = finish(Origin::Front, gamma, c, sol);
    traj.v_end = v_inf;
    traj.front_miss = Some(miss);
    Ok(traj)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xc) in x.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        *xc = det(mc) / d;
    }
    Some(x)
}

/// Coefficients of `point - (1, 0, 0)` on the rear eigenvectors. Returns the
/// pair `([a1, a2], a3)`: the approach modes and the backward-growing one.
fn rear_modes(gamma: f64, c: f64, point: [f64; 3]) -> Result<([f64; 2], f64)> {
    let eig = eig_rear(c, gamma)?;
    let e3 = eig.e3;
    let m = [
        [eig.e1[0], eig.e2[0], e3[0]],
        [eig.e1[1], eig.e2[1], e3[1]],
        [eig.e1[2], eig.e2[2], e3[2]],
    ];
    let a = solve3(m, [point[0] - 1.0, point[1], point[2]])
        .ok_or_else(|| Error::Singularity("rear eigenvectors are degenerate".into()))?;
    Ok(([a[0], a[1]], a[2]))
}

/// How far a front shot is from connecting to the rear equilibrium.
///
/// Near `(1, 0, 0)` the state splits into two approach modes (rates
/// `gamma/c` and `lambda2`) and one departing mode (`lambda3 < 0`, growing
/// backward in `z`). At the closest approach the departing coefficient is
/// carried along the linear flow to where the approach modes have unit size,
/// and the residual is `|U - 1| + |W|` of that departing part. It is zero for
/// an exact heteroclinic connection and independent of where the closest
/// approach happens to fall.
pub fn connection_residual(traj: &TwTrajectory) -> Result<f64> {
    if traj.origin != Origin::Front {
        return domain("connection residual is defined for front shots");
    }
    let closest = traj
        .samples
        .iter()
        .min_by(|a, b| dist_rear(a).total_cmp(&dist_rear(b)))
        .expect("nonempty trajectory");
    if dist_rear(closest) > 0.1 {
        return Ok(f64::INFINITY);
    }
    let eig = eig_rear(traj.c, traj.gamma)?;
    let ([a1, a2], a3) = rear_modes(traj.gamma, traj.c, [closest.u, closest.v, closest.w])?;
    // forward shift that brings the first approach mode to unit size
    let shift = [(a1, eig.lambda1), (a2, eig.lambda2)]
        .iter()
        .filter(|(a, _)| *a != 0.0)
        .map(|(a, l)| -a.abs().min(1.0).ln() / l)
        .fold(f64::INFINITY, f64::min);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let a3_ref = a3.abs() * (eig.lambda3 * shift).exp();
    Ok(a3_ref * (eig.e3[0].abs() + eig.e3[2].abs()))
}

fn dist_rear(p: &PhasePoint) -> f64 {
    (p.u - 1.0).abs() + p.v.abs() + p.w.abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailClassification {
    pub kind: TailKind,
    /// `-1`, `0` or `+1`.
    pub r2_sign: i8,
    pub r2: f64,
    pub r3: f64,
    /// Slow front eigenvalue at `V_end`.
    #[serde(skip)]
    pub approach: Complex64,
}

/// Classifies how an orbit meets the V-axis.
///
/// Near `(0, V_end, 0)` the orbit is `r2 E2' e^{lambda2' z} + r3 E3'
/// e^{lambda3' z}` with `E' = (lambda', ., lambda'^2)`. The pair `(r2, r3)` is
/// read off the last step whose `V` still differs from `V_end` by at least
/// `1e-6`, preferring steps within `1e-3` of it.
pub fn classify_tail(traj: &TwTrajectory) -> Result<TailClassification> {
    let eig = eig_front(traj.c, traj.v_end.min(1.0 - 1e-12), traj.gamma)?;
    if traj.origin == Origin::Front {
        return Ok(TailClassification { kind: TailKind::Tangent, r2_sign: 0, r2: 0.0, r3: 1.0, approach: eig.lambda2p });
    }
    match traj.rear_end {
        Some(RearEnd::Axis) => {}
        other => return Err(Error::InsufficientData(format!("orbit never reached the axis ({other:?})"))),
    }
    let vc = v_critical(traj.c)?.value;
    let spiral = TailClassification { kind: TailKind::Spiral, r2_sign: 0, r2: f64::NAN, r3: f64::NAN, approach: eig.lambda2p };
    if traj.v_end < vc {
        return Ok(spiral);
    }
    let Some((l2, l3)) = eig.real_pair() else {
        return Ok(spiral);
    };
    let gap = |p: &PhasePoint| (traj.v_end - p.v).abs();
    let pick = traj
        .samples
        .iter()
        .rev()
        .find(|p| (1e-6..=1e-3).contains(&gap(p)))
        .or_else(|| traj.samples.iter().rev().find(|p| gap(p) >= 1e-6))
        .ok_or_else(|| Error::InsufficientData("tail too short to separate the two decay modes".into()))?;
    // [l2 l3; l2^2 l3^2] [r2; r3] = [U; W]
    let det = l2 * l3 * (l3 - l2);
    let r2 = (pick.u * l3 * l3 - pick.w * l3) / det;
    let r3 = (pick.w * l2 - pick.u * l2 * l2) / det;
    let (kind, sign) = if r2.abs() < 1e-8 * (r2.abs() + r3.abs()) {
        (TailKind::Tangent, 0)
    } else if r2 > 0.0 {
        (TailKind::NegApproach, 1)
    } else {
        (TailKind::PosApproach, -1)
    };
    Ok(TailClassification { kind, r2_sign: sign, r2, r3, approach: Complex64::new(l2, 0.0) })
}

/// Which way a front shot misses, `+1` overshoot and `-1` undershoot.
fn front_side(gamma: f64, c: f64, v_inf: f64) -> Result<f64> {
    let t = shoot_from_front(gamma, c, v_inf, SEED_EPS)?;
    Ok(t.front_miss.expect("front shots record their miss").side())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VsSearch {
    /// The separating density, when one exists above `V_c`.
    pub value: Option<f64>,
    pub v_c: f64,
    /// No separation was found because every density searched, up to
    /// [`VS_UPPER`], still lies below `V_s`. Without this flag an absent
    /// value means `V_s` has merged with `V_c`.
    pub above_range: bool,
}

const VS_BRACKET_GAP: f64 = 1e-6;
pub const VS_UPPER: f64 = 0.99;

/// `V_s(gamma, c)` by bisection over `V_inf` with front shooting: the
/// tangent orbit at `V_inf` connects to the rear exactly when `V_inf = V_s`.
/// Below `V_s` it falls short of `U = 1`, above it overshoots.
pub fn find_vs(gamma: f64, c: f64) -> Result<VsSearch> {
    check_speed(gamma, c)?;
    let v_c = v_critical(c)?.value;
    let lo = v_c + VS_BRACKET_GAP;
    let (s_lo, s_hi) = (front_side(gamma, c, lo)?, front_side(gamma, c, VS_UPPER)?);
    if s_lo == s_hi {
        return Ok(VsSearch { value: None, v_c, above_range: s_hi == FrontMiss::Undershoot.side() });
    }
    let root = bracket_root(|v| front_side(gamma, c, v).unwrap_or(f64::NAN), lo, VS_UPPER, 1e-12)?;
    Ok(VsSearch { value: Some(root.x), v_c, above_range: false })
}

/// Cross-check of [`find_vs`] through rear shooting: bisects the mix
/// parameter on whether the orbit approaches the axis from `U > 0`.
pub fn find_vs_rear(gamma: f64, c: f64) -> Result<VsSearch> {
    check_speed(gamma, c)?;
    let v_c = v_critical(c)?.value;
    let positive = |log_mix: f64| -> Result<bool> {
        match shoot_from_rear(gamma, c, log_mix.exp(), SEED_EPS) {
            Ok(t) => Ok(match t.rear_end {
                Some(RearEnd::Axis) => classify_tail(&t)?.kind == TailKind::PosApproach,
                Some(RearEnd::Overshoot) => true,
                _ => false,
            }),
            // V driven into 1: far above any V_s
            Err(Error::Singularity(_)) => Ok(true),
            Err(e) => Err(e),
        }
    };
    let (lo, hi) = mix_bracket(gamma, c, |lm| positive(lm))?;
    let root = bracket_root(|lm| if positive(lm).unwrap_or(false) { 1.0 } else { -1.0 }, lo, hi, 1e-12)?;
    let below = shoot_from_rear(gamma, c, root.lo.exp(), SEED_EPS)?;
    let at = shoot_from_rear(gamma, c, root.hi.exp(), SEED_EPS)?;
    let kind = match below.rear_end {
        Some(RearEnd::Axis) => classify_tail(&below)?.kind,
        _ => TailKind::NegApproach,
    };
    let value = (kind == TailKind::NegApproach && below.v_end > v_c).then_some(0.5 * (below.v_end + at.v_end));
    Ok(VsSearch { value, v_c, above_range: false })
}

/// Bracket in `log mix` with `pred` false at the low end and true at the high end.
fn mix_bracket(gamma: f64, c: f64, pred: impl Fn(f64) -> Result<bool>) -> Result<(f64, f64)> {
    let mut lo = -60.0;
    if pred(lo)? {
        return Err(Error::NotBracketed(format!("rear family at (gamma, c) = ({gamma}, {c}) has no low side")));
    }
    let mut hi = lo;
    while hi < 60.0 {
        hi += 2.0;
        if pred(hi)? {
            return Ok((lo, hi));
        }
        lo = hi;
    }
    Err(Error::NotBracketed(format!("rear family at (gamma, c) = ({gamma}, {c}) has no high side")))
}

/// The rear-shot orbit whose axis value is `v_target`, by bisection on the
/// mix parameter. `V_end` is taken to increase with mix; every bisection
/// step checks that the bracket still straddles the target.
pub fn rear_orbit_to(gamma: f64, c: f64, v_target: f64) -> Result<TwTrajectory> {
    if !(v_target > 0.0 && v_target < 1.0) {
        return domain(format!("target V must lie in (0, 1), got {v_target}"));
    }
    let above = |log_mix: f64| -> Result<bool> {
        match shoot_from_rear(gamma, c, log_mix.exp(), SEED_EPS) {
            Ok(t) => Ok(match t.rear_end {
                Some(RearEnd::Axis) => t.v_end > v_target,
                Some(RearEnd::Overshoot) => true,
                _ => false,
            }),
            Err(Error::Singularity(_)) => Ok(true),
            Err(e) => Err(e),
        }
    };
    let (lo, hi) = mix_bracket(gamma, c, above)?;
    let mut failure = None;
    let root = bracket_root(
        |lm| match above(lm) {
            Ok(true) => 1.0,
            Ok(false) => -1.0,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-13,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root?;
    let lo_orbit = shoot_from_rear(gamma, c, root.lo.exp(), SEED_EPS)?;
    if lo_orbit.rear_end != Some(RearEnd::Axis) {
        return Err(Error::NoConvergence(format!("no axis-reaching rear orbit ends at V = {v_target}")));
    }
    Ok(lo_orbit)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    VcLimited,
    VsLimited,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub gamma: f64,
    pub c: f64,
    pub v_inf: f64,
    pub regime: Regime,
}

/// Speed `c` of the fastest-decaying wave into `V_inf`: the root of
/// `V_s(gamma, c) = V_inf` in `(2 (1 - V_inf), 2)`, or `2 (1 - V_inf)` when
/// that interval holds no root.
pub fn branch_speed(gamma: f64, v_inf: f64) -> Result<BranchPoint> {
    if !(gamma > 0.0) || !(v_inf > 0.0 && v_inf < 1.0) {
        return domain(format!("need gamma > 0 and V_inf in (0, 1), got ({gamma}, {v_inf})"));
    }
    let c_min = 2.0 * (1.0 - v_inf);
    let lo = c_min * (1.0 + 1e-7);
    let hi = 2.0 - 1e-7;
    let (s_lo, s_hi) = (front_side(gamma, lo, v_inf)?, front_side(gamma, hi, v_inf)?);
    if s_lo == s_hi {
        if s_lo == FrontMiss::Undershoot.side() {
            return Err(Error::NotBracketed(format!(
                "V_inf = {v_inf} lies below V_s for every c in ({lo}, {hi}) at gamma = {gamma}"
            )));
        }
        return Ok(BranchPoint { gamma, c: c_min, v_inf, regime: Regime::VcLimited });
    }
    let root = bracket_root(|c| front_side(gamma, c, v_inf).unwrap_or(f64::NAN), lo, hi, 1e-12)?;
    Ok(BranchPoint { gamma, c: root.x, v_inf, regime: Regime::VsLimited })
}

/// The travelling-wave orbit of a branch point.
pub fn branch_orbit(bp: &BranchPoint) -> Result<TwTrajectory> {
    match bp.regime {
        Regime::VsLimited => shoot_from_front(bp.gamma, bp.c, bp.v_inf, SEED_EPS),
        Regime::VcLimited => rear_orbit_to(bp.gamma, bp.c, bp.v_inf),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InvaderTail {
    Compact,
    Exponential { a: f64 },
}

/// Long-time speed from an initial condition. An exponential tail `e^{-a x}`
/// keeps its dispersion speed unless that wave does not exist, which happens
/// when `V_s` at that speed lies above `v0`; the compact-support speed then
/// takes over.
pub fn selected_speed(gamma: f64, v0: f64, tail: InvaderTail) -> Result<f64> {
    let compact = || -> Result<f64> {
        if v0 == 0.0 {
            return Ok(2.0);
        }
        Ok(branch_speed(gamma, v0)?.c)
    };
    match tail {
        InvaderTail::Compact => compact(),
        InvaderTail::Exponential { a } => {
            let c = dispersion_speed(a, v0)?;
            // every V_s-limited branch stays below c = 2
            if c >= 2.0 || v0 == 0.0 {
                return Ok(c);
            }
            let vs = find_vs(gamma, c)?;
            match vs.value {
                Some(v) if v > v0 => compact(),
                None if vs.above_range => compact(),
                _ => Ok(c),
            }
        }
    }
}

/// Width of the region where both populations are small:
/// `z(V = theta V_end) - z(U = theta)`.
pub fn gap_width(traj: &TwTrajectory, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 0.1) {
        return domain(format!("threshold must lie in (0, 0.1], got {theta}"));
    }
    if !(traj.v_end > 0.0) {
        return Err(Error::NoCrossing("orbit carries no resident population".into()));
    }
    let (zu, zv) = match traj.origin {
        Origin::Front => (
            traj.sol.crossings(|_, y| y[0], theta.ln()),
            traj.sol.crossings(|_, y| y[1], (theta * traj.v_end).ln()),
        ),
        Origin::Rear => (
            traj.sol.crossings(|_, y| y[0], theta),
            traj.sol.crossings(|_, y| y[1], (theta * traj.v_end).ln()),
        ),
    };
    match (zu.first(), zv.first()) {
        (Some(u), Some(v)) => Ok(v - u),
        _ => Err(Error::NoCrossing(format!("U = {theta} or V = {theta} V_end not reached"))),
    }
}

/// Largest distance from a point of `curve` to the `(U, V)` polyline of
/// `traj` resampled at `n` points.
pub fn phase_distance(curve: &[(f64, f64)], traj: &TwTrajectory, n: usize) -> Result<f64> {
    let line: Vec<(f64, f64)> = traj.resample(n.max(2)).iter().map(|p| (p.u, p.v)).collect();
    if line.len() < 2 || curve.is_empty() {
        return Err(Error::InsufficientData("empty curve or trajectory".into()));
    }
    let seg = |p: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let s = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        (p.0 - a.0 - s * dx).hypot(p.1 - a.1 - s * dy)
    };
    Ok(curve
        .iter()
        .map(|&p| line.windows(2).map(|w| seg(p, w[0], w[1])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}
