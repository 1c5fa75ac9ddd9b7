//! Large-`gamma` constants: the outer Fisher-KPP tail prefactor `A0`, the
//! inner front-layer prefactor `A_I(V_inf)`, and the speed deficit they
//! predict.
//!
//! Both prefactors are limits of the translation-invariant functional
//! `l(z) = U/(U + W) + log|U + W|`, which is constant on any solution
//! `(a + b z) e^{-z}` of `U'' + 2U' + U = 0`. Its argument `U + W` is carried
//! as its own state variable so the tail never forms it by cancellation.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{lambda_inner, predict_delta, DeltaPrediction};
use crate::numerics::rk::{integrate_adaptive, IvpProblem, Solution, Tolerances};
use crate::tw::{BranchPoint, PhasePoint};

/// `z` distance allowed for the functional to settle.
pub const Z_BUDGET: f64 = 80.0;
/// Two `l` samples one unit of `z` apart closer than this count as converged.
pub const PLATEAU_TOL: f64 = 1e-10;

const TAIL_TOL: Tolerances = Tolerances { rel: 1e-12, abs: 1e-300 };

#[derive(Clone, Debug, Serialize)]
pub struct OuterWave {
    pub samples: Vec<PhasePoint>,
    pub a0: f64,
    pub ell_trace: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerWave {
    pub samples: Vec<PhasePoint>,
    pub v_inf: f64,
    pub a_i: f64,
    pub ell_trace: Vec<(f64, f64)>,
}

/// Samples `l` on a unit grid from `z_start` in direction `dir` until three
/// neighbours agree to [`PLATEAU_TOL`].
fn plateau(sol: &Solution, ell: impl Fn(&[f64]) -> f64, z_start: f64, dir: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    let mut settled = 0;
    let mut k = 0.0;
    while let Some(y) = sol.eval(z_start + dir * k) {
        let l = ell(&y);
        trace.push((z_start + dir * k, l));
        if let Some(p) = prev {
            if (l - p).abs() < PLATEAU_TOL {
                settled += 1;
                if settled == 2 {
                    return Ok((l, trace));
                }
            } else {
                settled = 0;
            }
        }
        prev = Some(l);
        k += 1.0;
    }
    Err(Error::NoConvergence(format!(
        "tail functional did not settle within the z budget (last samples {:?})",
        &trace[trace.len().saturating_sub(3)..]
    )))
}

/// The critical Fisher-KPP wave (`c = 2`) started on the rear unstable
/// eigenvector with offset `eps`.
pub fn outer_wave(eps: f64) -> Result<OuterWave> {
    if !(eps > 0.0 && eps < 0.1) {
        return domain(format!("seed offset must lie in (0, 0.1), got {eps}"));
    }
    let lambda = std::f64::consts::SQRT_2 - 1.0;
    outer_wave_from(1.0 - eps, -eps * lambda)
}

/// The same orbit started from any state `(U, W)` on it.
pub fn outer_wave_from(u0: f64, w0: f64) -> Result<OuterWave> {
    // state (U, S = U + W): U' = S - U, S' = U^2 - S
    let rhs = |_z: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1] - y[0];
        dy[1] = y[0] * y[0] - y[1];
    };
    let z_half = {
        // locate U = 1/2 first so the budget is measured from the front
        let probe = IvpProblem::new(rhs, vec![u0, u0 + w0], (0.0, 200.0), TAIL_TOL);
        let sol = integrate_adaptive(&probe, &[])?;
        sol.crossings(|_, y| y[0], 0.5).first().copied().unwrap_or(0.0)
    };
    let problem = IvpProblem::new(rhs, vec![u0, u0 + w0], (0.0, z_half + Z_BUDGET), TAIL_TOL);
    let sol = integrate_adaptive(&problem, &[])?;
    let (l, ell_trace) = plateau(&sol, |y| y[0] / y[1] + y[1].abs().ln(), z_half.ceil(), 1.0)?;
    let samples = sol
        .z
        .iter()
        .zip(&sol.y)
        .map(|(&z, y)| PhasePoint { z, u: y[0], v: 0.0, w: y[1] - y[0] })
        .collect();
    Ok(OuterWave { samples, a0: l.exp(), ell_trace })
}

/// The leading-order front layer at `V_inf`: integrated backward from
/// `(0, V_inf, 0) - eps (Lambda, V_inf/2, Lambda^2)`, oriented so `U > 0`.
pub fn inner_wave(v_inf: f64, eps: f64) -> Result<InnerWave> {
    let lam = lambda_inner(v_inf)?;
    if !(eps > 0.0 && eps < 1e-2) {
        return domain(format!("seed offset must lie in (0, 1e-2), got {eps}"));
    }
    let u0 = -eps * lam;
    let w0 = -eps * lam * lam;
    let v0 = v_inf - eps * 0.5 * v_inf;
    // state (U, log V, S = U + W)
    let rhs = |_z: f64, y: &[f64], dy: &mut [f64]| {
        let (u, s) = (y[0], y[2]);
        let v = y[1].exp();
        let w = s - u;
        dy[0] = w;
        dy[1] = 0.5 * u;
        dy[2] = (-s + v * (u - w + 0.5 * u * w)) / (1.0 - v);
    };
    let problem = IvpProblem::new(rhs, vec![u0, v0.ln(), u0 + w0], (0.0, -Z_BUDGET), TAIL_TOL);
    let sol = integrate_adaptive(&problem, &[])?;
    if let Some((i, _)) = sol.y.iter().enumerate().find(|(_, y)| y[0] <= 0.0) {
        return Err(Error::NoConvergence(format!("inner orbit lost U > 0 at z = {}", sol.z[i])));
    }
    let (l, ell_trace) = plateau(&sol, |y| y[0] / y[2] + y[2].abs().ln(), -1.0, -1.0)?;
    let a_i = l.exp();
    if !(a_i > 0.0) {
        return Err(Error::NoConvergence(format!("inner prefactor {a_i} is not positive")));
    }
    let samples = sol
        .z
        .iter()
        .zip(&sol.y)
        .map(|(&z, y)| PhasePoint { z, u: y[0], v: y[1].exp(), w: y[2] - y[0] })
        .collect();
    Ok(InnerWave { samples, v_inf, a_i, ell_trace })
}

/// `U_M(z) = A0 delta^{-1/2} e^{-(z - z0)} sin(delta^{1/2} (z - z0))`, the
/// solution of `U'' + (2 - delta) U' + U = 0` that joins the outer tail.
pub fn intermediate_profile(delta: f64, z0: f64, a0: f64, zs: &[f64]) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    let r = delta.sqrt();
    Ok(zs.iter().map(|&z| a0 / r * (-(z - z0)).exp() * (r * (z - z0)).sin()).collect())
}

/// First zero of the intermediate profile beyond `z0`.
pub fn intermediate_zero(delta: f64) -> f64 {
    std::f64::consts::PI / delta.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub v_inf: f64,
    pub a0: f64,
    pub a_i: f64,
    pub lambda: f64,
}

pub fn asymptotic_constants(v_inf: f64) -> Result<AsymptoticConstants> {
    Ok(AsymptoticConstants {
        v_inf,
        a0: outer_wave(1e-6)?.a0,
        a_i: inner_wave(v_inf, 1e-6)?.a_i,
        lambda: lambda_inner(v_inf)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchingReport {
    pub gamma: f64,
    pub v_inf: f64,
    pub c: f64,
    pub delta_num: f64,
    /// `delta_num - pi^2 / (log gamma)^2`.
    pub delta_1: f64,
    pub prediction: DeltaPrediction,
    pub err_one: f64,
    pub err_two: f64,
    /// `delta_num (log gamma)^2 / pi^2`, which tends to 1.
    pub ratio: f64,
}

/// Compares a computed branch speed with the one- and two-term predictions.
pub fn validate_matching(branch: &BranchPoint, consts: &AsymptoticConstants) -> Result<MatchingReport> {
    if (branch.v_inf - consts.v_inf).abs() > 1e-12 {
        return domain(format!("branch V_inf {} differs from constants V_inf {}", branch.v_inf, consts.v_inf));
    }
    let prediction = predict_delta(branch.gamma, consts.a0, consts.a_i)?;
    let delta_num = 2.0 - branch.c;
    let pi2 = std::f64::consts::PI.powi(2);
    let lg2 = branch.gamma.ln().powi(2);
    Ok(MatchingReport {
        gamma: branch.gamma,
        v_inf: branch.v_inf,
        c: branch.c,
        delta_num,
        delta_1: delta_num - pi2 / lg2,
        prediction,
        err_one: delta_num - prediction.one_term,
        err_two: delta_num - prediction.two_term,
        ratio: delta_num * lg2 / pi2,
    })
}
