//! Front speed from a trace `x_f(t) ~ c t + k0 log t + k1`.
//!
//! The model is linear in `(c, k0, k1)`, so ordinary least squares is exact.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::lstsq::linear_least_squares;
use crate::pde::FrontTrace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedFit {
    pub c: f64,
    pub k0: f64,
    pub k1: f64,
    pub window: (f64, f64),
    pub rms: f64,
    /// Standard error of `c` from the fit covariance.
    pub c_stderr: f64,
    pub samples: usize,
}

fn windowed(trace: &FrontTrace, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = window;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Domain(format!("fit window ({lo}, {hi}) must satisfy 0 < t_min < t_max")));
    }
    let pts: Vec<(f64, f64)> = trace.samples.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!("{} trace samples in [{lo}, {hi}], need 10", pts.len())));
    }
    Ok(pts)
}

pub fn fit_speed(trace: &FrontTrace, window: (f64, f64)) -> Result<SpeedFit> {
    let pts = windowed(trace, window)?;
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(t, _)| vec![t, t.ln(), 1.0]).collect();
    let obs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = linear_least_squares(&rows, &obs)?;
    Ok(SpeedFit {
        c: fit.coefficients[0],
        k0: fit.coefficients[1],
        k1: fit.coefficients[2],
        window,
        rms: fit.residual_norm / (pts.len() as f64).sqrt(),
        c_stderr: fit.covariance_diag[0].sqrt(),
        samples: pts.len(),
    })
}

/// Straight-line fit `x_f ~ c t + k1` over the same window; `k0` is zero.
pub fn fit_speed_linear(trace: &FrontTrace, window: (f64, f64)) -> Result<SpeedFit> {
    let pts = windowed(trace, window)?;
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(t, _)| vec![t, 1.0]).collect();
    let obs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = linear_least_squares(&rows, &obs)?;
    Ok(SpeedFit {
        c: fit.coefficients[0],
        k0: 0.0,
        k1: fit.coefficients[1],
        window,
        rms: fit.residual_norm / (pts.len() as f64).sqrt(),
        c_stderr: fit.covariance_diag[0].sqrt(),
        samples: pts.len(),
    })
}

/// Second half of the usable trace, where usable ends the first time `x_f`
/// reaches `x_limit` (normally `0.9 L`).
pub fn default_window(trace: &FrontTrace, x_limit: f64) -> Result<(f64, f64)> {
    let t_first = trace
        .samples
        .iter()
        .map(|s| s.0)
        .find(|&t| t > 0.0)
        .ok_or_else(|| Error::InsufficientData("trace has no positive times".into()))?;
    let t_last = trace.t_end().unwrap_or(0.0);
    if t_last < 4.0 * t_first {
        return Err(Error::InsufficientData(format!("trace spans [{t_first}, {t_last}], less than a factor of 4")));
    }
    let t_hi = trace.samples.iter().find(|s| s.1 >= x_limit).map_or(t_last, |s| s.0);
    Ok((0.5 * t_hi, t_hi))
}
