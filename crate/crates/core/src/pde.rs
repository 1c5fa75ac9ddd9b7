//! Method-of-lines simulation on `[0, L]` with zero-flux ends.
//!
//! Cell-centred finite volumes; the face diffusivity `1 - v` uses the
//! arithmetic mean of the two neighbouring cells. Unknowns are interleaved
//! as `y[2i] = u_i`, `y[2i + 1] = v_i`, which keeps the Jacobian inside
//! two sub- and three super-diagonals.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::ModelParams;
use crate::numerics::banded::BandMatrix;
use crate::numerics::rk::Tolerances;
use crate::numerics::stiff::{integrate_stiff, BandedSystem, Control, StiffOptions, StiffStats};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub length: f64,
    pub cells: usize,
}

impl Grid1D {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return domain(format!("domain length must be positive, got {length}"));
        }
        if cells < 16 {
            return domain(format!("need at least 16 cells, got {cells}"));
        }
        Ok(Self { length, cells })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn centre(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn centres(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.centre(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IcKind {
    /// `u = height` on cells with centre `x < width`, zero elsewhere.
    Compact { width: f64, height: f64 },
    /// `u = exp(-a x)`.
    Exponential { a: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub kind: IcKind,
    pub v0: f64,
}

impl InitialCondition {
    pub fn compact(v0: f64) -> Self {
        Self { kind: IcKind::Compact { width: 1.0, height: 1.0 }, v0 }
    }

    pub fn exponential(a: f64, v0: f64) -> Self {
        Self { kind: IcKind::Exponential { a }, v0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.v0) {
            return domain(format!("v0 must lie in [0, 1), got {}", self.v0));
        }
        match self.kind {
            IcKind::Compact { width, height } => {
                if !(width > 0.0) || !(height > 0.0 && height <= 1.0) {
                    return domain(format!("compact IC needs width > 0 and height in (0, 1], got ({width}, {height})"));
                }
            }
            IcKind::Exponential { a } => {
                if !(a > 0.0) {
                    return domain(format!("exponential IC needs a > 0, got {a}"));
                }
            }
        }
        Ok(())
    }

    pub fn state(&self, grid: &Grid1D) -> PdeState {
        let u = grid
            .centres()
            .into_iter()
            .map(|x| match self.kind {
                IcKind::Compact { width, height } => {
                    if x < width {
                        height
                    } else {
                        0.0
                    }
                }
                IcKind::Exponential { a } => (-a * x).exp(),
            })
            .collect();
        PdeState { t: 0.0, u, v: vec![self.v0; grid.cells] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PdeState {
    fn from_interleaved(t: f64, y: &[f64]) -> Self {
        let u = y.iter().step_by(2).copied().collect();
        let v = y.iter().skip(1).step_by(2).copied().collect();
        Self { t, u, v }
    }

    fn interleave(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).flat_map(|(&u, &v)| [u, v]).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrontTrace {
    pub samples: Vec<(f64, f64)>,
    pub level: f64,
}

impl FrontTrace {
    pub fn new(level: f64) -> Self {
        Self { samples: Vec::new(), level }
    }

    pub fn t_end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.0)
    }
}

/// The semi-discrete right-hand side, ready for [`integrate_stiff`].
#[derive(Clone, Debug)]
pub struct Semidiscrete {
    pub params: ModelParams,
    pub grid: Grid1D,
}

pub fn semidiscretize(params: ModelParams, grid: Grid1D) -> Semidiscrete {
    Semidiscrete { params, grid }
}

impl Semidiscrete {
    /// Time derivatives of the separate fields.
    pub fn fields_rhs(&self, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let n = self.grid.cells;
        let dx = self.grid.dx();
        let mut flux_left = 0.0;
        for i in 0..n {
            let flux_right = if i + 1 < n {
                (1.0 - 0.5 * (v[i] + v[i + 1])) * (u[i + 1] - u[i]) / dx
            } else {
                0.0
            };
            du[i] = (flux_right - flux_left) / dx + u[i] * (1.0 - u[i] - v[i]);
            dv[i] = -self.params.gamma * u[i] * v[i];
            flux_left = flux_right;
        }
    }
}

impl BandedSystem for Semidiscrete {
    fn dim(&self) -> usize {
        2 * self.grid.cells
    }

    fn bandwidth(&self) -> (usize, usize) {
        (2, 3)
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.grid.cells;
        let dx2 = self.grid.dx().powi(2);
        let gamma = self.params.gamma;
        let mut flux_left = 0.0;
        for i in 0..n {
            let (u, v) = (y[2 * i], y[2 * i + 1]);
            let flux_right = if i + 1 < n {
                (1.0 - 0.5 * (v + y[2 * i + 3])) * (y[2 * i + 2] - u)
            } else {
                0.0
            };
            dy[2 * i] = (flux_right - flux_left) / dx2 + u * (1.0 - u - v);
            dy[2 * i + 1] = -gamma * u * v;
            flux_left = flux_right;
        }
    }

    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut BandMatrix) {
        let n = self.grid.cells;
        let dx2 = self.grid.dx().powi(2);
        let gamma = self.params.gamma;
        jac.fill_zero();
        for i in 0..n {
            let (r, s) = (2 * i, 2 * i + 1);
            let (u, v) = (y[r], y[s]);
            let mut diag_u = 1.0 - 2.0 * u - v;
            let mut diag_v = -u;
            if i + 1 < n {
                let d = 1.0 - 0.5 * (v + y[s + 2]);
                let du = y[r + 2] - u;
                jac.set(r, r + 2, d / dx2);
                jac.set(r, s + 2, -0.5 * du / dx2);
                diag_u -= d / dx2;
                diag_v -= 0.5 * du / dx2;
            }
            if i > 0 {
                let d = 1.0 - 0.5 * (v + y[s - 2]);
                let du = u - y[r - 2];
                jac.set(r, r - 2, d / dx2);
                jac.set(r, s - 2, 0.5 * du / dx2);
                diag_u -= d / dx2;
                diag_v += 0.5 * du / dx2;
            }
            jac.set(r, r, diag_u);
            jac.set(r, s, diag_v);
            jac.set(s, r, -gamma * v);
            jac.set(s, s, -gamma * u);
        }
    }
}

/// Rightmost point where `u` falls through `level`, linearly interpolated
/// between cell centres.
pub fn front_location(grid: &Grid1D, u: &[f64], level: f64) -> Result<f64> {
    let last = u.len().checked_sub(1).ok_or_else(|| Error::NoCrossing("empty state".into()))?;
    if u[last] >= level {
        return Err(Error::NoCrossing(format!("u >= {level} at the right boundary; front has left the domain")));
    }
    let i = (0..last)
        .rev()
        .find(|&i| u[i] >= level)
        .ok_or_else(|| Error::NoCrossing(format!("u < {level} everywhere; no front")))?;
    let s = (u[i] - level) / (u[i] - u[i + 1]);
    Ok(grid.centre(i) + s * grid.dx())
}

/// The `(u_i, v_i)` pairs ordered by `x`.
pub fn phase_curve(state: &PdeState) -> Vec<(f64, f64)> {
    state.u.iter().copied().zip(state.v.iter().copied()).collect()
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub tol: Tolerances,
    pub output_times: Vec<f64>,
    pub level: f64,
    /// Fraction of `L` beyond which the front counts as escaped.
    pub escape_fraction: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tol: Tolerances::PDE, output_times: Vec::new(), level: 0.5, escape_fraction: 0.9 }
    }
}

#[derive(Clone, Debug)]
pub struct PdeRun {
    pub params: ModelParams,
    pub ic: InitialCondition,
    pub grid: Grid1D,
    pub tol: Tolerances,
    pub states: Vec<PdeState>,
    pub final_state: PdeState,
    pub trace: FrontTrace,
    /// Set when the front passed the escape threshold; the run stops there.
    pub escaped: Option<(f64, f64)>,
    pub stats: StiffStats,
}

impl PdeRun {
    /// Turns an escaped run into [`Error::FrontEscaped`].
    pub fn check_contained(self) -> Result<Self> {
        match self.escaped {
            Some((t, x_f)) => Err(Error::FrontEscaped { t, x_f }),
            None => Ok(self),
        }
    }
}

/// Integrates to `t_end`, recording the front at every accepted step and the
/// full state at each of `opts.output_times`.
pub fn run(params: ModelParams, ic: InitialCondition, grid: Grid1D, t_end: f64, opts: &RunOptions) -> Result<PdeRun> {
    ic.validate()?;
    if !(t_end > 0.0) {
        return domain(format!("t_end must be positive, got {t_end}"));
    }
    if let Some(&t) = opts.output_times.iter().find(|&&t| !(0.0..=t_end).contains(&t)) {
        return domain(format!("output time {t} outside [0, {t_end}]"));
    }
    let sys = semidiscretize(params, grid);
    let init = ic.state(&grid);
    let mut trace = FrontTrace::new(opts.level);
    if let Ok(x) = front_location(&grid, &init.u, opts.level) {
        trace.samples.push((0.0, x));
    }
    let limit = opts.escape_fraction * grid.length;
    let mut escaped = None;
    let stiff_opts = StiffOptions {
        tol: opts.tol,
        output_times: opts.output_times.clone(),
        ..StiffOptions::default()
    };
    let mut u_buf = vec![0.0; grid.cells];
    let sol = integrate_stiff(&sys, init.interleave(), (0.0, t_end), &stiff_opts, |t, y| {
        for (k, u) in u_buf.iter_mut().enumerate() {
            *u = y[2 * k];
        }
        match front_location(&grid, &u_buf, opts.level) {
            Ok(x) => {
                trace.samples.push((t, x));
                if x > limit {
                    escaped = Some((t, x));
                    return Control::Stop;
                }
            }
            Err(_) if u_buf[grid.cells - 1] >= opts.level => {
                escaped = Some((t, grid.length));
                return Control::Stop;
            }
            Err(_) => {}
        }
        Control::Continue
    })
    .map_err(|e| {
        let t = match &e {
            Error::NewtonFailure { t } => *t,
            Error::TooManySteps { z, .. } => *z,
            _ => f64::NAN,
        };
        Error::PdeFailure { t, source: Box::new(e) }
    })?;

    Ok(PdeRun {
        params,
        ic,
        grid,
        tol: opts.tol,
        states: sol.outputs.iter().map(|(t, y)| PdeState::from_interleaved(*t, y)).collect(),
        final_state: PdeState::from_interleaved(sol.t_final, &sol.y_final),
        trace,
        escaped,
        stats: sol.stats,
    })
}
