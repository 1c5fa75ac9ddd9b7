//! Experiment configuration: a TOML file with sections, then flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use invasion_core::model::ModelParams;
use invasion_core::numerics::rk::Tolerances;
use invasion_core::pde::{Grid1D, InitialCondition};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum IcChoice {
    Compact,
    Exp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub v0: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcSection {
    pub kind: IcChoice,
    /// Decay rate for `exp` data.
    pub a: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub t_end: f64,
    /// Number of evenly spaced state snapshots written by `simulate`.
    pub snapshots: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwSection {
    /// Fixed speed for `tw-trajectory`; the branch speed when absent.
    pub c: Option<f64>,
    /// Far-field resident density; `model.v0` when absent.
    pub v_inf: Option<f64>,
    pub theta: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchSection {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub per_decade: usize,
    pub v_inf: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gamma: Vec<f64>,
    pub v0: Vec<f64>,
    /// Exponential decay rates; an empty list keeps `ic.kind`.
    pub a: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub model: ModelSection,
    pub ic: IcSection,
    pub grid: GridSection,
    pub tolerance: ToleranceSection,
    pub tw: TwSection,
    pub branch: BranchSection,
    pub sweep: SweepSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { gamma: 1.0, v0: 0.5 }
    }
}

impl Default for IcSection {
    fn default() -> Self {
        Self { kind: IcChoice::Compact, a: 0.5 }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self { length: 150.0, cells: 6000, t_end: 60.0, snapshots: 6 }
    }
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self { rel: Tolerances::PDE.rel, abs: Tolerances::PDE.abs }
    }
}

impl Default for TwSection {
    fn default() -> Self {
        Self { c: None, v_inf: None, theta: 0.05, samples: 2000 }
    }
}

impl Default for BranchSection {
    fn default() -> Self {
        Self { gamma_min: 0.1, gamma_max: 1e8, per_decade: 4, v_inf: vec![0.25, 0.5, 0.75] }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long, value_enum)]
    pub ic: Option<IcChoice>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long = "L")]
    pub length: Option<f64>,
    #[arg(long = "N")]
    pub cells: Option<usize>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long = "tol-rel")]
    pub tol_rel: Option<f64>,
    #[arg(long = "tol-abs")]
    pub tol_abs: Option<f64>,
    #[arg(long = "gamma-max")]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut cfg = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(o.gamma, cfg.model.gamma);
        set!(o.v0, cfg.model.v0);
        set!(o.ic, cfg.ic.kind);
        set!(o.a, cfg.ic.a);
        set!(o.length, cfg.grid.length);
        set!(o.cells, cfg.grid.cells);
        set!(o.t_end, cfg.grid.t_end);
        set!(o.tol_rel, cfg.tolerance.rel);
        set!(o.tol_abs, cfg.tolerance.abs);
        set!(o.gamma_max, cfg.branch.gamma_max);
        if o.out.is_some() {
            cfg.out = o.out.clone();
        }
        if o.threads.is_some() {
            cfg.threads = o.threads;
        }
        // an explicit decay rate on the command line implies exponential data
        if o.a.is_some() && o.ic.is_none() {
            cfg.ic.kind = IcChoice::Exp;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.initial_condition().validate()?;
        self.grid()?;
        self.tolerances()?;
        if !(self.grid.t_end > 0.0 && self.grid.t_end.is_finite()) {
            bail!("t_end must be positive, got {}", self.grid.t_end);
        }
        if let Some(c) = self.tw.c {
            if !(c > 0.0 && c.is_finite()) {
                bail!("tw.c must be positive, got {c}");
            }
        }
        if !(self.tw.theta > 0.0 && self.tw.theta <= 0.1) {
            bail!("tw.theta must lie in (0, 0.1], got {}", self.tw.theta);
        }
        let b = &self.branch;
        if !(b.gamma_min > 0.0 && b.gamma_max >= b.gamma_min && b.gamma_max.is_finite()) {
            bail!("branch needs 0 < gamma_min <= gamma_max, got ({}, {})", b.gamma_min, b.gamma_max);
        }
        if b.per_decade == 0 {
            bail!("branch.per_decade must be positive");
        }
        for &v in b.v_inf.iter().chain(&self.sweep.v0) {
            if !(0.0..1.0).contains(&v) {
                bail!("resident density {v} outside [0, 1)");
            }
        }
        for &g in &self.sweep.gamma {
            if !(g > 0.0 && g.is_finite()) {
                bail!("sweep gamma {g} must be positive");
            }
        }
        for &a in &self.sweep.a {
            if !(a > 0.0 && a.is_finite()) {
                bail!("sweep decay rate {a} must be positive");
            }
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.model.gamma, self.model.v0)?)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        ic_for(self.ic.kind, self.ic.a, self.model.v0)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Ok(Grid1D::new(self.grid.length, self.grid.cells)?)
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        Ok(Tolerances::new(self.tolerance.rel, self.tolerance.abs)?)
    }

    pub fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    /// Log-spaced gammas from `gamma_min` to `gamma_max`, both included.
    pub fn gamma_grid(&self) -> Vec<f64> {
        let b = &self.branch;
        let (lo, hi) = (b.gamma_min.log10(), b.gamma_max.log10());
        let n = ((hi - lo) * b.per_decade as f64).round() as usize;
        if n == 0 {
            return vec![b.gamma_min];
        }
        (0..=n).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / n as f64)).collect()
    }
}

pub fn ic_for(kind: IcChoice, a: f64, v0: f64) -> InitialCondition {
    match kind {
        IcChoice::Compact => InitialCondition::compact(v0),
        IcChoice::Exp => InitialCondition::exponential(a, v0),
    }
}
