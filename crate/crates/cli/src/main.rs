mod commands;
mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use figures::Figure;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "invasion", version, about = "Two-species invasion fronts: PDE runs, travelling waves, asymptotics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the PDE and fit the front speed.
    Simulate {
        #[command(flatten)]
        o: Overrides,
    },
    /// Fit `x_f(t) = c t + k1 log t + k0` to a saved front trace.
    FitSpeed {
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[command(flatten)]
        o: Overrides,
    },
    /// One travelling-wave orbit, at a given speed or on the branch.
    TwTrajectory {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long = "v-inf")]
        v_inf: Option<f64>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Branch speed against gamma for each far-field density.
    TwBranch {
        #[command(flatten)]
        o: Overrides,
    },
    /// Outer and inner prefactors and the speed-deficit comparison.
    Asymptotics {
        #[command(flatten)]
        o: Overrides,
    },
    /// PDE runs over the `[sweep]` grid, in parallel.
    Sweep {
        #[command(flatten)]
        o: Overrides,
    },
    /// Regenerate the data and layout for one figure.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[command(flatten)]
        o: Overrides,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Simulate { .. } => "simulate".into(),
            Command::FitSpeed { .. } => "fit-speed".into(),
            Command::TwTrajectory { .. } => "tw-trajectory".into(),
            Command::TwBranch { .. } => "tw-branch".into(),
            Command::Asymptotics { .. } => "asymptotics".into(),
            Command::Sweep { .. } => "sweep".into(),
            Command::Reproduce { figure, .. } => format!("reproduce {figure:?}").to_lowercase(),
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Command::Simulate { o }
            | Command::FitSpeed { o, .. }
            | Command::TwTrajectory { o, .. }
            | Command::TwBranch { o }
            | Command::Asymptotics { o }
            | Command::Sweep { o }
            | Command::Reproduce { o, .. } => o,
        }
    }

    fn default_out(&self) -> String {
        format!("out/{}", self.name().replace(' ', "-"))
    }
}

fn configure(cmd: &Command) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::resolve(cmd.overrides())?;
    if let Command::TwTrajectory { c, v_inf, .. } = cmd {
        if c.is_some() {
            cfg.tw.c = *c;
        }
        if v_inf.is_some() {
            cfg.tw.v_inf = *v_inf;
        }
        cfg.validate()?;
    }
    Ok(cfg)
}

fn execute(cmd: &Command, cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<()> {
    match cmd {
        Command::Simulate { .. } => commands::simulate(cfg, out),
        Command::FitSpeed { trace, t_min, t_max, .. } => commands::fit_speed_file(cfg, trace, (*t_min, *t_max), out),
        Command::TwTrajectory { .. } => commands::tw_trajectory(cfg, out),
        Command::TwBranch { .. } => commands::tw_branch(cfg, out),
        Command::Asymptotics { .. } => commands::asymptotics(cfg, out),
        Command::Sweep { .. } => commands::sweep(cfg, out),
        Command::Reproduce { figure, .. } => figures::reproduce(*figure, cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let cfg = match configure(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let dir = cfg.out_dir(&cli.command.default_out());
    let mut out = match OutputDir::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    match execute(&cli.command, &cfg, &mut out) {
        Ok(()) => match out.finish(&name, &cfg) {
            Ok(()) => {
                println!("wrote {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Err(e2) = out.fail(&name, &e) {
                eprintln!("error: could not write error record: {e2:#}");
            }
            ExitCode::FAILURE
        }
    }
}
