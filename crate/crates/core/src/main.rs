use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use geese::harness::{self, ExperimentConfig};
use geese::Result;

#[derive(Parser)]
#[command(name = "geese", version, about = "Query-budgeted correction of failed state estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every listed algorithm on one problem.
    Run(Common),
    /// Sweep epsilon and initial-archive size.
    Sweep(Common),
    /// Paired ablation studies on identical cases.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Which studies to run (1: error estimation, 2: exploration
        /// training, 3: early stopping, 4: focus coefficient).
        #[arg(long, value_delimiter = ',')]
        which: Option<Vec<u8>>,
    },
    /// One-at-a-time sensitivity grids.
    Sense {
        #[command(flatten)]
        common: Common,
        /// Any of L, NIT, lr, eps_e.
        #[arg(long, value_delimiter = ',', default_value = "L,NIT,lr,eps_e")]
        grid: Vec<String>,
    },
    /// Draw SVG charts from a summary CSV.
    Plot { csv: PathBuf },
}

#[derive(Args)]
struct Common {
    /// key = value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated thresholds.
    #[arg(long)]
    epsilon: Option<String>,
    /// Comma-separated initial-archive sizes.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding problem tables instead of the built-in copies.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Run everything on one thread.
    #[arg(long)]
    sequential: bool,
    /// Extra key=value settings, e.g. `--set L=8 --set focus=inf`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        let pairs = [
            ("problem", self.problem.clone()),
            ("algos", self.algos.clone()),
            ("cases", self.cases.map(|v| v.to_string())),
            ("budget", self.budget.map(|v| v.to_string())),
            ("epsilon", self.epsilon.clone()),
            ("init", self.init.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("fixtures", self.fixtures.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if self.sequential {
            cfg.set("sequential", "true")?;
        }
        for kv in &self.set {
            cfg.apply_text(kv)?;
        }
        Ok(cfg)
    }
}

fn print_rows<T: serde::Serialize>(rows: &[T]) -> Result<()> {
    for r in rows {
        println!("{}", serde_json::to_string(r)?);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) | Command::Sweep(common) => {
            let cfg = common.build()?;
            let (rows, _) = harness::run_experiment(&cfg)?;
            print_rows(&rows)?;
            info!("results in {}", cfg.out_dir.display());
        }
        Command::Ablate { common, which } => {
            let mut cfg = common.build()?;
            if let Some(w) = which {
                cfg.ablations = w;
            }
            let (rows, _) = harness::run_ablations(&cfg)?;
            print_rows(&rows)?;
        }
        Command::Sense { common, grid } => {
            let cfg = common.build()?;
            print_rows(&harness::run_sensitivity(&cfg, &grid)?)?;
        }
        Command::Plot { csv } => {
            for p in harness::emit_plots(&csv)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
