//! `compreg`: simulate, fit, cross-validate, predict and run Monte Carlo studies.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{FoldsSetting, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "compreg", version, about = "Kernel regression with compositional covariates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Flat TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct EstimatorArgs {
    /// Dataset CSV: header x1..xD,y.
    #[arg(long)]
    data: Option<PathBuf>,
    /// cl0, cl1, rob0 or rob1.
    #[arg(long)]
    method: Option<String>,
    /// Isotropic bandwidth h (H = h I).
    #[arg(long)]
    h: Option<f64>,
    /// global or local.
    #[arg(long)]
    scale_mode: Option<String>,
    /// Local scale estimator when scale-mode is local: mad or s.
    #[arg(long)]
    local_scale: Option<String>,
    /// Keep failing local linear fits instead of falling back to local constant.
    #[arg(long)]
    no_fallback: bool,
    /// Prediction grid in ilr coordinates: lo1,hi1,lo2,hi2,...,step.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset drawn from the Monte Carlo design.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
        /// Contamination fraction.
        #[arg(long)]
        delta: Option<f64>,
        /// Mean of the contaminating errors.
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<f64>,
        /// Replication index (random stream) to draw.
        #[arg(long)]
        rep: Option<u64>,
    },
    /// Fit at the data (residuals, outlier flags) and optionally on a grid.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Select h by cross-validation.
    Cv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Candidate bandwidths, comma separated.
        #[arg(long, value_delimiter = ',')]
        h_grid: Option<Vec<f64>>,
        /// Number of folds, or loo.
        #[arg(long)]
        folds: Option<String>,
        /// ls or robust.
        #[arg(long)]
        criterion: Option<String>,
        /// mad, tau or s.
        #[arg(long)]
        dispersion: Option<String>,
        #[arg(long)]
        refine_step: Option<f64>,
        #[arg(long)]
        refine_radius: Option<f64>,
    },
    /// Evaluate a fit configuration on a grid.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Monte Carlo comparison of the four estimators.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_reps: Option<usize>,
        #[arg(long)]
        n_pred: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

impl Common {
    fn layer(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            threads: self.threads,
            out_dir: self.out.clone(),
            ..Default::default()
        }
    }
}

impl EstimatorArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.data = self.data.clone();
        cfg.method = self.method.clone();
        cfg.h = self.h;
        cfg.scale_mode = self.scale_mode.clone();
        cfg.local_scale = self.local_scale.clone();
        cfg.fallback = self.no_fallback.then_some(false);
        cfg.grid = self.grid.clone();
    }
}

fn parse_folds(text: &str) -> FoldsSetting {
    match text.parse::<usize>() {
        Ok(k) => FoldsSetting::K(k),
        Err(_) => FoldsSetting::Named(text.to_string()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common, flags) = match &cli.command {
        Command::Simulate {
            common,
            alpha,
            n,
            delta,
            shift,
            rep,
        } => {
            let mut f = common.layer();
            f.alpha = alpha.clone();
            f.n = *n;
            f.delta = *delta;
            f.shift = *shift;
            f.rep = *rep;
            ("simulate", common, f)
        }
        Command::Fit { common, est } | Command::Predict { common, est } => {
            let mut f = common.layer();
            est.apply(&mut f);
            let name = if matches!(cli.command, Command::Fit { .. }) {
                "fit"
            } else {
                "predict"
            };
            (name, common, f)
        }
        Command::Cv {
            common,
            est,
            h_grid,
            folds,
            criterion,
            dispersion,
            refine_step,
            refine_radius,
        } => {
            let mut f = common.layer();
            est.apply(&mut f);
            f.h_grid = h_grid.clone();
            f.folds = folds.as_deref().map(parse_folds);
            f.criterion = criterion.clone();
            f.dispersion = dispersion.clone();
            f.refine_step = *refine_step;
            f.refine_radius = *refine_radius;
            ("cv", common, f)
        }
        Command::Mc {
            common,
            alpha,
            h,
            n,
            n_reps,
            n_pred,
            methods,
        } => {
            let mut f = common.layer();
            f.alpha = alpha.clone();
            f.h = *h;
            f.n = *n;
            f.n_reps = *n_reps;
            f.n_pred = *n_pred;
            f.methods = methods.clone();
            ("mc", common, f)
        }
    };

    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.overlay(&flags);

    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {t} worker threads: {e}")))?;
    }

    match name {
        "simulate" => commands::simulate(cfg),
        "fit" => commands::fit(cfg),
        "predict" => commands::predict(cfg),
        "cv" => commands::cv(cfg),
        _ => commands::mc(cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
