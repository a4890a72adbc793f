mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use amgforge::config::RunConfig;
use amgforge::error::AmgError;
use clap::{Args, Parser, Subcommand};

/// Algebraic multigrid experiments from the command line.
#[derive(Parser, Debug)]
#[command(name = "amgforge", version)]
struct Cli {
    /// Emit comma-separated tables instead of aligned columns.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a model problem in Matrix Market format with a metadata sidecar.
    Generate {
        #[command(flatten)]
        run: RunArgs,
        /// Output matrix path; the sidecar goes to <out>.meta.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a hierarchy and run preconditioned CG.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Use b = A x* for a seeded random x* and report the error.
        #[arg(long, conflicts_with = "rhs")]
        manufactured: bool,
        /// Treat the constant vector as the kernel of a singular system.
        #[arg(long)]
        kernel: bool,
    },
    /// Exact two-level analysis for one or more interpolation builders.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated builders; `full` keeps every unknown coarse.
        #[arg(long, value_delimiter = ',', default_value = "ideal,direct,standard")]
        builders: Vec<String>,
    },
    /// Bootstrap setup driven by test vectors; prints the reduction history.
    Adapt {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Settings shared by every subcommand. The file is read first, then the
/// dedicated flags, then each `--set` in order.
#[derive(Args, Debug)]
struct RunArgs {
    /// key = value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set theta=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    bc: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Matrix Market file to use instead of a generated problem.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Matrix Market array file with the right-hand side.
    #[arg(long)]
    rhs: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> amgforge::error::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        let flags = [
            ("kind", &self.kind),
            ("n", &self.n),
            ("eps", &self.eps),
            ("bc", &self.bc),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(p) = &self.matrix {
            cfg.matrix = Some(p.clone());
        }
        if let Some(p) = &self.rhs {
            cfg.rhs = Some(p.clone());
        }
        for s in &self.set {
            cfg.apply_override(s)?;
        }
        Ok(cfg)
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_NONCONVERGED: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

pub enum Outcome {
    Done,
    NotConverged,
}

fn exit_code(err: &AmgError) -> u8 {
    match err {
        AmgError::Breakdown(_) | AmgError::SingularBlock(_) | AmgError::EmptyRow(_) | AmgError::Stagnation { .. } => {
            EXIT_INTERNAL
        }
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("AMGFORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("AMGFORGE_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match &cli.command {
        Command::Generate { run, out } => run.resolve().and_then(|cfg| commands::generate(&cfg, out)),
        Command::Solve {
            run,
            manufactured,
            kernel,
        } => run.resolve().and_then(|mut cfg| {
            if *manufactured {
                cfg.rhs = None;
            }
            commands::solve(&cfg, *kernel, cli.csv)
        }),
        Command::Analyze { run, builders } => run
            .resolve()
            .and_then(|cfg| commands::analyze(&cfg, builders, cli.csv)),
        Command::Adapt { run } => run.resolve().and_then(|cfg| commands::adapt(&cfg, cli.csv)),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(EXIT_NONCONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
