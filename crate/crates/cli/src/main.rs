//! `tariff` — batch analysis of flat vs. time-varying electricity pricing:
//! equilibrium solving, consumer-welfare screening, profit-constrained
//! pricing, parameter sweeps, and oracle self-verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use tariff_cli::commands::{self, CommandOutput, SolveRegime};
use tariff_cli::doc::ScenarioDocument;
use tariff_cli::report::Format;
use tariff_cli::{exit, CliError};

#[derive(Parser)]
#[command(name = "tariff", version, about = "Equilibrium and welfare screening for electricity tariff transitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the consumer-model and supply-cost assumptions.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the flat and/or variable equilibrium.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Which pricing regime(s) to solve.
        #[arg(long, value_enum, default_value_t = RegimeArg::Both)]
        regime: RegimeArg,
    },
    /// Utility changes, loss certificates, and pairwise comparisons.
    Screen {
        #[command(flatten)]
        common: Common,
    },
    /// Profit-constrained prices for a target, plus screening against them.
    Ramsey {
        #[command(flatten)]
        common: Common,
        /// Required total profit.
        #[arg(long)]
        target: f64,
    },
    /// Re-solve while one parameter moves over a range; plot-ready rows.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted parameter path, e.g. consumers.0.loss.OP.k or cost.1
        /// (a `*` segment fans out over an array).
        #[arg(long)]
        parameter: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Run the oracle cross-check battery plus random-scenario checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Number of random scenarios to check.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario document (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's root-finding tolerances.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Flat,
    Variable,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// Comma-separated tables with fixed header rows.
    Table,
    /// One JSON document.
    Structured,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(exit::PARSE_OR_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (common, output) = match &cli.command {
        Command::Validate { common } => (common, commands::cmd_validate(&load(common)?)?),
        Command::Solve { common, regime } => {
            let regime = match regime {
                RegimeArg::Flat => SolveRegime::Flat,
                RegimeArg::Variable => SolveRegime::Variable,
                RegimeArg::Both => SolveRegime::Both,
            };
            (common, commands::cmd_solve(&load(common)?, regime)?)
        }
        Command::Screen { common } => (common, commands::cmd_screen(&load(common)?)?),
        Command::Ramsey { common, target } => (common, commands::cmd_ramsey(&load(common)?, *target)?),
        Command::Sweep { common, parameter, from, to, steps } => {
            (common, commands::cmd_sweep(&load(common)?, parameter, *from, *to, *steps)?)
        }
        Command::Verify { common, count } => {
            let document = load(common)?;
            (common, commands::cmd_verify(&document, common.seed, *count)?)
        }
    };
    emit(common, &output)?;
    Ok(output.exit_code)
}

/// Read and parse the scenario document, applying `--seed` / `--tol`.
fn load(common: &Common) -> Result<ScenarioDocument, CliError> {
    let text = std::fs::read_to_string(&common.scenario).map_err(|source| CliError::Io {
        path: common.scenario.display().to_string(),
        source,
    })?;
    let mut document = ScenarioDocument::parse(&text)?;
    if common.seed.is_some() || common.tol.is_some() {
        let mut options = document.options.take().unwrap_or_default();
        if let Some(seed) = common.seed {
            options.seed = Some(seed);
        }
        if let Some(tol) = common.tol {
            options.flat_tol = Some(tol);
            options.var_tol = Some(tol);
        }
        document.options = Some(options);
    }
    Ok(document)
}

fn emit(common: &Common, output: &CommandOutput) -> Result<(), CliError> {
    let format = match common.format {
        FormatArg::Table => Format::Table,
        FormatArg::Structured => Format::Structured,
    };
    let rendered = output.report.render(format);
    match &common.out {
        Some(path) => std::fs::write(path, rendered).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => print!("{rendered}"),
    }
    Ok(())
}
