use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use macomss::completion::{R0Mode, StackWeightMode};
use macomss_cli::commands::{eval_files, impute_file, sidecar_path, BlockSpec};
use macomss_cli::{run_experiment, CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "macomss", version, about = "Block-plus-sporadic matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: the config's out_dir, else ./macomss-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complete a CSV matrix with a structured missing block.
    Impute {
        #[arg(long)]
        input: PathBuf,
        /// Observable rows; the file must list them first.
        #[arg(long, requires = "m2", conflicts_with_all = ["block_rows", "block_cols"])]
        m1: Option<usize>,
        /// Observable columns; the file must list them first.
        #[arg(long, requires = "m1")]
        m2: Option<usize>,
        /// Rows of the structured block (1-based), comma separated.
        #[arg(long, value_delimiter = ',', requires = "block_cols")]
        block_rows: Vec<String>,
        /// Columns of the structured block (header names or 1-based), comma separated.
        #[arg(long, value_delimiter = ',', requires = "block_rows")]
        block_cols: Vec<String>,
        /// min_dims, hsvt, or a fixed integer.
        #[arg(long, default_value = "min_dims")]
        r0: String,
        #[arg(long, default_value_t = 2.0)]
        eta: f64,
        /// literal or zeroed.
        #[arg(long, default_value = "literal")]
        stack_weight: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare an estimate with the truth; NMSE is over mask = 0 cells.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
}

fn parse_r0(s: &str) -> CliResult<R0Mode> {
    match s {
        "min_dims" => Ok(R0Mode::MinDims),
        "hsvt" => Ok(R0Mode::HsvtHeuristic),
        other => other
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(R0Mode::Fixed)
            .ok_or_else(|| CliError::Usage(format!("--r0 must be min_dims, hsvt or a positive integer, got {other:?}"))),
    }
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run {
            config,
            replicates,
            workers,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            cfg.apply_env()?;
            if let Some(n) = replicates {
                cfg.replicates = n;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let dir = out
                .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("macomss-out"));
            let report = run_experiment(&cfg)?;
            report.write_to(&dir)?;
            let failed = report.replicates.iter().filter(|r| r.error.is_some()).count();
            println!(
                "wrote {} rows to {} ({failed} with errors)",
                report.replicates.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Impute {
            input,
            m1,
            m2,
            block_rows,
            block_cols,
            r0,
            eta,
            stack_weight,
            output,
        } => {
            let block = match (m1, m2) {
                (Some(m1), Some(m2)) => BlockSpec::Dims { m1, m2 },
                _ if !block_rows.is_empty() => BlockSpec::Named {
                    rows: block_rows,
                    cols: block_cols,
                },
                _ => return Err(CliError::Usage("give --m1/--m2 or --block-rows/--block-cols".into())),
            };
            let opts = macomss::Options {
                r0_mode: parse_r0(&r0)?,
                eta_const: eta,
                stack_weight_mode: match stack_weight.as_str() {
                    "literal" => StackWeightMode::Literal,
                    "zeroed" => StackWeightMode::Zeroed,
                    other => return Err(CliError::Usage(format!("unknown --stack-weight {other:?}"))),
                },
                ..macomss::Options::default()
            };
            let report = impute_file(&input, &block, &opts, &output)?;
            println!(
                "r_hat = {}; wrote {} and {}",
                report.r_hat,
                output.display(),
                sidecar_path(&output).display()
            );
            Ok(())
        }
        Command::Eval { estimate, truth, mask } => {
            let report = eval_files(&estimate, &truth, &mask)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("macomss: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
