use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use monofourier::config::{parse_config, preset};
use monofourier::report::{run_experiment, Overrides, RunError};

#[derive(Parser)]
#[command(name = "monofourier", version, about = "Monotone Fourier timestepping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for CSV files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file
    Run { config: PathBuf },
    /// European call, T = .25
    Table2,
    /// European call, T = .001
    Table3,
    /// Bermudan put with dividends
    Table5,
    /// Mean-variance convergence at fixed W*, with the Monte Carlo check
    Table7,
    /// Constant-mix benchmark
    Table8,
    /// Mean-variance with the mean fixed to the constant-mix value
    Table9,
}

fn run(cli: Cli) -> Result<String, RunError> {
    let cfg = match &cli.command {
        Command::Run { config } => parse_config(config)?,
        Command::Table2 => preset("table2").expect("preset"),
        Command::Table3 => preset("table3").expect("preset"),
        Command::Table5 => preset("table5").expect("preset"),
        Command::Table7 => preset("table7").expect("preset"),
        Command::Table8 => preset("table8").expect("preset"),
        Command::Table9 => preset("table9").expect("preset"),
    };
    println!("{}", cfg.experiment.source);
    run_experiment(&cfg, &Overrides { out: cli.out, seed: cli.seed })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
