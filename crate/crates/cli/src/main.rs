use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfmix_cli::{cmd_budget, cmd_calibrate, cmd_rbfit, cmd_scan, CalibrationMode, CliError, Outcome};

/// Bench workflows for heterodyne RF mixing modules.
#[derive(Debug, Parser)]
#[command(name = "rfmix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cascade gain, noise figure, IIP3 and stage levels for each chain.
    Budget {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Loopback drive-phase scan; writes the scan CSV and a metrics JSON.
    Scan {
        config: PathBuf,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// LO nulling, sideband predistortion, or both from a homodyne scan CSV.
    Calibrate {
        config: PathBuf,
        /// lo-null | sideband | from-scan
        #[arg(long)]
        mode: CalibrationMode,
        /// Scan CSV for from-scan.
        #[arg(long)]
        scan: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits A p^m to an RB CSV with columns m,survival,shots.
    Rbfit {
        data: PathBuf,
        #[arg(long)]
        dimension: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Budget { config, out } => cmd_budget(&config, out.as_deref()),
        Command::Scan { config, points, seed, out } => cmd_scan(&config, points, seed, out.as_deref()),
        Command::Calibrate { config, mode, scan, out } => cmd_calibrate(&config, mode, scan.as_deref(), out.as_deref()),
        Command::Rbfit { data, dimension, out } => cmd_rbfit(&data, dimension, out.as_deref()),
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
    match run(cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = write!(stdout, "{}", outcome.summary);
            for p in &outcome.written {
                let _ = writeln!(stdout, "wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
