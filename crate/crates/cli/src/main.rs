use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vcm_core::runner::{run_scenario, validate_config, RunOptions};
use vcm_core::Error;

#[derive(Parser)]
#[command(
    name = "vcm",
    version,
    about = "Run massive-MIMO VCM/JSDM precoding scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write results.csv, report.json and plots.
    Run {
        config: PathBuf,
        /// Override the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (default: the config's `output`, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Guard(_) => 3,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match validate_config(&config) {
            Ok(cfg) => {
                println!(
                    "ok: {} groups, {} methods, {} SNR points",
                    cfg.groups.len(),
                    cfg.methods.len(),
                    cfg.snr_db.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run {
            config,
            seed,
            threads,
            out,
            no_plots,
        } => {
            let opts = RunOptions {
                seed,
                out_dir: out,
                plots: !no_plots,
            };
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(k) = threads {
                if k == 0 {
                    eprintln!("error: --threads must be at least 1");
                    return ExitCode::from(2);
                }
                pool = pool.num_threads(k);
            }
            let pool = match pool.build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot start worker pool: {e}");
                    return ExitCode::from(2);
                }
            };
            match pool.install(|| run_scenario(&config, &opts)) {
                Ok((report, dir)) => {
                    for f in &report.failures {
                        let user = f.user.map(|u| format!(" user {u}")).unwrap_or_default();
                        eprintln!(
                            "cell failed: group {}{user} {} at {} dB: {}",
                            f.group, f.method, f.snr_s_db, f.reason
                        );
                    }
                    println!(
                        "{} rows, {} failed cells, {:.1}s -> {}",
                        report.rows.len(),
                        report.failures.len(),
                        report.wall_seconds,
                        dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
