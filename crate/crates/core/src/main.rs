use clap::{Parser, Subcommand};
use parentgap::config::{self, ExperimentConfig};
use parentgap::run::{self, RunOptions, RunOutput};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "parentgap", version, about = "Optimize spectral gaps of MPS parent Hamiltonians")]
struct Cli {
    /// Output directory (overrides the config and PARENTGAP_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for multi-seed runs and cold sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Print a feasibility report without running.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match cli.cmd {
        Cmd::Validate { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let report = config::validate(&cfg);
            println!("{report}");
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Cmd::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions { out_dir: cli.out_dir, workers: cli.workers };
            match run::run(&cfg, &opts) {
                Ok(out) => {
                    report(&out);
                    if out.all_failed() {
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

fn report(out: &RunOutput) {
    for rec in out.records() {
        let tag = rec.seed.map(|s| format!("seed {s}: ")).unwrap_or_default();
        match (&rec.error, &rec.summary) {
            (Some(e), _) => println!("{tag}failed: {e}"),
            (None, Some(s)) => println!(
                "{tag}{} rows, {} converged, min gap canonical {:?} optimized {:?}, final ratio {:.6}",
                rec.rows.len(),
                s.n_converged,
                s.min_gap_canonical,
                s.min_gap_optimized,
                s.improvement_ratio
            ),
            (None, None) => println!("{tag}no rows"),
        }
    }
    if let RunOutput::Batch(b) = out {
        if let Some(m) = b.mean_improvement_ratio {
            println!("mean improvement ratio {m:.6} over {} instances", b.instances.len());
        }
    }
}
