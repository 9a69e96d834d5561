//! `twophase` command-line tool.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when training
//! hits a non-finite loss, 1 for anything else. The worker thread count is
//! taken from `RAYON_NUM_THREADS`.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twophase::harness::{
    evaluate_run, export_saved_fields, parse_rows, run_example, sweep, track_only, write_sweep_csv, ConfigError,
    HarnessError, MetricsReport, RunConfig,
};

#[derive(Parser)]
#[command(name = "twophase", version, about = "Neural-network solver for two-phase flow with moving interfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration.
    Run { config: PathBuf },
    /// Train one configuration per sampling row and tabulate the errors.
    Sweep { config: PathBuf, rows: PathBuf },
    /// Recompute metrics and fields from a checkpoint.
    Eval { checkpoint: PathBuf, config: PathBuf },
    /// Write the tracked interface stored in a checkpoint.
    Track { checkpoint: PathBuf, config: PathBuf },
    /// Write predicted and exact fields at the terminal time.
    ExportFields { checkpoint: PathBuf, config: PathBuf },
}

fn print_report(r: &MetricsReport) {
    println!("epochs            {}", r.epochs);
    println!("gen-error (v)     {:.4e}", r.gen_error_velocity);
    println!("gen-error (p)     {:.4e}", r.gen_error_pressure);
    println!("loss error        {:.4e}", r.loss_error);
    if r.wall_time_s > 0.0 {
        println!("wall time         {:.1} s", r.wall_time_s);
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_example(&cfg)?;
            print_report(&out.report);
        }
        Command::Sweep { config, rows } => {
            let cfg = RunConfig::load(&config)?;
            let text = std::fs::read_to_string(&rows).map_err(|source| ConfigError::Io { path: rows, source })?;
            let specs = parse_rows(&text)?;
            let table = sweep(&specs, &cfg)?;
            let path = cfg.output.join("sweep.csv");
            write_sweep_csv(&path, &table)?;
            for r in &table {
                println!(
                    "{:>10} {:>10} {:>7} {:>7}  {:.3e}  {:.3e}",
                    r.m_l, r.m_b, r.m_gamma, r.m_i, r.gen_error, r.loss_error
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Eval { checkpoint, config } => {
            let cfg = RunConfig::load(&config)?;
            print_report(&evaluate_run(&cfg, &checkpoint)?);
        }
        Command::Track { checkpoint, config } => {
            let cfg = RunConfig::load(&config)?;
            println!("wrote {}", track_only(&cfg, &checkpoint)?.display());
        }
        Command::ExportFields { checkpoint, config } => {
            let cfg = RunConfig::load(&config)?;
            println!("wrote {}", export_saved_fields(&cfg, &checkpoint)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
