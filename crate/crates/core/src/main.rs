use clap::Parser;
use conical_spectra::cli::{run_with_threads, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Spectra and determinants of Laplacians on branched covers of the sphere.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory for report.json and CSV tables
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("io: {}: {e}", args.config.display()))
        .and_then(|text| RunConfig::from_json(&text).map_err(|e| e.to_string()))
        .and_then(|mut cfg| {
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let report = run_with_threads(&cfg, args.threads).map_err(|e| e.to_string())?;
            report.write(&args.out).map_err(|e| e.to_string())?;
            Ok(report)
        });
    match result {
        Ok(report) => {
            for v in &report.verdicts {
                println!(
                    "{} {}: {:.3e} (tol {:.1e})",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.name,
                    v.value,
                    v.tolerance
                );
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
