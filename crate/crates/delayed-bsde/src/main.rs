use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use delayed_bsde::cli::{compare, run, ExperimentConfig};
use delayed_bsde::error::{Error, Result};
use delayed_bsde::estimates::{d_p, lambda_p, smallness_advisory, PNormSettings};

#[derive(Parser)]
#[command(name = "delayed-bsde", version, about = "Solver for delayed backward SDEs with integrable data")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write its artifacts.
    Solve { config: PathBuf },
    /// Compare the artifacts of two completed runs.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
    /// Print the closed-form constants and the smallness advisory.
    Constants {
        #[arg(long)]
        p: f64,
        #[arg(long, short = 'k')]
        k: f64,
        #[arg(long, short = 't')]
        t: f64,
        /// Multiplier standing in for the growth constant in the advisory.
        #[arg(long, default_value_t = 1.0)]
        cq_multiplier: f64,
    },
}

fn main() -> ExitCode {
    match dispatch(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(args: Args) -> Result<()> {
    match args.command {
        Command::Solve { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let artifacts = run(&cfg)?;
            println!(
                "scenario {} finished: converged = {}, artifacts in {}",
                cfg.scenario.name,
                artifacts.converged,
                artifacts.dir.display()
            );
            if !artifacts.converged {
                return Err(Error::numerical(
                    "picard iteration",
                    "did not reach tolerance within the configured iteration budget",
                ));
            }
            Ok(())
        }
        Command::Compare { dir_a, dir_b } => {
            let report = compare(&dir_a, &dir_b)?;
            for f in &report.files {
                let detail = if f.shape_mismatch {
                    "shape mismatch".to_string()
                } else {
                    match f.max_abs_diff {
                        Some(d) => format!("max abs diff {d:.3e}"),
                        None => "binary".to_string(),
                    }
                };
                println!(
                    "{:<16} {} ({detail})",
                    f.file,
                    if f.bit_equal { "identical" } else { "DIFFERS" }
                );
            }
            println!(
                "runs are {}",
                if report.all_bit_equal {
                    "bit-identical"
                } else {
                    "not identical"
                }
            );
            Ok(())
        }
        Command::Constants { p, k, t, cq_multiplier } => {
            let settings = PNormSettings::new(p, k, t)?;
            let lambda = lambda_p(p)?;
            let dp = d_p(&settings);
            let adv = smallness_advisory(&settings, cq_multiplier);
            println!("p = {p}, K = {k}, T = {t}");
            println!("lambda_p = {lambda:.12e}");
            match dp.value {
                Some(v) => println!("d_p = {v:.12e} (denominator {:.6e})", dp.denominator),
                None => println!(
                    "d_p = infeasible (denominator {:.6e} <= 0)",
                    dp.denominator
                ),
            }
            println!(
                "advisory: contraction = {:.6e}, multiplier = {cq_multiplier}, product {} 1 => {}",
                adv.contraction,
                if adv.advisory { "<" } else { ">=" },
                if adv.advisory {
                    "parameters inside the guaranteed regime"
                } else {
                    "outside the guaranteed regime (solver still runs; convergence is empirical)"
                }
            );
            Ok(())
        }
    }
}
