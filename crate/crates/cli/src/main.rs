use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rrcli::dataset;
use rrcli::harness::{self, Overrides};
use rrcli::optimizer::Algorithm;
use rrcli::problem;
use rrcli::variance_lab;
use rrcli::Error;

#[derive(Parser)]
#[command(name = "rrcli", version, about = "Federated optimization with regularized client participation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a config or manifest
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated master seeds
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated algorithms (rrcli, rrcli_wr, nastya, fedavg)
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<Algorithm>>,
        /// Comma-separated step-size multipliers
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
        #[arg(long)]
        decay: bool,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Check the variance closed forms against exhaustive enumeration
    VerifyVariance {
        #[arg(long, default_value_t = 8)]
        max_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the L2-regularized logistic optimum of a LIBSVM file
    SolveOptimum {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5e-4)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 12)]
        clients: usize,
        #[arg(long, default_value_t = 0)]
        partition_seed: u64,
        /// Write the optimum sidecar here
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> rrcli::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            algo,
            multipliers,
            decay,
            epochs,
        } => {
            let mut cfg = harness::load_config(&config)?;
            Overrides {
                out_dir: out,
                seeds,
                algorithms: algo,
                multipliers,
                decay: decay.then_some(true),
                epochs,
            }
            .apply(&mut cfg);
            let result = harness::run_experiment(&cfg)?;
            for f in &result.files {
                println!("{}", f.display());
            }
            for b in &result.manifest.best {
                eprintln!(
                    "{}: best multiplier {} (final mean dist_sq {:e})",
                    b.algorithm.name(),
                    b.multiplier,
                    b.final_dist_sq_mean
                );
            }
            if !result.manifest.all_diverged.is_empty() {
                let names: Vec<&str> = result.manifest.all_diverged.iter().map(|a| a.name()).collect();
                return Err(Error::AllDiverged(names.join(",")));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyVariance { max_size, seed } => {
            let reports = variance_lab::verify_all(max_size, seed)?;
            let mut failed = 0;
            for r in &reports {
                println!(
                    "{} M={} N={} C={} max_rel_err={:e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.clients,
                    r.per_client,
                    r.cohort,
                    r.max_rel_err
                );
                failed += usize::from(!r.passed);
            }
            println!("{} of {} configurations agree", reports.len() - failed, reports.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::SolveOptimum {
            dataset: path,
            alpha,
            tol,
            clients,
            partition_seed,
            sidecar,
        } => {
            let ds = dataset::load_libsvm(&path)?;
            let part = dataset::partition(&ds, clients, partition_seed)?;
            let p: rrcli::Problem = problem::logistic_problem(&part, &ds, alpha)?;
            let opt = problem::solve_optimum(&p, tol)?;
            if let Some(sc) = &sidecar {
                problem::write_optimum(sc, &opt.x_star, opt.grad_norm)?;
            }
            let summary = serde_json::json!({
                "rows": ds.count(),
                "dim": p.dim(),
                "clients": clients,
                "per_client": p.per_client(),
                "smoothness": p.smoothness(),
                "strong_convexity": p.strong_convexity(),
                "condition_number": p.condition_number(),
                "f_star": opt.f_star,
                "grad_norm": opt.grad_norm,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
