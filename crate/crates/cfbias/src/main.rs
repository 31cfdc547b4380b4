use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfbias::dgp::{gen_toy, ToyKind};
use cfbias::harness::{emit_plots, read_bias_csv, read_results_csv, run_sweep, ExperimentConfig};
use cfbias::ingest::{build_empirical_dataset, load_csv, save_dataset};
use cfbias::policy::{assign, PolicySource, PolicySpec};
use cfbias::selftest::run_selftest;

#[derive(Parser)]
#[command(name = "cfbias", version, about = "Treatment-assignment bias benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a toy dataset bundle.
    GenToy {
        /// toy1 | toy2 | toy3 | toy4
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Additive Gaussian outcome noise.
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble an empirical dataset bundle from covariate and dual-arm
    /// response tables.
    Ingest {
        #[arg(long)]
        cov: PathBuf,
        #[arg(long)]
        resp: PathBuf,
        #[arg(long)]
        arm0: String,
        #[arg(long)]
        arm1: String,
        /// Number of covariates to retain, by |correlation| with the mean
        /// arm response.
        #[arg(long, default_value_t = 200)]
        k: usize,
        /// Standardize each response arm before use.
        #[arg(long, default_value_t = false)]
        standardize_arms: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Instantiate one policy on a dataset bundle and print its bias
    /// report as JSON.
    Bias {
        /// Dataset bundle directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Y0 | Y1 | Effect | XRand | XPred | ToyCanonical
        #[arg(long)]
        source: String,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        seed: u64,
        /// Feature count for XRand / XPred scores.
        #[arg(long, default_value_t = 20)]
        m: usize,
    },
    /// Run a full sweep from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (CFBIAS_WORKERS overrides).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render SVG sweep panels from a results directory.
    Plot {
        /// Directory containing results.csv / biases.csv.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in property suite and print a JSON verdict.
    Selftest {
        /// Smaller grids and sample sizes.
        #[arg(long, default_value_t = false)]
        quick: bool,
    },
}

fn resolve_workers(flag: Option<usize>) -> Option<usize> {
    if let Ok(value) = std::env::var("CFBIAS_WORKERS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                return Some(n);
            }
        }
        eprintln!("warning: ignoring invalid CFBIAS_WORKERS={value:?}");
    }
    flag
}

fn run() -> cfbias::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenToy {
            kind,
            n,
            seed,
            noise_sd,
            out,
        } => {
            let kind = ToyKind::parse(&kind)?;
            let ds = gen_toy(kind, n, seed, noise_sd)?;
            save_dataset(&ds, &out, kind.name())?;
            println!("wrote {} units to {}", ds.n(), out.display());
            Ok(true)
        }
        Command::Ingest {
            cov,
            resp,
            arm0,
            arm1,
            k,
            standardize_arms,
            out,
        } => {
            let cov_load = load_csv(&cov)?;
            let resp_load = load_csv(&resp)?;
            if cov_load.dropped_rows > 0 || resp_load.dropped_rows > 0 {
                eprintln!(
                    "dropped {} covariate rows and {} response rows with missing or non-numeric cells",
                    cov_load.dropped_rows, resp_load.dropped_rows
                );
            }
            let ds = build_empirical_dataset(
                &cov_load.table,
                &resp_load.table,
                &arm0,
                &arm1,
                k,
                standardize_arms,
            )?;
            save_dataset(&ds, &out, &format!("empirical:{arm0}-vs-{arm1}"))?;
            println!(
                "wrote {} units x {} features to {}",
                ds.n(),
                ds.d(),
                out.display()
            );
            Ok(true)
        }
        Command::Bias {
            dataset,
            source,
            beta,
            seed,
            m,
        } => {
            let ds = cfbias::ingest::load_dataset(&dataset)?;
            let spec = PolicySpec {
                source: PolicySource::parse(&source)?,
                beta,
                m,
                seed,
            };
            let obs = assign(&ds, &spec)?;
            let report = cfbias::bias::bias_report(&obs)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Sweep {
            config,
            out,
            workers,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| cfbias::Error::Config("no output directory given".into()))?;
            let table = match resolve_workers(workers) {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| cfbias::Error::Config(format!("worker pool: {e}")))?;
                    pool.install(|| run_sweep(&cfg, &out_dir))?
                }
                None => run_sweep(&cfg, &out_dir)?,
            };
            let failed = table.rows.iter().filter(|r| r.status != "ok").count()
                + table.bias_rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} metric rows, {} bias rows, {} failed -> {}",
                table.rows.len(),
                table.bias_rows.len(),
                failed,
                out_dir.display()
            );
            Ok(failed == 0)
        }
        Command::Plot { results, out } => {
            let rows = read_results_csv(&results.join("results.csv"))?;
            let bias_rows = read_bias_csv(&results.join("biases.csv")).unwrap_or_default();
            let written = emit_plots(&rows, &bias_rows, &out)?;
            println!("wrote {} panels to {}", written.len(), out.display());
            Ok(true)
        }
        Command::Selftest { quick } => {
            let verdict = run_selftest(quick)?;
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            Ok(verdict.passed)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
