use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lsa_precoding::channel::{build_covariances, ScenarioConfig};
use lsa_precoding::coordination::{interference_free_rate, select_strategy};
use lsa_precoding::plot::write_plots;
use lsa_precoding::sim::{run_sweep, Scheme, SweepAxis, SweepSpec};
use lsa_precoding::verify::{run_lemma_suite, SuiteConfig};
use lsa_precoding::Error;

/// Coordinated precoding for a shared-spectrum two-pair MISO downlink.
#[derive(Debug, Parser)]
#[command(name = "lsa-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep SNR or the incumbent threshold and write a CSV of rates.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Comma-separated axis values; defaults to the standard grid.
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<f64>>,
        /// TOML scenario file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo draws per point.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for SVG charts.
        #[arg(long)]
        plots: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme, default_value = "coordinated,inttemp,benchmark")]
        schemes: Vec<Scheme>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Print the resolved eight-strategy table for a scenario.
    Strategies {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare the closed-form expectations with Monte Carlo estimates.
    VerifyLemmas {
        /// Draws per check for the two rate expressions.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Draws per check for the ratio expectation; 10x `samples` by default.
        #[arg(long)]
        ratio_samples: Option<usize>,
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(path: Option<&PathBuf>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::from_file(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

enum Outcome {
    Done,
    Infeasible,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Sweep {
            axis,
            points,
            config,
            seed,
            samples,
            out,
            plots,
            schemes,
            workers,
        } => {
            let mut base = load_config(config.as_ref())?;
            if let Some(seed) = seed {
                base.seed = seed;
            }
            if let Some(n) = samples {
                base.n_samples = n;
            }
            let spec = SweepSpec {
                axis,
                points: points.unwrap_or_else(|| axis.default_points()),
                base,
                schemes,
                workers,
            };
            let report = run_sweep(&spec)?;
            report
                .write_csv(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(dir) = plots {
                for path in write_plots(&report, &dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            let infeasible: Vec<f64> = report
                .points
                .iter()
                .filter(|p| !p.feasible)
                .map(|p| p.axis_value)
                .collect();
            if !infeasible.is_empty() {
                eprintln!("infeasible at {axis} = {infeasible:?}");
            }
            Ok(if report.any_feasible() {
                Outcome::Done
            } else {
                Outcome::Infeasible
            })
        }
        Command::Strategies { config } => {
            let cfg = load_config(config.as_ref())?;
            let cov = build_covariances(&cfg)?;
            let free = interference_free_rate(&cfg, &cov)?;
            println!("interference-free incumbent rate: {free:.6} (tau1 = {})", cfg.tau1);
            let selection = match select_strategy(&cfg, &cov) {
                Ok(s) => s,
                Err(Error::Infeasible { .. }) => {
                    eprintln!("scenario infeasible: tau1 exceeds the interference-free rate");
                    return Ok(Outcome::Infeasible);
                }
                Err(e) => return Err(e.into()),
            };
            println!(
                "{:<12} {:>12} {:>12} {:>10} {:>10} {:>9}",
                "strategy", "p1", "p2", "bound_rx1", "bound_rx2", "feasible"
            );
            for (i, s) in selection.table.iter().enumerate() {
                let mark = if i == selection.selected { " *" } else { "" };
                println!(
                    "{:<12} {:>12.6} {:>12.6} {:>10.6} {:>10.6} {:>9}{mark}",
                    s.name(),
                    s.powers[0],
                    s.powers[1],
                    s.incumbent_bound.value,
                    s.licensee_bound.value,
                    s.feasible
                );
            }
            Ok(Outcome::Done)
        }
        Command::VerifyLemmas {
            samples,
            ratio_samples,
            cases,
            seed,
            workers,
        } => {
            let cfg = SuiteConfig {
                cases,
                rate_samples: samples,
                ratio_samples: ratio_samples.unwrap_or(samples.saturating_mul(10)),
                seed,
                workers,
            };
            let checks = run_lemma_suite(&cfg)?;
            let mut failed = 0;
            for c in &checks {
                let ok = c.passed(3.0);
                if !ok {
                    failed += 1;
                }
                println!("{} {c}", if ok { "PASS" } else { "FAIL" });
            }
            println!(
                "{} of {} checks within 3 standard errors",
                checks.len() - failed,
                checks.len()
            );
            if failed > 0 {
                bail!("{failed} checks outside 3 standard errors");
            }
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(e) => {
            if let Some(Error::Infeasible { tau1, max_rate }) = e.downcast_ref::<Error>() {
                eprintln!("infeasible: tau1 = {tau1} exceeds the interference-free rate {max_rate:.6}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
