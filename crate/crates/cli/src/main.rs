//! `groupmix` command-line interface.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use groupmix::counterexamples::{build_pair, default_base, CounterexampleKind};
use groupmix::experiments::{random_baseline, run_experiment, ExperimentConfig};
use groupmix::model::{parse_csv, DominatingScheme, MixtureSpec, ProbabilityVector};
use groupmix::multinomial::{multinomial_mixture_distance, WeightedMultinomial};
use groupmix::recovery::{estimate_num_components, recover_full, ProbeKind, RecoveryConfig};
use groupmix::sampling::{draw_groups, GroupedDataset};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "groupmix",
    version,
    about = "Recover mixtures of categorical measures from grouped samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Probe {
    Gaussian,
    Singular,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Identifiability,
    Determinedness,
}

#[derive(Subcommand)]
enum Command {
    /// Recover components and weights from a grouped data file.
    Recover {
        /// One group per line, categories 1..=d separated by whitespace; `-` reads stdin.
        #[arg(long)]
        data: String,
        #[arg(long)]
        m: usize,
        /// Expected group size; checked against the data.
        #[arg(long)]
        group_size: Option<usize>,
        /// Number of categories; defaults to the largest category seen.
        #[arg(long)]
        d: Option<usize>,
        /// none | uniform | sqgauss:<sigma> | fixed:<y1>,<y2>,...
        #[arg(long, default_value = "none")]
        dominating: DominatingScheme,
        #[arg(long, value_enum, default_value_t = Probe::Gaussian)]
        probe: Probe,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replicated recovery experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// `.csv` writes one row per replicate; anything else writes JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build two distinct mixtures with matching low-order moments.
    Counterexample {
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Comma-separated mixing levels; defaults to an even grid on [0, 1].
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether two multinomial mixtures induce the same law.
    MultinomialCheck {
        /// JSON list of {"weight", "trials", "p"}.
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Estimate the number of components from the rank of a moment unfolding.
    Rank {
        #[arg(long)]
        data: String,
        #[arg(long)]
        power: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        max_m: usize,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Score uniformly random guesses against a true mixture.
    Baseline {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// JSON mixture {"weights", "components"} or a plain list of components.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw grouped samples from a mixture and write them in the data format.
    Sample {
        /// JSON mixture {"weights", "components"}.
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long)]
        group_size: usize,
        #[arg(long)]
        n_groups: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

fn read_data(path: &str, d: Option<usize>) -> Result<GroupedDataset> {
    let ds = if path == "-" {
        GroupedDataset::read_text(io::stdin().lock(), d)
    } else {
        let file = File::open(path).with_context(|| format!("opening {path}"))?;
        GroupedDataset::read_text(BufReader::new(file), d)
    };
    ds.with_context(|| format!("reading groups from {path}"))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn read_truth(path: &Path) -> Result<Vec<ProbabilityVector>> {
    let value: serde_json::Value = read_json(path)?;
    if value.is_array() {
        return Ok(serde_json::from_value(value)?);
    }
    let mix: MixtureSpec = serde_json::from_value(value)?;
    Ok(mix.components().to_vec())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Recover {
            data,
            m,
            group_size,
            d,
            dominating,
            probe,
            seed,
            out,
        } => {
            let ds = read_data(&data, d)?;
            if let Some(k) = group_size {
                if k != ds.group_size() {
                    bail!(
                        "--group-size {k} but the data have groups of {}",
                        ds.group_size()
                    );
                }
            }
            let mut cfg = RecoveryConfig::new(m);
            cfg.dominating = dominating;
            cfg.probe = match probe {
                Probe::Gaussian => ProbeKind::Gaussian,
                Probe::Singular => ProbeKind::Singular,
            };
            cfg.seed = seed;
            let fit = recover_full(&ds, &cfg)?;
            emit(&serde_json::to_string_pretty(&fit)?, out.as_deref())
        }
        Command::Experiment { config, out } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if out.is_some() {
                cfg.output = out;
            }
            let report = run_experiment(&cfg)?;
            if cfg.output.is_none() {
                emit(&serde_json::to_string_pretty(&report)?, None)?;
            }
            eprintln!(
                "{}: mean {:?}, variance {:?}, failures {}",
                report.scheme, report.mean, report.variance, report.failures
            );
            Ok(())
        }
        Command::Counterexample {
            m,
            kind,
            eps,
            tol,
            out,
        } => {
            let kind = match kind {
                Kind::Identifiability => CounterexampleKind::Identifiability,
                Kind::Determinedness => CounterexampleKind::Determinedness,
            };
            let eps = eps.as_deref().map(parse_csv).transpose()?;
            let pair = build_pair(m, kind.t(m), &default_base(), eps.as_deref())?;
            let report = pair.report(tol)?;
            emit(&serde_json::to_string_pretty(&report)?, out.as_deref())
        }
        Command::MultinomialCheck { a, b, tol } => {
            let a: Vec<WeightedMultinomial> = read_json(&a)?;
            let b: Vec<WeightedMultinomial> = read_json(&b)?;
            let distance = multinomial_mixture_distance(&a, &b)?;
            let body = json!({ "max_abs_diff": distance, "equal": distance <= tol });
            emit(&body.to_string(), None)
        }
        Command::Rank {
            data,
            power,
            tol,
            max_m,
            d,
        } => {
            let ds = read_data(&data, d)?;
            let rank = estimate_num_components(&ds, power, max_m, tol)?;
            emit(
                &json!({ "power": power, "estimate": rank }).to_string(),
                None,
            )
        }
        Command::Baseline {
            d,
            m,
            trials,
            truth,
            seed,
        } => {
            let truth = read_truth(&truth)?;
            let stats = random_baseline(d, m, trials, seed, &truth)?;
            let body =
                json!({ "trials": stats.trials, "mean": stats.mean, "variance": stats.variance });
            emit(&body.to_string(), None)
        }
        Command::Sample {
            mixture,
            group_size,
            n_groups,
            seed,
            out,
        } => {
            let mix: MixtureSpec = read_json(&mixture)?;
            let ds = draw_groups(&mix, group_size, n_groups, seed)?;
            let mut buf = Vec::new();
            ds.write_text(&mut buf)?;
            emit(std::str::from_utf8(&buf)?, out.as_deref())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
