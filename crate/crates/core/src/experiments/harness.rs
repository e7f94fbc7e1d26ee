use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::mean_and_variance;
use super::metrics::matched_l1_error;
use crate::model::{DominatingScheme, MixtureSpec};
use crate::recovery::{recover_full, RecoveryConfig};
use crate::sampling::{draw_groups, draw_tally};
use crate::{Error, Result};

/// How replicate data are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Sample each group's tally directly; cost independent of the group size.
    #[default]
    Tally,
    /// Sample every draw and keep the raw groups.
    Groups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mixture: MixtureSpec,
    pub group_size: usize,
    pub n_groups: u64,
    pub reps: usize,
    /// Overrides `recovery.dominating`.
    pub dominating: DominatingScheme,
    /// `seed` inside is ignored; each replicate uses `seed + rep`.
    pub recovery: RecoveryConfig,
    pub seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self =
            serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.n_groups == 0 || self.group_size == 0 {
            return Err(Error::InvalidArgument(
                "group_size and n_groups must be positive".into(),
            ));
        }
        if self.recovery.m != self.mixture.num_components() {
            return Err(Error::InvalidArgument(format!(
                "recovery.m = {} but the mixture has {} components",
                self.recovery.m,
                self.mixture.num_components()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub failure: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub scheme: String,
    pub reps: Vec<RepOutcome>,
    /// Over successful replicates only; `None` if every replicate failed.
    pub mean: Option<f64>,
    /// Sample variance over successful replicates.
    pub variance: Option<f64>,
    pub failures: usize,
    pub wall_seconds: f64,
    pub seed: u64,
}

impl ExperimentReport {
    pub fn errors(&self) -> Vec<f64> {
        self.reps.iter().filter_map(|r| r.error).collect()
    }

    /// Copy with every timing zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        out.wall_seconds = 0.0;
        out.reps.iter_mut().for_each(|r| r.seconds = 0.0);
        out
    }

    /// Columns `scheme,n_groups,rep,error,seconds`; failed replicates leave `error` empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,n_groups,rep,error,seconds\n");
        for r in &self.reps {
            let err = r.error.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                self.scheme, self.config.n_groups, r.rep, err, r.seconds
            );
        }
        s
    }

    /// CSV when the path ends in `.csv`, JSON otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let body = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            self.to_csv()
        } else {
            serde_json::to_string_pretty(self)?
        };
        std::fs::write(path, body)?;
        Ok(())
    }
}

fn run_rep(cfg: &ExperimentConfig, rep: usize) -> RepOutcome {
    let start = Instant::now();
    let seed = cfg.seed.wrapping_add(rep as u64);
    let mut rc = cfg.recovery.clone();
    rc.dominating = cfg.dominating.clone();
    rc.seed = seed;
    let outcome = (|| {
        let fit = match cfg.sampler {
            Sampler::Tally => {
                let h = draw_tally(&cfg.mixture, cfg.group_size, cfg.n_groups, seed)?;
                recover_full(&h, &rc)?
            }
            Sampler::Groups => {
                let ds = draw_groups(&cfg.mixture, cfg.group_size, cfg.n_groups as usize, seed)?;
                recover_full(&ds, &rc)?
            }
        };
        matched_l1_error(cfg.mixture.components(), &fit.components)
    })();
    let (error, failure) = match outcome {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    RepOutcome {
        rep,
        seed,
        error,
        failure,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Run every replicate and aggregate. Replicates are independent; results are
/// ordered by replicate index whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let reps: Vec<RepOutcome> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_rep(cfg, r))
        .collect();
    let errors: Vec<f64> = reps.iter().filter_map(|r| r.error).collect();
    let (mean, variance) = if errors.is_empty() {
        (None, None)
    } else {
        let (m, v) = mean_and_variance(&errors);
        (Some(m), Some(v))
    };
    let report = ExperimentReport {
        config: cfg.clone(),
        scheme: cfg.dominating.to_string(),
        failures: reps.len() - errors.len(),
        reps,
        mean,
        variance,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
    };
    if let Some(path) = &cfg.output {
        report.write(path)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sampler: Sampler) -> ExperimentConfig {
        ExperimentConfig {
            mixture: MixtureSpec::reference_three_component(),
            group_size: 5,
            n_groups: 2_000,
            reps: 3,
            dominating: DominatingScheme::Fixed(vec![9.0, 4.0, 1.0]),
            recovery: RecoveryConfig::new(3),
            seed: 11,
            sampler,
            output: None,
        }
    }

    #[test]
    fn reports_are_reproducible() {
        for sampler in [Sampler::Tally, Sampler::Groups] {
            let a = run_experiment(&small(sampler)).unwrap();
            let b = run_experiment(&small(sampler)).unwrap();
            assert_eq!(a.without_timings(), b.without_timings());
            assert_eq!(a.reps.len(), 3);
            assert_eq!(a.reps[2].seed, 13);
            let mean = a.mean.unwrap();
            assert!((0.0..=2.0).contains(&mean));
            assert!(a.variance.unwrap() >= 0.0);
        }
    }

    #[test]
    fn failures_are_recorded_not_dropped() {
        let mut cfg = small(Sampler::Tally);
        cfg.group_size = 3;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.failures, 3);
        assert!(report.mean.is_none());
        assert!(report
            .reps
            .iter()
            .all(|r| r.failure.as_deref().unwrap().starts_with("config")));
        let csv = report.to_csv();
        assert!(csv.starts_with("scheme,n_groups,rep,error,seconds\n"));
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("fixed:9,4,1,2000,0,,"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(Sampler::Tally);
        cfg.reps = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small(Sampler::Tally);
        cfg.recovery.m = 2;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = small(Sampler::Groups);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"dominating\":\"fixed:9,4,1\""));
        assert!(text.contains("\"sampler\":\"groups\""));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
