use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::metrics::matched_l1_error;
use crate::model::ProbabilityVector;
use crate::rng::{stream_rng, STREAM_BASELINE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub trials: usize,
    pub mean: f64,
    /// Sample variance across trials; 0 for a single trial.
    pub variance: f64,
    pub scores: Vec<f64>,
}

/// Score `m` simplex-uniform guesses against `truth`, `trials` times.
pub fn random_baseline(
    d: usize,
    m: usize,
    trials: usize,
    seed: u64,
    truth: &[ProbabilityVector],
) -> Result<BaselineStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if truth.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "m = {m} but {} true components",
            truth.len()
        )));
    }
    let mut rng = stream_rng(seed, STREAM_BASELINE);
    let mut scores = Vec::with_capacity(trials);
    for _ in 0..trials {
        let guess = (0..m)
            .map(|_| {
                // Normalised iid exponentials are Dirichlet(1, ..., 1).
                let e: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                ProbabilityVector::normalized(e)
            })
            .collect::<Result<Vec<_>>>()?;
        scores.push(matched_l1_error(truth, &guess)?);
    }
    let (mean, variance) = mean_and_variance(&scores);
    Ok(BaselineStats {
        trials,
        mean,
        variance,
        scores,
    })
}

pub(super) fn mean_and_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let variance = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, variance)
}
