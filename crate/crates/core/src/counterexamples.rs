//! Pairs of distinct mixtures whose grouped-sample laws agree up to a given group size.
//!
//! Take `t` distinct mixing levels `ε_i` and the segment `μ_i = ε_i γ + (1 − ε_i) γ′`.
//! The `t` vectors `(C(t−2,k) ε_i^k (1−ε_i)^{t−2−k})_k` live in `R^{t−1}`, so some
//! signed combination `Σ α_i` of them vanishes; that combination also kills
//! `Σ α_i μ_i^{⊗(t−2)}`. Splitting the indices by the sign of `α_i` and normalising
//! each side gives two mixtures with identical moments up to order `t − 2`.

use serde::{Deserialize, Serialize};

use crate::model::{population_moment, MixtureSpec, ProbabilityVector};
use crate::tensor::{right_singular_system, MatOperator};
use crate::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
const NULL_TOL: f64 = 1e-10;

/// Which boundary the pair witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterexampleKind {
    /// `t = 2m`: two order-`m` mixtures equal at group size `2m − 2`.
    Identifiability,
    /// `t = 2m + 1`: orders `m` and `m + 1`, equal at group size `2m − 1`.
    Determinedness,
}

impl CounterexampleKind {
    pub fn t(self, m: usize) -> usize {
        match self {
            CounterexampleKind::Identifiability => 2 * m,
            CounterexampleKind::Determinedness => 2 * m + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexamplePair {
    /// Components with negative coefficient.
    pub p: MixtureSpec,
    /// Components with positive coefficient.
    pub p_prime: MixtureSpec,
    pub t: usize,
    /// Highest order at which the two moment tensors agree (`t − 2`).
    pub eq_order: usize,
    pub epsilons: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub order: usize,
    pub max_abs_diff: f64,
    pub equal: bool,
}

/// A pair together with its checks at orders `t − 2` and `t − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    #[serde(flatten)]
    pub pair: CounterexamplePair,
    pub checks: Vec<MomentCheck>,
}

/// `ε_i = i / (t − 1)`, `i = 0, ..., t − 1`.
pub fn default_epsilons(t: usize) -> Vec<f64> {
    (0..t).map(|i| i as f64 / (t - 1) as f64).collect()
}

/// `γ = δ_1`, `γ′ = δ_2` on two categories.
pub fn default_base() -> (ProbabilityVector, ProbabilityVector) {
    (
        ProbabilityVector::new(vec![1.0, 0.0]).expect("point mass"),
        ProbabilityVector::new(vec![0.0, 1.0]).expect("point mass"),
    )
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Unit null vector of the `(t−1) x t` matrix `M[k][i] = C(t−2,k) ε_i^k (1−ε_i)^{t−2−k}`,
/// signed so the last entry is positive.
pub fn dependence_coefficients(epsilons: &[f64]) -> Result<Vec<f64>> {
    let t = epsilons.len();
    if t < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 levels, got {t}"
        )));
    }
    for (i, a) in epsilons.iter().enumerate() {
        if epsilons[..i].contains(a) {
            return Err(Error::InvalidArgument(format!(
                "mixing level {a} is repeated"
            )));
        }
    }
    let n = t - 2;
    let mut m = MatOperator::zeros(t - 1, t);
    for (i, &e) in epsilons.iter().enumerate() {
        for k in 0..=n {
            m.set(
                k,
                i,
                binomial(n, k) * e.powi(k as i32) * (1.0 - e).powi((n - k) as i32),
            );
        }
    }
    let (sv, vectors) = right_singular_system(&m);
    let top = sv[0];
    let null_dim = sv.iter().filter(|&&s| s < NULL_TOL * top).count();
    if null_dim != 1 {
        return Err(Error::NullSpaceDimension { dim: null_dim });
    }
    let mut alpha = vectors.column(t - 1);
    if alpha.iter().any(|a| a.abs() < NULL_TOL) {
        return Err(Error::InvalidArgument(
            "mixing levels are numerically indistinct".into(),
        ));
    }
    if alpha[t - 1] < 0.0 {
        alpha.iter_mut().for_each(|a| *a = -*a);
    }
    Ok(alpha)
}

/// Build the pair for `m` components per side and `t ∈ {2m, 2m + 1}` levels.
pub fn build_pair(
    m: usize,
    t: usize,
    base: &(ProbabilityVector, ProbabilityVector),
    epsilons: Option<&[f64]>,
) -> Result<CounterexamplePair> {
    if m == 0 || (t != 2 * m && t != 2 * m + 1) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} must be 2m or 2m + 1 for m = {m} >= 1"
        )));
    }
    let (gamma, gamma_prime) = base;
    if gamma.dim() != gamma_prime.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            found: gamma_prime.dim(),
        });
    }
    if gamma == gamma_prime {
        return Err(Error::InvalidArgument("base measures must differ".into()));
    }
    let eps = match epsilons {
        Some(e) => e.to_vec(),
        None => default_epsilons(t),
    };
    if eps.len() != t {
        return Err(Error::InvalidArgument(format!(
            "expected {t} mixing levels, got {}",
            eps.len()
        )));
    }
    if let Some(e) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidArgument(format!(
            "mixing level {e} outside [0, 1]"
        )));
    }

    let mut alphas = dependence_coefficients(&eps)?;
    let negatives = alphas.iter().filter(|&&a| a < 0.0).count();
    if negatives > t / 2 {
        alphas.iter_mut().for_each(|a| *a = -*a);
    }

    let component = |e: f64| {
        let v = gamma
            .as_slice()
            .iter()
            .zip(gamma_prime.as_slice())
            .map(|(a, b)| e * a + (1.0 - e) * b)
            .collect();
        ProbabilityVector::normalized(v)
    };
    let side = |negative: bool| -> Result<MixtureSpec> {
        let idx: Vec<usize> = (0..t).filter(|&i| (alphas[i] < 0.0) == negative).collect();
        let total: f64 = idx.iter().map(|&i| alphas[i].abs()).sum();
        let weights = idx.iter().map(|&i| alphas[i].abs() / total).collect();
        let comps = idx
            .iter()
            .map(|&i| component(eps[i]))
            .collect::<Result<_>>()?;
        MixtureSpec::new(weights, comps)
    };
    Ok(CounterexamplePair {
        p: side(true)?,
        p_prime: side(false)?,
        t,
        eq_order: t - 2,
        epsilons: eps,
        alphas,
    })
}

/// Sup-norm distance between the order-`n` population moments of two mixtures.
pub fn verify_moment_equality(
    p: &MixtureSpec,
    p_prime: &MixtureSpec,
    n: usize,
    tol: f64,
) -> Result<MomentCheck> {
    if n == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if p.dim() != p_prime.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: p_prime.dim(),
        });
    }
    let max_abs_diff = population_moment(p, n).max_abs_diff(&population_moment(p_prime, n))?;
    Ok(MomentCheck {
        order: n,
        max_abs_diff,
        equal: max_abs_diff <= tol,
    })
}

impl CounterexamplePair {
    /// Checks at orders `t − 2` (expected equal) and `t − 1` (expected different).
    pub fn report(self, tol: f64) -> Result<CounterexampleReport> {
        let checks = [self.t - 2, self.t - 1]
            .into_iter()
            .map(|n| verify_moment_equality(&self.p, &self.p_prime, n, tol))
            .collect::<Result<_>>()?;
        Ok(CounterexampleReport { pair: self, checks })
    }
}
