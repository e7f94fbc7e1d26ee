//! Spectral recovery of mixture components and weights.
//!
//! With `u_i = √w_i Ŵ (B p_i)^{⊗m−1}` orthonormal after whitening, the reshaped
//! whitened tensor satisfies `T Tᵀ = Σ (B p_i ⊗ u_i)(B p_i ⊗ u_i)ᵀ`. Its top `m`
//! eigenvectors, read as `d x d^{m−1}` matrices, are `B p_i u_iᵀ` up to scale, so a
//! contraction with any probe not orthogonal to `u_i` returns `B p_i` up to scale.

mod li4;

pub use li4::li_recover_4;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::StageExt;
use crate::estimation::{build_c_hat, build_e_hat, build_q_hat, MomentEstimate, MomentSource};
use crate::model::{
    b_map, random_dominating_measure, DiagonalMap, DominatingScheme, ProbabilityVector,
};
use crate::rng::{stream_rng, STREAM_PROBE};
use crate::tensor::{
    blockwise_apply, numerical_rank, outer_power, psd_sqrt_pinv, reshape_rows_first, sym_eig,
    unfold, BlockMap, MatOperator,
};
use crate::{Error, Result};

/// Probe contractions below this norm are redrawn.
const PROBE_NORM_FLOOR: f64 = 1e-10;
const PROBE_RETRIES: usize = 16;
/// Without clipping, entries more negative than this are an error; smaller ones are zeroed.
const NEGATIVE_TOL: f64 = 1e-9;
/// Gram eigenvalues below this fraction of the largest are treated as zero.
const GRAM_FLOOR: f64 = 1e-12;

/// How an eigenvector of `T̂T̂ᵀ` is collapsed to a single vector in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Contract with a seeded standard normal vector.
    Gaussian,
    /// Take the top left singular vector.
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSolver {
    /// Zero the negative least-squares weights, then rescale to sum 1.
    ClipRenormalize,
    /// Euclidean projection of the least-squares weights onto the simplex.
    SimplexProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    pub m: usize,
    pub dominating: DominatingScheme,
    pub probe: ProbeKind,
    pub clip_negatives: bool,
    pub eig_floor: f64,
    pub weight_solver: WeightSolver,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self::new(1)
    }
}

impl RecoveryConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            dominating: DominatingScheme::Unit,
            probe: ProbeKind::Gaussian,
            clip_negatives: true,
            eig_floor: 1e-8,
            weight_solver: WeightSolver::ClipRenormalize,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if !(self.eig_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eig_floor {} must be non-negative",
                self.eig_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Spectrum of the reshaped whitened operator, descending.
    pub tt_eigenvalues: Vec<f64>,
    /// Spectrum of `Ĉ`, descending.
    pub whitening_spectrum: Vec<f64>,
    pub weight_residual: f64,
    pub gram_singular: bool,
    /// The dominating measure actually used.
    pub dominating: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub components: Vec<ProbabilityVector>,
    pub weights: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub seed: u64,
    pub config: RecoveryConfig,
}

/// Least-squares weights and how well they fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    /// `‖Ê − Σ α_i p̂_i^{⊗r}‖_F` at the returned weights.
    pub residual: f64,
    /// The Gram system was rank deficient and was solved by pseudo-inverse.
    pub gram_singular: bool,
}

/// `Ŵ = Σ_{i≤m} λ_i^{-1/2} v_i v_iᵀ` over the top `m` eigenpairs of `Ĉ`.
pub fn whiten(c_hat: &MatOperator, m: usize, eig_floor: f64) -> Result<MatOperator> {
    psd_sqrt_pinv(c_hat, m, eig_floor)
}

/// Apply `I ⊗ Ŵ ⊗ Ŵ` to `Q̂` and reshape to `d^m x d^{m−1}` (first `m` axes index rows).
pub fn build_t_hat(q_hat: &MomentEstimate, w: &MatOperator) -> Result<MatOperator> {
    let order = q_hat.tensor.order();
    if order.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!(
            "T̂ needs an odd-order moment, got order {order}"
        )));
    }
    let m = order.div_ceil(2);
    let d = q_hat.tensor.dim();
    let side = d.pow((m - 1) as u32);
    if w.rows() != side || w.cols() != side {
        return Err(Error::ShapeMismatch(format!(
            "whitening map is {}x{}, expected {side}x{side}",
            w.rows(),
            w.cols()
        )));
    }
    let a_hat = if m == 1 {
        (*q_hat.tensor).clone()
    } else {
        blockwise_apply(
            &q_hat.tensor,
            &[
                BlockMap::Identity { axes: 1 },
                BlockMap::Linear { axes: m - 1, op: w },
                BlockMap::Linear { axes: m - 1, op: w },
            ],
        )?
    };
    Ok(reshape_rows_first(&a_hat, m))
}

/// `T̂T̂ᵀ`, symmetrised.
pub fn tt_operator(t_hat: &MatOperator) -> Result<MatOperator> {
    t_hat.gram_rows().symmetrized()
}

/// Top-`m` eigenvectors of `T̂T̂ᵀ` turned into probability vectors.
pub fn extract_components(
    t_hat: &MatOperator,
    m: usize,
    b: &DiagonalMap,
    probe: ProbeKind,
    seed: u64,
) -> Result<Vec<ProbabilityVector>> {
    let op = tt_operator(t_hat)?;
    Ok(components_from_operator(&op, m, b, probe, true, seed)?.0)
}

/// Shared extraction: `op` is `d^s x d^s` PSD with eigenvectors of the form
/// `B p_i ⊗ u_i`. Returns components and the full spectrum of `op`.
pub(crate) fn components_from_operator(
    op: &MatOperator,
    m: usize,
    b: &DiagonalMap,
    probe: ProbeKind,
    clip_negatives: bool,
    seed: u64,
) -> Result<(Vec<ProbabilityVector>, Vec<f64>)> {
    let d = b.dim();
    let n = op.rows();
    if d == 0 || !n.is_multiple_of(d) {
        return Err(Error::ShapeMismatch(format!(
            "operator side {n} is not a multiple of d = {d}"
        )));
    }
    let cols = n / d;
    let eig = sym_eig(op)?;
    if eig.eigenvalues.len() < m {
        return Err(Error::RankDeficient {
            wanted: m,
            available: eig.eigenvalues.len(),
        });
    }
    let binv = b.inverse();
    let components = (0..m)
        .map(|i| {
            let v = MatOperator::from_row_major(d, cols, eig.vector(i))?;
            component_from_eigenvector(&v, i, &binv, probe, clip_negatives, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((components, eig.eigenvalues))
}

/// `v` is the `i`-th eigenvector read as a `d x d^s` matrix.
fn component_from_eigenvector(
    v: &MatOperator,
    index: usize,
    binv: &DiagonalMap,
    probe: ProbeKind,
    clip_negatives: bool,
    seed: u64,
) -> Result<ProbabilityVector> {
    let x = match probe {
        ProbeKind::Gaussian => gaussian_contraction(v, index, seed)?,
        ProbeKind::Singular => sym_eig(&v.gram_rows().symmetrized()?)?.vector(0),
    };
    to_probability(binv.apply(&x), index, clip_negatives)
}

fn gaussian_contraction(v: &MatOperator, index: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, STREAM_PROBE + index as u64);
    for _ in 0..=PROBE_RETRIES {
        let g: Vec<f64> = (0..v.cols()).map(|_| rng.sample(StandardNormal)).collect();
        let x = v.matvec(&g)?;
        if x.iter().map(|a| a * a).sum::<f64>().sqrt() >= PROBE_NORM_FLOOR {
            return Ok(x);
        }
    }
    Err(Error::DegenerateEigenvector { index })
}

/// Fix the sign so the mass is positive, drop negative entries, renormalise.
fn to_probability(
    mut x: Vec<f64>,
    index: usize,
    clip_negatives: bool,
) -> Result<ProbabilityVector> {
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|a| *a = -*a);
    }
    let scale = x.iter().fold(0.0f64, |s, a| s.max(a.abs()));
    for a in x.iter_mut() {
        if *a < 0.0 {
            if !clip_negatives && *a < -NEGATIVE_TOL * scale {
                return Err(Error::NegativeComponent {
                    index,
                    value: *a / scale,
                });
            }
            *a = 0.0;
        }
    }
    ProbabilityVector::normalized(x).map_err(|_| Error::DegenerateComponent { index })
}

/// Fit `α` in `Ê ≈ Σ α_i p̂_i^{⊗r}` by least squares, then map onto the simplex.
pub fn recover_weights(
    e_hat: &MomentEstimate,
    components: &[ProbabilityVector],
    solver: WeightSolver,
) -> Result<WeightFit> {
    let m = components.len();
    if m == 0 {
        return Err(Error::InvalidArgument("no components".into()));
    }
    let (d, r) = (e_hat.tensor.dim(), e_hat.order);
    if let Some(p) = components.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.dim(),
        });
    }
    let powers: Vec<_> = components
        .iter()
        .map(|p| outer_power(p.as_slice(), r))
        .collect();
    let mut gram = MatOperator::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            gram.set(i, j, powers[i].dot(&powers[j]));
        }
    }
    let rhs: Vec<f64> = powers.iter().map(|p| p.dot(&e_hat.tensor)).collect();

    let eig = sym_eig(&gram)?;
    let top = eig.eigenvalues[0];
    let mut raw = vec![0.0; m];
    let mut gram_singular = false;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if !(lambda > GRAM_FLOOR * top) {
            gram_singular = true;
            continue;
        }
        let v = eig.vector(k);
        let coef = v.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for (x, vi) in raw.iter_mut().zip(&v) {
            *x += coef * vi;
        }
    }

    let weights = match solver {
        WeightSolver::ClipRenormalize => {
            let clipped: Vec<f64> = raw.iter().map(|&a| a.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            if !(total > 0.0) {
                return Err(Error::InvalidWeights(
                    "every least-squares weight is non-positive".into(),
                ));
            }
            clipped.into_iter().map(|a| a / total).collect()
        }
        WeightSolver::SimplexProjection => project_simplex(&raw),
    };

    let mut fitted = (*e_hat.tensor).clone();
    for (a, p) in weights.iter().zip(&powers) {
        fitted.add_scaled(-a, p)?;
    }
    Ok(WeightFit {
        weights,
        residual: fitted.frobenius_norm(),
        gram_singular,
    })
}

/// Closest point of the probability simplex in Euclidean norm.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// End-to-end recovery from any moment source with group size at least `2m − 1`.
pub fn recover_full(source: &dyn MomentSource, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    cfg.validate().stage("config")?;
    let m = cfg.m;
    if let Some(k) = source.max_order() {
        if k < 2 * m - 1 {
            return Err(Error::OrderTooLarge {
                order: 2 * m - 1,
                group_size: k,
            })
            .stage("config");
        }
    }
    let xi =
        random_dominating_measure(source.dim(), &cfg.dominating, cfg.seed).stage("dominating")?;
    let b = b_map(&xi);

    let c_hat = build_c_hat(source, m, Some(&b)).stage("c_hat")?;
    let whitening_spectrum = sym_eig(&c_hat).stage("whiten")?.eigenvalues;
    let w = whiten(&c_hat, m, cfg.eig_floor).stage("whiten")?;

    let q_hat = build_q_hat(source, m, Some(&b)).stage("q_hat")?;
    let t_hat = build_t_hat(&q_hat, &w).stage("t_hat")?;
    let op = tt_operator(&t_hat).stage("t_hat")?;
    let (components, tt_eigenvalues) =
        components_from_operator(&op, m, &b, cfg.probe, cfg.clip_negatives, cfg.seed)
            .stage("extract")?;

    let e_hat = build_e_hat(source, m).stage("e_hat")?;
    let fit = recover_weights(&e_hat, &components, cfg.weight_solver).stage("weights")?;

    Ok(RecoveryResult {
        components,
        weights: fit.weights,
        diagnostics: Diagnostics {
            tt_eigenvalues,
            whitening_spectrum,
            weight_residual: fit.residual,
            gram_singular: fit.gram_singular,
            dominating: xi.y().to_vec(),
        },
        seed: cfg.seed,
        config: cfg.clone(),
    })
}

/// `T̂T̂ᵀ` for a source under a given `B`; the object whose convergence the
/// consistency argument controls.
pub fn spectral_operator(
    source: &dyn MomentSource,
    m: usize,
    b: &DiagonalMap,
    eig_floor: f64,
) -> Result<MatOperator> {
    let c_hat = build_c_hat(source, m, Some(b))?;
    let w = whiten(&c_hat, m, eig_floor)?;
    let q_hat = build_q_hat(source, m, Some(b))?;
    tt_operator(&build_t_hat(&q_hat, &w)?)
}

/// Numerical rank of the order-`2n` moment unfolded at `n`, capped at `max_m`.
///
/// The rank equals the number of components once their `n`-th tensor powers
/// are linearly independent.
pub fn estimate_num_components(
    source: &dyn MomentSource,
    n: usize,
    max_m: usize,
    rel_tol: f64,
) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("power n must be at least 1".into()));
    }
    let t = source.sym_moment(2 * n, None)?;
    Ok(numerical_rank(&unfold(&t, n)?, rel_tol).min(max_m))
}

#[cfg(test)]
mod tests;
