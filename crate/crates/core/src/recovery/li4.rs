//! Recovery from four draws per group when the components are linearly independent.

use crate::error::StageExt;
use crate::estimation::{empirical_sym_moment, MomentSource};
use crate::model::{b_map, random_dominating_measure};
use crate::tensor::{blockwise_apply, reshape_rows_first, sym_eig, unfold, BlockMap};
use crate::{Error, Result};

use super::{
    components_from_operator, recover_weights, whiten, Diagnostics, RecoveryConfig, RecoveryResult,
};

/// Minimum relative gap between consecutive top eigenvalues of `S` before the
/// eigenvectors are trusted.
const NORM_GAP_TOL: f64 = 1e-6;

/// Whiten with `Ŵ = √(Ĉ†)` from the order-2 moment, apply `I ⊗ Ŵ ⊗ I ⊗ Ŵ` to the
/// order-4 moment and eigendecompose the `d² x d²` reshape. Each eigenvector is
/// `B p_i ⊗ √w_i Ŵ B p_i`, so the eigenvalues are the `ξ`-norms `‖B p_i‖²`.
///
/// Equal norms leave the eigenvectors unidentified; unless `force` is set the
/// call fails with [`Error::EqualNorms`] when the top `m` eigenvalues are not
/// separated.
pub fn li_recover_4(
    source: &dyn MomentSource,
    cfg: &RecoveryConfig,
    force: bool,
) -> Result<RecoveryResult> {
    cfg.validate().stage("config")?;
    let m = cfg.m;
    if let Some(k) = source.max_order() {
        if k < 4 {
            return Err(Error::OrderTooLarge {
                order: 4,
                group_size: k,
            })
            .stage("config");
        }
    }
    let xi =
        random_dominating_measure(source.dim(), &cfg.dominating, cfg.seed).stage("dominating")?;
    let b = b_map(&xi);

    let second = empirical_sym_moment(source, 2, Some(&b)).stage("c_hat")?;
    let c_hat = unfold(&second.tensor, 1)
        .and_then(|c| c.symmetrized())
        .stage("c_hat")?;
    let whitening_spectrum = sym_eig(&c_hat).stage("whiten")?.eigenvalues;
    let w = whiten(&c_hat, m, cfg.eig_floor).stage("whiten")?;

    let fourth = empirical_sym_moment(source, 4, Some(&b)).stage("s_hat")?;
    let whitened = blockwise_apply(
        &fourth.tensor,
        &[
            BlockMap::Identity { axes: 1 },
            BlockMap::Linear { axes: 1, op: &w },
            BlockMap::Identity { axes: 1 },
            BlockMap::Linear { axes: 1, op: &w },
        ],
    )
    .stage("s_hat")?;
    let s_hat = reshape_rows_first(&whitened, 2)
        .symmetrized()
        .stage("s_hat")?;

    let spectrum = sym_eig(&s_hat).stage("extract")?.eigenvalues;
    if !force && m > 1 {
        let top = spectrum[0];
        let gap = spectrum[..m]
            .windows(2)
            .map(|p| (p[0] - p[1]) / top)
            .fold(f64::INFINITY, f64::min);
        if !(gap > NORM_GAP_TOL) {
            return Err(Error::EqualNorms {
                gap,
                tol: NORM_GAP_TOL,
            })
            .stage("extract");
        }
    }
    let (components, tt_eigenvalues) =
        components_from_operator(&s_hat, m, &b, cfg.probe, cfg.clip_negatives, cfg.seed)
            .stage("extract")?;

    let e_hat = empirical_sym_moment(source, 2, None).stage("e_hat")?;
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
