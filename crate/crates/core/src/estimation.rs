//! Empirical symmetric moment tensors from grouped data.
//!
//! Every estimator here is the plain average, over groups and over ordered
//! `r`-tuples of *distinct* positions inside a group, of `B x_{t1} ⊗ ... ⊗ B x_{tr}`
//! (normaliser `n_groups · k!/(k−r)!`). Its expectation is `Σ w_i (B p_i)^{⊗r}`.
//!
//! Two exact routes compute it: a raw pass over positions, and a pass over the
//! tally histogram that weights each key by falling factorials of its counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{population_moment_under, DiagonalMap, MixtureSpec};
use crate::multinomial::composition_count;
use crate::sampling::{tally, GroupTallyHistogram, GroupedDataset};
use crate::tensor::{
    canonical_map, index_counts, symmetrize, unfold, DenseTensor, MatOperator, SymTensor,
};
use crate::{Error, Result};

/// Groups per partial sum on the raw path. Partials are merged in chunk order.
const RAW_CHUNK: usize = 1024;

/// Anything that can produce `Σ w_i (B p_i)^{⊗r}` or an unbiased estimate of it.
pub trait MomentSource: Sync {
    fn dim(&self) -> usize;

    /// Highest order available (the group size); `None` for exact population moments.
    fn max_order(&self) -> Option<usize>;

    /// Number of groups behind the estimate; 0 for population moments.
    fn n_groups(&self) -> u64;

    fn sym_moment(&self, r: usize, b: Option<&DiagonalMap>) -> Result<SymTensor>;
}

impl MomentSource for MixtureSpec {
    fn dim(&self) -> usize {
        MixtureSpec::dim(self)
    }

    fn max_order(&self) -> Option<usize> {
        None
    }

    fn n_groups(&self) -> u64 {
        0
    }

    fn sym_moment(&self, r: usize, b: Option<&DiagonalMap>) -> Result<SymTensor> {
        check_transform(self.dim(), b)?;
        Ok(population_moment_under(self, r, b))
    }
}

impl MomentSource for GroupTallyHistogram {
    fn dim(&self) -> usize {
        GroupTallyHistogram::dim(self)
    }

    fn max_order(&self) -> Option<usize> {
        Some(self.group_size())
    }

    fn n_groups(&self) -> u64 {
        GroupTallyHistogram::n_groups(self)
    }

    fn sym_moment(&self, r: usize, b: Option<&DiagonalMap>) -> Result<SymTensor> {
        moment_from_tally(self, r, b)
    }
}

impl MomentSource for GroupedDataset {
    fn dim(&self) -> usize {
        GroupedDataset::dim(self)
    }

    fn max_order(&self) -> Option<usize> {
        Some(self.group_size())
    }

    fn n_groups(&self) -> u64 {
        GroupedDataset::n_groups(self) as u64
    }

    /// Switches to the tally path once groups outnumber ten times the possible tallies.
    fn sym_moment(&self, r: usize, b: Option<&DiagonalMap>) -> Result<SymTensor> {
        let keys = composition_count(self.group_size() as u32, self.dim());
        if self.n_groups() as u64 > 10 * keys {
            moment_from_tally(&tally(self), r, b)
        } else {
            moment_from_raw(self, r, b)
        }
    }
}

/// A symmetric moment estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub tensor: SymTensor,
    pub order: usize,
    pub n_groups: u64,
    pub transform: Option<DiagonalMap>,
}

fn check_transform(d: usize, b: Option<&DiagonalMap>) -> Result<()> {
    match b {
        Some(b) if b.dim() != d => Err(Error::DimensionMismatch {
            expected: d,
            found: b.dim(),
        }),
        _ => Ok(()),
    }
}

fn check_order(r: usize, group_size: usize) -> Result<()> {
    if r > group_size {
        return Err(Error::OrderTooLarge {
            order: r,
            group_size,
        });
    }
    Ok(())
}

/// `k (k−1) ⋯ (k−r+1)`
fn falling(k: u64, r: u32) -> f64 {
    if u64::from(r) > k {
        return 0.0;
    }
    (0..u64::from(r)).map(|i| (k - i) as f64).product()
}

/// Order-`r` symmetric moment of any source, tagged with its provenance.
pub fn empirical_sym_moment(
    source: &dyn MomentSource,
    r: usize,
    b: Option<&DiagonalMap>,
) -> Result<MomentEstimate> {
    if let Some(k) = source.max_order() {
        check_order(r, k)?;
    }
    Ok(MomentEstimate {
        tensor: source.sym_moment(r, b)?,
        order: r,
        n_groups: source.n_groups(),
        transform: b.cloned(),
    })
}

/// Raw route: enumerate ordered distinct position tuples in every group.
pub fn moment_from_raw(
    ds: &GroupedDataset,
    r: usize,
    b: Option<&DiagonalMap>,
) -> Result<SymTensor> {
    let (d, k) = (ds.dim(), ds.group_size());
    check_order(r, k)?;
    check_transform(d, b)?;
    let scale: Vec<f64> = b.map_or_else(|| vec![1.0; d], |b| b.diag().to_vec());
    let groups: Vec<&[u32]> = ds.groups().collect();

    let partials: Vec<DenseTensor> = groups
        .par_chunks(RAW_CHUNK)
        .map(|chunk| {
            let mut acc = DenseTensor::zeros(d, r);
            let mut used = vec![false; k];
            for group in chunk {
                accumulate_tuples(group, &scale, r, &mut used, 0, 1.0, acc.as_mut_slice(), d);
            }
            acc
        })
        .collect();

    let mut total = DenseTensor::zeros(d, r);
    for p in &partials {
        total.add_scaled(1.0, p)?;
    }
    let norm = ds.n_groups() as f64 * falling(k as u64, r as u32);
    if norm > 0.0 {
        total.scale(1.0 / norm);
    }
    Ok(symmetrize(&total))
}

#[allow(clippy::too_many_arguments)]
fn accumulate_tuples(
    group: &[u32],
    scale: &[f64],
    remaining: usize,
    used: &mut [bool],
    flat: usize,
    value: f64,
    out: &mut [f64],
    d: usize,
) {
    if remaining == 0 {
        out[flat] += value;
        return;
    }
    for pos in 0..group.len() {
        if used[pos] {
            continue;
        }
        used[pos] = true;
        let c = group[pos] as usize;
        accumulate_tuples(
            group,
            scale,
            remaining - 1,
            used,
            flat * d + c,
            value * scale[c],
            out,
            d,
        );
        used[pos] = false;
    }
}

/// Tally route: a key with counts `c` contributes `Π_a c_a!/(c_a − n_a)!` ordered
/// tuples to every multi-index whose category multiplicities are `n`.
pub fn moment_from_tally(
    h: &GroupTallyHistogram,
    r: usize,
    b: Option<&DiagonalMap>,
) -> Result<SymTensor> {
    let (d, k) = (h.dim(), h.group_size());
    check_order(r, k)?;
    check_transform(d, b)?;
    let canon = canonical_map(d, r);
    let mut t = DenseTensor::zeros(d, r);
    let norm = h.n_groups() as f64 * falling(k as u64, r as u32);
    for flat in 0..t.len() {
        if canon[flat] != flat {
            continue;
        }
        let mult = index_counts(&t.multi_index(flat), d);
        let mut tuples = 0.0;
        for (key, count) in h.iter() {
            let per_group: f64 = key
                .as_slice()
                .iter()
                .zip(&mult)
                .map(|(&c, &n)| falling(u64::from(c), n))
                .product();
            tuples += count as f64 * per_group;
        }
        let weight: f64 = match b {
            Some(b) => b
                .diag()
                .iter()
                .zip(&mult)
                .map(|(s, &n)| s.powi(n as i32))
                .product(),
            None => 1.0,
        };
        t.as_mut_slice()[flat] = if norm > 0.0 {
            weight * tuples / norm
        } else {
            0.0
        };
    }
    let entries = t.as_mut_slice();
    for flat in 0..canon.len() {
        entries[flat] = entries[canon[flat]];
    }
    Ok(SymTensor::new_unchecked(t))
}

/// `Ĉ`: the order-`2m−2` moment under `B`, unfolded into a symmetric
/// `d^{m−1} x d^{m−1}` operator. For `m = 1` this is the `1 x 1` operator `[1]`.
pub fn build_c_hat(
    source: &dyn MomentSource,
    m: usize,
    b: Option<&DiagonalMap>,
) -> Result<MatOperator> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if m == 1 {
        return Ok(MatOperator::identity(1));
    }
    let t = empirical_sym_moment(source, 2 * m - 2, b)?;
    unfold(&t.tensor, m - 1)?.symmetrized()
}

/// `Ê`: the order-`m−1` moment in the original coordinates.
pub fn build_e_hat(source: &dyn MomentSource, m: usize) -> Result<MomentEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    empirical_sym_moment(source, m - 1, None)
}

/// `Q̂`: the order-`2m−1` moment under `B`.
pub fn build_q_hat(
    source: &dyn MomentSource,
    m: usize,
    b: Option<&DiagonalMap>,
) -> Result<MomentEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    empirical_sym_moment(source, 2 * m - 1, b)
}
