use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::MatOperator;
use crate::{Error, Result};

/// Dense order-`k` tensor over `R^d`, row-major with the last index fastest.
///
/// Order 0 is allowed and holds a single scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dim: usize,
    order: usize,
    entries: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            order,
            entries: vec![0.0; dim.pow(order as u32)],
        }
    }

    pub fn from_vec(dim: usize, order: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = dim.pow(order as u32);
        if entries.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {dim}^{order} tensor (expected {expected})",
                entries.len()
            )));
        }
        Ok(Self {
            dim,
            order,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order);
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.order];
        for slot in index.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
        index
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.entries[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let flat = self.flat_index(index);
        self.entries[flat] = value;
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DenseTensor) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn scale(&mut self, factor: f64) {
        self.entries.iter_mut().for_each(|x| *x *= factor);
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &DenseTensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Sum over the last axis, producing a tensor of order `k - 1`.
    pub fn marginalize_last(&self) -> Result<DenseTensor> {
        if self.order == 0 {
            return Err(Error::InvalidArgument(
                "cannot marginalize an order-0 tensor".into(),
            ));
        }
        let entries = self
            .entries
            .chunks(self.dim)
            .map(|c| c.iter().sum())
            .collect();
        DenseTensor::from_vec(self.dim, self.order - 1, entries)
    }

    /// Largest deviation between an entry and any of its index permutations.
    pub fn symmetry_defect(&self) -> f64 {
        let canon = canonical_map(self.dim, self.order);
        self.entries
            .iter()
            .zip(&canon)
            .map(|(x, &c)| (x - self.entries[c]).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.entries.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.symmetry_defect() <= rel_tol * scale.max(f64::MIN_POSITIVE)
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.dim != other.dim || self.order != other.order {
            return Err(Error::ShapeMismatch(format!(
                "{}^{} vs {}^{}",
                self.dim, self.order, other.dim, other.order
            )));
        }
        Ok(())
    }
}

/// Dense tensor that is invariant under every permutation of its indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SymTensor(DenseTensor);

impl SymTensor {
    /// Checks symmetry within `1e-10` relative tolerance.
    pub fn new(tensor: DenseTensor) -> Result<Self> {
        if !tensor.is_symmetric(1e-10) {
            return Err(Error::InvalidArgument(format!(
                "tensor is not symmetric (defect {:e})",
                tensor.symmetry_defect()
            )));
        }
        Ok(Self(tensor))
    }

    pub(crate) fn new_unchecked(tensor: DenseTensor) -> Self {
        debug_assert!(tensor.is_symmetric(1e-8));
        Self(tensor)
    }

    pub fn scalar(value: f64, dim: usize) -> Self {
        Self(DenseTensor {
            dim,
            order: 0,
            entries: vec![value],
        })
    }

    pub fn into_inner(self) -> DenseTensor {
        self.0
    }
}

impl Deref for SymTensor {
    type Target = DenseTensor;

    fn deref(&self) -> &DenseTensor {
        &self.0
    }
}

impl AsRef<DenseTensor> for SymTensor {
    fn as_ref(&self) -> &DenseTensor {
        &self.0
    }
}

/// For every flat index, the flat index of its sorted (nondecreasing) permutation.
pub(crate) fn canonical_map(dim: usize, order: usize) -> Vec<usize> {
    let len = dim.pow(order as u32);
    let mut out = Vec::with_capacity(len);
    let mut index = vec![0usize; order];
    let mut sorted = vec![0usize; order];
    for flat in 0..len {
        let mut rem = flat;
        for slot in index.iter_mut().rev() {
            *slot = rem % dim;
            rem /= dim;
        }
        sorted.copy_from_slice(&index);
        sorted.sort_unstable();
        out.push(sorted.iter().fold(0, |acc, &i| acc * dim + i));
    }
    out
}

/// Multiplicity of each category among the indices of a multi-index.
pub(crate) fn index_counts(index: &[usize], dim: usize) -> Vec<u32> {
    let mut counts = vec![0u32; dim];
    for &i in index {
        counts[i] += 1;
    }
    counts
}

/// `v ⊗ v ⊗ ... ⊗ v` (`k` factors).
///
/// Each entry is the product of `v` over the *sorted* multi-index, so entries that
/// are permutations of one another are bitwise identical.
pub fn outer_power(v: &[f64], k: usize) -> SymTensor {
    let dim = v.len();
    let canon = canonical_map(dim, k);
    let mut t = DenseTensor::zeros(dim, k);
    for flat in 0..t.len() {
        if canon[flat] == flat {
            let index = t.multi_index(flat);
            t.entries[flat] = index.iter().map(|&i| v[i]).product();
        }
    }
    for flat in 0..t.len() {
        t.entries[flat] = t.entries[canon[flat]];
    }
    SymTensor(t)
}

/// Projection onto symmetric tensors: each entry becomes the average of its orbit
/// under index permutations.
///
/// Averaging over all `k!` permutations weights every distinct arrangement of a
/// multiset equally, so the orbit mean is computed directly.
pub fn symmetrize(t: &DenseTensor) -> SymTensor {
    let canon = canonical_map(t.dim, t.order);
    let mut sums = vec![0.0; t.len()];
    let mut counts = vec![0u32; t.len()];
    for (flat, &c) in canon.iter().enumerate() {
        sums[c] += t.entries[flat];
        counts[c] += 1;
    }
    let entries = canon
        .iter()
        .map(|&c| sums[c] / f64::from(counts[c]))
        .collect();
    SymTensor(DenseTensor {
        dim: t.dim,
        order: t.order,
        entries,
    })
}

/// View an order-`k` tensor as a linear map from the coordinates of its first
/// `split` axes to the coordinates of its last `k - split` axes.
///
/// The result has shape `d^(k-split) x d^split`; a simple tensor `a ⊗ b` unfolds
/// to `b aᵀ`, the map `x ↦ <a, x> b`.
pub fn unfold(t: &DenseTensor, split: usize) -> Result<MatOperator> {
    if split == 0 || split >= t.order {
        return Err(Error::InvalidSplit {
            split,
            order: t.order,
        });
    }
    let cols = t.dim.pow(split as u32);
    let rows = t.dim.pow((t.order - split) as u32);
    let mut m = MatOperator::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m.set(r, c, t.entries[c * rows + r]);
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &MatOperator, dim: usize, order: usize, split: usize) -> Result<DenseTensor> {
    if split == 0 || split >= order {
        return Err(Error::InvalidSplit { split, order });
    }
    let cols = dim.pow(split as u32);
    let rows = dim.pow((order - split) as u32);
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot fold into a {dim}^{order} tensor at split {split}",
            m.rows(),
            m.cols()
        )));
    }
    let mut t = DenseTensor::zeros(dim, order);
    for c in 0..cols {
        for r in 0..rows {
            t.entries[c * rows + r] = m.get(r, c);
        }
    }
    Ok(t)
}

/// Row-major reshape: the first `row_axes` axes index rows, the rest index columns.
pub(crate) fn reshape_rows_first(t: &DenseTensor, row_axes: usize) -> MatOperator {
    let rows = t.dim.pow(row_axes as u32);
    let cols = t.dim.pow((t.order - row_axes) as u32);
    MatOperator::from_row_major(rows, cols, t.entries.clone())
        .expect("reshape preserves the entry count")
}

/// One block of a blockwise operator: a run of consecutive axes and the map
/// acting on their joint coordinates.
#[derive(Debug, Clone, Copy)]
pub enum BlockMap<'a> {
    Identity { axes: usize },
    Linear { axes: usize, op: &'a MatOperator },
}

impl BlockMap<'_> {
    fn axes(&self) -> usize {
        match *self {
            BlockMap::Identity { axes } | BlockMap::Linear { axes, .. } => axes,
        }
    }
}

/// Apply `U_1 ⊗ U_2 ⊗ ... ⊗ U_n` where each `U_j` acts on a contiguous block of axes.
///
/// Blocks must cover all axes in order. Linear maps must be square with side
/// `d^axes`, so the result stays a tensor over `R^d`.
pub fn blockwise_apply(t: &DenseTensor, blocks: &[BlockMap<'_>]) -> Result<DenseTensor> {
    let total: usize = blocks.iter().map(BlockMap::axes).sum();
    if total != t.order {
        return Err(Error::ShapeMismatch(format!(
            "blocks cover {total} axes of an order-{} tensor",
            t.order
        )));
    }
    let mut current = t.clone();
    let mut leading = 0usize;
    for block in blocks {
        let axes = block.axes();
        if let BlockMap::Linear { op, .. } = *block {
            let side = t.dim.pow(axes as u32);
            if op.rows() != side || op.cols() != side {
                return Err(Error::ShapeMismatch(format!(
                    "{}x{} map on a block of {axes} axes (needs {side}x{side})",
                    op.rows(),
                    op.cols()
                )));
            }
            current = apply_block(&current, leading, axes, op);
        }
        leading += axes;
    }
    Ok(current)
}

fn apply_block(t: &DenseTensor, leading: usize, axes: usize, op: &MatOperator) -> DenseTensor {
    let pre = t.dim.pow(leading as u32);
    let block = t.dim.pow(axes as u32);
    let post = t.dim.pow((t.order - leading - axes) as u32);
    let mut out = DenseTensor::zeros(t.dim, t.order);
    for a in 0..pre {
        let base = a * block * post;
        for r in 0..block {
            let row = op.row(r);
            let dst = base + r * post;
            for (c, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = base + c * post;
                for b in 0..post {
                    out.entries[dst + b] += w * t.entries[src + b];
                }
            }
        }
    }
    out
}

/// Simple tensor `v_1 ⊗ v_2 ⊗ ... ⊗ v_k` from equal-length factors.
pub fn outer_product(factors: &[&[f64]]) -> Result<DenseTensor> {
    let dim = factors.first().map_or(0, |v| v.len());
    if factors.iter().any(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch("factors differ in length".into()));
    }
    let mut entries = vec![1.0];
    for v in factors {
        entries = entries
            .iter()
            .flat_map(|&a| v.iter().map(move |&b| a * b))
            .collect();
    }
    DenseTensor::from_vec(dim, factors.len(), entries)
}
