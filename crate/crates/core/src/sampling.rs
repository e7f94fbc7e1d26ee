//! Grouped samples from a mixture and their tally histograms.
//!
//! Group `g` is drawn from the ChaCha stream `STREAM_GROUPS + g / GROUP_CHUNK`, so a
//! dataset depends only on `(mixture, k, n, seed)`, never on how many threads
//! produced it.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::MixtureSpec;
use crate::multinomial::{enumerate_compositions, pmf_raw, Composition};
use crate::rng::{stream_rng, STREAM_GROUPS};
use crate::{Error, Result};

/// Groups per RNG stream.
pub const GROUP_CHUNK: usize = 4096;

/// `n` groups of `k` category indices each (0-based in memory, 1-based on disk).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedDataset {
    d: usize,
    group_size: usize,
    data: Vec<u32>,
}

impl GroupedDataset {
    pub fn new(d: usize, group_size: usize, groups: &[Vec<usize>]) -> Result<Self> {
        if group_size == 0 {
            return Err(Error::InvalidArgument(
                "group size must be at least 1".into(),
            ));
        }
        let mut data = Vec::with_capacity(groups.len() * group_size);
        for (g, group) in groups.iter().enumerate() {
            if group.len() != group_size {
                return Err(Error::ShapeMismatch(format!(
                    "group {g} has {} entries, expected {group_size}",
                    group.len()
                )));
            }
            for &c in group {
                if c >= d {
                    return Err(Error::InvalidArgument(format!(
                        "category {} out of range 1..={d}",
                        c + 1
                    )));
                }
                data.push(c as u32);
            }
        }
        Ok(Self {
            d,
            group_size,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn n_groups(&self) -> usize {
        self.data.len() / self.group_size
    }

    pub fn groups(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.data.chunks_exact(self.group_size)
    }

    /// Parse one group per line of space-separated 1-based categories.
    ///
    /// With `d = None` the number of categories is the largest index seen.
    pub fn read_text(reader: impl BufRead, d: Option<usize>) -> Result<Self> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let group = line
                .split_whitespace()
                .map(|t| match t.parse::<usize>() {
                    Ok(c) if c >= 1 => Ok(c - 1),
                    _ => Err(Error::Parse(format!(
                        "line {}: bad category {t:?}",
                        lineno + 1
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(group);
        }
        let group_size = groups
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Parse("no groups".into()))?;
        let seen = groups.iter().flatten().max().map_or(1, |m| m + 1);
        let d = d.unwrap_or(seen);
        Self::new(d, group_size, &groups)
    }

    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        for group in self.groups() {
            let line: Vec<String> = group.iter().map(|c| (c + 1).to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Draw `n` groups: per group one component from the weights, then `k` iid
/// categories from that component.
pub fn draw_groups(mix: &MixtureSpec, k: usize, n: usize, seed: u64) -> Result<GroupedDataset> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "group size and group count must be positive".into(),
        ));
    }
    let pick =
        WeightedIndex::new(mix.weights()).map_err(|e| Error::InvalidWeights(e.to_string()))?;
    let cats = mix
        .components()
        .iter()
        .map(|c| WeightedIndex::new(c.as_slice()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidProbabilityVector(e.to_string()))?;

    let mut data = vec![0u32; n * k];
    data.par_chunks_mut(GROUP_CHUNK * k)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = stream_rng(seed, STREAM_GROUPS + chunk as u64);
            for group in out.chunks_exact_mut(k) {
                let comp = &cats[pick.sample(&mut rng)];
                for slot in group.iter_mut() {
                    *slot = comp.sample(&mut rng) as u32;
                }
            }
        });
    Ok(GroupedDataset {
        d: mix.dim(),
        group_size: k,
        data,
    })
}

/// Counts of per-group category tallies: the sufficient statistic of a grouped dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTallyHistogram {
    d: usize,
    k: usize,
    counts: BTreeMap<Composition, u64>,
}

#[derive(Serialize, Deserialize)]
struct RawHistogram {
    k: usize,
    d: usize,
    counts: Vec<RawCount>,
}

#[derive(Serialize, Deserialize)]
struct RawCount {
    key: Vec<u32>,
    n: u64,
}

impl Serialize for GroupTallyHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawHistogram {
            k: self.k,
            d: self.d,
            counts: self
                .counts
                .iter()
                .map(|(key, &n)| RawCount {
                    key: key.0.clone(),
                    n,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupTallyHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawHistogram::deserialize(d)?;
        let mut h = GroupTallyHistogram::empty(raw.d, raw.k);
        for c in raw.counts {
            h.add(Composition(c.key), c.n)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(h)
    }
}

impl GroupTallyHistogram {
    pub fn empty(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, key: Composition, n: u64) -> Result<()> {
        if key.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: key.len(),
            });
        }
        if key.total() as usize != self.k {
            return Err(Error::InvalidArgument(format!(
                "tally {:?} does not sum to group size {}",
                key.as_slice(),
                self.k
            )));
        }
        if n > 0 {
            *self.counts.entry(key).or_insert(0) += n;
        }
        Ok(())
    }

    /// Add another histogram's counts (exact integer addition).
    pub fn merge(&mut self, other: &GroupTallyHistogram) -> Result<()> {
        if other.d != self.d || other.k != self.k {
            return Err(Error::ShapeMismatch(format!(
                "histograms over (d={}, k={}) and (d={}, k={})",
                self.d, self.k, other.d, other.k
            )));
        }
        for (key, &n) in &other.counts {
            *self.counts.entry(key.clone()).or_insert(0) += n;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn group_size(&self) -> usize {
        self.k
    }

    pub fn n_groups(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Composition, u64)> {
        self.counts.iter().map(|(k, &n)| (k, n))
    }

    pub fn num_keys(&self) -> usize {
        self.counts.len()
    }
}

fn group_tally(group: &[u32], d: usize) -> Composition {
    let mut key = vec![0u32; d];
    for &c in group {
        key[c as usize] += 1;
    }
    Composition(key)
}

/// Histogram of per-group tallies.
pub fn tally(ds: &GroupedDataset) -> GroupTallyHistogram {
    let partials: Vec<BTreeMap<Composition, u64>> = ds
        .data
        .par_chunks(GROUP_CHUNK * ds.group_size)
        .map(|chunk| {
            let mut local = BTreeMap::new();
            for group in chunk.chunks_exact(ds.group_size) {
                *local.entry(group_tally(group, ds.d)).or_insert(0) += 1;
            }
            local
        })
        .collect();
    let mut h = GroupTallyHistogram::empty(ds.d, ds.group_size);
    for part in partials {
        for (key, n) in part {
            *h.counts.entry(key).or_insert(0) += n;
        }
    }
    h
}

/// Draw the tally histogram of `n` groups directly.
///
/// Each group's tally is drawn in one step from the mixture of multinomial laws
/// `Σ w_i Mult(k, p_i)` over compositions. The result has the same distribution as
/// `tally(draw_groups(..))` at the cost of one categorical draw per group, but the
/// two consume randomness differently and are not equal sample by sample.
pub fn draw_tally(mix: &MixtureSpec, k: usize, n: u64, seed: u64) -> Result<GroupTallyHistogram> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "group size and group count must be positive".into(),
        ));
    }
    let keys = enumerate_compositions(k as u32, mix.dim());
    let law: Vec<f64> = keys
        .iter()
        .map(|x| {
            mix.weights()
                .iter()
                .zip(mix.components())
                .map(|(w, p)| w * pmf_raw(p.as_slice(), x.as_slice()))
                .sum()
        })
        .collect();
    let pick = WeightedIndex::new(&law).map_err(|e| Error::InvalidWeights(e.to_string()))?;

    let chunk = GROUP_CHUNK as u64;
    let n_chunks = n.div_ceil(chunk);
    let partials: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, STREAM_GROUPS + c);
            let len = chunk.min(n - c * chunk);
            let mut local = vec![0u64; keys.len()];
            for _ in 0..len {
                local[pick.sample(&mut rng)] += 1;
            }
            local
        })
        .collect();
    let mut totals = vec![0u64; keys.len()];
    for part in partials {
        for (t, p) in totals.iter_mut().zip(part) {
            *t += p;
        }
    }
    let mut h = GroupTallyHistogram::empty(mix.dim(), k);
    for (key, count) in keys.into_iter().zip(totals) {
        h.add(key, count)?;
    }
    Ok(h)
}
