//! Multinomial outcomes and grouped samples.
//!
//! A multinomial draw is the tally of a random group, so a mixture of multinomials
//! carries the same information as the symmetric moment tensor of its groups. The
//! bridge is `T_{n,q}`, which spreads a composition `x` uniformly over the distinct
//! words with `x_i` copies of symbol `i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::ProbabilityVector;
use crate::tensor::{outer_power, DenseTensor};
use crate::{Error, Result};

/// Nonnegative integer vector: how many of `n` draws landed in each category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Composition(pub Vec<u32>);

impl Composition {
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// All compositions of `n` into `q` parts.
///
/// Ordered lexicographically by *decreasing* first entry, then decreasing second
/// entry, and so on: `n=2, q=2` gives `(2,0), (1,1), (0,2)`.
pub fn enumerate_compositions(n: u32, q: usize) -> Vec<Composition> {
    fn rec(rest: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Composition>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(Composition(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=rest).rev() {
            prefix.push(first);
            rec(rest - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if q == 0 {
        return out;
    }
    rec(n, q, &mut Vec::with_capacity(q), &mut out);
    out
}

/// `C(n + q - 1, n)`
pub fn composition_count(n: u32, q: usize) -> u64 {
    if q == 0 {
        return 0;
    }
    let k = u64::from(n).min(q as u64 - 1);
    let top = u64::from(n) + q as u64 - 1;
    (0..k).fold(1u64, |acc, i| acc * (top - i) / (i + 1))
}

/// `Q_{n,p,q}`: `n` trials over `q = p.dim()` categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialSpec {
    trials: u32,
    p: ProbabilityVector,
}

impl MultinomialSpec {
    pub fn new(trials: u32, p: ProbabilityVector) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if p.dim() < 2 {
            return Err(Error::InvalidArgument("need at least 2 categories".into()));
        }
        Ok(Self { trials, p })
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn categories(&self) -> usize {
        self.p.dim()
    }

    pub fn p(&self) -> &ProbabilityVector {
        &self.p
    }
}

/// `n! / (x_1! ... x_q!)` as a float, built from exact binomial steps.
pub(crate) fn multinomial_coefficient(x: &[u32]) -> f64 {
    let mut total = 0u32;
    let mut coef = 1.0;
    for &xi in x {
        for j in 1..=xi {
            total += 1;
            coef = coef * f64::from(total) / f64::from(j);
        }
    }
    coef
}

/// Multinomial pmf with an explicit probability vector (no trials/length checks).
pub(crate) fn pmf_raw(p: &[f64], x: &[u32]) -> f64 {
    multinomial_coefficient(x)
        * p.iter()
            .zip(x)
            .map(|(pi, &xi)| pi.powi(xi as i32))
            .product::<f64>()
}

/// `n!/(x_1!⋯x_q!) p_1^{x_1}⋯p_q^{x_q}`
pub fn multinomial_pmf(spec: &MultinomialSpec, x: &Composition) -> Result<f64> {
    if x.len() != spec.categories() {
        return Err(Error::DimensionMismatch {
            expected: spec.categories(),
            found: x.len(),
        });
    }
    if x.total() != spec.trials {
        return Err(Error::InvalidArgument(format!(
            "composition sums to {}, spec has {} trials",
            x.total(),
            spec.trials
        )));
    }
    Ok(pmf_raw(spec.p.as_slice(), x.as_slice()))
}

/// `F_{n,q}`: the nondecreasing word with `x_i` copies of symbol `i` (symbols are 1-based).
pub fn f_nq(x: &Composition) -> Vec<usize> {
    x.0.iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i + 1, c as usize))
        .collect()
}

/// Finitely supported signed measure on compositions of `n` into `q` parts.
///
/// JSON form: `[{"x": [..], "c": ..}, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedCompositionMeasure {
    terms: BTreeMap<Composition, f64>,
}

#[derive(Serialize, Deserialize)]
struct Term {
    x: Composition,
    c: f64,
}

impl Serialize for SignedCompositionMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<Term> = self
            .terms
            .iter()
            .map(|(x, &c)| Term { x: x.clone(), c })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SignedCompositionMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let terms = Vec::<Term>::deserialize(d)?;
        let mut m = SignedCompositionMeasure::new();
        for t in terms {
            m.add(t.x, t.c);
        }
        Ok(m)
    }
}

impl Default for SignedCompositionMeasure {
    fn default() -> Self {
        Self::new()
    }
}

impl SignedCompositionMeasure {
    pub fn new() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    /// `δ_x`
    pub fn dirac(x: Composition) -> Self {
        let mut m = Self::new();
        m.add(x, 1.0);
        m
    }

    /// The full pmf of a multinomial, as a measure on compositions.
    pub fn from_multinomial(spec: &MultinomialSpec) -> Self {
        let mut m = Self::new();
        for x in enumerate_compositions(spec.trials, spec.categories()) {
            let mass = pmf_raw(spec.p.as_slice(), x.as_slice());
            m.add(x, mass);
        }
        m
    }

    pub fn add(&mut self, x: Composition, c: f64) {
        *self.terms.entry(x).or_insert(0.0) += c;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Composition, f64)> {
        self.terms.iter().map(|(x, &c)| (x, c))
    }

    pub fn total_mass(&self) -> f64 {
        self.terms.values().sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Visit every distinct arrangement of the multiset with the given counts,
/// passing the flat row-major index of the arrangement.
fn for_each_arrangement(counts: &mut [u32], len: usize, flat: usize, f: &mut impl FnMut(usize)) {
    if len == 0 {
        f(flat);
        return;
    }
    let q = counts.len();
    for sym in 0..q {
        if counts[sym] > 0 {
            counts[sym] -= 1;
            for_each_arrangement(counts, len - 1, flat * q + sym, f);
            counts[sym] += 1;
        }
    }
}

/// `T_{n,q}`: linear map from signed measures on compositions to order-`n`
/// tensors over `R^q`. `δ_x` puts mass `x_1!⋯x_q!/n!` on each distinct
/// arrangement of `F_{n,q}(x)`.
pub fn t_nq_apply(measure: &SignedCompositionMeasure, n: u32, q: usize) -> Result<DenseTensor> {
    let mut out = DenseTensor::zeros(q, n as usize);
    for (x, c) in measure.iter() {
        if x.len() != q || x.total() != n {
            return Err(Error::InvalidArgument(format!(
                "composition {:?} is not in C({n},{q})",
                x.as_slice()
            )));
        }
        let each = c / multinomial_coefficient(x.as_slice());
        let mut counts = x.0.clone();
        let entries = out.as_mut_slice();
        for_each_arrangement(&mut counts, n as usize, 0, &mut |flat| {
            entries[flat] += each
        });
    }
    Ok(out)
}

/// `‖T_{n,q}(Q_{n,p,q}) − p^{⊗n}‖_∞`
pub fn verify_lemma_mult(spec: &MultinomialSpec) -> f64 {
    let measure = SignedCompositionMeasure::from_multinomial(spec);
    let lhs =
        t_nq_apply(&measure, spec.trials, spec.categories()).expect("pmf support lies in C(n,q)");
    let rhs = outer_power(spec.p.as_slice(), spec.trials as usize);
    lhs.max_abs_diff(&rhs).expect("same shape")
}

/// One weighted term of a multinomial mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMultinomial {
    pub weight: f64,
    pub trials: u32,
    pub p: ProbabilityVector,
}

impl WeightedMultinomial {
    pub fn spec(&self) -> Result<MultinomialSpec> {
        MultinomialSpec::new(self.trials, self.p.clone())
    }
}

/// `‖T_{n,q}(Σ a_i Q_i − Σ b_j Q'_j)‖_∞` for two multinomial mixtures.
pub fn multinomial_mixture_distance(
    a: &[WeightedMultinomial],
    b: &[WeightedMultinomial],
) -> Result<f64> {
    let first = a
        .first()
        .or(b.first())
        .ok_or_else(|| Error::InvalidArgument("empty mixtures".into()))?;
    let (n, q) = (first.trials, first.p.dim());
    let mut diff = SignedCompositionMeasure::new();
    for (sign, side) in [(1.0, a), (-1.0, b)] {
        for term in side {
            let spec = term.spec()?;
            if spec.trials() != n {
                return Err(Error::InvalidArgument(format!(
                    "mixed trial counts {n} and {}",
                    spec.trials()
                )));
            }
            if spec.categories() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: spec.categories(),
                });
            }
            for (x, c) in SignedCompositionMeasure::from_multinomial(&spec).iter() {
                diff.add(x.clone(), sign * term.weight * c);
            }
        }
    }
    let t = t_nq_apply(&diff, n, q)?;
    Ok(t.as_slice().iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// Whether two multinomial mixtures induce the same law, decided through `T_{n,q}`.
pub fn multinomial_mixture_equal(
    a: &[WeightedMultinomial],
    b: &[WeightedMultinomial],
    tol: f64,
) -> Result<bool> {
    Ok(multinomial_mixture_distance(a, b)? <= tol)
}
