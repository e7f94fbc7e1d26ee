//! Mixtures of categorical measures, dominating measures, and exact population
//! moment tensors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, STREAM_DOMINATING};
use crate::tensor::{outer_power, DenseTensor, SymTensor};
use crate::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;
const RENORMALIZE_TOL: f64 = 1e-9;
const DISTINCT_TOL: f64 = 1e-12;

/// Nonnegative vector summing to one: the mass a categorical measure puts on each category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidProbabilityVector("empty".into()));
        }
        if let Some(x) = entries.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidProbabilityVector(format!("entry {x}")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProbabilityVector(format!("sums to {sum}")));
        }
        Ok(Self(entries))
    }

    /// Scale a nonnegative vector with positive total to sum to one.
    pub fn normalized(entries: Vec<f64>) -> Result<Self> {
        if let Some(x) = entries.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidProbabilityVector(format!("entry {x}")));
        }
        let sum: f64 = entries.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidProbabilityVector("zero total mass".into()));
        }
        Ok(Self(entries.into_iter().map(|x| x / sum).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn linf_distance(&self, other: &ProbabilityVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `Σ w_i δ_{μ_i}`: positive weights on the simplex over pairwise distinct components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureSpec {
    weights: Vec<f64>,
    components: Vec<ProbabilityVector>,
}

#[derive(Serialize, Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    components: Vec<ProbabilityVector>,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureSpec::new(raw.weights, raw.components)
    }
}

impl From<MixtureSpec> for RawMixture {
    fn from(m: MixtureSpec) -> Self {
        RawMixture {
            weights: m.weights,
            components: m.components,
        }
    }
}

impl MixtureSpec {
    /// Weights within `1e-9` of summing to one are renormalised; further off is an error.
    pub fn new(weights: Vec<f64>, components: Vec<ProbabilityVector>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("no components".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        for (i, a) in components.iter().enumerate() {
            for (j, b) in components.iter().enumerate().skip(i + 1) {
                let distance = a.linf_distance(b);
                if distance <= DISTINCT_TOL {
                    return Err(Error::DuplicateComponents {
                        first: i,
                        second: j,
                        distance,
                    });
                }
            }
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// The three-component mixture over `{0, 1, 2}` used in the reference experiments:
    /// Binomial(2, 0.2), Binomial(2, 0.8) and their 1/3–2/3 blend, weighted 0.5/0.3/0.2.
    pub fn reference_three_component() -> Self {
        let binom2 = |p: f64| vec![(1.0 - p) * (1.0 - p), 2.0 * p * (1.0 - p), p * p];
        let mu1 = binom2(0.2);
        let mu2 = binom2(0.8);
        let mu3: Vec<f64> = mu1
            .iter()
            .zip(&mu2)
            .map(|(a, b)| a / 3.0 + 2.0 * b / 3.0)
            .collect();
        let comps = [mu1, mu2, mu3]
            .into_iter()
            .map(ProbabilityVector::normalized)
            .collect::<Result<Vec<_>>>()
            .expect("binomial pmfs are probability vectors");
        Self::new(vec![0.5, 0.3, 0.2], comps).expect("reference mixture is valid")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ProbabilityVector] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }
}

/// Strictly positive mass `y_i` on each category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDominating", into = "RawDominating")]
pub struct DominatingMeasure {
    y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDominating {
    y: Vec<f64>,
}

impl TryFrom<RawDominating> for DominatingMeasure {
    type Error = Error;

    fn try_from(raw: RawDominating) -> Result<Self> {
        DominatingMeasure::new(raw.y)
    }
}

impl From<DominatingMeasure> for RawDominating {
    fn from(m: DominatingMeasure) -> Self {
        RawDominating { y: m.y }
    }
}

impl DominatingMeasure {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("empty dominating measure".into()));
        }
        if let Some(v) = y.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "dominating measure entry {v} is not positive"
            )));
        }
        Ok(Self { y })
    }

    pub fn unit(d: usize) -> Self {
        Self { y: vec![1.0; d] }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }
}

/// How a dominating measure is chosen.
///
/// Text form: `none`, `uniform`, `sqgauss:<sigma>`, `fixed:<y1>,<y2>,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DominatingScheme {
    /// Counting measure (`y = 1`), i.e. no change of measure.
    Unit,
    /// `y_i ~ iid Uniform(1, 2)`.
    Uniform,
    /// `y_i = (sigma z_i)^2` with `z_i` standard normal, floored at `1e-12`.
    SquaredGaussian {
        sigma: f64,
    },
    Fixed(Vec<f64>),
}

impl DominatingScheme {
    pub fn is_random(&self) -> bool {
        matches!(self, Self::Uniform | Self::SquaredGaussian { .. })
    }
}

impl fmt::Display for DominatingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unit => write!(f, "none"),
            Self::Uniform => write!(f, "uniform"),
            Self::SquaredGaussian { sigma } => write!(f, "sqgauss:{sigma}"),
            Self::Fixed(y) => {
                let parts: Vec<String> = y.iter().map(f64::to_string).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for DominatingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "none" | "unit" => return Ok(Self::Unit),
            "uniform" => return Ok(Self::Uniform),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("sqgauss:") {
            let sigma: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad sigma in {s:?}")))?;
            return Ok(Self::SquaredGaussian { sigma });
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            return Ok(Self::Fixed(parse_csv(rest)?));
        }
        Err(Error::Parse(format!("unknown dominating scheme {s:?}")))
    }
}

impl TryFrom<String> for DominatingScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DominatingScheme> for String {
    fn from(s: DominatingScheme) -> Self {
        s.to_string()
    }
}

/// Parse a comma-separated list of reals.
pub fn parse_csv(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {t:?}")))
        })
        .collect()
}

/// Draw (or validate) a dominating measure on `d` categories.
pub fn random_dominating_measure(
    d: usize,
    scheme: &DominatingScheme,
    seed: u64,
) -> Result<DominatingMeasure> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, STREAM_DOMINATING);
    match scheme {
        DominatingScheme::Unit => Ok(DominatingMeasure::unit(d)),
        DominatingScheme::Uniform => {
            DominatingMeasure::new((0..d).map(|_| rng.random_range(1.0..2.0)).collect())
        }
        DominatingScheme::SquaredGaussian { sigma } => {
            if !(*sigma > 0.0) {
                return Err(Error::InvalidArgument(format!("sigma {sigma} must be > 0")));
            }
            DominatingMeasure::new(
                (0..d)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        (sigma * z).powi(2).max(1e-12)
                    })
                    .collect(),
            )
        }
        DominatingScheme::Fixed(y) => {
            if y.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: y.len(),
                });
            }
            DominatingMeasure::new(y.clone())
        }
    }
}

/// Linear map `x ↦ (diag_1 x_1, ..., diag_d x_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMap {
    diag: Vec<f64>,
}

impl DiagonalMap {
    pub fn new(diag: Vec<f64>) -> Self {
        Self { diag }
    }

    pub fn identity(d: usize) -> Self {
        Self { diag: vec![1.0; d] }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(x).map(|(a, b)| a * b).collect()
    }

    /// Entrywise reciprocal; callers only build this from strictly positive measures.
    pub fn inverse(&self) -> DiagonalMap {
        DiagonalMap {
            diag: self.diag.iter().map(|x| 1.0 / x).collect(),
        }
    }
}

/// `B = diag(1/√y)`, which makes Euclidean inner products of `B x` match
/// `ξ`-weighted inner products of the densities `x / y`.
pub fn b_map(xi: &DominatingMeasure) -> DiagonalMap {
    DiagonalMap {
        diag: xi.y.iter().map(|y| 1.0 / y.sqrt()).collect(),
    }
}

/// Outcome of [`check_distinct_norms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCheck {
    pub distinct: bool,
    pub min_gap: f64,
    /// `Σ_j p_ij² / y_j` per component.
    pub norms: Vec<f64>,
}

/// Compare the `ξ`-weighted squared norms of the components.
pub fn check_distinct_norms(
    mix: &MixtureSpec,
    xi: &DominatingMeasure,
    gap_tol: f64,
) -> Result<NormCheck> {
    if xi.dim() != mix.dim() {
        return Err(Error::DimensionMismatch {
            expected: mix.dim(),
            found: xi.dim(),
        });
    }
    let norms: Vec<f64> = mix
        .components()
        .iter()
        .map(|p| p.as_slice().iter().zip(&xi.y).map(|(q, y)| q * q / y).sum())
        .collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..norms.len() {
        for j in i + 1..norms.len() {
            min_gap = min_gap.min((norms[i] - norms[j]).abs());
        }
    }
    Ok(NormCheck {
        distinct: min_gap > gap_tol,
        min_gap,
        norms,
    })
}

/// `Σ w_i p_i^{⊗n}`: the law of a group of `n` draws, as a tensor.
pub fn population_moment(mix: &MixtureSpec, n: usize) -> SymTensor {
    population_moment_under(mix, n, None)
}

/// `Σ w_i (B p_i)^{⊗n}`; `B = None` is the identity.
pub fn population_moment_under(mix: &MixtureSpec, n: usize, b: Option<&DiagonalMap>) -> SymTensor {
    let d = mix.dim();
    let mut acc = DenseTensor::zeros(d, n);
    for (w, p) in mix.weights().iter().zip(mix.components()) {
        let v = match b {
            Some(b) => b.apply(p.as_slice()),
            None => p.as_slice().to_vec(),
        };
        acc.add_scaled(*w, &outer_power(&v, n))
            .expect("all components share a dimension");
    }
    SymTensor::new_unchecked(acc)
}
