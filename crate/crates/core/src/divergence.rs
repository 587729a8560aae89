//! Coefficient histograms and the variance-weighted symmetric KL shift.
//!
//! For two filter sets A and B projected onto one basis, the shift is
//!
//! ```text
//! D(A‖B) = Σᵢ qᵢ Σₓ Pᵢ(x) ln(Pᵢ(x)/Qᵢ(x)) + Qᵢ(x) ln(Qᵢ(x)/Pᵢ(x))
//! ```
//!
//! where Pᵢ, Qᵢ are histograms of the i-th coefficient over a range shared by
//! both sets, floored at ε by additive smoothing, and qᵢ is the explained
//! variance ratio of component i.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pca::{transform, CoefficientSet, PcaBasis};
use crate::preprocess::ScalingMode;
use crate::{Error, FilterSet, Result, KERNEL_LEN};

pub const DEFAULT_BINS: usize = 70;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// How the per-component divergences are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// qᵢ, the explained variance ratio.
    #[default]
    ExplainedVariance,
    /// 1/9 for every component.
    Uniform,
}

/// Which basis the coefficients of a comparison are taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisScope {
    /// One basis fit over the whole catalog.
    #[default]
    Global,
    /// A basis fit over the union of the two compared sets.
    Pair,
}

macro_rules! named_enum {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

named_enum!(Weighting, Weighting::ExplainedVariance => "explained-variance", Weighting::Uniform => "uniform");
named_enum!(BasisScope, BasisScope::Global => "global", BasisScope::Pair => "pair");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DivergenceConfig {
    pub bins: usize,
    pub epsilon: f64,
    pub weighting: Weighting,
    pub mode: ScalingMode,
    pub basis: BasisScope,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            bins: DEFAULT_BINS,
            epsilon: DEFAULT_EPSILON,
            weighting: Weighting::ExplainedVariance,
            mode: ScalingMode::Scaled,
            basis: BasisScope::Global,
        }
    }
}

impl DivergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidConfig(format!("bins must be >= 2, got {}", self.bins)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 / self.bins as f64) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1/bins), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Per-component weights for `basis` under this config.
    pub fn weights(&self, basis: &PcaBasis) -> [f64; KERNEL_LEN] {
        match self.weighting {
            Weighting::ExplainedVariance => basis.explained_variance_ratios,
            Weighting::Uniform => [1.0 / KERNEL_LEN as f64; KERNEL_LEN],
        }
    }
}

/// Binned, ε-smoothed distribution of one principal-component coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentHistogram {
    pub component: usize,
    pub lo: f64,
    pub hi: f64,
    /// Raw counts before smoothing; they sum to the number of samples.
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub epsilon: f64,
}

impl ComponentHistogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn sample_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bin_count() as f64
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.bin_width()
    }

    fn same_domain(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.counts.len() == other.counts.len()
    }
}

/// floor(bins·(x−lo)/(hi−lo)), clamped into [0, bins−1].
pub fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let pos = libm::floor(bins as f64 * (x - lo) / (hi - lo));
    if pos <= 0.0 {
        0
    } else if pos >= (bins - 1) as f64 {
        bins - 1
    } else {
        pos as usize
    }
}

/// Counts `values` into `bins` uniform bins over [lo, hi].
pub fn histogram_counts<I: IntoIterator<Item = f64>>(values: I, lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = alloc::vec![0u64; bins];
    for x in values {
        counts[bin_index(x, lo, hi, bins)] += 1;
    }
    counts
}

/// Adds ε to every bin's probability mass and renormalizes.
pub fn smooth(counts: &[u64], epsilon: f64) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    let n = n.max(1) as f64;
    let norm = 1.0 + counts.len() as f64 * epsilon;
    counts.iter().map(|&c| (c as f64 / n + epsilon) / norm).collect()
}

/// Range of `component` over every set.
pub fn shared_range(sets: &[&CoefficientSet], component: usize) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in sets {
        for x in s.column(component) {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// One histogram per set on component `component`, all over the range
/// spanned by the union of the sets.
pub fn build_histograms(
    sets: &[&CoefficientSet],
    component: usize,
    config: &DivergenceConfig,
) -> Result<Vec<ComponentHistogram>> {
    config.validate()?;
    if sets.is_empty() || sets.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptyInput("histograms need nonempty coefficient sets"));
    }
    if sets.windows(2).any(|w| w[0].basis_id != w[1].basis_id) {
        return Err(Error::InvariantViolation("coefficient sets come from different bases".into()));
    }
    let (lo, hi) = shared_range(sets, component).ok_or(Error::EmptyInput("no coefficients"))?;
    if !(lo < hi) {
        return Err(Error::DegenerateRange { component });
    }
    Ok(sets
        .iter()
        .map(|s| {
            let counts = histogram_counts(s.column(component), lo, hi, config.bins);
            let probabilities = smooth(&counts, config.epsilon);
            ComponentHistogram {
                component,
                lo,
                hi,
                counts,
                probabilities,
                epsilon: config.epsilon,
            }
        })
        .collect())
}

/// Σₓ P ln(P/Q) + Q ln(Q/P), in nats.
pub fn sym_kl(p: &ComponentHistogram, q: &ComponentHistogram) -> Result<f64> {
    if !p.same_domain(q) {
        return Err(Error::RangeMismatch);
    }
    Ok(sym_kl_probabilities(&p.probabilities, &q.probabilities))
}

/// Symmetric KL over two strictly positive probability vectors of equal length.
pub fn sym_kl_probabilities(p: &[f64], q: &[f64]) -> f64 {
    // (P−Q)·ln(P/Q) is the summand rearranged; it is exactly symmetric in P, Q
    // and each term is ≥ 0
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a == b { 0.0 } else { (a - b) * (libm::log(a) - libm::log(b)) })
        .sum()
}

/// Per-component contributions to a shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftBreakdown {
    pub total: f64,
    /// Unweighted symmetric KL per component; `None` where the component's
    /// coefficients were constant over both sets.
    pub per_component: [Option<f64>; KERNEL_LEN],
    pub weights: [f64; KERNEL_LEN],
}

impl ShiftBreakdown {
    pub fn degenerate_components(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_component
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_none())
            .map(|(i, _)| i)
    }
}

/// Shift between two coefficient sets already projected on a common basis.
pub fn shift_coefficients(
    a: &CoefficientSet,
    b: &CoefficientSet,
    weights: &[f64; KERNEL_LEN],
    config: &DivergenceConfig,
) -> Result<ShiftBreakdown> {
    let mut per_component = [None; KERNEL_LEN];
    let mut total = 0.0;
    for i in 0..KERNEL_LEN {
        match build_histograms(&[a, b], i, config) {
            Ok(h) => {
                let d = sym_kl(&h[0], &h[1])?;
                per_component[i] = Some(d);
                total += weights[i] * d;
            }
            Err(Error::DegenerateRange { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(ShiftBreakdown {
        total,
        per_component,
        weights: *weights,
    })
}

/// D(A‖B) on `basis`. Filters are taken as given: preprocess them first.
pub fn shift_breakdown(a: &FilterSet, b: &FilterSet, basis: &PcaBasis, config: &DivergenceConfig) -> Result<ShiftBreakdown> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("shift needs two nonempty filter sets"));
    }
    let ca = transform(&a.records, basis);
    let cb = transform(&b.records, basis);
    shift_coefficients(&ca, &cb, &config.weights(basis), config)
}

pub fn shift(a: &FilterSet, b: &FilterSet, basis: &PcaBasis, config: &DivergenceConfig) -> Result<f64> {
    shift_breakdown(a, b, basis, config).map(|s| s.total)
}
