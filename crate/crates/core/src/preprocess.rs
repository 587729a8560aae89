//! Per-filter normalization and scale measurement.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, FilterRecord, FilterSet, Weights};

pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Whether filters are max-abs scaled before structure analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    #[default]
    Scaled,
    Raw,
}

impl ScalingMode {
    pub fn name(self) -> &'static str {
        match self {
            ScalingMode::Scaled => "scaled",
            ScalingMode::Raw => "raw",
        }
    }
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scaled" => Ok(ScalingMode::Scaled),
            "raw" => Ok(ScalingMode::Raw),
            other => Err(Error::InvalidConfig(alloc::format!("unknown scaling mode `{other}`"))),
        }
    }
}

/// Filters after preprocessing, with a degeneracy flag per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFilterSet {
    pub records: Vec<FilterRecord>,
    pub degenerate: Vec<bool>,
    pub mode: ScalingMode,
}

impl ScaledFilterSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    /// Filters that take part in PCA fitting.
    pub fn fit_records(&self, exclude_degenerate: bool) -> impl Iterator<Item = &FilterRecord> {
        self.records
            .iter()
            .zip(&self.degenerate)
            .filter(move |(_, &d)| !(exclude_degenerate && d))
            .map(|(r, _)| r)
    }
}

pub fn max_abs(weights: &Weights) -> f32 {
    weights.iter().fold(0.0f32, |m, w| m.max(w.abs()))
}

/// Divides one kernel by its largest absolute weight. Returns `None` (and
/// leaves the kernel alone) when that maximum is below `threshold`.
pub fn maxabs_scale_weights(weights: &Weights, threshold: f64) -> Option<Weights> {
    let m = max_abs(weights);
    if f64::from(m) < threshold || m == 0.0 {
        return None;
    }
    let mut out = weights.map(|w| w / m);
    // w / m can round to 1 ± 1ulp only for the maximal entry; pin it exactly
    for (o, w) in out.iter_mut().zip(weights) {
        if w.abs() == m {
            *o = if *w < 0.0 { -1.0 } else { 1.0 };
        }
    }
    Some(out)
}

/// Scales every filter by its absolute maximum weight. Filters whose maximum
/// is below `degeneracy_threshold` are flagged and passed through unchanged.
pub fn maxabs_scale(filters: &FilterSet, degeneracy_threshold: f64) -> ScaledFilterSet {
    let mut records = Vec::with_capacity(filters.len());
    let mut degenerate = Vec::with_capacity(filters.len());
    for f in filters {
        let mut rec = f.clone();
        match maxabs_scale_weights(&f.weights, degeneracy_threshold) {
            Some(w) => {
                rec.weights = w;
                degenerate.push(false);
            }
            None => degenerate.push(true),
        }
        records.push(rec);
    }
    ScaledFilterSet {
        records,
        degenerate,
        mode: ScalingMode::Scaled,
    }
}

/// Applies `mode`. Raw mode leaves weights untouched but still flags
/// sub-threshold filters.
pub fn prepare(filters: &FilterSet, mode: ScalingMode, degeneracy_threshold: f64) -> ScaledFilterSet {
    match mode {
        ScalingMode::Scaled => maxabs_scale(filters, degeneracy_threshold),
        ScalingMode::Raw => ScaledFilterSet {
            records: filters.records.clone(),
            degenerate: filters
                .iter()
                .map(|f| f64::from(max_abs(&f.weights)) < degeneracy_threshold || max_abs(&f.weights) == 0.0)
                .collect(),
            mode: ScalingMode::Raw,
        },
    }
}

/// Difference between the largest and smallest weight of a kernel.
pub fn filter_scale(weights: &Weights) -> f64 {
    let (lo, hi) = weights.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &w| {
        (lo.min(w), hi.max(w))
    });
    f64::from(hi) - f64::from(lo)
}
