//! Streaming moments and full-rank PCA over flattened 3×3 filters.
//!
//! Moments are accumulated in one pass (chunk-wise two-pass, combined with
//! the pairwise update of Chan et al.), so a basis can be fit over sharded
//! collections far larger than memory. The basis comes from the
//! eigendecomposition of the 9×9 sample covariance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, symmetric_eigen};
use crate::preprocess::{ScaledFilterSet, ScalingMode};
use crate::{Error, FilterRecord, FilterSet, ModelId, Result, KERNEL_LEN};

pub type Vector = [f64; KERNEL_LEN];
pub type Matrix = [[f64; KERNEL_LEN]; KERNEL_LEN];

/// Count, mean and co-moment matrix Σ(x−μ)(x−μ)ᵀ of a stream of filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub count: u64,
    pub mean: Vector,
    pub comoment: Matrix,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl MomentAccumulator {
    pub const fn new() -> Self {
        MomentAccumulator {
            count: 0,
            mean: [0.0; KERNEL_LEN],
            comoment: [[0.0; KERNEL_LEN]; KERNEL_LEN],
        }
    }

    /// Moments of a single batch, computed in two passes.
    pub fn from_vectors(chunk: &[Vector]) -> Self {
        Self::from_iter_twice(|| chunk.iter().copied(), chunk.len())
    }

    pub fn from_records(chunk: &[FilterRecord]) -> Self {
        Self::from_iter_twice(|| chunk.iter().map(FilterRecord::weights_f64), chunk.len())
    }

    fn from_iter_twice<I, F>(iter: F, n: usize) -> Self
    where
        F: Fn() -> I,
        I: Iterator<Item = Vector>,
    {
        if n == 0 {
            return Self::new();
        }
        let mut mean = [0.0; KERNEL_LEN];
        for x in iter() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        let inv = 1.0 / n as f64;
        for m in &mut mean {
            *m *= inv;
        }
        let mut comoment = [[0.0; KERNEL_LEN]; KERNEL_LEN];
        // compensation term keeps the mean error out of the second moment
        let mut residual = [0.0; KERNEL_LEN];
        for x in iter() {
            let d: Vector = core::array::from_fn(|k| x[k] - mean[k]);
            for p in 0..KERNEL_LEN {
                residual[p] += d[p];
                for q in p..KERNEL_LEN {
                    comoment[p][q] += d[p] * d[q];
                }
            }
        }
        for p in 0..KERNEL_LEN {
            for q in p..KERNEL_LEN {
                comoment[p][q] -= residual[p] * residual[q] * inv;
                comoment[q][p] = comoment[p][q];
            }
        }
        MomentAccumulator {
            count: n as u64,
            mean,
            comoment,
        }
    }

    /// Folds a chunk of filters into the accumulator.
    pub fn accumulate(&mut self, chunk: &[FilterRecord]) {
        if !chunk.is_empty() {
            *self = self.merge(&Self::from_records(chunk));
        }
    }

    pub fn accumulate_vectors(&mut self, chunk: &[Vector]) {
        if !chunk.is_empty() {
            *self = self.merge(&Self::from_vectors(chunk));
        }
    }

    /// Moments of the concatenation of both streams. Exactly commutative.
    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta: Vector = core::array::from_fn(|k| other.mean[k] - self.mean[k]);
        let mean = core::array::from_fn(|k| (na * self.mean[k] + nb * other.mean[k]) / n);
        let w = na * nb / n;
        let mut comoment = [[0.0; KERNEL_LEN]; KERNEL_LEN];
        for p in 0..KERNEL_LEN {
            for q in p..KERNEL_LEN {
                let c = (self.comoment[p][q] + other.comoment[p][q]) + delta[p] * delta[q] * w;
                comoment[p][q] = c;
                comoment[q][p] = c;
            }
        }
        MomentAccumulator {
            count: self.count + other.count,
            mean,
            comoment,
        }
    }

    /// Merges shards as a balanced binary tree in index order, so the result
    /// does not depend on how the shards were scheduled.
    pub fn merge_tree(shards: &[MomentAccumulator]) -> Self {
        match shards.len() {
            0 => Self::new(),
            1 => shards[0],
            n => {
                let (l, r) = shards.split_at(n / 2);
                Self::merge_tree(l).merge(&Self::merge_tree(r))
            }
        }
    }

    /// Sample covariance with the 1/(N−1) estimator.
    pub fn covariance(&self) -> Matrix {
        let denom = if self.count > 1 { (self.count - 1) as f64 } else { 1.0 };
        self.comoment.map(|row| row.map(|c| c / denom))
    }
}

/// Where a basis came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisProvenance {
    pub mode: ScalingMode,
    pub source: String,
    pub excluded_degenerate: bool,
}

impl Default for BasisProvenance {
    fn default() -> Self {
        BasisProvenance {
            mode: ScalingMode::Raw,
            source: String::from("unspecified"),
            excluded_degenerate: false,
        }
    }
}

/// Mean filter, orthonormal principal components (rows) and explained
/// variance ratios, in descending eigenvalue order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub id: String,
    pub mean: Vector,
    pub components: Matrix,
    pub eigenvalues: Vector,
    pub explained_variance_ratios: Vector,
    pub sample_count: u64,
    pub provenance: BasisProvenance,
}

/// Makes the largest-magnitude entry positive (lowest index wins ties).
fn apply_sign_convention(v: &mut Vector) {
    let mut best = 0;
    for k in 1..KERNEL_LEN {
        if v[k].abs() > v[best].abs() {
            best = k;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn lexicographic(a: &Vector, b: &Vector) -> core::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(core::cmp::Ordering::Equal)
}

impl PcaBasis {
    /// Fits a basis from accumulated moments.
    pub fn from_moments(acc: &MomentAccumulator, provenance: BasisProvenance) -> Result<Self> {
        if acc.count < KERNEL_LEN as u64 {
            return Err(Error::InsufficientSamples {
                required: KERNEL_LEN as u64,
                got: acc.count,
            });
        }
        let cov = acc.covariance();
        let trace: f64 = (0..KERNEL_LEN).map(|k| cov[k][k]).sum();
        if !(trace > 0.0) {
            return Err(Error::ZeroVariance);
        }

        let eig = symmetric_eigen(&cov);
        let mut pairs: Vec<(f64, Vector)> = (0..KERNEL_LEN)
            .map(|k| {
                let mut v = eig.vectors[k];
                apply_sign_convention(&mut v);
                // roundoff can leave tiny negative eigenvalues of a PSD matrix
                (eig.values[k].max(0.0), v)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| lexicographic(&a.1, &b.1)));

        let total: f64 = pairs.iter().map(|p| p.0).sum();
        let eigenvalues: Vector = core::array::from_fn(|k| pairs[k].0);
        let components: Matrix = core::array::from_fn(|k| pairs[k].1);
        let explained_variance_ratios = eigenvalues.map(|l| l / total);

        let mut basis = PcaBasis {
            id: String::new(),
            mean: acc.mean,
            components,
            eigenvalues,
            explained_variance_ratios,
            sample_count: acc.count,
            provenance,
        };
        basis.id = basis.content_id();
        Ok(basis)
    }

    /// Fits on every record of a set as-is.
    pub fn fit(filters: &FilterSet) -> Result<Self> {
        let acc = MomentAccumulator::from_records(&filters.records);
        PcaBasis::from_moments(
            &acc,
            BasisProvenance {
                mode: ScalingMode::Raw,
                source: filters.source_query.clone(),
                excluded_degenerate: false,
            },
        )
    }

    /// Fits on preprocessed filters, optionally leaving degenerate ones out.
    pub fn fit_scaled(set: &ScaledFilterSet, exclude_degenerate: bool, source: &str) -> Result<Self> {
        let mut acc = MomentAccumulator::new();
        let chunk: Vec<FilterRecord> = set.fit_records(exclude_degenerate).cloned().collect();
        acc.accumulate(&chunk);
        PcaBasis::from_moments(
            &acc,
            BasisProvenance {
                mode: set.mode,
                source: String::from(source),
                excluded_degenerate: exclude_degenerate,
            },
        )
    }

    /// Fits over shards: each shard is accumulated independently and the
    /// results merged in a fixed tree order.
    pub fn fit_sharded(shards: &[&[FilterRecord]], provenance: BasisProvenance) -> Result<Self> {
        let accs: Vec<MomentAccumulator> = shards.iter().map(|s| MomentAccumulator::from_records(s)).collect();
        PcaBasis::from_moments(&MomentAccumulator::merge_tree(&accs), provenance)
    }

    /// Stable identifier derived from the basis contents (FNV-1a over the bits).
    pub fn content_id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for x in self.mean.iter().chain(self.components.iter().flatten()).chain(&self.explained_variance_ratios) {
            feed(&x.to_bits().to_le_bytes());
        }
        feed(&self.sample_count.to_le_bytes());
        feed(self.provenance.mode.name().as_bytes());
        format!("pca-{h:016x}")
    }

    pub fn cumulative_ratios(&self) -> Vector {
        let mut acc = 0.0;
        self.explained_variance_ratios.map(|q| {
            acc += q;
            acc
        })
    }

    /// Largest |⟨vᵢ, vⱼ⟩ − δᵢⱼ| over all component pairs.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..KERNEL_LEN {
            for j in 0..KERNEL_LEN {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&self.components[i], &self.components[j]) - want).abs());
            }
        }
        worst
    }

    /// Checks the structural invariants (used after importing a basis).
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .mean
            .iter()
            .chain(self.components.iter().flatten())
            .chain(&self.explained_variance_ratios)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvariantViolation("basis has non-finite entries".into()));
        }
        if self.orthonormality_residual() > 1e-8 {
            return Err(Error::InvariantViolation("basis components are not orthonormal".into()));
        }
        let q = &self.explained_variance_ratios;
        if q.iter().any(|&x| x < 0.0) || q.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvariantViolation(
                "explained variance ratios must be non-negative and non-increasing".into(),
            ));
        }
        if (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvariantViolation("explained variance ratios do not sum to 1".into()));
        }
        if self.sample_count < KERNEL_LEN as u64 {
            return Err(Error::InvariantViolation("basis sample_count below 9".into()));
        }
        Ok(())
    }

    /// cᵢ = ⟨f − mean, vᵢ⟩.
    pub fn project(&self, weights: &Vector) -> Vector {
        let centered: Vector = core::array::from_fn(|k| weights[k] - self.mean[k]);
        core::array::from_fn(|i| dot(&centered, &self.components[i]))
    }

    /// f = mean + Σᵢ cᵢ vᵢ.
    pub fn unproject(&self, coefficients: &Vector) -> Vector {
        let mut f = self.mean;
        for (c, v) in coefficients.iter().zip(&self.components) {
            for (x, vk) in f.iter_mut().zip(v) {
                *x += c * vk;
            }
        }
        f
    }
}

/// Provenance of one coefficient row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FilterKey {
    pub model_id: ModelId,
    pub layer_index: u32,
    pub filter_ordinal: u32,
}

/// PCA coefficients of a filter set, one row per filter in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientSet {
    pub coefficients: Vec<Vector>,
    /// Either empty (synthetic data) or one key per row.
    pub keys: Vec<FilterKey>,
    pub basis_id: String,
    pub source_query: String,
}

impl CoefficientSet {
    /// Wraps bare coefficient rows with no filter provenance.
    pub fn from_rows(coefficients: Vec<Vector>, basis_id: impl Into<String>) -> Self {
        CoefficientSet {
            coefficients,
            keys: Vec::new(),
            basis_id: basis_id.into(),
            source_query: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn column(&self, component: usize) -> impl Iterator<Item = f64> + '_ {
        self.coefficients.iter().map(move |row| row[component])
    }
}

/// Projects every filter of `records` onto `basis`.
pub fn transform<'a, I>(records: I, basis: &PcaBasis) -> CoefficientSet
where
    I: IntoIterator<Item = &'a FilterRecord>,
{
    let mut coefficients = Vec::new();
    let mut keys = Vec::new();
    for r in records {
        coefficients.push(basis.project(&r.weights_f64()));
        keys.push(FilterKey {
            model_id: r.model_id.clone(),
            layer_index: r.layer_index,
            filter_ordinal: r.filter_ordinal,
        });
    }
    CoefficientSet {
        coefficients,
        keys,
        basis_id: basis.id.clone(),
        source_query: String::new(),
    }
}

pub fn transform_set(filters: &FilterSet, basis: &PcaBasis) -> CoefficientSet {
    let mut c = transform(&filters.records, basis);
    c.source_query = filters.source_query.clone();
    c
}

/// Reconstructs filter weights in 64-bit precision.
pub fn reconstruct(coeffs: &CoefficientSet, basis: &PcaBasis) -> Vec<Vector> {
    coeffs.coefficients.iter().map(|c| basis.unproject(c)).collect()
}

/// Reconstructs a [`FilterSet`], rounding weights to 32-bit floats. Rows
/// without provenance are attributed to model `reconstructed`, layer 0.
pub fn reconstruct_filters(coeffs: &CoefficientSet, basis: &PcaBasis) -> FilterSet {
    let fallback = ModelId::new("reconstructed");
    let records = coeffs
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let w = basis.unproject(c).map(|x| x as f32);
            match coeffs.keys.get(k) {
                Some(key) => FilterRecord::new(key.model_id.clone(), key.layer_index, key.filter_ordinal, w),
                None => FilterRecord::new(fallback.clone(), 0, k as u32, w),
            }
        })
        .collect();
    FilterSet::new(records, coeffs.source_query.clone())
}
