use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, GroupAxis};
use crate::divergence::{shift_coefficients, BasisScope, DivergenceConfig};
use crate::pca::{transform, BasisProvenance, CoefficientSet, MomentAccumulator, PcaBasis};
use crate::preprocess::{prepare, ScaledFilterSet, ScalingMode, DEFAULT_DEGENERACY_THRESHOLD};
use crate::stats::FiveNumber;
use crate::{Error, FilterRecord, FilterSet, Result};

/// Knobs shared by the grouped analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    /// Groups with fewer filters are left out of shift matrices.
    pub min_group_size: usize,
    pub degeneracy_threshold: f64,
    /// Leave degenerate filters out of PCA fitting.
    pub exclude_degenerate: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            min_group_size: 100,
            degeneracy_threshold: DEFAULT_DEGENERACY_THRESHOLD,
            exclude_degenerate: true,
        }
    }
}

/// Fits one basis over every filter in the catalog, one moment shard per
/// model merged in model order.
pub fn fit_global_basis(catalog: &Catalog, mode: ScalingMode, options: &AnalysisOptions) -> Result<PcaBasis> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let shards: Vec<MomentAccumulator> = catalog
        .models()
        .map(|entry| {
            let set = FilterSet {
                records: entry.filters.clone(),
                source_query: String::new(),
            };
            let prepared = prepare(&set, mode, options.degeneracy_threshold);
            let fit: Vec<FilterRecord> = prepared.fit_records(options.exclude_degenerate).cloned().collect();
            MomentAccumulator::from_records(&fit)
        })
        .collect();
    PcaBasis::from_moments(
        &MomentAccumulator::merge_tree(&shards),
        BasisProvenance {
            mode,
            source: "all".to_string(),
            excluded_degenerate: options.exclude_degenerate,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmittedGroup {
    pub label: String,
    pub filter_count: usize,
}

/// Symmetric matrix of pairwise shifts D between the groups of one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftMatrix {
    pub axis: String,
    pub labels: Vec<String>,
    pub group_sizes: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    /// Groups below the minimum size.
    pub omitted: Vec<OmittedGroup>,
    pub config: DivergenceConfig,
    pub options: AnalysisOptions,
    /// Basis id, or `pair` when every comparison fits its own basis.
    pub basis_id: String,
    /// Components whose coefficients were constant for a pair and so
    /// contributed zero.
    pub notes: Vec<String>,
}

impl ShiftMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }

    /// Strict upper triangle as (row label, column label, D).
    pub fn pairs(&self) -> Vec<PairShift> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                out.push(PairShift {
                    a: self.labels[i].clone(),
                    b: self.labels[j].clone(),
                    value: self.values[i][j],
                });
            }
        }
        out
    }

    pub fn summary(&self) -> Result<ShiftSummary> {
        let pairs = self.pairs();
        let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        let five = FiveNumber::of(&values).ok_or(Error::TooFewGroups {
            got: self.len(),
            min_size: self.options.min_group_size,
        })?;
        let outliers = pairs.into_iter().filter(|p| five.is_outlier(p.value)).collect();
        Ok(ShiftSummary {
            axis: self.axis.clone(),
            pair_count: values.len(),
            min: five.min,
            q1: five.q1,
            median: five.median,
            q3: five.q3,
            max: five.max,
            outliers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairShift {
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// Distribution of the pairwise shifts of one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub axis: String,
    pub pair_count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<PairShift>,
}

/// Shift matrix over the catalog's groups on `axis`.
pub fn shift_matrix(
    catalog: &Catalog,
    axis: GroupAxis,
    basis: &PcaBasis,
    config: &DivergenceConfig,
    options: &AnalysisOptions,
) -> Result<ShiftMatrix> {
    shift_matrix_from_groups(axis.name(), &catalog.group_by(axis), basis, config, options)
}

/// Shift matrix over explicitly given, labeled groups. Labels come out
/// sorted. Under [`BasisScope::Pair`] the supplied basis is ignored and each
/// pair is compared in a basis fit over its union.
pub fn shift_matrix_from_groups(
    axis: &str,
    groups: &BTreeMap<String, FilterSet>,
    basis: &PcaBasis,
    config: &DivergenceConfig,
    options: &AnalysisOptions,
) -> Result<ShiftMatrix> {
    config.validate()?;
    if config.basis == BasisScope::Global && basis.provenance.mode != config.mode {
        return Err(Error::InvalidConfig(format!(
            "basis {} was fit on {} filters but the comparison uses {}",
            basis.id, basis.provenance.mode, config.mode
        )));
    }

    let mut kept: Vec<(&String, ScaledFilterSet)> = Vec::new();
    let mut omitted = Vec::new();
    for (label, set) in groups {
        if set.len() < options.min_group_size.max(1) {
            omitted.push(OmittedGroup {
                label: label.clone(),
                filter_count: set.len(),
            });
        } else {
            kept.push((label, prepare(set, config.mode, options.degeneracy_threshold)));
        }
    }
    if kept.len() < 2 {
        return Err(Error::TooFewGroups {
            got: kept.len(),
            min_size: options.min_group_size,
        });
    }

    let n = kept.len();
    let mut values = vec![vec![0.0; n]; n];
    let mut notes = Vec::new();
    let mut record_notes = |a: &str, b: &str, degenerate: Vec<usize>| {
        if !degenerate.is_empty() {
            notes.push(format!(
                "{a} vs {b}: components {degenerate:?} constant across both groups, contributed 0"
            ));
        }
    };

    match config.basis {
        BasisScope::Global => {
            let coeffs: Vec<CoefficientSet> = kept.iter().map(|(_, s)| transform(&s.records, basis)).collect();
            let weights = config.weights(basis);
            for i in 0..n {
                for j in i + 1..n {
                    let s = shift_coefficients(&coeffs[i], &coeffs[j], &weights, config)?;
                    values[i][j] = s.total;
                    values[j][i] = s.total;
                    record_notes(kept[i].0, kept[j].0, s.degenerate_components().collect());
                }
            }
        }
        BasisScope::Pair => {
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (&kept[i].1, &kept[j].1);
                    let mut acc = MomentAccumulator::new();
                    for s in [a, b] {
                        let fit: Vec<FilterRecord> = s.fit_records(options.exclude_degenerate).cloned().collect();
                        acc.accumulate(&fit);
                    }
                    let pair_basis = PcaBasis::from_moments(
                        &acc,
                        BasisProvenance {
                            mode: config.mode,
                            source: format!("{axis}={}|{}", kept[i].0, kept[j].0),
                            excluded_degenerate: options.exclude_degenerate,
                        },
                    )?;
                    let s = shift_coefficients(
                        &transform(&a.records, &pair_basis),
                        &transform(&b.records, &pair_basis),
                        &config.weights(&pair_basis),
                        config,
                    )?;
                    values[i][j] = s.total;
                    values[j][i] = s.total;
                    record_notes(kept[i].0, kept[j].0, s.degenerate_components().collect());
                }
            }
        }
    }

    Ok(ShiftMatrix {
        axis: axis.to_string(),
        labels: kept.iter().map(|(l, _)| (*l).clone()).collect(),
        group_sizes: kept.iter().map(|(_, s)| s.len()).collect(),
        values,
        omitted,
        config: *config,
        options: *options,
        basis_id: match config.basis {
            BasisScope::Global => basis.id.clone(),
            BasisScope::Pair => "pair".to_string(),
        },
        notes,
    })
}

/// Summary statistics over the strict upper triangle of the axis' matrix.
pub fn pairwise_shift_distribution(
    catalog: &Catalog,
    axis: GroupAxis,
    basis: &PcaBasis,
    config: &DivergenceConfig,
    options: &AnalysisOptions,
) -> Result<ShiftSummary> {
    shift_matrix(catalog, axis, basis, config, options)?.summary()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{FilterRecord, ModelId};

    fn group(id: &str, n: usize, offset: f32) -> FilterSet {
        let m = ModelId::new(id);
        let records = (0..n)
            .map(|k| {
                let w: [f32; 9] = core::array::from_fn(|j| offset + ((k * 7 + j * 13) % 17) as f32 / 17.0 - 0.5);
                FilterRecord::new(m.clone(), 0, k as u32, w)
            })
            .collect();
        FilterSet::new(records, id)
    }

    fn raw_config() -> DivergenceConfig {
        DivergenceConfig {
            mode: ScalingMode::Raw,
            ..DivergenceConfig::default()
        }
    }

    #[test]
    fn identical_groups_have_zero_shift() {
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), group("x", 150, 0.0));
        groups.insert("b".to_string(), group("x", 150, 0.0));
        let basis = PcaBasis::fit(&group("x", 150, 0.0)).unwrap();
        let m = shift_matrix_from_groups("t", &groups, &basis, &raw_config(), &AnalysisOptions::default()).unwrap();
        assert_eq!(m.values, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let s = m.summary().unwrap();
        assert_eq!((s.min, s.median, s.max, s.pair_count), (0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn small_groups_are_omitted() {
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), group("x", 150, 0.0));
        groups.insert("b".to_string(), group("y", 150, 0.3));
        groups.insert("tiny".to_string(), group("z", 5, 0.0));
        let basis = PcaBasis::fit(&group("x", 150, 0.0)).unwrap();
        let m = shift_matrix_from_groups("t", &groups, &basis, &raw_config(), &AnalysisOptions::default()).unwrap();
        assert_eq!(m.labels, vec!["a", "b"]);
        assert_eq!(
            m.omitted,
            vec![OmittedGroup {
                label: "tiny".into(),
                filter_count: 5
            }]
        );
        assert!(m.values[0][1] > 0.0);
        assert_eq!(m.values[0][1], m.values[1][0]);

        groups.remove("b");
        let err = shift_matrix_from_groups("t", &groups, &basis, &raw_config(), &AnalysisOptions::default());
        assert!(matches!(err, Err(Error::TooFewGroups { got: 1, .. })));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), group("x", 150, 0.0));
        groups.insert("b".to_string(), group("y", 150, 0.3));
        let basis = PcaBasis::fit(&group("x", 150, 0.0)).unwrap();
        let err = shift_matrix_from_groups("t", &groups, &basis, &DivergenceConfig::default(), &AnalysisOptions::default());
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn pair_scope_fits_its_own_basis() {
        let mut groups = BTreeMap::new();
        groups.insert("a".to_string(), group("x", 150, 0.0));
        groups.insert("b".to_string(), group("y", 150, 0.3));
        let basis = PcaBasis::fit(&group("x", 150, 0.0)).unwrap();
        let cfg = DivergenceConfig {
            basis: BasisScope::Pair,
            ..raw_config()
        };
        let m = shift_matrix_from_groups("t", &groups, &basis, &cfg, &AnalysisOptions::default()).unwrap();
        assert_eq!(m.basis_id, "pair");
        assert!(m.values[0][1] > 0.0);
    }
}
