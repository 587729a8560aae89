mod common;

use std::collections::BTreeMap;

use common::*;
use filterscope_core::analytics::{
    classify_phenotype, depth_decile, fit_global_basis, mean_scale_per_decile, pairwise_shift_distribution,
    shift_matrix, AnalysisOptions, PhenotypeClass, PhenotypeThresholds,
};
use filterscope_core::catalog::{Catalog, GroupAxis, Predicate};
use filterscope_core::divergence::{shift, DivergenceConfig};
use filterscope_core::pca::CoefficientSet;
use filterscope_core::preprocess::ScalingMode;
use filterscope_core::{FilterRecord, FilterSet, ModelId, ModelMeta};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn meta(id: &str, task: &str, data_type: &str, layers: u32) -> ModelMeta {
    ModelMeta {
        model_id: ModelId::new(id),
        name: id.to_string(),
        task: task.to_string(),
        data_type: data_type.to_string(),
        training_sets: vec![format!("set-{}", id.len() % 2)],
        architecture_family: if id.len() % 2 == 0 { "resnet" } else { "vgg" }.to_string(),
        conv_layer_count: layers,
        precision_bits: 32,
    }
}

fn model_filters(id: &str, layers: u32, per_layer: u32, mean: f64, seed: u64) -> FilterSet {
    let mid = ModelId::new(id);
    let mut r = rng(seed);
    let normal = Normal::new(mean, 1.0).unwrap();
    let mut records = Vec::new();
    for layer in 0..layers {
        for k in 0..per_layer {
            let w = std::array::from_fn(|_| normal.sample(&mut r) as f32);
            records.push(FilterRecord::new(mid.clone(), layer, k, w));
        }
    }
    FilterSet::new(records, id)
}

fn raw() -> DivergenceConfig {
    DivergenceConfig {
        mode: ScalingMode::Raw,
        ..DivergenceConfig::default()
    }
}

#[test]
fn three_group_matrix_matches_per_pair_recomputation() {
    let mut cat = Catalog::new();
    for (id, dt, mean, seed) in [("m1", "natural", 0.0, 1), ("m2", "medical-ct", 0.0, 2), ("m3", "seismic", 5.0, 3)] {
        cat.register(meta(id, "classification", dt, 4), vec![], model_filters(id, 4, 300, mean, seed))
            .unwrap();
    }
    let opts = AnalysisOptions::default();
    let basis = fit_global_basis(&cat, ScalingMode::Raw, &opts).unwrap();
    let m = shift_matrix(&cat, GroupAxis::DataType, &basis, &raw(), &opts).unwrap();
    assert_eq!(m.labels, vec!["medical-ct", "natural", "seismic"]);
    let groups = cat.group_by(GroupAxis::DataType);
    for (i, a) in m.labels.iter().enumerate() {
        assert_eq!(m.values[i][i], 0.0);
        for (j, b) in m.labels.iter().enumerate() {
            if i != j {
                let want = shift(&groups[a], &groups[b], &basis, &raw()).unwrap();
                assert!((m.values[i][j] - want).abs() <= 1e-9);
            }
        }
    }
    let same = m.get("natural", "medical-ct").unwrap();
    let far1 = m.get("natural", "seismic").unwrap();
    let far2 = m.get("medical-ct", "seismic").unwrap();
    assert!(same * 10.0 < far1.min(far2), "{same} vs {far1}, {far2}");
    assert!((far1 - far2).abs() < 0.2 * far1);
}

#[test]
fn summary_quantiles_agree_with_rank_oracle() {
    let mut cat = Catalog::new();
    for k in 0..6u64 {
        let id = format!("model{k}");
        cat.register(meta(&id, "t", "d", 2), vec![], model_filters(&id, 2, 80, k as f64 * 0.4, k))
            .unwrap();
    }
    let opts = AnalysisOptions::default();
    let basis = fit_global_basis(&cat, ScalingMode::Raw, &opts).unwrap();
    let m = shift_matrix(&cat, GroupAxis::ModelId, &basis, &raw(), &opts).unwrap();
    let s = pairwise_shift_distribution(&cat, GroupAxis::ModelId, &basis, &raw(), &opts).unwrap();
    let mut vals = Vec::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            vals.push(m.values[i][j]);
        }
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    assert_eq!(s.pair_count, 15);
    // rank r = (n−1)·k/4 split into integer and quarter parts
    let q = |k: usize| {
        let whole = (n - 1) * k / 4;
        let rem = (n - 1) * k % 4;
        if rem == 0 {
            vals[whole]
        } else {
            vals[whole] + (rem as f64 / 4.0) * (vals[whole + 1] - vals[whole])
        }
    };
    assert_eq!(s.min, vals[0]);
    assert_eq!(s.q1, q(1));
    assert_eq!(s.median, q(2));
    assert_eq!(s.q3, q(3));
    assert_eq!(s.max, vals[n - 1]);
    let iqr = s.q3 - s.q1;
    let want_outliers = vals.iter().filter(|&&v| v < s.q1 - 1.5 * iqr || v > s.q3 + 1.5 * iqr).count();
    assert_eq!(s.outliers.len(), want_outliers);
}

#[test]
fn decile_scale_means_match_flat_list_oracle() {
    let mut cat = Catalog::new();
    let fs = model_filters("deep", 23, 17, 0.0, 9);
    cat.register(meta("deep", "t", "d", 23), vec![], fs.clone()).unwrap();
    let stats = mean_scale_per_decile(&ModelId::new("deep"), &cat).unwrap();
    let mut sums = [0.0; 10];
    let mut counts = [0u64; 10];
    for f in &fs.records {
        let d = (10 * f.layer_index / 23).min(9) as usize;
        let (lo, hi) = f.weights.iter().fold((f32::MAX, f32::MIN), |(l, h), &w| (l.min(w), h.max(w)));
        sums[d] += f64::from(hi) - f64::from(lo);
        counts[d] += 1;
    }
    for d in 0..10 {
        let want = sums[d] / counts[d] as f64;
        assert!((stats.means[d].unwrap() - want).abs() < 1e-12);
        assert_eq!(stats.counts[d], counts[d]);
    }
}

fn normal_rows(n: usize, seed: u64) -> Vec<[f64; 9]> {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| std::array::from_fn(|_| normal.sample(&mut r))).collect()
}

#[test]
fn synthetic_phenotypes() {
    let t = PhenotypeThresholds::default();
    for seed in 0..5 {
        let rows = normal_rows(10_000, seed);
        let sun = classify_phenotype(&CoefficientSet::from_rows(rows.clone(), "b"), &t).unwrap();
        assert_eq!(sun.class, PhenotypeClass::GaussianLike, "seed {seed}: {:?}", sun.reasons);

        let mut r = rng(seed + 100);
        let mut spiky = rows.clone();
        for row in &mut spiky {
            row[4] = f64::from(r.random_range(-1i32..=1));
        }
        let p = classify_phenotype(&CoefficientSet::from_rows(spiky, "b"), &t).unwrap();
        assert_eq!(p.class, PhenotypeClass::DiscreteStages);
        assert!(p.evidence[4].distinct_ratio <= 3.0 / 10_000.0);

        let mut bimodal = rows;
        for (k, row) in bimodal.iter_mut().enumerate() {
            row[2] += if k % 2 == 0 { -5.0 } else { 5.0 };
        }
        let p = classify_phenotype(&CoefficientSet::from_rows(bimodal, "b"), &t).unwrap();
        assert_eq!(p.class, PhenotypeClass::NonNormal, "{:?}", p.evidence[2]);
        assert_eq!(p.evidence[2].modes, 2);
    }
}

#[test]
fn phenotype_ignores_row_order() {
    use rand::seq::SliceRandom;
    let mut rows = normal_rows(3_000, 77);
    for (k, row) in rows.iter_mut().enumerate() {
        row[0] = if k % 3 == 0 { (row[0] * 3.0).exp() } else { row[0] };
    }
    let t = PhenotypeThresholds::default();
    let a = classify_phenotype(&CoefficientSet::from_rows(rows.clone(), "b"), &t).unwrap();
    rows.shuffle(&mut rng(78));
    let b = classify_phenotype(&CoefficientSet::from_rows(rows, "b"), &t).unwrap();
    assert_eq!(a.class, b.class);
    for (x, y) in a.evidence.iter().zip(&b.evidence) {
        assert_eq!(x.distinct_ratio, y.distinct_ratio);
        assert_eq!(x.modes, y.modes);
        assert_eq!(x.top5_mass, y.top5_mass);
        assert!((x.skewness - y.skewness).abs() < 1e-9);
    }
}

fn random_catalog(seed: u64) -> Catalog {
    let mut r = rng(seed);
    let tasks = ["classification", "segmentation", "gan-discriminator"];
    let types = ["natural", "medical-ct", "formula"];
    let mut cat = Catalog::new();
    for k in 0..5 {
        let id = format!("m{k}");
        let layers = r.random_range(1..15u32);
        let per = r.random_range(1..6u32);
        let mut m = meta(&id, tasks[r.random_range(0..3)], types[r.random_range(0..3)], layers);
        m.training_sets = vec![["imagenet1k", "coco", "fractal-db"][r.random_range(0..3)].to_string()];
        cat.register(m, vec![], model_filters(&id, layers, per, 0.0, seed * 10 + k)).unwrap();
    }
    cat
}

#[test]
fn disjoint_label_predicates_partition_the_catalog() {
    for seed in 0..10 {
        let cat = random_catalog(seed);
        let all = cat.query(&Predicate::All).unwrap();
        for axis in GroupAxis::ALL {
            let mut union: Vec<FilterRecord> = Vec::new();
            for label in cat.labels(axis) {
                union.extend(cat.query(&Predicate::label(axis, label)).unwrap().records);
            }
            let union = FilterSet::new(union, "union");
            assert_eq!(union.records, all.records, "axis {axis}");
        }
        let mixed = Predicate::Or(vec![
            Predicate::label(GroupAxis::Task, "classification"),
            Predicate::Not(Box::new(Predicate::label(GroupAxis::Task, "classification"))),
        ]);
        assert_eq!(cat.query(&mixed).unwrap().records, all.records);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stats_conserve_counts(seed in any::<u64>()) {
        let cat = random_catalog(seed % 100_000);
        for axis in GroupAxis::ALL {
            let rows = cat.stats(axis);
            prop_assert_eq!(rows.iter().map(|r| r.filter_count).sum::<u64>(), cat.filter_count() as u64);
            prop_assert_eq!(rows.iter().map(|r| r.layer_count).sum::<u64>(), cat.layer_count() as u64);
            if axis.is_model_level() {
                prop_assert_eq!(rows.iter().map(|r| r.model_count).sum::<u64>(), cat.model_count() as u64);
            }
            prop_assert!(rows.windows(2).all(|w| w[0].label < w[1].label));
        }
    }

    #[test]
    fn queries_are_pure(seed in any::<u64>()) {
        let cat = random_catalog(seed % 100_000);
        let p = Predicate::label(GroupAxis::DepthDecile, "0");
        prop_assert_eq!(cat.query(&p), cat.query(&p));
    }

    #[test]
    fn decile_in_range_and_monotone(layers in 1u32..500, k in 0u32..500) {
        prop_assume!(k < layers);
        let d = depth_decile(k, layers).unwrap();
        prop_assert!(d <= 9);
        if k + 1 < layers {
            prop_assert!(depth_decile(k + 1, layers).unwrap() >= d);
        }
    }
}

#[test]
fn group_by_matches_query_per_label() {
    let cat = random_catalog(3);
    let groups: BTreeMap<String, FilterSet> = cat.group_by(GroupAxis::TrainingSet);
    for (label, set) in &groups {
        let q = cat.query(&Predicate::label(GroupAxis::TrainingSet, label.clone())).unwrap();
        assert_eq!(q.records, set.records);
        assert!(set.is_canonically_ordered());
    }
}
