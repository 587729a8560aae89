mod common;

use common::*;
use filterscope_core::divergence::{build_histograms, shift, shift_breakdown, DivergenceConfig, Weighting};
use filterscope_core::pca::{transform_set, PcaBasis};
use filterscope_core::preprocess::ScalingMode;
use filterscope_core::{FilterSet, Weights};
use proptest::prelude::*;

/// Straight-line evaluation of the shift: project, bin over the shared
/// range, add ε per bin and renormalize, then sum qᵢ·(P ln P/Q + Q ln Q/P).
fn oracle_shift(a: &[Weights], b: &[Weights], basis: &PcaBasis, bins: usize, eps: f64) -> f64 {
    let project = |w: &Weights| -> Vec<f64> {
        (0..9)
            .map(|i| {
                let mut s = 0.0;
                for k in 0..9 {
                    s += (f64::from(w[k]) - basis.mean[k]) * basis.components[i][k];
                }
                s
            })
            .collect()
    };
    let ca: Vec<Vec<f64>> = a.iter().map(project).collect();
    let cb: Vec<Vec<f64>> = b.iter().map(project).collect();
    let mut d = 0.0;
    for i in 0..9 {
        let all = ca.iter().chain(&cb).map(|c| c[i]);
        let lo = all.clone().fold(f64::INFINITY, f64::min);
        let hi = all.fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            continue;
        }
        let hist = |cs: &[Vec<f64>]| -> Vec<f64> {
            let mut counts = vec![0.0f64; bins];
            for c in cs {
                let mut k = ((c[i] - lo) / (hi - lo) * bins as f64).floor() as i64;
                k = k.clamp(0, bins as i64 - 1);
                counts[k as usize] += 1.0;
            }
            let n = cs.len() as f64;
            let z: f64 = counts.iter().map(|c| c / n + eps).sum();
            counts.iter().map(|c| (c / n + eps) / z).collect()
        };
        let p = hist(&ca);
        let q = hist(&cb);
        let mut kl = 0.0;
        for x in 0..bins {
            kl += p[x] * (p[x] / q[x]).ln() + q[x] * (q[x] / p[x]).ln();
        }
        d += basis.explained_variance_ratios[i] * kl;
    }
    d
}

fn raw() -> DivergenceConfig {
    DivergenceConfig {
        mode: ScalingMode::Raw,
        ..DivergenceConfig::default()
    }
}

#[test]
fn shift_matches_straight_line_oracle_and_grows_with_separation() {
    let a = gaussian_filters(5_000, [0.0; 9], [1.0; 9], 10);
    let basis = PcaBasis::fit(&set_of("a", &a)).unwrap();
    let mut last = 0.0;
    for (k, mu) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let mut means = [0.0; 9];
        means[0] = mu;
        let b = gaussian_filters(5_000, means, [1.0; 9], 20 + k as u64);
        let d = shift(&set_of("a", &a), &set_of("b", &b), &basis, &raw()).unwrap();
        let want = oracle_shift(&a, &b, &basis, 70, 1e-8);
        assert!((d - want).abs() <= 1e-9, "mu={mu}: {d} vs oracle {want}");
        assert!(d > last, "D not increasing at mu={mu}: {d} <= {last}");
        last = d;
    }
}

#[test]
fn identical_sets_and_argument_order() {
    let a = set_of("a", &gaussian_filters(2_000, [0.0; 9], [1.0; 9], 30));
    let b = set_of("b", &gaussian_filters(2_000, [0.3; 9], [1.2; 9], 31));
    let basis = PcaBasis::fit(&a).unwrap();
    assert_eq!(shift(&a, &a, &basis, &raw()).unwrap(), 0.0);
    assert_eq!(shift(&a, &b, &basis, &raw()).unwrap(), shift(&b, &a, &basis, &raw()).unwrap());
}

#[test]
fn single_component_weighting_isolates_that_component() {
    let a = set_of("a", &gaussian_filters(3_000, [0.0; 9], [1.0; 9], 40));
    let b = set_of("b", &gaussian_filters(3_000, [0.5; 9], [1.0; 9], 41));
    let mut basis = PcaBasis::fit(&a).unwrap();
    basis.explained_variance_ratios = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let s = shift_breakdown(&a, &b, &basis, &raw()).unwrap();
    assert_eq!(s.total, s.per_component[0].unwrap());

    let uniform = DivergenceConfig {
        weighting: Weighting::Uniform,
        ..raw()
    };
    let u = shift_breakdown(&a, &b, &basis, &uniform).unwrap();
    let mean: f64 = u.per_component.iter().map(|d| d.unwrap()).sum::<f64>() / 9.0;
    assert!((u.total - mean).abs() < 1e-12);
}

#[test]
fn histograms_share_range_and_count_every_sample() {
    let a = set_of("a", &gaussian_filters(1_234, [0.0; 9], [1.0; 9], 50));
    let b = set_of("b", &gaussian_filters(777, [2.0; 9], [0.5; 9], 51));
    let basis = PcaBasis::fit(&a).unwrap();
    let (ca, cb) = (transform_set(&a, &basis), transform_set(&b, &basis));
    for i in 0..9 {
        let hs = build_histograms(&[&ca, &cb], i, &DivergenceConfig::default()).unwrap();
        let lo = ca.column(i).chain(cb.column(i)).fold(f64::INFINITY, f64::min);
        let hi = ca.column(i).chain(cb.column(i)).fold(f64::NEG_INFINITY, f64::max);
        for h in &hs {
            assert_eq!(h.bin_count(), 70);
            assert_eq!((h.lo, h.hi), (lo, hi));
            let total: f64 = h.probabilities.iter().sum();
            assert!((total - 1.0).abs() <= 1e-12);
            let floor = 1e-8 / (1.0 + 70.0 * 1e-8);
            assert!(h.probabilities.iter().all(|&p| p >= floor * (1.0 - 1e-12)));
        }
        assert_eq!(hs[0].sample_count(), 1_234);
        assert_eq!(hs[1].sample_count(), 777);
        // counting oracle
        for (h, c) in hs.iter().zip([&ca, &cb]) {
            let mut want = vec![0u64; 70];
            for x in c.column(i) {
                let k = (70.0 * (x - lo) / (hi - lo)).floor().clamp(0.0, 69.0) as usize;
                want[k] += 1;
            }
            assert_eq!(h.counts, want);
        }
    }
}

fn permuted(set: &FilterSet, seed: u64) -> FilterSet {
    use rand::seq::SliceRandom;
    let mut records = set.records.clone();
    records.shuffle(&mut rng(seed));
    FilterSet {
        records,
        source_query: set.source_query.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shift_is_symmetric_nonnegative_and_order_free(seed in any::<u64>(), shift_mu in 0.0f64..3.0) {
        let a = set_of("a", &gaussian_filters(400, [0.0; 9], [1.0; 9], seed));
        let b = set_of("b", &gaussian_filters(300, [shift_mu; 9], [1.0; 9], seed ^ 0xabcdef));
        let basis = PcaBasis::fit(&a).unwrap();
        let ab = shift(&a, &b, &basis, &raw()).unwrap();
        prop_assert!(ab >= 0.0 && ab.is_finite());
        prop_assert_eq!(ab, shift(&b, &a, &basis, &raw()).unwrap());
        let pa = permuted(&a, seed.wrapping_add(1));
        let pb = permuted(&b, seed.wrapping_add(2));
        prop_assert_eq!(ab, shift(&pa, &pb, &basis, &raw()).unwrap());
    }

    #[test]
    fn zero_shift_only_for_coinciding_histograms(seed in any::<u64>()) {
        let a = set_of("a", &gaussian_filters(200, [0.0; 9], [1.0; 9], seed));
        let basis = PcaBasis::fit(&a).unwrap();
        prop_assert_eq!(shift(&a, &permuted(&a, seed), &basis, &raw()).unwrap(), 0.0);
    }
}
