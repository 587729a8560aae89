#![allow(dead_code)]

use filterscope_core::{FilterRecord, FilterSet, ModelId, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_filters(n: usize, seed: u64) -> Vec<Weights> {
    let mut rng = rng(seed);
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0f32..1.0))).collect()
}

/// Filters with independent normal coordinates, coordinate k having the
/// given standard deviation and mean.
pub fn gaussian_filters(n: usize, means: [f64; 9], stds: [f64; 9], seed: u64) -> Vec<Weights> {
    let mut rng = rng(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| std::array::from_fn(|k| (means[k] + stds[k] * std_normal.sample(&mut rng)) as f32))
        .collect()
}

pub fn set_of(model: &str, weights: &[Weights]) -> FilterSet {
    let id = ModelId::new(model);
    let records = weights
        .iter()
        .enumerate()
        .map(|(k, w)| FilterRecord::new(id.clone(), 0, k as u32, *w))
        .collect();
    FilterSet::new(records, model)
}

/// Two-pass sample covariance, straight from the definition.
pub fn brute_force_covariance(weights: &[Weights]) -> nalgebra::SMatrix<f64, 9, 9> {
    let n = weights.len() as f64;
    let mut mean = [0.0f64; 9];
    for w in weights {
        for k in 0..9 {
            mean[k] += f64::from(w[k]);
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for w in weights {
        for p in 0..9 {
            for q in 0..9 {
                cov[(p, q)] += (f64::from(w[p]) - mean[p]) * (f64::from(w[q]) - mean[q]);
            }
        }
    }
    cov / (n - 1.0)
}

/// Eigenvalue ratios (descending) and unit eigenvectors from nalgebra.
pub fn oracle_eigen(weights: &[Weights]) -> (Vec<f64>, Vec<[f64; 9]>) {
    let cov = brute_force_covariance(weights);
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, [f64; 9])> = (0..9)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            (eig.eigenvalues[k].max(0.0), std::array::from_fn(|r| v[r]))
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = pairs.iter().map(|p| p.0).sum();
    (pairs.iter().map(|p| p.0 / total).collect(), pairs.iter().map(|p| p.1).collect())
}
