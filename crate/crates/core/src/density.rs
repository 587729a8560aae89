//! Gaussian kernel density estimates for exporting coefficient distributions.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::stats::Moments;
use crate::{Error, Result};

pub const DEFAULT_KDE_POINTS: usize = 256;

/// The evaluation grid extends this many bandwidths past the data range.
const GRID_CUT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Scott's rule: n^(−1/5) · sample standard deviation.
pub fn scott_bandwidth(values: &[f64]) -> f64 {
    let m = Moments::of(values.iter().copied());
    libm::pow(values.len() as f64, -0.2) * m.sample_std()
}

/// Gaussian KDE of `values` evaluated on `points` evenly spaced grid points.
///
/// `component` only labels the error for constant input.
pub fn gaussian_kde(values: &[f64], points: usize, component: usize) -> Result<KdeCurve> {
    if values.is_empty() {
        return Err(Error::EmptyInput("KDE of an empty sample"));
    }
    if points < 2 {
        return Err(Error::InvalidConfig(alloc::format!("KDE needs at least 2 points, got {points}")));
    }
    let h = scott_bandwidth(values);
    if !(h > 0.0) {
        return Err(Error::DegenerateRange { component });
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let start = lo - GRID_CUT * h;
    let step = (hi - lo + 2.0 * GRID_CUT * h) / (points - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * libm::sqrt(2.0 * core::f64::consts::PI));
    let grid: Vec<f64> = (0..points).map(|k| start + k as f64 * step).collect();
    let density = grid
        .iter()
        .map(|&g| {
            let s: f64 = values
                .iter()
                .map(|&x| {
                    let z = (g - x) / h;
                    libm::exp(-0.5 * z * z)
                })
                .sum();
            s * norm
        })
        .collect();
    Ok(KdeCurve {
        bandwidth: h,
        grid,
        density,
    })
}
