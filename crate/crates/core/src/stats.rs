//! Descriptive statistics shared by the analytics and report code.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile of already sorted data (the common
/// "type 7" definition). `p` is clamped to [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Some(if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    })
}

/// Five-number summary with Tukey fences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(FiveNumber {
            min: *sorted.first()?,
            q1: quantile_sorted(&sorted, 0.25)?,
            median: quantile_sorted(&sorted, 0.5)?,
            q3: quantile_sorted(&sorted, 0.75)?,
            max: *sorted.last()?,
        })
    }

    /// Values outside `[q1 − 1.5·IQR, q3 + 1.5·IQR]` are outliers.
    pub fn is_outlier(&self, x: f64) -> bool {
        let iqr = self.q3 - self.q1;
        x < self.q1 - 1.5 * iqr || x > self.q3 + 1.5 * iqr
    }
}

/// Mean and central moments of order 2–4 (population normalization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn of<I>(values: I) -> Self
    where
        I: IntoIterator<Item = f64>,
        I::IntoIter: Clone,
    {
        let iter = values.into_iter();
        let (count, sum) = iter.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
        if count == 0 {
            return Moments {
                count,
                mean: 0.0,
                m2: 0.0,
                m3: 0.0,
                m4: 0.0,
            };
        }
        let mean = sum / count as f64;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in iter {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let n = count as f64;
        Moments {
            count,
            mean,
            m2: m2 / n,
            m3: m3 / n,
            m4: m4 / n,
        }
    }

    /// Sample standard deviation (1/(n−1)).
    pub fn sample_std(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        libm::sqrt(self.m2 * self.count as f64 / (self.count - 1) as f64)
    }

    /// g₁ = m₃ / m₂^{3/2}; zero for constant data.
    pub fn skewness(&self) -> f64 {
        if self.m2 > 0.0 {
            self.m3 / libm::pow(self.m2, 1.5)
        } else {
            0.0
        }
    }

    /// g₂ = m₄ / m₂² − 3; zero for constant data.
    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 > 0.0 {
            self.m4 / (self.m2 * self.m2) - 3.0
        } else {
            0.0
        }
    }
}

/// Trapezoid rule over a (not necessarily uniform) grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
