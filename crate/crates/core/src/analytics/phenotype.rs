//! Heuristic classification of coefficient distributions into the three
//! observed phenotypes: gaussian-like ("sun"), discrete stages ("spikes") and
//! multi-modal / sparse / otherwise non-normal ("symbols").

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::divergence::histogram_counts;
use crate::pca::CoefficientSet;
use crate::stats::Moments;
use crate::{Error, Result, KERNEL_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhenotypeClass {
    /// All components gaussian-like.
    GaussianLike,
    /// Some component takes on a small number of discrete values.
    DiscreteStages,
    /// Some component is multi-modal, skewed or concentrated at zero.
    NonNormal,
}

impl PhenotypeClass {
    pub fn name(self) -> &'static str {
        match self {
            PhenotypeClass::GaussianLike => "gaussian_like",
            PhenotypeClass::DiscreteStages => "discrete_stages",
            PhenotypeClass::NonNormal => "non_normal",
        }
    }

    pub fn nickname(self) -> &'static str {
        match self {
            PhenotypeClass::GaussianLike => "sun",
            PhenotypeClass::DiscreteStages => "spikes",
            PhenotypeClass::NonNormal => "symbols",
        }
    }
}

impl fmt::Display for PhenotypeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.nickname())
    }
}

/// Cutoffs for [`classify_phenotype`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhenotypeThresholds {
    pub min_rows: usize,
    /// Values are rounded to this step before counting distinct values.
    pub rounding: f64,
    /// spikes: distinct ratio below this.
    pub distinct_ratio: f64,
    pub bins: usize,
    /// spikes: mass of the 5 fullest bins above this.
    pub top5_mass: f64,
    /// A mode must reach this fraction of the fullest bin.
    pub mode_min_height: f64,
    /// ...and rise this fraction of the fullest bin above the valley
    /// separating it from any higher bin.
    pub mode_min_prominence: f64,
    /// symbols: this many modes or more.
    pub modes: usize,
    /// symbols: |skewness| above this.
    pub skewness: f64,
    /// symbols: |excess kurtosis| above this, when set.
    pub excess_kurtosis: Option<f64>,
    /// Half-width of the band counted as zero.
    pub near_zero_band: f64,
    /// symbols: fraction inside the zero band above this.
    pub near_zero_fraction: f64,
}

impl Default for PhenotypeThresholds {
    fn default() -> Self {
        PhenotypeThresholds {
            min_rows: 1000,
            rounding: 1e-4,
            distinct_ratio: 0.01,
            bins: 70,
            top5_mass: 0.5,
            mode_min_height: 0.05,
            mode_min_prominence: 0.25,
            modes: 2,
            skewness: 1.0,
            excess_kurtosis: None,
            near_zero_band: 1e-3,
            near_zero_fraction: 0.5,
        }
    }
}

/// Diagnostics of one coefficient column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    pub component: usize,
    pub distinct_ratio: f64,
    pub top5_mass: f64,
    pub modes: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub near_zero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phenotype {
    pub class: PhenotypeClass,
    pub evidence: Vec<ComponentDiagnostics>,
    /// Which diagnostics decided the class, e.g. `c3 distinct_ratio=0.0003`.
    pub reasons: Vec<String>,
}

/// Runs of equal bins count once; a run is a mode when both neighbours are
/// lower (outside the histogram counts as 0) and it passes the height and
/// prominence cutoffs.
pub(crate) fn count_modes(counts: &[u64], min_height: f64, min_prominence: f64) -> usize {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return 0;
    }
    let max_f = max as f64;
    let n = counts.len();
    let at = |k: isize| -> u64 {
        if k < 0 || k as usize >= n {
            0
        } else {
            counts[k as usize]
        }
    };
    let mut modes = 0;
    let mut start = 0usize;
    while start < n {
        let h = counts[start];
        let mut end = start;
        while end + 1 < n && counts[end + 1] == h {
            end += 1;
        }
        let is_peak = at(start as isize - 1) < h && at(end as isize + 1) < h;
        if is_peak && h as f64 >= min_height * max_f {
            // walk outwards until a higher bin (or the edge), tracking the
            // valley; an equal bin to the left counts as higher so that
            // equal-height peaks do not both claim full prominence
            let mut left_min = h;
            let mut k = start as isize - 1;
            while k >= -1 {
                let v = at(k);
                if v >= h {
                    break;
                }
                left_min = left_min.min(v);
                k -= 1;
            }
            let mut right_min = h;
            let mut k = end as isize + 1;
            while k <= n as isize {
                let v = at(k);
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
                k += 1;
            }
            let prominence = (h - left_min.max(right_min)) as f64;
            if prominence >= min_prominence * max_f {
                modes += 1;
            }
        }
        start = end + 1;
    }
    modes
}

fn diagnose(column: &[f64], component: usize, t: &PhenotypeThresholds) -> ComponentDiagnostics {
    let n = column.len();
    let nf = n as f64;

    let mut rounded: Vec<i64> = column.iter().map(|&x| libm::round(x / t.rounding) as i64).collect();
    rounded.sort_unstable();
    rounded.dedup();
    let distinct_ratio = rounded.len() as f64 / nf;

    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (top5_mass, modes) = if lo < hi {
        let mut counts = histogram_counts(column.iter().copied(), lo, hi, t.bins);
        let modes = count_modes(&counts, t.mode_min_height, t.mode_min_prominence);
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let top: u64 = counts.iter().take(5).sum();
        (top as f64 / nf, modes)
    } else {
        (1.0, 1)
    };

    let m = Moments::of(column.iter().copied());
    let near_zero = column.iter().filter(|x| x.abs() <= t.near_zero_band).count();
    ComponentDiagnostics {
        component,
        distinct_ratio,
        top5_mass,
        modes,
        skewness: m.skewness(),
        excess_kurtosis: m.excess_kurtosis(),
        near_zero_fraction: near_zero as f64 / nf,
    }
}

/// Assigns exactly one phenotype; spikes take precedence over symbols, which
/// take precedence over sun.
pub fn classify_phenotype(coeffs: &CoefficientSet, thresholds: &PhenotypeThresholds) -> Result<Phenotype> {
    if coeffs.len() < thresholds.min_rows {
        return Err(Error::InsufficientData {
            required: thresholds.min_rows,
            got: coeffs.len(),
        });
    }
    if thresholds.bins < 5 || !(thresholds.rounding > 0.0) {
        return Err(Error::InvalidConfig("phenotype needs >= 5 bins and a positive rounding step".into()));
    }
    let evidence: Vec<ComponentDiagnostics> = (0..KERNEL_LEN)
        .map(|i| {
            let column: Vec<f64> = coeffs.column(i).collect();
            diagnose(&column, i, thresholds)
        })
        .collect();

    let mut spikes = Vec::new();
    let mut symbols = Vec::new();
    for d in &evidence {
        let c = d.component;
        if d.distinct_ratio < thresholds.distinct_ratio {
            spikes.push(format!("c{c} distinct_ratio={}", d.distinct_ratio));
        }
        if d.top5_mass > thresholds.top5_mass {
            spikes.push(format!("c{c} top5_mass={}", d.top5_mass));
        }
        if d.modes >= thresholds.modes {
            symbols.push(format!("c{c} modes={}", d.modes));
        }
        if d.skewness.abs() > thresholds.skewness {
            symbols.push(format!("c{c} skewness={}", d.skewness));
        }
        if let Some(k) = thresholds.excess_kurtosis {
            if d.excess_kurtosis.abs() > k {
                symbols.push(format!("c{c} excess_kurtosis={}", d.excess_kurtosis));
            }
        }
        if d.near_zero_fraction > thresholds.near_zero_fraction {
            symbols.push(format!("c{c} near_zero_fraction={}", d.near_zero_fraction));
        }
    }

    let (class, reasons) = if !spikes.is_empty() {
        (PhenotypeClass::DiscreteStages, spikes)
    } else if !symbols.is_empty() {
        (PhenotypeClass::NonNormal, symbols)
    } else {
        (PhenotypeClass::GaussianLike, Vec::new())
    };
    Ok(Phenotype {
        class,
        evidence,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mode_counting() {
        assert_eq!(count_modes(&[0, 5, 10, 5, 0], 0.05, 0.25), 1);
        assert_eq!(count_modes(&[0, 10, 1, 0, 9, 0], 0.05, 0.25), 2);
        // flat top counts once
        assert_eq!(count_modes(&[1, 10, 10, 1], 0.05, 0.25), 1);
        // a noise bump next to the main peak lacks prominence
        assert_eq!(count_modes(&[0, 90, 100, 95, 97, 60, 0], 0.05, 0.25), 1);
        // a tiny separate peak is below the height cutoff
        assert_eq!(count_modes(&[0, 100, 0, 0, 3, 0], 0.05, 0.25), 1);
        // edge peak
        assert_eq!(count_modes(&[10, 5, 1], 0.05, 0.25), 1);
        assert_eq!(count_modes(&[0, 0], 0.05, 0.25), 0);
        // twin noise peaks of equal height
        assert_eq!(count_modes(&[0, 456, 445, 456, 0], 0.05, 0.25), 1);
        assert_eq!(count_modes(&[0, 10, 0, 10, 0], 0.05, 0.25), 2);
    }

    #[test]
    fn too_few_rows() {
        let c = CoefficientSet::from_rows(vec![[0.0; 9]; 999], "b");
        assert_eq!(
            classify_phenotype(&c, &PhenotypeThresholds::default()),
            Err(Error::InsufficientData {
                required: 1000,
                got: 999
            })
        );
    }

    #[test]
    fn near_zero_fraction_is_measured() {
        // continuous values, but 60% of them inside the zero band
        let rows: Vec<[f64; 9]> = (0..2000)
            .map(|k| {
                let x = (k as f64 * 0.618_033_988_7).fract() - 0.5;
                let mut r: [f64; 9] = core::array::from_fn(|j| ((k * (j + 3)) as f64 * 0.754_877_666).fract() - 0.5);
                r[0] = if k % 5 < 3 { x * 1e-3 } else { x };
                r
            })
            .collect();
        let c = CoefficientSet::from_rows(rows, "b");
        let p = classify_phenotype(&c, &PhenotypeThresholds::default()).unwrap();
        assert!(p.evidence[0].near_zero_fraction > 0.5);
        assert_eq!(p.evidence.len(), 9);
    }
}
