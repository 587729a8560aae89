//! Grouped analyses over a catalog: shift matrices and their pairwise
//! distributions, per-decile scale statistics and phenotype classification.

mod phenotype;
mod scales;
mod shift_matrix;

pub use phenotype::{classify_phenotype, ComponentDiagnostics, Phenotype, PhenotypeClass, PhenotypeThresholds};
pub use scales::{mean_scale_per_decile, DecileScaleStats};
pub use shift_matrix::{
    fit_global_basis, pairwise_shift_distribution, shift_matrix, shift_matrix_from_groups, AnalysisOptions,
    OmittedGroup, PairShift, ShiftMatrix, ShiftSummary,
};

use crate::{Error, Result};

pub const DECILES: usize = 10;

/// Tenth of the conv-layer stack that layer `layer_index` falls in:
/// `min(9, floor(10·k/L))`.
pub fn depth_decile(layer_index: u32, conv_layer_count: u32) -> Result<u8> {
    if layer_index >= conv_layer_count {
        return Err(Error::IndexOutOfRange {
            layer_index,
            conv_layer_count,
        });
    }
    let d = (10 * u64::from(layer_index)) / u64::from(conv_layer_count);
    Ok(d.min(9) as u8)
}
