use alloc::string::ToString;

use serde::{Deserialize, Serialize};

use super::{depth_decile, DECILES};
use crate::catalog::Catalog;
use crate::preprocess::filter_scale;
use crate::{Error, ModelId, Result};

/// Mean filter range (max − min weight) per depth decile of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileScaleStats {
    pub model_id: ModelId,
    /// `None` where the model has no layer in that decile.
    pub means: [Option<f64>; DECILES],
    pub counts: [u64; DECILES],
}

/// Per-decile mean of `filter_scale` over the model's raw weights.
pub fn mean_scale_per_decile(model_id: &ModelId, catalog: &Catalog) -> Result<DecileScaleStats> {
    let entry = catalog
        .model(model_id)
        .ok_or_else(|| Error::UnknownModel(model_id.to_string()))?;
    let mut sums = [0.0f64; DECILES];
    let mut counts = [0u64; DECILES];
    for f in &entry.filters {
        let d = usize::from(depth_decile(f.layer_index, entry.meta.conv_layer_count)?);
        sums[d] += filter_scale(&f.weights);
        counts[d] += 1;
    }
    let means = core::array::from_fn(|d| (counts[d] > 0).then(|| sums[d] / counts[d] as f64));
    Ok(DecileScaleStats {
        model_id: model_id.clone(),
        means,
        counts,
    })
}
