//! Model and layer metadata.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, ModelId, Result};

/// Identity and meta-axes of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: ModelId,
    pub name: String,
    pub task: String,
    pub data_type: String,
    #[serde(default)]
    pub training_sets: Vec<String>,
    pub architecture_family: String,
    pub conv_layer_count: u32,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
}

fn default_precision() -> u32 {
    32
}

impl ModelMeta {
    pub fn validate(&self) -> Result<()> {
        if self.model_id.as_str().is_empty() {
            return Err(Error::InvariantViolation("model_id is empty".into()));
        }
        if self.task.trim().is_empty() {
            return Err(Error::InvariantViolation(format!("model `{}` has an empty task", self.model_id)));
        }
        if self.data_type.trim().is_empty() {
            return Err(Error::InvariantViolation(format!(
                "model `{}` has an empty data_type",
                self.model_id
            )));
        }
        if self.conv_layer_count == 0 {
            return Err(Error::InvariantViolation(format!(
                "model `{}` has conv_layer_count 0",
                self.model_id
            )));
        }
        Ok(())
    }

    /// Label for the training-set axis: the sorted combination of sets joined
    /// with `+`, so every model lands in exactly one group.
    pub fn training_set_label(&self) -> String {
        if self.training_sets.is_empty() {
            return String::from("unknown");
        }
        let mut sets: Vec<&str> = self.training_sets.iter().map(String::as_str).collect();
        sets.sort_unstable();
        sets.dedup();
        sets.join("+")
    }
}

/// Bookkeeping for one accepted conv layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub model_id: ModelId,
    pub layer_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_channels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<u32>,
    pub filter_count: u64,
}

impl LayerRecord {
    pub fn validate(&self) -> Result<()> {
        if self.filter_count == 0 {
            return Err(Error::InvariantViolation(format!(
                "layer {} of `{}` has no filters",
                self.layer_index, self.model_id
            )));
        }
        for (name, channels) in [("in_channels", self.in_channels), ("out_channels", self.out_channels)] {
            if channels == Some(0) {
                return Err(Error::InvariantViolation(format!(
                    "layer {} of `{}` has {name} = 0",
                    self.layer_index, self.model_id
                )));
            }
        }
        if let (Some(i), Some(o)) = (self.in_channels, self.out_channels) {
            if u64::from(i) * u64::from(o) != self.filter_count {
                return Err(Error::InvariantViolation(format!(
                    "layer {} of `{}`: filter_count {} != {i} x {o}",
                    self.layer_index, self.model_id, self.filter_count
                )));
            }
        }
        Ok(())
    }
}
