//! In-memory catalog of models and their filters.
//!
//! Persistence lives in the `filterscope` crate; this is the queryable state
//! it loads into.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::analytics::depth_decile;
use crate::{Error, FilterRecord, FilterSet, LayerRecord, ModelId, ModelMeta, Result};

/// Meta-axis along which filters are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupAxis {
    Task,
    DataType,
    /// Combination of training sets, e.g. `imagenet1k+coco`.
    TrainingSet,
    ArchitectureFamily,
    ModelId,
    /// Depth decile of the layer relative to the model's conv-layer count.
    DepthDecile,
    /// Absolute conv-layer index.
    ConvDepth,
}

impl GroupAxis {
    pub const ALL: [GroupAxis; 7] = [
        GroupAxis::Task,
        GroupAxis::DataType,
        GroupAxis::TrainingSet,
        GroupAxis::ArchitectureFamily,
        GroupAxis::ModelId,
        GroupAxis::DepthDecile,
        GroupAxis::ConvDepth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupAxis::Task => "task",
            GroupAxis::DataType => "data_type",
            GroupAxis::TrainingSet => "training_set",
            GroupAxis::ArchitectureFamily => "architecture_family",
            GroupAxis::ModelId => "model_id",
            GroupAxis::DepthDecile => "depth_decile",
            GroupAxis::ConvDepth => "conv_depth",
        }
    }

    /// Axes whose label depends only on the model, not on the layer.
    pub fn is_model_level(self) -> bool {
        !matches!(self, GroupAxis::DepthDecile | GroupAxis::ConvDepth)
    }

    fn label(self, meta: &ModelMeta, layer_index: u32) -> String {
        match self {
            GroupAxis::Task => meta.task.clone(),
            GroupAxis::DataType => meta.data_type.clone(),
            GroupAxis::TrainingSet => meta.training_set_label(),
            GroupAxis::ArchitectureFamily => meta.architecture_family.clone(),
            GroupAxis::ModelId => meta.model_id.to_string(),
            // layer_index < conv_layer_count is a registration invariant
            GroupAxis::DepthDecile => depth_decile(layer_index, meta.conv_layer_count)
                .map(|d| d.to_string())
                .unwrap_or_default(),
            GroupAxis::ConvDepth => format!("{layer_index:04}"),
        }
    }
}

impl fmt::Display for GroupAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axis = match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "task" => GroupAxis::Task,
            "data_type" | "datatype" => GroupAxis::DataType,
            "training_set" | "training_sets" | "dataset" => GroupAxis::TrainingSet,
            "architecture_family" | "architecture" | "model_family" | "family" => {
                GroupAxis::ArchitectureFamily
            }
            "model_id" | "model" => GroupAxis::ModelId,
            "depth_decile" | "decile" => GroupAxis::DepthDecile,
            "conv_depth" | "layer_index" | "depth" => GroupAxis::ConvDepth,
            other => return Err(Error::InvalidConfig(format!("unknown group axis `{other}`"))),
        };
        Ok(axis)
    }
}

/// Predicate over model metadata and layer depth.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    All,
    /// The filter's label on `axis` equals `value`.
    Label { axis: GroupAxis, value: String },
    /// The model lists this set among its training sets.
    UsesTrainingSet(String),
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Predicate {
    pub fn label(axis: GroupAxis, value: impl Into<String>) -> Self {
        Predicate::Label {
            axis,
            value: value.into(),
        }
    }

    fn matches(&self, meta: &ModelMeta, layer_index: u32) -> bool {
        match self {
            Predicate::All => true,
            Predicate::Label { axis, value } => axis.label(meta, layer_index) == *value,
            Predicate::UsesTrainingSet(set) => meta.training_sets.iter().any(|s| s == set),
            Predicate::Not(p) => !p.matches(meta, layer_index),
            Predicate::And(ps) => ps.iter().all(|p| p.matches(meta, layer_index)),
            Predicate::Or(ps) => ps.iter().any(|p| p.matches(meta, layer_index)),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::All => f.write_str("all"),
            Predicate::Label { axis, value } => write!(f, "{axis}={value}"),
            Predicate::UsesTrainingSet(set) => write!(f, "training_set~{set}"),
            Predicate::Not(p) => write!(f, "!({p})"),
            Predicate::And(ps) | Predicate::Or(ps) => {
                let sep = if matches!(self, Predicate::And(_)) { " & " } else { " | " };
                f.write_str("(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// One registered model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub meta: ModelMeta,
    /// Sorted by layer index.
    pub layers: Vec<LayerRecord>,
    /// Canonically ordered.
    pub filters: Vec<FilterRecord>,
}

/// Counts for one group of a [`Catalog::stats`] table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStats {
    pub label: String,
    pub model_count: u64,
    pub layer_count: u64,
    pub filter_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    models: BTreeMap<ModelId, ModelEntry>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn layer_count(&self) -> usize {
        self.models.values().map(|m| m.layers.len()).sum()
    }

    pub fn filter_count(&self) -> usize {
        self.models.values().map(|m| m.filters.len()).sum()
    }

    pub fn models(&self) -> impl Iterator<Item = &ModelEntry> {
        self.models.values()
    }

    pub fn model(&self, id: &ModelId) -> Option<&ModelEntry> {
        self.models.get(id)
    }

    pub fn contains(&self, id: &ModelId) -> bool {
        self.models.contains_key(id)
    }

    /// Validates and adds a model. When `layers` is empty the layer records
    /// are derived from the filters.
    pub fn register(&mut self, meta: ModelMeta, layers: Vec<LayerRecord>, filters: FilterSet) -> Result<ModelId> {
        if self.models.contains_key(&meta.model_id) {
            return Err(Error::DuplicateModel(meta.model_id.to_string()));
        }
        let entry = validate_entry(meta, layers, filters)?;
        let id = entry.meta.model_id.clone();
        self.models.insert(id.clone(), entry);
        Ok(id)
    }

    /// All filters whose model metadata (and layer depth) satisfy `predicate`.
    pub fn query(&self, predicate: &Predicate) -> Result<FilterSet> {
        if self.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        // BTreeMap iteration + per-model canonical order is already the global order
        let records: Vec<FilterRecord> = self
            .models
            .values()
            .flat_map(|entry| {
                entry
                    .filters
                    .iter()
                    .filter(move |f| predicate.matches(&entry.meta, f.layer_index))
                    .cloned()
            })
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyResult(predicate.to_string()));
        }
        Ok(FilterSet {
            records,
            source_query: predicate.to_string(),
        })
    }

    /// Partitions every filter by its label on `axis`.
    pub fn group_by(&self, axis: GroupAxis) -> BTreeMap<String, FilterSet> {
        let mut groups: BTreeMap<String, Vec<FilterRecord>> = BTreeMap::new();
        for entry in self.models.values() {
            for f in &entry.filters {
                groups
                    .entry(axis.label(&entry.meta, f.layer_index))
                    .or_default()
                    .push(f.clone());
            }
        }
        groups
            .into_iter()
            .map(|(label, records)| {
                let source_query = format!("{axis}={label}");
                (label, FilterSet { records, source_query })
            })
            .collect()
    }

    /// Every label present on `axis`, sorted.
    pub fn labels(&self, axis: GroupAxis) -> Vec<String> {
        let mut labels = BTreeSet::new();
        for entry in self.models.values() {
            for layer in &entry.layers {
                labels.insert(axis.label(&entry.meta, layer.layer_index));
            }
        }
        labels.into_iter().collect()
    }

    /// Model, layer and filter counts per label on `axis`.
    ///
    /// Layer and filter counts always partition the catalog. Model counts do
    /// too on model-level axes; on depth axes a model is counted once in every
    /// group it has layers in.
    pub fn stats(&self, axis: GroupAxis) -> Vec<GroupStats> {
        struct Acc<'a> {
            models: BTreeSet<&'a ModelId>,
            layers: u64,
            filters: u64,
        }
        let mut groups: BTreeMap<String, Acc<'_>> = BTreeMap::new();
        for entry in self.models.values() {
            for layer in &entry.layers {
                let acc = groups
                    .entry(axis.label(&entry.meta, layer.layer_index))
                    .or_insert_with(|| Acc {
                        models: BTreeSet::new(),
                        layers: 0,
                        filters: 0,
                    });
                acc.models.insert(&entry.meta.model_id);
                acc.layers += 1;
                acc.filters += layer.filter_count;
            }
        }
        groups
            .into_iter()
            .map(|(label, acc)| GroupStats {
                label,
                model_count: acc.models.len() as u64,
                layer_count: acc.layers,
                filter_count: acc.filters,
            })
            .collect()
    }
}

fn validate_entry(meta: ModelMeta, mut layers: Vec<LayerRecord>, filters: FilterSet) -> Result<ModelEntry> {
    meta.validate()?;
    let id = &meta.model_id;
    let mut records = filters.records;
    for f in &records {
        if f.model_id != *id {
            return Err(Error::InvariantViolation(format!(
                "filter of model `{}` registered under `{id}`",
                f.model_id
            )));
        }
        if !f.is_finite() {
            return Err(Error::InvariantViolation(format!(
                "non-finite weight in `{id}` layer {} filter {}",
                f.layer_index, f.filter_ordinal
            )));
        }
        if f.layer_index >= meta.conv_layer_count {
            return Err(Error::InvariantViolation(format!(
                "`{id}` filter in layer {} but model has {} conv layers",
                f.layer_index, meta.conv_layer_count
            )));
        }
    }
    records.sort_by(|a, b| a.key().cmp(&b.key()));
    if let Some(w) = records.windows(2).find(|w| w[0].key() == w[1].key()) {
        return Err(Error::InvariantViolation(format!(
            "duplicate filter `{id}` layer {} ordinal {}",
            w[0].layer_index, w[0].filter_ordinal
        )));
    }

    let mut per_layer: BTreeMap<u32, u64> = BTreeMap::new();
    for f in &records {
        *per_layer.entry(f.layer_index).or_default() += 1;
    }

    if layers.is_empty() {
        layers = per_layer
            .iter()
            .map(|(&layer_index, &filter_count)| LayerRecord {
                model_id: id.clone(),
                layer_index,
                in_channels: None,
                out_channels: None,
                filter_count,
            })
            .collect();
    } else {
        layers.sort_by_key(|l| l.layer_index);
        for l in &layers {
            l.validate()?;
            if l.model_id != *id {
                return Err(Error::InvariantViolation(format!(
                    "layer record of `{}` registered under `{id}`",
                    l.model_id
                )));
            }
            if l.layer_index >= meta.conv_layer_count {
                return Err(Error::InvariantViolation(format!(
                    "`{id}` layer {} >= conv_layer_count {}",
                    l.layer_index, meta.conv_layer_count
                )));
            }
        }
        if let Some(w) = layers.windows(2).find(|w| w[0].layer_index == w[1].layer_index) {
            return Err(Error::InvariantViolation(format!(
                "duplicate layer record `{id}` layer {}",
                w[0].layer_index
            )));
        }
        let declared: BTreeMap<u32, u64> = layers.iter().map(|l| (l.layer_index, l.filter_count)).collect();
        if declared != per_layer {
            return Err(Error::InvariantViolation(format!(
                "`{id}`: layer filter counts do not match the supplied filters"
            )));
        }
    }

    Ok(ModelEntry {
        meta,
        layers,
        filters: records,
    })
}
