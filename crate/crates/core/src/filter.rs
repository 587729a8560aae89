use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of weights in a flattened 3×3 kernel.
pub const KERNEL_LEN: usize = 9;

/// Row-major 3×3 kernel weights.
pub type Weights = [f32; KERNEL_LEN];

/// Opaque model identifier. Cheap to clone; every filter of a model shares it.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelId(Arc<str>);

impl ModelId {
    pub fn new(id: &str) -> Self {
        ModelId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModelId {
    fn from(id: &str) -> Self {
        ModelId::new(id)
    }
}

impl From<String> for ModelId {
    fn from(id: String) -> Self {
        ModelId(Arc::from(id))
    }
}

impl Serialize for ModelId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer).map(ModelId::from)
    }
}

/// One 3×3 kernel with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRecord {
    pub weights: Weights,
    pub model_id: ModelId,
    /// 0-based ordinal among the model's conv layers.
    pub layer_index: u32,
    /// 0-based index within the layer.
    pub filter_ordinal: u32,
}

impl FilterRecord {
    pub fn new(model_id: ModelId, layer_index: u32, filter_ordinal: u32, weights: Weights) -> Self {
        FilterRecord {
            weights,
            model_id,
            layer_index,
            filter_ordinal,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Sort key used for every deterministic ordering of filters.
    pub fn key(&self) -> (&ModelId, u32, u32) {
        (&self.model_id, self.layer_index, self.filter_ordinal)
    }

    pub fn weights_f64(&self) -> [f64; KERNEL_LEN] {
        self.weights.map(f64::from)
    }
}

/// An ordered collection of filters plus a description of where it came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterSet {
    pub records: Vec<FilterRecord>,
    pub source_query: String,
}

impl FilterSet {
    /// Builds a set and puts the records into canonical
    /// `(model_id, layer_index, filter_ordinal)` order.
    pub fn new(mut records: Vec<FilterRecord>, source_query: impl Into<String>) -> Self {
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        FilterSet {
            records,
            source_query: source_query.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, FilterRecord> {
        self.records.iter()
    }

    pub fn is_canonically_ordered(&self) -> bool {
        self.records.windows(2).all(|w| w[0].key() <= w[1].key())
    }

    /// Concatenates several sets, re-sorting into canonical order.
    pub fn union<'a, I>(sets: I, source_query: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = &'a FilterSet>,
    {
        let records = sets.into_iter().flat_map(|s| s.records.iter().cloned()).collect();
        FilterSet::new(records, source_query)
    }
}

impl<'a> IntoIterator for &'a FilterSet {
    type Item = &'a FilterRecord;
    type IntoIter = core::slice::Iter<'a, FilterRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}
