//! Plain-text filter format: one filter per row, metadata in a JSON side-car.
//!
//! ```text
//! model_id,layer_index,filter_ordinal,w0,w1,w2,w3,w4,w5,w6,w7,w8
//! resnet18,0,0,0.125,-0.5,...
//! ```

use std::fmt::Write as _;

use filterscope_core::{FilterRecord, FilterSet, LayerRecord, ModelMeta, KERNEL_LEN};
use serde::Deserialize;

use crate::fpack::{check_metadata, FpackError, FpackModel, ModelMetadata};

pub const HEADER: [&str; 12] = [
    "model_id",
    "layer_index",
    "filter_ordinal",
    "w0",
    "w1",
    "w2",
    "w3",
    "w4",
    "w5",
    "w6",
    "w7",
    "w8",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CsvError {
    #[error("header must be `{expected}`, got `{0}`", expected = HEADER.join(","))]
    HeaderMismatch(String),
    #[error("line {line}: expected 12 fields, got {got}")]
    FieldCount { line: u64, got: usize },
    #[error("line {line}: `{value}` is not a number")]
    NonNumeric { line: u64, value: String },
    #[error("line {line}: non-finite weight")]
    NonFiniteWeight { line: u64 },
    #[error("line {line}: filter of model `{found}` in file for `{expected}`")]
    ModelMismatch { line: u64, found: String, expected: String },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Metadata(#[from] FpackError),
}

/// Side-car metadata: either the full `{"model": …, "layers": […]}` block or a
/// bare model object.
#[derive(Deserialize)]
#[serde(untagged)]
enum SideCar {
    Full(ModelMetadata),
    Bare(ModelMeta),
}

pub fn parse_metadata_json(json: &str) -> Result<ModelMetadata, FpackError> {
    let side: SideCar = serde_json::from_str(json).map_err(|e| FpackError::MetadataInvalid(e.to_string()))?;
    let md = match side {
        SideCar::Full(md) => md,
        SideCar::Bare(model) => ModelMetadata { model, layers: Vec::new() },
    };
    let mut layers = md.layers.clone();
    layers.sort_by_key(|l| l.layer_index);
    check_metadata(&md.model, &layers)?;
    Ok(ModelMetadata { model: md.model, layers })
}

/// Parses filter rows; `metadata_json` supplies the model metadata.
pub fn parse_csv(text: &str, metadata_json: &str) -> Result<FpackModel, CsvError> {
    let metadata = parse_metadata_json(metadata_json)?;
    let expected = metadata.model.model_id.clone();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(h) => h.map_err(|e| CsvError::Malformed(e.to_string()))?,
        None => return Err(CsvError::HeaderMismatch(String::new())),
    };
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(CsvError::HeaderMismatch(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| CsvError::Malformed(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != HEADER.len() {
            return Err(CsvError::FieldCount { line, got: row.len() });
        }
        if row[0] != *expected.as_str() {
            return Err(CsvError::ModelMismatch {
                line,
                found: row[0].to_string(),
                expected: expected.to_string(),
            });
        }
        let int = |s: &str| {
            s.parse::<u32>().map_err(|_| CsvError::NonNumeric {
                line,
                value: s.to_string(),
            })
        };
        let layer_index = int(&row[1])?;
        let filter_ordinal = int(&row[2])?;
        let mut weights = [0.0f32; KERNEL_LEN];
        for (k, w) in weights.iter_mut().enumerate() {
            let field = &row[3 + k];
            *w = field.parse::<f32>().map_err(|_| CsvError::NonNumeric {
                line,
                value: field.to_string(),
            })?;
            if !w.is_finite() {
                return Err(CsvError::NonFiniteWeight { line });
            }
        }
        records.push(FilterRecord::new(expected.clone(), layer_index, filter_ordinal, weights));
    }

    let filters = FilterSet::new(records, format!("model_id={expected}"));
    Ok(FpackModel {
        meta: metadata.model,
        layers: metadata.layers,
        filters,
    })
}

/// Writes filters in canonical order. Weights use the shortest decimal form
/// that parses back to the same `f32`.
pub fn write_csv(filters: &FilterSet) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    let mut records: Vec<&FilterRecord> = filters.records.iter().collect();
    records.sort_by(|a, b| a.key().cmp(&b.key()));
    for r in records {
        let _ = write!(out, "{},{},{}", r.model_id, r.layer_index, r.filter_ordinal);
        for w in r.weights {
            let _ = write!(out, ",{w}");
        }
        out.push('\n');
    }
    out
}

/// Layer records for a CSV import: the side-car's if given, else derived.
pub fn layers_or_derived(model: &FpackModel) -> Vec<LayerRecord> {
    if !model.layers.is_empty() {
        return model.layers.clone();
    }
    let refs: Vec<&FilterRecord> = model.filters.records.iter().collect();
    crate::fpack::derive_layers(&model.meta, &refs)
}
