//! FPACK: binary interchange format for the filters of one model.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FPK1"
//! 4       4     u32 LE version (1)
//! 8       8     u64 LE filter count N
//! 16      4     u32 LE kernel_h (3)
//! 20      4     u32 LE kernel_w (3)
//! 24      4     u32 LE metadata length M
//! 28      M     UTF-8 JSON {"model": ModelMeta, "layers": [LayerRecord]}
//! 28+M    36·N  f32 LE weights, filters ordered by (layer_index, filter_ordinal),
//!               each filter row-major
//! ```
//!
//! The writer emits compact JSON with fields in declaration order; files in
//! that canonical form round-trip byte for byte.

use filterscope_core::{FilterRecord, FilterSet, LayerRecord, ModelMeta, KERNEL_LEN};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 4] = b"FPK1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
const FILTER_BYTES: usize = KERNEL_LEN * 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FpackError {
    #[error("bad magic {0:?}, expected \"FPK1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported FPACK version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported kernel size {0}x{1}, only 3x3 is stored")]
    UnsupportedKernel(u32, u32),
    #[error("truncated FPACK: {0}")]
    TruncatedPayload(String),
    #[error("header declares {declared} filters but {decoded} were found")]
    CountMismatch { declared: u64, decoded: u64 },
    #[error("non-finite weight in filter {filter}")]
    NonFiniteWeight { filter: u64 },
    #[error("invalid metadata: {0}")]
    MetadataInvalid(String),
}

/// Metadata block shared by FPACK files, CSV side-car files and the catalog
/// manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub model: ModelMeta,
    #[serde(default)]
    pub layers: Vec<LayerRecord>,
}

/// Decoded contents of one FPACK file.
#[derive(Debug, Clone, PartialEq)]
pub struct FpackModel {
    pub meta: ModelMeta,
    pub layers: Vec<LayerRecord>,
    pub filters: FilterSet,
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Checks metadata the way ingestion needs it: meta invariants, layers
/// belonging to the model in ascending order.
pub(crate) fn check_metadata(meta: &ModelMeta, layers: &[LayerRecord]) -> Result<(), FpackError> {
    meta.validate().map_err(|e| FpackError::MetadataInvalid(e.to_string()))?;
    for l in layers {
        l.validate().map_err(|e| FpackError::MetadataInvalid(e.to_string()))?;
        if l.model_id != meta.model_id {
            return Err(FpackError::MetadataInvalid(format!(
                "layer {} belongs to `{}`, not `{}`",
                l.layer_index, l.model_id, meta.model_id
            )));
        }
        if l.layer_index >= meta.conv_layer_count {
            return Err(FpackError::MetadataInvalid(format!(
                "layer {} >= conv_layer_count {}",
                l.layer_index, meta.conv_layer_count
            )));
        }
    }
    if layers.windows(2).any(|w| w[0].layer_index >= w[1].layer_index) {
        return Err(FpackError::MetadataInvalid("layers must be listed in ascending layer_index order".into()));
    }
    Ok(())
}

pub fn parse_fpack(bytes: &[u8]) -> Result<FpackModel, FpackError> {
    if bytes.len() < 4 {
        return Err(FpackError::TruncatedPayload(format!("{} bytes, no magic", bytes.len())));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(FpackError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FpackError::TruncatedPayload(format!("header needs {HEADER_LEN} bytes, got {}", bytes.len())));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(FpackError::UnsupportedVersion(version));
    }
    let declared = u64_at(bytes, 8);
    let (kh, kw) = (u32_at(bytes, 16), u32_at(bytes, 20));
    if (kh, kw) != (3, 3) {
        return Err(FpackError::UnsupportedKernel(kh, kw));
    }
    let meta_len = u32_at(bytes, 24) as usize;
    let meta_end = HEADER_LEN + meta_len;
    if bytes.len() < meta_end {
        return Err(FpackError::TruncatedPayload(format!(
            "metadata declares {meta_len} bytes, {} available",
            bytes.len() - HEADER_LEN
        )));
    }
    let metadata: ModelMetadata = serde_json::from_slice(&bytes[HEADER_LEN..meta_end])
        .map_err(|e| FpackError::MetadataInvalid(e.to_string()))?;
    check_metadata(&metadata.model, &metadata.layers)?;

    let payload = &bytes[meta_end..];
    let needed = declared.checked_mul(FILTER_BYTES as u64);
    match needed {
        Some(n) if (payload.len() as u64) < n => {
            return Err(FpackError::TruncatedPayload(format!(
                "{declared} filters need {n} payload bytes, got {}",
                payload.len()
            )))
        }
        None => return Err(FpackError::TruncatedPayload(format!("{declared} filters cannot fit in memory"))),
        Some(n) if payload.len() as u64 > n => {
            return Err(FpackError::CountMismatch {
                declared,
                decoded: payload.len().div_ceil(FILTER_BYTES) as u64,
            })
        }
        _ => {}
    }

    let layers = metadata.layers;
    let layer_total: u64 = layers.iter().map(|l| l.filter_count).sum();
    if layer_total != declared {
        return Err(FpackError::CountMismatch {
            declared,
            decoded: layer_total,
        });
    }

    let model_id = metadata.model.model_id.clone();
    let mut records = Vec::with_capacity(declared as usize);
    let mut chunks = payload.chunks_exact(FILTER_BYTES);
    for layer in &layers {
        for ordinal in 0..layer.filter_count {
            let chunk = chunks.next().expect("payload length checked above");
            let weights: [f32; KERNEL_LEN] =
                std::array::from_fn(|k| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()));
            if weights.iter().any(|w| !w.is_finite()) {
                return Err(FpackError::NonFiniteWeight {
                    filter: records.len() as u64,
                });
            }
            let ordinal = u32::try_from(ordinal)
                .map_err(|_| FpackError::MetadataInvalid(format!("layer {} is too large", layer.layer_index)))?;
            records.push(FilterRecord::new(model_id.clone(), layer.layer_index, ordinal, weights));
        }
    }

    Ok(FpackModel {
        filters: FilterSet {
            records,
            source_query: format!("model_id={model_id}"),
        },
        meta: metadata.model,
        layers,
    })
}

/// Encodes a model. `layers` may be empty, in which case layer records are
/// derived from the filters.
pub fn write_fpack(meta: &ModelMeta, layers: &[LayerRecord], filters: &FilterSet) -> Result<Vec<u8>, FpackError> {
    let mut records: Vec<&FilterRecord> = filters.records.iter().collect();
    records.sort_by_key(|r| (r.layer_index, r.filter_ordinal));

    let layers: Vec<LayerRecord> = if layers.is_empty() {
        derive_layers(meta, &records)
    } else {
        let mut l = layers.to_vec();
        l.sort_by_key(|l| l.layer_index);
        l
    };
    check_metadata(meta, &layers)?;

    // ordinals must be dense 0..filter_count per layer, matching the layer list
    let mut it = records.iter();
    for layer in &layers {
        for ordinal in 0..layer.filter_count {
            match it.next() {
                Some(r) if r.layer_index == layer.layer_index && u64::from(r.filter_ordinal) == ordinal => {}
                _ => {
                    return Err(FpackError::MetadataInvalid(format!(
                        "layer {} must hold filters 0..{} in order",
                        layer.layer_index, layer.filter_count
                    )))
                }
            }
        }
    }
    if it.next().is_some() {
        return Err(FpackError::CountMismatch {
            declared: layers.iter().map(|l| l.filter_count).sum(),
            decoded: records.len() as u64,
        });
    }
    if let Some(r) = records.iter().find(|r| r.model_id != meta.model_id) {
        return Err(FpackError::MetadataInvalid(format!("filter of `{}` in `{}`", r.model_id, meta.model_id)));
    }
    if let Some(k) = records.iter().position(|r| !r.is_finite()) {
        return Err(FpackError::NonFiniteWeight { filter: k as u64 });
    }

    let metadata = serde_json::to_vec(&ModelMetadata {
        model: meta.clone(),
        layers,
    })
    .map_err(|e| FpackError::MetadataInvalid(e.to_string()))?;
    let meta_len = u32::try_from(metadata.len()).map_err(|_| FpackError::MetadataInvalid("metadata too large".into()))?;

    let mut out = Vec::with_capacity(HEADER_LEN + metadata.len() + records.len() * FILTER_BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&metadata);
    for r in records {
        for w in r.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) fn derive_layers(meta: &ModelMeta, records: &[&FilterRecord]) -> Vec<LayerRecord> {
    let mut layers: Vec<LayerRecord> = Vec::new();
    for r in records {
        match layers.last_mut() {
            Some(l) if l.layer_index == r.layer_index => l.filter_count += 1,
            _ => layers.push(LayerRecord {
                model_id: meta.model_id.clone(),
                layer_index: r.layer_index,
                in_channels: None,
                out_channels: None,
                filter_count: 1,
            }),
        }
    }
    layers
}

impl FpackModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>, FpackError> {
        write_fpack(&self.meta, &self.layers, &self.filters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use filterscope_core::ModelId;

    fn meta() -> ModelMeta {
        ModelMeta {
            model_id: ModelId::new("m"),
            name: "m".into(),
            task: "classification".into(),
            data_type: "natural".into(),
            training_sets: vec!["imagenet1k".into()],
            architecture_family: "resnet".into(),
            conv_layer_count: 2,
            precision_bits: 32,
        }
    }

    fn zeros(n: u32) -> FilterSet {
        let id = ModelId::new("m");
        FilterSet::new((0..n).map(|k| FilterRecord::new(id.clone(), 0, k, [0.0; 9])).collect(), "")
    }

    #[test]
    fn zero_filters_decode() {
        let bytes = write_fpack(&meta(), &[], &zeros(2)).unwrap();
        let m = parse_fpack(&bytes).unwrap();
        assert_eq!(m.filters.len(), 2);
        assert!(m.filters.iter().all(|f| f.weights == [0.0; 9]));
        assert_eq!(m.layers.len(), 1);
        assert_eq!(m.layers[0].filter_count, 2);
        assert_eq!(m.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = write_fpack(&meta(), &[], &zeros(3)).unwrap();
        assert_eq!(&bytes[..4], b"FPK1");
        assert_eq!(u32_at(&bytes, 4), 1);
        assert_eq!(u64_at(&bytes, 8), 3);
        assert_eq!((u32_at(&bytes, 16), u32_at(&bytes, 20)), (3, 3));
        let m = u32_at(&bytes, 24) as usize;
        assert_eq!(bytes.len(), HEADER_LEN + m + 3 * 36);
        let json: serde_json::Value = serde_json::from_slice(&bytes[HEADER_LEN..HEADER_LEN + m]).unwrap();
        assert_eq!(json["model"]["task"], "classification");
    }

    #[test]
    fn malformed_files() {
        let good = write_fpack(&meta(), &[], &zeros(2)).unwrap();

        let mut b = good.clone();
        b[..4].copy_from_slice(b"XXXX");
        assert_eq!(parse_fpack(&b), Err(FpackError::BadMagic(*b"XXXX")));

        let mut b = good.clone();
        b[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert_eq!(parse_fpack(&b), Err(FpackError::UnsupportedVersion(2)));

        let mut b = good.clone();
        b[16..20].copy_from_slice(&5u32.to_le_bytes());
        assert_eq!(parse_fpack(&b), Err(FpackError::UnsupportedKernel(5, 3)));

        assert!(matches!(parse_fpack(&good[..good.len() - 1]), Err(FpackError::TruncatedPayload(_))));
        assert!(matches!(parse_fpack(&good[..10]), Err(FpackError::TruncatedPayload(_))));
        assert!(matches!(parse_fpack(&good[..2]), Err(FpackError::TruncatedPayload(_))));

        let mut b = good.clone();
        b.extend_from_slice(&[0u8; 36]);
        assert_eq!(parse_fpack(&b), Err(FpackError::CountMismatch { declared: 2, decoded: 3 }));

        // header says 1 filter, layer records say 2
        let mut b = good.clone();
        b.truncate(b.len() - 36);
        b[8..16].copy_from_slice(&1u64.to_le_bytes());
        assert_eq!(parse_fpack(&b), Err(FpackError::CountMismatch { declared: 1, decoded: 2 }));

        let mut b = good.clone();
        let n = b.len();
        b[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_fpack(&b), Err(FpackError::NonFiniteWeight { filter: 1 }));

        let mut m = meta();
        m.task = String::new();
        let json = serde_json::to_vec(&ModelMetadata { model: m, layers: vec![] }).unwrap();
        let mut b = good[..24].to_vec();
        b.extend_from_slice(&(json.len() as u32).to_le_bytes());
        b.extend_from_slice(&json);
        assert!(matches!(parse_fpack(&b), Err(FpackError::MetadataInvalid(_))));

        let mut b = good[..24].to_vec();
        b.extend_from_slice(&4u32.to_le_bytes());
        b.extend_from_slice(b"{no}");
        assert!(matches!(parse_fpack(&b), Err(FpackError::MetadataInvalid(_))));
    }

    #[test]
    fn writer_rejects_gappy_ordinals() {
        let id = ModelId::new("m");
        let fs = FilterSet::new(vec![FilterRecord::new(id.clone(), 0, 1, [0.0; 9])], "");
        assert!(matches!(write_fpack(&meta(), &[], &fs), Err(FpackError::MetadataInvalid(_))));
    }
}
