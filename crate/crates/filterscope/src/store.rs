//! Directory-backed catalog.
//!
//! ```text
//! <root>/manifest.json        every ModelMeta + LayerRecord list, sorted by model id
//! <root>/models/<id>.fpack    one FPACK blob per model
//! ```
//!
//! Writers take `<root>/.lock` for the duration of a registration. Blobs are
//! written before the manifest and the manifest is replaced by rename, so a
//! reader always sees either the old or the new catalog.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use filterscope_core::catalog::Catalog;
use filterscope_core::{FilterSet, LayerRecord, ModelId, ModelMeta};
use serde::{Deserialize, Serialize};

use crate::fpack::{parse_fpack, write_fpack, FpackError};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "filterscope-catalog";
const LOCK: &str = ".lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("catalog at {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("blob {path}: {source}")]
    Blob { path: PathBuf, source: FpackError },
    #[error(transparent)]
    Catalog(#[from] filterscope_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model: ModelMeta,
    pub layers: Vec<LayerRecord>,
    /// Path of the FPACK blob relative to the catalog root.
    pub blob: String,
    pub filter_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub models: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            format: MANIFEST_FORMAT.to_string(),
            version: 1,
            models: Vec::new(),
        }
    }
}

/// File name for a model's blob: the id itself when it is a safe file name,
/// otherwise a sanitized id plus a hash of the original.
pub fn blob_name(id: &ModelId) -> String {
    let s = id.as_str();
    let safe = !s.is_empty()
        && !s.starts_with('.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if safe {
        return format!("models/{s}.fpack");
    }
    let cleaned: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_') { c } else { '_' })
        .collect();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("models/{cleaned}-{h:016x}.fpack")
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct CatalogStore {
    root: PathBuf,
}

impl CatalogStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CatalogStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST)
    }

    /// The manifest, or an empty one when the catalog does not exist yet.
    pub fn manifest(&self) -> Result<Manifest, StoreError> {
        let path = self.manifest_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Manifest::default()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| StoreError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != 1 {
            return Err(StoreError::Manifest {
                path,
                message: format!("unsupported catalog format {} v{}", manifest.format, manifest.version),
            });
        }
        Ok(manifest)
    }

    /// Loads every model into memory.
    pub fn load(&self) -> Result<Catalog, StoreError> {
        let manifest = self.manifest()?;
        let mut catalog = Catalog::new();
        for entry in manifest.models {
            let path = self.root.join(&entry.blob);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let model = parse_fpack(&bytes).map_err(|source| StoreError::Blob {
                path: path.clone(),
                source,
            })?;
            if model.meta != entry.model || model.layers != entry.layers {
                return Err(StoreError::Manifest {
                    path: self.manifest_path(),
                    message: format!("metadata of `{}` differs from its blob", entry.model.model_id),
                });
            }
            catalog.register(model.meta, model.layers, model.filters)?;
        }
        Ok(catalog)
    }

    fn lock(&self) -> Result<LockGuard, StoreError> {
        fs::create_dir_all(self.root.join("models")).map_err(io_err(&self.root))?;
        let path = self.root.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Locked(self.root.clone())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Validates and persists one model.
    pub fn register(&self, meta: ModelMeta, layers: Vec<LayerRecord>, filters: FilterSet) -> Result<ModelId, StoreError> {
        let _guard = self.lock()?;
        let mut manifest = self.manifest()?;
        if manifest.models.iter().any(|m| m.model.model_id == meta.model_id) {
            return Err(filterscope_core::Error::DuplicateModel(meta.model_id.to_string()).into());
        }
        // validation and layer derivation are the in-memory catalog's
        let mut scratch = Catalog::new();
        let id = scratch.register(meta, layers, filters)?;
        let entry = scratch.model(&id).expect("just registered");
        let set = FilterSet {
            records: entry.filters.clone(),
            source_query: String::new(),
        };
        let blob = blob_name(&id);
        let bytes = write_fpack(&entry.meta, &entry.layers, &set).map_err(|source| StoreError::Blob {
            path: self.root.join(&blob),
            source,
        })?;
        write_atomic(&self.root.join(&blob), &bytes)?;

        manifest.models.push(ManifestEntry {
            model: entry.meta.clone(),
            layers: entry.layers.clone(),
            blob,
            filter_count: entry.filters.len() as u64,
        });
        manifest.models.sort_by(|a, b| a.model.model_id.cmp(&b.model.model_id));
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| StoreError::Manifest {
            path: self.manifest_path(),
            message: e.to_string(),
        })?;
        write_atomic(&self.manifest_path(), &json)?;
        Ok(id)
    }
}
