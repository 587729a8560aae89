#![allow(dead_code)]

use std::path::{Path, PathBuf};

use filterscope::fpack::write_fpack;
use filterscope_core::{FilterRecord, FilterSet, LayerRecord, ModelId, ModelMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn meta(id: &str, task: &str, data_type: &str, conv_layer_count: u32) -> ModelMeta {
    ModelMeta {
        model_id: ModelId::new(id),
        name: id.to_string(),
        task: task.to_string(),
        data_type: data_type.to_string(),
        training_sets: vec![format!("{data_type}-set")],
        architecture_family: "toy".to_string(),
        conv_layer_count,
        precision_bits: 32,
    }
}

/// A model whose layer `k` has `channels[k] = (in, out)`; weights are normal
/// with the given mean and unit spread.
pub struct Synth {
    pub meta: ModelMeta,
    pub layers: Vec<LayerRecord>,
    pub filters: FilterSet,
}

pub fn synth(id: &str, task: &str, data_type: &str, channels: &[(u32, u32)], mean: f64, seed: u64) -> Synth {
    let meta = meta(id, task, data_type, channels.len() as u32);
    let normal = Normal::new(mean, 1.0).unwrap();
    let mut rng = rng(seed);
    let mut layers = Vec::new();
    let mut records = Vec::new();
    for (k, &(cin, cout)) in channels.iter().enumerate() {
        let n = cin * cout;
        layers.push(LayerRecord {
            model_id: meta.model_id.clone(),
            layer_index: k as u32,
            in_channels: Some(cin),
            out_channels: Some(cout),
            filter_count: u64::from(n),
        });
        for o in 0..n {
            let w = std::array::from_fn(|_| normal.sample(&mut rng) as f32);
            records.push(FilterRecord::new(meta.model_id.clone(), k as u32, o, w));
        }
    }
    Synth {
        meta,
        layers,
        filters: FilterSet::new(records, id),
    }
}

impl Synth {
    pub fn fpack(&self) -> Vec<u8> {
        write_fpack(&self.meta, &self.layers, &self.filters).unwrap()
    }

    pub fn write_to(&self, dir: &Path) -> PathBuf {
        let path = dir.join(format!("{}.fpack", self.meta.model_id));
        std::fs::write(&path, self.fpack()).unwrap();
        path
    }
}

pub fn random_weights(rng: &mut ChaCha8Rng) -> [f32; 9] {
    std::array::from_fn(|_| rng.random_range(-2.0f32..2.0))
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["filterscope"];
    full.extend_from_slice(args);
    let code = filterscope::cli::run_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// SHA-256 of every file under `dir`, keyed by relative name.
pub fn hash_dir(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let bytes = std::fs::read(e.path()).unwrap();
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (e.file_name().to_string_lossy().into_owned(), hex)
        })
        .collect();
    out.sort();
    out
}

/// A four-model catalog on disk: two tasks, two data types, two depths.
pub fn small_catalog(root: &Path) -> PathBuf {
    let catalog = root.join("catalog");
    let inputs = root.join("inputs");
    std::fs::create_dir_all(&inputs).unwrap();
    let models = [
        synth("cls-nat", "classification", "natural", &[(3, 16), (16, 16), (16, 32)], 0.0, 1),
        synth("cls-med", "classification", "medical-ct", &[(3, 16), (16, 32)], 0.3, 2),
        synth("gan-nat", "gan-generator", "natural", &[(8, 16), (16, 16), (16, 8), (8, 3)], 0.0, 3),
        synth("seg-med", "segmentation", "medical-ct", &[(3, 32), (32, 16)], 0.5, 4),
    ];
    let paths: Vec<String> = models
        .iter()
        .map(|m| m.write_to(&inputs).to_string_lossy().into_owned())
        .collect();
    let cat = catalog.to_string_lossy().into_owned();
    let mut args = vec!["--catalog", cat.as_str(), "ingest", "--in"];
    args.extend(paths.iter().map(String::as_str));
    let (code, _, err) = cli(&args);
    assert_eq!(code, 0, "{err}");
    catalog
}
