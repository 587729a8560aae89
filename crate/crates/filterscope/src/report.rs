//! Tables, JSON documents and the full report bundle.
//!
//! Every table function returns the file contents as a `String`; only
//! [`write_report`] touches the file system. Floats are written with Rust's
//! shortest round-trip formatting so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use filterscope_core::analytics::{
    classify_phenotype, fit_global_basis, mean_scale_per_decile, shift_matrix, DecileScaleStats, Phenotype,
    ShiftMatrix, ShiftSummary, DECILES,
};
use filterscope_core::catalog::{Catalog, GroupAxis, GroupStats};
use filterscope_core::density::{gaussian_kde, KdeCurve};
use filterscope_core::divergence::{build_histograms, BasisScope, ComponentHistogram, DivergenceConfig, Weighting};
use filterscope_core::pca::{transform, CoefficientSet, PcaBasis};
use filterscope_core::preprocess::{prepare, ScalingMode};
use filterscope_core::{Error, FilterSet, KERNEL_LEN};
use serde::Serialize;

use crate::config::{Config, ConfigError};
use crate::svg;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// What every artifact records about how it was computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub basis_id: String,
    pub mode: ScalingMode,
    pub bins: usize,
    pub epsilon: f64,
    pub log_base: &'static str,
    pub weighting: Weighting,
    pub basis_scope: BasisScope,
}

impl Provenance {
    pub fn new(basis_id: &str, config: &DivergenceConfig) -> Self {
        Provenance {
            basis_id: basis_id.to_string(),
            mode: config.mode,
            bins: config.bins,
            epsilon: config.epsilon,
            log_base: "e",
            weighting: config.weighting,
            basis_scope: config.basis,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }

    pub fn line(&self) -> String {
        format!(
            "basis={} mode={} bins={} epsilon={:e} log=e weighting={} scope={}",
            self.basis_id,
            self.mode,
            self.bins,
            self.epsilon,
            self.weighting.name(),
            self.basis_scope.name()
        )
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn stats_csv(axis: GroupAxis, rows: &[GroupStats]) -> String {
    csv_string(
        &["axis", "label", "model_count", "layer_count", "filter_count"],
        rows.iter().map(|r| {
            vec![
                axis.name().to_string(),
                r.label.clone(),
                r.model_count.to_string(),
                r.layer_count.to_string(),
                r.filter_count.to_string(),
            ]
        }),
    )
}

/// Square table: a header row of labels and one row per label.
pub fn matrix_csv(m: &ShiftMatrix) -> String {
    let mut header = vec![m.axis.as_str()];
    header.extend(m.labels.iter().map(String::as_str));
    csv_string(
        &header,
        m.labels.iter().zip(&m.values).map(|(label, row)| {
            let mut out = vec![label.clone()];
            out.extend(row.iter().map(f64::to_string));
            out
        }),
    )
}

#[derive(Serialize)]
struct MatrixDoc<'a> {
    #[serde(flatten)]
    matrix: &'a ShiftMatrix,
    provenance: Provenance,
}

pub fn matrix_json(m: &ShiftMatrix) -> String {
    json_string(&MatrixDoc {
        matrix: m,
        provenance: Provenance::new(&m.basis_id, &m.config),
    })
}

pub fn summary_csv(rows: &[ShiftSummary]) -> String {
    csv_string(
        &["axis", "pair_count", "min", "q1", "median", "q3", "max", "outliers"],
        rows.iter().map(|s| {
            let outliers: Vec<String> = s.outliers.iter().map(|p| format!("{}|{}", p.a, p.b)).collect();
            vec![
                s.axis.clone(),
                s.pair_count.to_string(),
                s.min.to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.max.to_string(),
                outliers.join(";"),
            ]
        }),
    )
}

pub fn summary_json(rows: &[ShiftSummary]) -> String {
    json_string(&rows)
}

/// Explained-variance ratios of one subset's own basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetVariance {
    pub subset: String,
    pub basis_id: String,
    pub sample_count: u64,
    pub ratios: [f64; KERNEL_LEN],
    pub cumulative: [f64; KERNEL_LEN],
}

impl SubsetVariance {
    pub fn of(subset: &str, basis: &PcaBasis) -> Self {
        SubsetVariance {
            subset: subset.to_string(),
            basis_id: basis.id.clone(),
            sample_count: basis.sample_count,
            ratios: basis.explained_variance_ratios,
            cumulative: basis.cumulative_ratios(),
        }
    }
}

pub fn variance_csv(rows: &[SubsetVariance]) -> String {
    csv_string(
        &["subset", "basis_id", "sample_count", "component", "ratio", "cumulative"],
        rows.iter().flat_map(|r| {
            (0..KERNEL_LEN).map(move |k| {
                vec![
                    r.subset.clone(),
                    r.basis_id.clone(),
                    r.sample_count.to_string(),
                    (k + 1).to_string(),
                    r.ratios[k].to_string(),
                    r.cumulative[k].to_string(),
                ]
            })
        }),
    )
}

pub fn basis_json(basis: &PcaBasis) -> String {
    json_string(basis)
}

/// Reads a basis written by [`basis_json`] and checks its invariants and id.
pub fn parse_basis(text: &str) -> Result<PcaBasis, Error> {
    let basis: PcaBasis =
        serde_json::from_str(text).map_err(|e| Error::InvariantViolation(format!("basis JSON: {e}")))?;
    basis.validate()?;
    if basis.content_id() != basis.id {
        return Err(Error::InvariantViolation(format!(
            "basis id {} does not match its contents ({})",
            basis.id,
            basis.content_id()
        )));
    }
    Ok(basis)
}

/// The imported basis if given, else one fit over the whole catalog.
pub fn resolve_basis(catalog: &Catalog, config: &Config, imported: Option<PcaBasis>) -> Result<PcaBasis, Error> {
    match imported {
        Some(b) if b.provenance.mode != config.divergence.mode => Err(Error::InvalidConfig(format!(
            "basis {} was fit on {} filters but the run uses {}",
            b.id, b.provenance.mode, config.divergence.mode
        ))),
        Some(b) => Ok(b),
        None => fit_global_basis(catalog, config.divergence.mode, &config.analysis),
    }
}

/// Per-subset bases over the groups of `groups`, each fit on its own
/// preprocessed filters. Groups that cannot be fit are reported in the notes.
pub fn subset_variances(
    axis: &str,
    groups: &BTreeMap<String, FilterSet>,
    config: &Config,
    notes: &mut Vec<String>,
) -> Vec<SubsetVariance> {
    let mut out = Vec::new();
    for (label, set) in groups {
        if set.len() < config.analysis.min_group_size.max(1) {
            notes.push(format!("{axis}={label}: {} filters, below minimum group size", set.len()));
            continue;
        }
        let scaled = prepare(set, config.divergence.mode, config.analysis.degeneracy_threshold);
        match PcaBasis::fit_scaled(&scaled, config.analysis.exclude_degenerate, &format!("{axis}={label}")) {
            Ok(b) => out.push(SubsetVariance::of(label, &b)),
            Err(e) => notes.push(format!("{axis}={label}: no basis ({e})")),
        }
    }
    out
}

/// Histograms and KDE curves of every group's coefficients in one basis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RidgeData {
    pub histograms: Vec<(String, ComponentHistogram)>,
    pub kde: Vec<(String, usize, KdeCurve)>,
    pub notes: Vec<String>,
}

/// Ridge-plot data. Histograms share their range across all groups and come
/// from the same routine the shift metric uses.
pub fn export_ridge_data(
    groups: &BTreeMap<String, FilterSet>,
    basis: &PcaBasis,
    config: &DivergenceConfig,
    degeneracy_threshold: f64,
    min_group_size: usize,
    kde_points: usize,
) -> Result<RidgeData, Error> {
    let mut data = RidgeData::default();
    let mut labels = Vec::new();
    let mut coeffs: Vec<CoefficientSet> = Vec::new();
    for (label, set) in groups {
        if set.len() < min_group_size.max(1) {
            data.notes.push(format!("{label}: {} filters, below minimum group size", set.len()));
            continue;
        }
        let scaled = prepare(set, config.mode, degeneracy_threshold);
        labels.push(label.clone());
        coeffs.push(transform(&scaled.records, basis));
    }
    if coeffs.is_empty() {
        return Ok(data);
    }
    let refs: Vec<&CoefficientSet> = coeffs.iter().collect();
    for component in 0..KERNEL_LEN {
        match build_histograms(&refs, component, config) {
            Ok(hs) => data.histograms.extend(labels.iter().cloned().zip(hs)),
            Err(Error::DegenerateRange { .. }) => {
                data.notes.push(format!("component {}: constant across all groups, no histogram", component + 1))
            }
            Err(e) => return Err(e),
        }
    }
    for (label, c) in labels.iter().zip(&coeffs) {
        for component in 0..KERNEL_LEN {
            let column: Vec<f64> = c.column(component).collect();
            match gaussian_kde(&column, kde_points, component) {
                Ok(k) => data.kde.push((label.clone(), component, k)),
                Err(Error::DegenerateRange { .. }) => {
                    data.notes.push(format!("{label} component {}: zero spread, no KDE", component + 1))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(data)
}

/// One row per bin; components are numbered from 1.
pub fn ridge_histogram_csv(data: &RidgeData, prov: &Provenance) -> String {
    csv_string(
        &["group", "component", "bin", "lo", "hi", "count", "probability", "basis_id", "mode", "bins", "epsilon"],
        data.histograms.iter().flat_map(|(label, h)| {
            let w = h.bin_width();
            (0..h.bin_count()).map(move |b| {
                vec![
                    label.clone(),
                    (h.component + 1).to_string(),
                    b.to_string(),
                    (h.lo + w * b as f64).to_string(),
                    (h.lo + w * (b + 1) as f64).to_string(),
                    h.counts[b].to_string(),
                    h.probabilities[b].to_string(),
                    prov.basis_id.clone(),
                    prov.mode.to_string(),
                    prov.bins.to_string(),
                    prov.epsilon.to_string(),
                ]
            })
        }),
    )
}

pub fn ridge_kde_csv(data: &RidgeData, prov: &Provenance) -> String {
    csv_string(
        &["group", "component", "bandwidth", "x", "density", "basis_id", "mode"],
        data.kde.iter().flat_map(|(label, component, k)| {
            k.grid.iter().zip(&k.density).map(move |(x, d)| {
                vec![
                    label.clone(),
                    (component + 1).to_string(),
                    k.bandwidth.to_string(),
                    x.to_string(),
                    d.to_string(),
                    prov.basis_id.clone(),
                    prov.mode.to_string(),
                ]
            })
        }),
    )
}

/// Long format: one row per model and decile; missing deciles leave
/// `mean_scale` empty.
pub fn scales_csv(rows: &[DecileScaleStats]) -> String {
    csv_string(
        &["model_id", "decile", "mean_scale", "filter_count"],
        rows.iter().flat_map(|r| {
            (0..DECILES).map(move |d| {
                vec![
                    r.model_id.to_string(),
                    d.to_string(),
                    opt(r.means[d]),
                    r.counts[d].to_string(),
                ]
            })
        }),
    )
}

pub fn all_scales(catalog: &Catalog) -> Result<Vec<DecileScaleStats>, Error> {
    catalog
        .models()
        .map(|m| mean_scale_per_decile(&m.meta.model_id, catalog))
        .collect()
}

/// Phenotype of each group on `axis`, computed in `basis`. Groups too small
/// to classify are reported in the notes.
pub fn phenotypes(
    catalog: &Catalog,
    axis: GroupAxis,
    basis: &PcaBasis,
    config: &Config,
    notes: &mut Vec<String>,
) -> Result<Vec<(String, Phenotype)>, Error> {
    let mut out = Vec::new();
    for (label, set) in catalog.group_by(axis) {
        let scaled = prepare(&set, config.divergence.mode, config.analysis.degeneracy_threshold);
        match classify_phenotype(&transform(&scaled.records, basis), &config.phenotype) {
            Ok(p) => out.push((label, p)),
            Err(Error::InsufficientData { required, got }) => {
                notes.push(format!("{}={label}: {got} filters, phenotype needs {required}", axis.name()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn phenotype_csv(axis: GroupAxis, rows: &[(String, Phenotype)]) -> String {
    csv_string(
        &["axis", "label", "class", "nickname", "reasons"],
        rows.iter().map(|(label, p)| {
            vec![
                axis.name().to_string(),
                label.clone(),
                p.class.name().to_string(),
                p.class.nickname().to_string(),
                p.reasons.join(";"),
            ]
        }),
    )
}

pub fn phenotype_evidence_csv(axis: GroupAxis, rows: &[(String, Phenotype)]) -> String {
    csv_string(
        &[
            "axis",
            "label",
            "component",
            "distinct_ratio",
            "top5_mass",
            "modes",
            "skewness",
            "excess_kurtosis",
            "near_zero_fraction",
        ],
        rows.iter().flat_map(|(label, p)| {
            p.evidence.iter().map(move |d| {
                vec![
                    axis.name().to_string(),
                    label.clone(),
                    (d.component + 1).to_string(),
                    d.distinct_ratio.to_string(),
                    d.top5_mass.to_string(),
                    d.modes.to_string(),
                    d.skewness.to_string(),
                    d.excess_kurtosis.to_string(),
                    d.near_zero_fraction.to_string(),
                ]
            })
        }),
    )
}

/// Files of a finished report, relative to its directory, in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub artifacts: Vec<String>,
    pub log: Vec<String>,
}

impl ReportBundle {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), ReportError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| ReportError::Io { path, source })?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, line: impl Into<String>) {
        let line = line.into();
        log::info!("{line}");
        self.log.push(line);
    }
}

fn variance_charts(bundle: &mut ReportBundle, stem: &str, rows: &[SubsetVariance], prov: &Provenance) -> Result<(), ReportError> {
    bundle.write(&format!("{stem}.csv"), &variance_csv(rows))?;
    let ratios: Vec<(String, Vec<f64>)> = rows.iter().map(|r| (r.subset.clone(), r.ratios.to_vec())).collect();
    let cumulative: Vec<(String, Vec<f64>)> = rows.iter().map(|r| (r.subset.clone(), r.cumulative.to_vec())).collect();
    bundle.write(
        &format!("{stem}.svg"),
        &svg::component_lines("explained variance ratio", "ratio", &ratios, prov),
    )?;
    bundle.write(
        &format!("{stem}_cumulative.svg"),
        &svg::component_lines("cumulative explained variance ratio", "cumulative ratio", &cumulative, prov),
    )
}

/// Runs every analysis and writes the bundle into `dir`. Without an
/// imported basis, one is fit over the whole catalog.
pub fn write_report(
    catalog: &Catalog,
    config: &Config,
    basis: Option<PcaBasis>,
    dir: &Path,
) -> Result<ReportBundle, ReportError> {
    config.validate()?;
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog.into());
    }
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut bundle = ReportBundle {
        dir: dir.to_path_buf(),
        ..ReportBundle::default()
    };
    let div = &config.divergence;
    let axes = config.report.parsed_axes()?;

    let basis = resolve_basis(catalog, config, basis)?;
    let prov = Provenance::new(&basis.id, div);
    bundle.note(format!(
        "catalog: {} models, {} layers, {} filters",
        catalog.model_count(),
        catalog.layer_count(),
        catalog.filter_count()
    ));
    bundle.note(format!(
        "basis {} over {} filters ({})",
        basis.id, basis.sample_count, basis.provenance.source
    ));
    bundle.note(prov.line());
    bundle.write("config.json", &config.snapshot_json())?;
    bundle.write("basis.json", &basis_json(&basis))?;
    variance_charts(&mut bundle, "explained_variance_global", &[SubsetVariance::of("all", &basis)], &prov)?;

    let mut summaries = Vec::new();
    for axis in &axes {
        let name = axis.name();
        bundle.write(&format!("stats_{name}.csv"), &stats_csv(*axis, &catalog.stats(*axis)))?;
        let groups = catalog.group_by(*axis);

        match shift_matrix(catalog, *axis, &basis, div, &config.analysis) {
            Ok(m) => {
                for o in &m.omitted {
                    bundle.note(format!("shift {name}: omitted {} ({} filters)", o.label, o.filter_count));
                }
                for n in &m.notes {
                    bundle.note(format!("shift {name}: {n}"));
                }
                let mprov = Provenance::new(&m.basis_id, div);
                bundle.write(&format!("shift_{name}.csv"), &matrix_csv(&m))?;
                bundle.write(&format!("shift_{name}.json"), &matrix_json(&m))?;
                bundle.write(&format!("shift_{name}.svg"), &svg::heatmap(&m, &mprov))?;
                summaries.push(m.summary()?);
            }
            Err(Error::TooFewGroups { got, min_size }) => {
                bundle.note(format!("shift {name}: skipped, {got} groups with at least {min_size} filters"))
            }
            Err(e) => return Err(e.into()),
        }

        let mut notes = Vec::new();
        let rows = subset_variances(name, &groups, config, &mut notes);
        for n in notes {
            bundle.note(format!("pca {n}"));
        }
        if !rows.is_empty() {
            variance_charts(&mut bundle, &format!("explained_variance_{name}"), &rows, &prov)?;
        }

        let ridge = export_ridge_data(
            &groups,
            &basis,
            div,
            config.analysis.degeneracy_threshold,
            config.analysis.min_group_size,
            config.report.kde_points,
        )?;
        for n in &ridge.notes {
            bundle.note(format!("ridge {name}: {n}"));
        }
        bundle.write(&format!("ridge_hist_{name}.csv"), &ridge_histogram_csv(&ridge, &prov))?;
        bundle.write(&format!("ridge_kde_{name}.csv"), &ridge_kde_csv(&ridge, &prov))?;
    }
    bundle.write("shift_summary.csv", &summary_csv(&summaries))?;
    bundle.write("shift_summary.json", &summary_json(&summaries))?;

    let scales = all_scales(catalog)?;
    bundle.write("scales.csv", &scales_csv(&scales))?;
    let per_decile: Vec<(String, Vec<f64>)> = (0..DECILES)
        .map(|d| (d.to_string(), scales.iter().filter_map(|s| s.means[d]).collect()))
        .collect();
    bundle.write(
        "scales.svg",
        &svg::boxplot("mean filter range per depth decile", "depth decile", "mean range", &per_decile, &prov),
    )?;

    let mut notes = Vec::new();
    let pheno = phenotypes(catalog, GroupAxis::ModelId, &basis, config, &mut notes)?;
    for n in notes {
        bundle.note(format!("phenotype {n}"));
    }
    bundle.write("phenotype.csv", &phenotype_csv(GroupAxis::ModelId, &pheno))?;
    bundle.write("phenotype_evidence.csv", &phenotype_evidence_csv(GroupAxis::ModelId, &pheno))?;

    let mut log = bundle.log.join("\n");
    log.push_str("\nartifacts:\n");
    for a in &bundle.artifacts {
        log.push_str("  ");
        log.push_str(a);
        log.push('\n');
    }
    bundle.write("run.log", &log)?;
    Ok(bundle)
}
