//! The `filterscope` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 compute error. On
//! failure a single JSON object `{"error": class, "kind": …, "message": …}`
//! is written to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use filterscope_core::analytics::{fit_global_basis, mean_scale_per_decile, shift_matrix};
use filterscope_core::catalog::{Catalog, GroupAxis};
use filterscope_core::divergence::{BasisScope, Weighting};
use filterscope_core::preprocess::ScalingMode;
use filterscope_core::pca::PcaBasis;
use filterscope_core::{Error, ModelId};

use crate::config::{Config, ConfigError};
use crate::filter_csv::{parse_csv, CsvError};
use crate::fpack::{parse_fpack, FpackError};
use crate::report::{self, Provenance, ReportError, SubsetVariance};
use crate::store::{CatalogStore, StoreError};
use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "filterscope", version, about = "Catalog 3x3 convolution filters and measure distribution shifts")]
pub struct Cli {
    /// Catalog directory.
    #[arg(long, env = "FILTERSCOPE_CATALOG", global = true)]
    pub catalog: Option<PathBuf>,
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// global or pair
    #[arg(long)]
    pub basis: Option<BasisScope>,
    /// scaled or raw
    #[arg(long)]
    pub mode: Option<ScalingMode>,
    /// explained-variance or uniform
    #[arg(long)]
    pub weighting: Option<Weighting>,
    #[arg(long)]
    pub min_group_size: Option<usize>,
    /// Basis JSON from an earlier `pca --out`, used instead of fitting one.
    #[arg(long)]
    pub basis_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add models from FPACK or CSV files to the catalog.
    Ingest {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Metadata JSON for CSV inputs, one per CSV file in the same order.
        #[arg(long, num_args = 1..)]
        meta: Vec<PathBuf>,
    },
    /// Model, layer and filter counts per group.
    Stats {
        #[arg(long, default_value = "task")]
        group_by: GroupAxis,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Fit the global basis and print explained-variance ratios.
    Pca {
        /// Also fit one basis per group on this axis.
        #[arg(long)]
        group_by: Option<GroupAxis>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Pairwise shift matrix between the groups of one axis.
    Shift {
        #[arg(long)]
        group_by: GroupAxis,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Mean filter range per depth decile.
    Scales {
        #[arg(long)]
        model: Option<String>,
    },
    /// Phenotype of each group's coefficient distribution.
    Phenotype {
        #[arg(long, default_value = "model_id")]
        group_by: GroupAxis,
        #[command(flatten)]
        overrides: Overrides,
        /// Print per-component diagnostics instead of classes.
        #[arg(long)]
        evidence: bool,
    },
    /// Write the full report bundle.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Compute,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Compute => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Usage => "UsageError",
            ErrorClass::Data => "DataError",
            ErrorClass::Compute => "ComputeError",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(class: ErrorClass, kind: &str, message: impl Into<String>) -> Self {
        CliError {
            class,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError::new(ErrorClass::Usage, "UsageError", message)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.class.name(),
            "kind": self.kind,
            "message": self.message,
        })
        .to_string()
    }
}

/// Variant name of an error's Debug form.
fn variant<E: std::fmt::Debug>(e: &E) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let class = match e {
            Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::InsufficientSamples { .. }
            | Error::ZeroVariance
            | Error::DegenerateRange { .. }
            | Error::RangeMismatch
            | Error::TooFewGroups { .. }
            | Error::InsufficientData { .. } => ErrorClass::Compute,
            _ => ErrorClass::Data,
        };
        CliError::new(class, &variant(&e), e.to_string())
    }
}

impl From<FpackError> for CliError {
    fn from(e: FpackError) -> Self {
        CliError::new(ErrorClass::Data, &variant(&e), e.to_string())
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        CliError::new(ErrorClass::Data, &variant(&e), e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(ErrorClass::Usage, "ConfigError", e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Catalog(inner) => inner.into(),
            StoreError::Blob { source, path } => {
                CliError::new(ErrorClass::Data, &variant(&source), format!("{}: {source}", path.display()))
            }
            other => CliError::new(ErrorClass::Data, &variant(&other), other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Core(inner) => inner.into(),
            ReportError::Config(inner) => inner.into(),
            ReportError::Io { .. } => CliError::new(ErrorClass::Data, "Io", e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(ErrorClass::Data, "Io", format!("{}: {e}", path.display()))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::new(ErrorClass::Data, "Io", format!("stdout: {e}")))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_error(&path, e))
}

struct Context {
    catalog_dir: Option<PathBuf>,
    config: Config,
}

impl Context {
    fn store(&self) -> Result<CatalogStore, CliError> {
        self.catalog_dir
            .as_ref()
            .map(CatalogStore::new)
            .ok_or_else(|| CliError::usage("no catalog directory: pass --catalog or set FILTERSCOPE_CATALOG"))
    }

    fn load(&self) -> Result<Catalog, CliError> {
        let catalog = self.store()?.load()?;
        if catalog.is_empty() {
            return Err(Error::EmptyCatalog.into());
        }
        Ok(catalog)
    }

    fn with(&self, o: &Overrides) -> Result<Config, CliError> {
        let mut c = self.config.clone();
        let d = &mut c.divergence;
        if let Some(b) = o.bins {
            d.bins = b;
        }
        if let Some(e) = o.epsilon {
            d.epsilon = e;
        }
        if let Some(b) = o.basis {
            d.basis = b;
        }
        if let Some(m) = o.mode {
            d.mode = m;
        }
        if let Some(w) = o.weighting {
            d.weighting = w;
        }
        if let Some(n) = o.min_group_size {
            c.analysis.min_group_size = n;
        }
        c.validate()?;
        Ok(c)
    }
}

fn basis(catalog: &Catalog, config: &Config, o: &Overrides) -> Result<PcaBasis, CliError> {
    let imported = match &o.basis_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            Some(report::parse_basis(&text)?)
        }
        None => None,
    };
    Ok(report::resolve_basis(catalog, config, imported)?)
}

fn ingest(ctx: &Context, inputs: &[PathBuf], meta: &[PathBuf], out: &mut dyn Write) -> Result<(), CliError> {
    let store = ctx.store()?;
    let csv_count = inputs
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .count();
    if csv_count != meta.len() {
        return Err(CliError::usage(format!(
            "{csv_count} CSV inputs need {csv_count} --meta files, got {}",
            meta.len()
        )));
    }
    let mut metas = meta.iter();
    for path in inputs {
        let model = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let meta_path = metas.next().expect("counted above");
            let json = fs::read_to_string(meta_path).map_err(|e| io_error(meta_path, e))?;
            parse_csv(&text, &json)?
        } else {
            let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
            parse_fpack(&bytes)?
        };
        let count = model.filters.len();
        let id = store.register(model.meta, model.layers, model.filters)?;
        log::info!("registered {id} from {}", path.display());
        write_out(out, &format!("registered {id} ({count} filters)\n"))?;
    }
    Ok(())
}

fn emit(
    out: &mut dyn Write,
    dir: Option<&Path>,
    files: &[(String, String)],
    stdout_index: usize,
) -> Result<(), CliError> {
    match dir {
        Some(d) => {
            for (name, text) in files {
                write_file(d, name, text)?;
            }
            Ok(())
        }
        None => write_out(out, &files[stdout_index].1),
    }
}

fn pca(
    ctx: &Context,
    group_by: Option<GroupAxis>,
    dir: Option<&Path>,
    config: &Config,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let catalog = ctx.load()?;
    let basis = fit_global_basis(&catalog, config.divergence.mode, &config.analysis)?;
    let prov = Provenance::new(&basis.id, &config.divergence);
    let mut rows = vec![SubsetVariance::of("all", &basis)];
    if let Some(axis) = group_by {
        let mut notes = Vec::new();
        rows.extend(report::subset_variances(axis.name(), &catalog.group_by(axis), config, &mut notes));
        for n in notes {
            log::warn!("{n}");
        }
    }
    let series = |f: fn(&SubsetVariance) -> Vec<f64>| -> Vec<(String, Vec<f64>)> {
        rows.iter().map(|r| (r.subset.clone(), f(r))).collect()
    };
    let files = vec![
        ("explained_variance.csv".to_string(), report::variance_csv(&rows)),
        ("basis.json".to_string(), report::basis_json(&basis)),
        (
            "explained_variance.svg".to_string(),
            svg::component_lines("explained variance ratio", "ratio", &series(|r| r.ratios.to_vec()), &prov),
        ),
        (
            "explained_variance_cumulative.svg".to_string(),
            svg::component_lines(
                "cumulative explained variance ratio",
                "cumulative ratio",
                &series(|r| r.cumulative.to_vec()),
                &prov,
            ),
        ),
        ("config.json".to_string(), config.snapshot_json()),
    ];
    emit(out, dir, &files, 0)
}

fn shift(
    ctx: &Context,
    axis: GroupAxis,
    config: &Config,
    overrides: &Overrides,
    dir: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let catalog = ctx.load()?;
    let basis = basis(&catalog, config, overrides)?;
    let m = shift_matrix(&catalog, axis, &basis, &config.divergence, &config.analysis)?;
    for o in &m.omitted {
        log::warn!("omitted group {} ({} filters)", o.label, o.filter_count);
    }
    let summary = vec![m.summary()?];
    let name = axis.name();
    let files = vec![
        (format!("shift_{name}.csv"), report::matrix_csv(&m)),
        (format!("shift_{name}.json"), report::matrix_json(&m)),
        (format!("shift_{name}.svg"), svg::heatmap(&m, &Provenance::new(&m.basis_id, &config.divergence))),
        (format!("shift_{name}_summary.csv"), report::summary_csv(&summary)),
        (format!("shift_{name}_summary.json"), report::summary_json(&summary)),
        ("config.json".to_string(), config.snapshot_json()),
    ];
    emit(out, dir, &files, if format == Format::Csv { 0 } else { 1 })
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Context {
        catalog_dir: cli.catalog,
        config,
    };
    match cli.command {
        Command::Ingest { inputs, meta } => ingest(&ctx, &inputs, &meta, out),
        Command::Stats { group_by, format } => {
            let catalog = ctx.load()?;
            let rows = catalog.stats(group_by);
            let text = match format {
                Format::Csv => report::stats_csv(group_by, &rows),
                Format::Json => {
                    let v: Vec<_> = rows
                        .iter()
                        .map(|r| {
                            serde_json::json!({
                                "axis": group_by.name(),
                                "label": r.label,
                                "model_count": r.model_count,
                                "layer_count": r.layer_count,
                                "filter_count": r.filter_count,
                            })
                        })
                        .collect();
                    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
                }
            };
            write_out(out, &text)
        }
        Command::Pca { group_by, out: dir, overrides } => {
            if overrides.basis_file.is_some() {
                return Err(CliError::usage("pca fits its own basis; --basis-file does not apply"));
            }
            let config = ctx.with(&overrides)?;
            pca(&ctx, group_by, dir.as_deref(), &config, out)
        }
        Command::Shift {
            group_by,
            overrides,
            out: dir,
            format,
        } => {
            let config = ctx.with(&overrides)?;
            shift(&ctx, group_by, &config, &overrides, dir.as_deref(), format, out)
        }
        Command::Scales { model } => {
            let catalog = ctx.load()?;
            let rows = match model {
                Some(id) => vec![mean_scale_per_decile(&ModelId::from(id), &catalog)?],
                None => report::all_scales(&catalog)?,
            };
            write_out(out, &report::scales_csv(&rows))
        }
        Command::Phenotype {
            group_by,
            overrides,
            evidence,
        } => {
            let config = ctx.with(&overrides)?;
            let catalog = ctx.load()?;
            let basis = basis(&catalog, &config, &overrides)?;
            let mut notes = Vec::new();
            let rows = report::phenotypes(&catalog, group_by, &basis, &config, &mut notes)?;
            for n in notes {
                log::warn!("{n}");
            }
            let text = if evidence {
                report::phenotype_evidence_csv(group_by, &rows)
            } else {
                report::phenotype_csv(group_by, &rows)
            };
            write_out(out, &text)
        }
        Command::Report { out: dir, overrides } => {
            let config = ctx.with(&overrides)?;
            let catalog = ctx.load()?;
            let imported = match overrides.basis_file {
                Some(_) => Some(basis(&catalog, &config, &overrides)?),
                None => None,
            };
            let bundle = report::write_report(&catalog, &config, imported, &dir)?;
            write_out(
                out,
                &format!("wrote {} artifacts to {}\n", bundle.artifacts.len(), dir.display()),
            )
        }
    }
}

/// Runs the tool on `args` (including the program name) and returns the
/// exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = writeln!(err, "{}", CliError::usage(e.to_string().trim_end()).to_json());
            return ErrorClass::Usage.exit_code();
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            e.class.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
