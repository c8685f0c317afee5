//! Experiment grids and their reports: dataset generation, the edge-drop
//! sweep, the dropout and layer-count grids, attention-variant runs and
//! per-epoch curves.
//!
//! Every table cell is backed by a run record under `<out>/runs/` holding
//! the cell's full training config, its hash, the seeds and the dataset hash.
//! Nothing time- or machine-dependent is written, so reruns reproduce every
//! file byte for byte.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{hex_digest, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::models::{AttnPlacement, AttnResidualGcnConfig, AttnVariantConfig, ModelKind, ModelSpec, ResidualGcnConfig};
use crate::training::{
    curves_csv, format_mean_std, read_json, run_experiment, train_test_gap, write_json, write_string, ExperimentResult,
    TrainConfig,
};

/// Where a sweep's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub dataset: Option<DatasetSource>,
    /// Label used in the report's `dataset` column; defaults to the file stem.
    pub dataset_name: Option<String>,
    /// Model configurations; grids that vary one model use the first entry
    /// of the matching kind, or its defaults.
    pub models: Vec<ModelSpec>,
    /// Schedule and seeds; its `model` field is replaced per cell.
    pub train: TrainConfig,
    pub drop_probabilities: Vec<f64>,
    pub dropout_grid: Vec<f64>,
    pub attention_dropout_grid: Vec<f64>,
    pub layer_counts: Vec<usize>,
    pub variants: Vec<AttnVariantConfig>,
    pub out_dir: PathBuf,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            dataset: None,
            dataset_name: None,
            models: vec![
                ModelSpec::default_for(ModelKind::ResidualGcn),
                ModelSpec::default_for(ModelKind::Exphormer),
            ],
            train: TrainConfig::default(),
            drop_probabilities: vec![0.0, 0.5, 1.0],
            dropout_grid: vec![0.1, 0.3],
            attention_dropout_grid: vec![0.1, 0.3, 0.5],
            layer_counts: vec![2, 3],
            variants: [
                (AttnPlacement::AfterEachGcn, 0.0),
                (AttnPlacement::AfterEachGcn, 0.5),
                (AttnPlacement::AfterEachGcn, 1.0),
                (AttnPlacement::AfterConcat, 0.5),
                (AttnPlacement::AfterConcat, 1.0),
            ]
            .into_iter()
            .map(|(placement, apply_probability)| AttnVariantConfig {
                placement,
                apply_probability,
            })
            .collect(),
            out_dir: PathBuf::from("results"),
        }
    }
}

fn check_probabilities(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(format!("{name} must not be empty")));
    }
    if let Some(p) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::config(format!("{name} entry {p} not in [0, 1]")));
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::config("at least one model is required"));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate()?;
            if self.models[..i].iter().any(|o| o.kind() == m.kind()) {
                return Err(Error::config(format!("model {} listed twice", m.kind())));
            }
        }
        let mut train = self.train.clone();
        train.model = self.models[0].clone();
        train.validate()?;
        check_probabilities("drop_probabilities", &self.drop_probabilities)?;
        check_probabilities("dropout_grid", &self.dropout_grid)?;
        check_probabilities("attention_dropout_grid", &self.attention_dropout_grid)?;
        if self.layer_counts.is_empty() || self.layer_counts.contains(&0) {
            return Err(Error::config("layer_counts must be non-empty and positive"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants must not be empty"));
        }
        for v in &self.variants {
            v.validate()?;
        }
        Ok(())
    }

    /// The configured model of `kind`, or that kind's defaults.
    pub fn model(&self, kind: ModelKind) -> ModelSpec {
        self.models
            .iter()
            .find(|m| m.kind() == kind)
            .cloned()
            .unwrap_or_else(|| ModelSpec::default_for(kind))
    }
}

/// A loaded dataset together with its report label and content hash.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub sha256: String,
    pub data: Dataset,
}

pub fn load_dataset(spec: &SweepSpec) -> Result<LoadedDataset> {
    let source = spec.dataset.as_ref().ok_or_else(|| Error::config("no dataset given"))?;
    let (default_name, sha256, data) = match source {
        DatasetSource::Path(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let data = Dataset::load(path)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            (stem, hex_digest(&bytes), data)
        }
        DatasetSource::Synthetic(s) => {
            let data = Dataset::synthetic(s)?;
            (format!("synthetic_{}", mode_name(s)), data.content_hash(), data)
        }
    };
    if data.is_empty() {
        return Err(Error::config("dataset has no graphs"));
    }
    Ok(LoadedDataset {
        name: spec.dataset_name.clone().unwrap_or(default_name),
        sha256,
        data,
    })
}

fn mode_name(s: &SyntheticSpec) -> String {
    serde_json::to_value(s.label_mode)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub path: PathBuf,
    pub graphs: usize,
    pub classes: usize,
    pub mean_edge_density: f64,
    pub sha256: String,
}

impl fmt::Display for GenSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wrote {}: {} graphs, {} classes, mean edge density {:.3}, sha256 {}",
            self.path.display(),
            self.graphs,
            self.classes,
            self.mean_edge_density,
            self.sha256
        )
    }
}

/// Generates a synthetic dataset and writes it as JSON Lines.
pub fn cmd_gen_data(spec: &SyntheticSpec, out: &Path) -> Result<GenSummary> {
    let data = Dataset::synthetic(spec)?;
    data.save(out)?;
    Ok(GenSummary {
        path: out.to_path_buf(),
        graphs: data.len(),
        classes: data.num_classes,
        mean_edge_density: data.mean_edge_density(),
        sha256: data.content_hash(),
    })
}

/// Everything needed to trace one table cell back to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: String,
    pub dataset: String,
    pub dataset_sha256: String,
    pub model: ModelKind,
    pub drop_p: f64,
    pub seeds: Vec<u64>,
    pub config_sha256: String,
    pub config: TrainConfig,
    pub result: ExperimentResult,
}

impl CellRecord {
    pub fn path(out_dir: &Path, id: &str) -> PathBuf {
        out_dir.join("runs").join(format!("{id}.json"))
    }
}

struct Cell {
    id: String,
    config: TrainConfig,
    drop_p: f64,
}

fn config_hash(cfg: &TrainConfig) -> String {
    hex_digest(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

/// Runs all cells on the current rayon pool and writes one record per cell.
/// Records come back in cell order.
fn run_cells(spec: &SweepSpec, data: &LoadedDataset, cells: Vec<Cell>) -> Result<Vec<CellRecord>> {
    let records = cells
        .into_par_iter()
        .map(|cell| {
            log::info!("running cell {}", cell.id);
            let result = run_experiment(&cell.config, &data.data, cell.drop_p)?;
            if cell.drop_p == 1.0 {
                let edges: usize = result.runs.iter().map(|r| r.total_edges).sum();
                log::info!("cell {}: p=1.0 trained on graphs with {edges} edges in total", cell.id);
                if edges != 0 {
                    return Err(Error::contract(format!("cell {} kept {edges} edges at p=1.0", cell.id)));
                }
            }
            Ok(CellRecord {
                dataset: data.name.clone(),
                dataset_sha256: data.sha256.clone(),
                model: cell.config.model_kind(),
                drop_p: cell.drop_p,
                seeds: cell.config.seeds.clone(),
                config_sha256: config_hash(&cell.config),
                config: cell.config,
                result,
                id: cell.id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for r in &records {
        write_json(&CellRecord::path(&spec.out_dir, &r.id), r)?;
    }
    Ok(records)
}

fn train_with(spec: &SweepSpec, model: ModelSpec) -> TrainConfig {
    TrainConfig {
        model,
        ..spec.train.clone()
    }
}

fn fmt_p(p: f64) -> String {
    format!("{p:.2}")
}

/// One row of the edge-drop report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEdgeRow {
    pub dataset: String,
    pub p: f64,
    pub model: ModelKind,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct DropEdgeReport {
    pub rows: Vec<DropEdgeRow>,
    pub records: Vec<CellRecord>,
    pub csv: String,
    pub table: String,
}

/// Models × drop probabilities. Writes `dropedge.csv` (long format) and
/// `dropedge_table.txt` (models as rows, probabilities as columns).
pub fn cmd_sweep_dropedge(spec: &SweepSpec) -> Result<DropEdgeReport> {
    spec.validate()?;
    let data = load_dataset(spec)?;
    let mut cells = Vec::new();
    for m in &spec.models {
        for &p in &spec.drop_probabilities {
            cells.push(Cell {
                id: format!("dropedge_{}_p{}", m.kind(), fmt_p(p)),
                config: train_with(spec, m.clone()),
                drop_p: p,
            });
        }
    }
    let records = run_cells(spec, &data, cells)?;
    let rows: Vec<DropEdgeRow> = records
        .iter()
        .map(|r| DropEdgeRow {
            dataset: r.dataset.clone(),
            p: r.drop_p,
            model: r.model,
            mean: r.result.mean,
            std: r.result.std,
        })
        .collect();

    let mut csv = String::from("dataset,p,model,mean,std\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.2},{:.2}",
            r.dataset,
            fmt_p(r.p),
            r.model,
            r.mean,
            r.std
        );
    }
    let mut table = format!(
        "Test accuracy (%) on {} by edge-drop probability, mean ± std over {} seed(s)\n\n",
        data.name,
        spec.train.seeds.len()
    );
    let headers: Vec<String> = spec
        .drop_probabilities
        .iter()
        .map(|p| format!("p={}", fmt_p(*p)))
        .collect();
    let body: Vec<Vec<String>> = spec
        .models
        .iter()
        .map(|m| {
            let mut line = vec![m.kind().to_string()];
            line.extend(
                rows.iter()
                    .filter(|r| r.model == m.kind())
                    .map(|r| format_mean_std(r.mean, r.std)),
            );
            line
        })
        .collect();
    table.push_str(&render_table("model", &headers, &body));

    write_string(&spec.out_dir.join("dropedge.csv"), &csv)?;
    write_string(&spec.out_dir.join("dropedge_table.txt"), &table)?;
    Ok(DropEdgeReport {
        rows,
        records,
        csv,
        table,
    })
}

/// Left-aligned fixed-width text table.
fn render_table(corner: &str, headers: &[String], rows: &[Vec<String>]) -> String {
    let ncols = headers.len() + 1;
    let mut widths = vec![0usize; ncols];
    let mut all = vec![std::iter::once(corner.to_string())
        .chain(headers.iter().cloned())
        .collect::<Vec<_>>()];
    all.extend(rows.iter().cloned());
    for row in &all {
        for (i, c) in row.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let mut s = String::new();
    for row in &all {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<w$}", w = widths[i]))
            .collect();
        let _ = writeln!(s, "{}", cells.join("  ").trim_end());
    }
    s
}

#[derive(Debug, Clone)]
pub struct DropoutReport {
    pub records: Vec<CellRecord>,
    /// `[network dropout][attention dropout]` mean accuracies.
    pub val: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
}

fn with_dropouts(model: &ModelSpec, dropout: f64, attention_dropout: f64) -> Result<ModelSpec> {
    Ok(match model {
        ModelSpec::Exphormer(c) => {
            let mut c = c.clone();
            c.dropout = dropout;
            c.attention_dropout = attention_dropout;
            ModelSpec::Exphormer(c)
        }
        ModelSpec::AttnResidualGcn(c) => {
            let mut c = c.clone();
            c.base.dropout = dropout;
            c.attention_dropout = attention_dropout;
            ModelSpec::AttnResidualGcn(c)
        }
        ModelSpec::ResidualGcn(_) => {
            return Err(Error::config("the dropout grid needs a model with attention"));
        }
    })
}

/// Network dropout × attention dropout for one attention model, at the
/// first configured edge-drop probability. Writes val/test matrices.
pub fn cmd_sweep_dropout(spec: &SweepSpec, kind: ModelKind) -> Result<DropoutReport> {
    spec.validate()?;
    let base = spec.model(kind);
    let p = spec.drop_probabilities[0];
    let mut cells = Vec::new();
    for &d in &spec.dropout_grid {
        for &a in &spec.attention_dropout_grid {
            cells.push(Cell {
                id: format!("dropout_{kind}_d{}_a{}", fmt_p(d), fmt_p(a)),
                config: train_with(spec, with_dropouts(&base, d, a)?),
                drop_p: p,
            });
        }
    }
    let data = load_dataset(spec)?;
    let records = run_cells(spec, &data, cells)?;
    let cols = spec.attention_dropout_grid.len();
    let grid = |f: fn(&ExperimentResult) -> f64| -> Vec<Vec<f64>> {
        records
            .chunks(cols)
            .map(|row| row.iter().map(|r| f(&r.result)).collect())
            .collect()
    };
    let val = grid(|r| r.val_mean);
    let test = grid(|r| r.mean);
    for (name, which) in [("val", true), ("test", false)] {
        let mut csv = String::from("dropout");
        for a in &spec.attention_dropout_grid {
            let _ = write!(csv, ",attn_{}", fmt_p(*a));
        }
        csv.push('\n');
        let mut body = Vec::new();
        for (i, d) in spec.dropout_grid.iter().enumerate() {
            let _ = write!(csv, "{}", fmt_p(*d));
            let mut line = vec![fmt_p(*d)];
            for r in &records[i * cols..(i + 1) * cols] {
                let (m, s) = if which {
                    (r.result.val_mean, r.result.val_std)
                } else {
                    (r.result.mean, r.result.std)
                };
                let _ = write!(csv, ",{m:.2}");
                line.push(format_mean_std(m, s));
            }
            csv.push('\n');
            body.push(line);
        }
        let headers: Vec<String> = spec
            .attention_dropout_grid
            .iter()
            .map(|a| format!("attn {}", fmt_p(*a)))
            .collect();
        let title = format!(
            "{} accuracy (%) for {kind} on {}: rows network dropout, columns attention dropout\n\n",
            if which { "Validation" } else { "Test" },
            data.name
        );
        let table = title + &render_table("dropout", &headers, &body);
        write_string(&spec.out_dir.join(format!("dropout_{name}.csv")), &csv)?;
        write_string(&spec.out_dir.join(format!("dropout_{name}.txt")), &table)?;
    }
    Ok(DropoutReport { records, val, test })
}

/// One row of the layer-count or variant report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub val_mean: f64,
    pub val_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

impl SweepRow {
    fn from_record(label: String, r: &CellRecord) -> Self {
        Self {
            label,
            val_mean: r.result.val_mean,
            val_std: r.result.val_std,
            test_mean: r.result.mean,
            test_std: r.result.std,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub records: Vec<CellRecord>,
    pub csv: String,
}

fn with_layers(model: &ModelSpec, layers: usize) -> ModelSpec {
    match model {
        ModelSpec::Exphormer(c) => ModelSpec::Exphormer(crate::models::ExphormerConfig {
            num_layers: layers,
            ..c.clone()
        }),
        ModelSpec::ResidualGcn(c) => ModelSpec::ResidualGcn(ResidualGcnConfig {
            num_gcn_layers: layers,
            ..c.clone()
        }),
        ModelSpec::AttnResidualGcn(c) => {
            let mut c = c.clone();
            c.base.num_gcn_layers = layers;
            ModelSpec::AttnResidualGcn(c)
        }
    }
}

/// Layer counts for one model. Writes `layers.csv` with val and test columns.
pub fn cmd_sweep_layers(spec: &SweepSpec, kind: ModelKind) -> Result<SweepReport> {
    spec.validate()?;
    let base = spec.model(kind);
    let p = spec.drop_probabilities[0];
    let cells: Vec<Cell> = spec
        .layer_counts
        .iter()
        .map(|&l| Cell {
            id: format!("layers_{kind}_l{l}"),
            config: train_with(spec, with_layers(&base, l)),
            drop_p: p,
        })
        .collect();
    let data = load_dataset(spec)?;
    let records = run_cells(spec, &data, cells)?;
    let rows: Vec<SweepRow> = spec
        .layer_counts
        .iter()
        .zip(&records)
        .map(|(l, r)| SweepRow::from_record(l.to_string(), r))
        .collect();
    let mut csv = String::from("layers,val,test\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{}",
            r.label,
            format_mean_std(r.val_mean, r.val_std),
            format_mean_std(r.test_mean, r.test_std)
        );
    }
    write_string(&spec.out_dir.join("layers.csv"), &csv)?;
    Ok(SweepReport { rows, records, csv })
}

fn placement_name(p: AttnPlacement) -> &'static str {
    match p {
        AttnPlacement::AfterEachGcn => "after_each_gcn",
        AttnPlacement::AfterConcat => "after_concat",
    }
}

/// Plain ResidualGCN baseline followed by each attention variant. Writes
/// `variants.csv` with columns placement, probability, val, test.
pub fn cmd_sweep_variants(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let p = spec.drop_probabilities[0];
    let base = match spec.model(ModelKind::ResidualGcn) {
        ModelSpec::ResidualGcn(c) => c,
        _ => unreachable!("model() returns the requested kind"),
    };
    let attn = match spec.model(ModelKind::AttnResidualGcn) {
        ModelSpec::AttnResidualGcn(c) => c,
        _ => unreachable!("model() returns the requested kind"),
    };
    let mut cells = vec![Cell {
        id: "variants_baseline".into(),
        config: train_with(spec, ModelSpec::ResidualGcn(base.clone())),
        drop_p: p,
    }];
    for v in &spec.variants {
        let cfg = AttnResidualGcnConfig {
            base: base.clone(),
            variant: *v,
            ..attn.clone()
        };
        cells.push(Cell {
            id: format!(
                "variants_{}_q{}",
                placement_name(v.placement),
                fmt_p(v.apply_probability)
            ),
            config: train_with(spec, ModelSpec::AttnResidualGcn(cfg)),
            drop_p: p,
        });
    }
    let data = load_dataset(spec)?;
    let records = run_cells(spec, &data, cells)?;
    let mut rows = vec![SweepRow::from_record("none".into(), &records[0])];
    let mut csv = String::from("placement,probability,val,test\n");
    let _ = writeln!(
        csv,
        "none,,{},{}",
        format_mean_std(rows[0].val_mean, rows[0].val_std),
        format_mean_std(rows[0].test_mean, rows[0].test_std)
    );
    for (v, r) in spec.variants.iter().zip(&records[1..]) {
        let row = SweepRow::from_record(
            format!("{}@{}", placement_name(v.placement), fmt_p(v.apply_probability)),
            r,
        );
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            placement_name(v.placement),
            fmt_p(v.apply_probability),
            format_mean_std(row.val_mean, row.val_std),
            format_mean_std(row.test_mean, row.test_std)
        );
        rows.push(row);
    }
    write_string(&spec.out_dir.join("variants.csv"), &csv)?;
    Ok(SweepReport { rows, records, csv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesSummary {
    pub seed: u64,
    pub rows: usize,
    pub final_train: f64,
    pub final_test: f64,
    pub gap: f64,
}

impl fmt::Display for CurvesSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed {}: {} curve rows; final train {:.2}, final test {:.2}, train-test gap {:.2}",
            self.seed, self.rows, self.final_train, self.final_test, self.gap
        )
    }
}

/// Per-epoch curves of one seed of a recorded run, written to `out` as CSV.
/// Without `seed`, the first seed of the run is used.
pub fn cmd_curves(run: &Path, seed: Option<u64>, out: &Path) -> Result<CurvesSummary> {
    if !run.is_file() {
        return Err(Error::Lookup(format!("no run record at {}", run.display())));
    }
    let record: CellRecord = read_json(run)?;
    let r = match seed {
        Some(s) => record
            .result
            .runs
            .iter()
            .find(|r| r.seed == s)
            .ok_or_else(|| Error::Lookup(format!("seed {s} not in run {}", record.id)))?,
        None => record
            .result
            .runs
            .first()
            .ok_or_else(|| Error::Lookup(format!("run {} has no seeds", record.id)))?,
    };
    let csv = curves_csv(r);
    write_string(out, &csv)?;
    let last = r.final_epoch();
    Ok(CurvesSummary {
        seed: r.seed,
        rows: 3 * r.curves.len(),
        final_train: last.train_accuracy,
        final_test: last.test_accuracy,
        gap: train_test_gap(r),
    })
}
