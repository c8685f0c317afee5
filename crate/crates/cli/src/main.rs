//! `connectome-bench`: generate synthetic connectome datasets and run the
//! edge-drop, dropout, layer and attention-variant sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use connectome_bench::data::{LabelMode, SyntheticSpec};
use connectome_bench::experiment::{
    cmd_curves, cmd_gen_data, cmd_sweep_dropedge, cmd_sweep_dropout, cmd_sweep_layers, cmd_sweep_variants,
    DatasetSource, SweepSpec,
};
use connectome_bench::models::ModelKind;
use connectome_bench::training::read_json;
use connectome_bench::Error;

#[derive(Parser, Debug)]
#[command(name = "connectome-bench", version, about)]
struct Cli {
    /// Worker threads for parallel runs (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as JSON Lines.
    GenData(GenArgs),
    /// Models × edge-drop probabilities; mean ± std test accuracy.
    SweepDropedge(SweepArgs),
    /// Network dropout × attention dropout grid for one attention model.
    SweepDropout(SweepArgs),
    /// Validation and test accuracy by layer count.
    SweepLayers(SweepArgs),
    /// ResidualGCN with attention blocks at several placements/probabilities.
    SweepVariants(SweepArgs),
    /// Per-epoch accuracy curves from a recorded run.
    Curves(CurvesArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
    /// JSON synthetic spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// feature-only, structure-only or mixed.
    #[arg(long)]
    mode: Option<LabelMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Feature width (defaults to the node count).
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Dataset file written by `gen-data`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// residual-gcn, exphormer or attn-residual-gcn; repeat or comma-separate
    /// for the edge-drop sweep.
    #[arg(long, value_delimiter = ',')]
    model: Vec<ModelKind>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON sweep spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    /// Run record (`<out>/runs/<cell>.json`).
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn synthetic_spec(a: &GenArgs) -> Result<SyntheticSpec, Error> {
    let mut s = match &a.config {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::new(100, 50, 2, LabelMode::FeatureOnly, 0),
    };
    if let Some(v) = a.graphs {
        s.num_graphs = v;
    }
    if let Some(v) = a.nodes {
        s.n = v;
    }
    if let Some(v) = a.classes {
        s.num_classes = v;
    }
    if let Some(v) = a.mode {
        s.label_mode = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.threshold {
        s.threshold = v;
    }
    if let Some(v) = a.noise {
        s.noise_scale = v;
    }
    if a.dim.is_some() {
        s.d = a.dim;
    }
    Ok(s)
}

fn sweep_spec(a: &SweepArgs, multi_model: bool) -> Result<SweepSpec, Error> {
    let mut s: SweepSpec = match &a.config {
        Some(p) => read_json(p)?,
        None => SweepSpec::default(),
    };
    if let Some(d) = &a.dataset {
        s.dataset = Some(DatasetSource::Path(d.clone()));
    }
    if multi_model && !a.model.is_empty() {
        s.models = a.model.iter().map(|&k| s.model(k)).collect();
    }
    if !a.seeds.is_empty() {
        s.train.seeds = a.seeds.clone();
    }
    if let Some(e) = a.epochs {
        s.train.total_epochs = e;
    }
    if let Some(o) = &a.out {
        s.out_dir = o.clone();
    }
    Ok(s)
}

/// The single model a grid varies: `--model`, else `default`.
fn grid_model(a: &SweepArgs, default: ModelKind) -> Result<ModelKind, Error> {
    match a.model.as_slice() {
        [] => Ok(default),
        [k] => Ok(*k),
        _ => Err(Error::Config("this sweep takes a single --model".into())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    match cli.command {
        Command::GenData(a) => {
            let summary = cmd_gen_data(&synthetic_spec(&a)?, &a.out)?;
            println!("{summary}");
        }
        Command::SweepDropedge(a) => {
            let report = cmd_sweep_dropedge(&sweep_spec(&a, true)?)?;
            print!("{}", report.table);
        }
        Command::SweepDropout(a) => {
            let kind = grid_model(&a, ModelKind::Exphormer)?;
            let mut spec = sweep_spec(&a, false)?;
            spec.models = vec![spec.model(kind)];
            let report = cmd_sweep_dropout(&spec, kind)?;
            println!("test accuracy (rows network dropout, columns attention dropout):");
            for row in &report.test {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
                println!("{}", cells.join("  "));
            }
        }
        Command::SweepLayers(a) => {
            let kind = grid_model(&a, ModelKind::Exphormer)?;
            let mut spec = sweep_spec(&a, false)?;
            spec.models = vec![spec.model(kind)];
            print!("{}", cmd_sweep_layers(&spec, kind)?.csv);
        }
        Command::SweepVariants(a) => {
            let mut spec = sweep_spec(&a, false)?;
            spec.models = vec![
                spec.model(ModelKind::ResidualGcn),
                spec.model(ModelKind::AttnResidualGcn),
            ];
            print!("{}", cmd_sweep_variants(&spec)?.csv);
        }
        Command::Curves(a) => {
            println!("{}", cmd_curves(&a.run, a.seed, &a.out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_defaults() {
        let a = SweepArgs {
            dataset: Some(PathBuf::from("d.jsonl")),
            model: vec![ModelKind::Exphormer],
            seeds: vec![4],
            epochs: Some(12),
            out: None,
            config: None,
        };
        let s = sweep_spec(&a, true).unwrap();
        assert_eq!(s.train.seeds, vec![4]);
        assert_eq!(s.train.total_epochs, 12);
        assert_eq!(s.models.len(), 1);
        assert_eq!(s.models[0].kind(), ModelKind::Exphormer);
        assert_eq!(s.dataset, Some(DatasetSource::Path(PathBuf::from("d.jsonl"))));
    }

    #[test]
    fn grid_model_rejects_several() {
        let a = SweepArgs {
            dataset: None,
            model: vec![ModelKind::Exphormer, ModelKind::ResidualGcn],
            seeds: vec![],
            epochs: None,
            out: None,
            config: None,
        };
        assert!(grid_model(&a, ModelKind::Exphormer).is_err());
    }
}
