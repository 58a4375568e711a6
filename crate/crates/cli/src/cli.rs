//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sqnet_core::imageproc::{augment, synthesize_color_sketch, AugmentConfig};
use sqnet_core::{RasterImage, ToyConfig};
use sqnet_eval::{evaluate, sweep_from_reports, sweep_fusion, EvalReport, SweepParam, ALPHA_GRID, GAMMA_GRID, OMEGA_GRID};
use sqnet_nnet::checkpoint;
use sqnet_retrieval::{Encoder, Method, RetrievalIndex};

use crate::layout::{Layout, DATA_DIR_ENV, DEFAULT_DATA_DIR};
use crate::pipeline::{self, IndexScope, LoadedIndex, TrainArgs};
use crate::service::{self, QueryDefaults, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "sqnet", version, about = "Color sketch-based photo retrieval")]
pub struct Cli {
    /// Data directory holding the catalog, sketches, models and index.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = DEFAULT_DATA_DIR)]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the synthetic shape catalog.
    Toygen(ToygenArgs),
    /// Add hue and gray variants of every original photo.
    Variants,
    /// Synthesize color sketches for the catalog, or for one image.
    Sketchify(SketchifyArgs),
    /// Apply one random augmentation to an image.
    Augment(AugmentArgs),
    /// Run one training stage.
    Train(TrainCmd),
    /// Embed photos into a searchable index.
    Index(IndexArgs),
    /// Rank indexed photos for one sketch.
    Query(QueryArgs),
    /// Score a method on the evaluation queries.
    Eval(EvalArgs),
    /// Evaluate a method over a parameter grid.
    Sweep(SweepArgs),
    /// Serve the HTTP query API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ToygenArgs {
    #[arg(long, default_value_t = 8)]
    pub classes: u32,
    #[arg(long, default_value_t = 5)]
    pub colors: u32,
    #[arg(long, default_value_t = 200)]
    pub per_class: u32,
    #[arg(long, default_value_t = 64)]
    pub canvas: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory; defaults to the data directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SketchifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Single input PNG instead of the whole catalog.
    #[arg(long, requires = "output")]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub stage: u8,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub samples_per_epoch: Option<usize>,
    /// Only used by stage 1; later stages inherit the architecture.
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 24)]
    pub input_side: usize,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Learned model; defaults to the latest stage-3 checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Shape-only model for the baselines; defaults to the stage-2 checkpoint.
    #[arg(long)]
    pub shape_model: Option<PathBuf>,
    #[arg(long)]
    pub no_baselines: bool,
    /// Index every photo instead of the held-out evaluation photos.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Qnet,
    Baseline1,
    Baseline2,
}

impl MethodName {
    fn as_str(self) -> &'static str {
        match self {
            MethodName::Qnet => "qnet",
            MethodName::Baseline1 => "baseline1",
            MethodName::Baseline2 => "baseline2",
        }
    }
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodName::Qnet)]
    pub method: MethodName,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
}

impl MethodArgs {
    fn method(&self) -> Result<Method> {
        Ok(Method::parse(self.method.as_str(), self.gamma, self.omega)?)
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Sketch PNG.
    #[arg(long)]
    pub sketch: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 20)]
    pub topk: usize,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepName {
    Gamma,
    Omega,
    Alpha,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepName,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub topk: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long, default_value_t = 96)]
    pub thumbnail_size: u32,
}

/// Parses `argv` and runs the subcommand. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    let layout = Layout::new(cli.data_dir);
    let index_dir = |p: Option<PathBuf>| p.unwrap_or_else(|| layout.index());
    match cli.command {
        Command::Toygen(a) => {
            let out = Layout::new(a.out.unwrap_or_else(|| layout.root.clone()));
            let cfg = ToyConfig {
                shape_classes: a.classes,
                base_colors: a.colors,
                items_per_class: a.per_class,
                canvas: a.canvas,
                seed: a.seed,
            };
            let n = pipeline::toygen(&out, &cfg)?;
            eprintln!("wrote {n} photos and {}", out.manifest().display());
        }
        Command::Variants => {
            let (before, after) = pipeline::add_variants(&layout)?;
            eprintln!("catalog grew from {before} to {after} photos");
        }
        Command::Sketchify(a) => match (a.input, a.output) {
            (Some(input), Some(output)) => {
                let img = RasterImage::load(&input)?;
                let sk = synthesize_color_sketch(&img, &pipeline::sketch_params(a.seed, 0))?;
                sk.image.save_png(&output)?;
                eprintln!("sketch with {} colors written to {}", sk.k, output.display());
            }
            _ => {
                let n = pipeline::sketchify_dataset(&layout, a.seed)?;
                eprintln!("wrote {n} sketches");
            }
        },
        Command::Augment(a) => {
            let img = RasterImage::load(&a.input)?;
            let (out, draw) = augment(&img, &AugmentConfig::default(), a.seed)?;
            out.save_png(&a.output)?;
            log::info!("augmentation {draw:?}");
        }
        Command::Train(a) => {
            let args = TrainArgs {
                stage: a.stage,
                alpha: a.alpha,
                lambda: a.lambda,
                seed: a.seed,
                epochs: a.epochs,
                samples_per_epoch: a.samples_per_epoch,
                embed_dim: a.embed_dim,
                input_side: a.input_side,
            };
            let out = pipeline::train(&layout, &args)?;
            let last = out.metrics.last().context("training produced no epochs")?;
            eprintln!(
                "stage {} done: {} epochs, kept epoch {}, last train loss {:.4}",
                a.stage,
                out.metrics.len(),
                out.best_epoch,
                last.train_loss
            );
        }
        Command::Index(a) => {
            let model_path = a.model.unwrap_or_else(|| layout.checkpoint(3, None));
            let qnet = checkpoint::load(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
            let shape = if a.no_baselines {
                None
            } else {
                let p = a.shape_model.unwrap_or_else(|| layout.checkpoint(2, None));
                Some(checkpoint::load(&p).with_context(|| format!("loading shape model {}", p.display()))?)
            };
            let scope = if a.all { IndexScope::All } else { IndexScope::Eval };
            let catalog = pipeline::scoped_catalog(&layout, scope)?;
            let dir = index_dir(a.index);
            let idx = pipeline::build_and_save_index(&layout, &catalog, &qnet, shape.as_ref(), &dir)?;
            eprintln!(
                "indexed {} photos ({} skipped) into {}",
                idx.len(),
                idx.manifest().skipped.len(),
                dir.display()
            );
        }
        Command::Query(a) => {
            let loaded = LoadedIndex::load(&index_dir(a.index))?;
            let method = a.method.method()?;
            let sketch = RasterImage::load(&a.sketch)?;
            print_json(&loaded.query(&sketch, method, a.topk)?)?;
        }
        Command::Eval(a) => {
            let loaded = LoadedIndex::load(&index_dir(a.index))?;
            let report = eval_loaded(&layout, &loaded, a.method.method()?)?;
            let (json, _) = report.write(&layout.reports())?;
            print_json(&summary(&report))?;
            eprintln!("report written to {}", json.display());
        }
        Command::Sweep(a) => {
            let table = match a.param {
                SweepName::Gamma | SweepName::Omega => {
                    let loaded = LoadedIndex::load(&index_dir(a.index))?;
                    let (queries, features) = encode_eval_queries(&layout, &loaded)?;
                    let (param, grid) = match a.param {
                        SweepName::Gamma => (SweepParam::Gamma, &GAMMA_GRID[..]),
                        _ => (SweepParam::Omega, &OMEGA_GRID[..]),
                    };
                    sweep_fusion(&loaded.index, &queries, &features, param, grid)?
                }
                SweepName::Alpha => {
                    let catalog = pipeline::scoped_catalog(&layout, IndexScope::Eval)?;
                    let entries = ALPHA_GRID
                        .iter()
                        .map(|&alpha| (alpha, alpha_report(&layout, &catalog, alpha).map_err(|e| format!("{e:#}"))))
                        .collect();
                    sweep_from_reports(SweepParam::Alpha, entries)?
                }
            };
            let (jsonl, _) = table.write(&layout.reports())?;
            for r in &table.rows {
                print_json(r)?;
            }
            eprintln!("sweep written to {}", jsonl.display());
        }
        Command::Serve(a) => {
            let config = ServiceConfig {
                host: a.host,
                port: a.port,
                index_dir: index_dir(a.index),
                data_root: layout.root.clone(),
                defaults: QueryDefaults {
                    method: "qnet".into(),
                    gamma: a.gamma,
                    omega: a.omega,
                    top_k: a.topk,
                },
                thumbnail_size: a.thumbnail_size,
            };
            service::serve(&config)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'a str,
    gamma: Option<f64>,
    omega: Option<f64>,
    index_size: usize,
    queries: usize,
    mrr: f64,
    map: f64,
    n_at_half: Option<usize>,
}

fn summary(r: &EvalReport) -> Summary<'_> {
    Summary {
        method: &r.method,
        gamma: r.gamma,
        omega: r.omega,
        index_size: r.index_size,
        queries: r.ranks.len(),
        mrr: r.mrr,
        map: r.map,
        n_at_half: r.n_at_half,
    }
}

fn encode_queries(
    layout: &Layout,
    index: &RetrievalIndex,
    encoder: &Encoder<'_>,
) -> Result<(Vec<sqnet_eval::QueryRecord>, Vec<sqnet_retrieval::QueryFeatures>)> {
    let (queries, images) = pipeline::eval_queries(layout, index)?;
    if queries.is_empty() {
        bail!("no indexed photo has a sketch (run sketchify first)");
    }
    let refs: Vec<&RasterImage> = images.iter().collect();
    Ok((queries, encoder.encode_sketches(&refs)?))
}

fn encode_eval_queries(
    layout: &Layout,
    loaded: &LoadedIndex,
) -> Result<(Vec<sqnet_eval::QueryRecord>, Vec<sqnet_retrieval::QueryFeatures>)> {
    let encoder = loaded.encoder().context("the index is empty")?;
    encode_queries(layout, &loaded.index, &encoder)
}

fn eval_loaded(layout: &Layout, loaded: &LoadedIndex, method: Method) -> Result<EvalReport> {
    let (queries, features) = encode_eval_queries(layout, loaded)?;
    Ok(evaluate(&loaded.index, &queries, &features, method)?)
}

/// Indexes the evaluation photos with the stage-3 model trained at `alpha`
/// and scores it.
fn alpha_report(layout: &Layout, catalog: &sqnet_core::Catalog, alpha: f64) -> Result<EvalReport> {
    let path = layout.checkpoint(3, Some(alpha));
    let model = checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let encoder = Encoder::new(&model, None);
    let index = sqnet_retrieval::build_index(
        catalog,
        |it| RasterImage::load(&layout.root.join(&it.image_path)).map_err(|e| e.to_string()),
        &encoder,
    )?;
    let (queries, features) = encode_queries(layout, &index, &encoder)?;
    Ok(evaluate(&index, &queries, &features, Method::Qnet)?)
}
