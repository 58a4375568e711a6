//! Dataset, training and indexing steps shared by the CLI and the service.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sqnet_core::catalog::split_train_eval;
use sqnet_core::imageproc::variants::expand_with_variants;
use sqnet_core::imageproc::{synthesize_color_sketch, GrayVariantParams, SketchSynthParams};
use sqnet_core::seed::{item_seed, stream_seed};
use sqnet_core::{generate_toy_catalog, Catalog, Origin, RasterImage, ToyConfig, ToyDataset};
use sqnet_eval::QueryRecord;
use sqnet_learn::metrics::write_jsonl;
use sqnet_learn::{train_stage, ImageBank, StageConfig, StageOutcome, TrainInputs};
use sqnet_nnet::{checkpoint, Branch, Model, ModelConfig};
use sqnet_retrieval::{build_index, search, Encoder, Method, RetrievalIndex};

use crate::layout::{index_qnet_model, index_shape_model, Layout};

/// Renders the toy catalog into `layout.root`.
pub fn toygen(layout: &Layout, config: &ToyConfig) -> Result<usize> {
    let ds = generate_toy_catalog(config)?;
    ds.write(&layout.root, "manifest.tsv")?;
    Ok(ds.len())
}

/// Adds the hue and gray variants of every original photo to the catalog.
pub fn add_variants(layout: &Layout) -> Result<(usize, usize)> {
    let ds = ToyDataset::read(&layout.manifest()).with_context(|| format!("reading {}", layout.manifest().display()))?;
    if ds.catalog.items.iter().any(|it| it.origin != Origin::Original) {
        bail!("catalog already contains variants");
    }
    let full = expand_with_variants(&ds, &GrayVariantParams::default())?;
    full.write(&layout.root, "manifest.tsv")?;
    Ok((ds.len(), full.len()))
}

/// Writes one synthetic color sketch per catalog photo, named by the photo id.
pub fn sketchify_dataset(layout: &Layout, seed: u64) -> Result<usize> {
    let catalog = Catalog::load(&layout.manifest())?;
    std::fs::create_dir_all(layout.root.join("sketches"))?;
    for it in &catalog.items {
        let photo = RasterImage::load(&layout.root.join(&it.image_path))?;
        let sk = synthesize_color_sketch(&photo, &sketch_params(seed, it.id))?;
        sk.image.save_png(&layout.sketch(it.id))?;
    }
    Ok(catalog.len())
}

pub fn sketch_params(seed: u64, id: u64) -> SketchSynthParams {
    SketchSynthParams::default().with_seed(item_seed(seed, id))
}

/// How the catalog is divided into training, validation and evaluation
/// instances. Persisted by the first training stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub eval_fraction: f64,
    pub validation_fraction: f64,
}

pub struct Splits {
    pub train: Catalog,
    pub validation: Catalog,
    pub eval: Catalog,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            eval_fraction: 0.2,
            validation_fraction: 0.1,
        }
    }

    pub fn apply(&self, catalog: &Catalog) -> Result<Splits> {
        let (rest, eval) = split_train_eval(catalog, self.eval_fraction, stream_seed(self.seed, "eval"))?;
        let (train, validation) = split_train_eval(&rest, self.validation_fraction, stream_seed(self.seed, "validation"))?;
        Ok(Splits { train, validation, eval })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Loads the photo and sketch of every item in `catalogs` at `side`.
pub fn load_bank(layout: &Layout, catalogs: &[&Catalog], side: usize) -> Result<ImageBank> {
    let mut bank = ImageBank::new(side);
    for cat in catalogs {
        for it in &cat.items {
            let photo = RasterImage::load(&layout.root.join(&it.image_path))?;
            bank.insert(Branch::Photo, it.id, &photo)?;
            let sketch = RasterImage::load(&layout.sketch(it.id))
                .with_context(|| format!("sketch for item {} (run sketchify first)", it.id))?;
            bank.insert(Branch::Sketch, it.id, &sketch)?;
        }
    }
    Ok(bank)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainArgs {
    pub stage: u8,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub samples_per_epoch: Option<usize>,
    pub embed_dim: usize,
    pub input_side: usize,
}

impl TrainArgs {
    pub fn stage_config(&self) -> StageConfig {
        let mut c = StageConfig::defaults(self.stage, self.seed);
        c.loss.alpha = self.alpha;
        c.loss.lambda = self.lambda;
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(s) = self.samples_per_epoch {
            c.samples_per_epoch = s;
        }
        c
    }
}

/// Runs one stage from the previous stage's checkpoint (stage 1 starts from
/// a fresh model) and writes the checkpoint and its JSONL log.
pub fn train(layout: &Layout, args: &TrainArgs) -> Result<StageOutcome> {
    let catalog = Catalog::load(&layout.manifest())?;
    let split = if args.stage == 1 || !layout.split().exists() {
        let s = SplitSpec::new(args.seed);
        std::fs::create_dir_all(&layout.root)?;
        s.save(&layout.split())?;
        s
    } else {
        SplitSpec::load(&layout.split())?
    };
    let splits = split.apply(&catalog)?;
    let start = match args.stage {
        1 => Model::build(ModelConfig::toy(
            args.embed_dim,
            catalog.class_count as usize,
            args.input_side,
            args.seed,
        ))?,
        2 | 3 => {
            let prev = layout.checkpoint(args.stage - 1, None);
            checkpoint::load(&prev).with_context(|| format!("loading {}", prev.display()))?
        }
        s => bail!("stage must be 1, 2 or 3, got {s}"),
    };
    let bank = load_bank(layout, &[&splits.train, &splits.validation], start.config().input_side)?;
    let inputs = TrainInputs {
        train: &splits.train,
        validation: &splits.validation,
        images: &bank,
    };
    let out = train_stage(&start, &args.stage_config(), inputs)?;
    std::fs::create_dir_all(layout.models())?;
    let alpha = (args.stage == 3).then_some(args.alpha);
    checkpoint::save(&out.model, &layout.checkpoint(args.stage, alpha))?;
    write_jsonl(&layout.training_log(args.stage, alpha), &out.metrics)?;
    if args.stage == 3 {
        checkpoint::save(&out.model, &layout.checkpoint(3, None))?;
    }
    Ok(out)
}

/// Which photos go into the index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexScope {
    Eval,
    All,
}

pub fn scoped_catalog(layout: &Layout, scope: IndexScope) -> Result<Catalog> {
    let catalog = Catalog::load(&layout.manifest())?;
    match scope {
        IndexScope::All => Ok(catalog),
        IndexScope::Eval => {
            if catalog.is_empty() {
                return Ok(catalog);
            }
            let split = SplitSpec::load(&layout.split()).context("no split recorded (train stage 1 first, or index --all)")?;
            Ok(split.apply(&catalog)?.eval)
        }
    }
}

/// Builds an index over `catalog` and saves it, together with the models
/// that produced it, into `dir`.
pub fn build_and_save_index(
    layout: &Layout,
    catalog: &Catalog,
    qnet: &Model,
    shape: Option<&Model>,
    dir: &Path,
) -> Result<RetrievalIndex> {
    let encoder = Encoder::new(qnet, shape);
    let index = build_index(
        catalog,
        |it| RasterImage::load(&layout.root.join(&it.image_path)).map_err(|e| e.to_string()),
        &encoder,
    )?;
    for s in &index.manifest().skipped {
        log::warn!("item {} not indexed: {}", s.id, s.reason);
    }
    index.save(dir)?;
    checkpoint::save(qnet, &index_qnet_model(dir))?;
    let shape_path = index_shape_model(dir);
    match shape {
        Some(m) => checkpoint::save(m, &shape_path)?,
        None if shape_path.exists() => std::fs::remove_file(&shape_path)?,
        None => {}
    }
    Ok(index)
}

/// A saved index with the models needed to encode queries against it.
pub struct LoadedIndex {
    pub index: RetrievalIndex,
    pub qnet: Option<Model>,
    pub shape: Option<Model>,
}

impl LoadedIndex {
    pub fn load(dir: &Path) -> Result<Self> {
        let index = RetrievalIndex::load(dir).with_context(|| format!("loading index from {}", dir.display()))?;
        let qpath = index_qnet_model(dir);
        // an index over no photos answers every query without a model
        let qnet = if qpath.exists() || !index.is_empty() {
            Some(checkpoint::load(&qpath).with_context(|| format!("loading {}", qpath.display()))?)
        } else {
            None
        };
        let spath = index_shape_model(dir);
        let shape = if spath.exists() { Some(checkpoint::load(&spath)?) } else { None };
        if let Some(q) = &qnet {
            if q.config().embed_dim != index.embed_dim() {
                bail!(
                    "model embeds into {} dimensions but the index holds {}",
                    q.config().embed_dim,
                    index.embed_dim()
                );
            }
        }
        Ok(Self { index, qnet, shape })
    }

    pub fn encoder(&self) -> Option<Encoder<'_>> {
        let mut e = Encoder::new(self.qnet.as_ref()?, self.shape.as_ref());
        e.hist_side = self.index.manifest().hist_side;
        Some(e)
    }

    /// Ranked results for one raw sketch image.
    pub fn query(&self, sketch: &RasterImage, method: Method, top_k: usize) -> Result<Vec<QueryHit>> {
        method.validate()?;
        let Some(encoder) = self.encoder() else {
            return Ok(Vec::new());
        };
        let features = encoder.encode_sketch(sketch)?;
        let ranked = search(&self.index, &features, method, top_k)?;
        Ok(ranked
            .into_iter()
            .map(|r| QueryHit {
                id: r.id,
                score: r.score,
                rank: r.rank,
                thumbnail_url: thumbnail_url(r.id),
                class_label: self.index.item(r.id).map_or(0, |it| it.class_label),
            })
            .collect())
    }
}

/// One result row as returned by `query` and `POST /api/query`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub id: u64,
    pub score: f64,
    pub rank: usize,
    pub thumbnail_url: String,
    pub class_label: u32,
}

pub fn thumbnail_url(id: u64) -> String {
    format!("/api/items/{id}/thumbnail")
}

/// Evaluation queries: every indexed photo whose sketch exists is queried
/// by that sketch.
pub fn eval_queries(layout: &Layout, index: &RetrievalIndex) -> Result<(Vec<QueryRecord>, Vec<RasterImage>)> {
    let mut records = Vec::new();
    let mut images = Vec::new();
    for it in index.items() {
        let path = layout.sketch(it.id);
        if !path.exists() {
            continue;
        }
        images.push(RasterImage::load(&path)?);
        records.push(QueryRecord {
            sketch_id: it.id,
            groundtruth_id: it.id,
            class_label: it.class_label,
        });
    }
    Ok((records, images))
}
