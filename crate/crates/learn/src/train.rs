//! Three-stage training.
//!
//! Stage 1 trains each branch alone on classification through a temporary
//! linear head. Stage 2 trains both branches and the shared layers on
//! sketch/photo pairs. Stage 3 trains on quadruplets and keeps the epoch
//! with the lowest validation loss.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqnet_core::imageproc::AugmentConfig;
use sqnet_core::seed::{item_seed, stream_seed};
use sqnet_core::Catalog;
use sqnet_nnet::optim::check_loss;
use sqnet_nnet::{Adam, AdamConfig, Branch, Graph, Model, ParamStore, Tensor};

use crate::data::ImageBank;
use crate::error::{LearnError, Result};
use crate::losses::{stage2_objective, stage3_objective, PairOutputs, QuadOutputs, QuadrupletLossParams, CONTRASTIVE_MARGIN};
use crate::metrics::EpochMetrics;
use crate::sampler::{Quadruplet, QuadrupletSampler};

#[derive(Clone, Debug, PartialEq)]
pub struct StageConfig {
    pub stage: u8,
    pub epochs: usize,
    pub beta_init: f64,
    pub beta_increment: f64,
    pub loss: QuadrupletLossParams,
    pub contrastive_margin: f64,
    pub batch_size: usize,
    /// Training samples drawn per epoch (per branch in stage 1); 0 uses
    /// every available sample.
    pub samples_per_epoch: usize,
    /// Validation quadruplets in stage 3; 0 uses one per eligible item.
    pub validation_samples: usize,
    pub optimizer: AdamConfig,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl StageConfig {
    pub fn defaults(stage: u8, seed: u64) -> Self {
        Self {
            stage,
            epochs: match stage {
                3 => 25,
                _ => 10,
            },
            beta_init: 2.0,
            beta_increment: if stage == 3 { 0.5 } else { 0.0 },
            loss: QuadrupletLossParams::default(),
            contrastive_margin: CONTRASTIVE_MARGIN,
            batch_size: 16,
            samples_per_epoch: 1024,
            validation_samples: 512,
            optimizer: AdamConfig::default(),
            augment: AugmentConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LearnError::Config(m));
        if !(1..=3).contains(&self.stage) {
            return bad(format!("stage must be 1, 2 or 3, got {}", self.stage));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.beta_init > 0.0) || self.beta_increment < 0.0 {
            return bad(format!("invalid beta {} + {}/epoch", self.beta_init, self.beta_increment));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        self.loss.validate()?;
        self.augment.validate()?;
        Ok(())
    }
}

/// beta_init + epoch * beta_increment.
pub fn beta_schedule(epoch: usize, config: &StageConfig) -> f64 {
    config.beta_init + epoch as f64 * config.beta_increment
}

/// Catalogs and images a stage draws from. Both catalogs list photos;
/// sketches are looked up in the bank under the photo's id.
#[derive(Clone, Copy, Debug)]
pub struct TrainInputs<'a> {
    pub train: &'a Catalog,
    pub validation: &'a Catalog,
    pub images: &'a ImageBank,
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

pub fn train_stage(model: &Model, config: &StageConfig, inputs: TrainInputs<'_>) -> Result<StageOutcome> {
    config.validate()?;
    if inputs.images.side() != model.config().input_side {
        return Err(LearnError::Config(format!(
            "image side {} does not match model input side {}",
            inputs.images.side(),
            model.config().input_side
        )));
    }
    match config.stage {
        1 => stage1(model, config, inputs),
        2 => stage2(model, config, inputs),
        _ => stage3(model, config, inputs),
    }
}

fn epoch_rng(config: &StageConfig, label: &str, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &format!("stage{}.{label}.{epoch}", config.stage)))
}

fn take_epoch(ids: &[u64], cap: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut v = ids.to_vec();
    v.shuffle(rng);
    if cap > 0 {
        v.truncate(cap);
    }
    v
}

fn labels_for(catalog: &Catalog, ids: &[u64]) -> Result<Vec<usize>> {
    let idx = catalog.index_by_id();
    ids.iter()
        .map(|id| {
            idx.get(id)
                .map(|&i| catalog.items[i].class_label as usize)
                .ok_or_else(|| LearnError::Config(format!("item {id} is not in the catalog")))
        })
        .collect()
}

fn wrap(stage: u8, epoch: usize) -> impl Fn(sqnet_nnet::NnetError) -> LearnError {
    move |source| LearnError::Training { stage, epoch, source }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Running means of named loss terms over an epoch.
#[derive(Default)]
struct Accum {
    sums: BTreeMap<String, f64>,
    batches: usize,
}

impl Accum {
    fn add(&mut self, name: &str, v: f64) {
        *self.sums.entry(name.to_string()).or_insert(0.0) += v;
    }

    fn means(&self) -> BTreeMap<String, f64> {
        let n = self.batches.max(1) as f64;
        self.sums.iter().map(|(k, v)| (k.clone(), v / n)).collect()
    }
}

fn stage1(model: &Model, config: &StageConfig, inputs: TrainInputs<'_>) -> Result<StageOutcome> {
    let mut model = model.clone();
    let mc = model.config().clone();
    let ids: Vec<u64> = inputs.train.items.iter().map(|it| it.id).collect();
    let labels = labels_for(inputs.train, &ids)?;
    let label_of: BTreeMap<u64, usize> = ids.iter().copied().zip(labels).collect();
    let mut metrics = Vec::new();
    for branch in [Branch::Sketch, Branch::Photo] {
        let mut head = ParamStore::new();
        let hname = format!("stage1.{}.head", branch.prefix());
        head.init_he(mc.seed, &format!("{hname}.w"), vec![mc.feature_len(), mc.class_count]);
        head.init_he(mc.seed, &format!("{hname}.b"), vec![mc.class_count]);
        let mut opt = Adam::new(config.optimizer, model.params());
        let mut head_opt = Adam::new(config.optimizer, &head);
        for epoch in 0..config.epochs {
            let err = wrap(1, epoch);
            let mut rng = epoch_rng(config, branch.prefix(), epoch);
            let order = take_epoch(&ids, config.samples_per_epoch, &mut rng);
            let mut acc = Accum::default();
            let (mut correct, mut seen) = (0usize, 0usize);
            for batch in order.chunks(config.batch_size) {
                let y: Vec<usize> = batch.iter().map(|id| label_of[id]).collect();
                let mut g = Graph::new();
                let vars = model.bind(&mut g);
                let hv = head.bind(&mut g);
                let x = g.leaf(inputs.images.tensor(branch, batch)?);
                let f = model.branch_features(&mut g, &vars, branch, x).map_err(&err)?;
                let logits = g.dense(f, hv.var(0), hv.var(1)).map_err(&err)?;
                let ce = g.softmax_cross_entropy(logits, &y).map_err(&err)?;
                let loss = g.mean(ce);
                let lv = g.value(loss).item();
                check_loss(lv, opt.step_count() + 1).map_err(&err)?;
                let lt = g.value(logits);
                for (r, &label) in y.iter().enumerate() {
                    correct += usize::from(argmax(lt.row(r)) == label);
                }
                seen += y.len();
                let grads = g.backward(loss);
                opt.apply(model.params_mut(), &vars, &grads).map_err(&err)?;
                head_opt.apply(&mut head, &hv, &grads).map_err(&err)?;
                acc.add("ce", lv);
                acc.batches += 1;
            }
            let terms = acc.means();
            metrics.push(EpochMetrics {
                stage: 1,
                epoch,
                branch: Some(branch.prefix().to_string()),
                beta: None,
                train_loss: terms["ce"],
                terms,
                val_loss: None,
                accuracy: Some(correct as f64 / seen.max(1) as f64),
            });
        }
    }
    let best_epoch = config.epochs - 1;
    Ok(StageOutcome {
        model,
        metrics,
        best_epoch,
    })
}

/// Sketch/photo pairs for one stage-2 epoch: half same-class, half
/// different-class, the photo uniform within its stratum.
pub fn sample_pairs(catalog: &Catalog, anchors: &[u64], rng: &mut ChaCha8Rng) -> Result<Vec<(u64, u64, bool)>> {
    let mut by_class: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for it in &catalog.items {
        by_class.entry(it.class_label).or_default().push(it.id);
    }
    if by_class.len() < 2 {
        return Err(LearnError::SingleClass);
    }
    let idx = catalog.index_by_id();
    let mut out = Vec::with_capacity(anchors.len());
    for &a in anchors {
        let class = catalog.items[*idx.get(&a).ok_or(LearnError::MissingImage(a))?].class_label;
        let same = rng.random_bool(0.5);
        let photo = if same {
            let pool = &by_class[&class];
            pool[rng.random_range(0..pool.len())]
        } else {
            let others: usize = by_class.iter().filter(|(c, _)| **c != class).map(|(_, v)| v.len()).sum();
            let mut k = rng.random_range(0..others);
            let mut pick = 0;
            for (c, v) in &by_class {
                if *c == class {
                    continue;
                }
                if k < v.len() {
                    pick = v[k];
                    break;
                }
                k -= v.len();
            }
            pick
        };
        out.push((a, photo, same));
    }
    Ok(out)
}

fn stage2(model: &Model, config: &StageConfig, inputs: TrainInputs<'_>) -> Result<StageOutcome> {
    let mut model = model.clone();
    let ids: Vec<u64> = inputs.train.items.iter().map(|it| it.id).collect();
    let label_of: BTreeMap<u64, usize> = ids.iter().copied().zip(labels_for(inputs.train, &ids)?).collect();
    let mut opt = Adam::new(config.optimizer, model.params());
    let mut metrics = Vec::new();
    let beta = config.beta_init;
    for epoch in 0..config.epochs {
        let err = wrap(2, epoch);
        let mut rng = epoch_rng(config, "pairs", epoch);
        let anchors = take_epoch(&ids, config.samples_per_epoch, &mut rng);
        let pairs = sample_pairs(inputs.train, &anchors, &mut rng)?;
        let mut acc = Accum::default();
        for batch in pairs.chunks(config.batch_size) {
            let sk: Vec<u64> = batch.iter().map(|p| p.0).collect();
            let ph: Vec<u64> = batch.iter().map(|p| p.1).collect();
            let same: Vec<bool> = batch.iter().map(|p| p.2).collect();
            let ysk: Vec<usize> = sk.iter().map(|id| label_of[id]).collect();
            let yph: Vec<usize> = ph.iter().map(|id| label_of[id]).collect();
            let mut g = Graph::new();
            let vars = model.bind(&mut g);
            let xs = g.leaf(inputs.images.tensor(Branch::Sketch, &sk)?);
            let xp = g.leaf(inputs.images.tensor(Branch::Photo, &ph)?);
            let (es, ls) = model.forward_graph(&mut g, &vars, Branch::Sketch, xs).map_err(&err)?;
            let (ep, lp) = model.forward_graph(&mut g, &vars, Branch::Photo, xp).map_err(&err)?;
            let out = PairOutputs {
                sketch_embedding: es,
                sketch_logits: ls,
                photo_embedding: ep,
                photo_logits: lp,
                sketch_labels: &ysk,
                photo_labels: &yph,
                same_class: &same,
            };
            let t = stage2_objective(&mut g, &out, beta, config.contrastive_margin).map_err(&err)?;
            let lv = g.value(t.total).item();
            check_loss(lv, opt.step_count() + 1).map_err(&err)?;
            let grads = g.backward(t.total);
            opt.apply(model.params_mut(), &vars, &grads).map_err(&err)?;
            acc.add("total", lv);
            acc.add("ce_sketch", g.value(t.ce_sketch).item());
            acc.add("ce_photo", g.value(t.ce_photo).item());
            acc.add("contrastive", g.value(t.contrastive).item());
            acc.batches += 1;
        }
        let terms = acc.means();
        metrics.push(EpochMetrics {
            stage: 2,
            epoch,
            branch: None,
            beta: Some(beta),
            train_loss: terms["total"],
            terms,
            val_loss: None,
            accuracy: None,
        });
    }
    Ok(StageOutcome {
        model,
        metrics,
        best_epoch: config.epochs - 1,
    })
}

/// Per-batch evaluation of the stage-3 objective.
struct QuadBatch {
    total: f64,
    terms: [(&'static str, f64); 7],
}

#[allow(clippy::too_many_arguments)]
fn quad_step(
    model: &mut Model,
    opt: Option<&mut Adam>,
    quads: &[Quadruplet],
    anchors: Tensor,
    inputs: &TrainInputs<'_>,
    label_of: &BTreeMap<u64, usize>,
    config: &StageConfig,
    beta: f64,
    epoch: usize,
) -> Result<QuadBatch> {
    let err = wrap(3, epoch);
    let ids = |f: fn(&Quadruplet) -> u64| quads.iter().map(f).collect::<Vec<u64>>();
    let members = [
        ids(|q| q.anchor_sketch),
        ids(|q| q.positive),
        ids(|q| q.positive_negative),
        ids(|q| q.negative),
    ];
    let labels: Vec<Vec<usize>> = members
        .iter()
        .map(|m| m.iter().map(|id| label_of.get(id).copied().ok_or(LearnError::MissingImage(*id))).collect())
        .collect::<Result<_>>()?;
    let mut g = Graph::new();
    let vars = model.bind(&mut g);
    let mut emb = Vec::with_capacity(4);
    let mut logits = Vec::with_capacity(4);
    for (k, m) in members.iter().enumerate() {
        let (x, branch) = if k == 0 {
            (g.leaf(anchors.clone()), Branch::Sketch)
        } else {
            (g.leaf(inputs.images.tensor(Branch::Photo, m)?), Branch::Photo)
        };
        let (e, l) = model.forward_graph(&mut g, &vars, branch, x).map_err(&err)?;
        emb.push(e);
        logits.push(l);
    }
    let out = QuadOutputs {
        embeddings: [emb[0], emb[1], emb[2], emb[3]],
        logits: [logits[0], logits[1], logits[2], logits[3]],
    };
    let lab = [&labels[0][..], &labels[1][..], &labels[2][..], &labels[3][..]];
    let t = stage3_objective(&mut g, &out, lab, &config.loss, beta).map_err(&err)?;
    let total = g.value(t.total).item();
    if let Some(opt) = opt {
        check_loss(total, opt.step_count() + 1).map_err(&err)?;
        let grads = g.backward(t.total);
        opt.apply(model.params_mut(), &vars, &grads).map_err(&err)?;
    }
    let v = |x| g.value(x).item();
    Ok(QuadBatch {
        total,
        terms: [
            ("ce_sketch", v(t.ce[0])),
            ("ce_positive", v(t.ce[1])),
            ("ce_positive_negative", v(t.ce[2])),
            ("ce_negative", v(t.ce[3])),
            ("loss1", v(t.loss1)),
            ("loss2", v(t.loss2)),
            ("total", total),
        ],
    })
}

/// Quadruplets drawn once per eligible positive of `catalog` (at most
/// `cap` of them when `cap` > 0), with a fixed stream.
pub fn fixed_quadruplets(catalog: &Catalog, cap: usize, seed: u64) -> Result<Vec<Quadruplet>> {
    let sampler = QuadrupletSampler::new(catalog)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = take_epoch(&sampler.eligible_positives(), cap, &mut rng);
    positives.iter().map(|&p| sampler.form(p, &mut rng)).collect()
}

fn stage3(model: &Model, config: &StageConfig, inputs: TrainInputs<'_>) -> Result<StageOutcome> {
    let mut model = model.clone();
    let sampler = QuadrupletSampler::new(inputs.train)?;
    let positives = sampler.eligible_positives();
    if positives.is_empty() {
        return Err(LearnError::Config("no training item has a recolored sibling".into()));
    }
    let all = |c: &Catalog| -> Result<BTreeMap<u64, usize>> {
        let ids: Vec<u64> = c.items.iter().map(|it| it.id).collect();
        Ok(ids.iter().copied().zip(labels_for(c, &ids)?).collect())
    };
    let mut label_of = all(inputs.train)?;
    label_of.extend(all(inputs.validation)?);
    let validation = fixed_quadruplets(
        inputs.validation,
        config.validation_samples,
        stream_seed(config.seed, "stage3.validation"),
    )?;
    let mut opt = Adam::new(config.optimizer, model.params());
    let mut metrics = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 0..config.epochs {
        let beta = beta_schedule(epoch, config);
        let mut rng = epoch_rng(config, "quadruplets", epoch);
        let epoch_pos = take_epoch(&positives, config.samples_per_epoch, &mut rng);
        let quads = epoch_pos
            .iter()
            .map(|&p| sampler.form(p, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let aug_stream = stream_seed(config.seed, &format!("stage3.augment.{epoch}"));
        let mut acc = Accum::default();
        for batch in quads.chunks(config.batch_size) {
            let ids: Vec<u64> = batch.iter().map(|q| q.anchor_sketch).collect();
            let seeds: Vec<u64> = ids.iter().map(|&id| item_seed(aug_stream, id)).collect();
            let anchors = inputs.images.augmented_sketch_tensor(&ids, &config.augment, &seeds)?;
            let r = quad_step(&mut model, Some(&mut opt), batch, anchors, &inputs, &label_of, config, beta, epoch)?;
            for (k, v) in r.terms {
                acc.add(k, v);
            }
            acc.batches += 1;
        }
        let val_loss = validation_loss(&mut model, &validation, &inputs, &label_of, config, epoch)?;
        let terms = acc.means();
        metrics.push(EpochMetrics {
            stage: 3,
            epoch,
            branch: None,
            beta: Some(beta),
            train_loss: terms.get("total").copied().unwrap_or(0.0),
            terms,
            val_loss: Some(val_loss),
            accuracy: None,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(StageOutcome {
        model,
        metrics,
        best_epoch,
    })
}

/// Mean stage-3 objective on un-augmented validation quadruplets, at the
/// initial beta so epochs compare on one scale.
fn validation_loss(
    model: &mut Model,
    quads: &[Quadruplet],
    inputs: &TrainInputs<'_>,
    label_of: &BTreeMap<u64, usize>,
    config: &StageConfig,
    epoch: usize,
) -> Result<f64> {
    if quads.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for batch in quads.chunks(config.batch_size) {
        let ids: Vec<u64> = batch.iter().map(|q| q.anchor_sketch).collect();
        let anchors = inputs.images.tensor(Branch::Sketch, &ids)?;
        let r = quad_step(model, None, batch, anchors, inputs, label_of, config, config.beta_init, epoch)?;
        sum += r.total * batch.len() as f64;
    }
    Ok(sum / quads.len() as f64)
}
