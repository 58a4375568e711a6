//! Two-branch encoder: a private convolution stack per domain, then a
//! shared two-layer head producing a unit-norm embedding, then a shared
//! classifier reading that embedding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sqnet_core::seed::stream_seed;

use crate::error::{NnetError, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Sketch,
    Photo,
}

impl Branch {
    pub fn prefix(self) -> &'static str {
        match self {
            Branch::Sketch => "sketch",
            Branch::Photo => "photo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_side: usize,
    /// Output channels of each conv block; 2 or 3 blocks.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub class_count: usize,
    pub seed: u64,
}

pub const INPUT_CHANNELS: usize = 3;

pub const BIAS_INIT: f64 = 0.01;

impl ModelConfig {
    /// Toy-scale defaults around the given sizes.
    pub fn toy(embed_dim: usize, class_count: usize, input_side: usize, seed: u64) -> Self {
        Self {
            input_side,
            conv_channels: vec![8, 16, 32],
            kernel: 3,
            hidden: 64,
            embed_dim,
            class_count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnetError::Config(m));
        if self.embed_dim < 2 {
            return bad(format!("embed_dim must be at least 2, got {}", self.embed_dim));
        }
        if self.class_count < 2 {
            return bad(format!("class_count must be at least 2, got {}", self.class_count));
        }
        if !(2..=3).contains(&self.conv_channels.len()) {
            return bad(format!("expected 2 or 3 conv blocks, got {}", self.conv_channels.len()));
        }
        if self.conv_channels.contains(&0) || self.hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.kernel % 2 == 0 {
            return bad(format!("kernel size must be odd, got {}", self.kernel));
        }
        let div = 1usize << self.conv_channels.len();
        if self.input_side < div || self.input_side % div != 0 {
            return bad(format!(
                "input_side {} must be a positive multiple of {div}",
                self.input_side
            ));
        }
        Ok(())
    }

    /// Spatial side after all pooling stages.
    pub fn feature_side(&self) -> usize {
        self.input_side >> self.conv_channels.len()
    }

    /// Length of the flattened branch output.
    pub fn feature_len(&self) -> usize {
        let s = self.feature_side();
        self.conv_channels.last().copied().unwrap_or(0) * s * s
    }

    /// Parameter names and shapes in canonical order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let k = self.kernel;
        for branch in [Branch::Sketch, Branch::Photo] {
            let mut cin = INPUT_CHANNELS;
            for (i, &cout) in self.conv_channels.iter().enumerate() {
                let p = branch.prefix();
                out.push((format!("{p}.conv{i}.w"), vec![cout, cin, k, k]));
                out.push((format!("{p}.conv{i}.b"), vec![cout]));
                cin = cout;
            }
        }
        out.push(("shared.fc0.w".into(), vec![self.feature_len(), self.hidden]));
        out.push(("shared.fc0.b".into(), vec![self.hidden]));
        out.push(("shared.fc1.w".into(), vec![self.hidden, self.embed_dim]));
        out.push(("shared.fc1.b".into(), vec![self.embed_dim]));
        out.push(("classifier.w".into(), vec![self.embed_dim, self.class_count]));
        out.push(("classifier.b".into(), vec![self.class_count]));
        out
    }
}

/// Ordered set of named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// He-normal weights (fan-in from all but the leading axis of conv
    /// kernels, the first axis of dense matrices) and biases of
    /// [`BIAS_INIT`], so a blank input still yields a nonzero embedding. Each
    /// tensor draws from its own stream keyed by name.
    pub fn init_he(&mut self, seed: u64, name: &str, shape: Vec<usize>) -> usize {
        let n: usize = shape.iter().product();
        let data = if shape.len() == 1 {
            vec![BIAS_INIT; n]
        } else {
            let fan_in: usize = if shape.len() == 4 {
                shape[1..].iter().product()
            } else {
                shape[0]
            };
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, name));
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        };
        self.push(name, Tensor::new(shape, data).expect("length matches shape"))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(move |i| &mut self.tensors[i])
    }

    /// Scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Copies every parameter into a fresh leaf of `g`.
    pub fn bind(&self, g: &mut Graph) -> ModelVars {
        ModelVars {
            vars: self.tensors.iter().map(|t| g.leaf(t.clone())).collect(),
        }
    }
}

/// Graph leaves aligned index-for-index with a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ModelVars {
    vars: Vec<Var>,
}

impl ModelVars {
    /// Wraps existing leaves, in [`ParamStore`] order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, i: usize) -> Var {
        self.vars[i]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
}

/// Parameter indices of one conv block.
#[derive(Clone, Copy, Debug)]
struct ConvIdx {
    w: usize,
    b: usize,
}

impl Model {
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        for (name, shape) in config.layout() {
            params.init_he(config.seed, &name, shape);
        }
        Ok(Self { config, params })
    }

    /// Assembles a model from stored tensors, checking names and shapes
    /// against the architecture implied by `config`.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() {
            return Err(NnetError::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for (i, (name, shape)) in layout.iter().enumerate() {
            if params.name(i) != name || params.get(i).shape() != &shape[..] {
                return Err(NnetError::Checkpoint(format!(
                    "tensor {i}: expected {name} {shape:?}, found {} {:?}",
                    params.name(i),
                    params.get(i).shape()
                )));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn bind(&self, g: &mut Graph) -> ModelVars {
        self.params.bind(g)
    }

    fn idx(&self, name: &str) -> usize {
        self.params.index_of(name).expect("layout checked at construction")
    }

    fn conv_blocks(&self, branch: Branch) -> Vec<ConvIdx> {
        (0..self.config.conv_channels.len())
            .map(|i| ConvIdx {
                w: self.idx(&format!("{}.conv{i}.w", branch.prefix())),
                b: self.idx(&format!("{}.conv{i}.b", branch.prefix())),
            })
            .collect()
    }

    fn check_input(&self, g: &Graph, x: Var) -> Result<()> {
        let s = g.value(x).shape();
        let side = self.config.input_side;
        if s.len() != 4 || s[1] != INPUT_CHANNELS || s[2] != side || s[3] != side {
            return Err(NnetError::Shape(format!(
                "expected batch [N, {INPUT_CHANNELS}, {side}, {side}], got {s:?}"
            )));
        }
        Ok(())
    }

    /// Flattened conv-stack output of one branch, shape [N, feature_len].
    pub fn branch_features(&self, g: &mut Graph, vars: &ModelVars, branch: Branch, x: Var) -> Result<Var> {
        self.check_input(g, x)?;
        let mut h = x;
        for blk in self.conv_blocks(branch) {
            h = g.conv2d(h, vars.var(blk.w), vars.var(blk.b))?;
            h = g.relu(h);
            h = g.max_pool2(h)?;
        }
        g.flatten(h)
    }

    /// Unit-norm embedding [N, embed_dim] from branch features.
    pub fn head(&self, g: &mut Graph, vars: &ModelVars, features: Var) -> Result<Var> {
        let (w0, b0) = (vars.var(self.idx("shared.fc0.w")), vars.var(self.idx("shared.fc0.b")));
        let (w1, b1) = (vars.var(self.idx("shared.fc1.w")), vars.var(self.idx("shared.fc1.b")));
        let h = g.dense(features, w0, b0)?;
        let h = g.relu(h);
        let e = g.dense(h, w1, b1)?;
        g.l2_normalize(e)
    }

    pub fn classify(&self, g: &mut Graph, vars: &ModelVars, embedding: Var) -> Result<Var> {
        let (w, b) = (vars.var(self.idx("classifier.w")), vars.var(self.idx("classifier.b")));
        g.dense(embedding, w, b)
    }

    /// (embeddings, logits) for a batch routed through `branch`.
    pub fn forward_graph(&self, g: &mut Graph, vars: &ModelVars, branch: Branch, x: Var) -> Result<(Var, Var)> {
        let f = self.branch_features(g, vars, branch, x)?;
        let e = self.head(g, vars, f)?;
        let l = self.classify(g, vars, e)?;
        Ok((e, l))
    }

    /// Inference on a batch tensor [N, 3, S, S].
    pub fn forward(&self, branch: Branch, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g);
        let x = g.leaf(batch.clone());
        let (e, l) = self.forward_graph(&mut g, &vars, branch, x)?;
        Ok((g.value(e).clone(), g.value(l).clone()))
    }
}
