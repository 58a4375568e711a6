//! Loss functions, as plain scalar functions and as graph builders.
//!
//! Graph versions operate on batches and average each term over the batch.

use sqnet_nnet::{Graph, Result as NnResult, Tensor, Var};

use crate::error::{LearnError, Result};

pub const DEFAULT_LAMBDA: f64 = 1.5;
pub const ALPHA_GRID: [f64; 4] = [0.1, 0.25, 0.5, 0.75];
pub const CONTRASTIVE_MARGIN: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrupletLossParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl QuadrupletLossParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let p = Self { lambda, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(LearnError::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(LearnError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// (inner, outer): alpha * lambda and its complement, as floats that
    /// add up to exactly lambda. The inner margin moves down by at most a
    /// few ulps when the rounded product admits no exact complement.
    pub fn margins(&self) -> (f64, f64) {
        let mut inner = self.alpha * self.lambda;
        for _ in 0..4 {
            let outer = self.lambda - inner;
            for c in [outer, outer.next_up(), outer.next_down()] {
                if inner + c == self.lambda {
                    return (inner, c);
                }
            }
            inner = inner.next_down();
        }
        let inner = self.alpha * self.lambda;
        (inner, self.lambda - inner)
    }

    /// Margin between the positive and the recolored positive.
    pub fn inner_margin(&self) -> f64 {
        self.margins().0
    }

    /// Margin between the recolored positive and the negative.
    pub fn outer_margin(&self) -> f64 {
        self.margins().1
    }
}

impl Default for QuadrupletLossParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            alpha: ALPHA_GRID[0],
        }
    }
}

pub fn triplet_loss(d_pos: f64, d_neg: f64, lambda: f64) -> f64 {
    ((d_pos - d_neg) + lambda).max(0.0)
}

/// (loss1, loss2) for one quadruplet's three anchor distances.
pub fn quadruplet_losses(d_pos: f64, d_pn: f64, d_neg: f64, p: &QuadrupletLossParams) -> (f64, f64) {
    (
        ((d_pos - d_pn) + p.inner_margin()).max(0.0),
        ((d_pn - d_neg) + p.outer_margin()).max(0.0),
    )
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Squared distance for same-class pairs, squared hinge on `margin - D` otherwise.
pub fn contrastive_loss(e1: &[f64], e2: &[f64], same_class: bool, margin: f64) -> f64 {
    let d = euclidean(e1, e2);
    if same_class {
        d * d
    } else {
        (margin - d).max(0.0).powi(2)
    }
}

/// Negative log softmax probability of `label`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Row-wise triplet hinge on distance vectors, shape [N].
pub fn triplet_loss_graph(g: &mut Graph, d_pos: Var, d_neg: Var, lambda: f64) -> NnResult<Var> {
    let diff = g.sub(d_pos, d_neg)?;
    Ok(g.hinge(diff, lambda))
}

/// Row-wise (loss1, loss2), each shape [N].
pub fn quadruplet_losses_graph(
    g: &mut Graph,
    d_pos: Var,
    d_pn: Var,
    d_neg: Var,
    p: &QuadrupletLossParams,
) -> NnResult<(Var, Var)> {
    let a = g.sub(d_pos, d_pn)?;
    let l1 = g.hinge(a, p.inner_margin());
    let b = g.sub(d_pn, d_neg)?;
    let l2 = g.hinge(b, p.outer_margin());
    Ok((l1, l2))
}

/// Row-wise contrastive loss of two embedding batches, shape [N].
pub fn contrastive_graph(g: &mut Graph, e1: Var, e2: Var, same_class: &[bool], margin: f64) -> NnResult<Var> {
    let same = g.leaf(Tensor::vector(same_class.iter().map(|&s| f64::from(u8::from(s))).collect()));
    let diff = g.leaf(Tensor::vector(same_class.iter().map(|&s| f64::from(u8::from(!s))).collect()));
    let sq = g.row_sq_distance(e1, e2)?;
    let d = g.sqrt(sq);
    let neg_d = g.scale(d, -1.0);
    let gap = g.hinge(neg_d, margin);
    let gap_sq = g.square(gap);
    let pull = g.mul(sq, same)?;
    let push = g.mul(gap_sq, diff)?;
    g.add(pull, push)
}

/// Batch-mean terms of the joint sketch/photo objective.
#[derive(Clone, Copy, Debug)]
pub struct Stage2Terms {
    pub total: Var,
    pub ce_sketch: Var,
    pub ce_photo: Var,
    pub contrastive: Var,
}

pub struct PairOutputs<'a> {
    pub sketch_embedding: Var,
    pub sketch_logits: Var,
    pub photo_embedding: Var,
    pub photo_logits: Var,
    pub sketch_labels: &'a [usize],
    pub photo_labels: &'a [usize],
    pub same_class: &'a [bool],
}

/// CE_sk + CE_ph + beta * contrastive, each averaged over the batch.
pub fn stage2_objective(g: &mut Graph, out: &PairOutputs<'_>, beta: f64, margin: f64) -> NnResult<Stage2Terms> {
    let ce = g.softmax_cross_entropy(out.sketch_logits, out.sketch_labels)?;
    let ce_sketch = g.mean(ce);
    let ce = g.softmax_cross_entropy(out.photo_logits, out.photo_labels)?;
    let ce_photo = g.mean(ce);
    let c = contrastive_graph(g, out.sketch_embedding, out.photo_embedding, out.same_class, margin)?;
    let contrastive = g.mean(c);
    let ces = g.add(ce_sketch, ce_photo)?;
    let weighted = g.scale(contrastive, beta);
    let total = g.add(ces, weighted)?;
    Ok(Stage2Terms {
        total,
        ce_sketch,
        ce_photo,
        contrastive,
    })
}

/// Embeddings and logits of the four quadruplet members, in the order
/// anchor sketch, positive, recolored positive, negative.
#[derive(Clone, Copy, Debug)]
pub struct QuadOutputs {
    pub embeddings: [Var; 4],
    pub logits: [Var; 4],
}

#[derive(Clone, Copy, Debug)]
pub struct Stage3Terms {
    pub total: Var,
    pub ce: [Var; 4],
    pub loss1: Var,
    pub loss2: Var,
    /// Per-row anchor distances, shape [N].
    pub d_pos: Var,
    pub d_pn: Var,
    pub d_neg: Var,
}

/// Sum of the four batch-mean cross-entropies plus beta times the
/// batch-mean quadruplet hinges.
pub fn stage3_objective(
    g: &mut Graph,
    out: &QuadOutputs,
    labels: [&[usize]; 4],
    p: &QuadrupletLossParams,
    beta: f64,
) -> NnResult<Stage3Terms> {
    let mut ce = [out.logits[0]; 4];
    for k in 0..4 {
        let c = g.softmax_cross_entropy(out.logits[k], labels[k])?;
        ce[k] = g.mean(c);
    }
    let [q, pos, pn, neg] = out.embeddings;
    let d_pos = g.row_distance(q, pos)?;
    let d_pn = g.row_distance(q, pn)?;
    let d_neg = g.row_distance(q, neg)?;
    let (l1, l2) = quadruplet_losses_graph(g, d_pos, d_pn, d_neg, p)?;
    let loss1 = g.mean(l1);
    let loss2 = g.mean(l2);
    let mut total = ce[0];
    for &c in &ce[1..] {
        total = g.add(total, c)?;
    }
    let hinges = g.add(loss1, loss2)?;
    let weighted = g.scale(hinges, beta);
    let total = g.add(total, weighted)?;
    Ok(Stage3Terms {
        total,
        ce,
        loss1,
        loss2,
        d_pos,
        d_pn,
        d_neg,
    })
}
