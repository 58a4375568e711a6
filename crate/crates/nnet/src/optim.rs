//! Adaptive-moment optimizer.

use crate::error::{NnetError, Result};
use crate::graph::{Gradients, Graph, Var};
use crate::model::{ModelVars, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments per parameter of one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros = || store.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// One update of `store` from the gradients of its bound leaves.
    /// Parameters without a gradient are left untouched. Any non-finite
    /// gradient aborts before anything is modified.
    pub fn apply(&mut self, store: &mut ParamStore, vars: &ModelVars, grads: &Gradients) -> Result<()> {
        if store.len() != self.m.len() || vars.vars().len() != store.len() {
            return Err(NnetError::Shape(format!(
                "optimizer tracks {} tensors, store has {}, bound {}",
                self.m.len(),
                store.len(),
                vars.vars().len()
            )));
        }
        self.step += 1;
        for (i, &var) in vars.vars().iter().enumerate() {
            if let Some(g) = grads.get(var) {
                if g.shape() != store.get(i).shape() {
                    return Err(NnetError::Shape(format!(
                        "gradient for {} has shape {:?}, parameter {:?}",
                        store.name(i),
                        g.shape(),
                        store.get(i).shape()
                    )));
                }
                if !g.all_finite() {
                    return Err(NnetError::NonFiniteGradient {
                        param: store.name(i).to_string(),
                        step: self.step,
                    });
                }
            }
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, &var) in vars.vars().iter().enumerate() {
            let Some(g) = grads.get(var) else { continue };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = store.get_mut(i).data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p[j] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Errors unless `value` is finite.
pub fn check_loss(value: f64, step: u64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(NnetError::NonFiniteLoss { value, step })
    }
}

/// Differentiates the scalar `loss` and applies one optimizer step to
/// `store`. Returns the loss value.
pub fn backward_and_step(
    graph: &Graph,
    loss: Var,
    store: &mut ParamStore,
    vars: &ModelVars,
    opt: &mut Adam,
) -> Result<f64> {
    let value = graph.value(loss).item();
    check_loss(value, opt.step_count() + 1)?;
    let grads = graph.backward(loss);
    opt.apply(store, vars, &grads)?;
    Ok(value)
}
