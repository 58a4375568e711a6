//! Reverse-mode gradients against central finite differences.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Points closer than this to a kink are not meaningful for finite differences.
pub const KINK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// Max over checked coordinates of [`relative_error`], after discounting
    /// the rounding noise of the two function evaluations.
    pub max_rel_error: f64,
    /// Distance of the unperturbed forward pass to the nearest kink.
    pub kink_distance: f64,
    pub coords_checked: usize,
}

impl GradCheck {
    pub fn near_kink(&self) -> bool {
        self.kink_distance < KINK_TOLERANCE
    }
}

pub fn relative_error(ad: f64, fd: f64) -> f64 {
    (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8)
}

/// Bound on the rounding error of a central difference between `fp` and `fm`.
pub fn fd_noise(fp: f64, fm: f64, eps: f64) -> f64 {
    16.0 * f64::EPSILON * (fp.abs() + fm.abs()) / (2.0 * eps)
}

/// [`relative_error`] with differences below `noise` treated as agreement.
/// An exactly zero gradient is otherwise compared against pure rounding.
pub fn noisy_relative_error(ad: f64, fd: f64, noise: f64) -> f64 {
    let diff = ((ad - fd).abs() - noise).max(0.0);
    diff / (ad.abs() + fd.abs()).max(1e-8)
}

/// Checks every coordinate of every input tensor. `f` builds a one-element
/// output from leaves holding the inputs.
pub fn grad_check<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    grad_check_sampled(inputs, eps, usize::MAX, f)
}

/// Like [`grad_check`] but visits at most `max_coords` evenly spaced
/// coordinates per input.
pub fn grad_check_sampled<F>(inputs: &[Tensor], eps: f64, max_coords: usize, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> Result<(Graph, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok((g, vars, out))
    };
    let (g, vars, out) = eval(inputs)?;
    let kink_distance = g.kink_distance();
    let grads = g.backward(out);
    let mut max_rel_error: f64 = 0.0;
    let mut coords_checked = 0;
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let n = input.len();
        let stride = if n > max_coords { n.div_ceil(max_coords) } else { 1 };
        let zeros = Tensor::zeros(input.shape());
        let ad = grads.get(vars[k]).unwrap_or(&zeros);
        for j in (0..n).step_by(stride) {
            let orig = input.data()[j];
            work[k].data_mut()[j] = orig + eps;
            let (gp, _, op) = eval(&work)?;
            work[k].data_mut()[j] = orig - eps;
            let (gm, _, om) = eval(&work)?;
            work[k].data_mut()[j] = orig;
            let (fp, fm) = (gp.value(op).item(), gm.value(om).item());
            let fd = (fp - fm) / (2.0 * eps);
            let noise = fd_noise(fp, fm, eps);
            max_rel_error = max_rel_error.max(noisy_relative_error(ad.data()[j], fd, noise));
            coords_checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error,
        kink_distance,
        coords_checked,
    })
}
