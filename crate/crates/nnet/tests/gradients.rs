use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqnet_nnet::gradcheck::{grad_check, grad_check_sampled};
use sqnet_nnet::{Branch, Graph, Model, ModelConfig, ModelVars, Result, Tensor, Var};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 100;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Reduces any tensor to a scalar through a fixed random projection so
/// every output coordinate contributes a distinct weight.
fn project(g: &mut Graph, y: Var, rng_seed: u64) -> Result<Var> {
    let shape = g.value(y).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0xfeed);
    let r = g.leaf(rand_tensor(&mut rng, &shape, 1.0));
    let p = g.mul(y, r)?;
    Ok(g.sum(p))
}

/// Runs `case` on seeded instances, skipping kink-adjacent ones. Returns
/// (worst error, instances used).
fn run_case<F>(name: &str, mut case: F) -> (f64, usize)
where
    F: FnMut(&mut ChaCha8Rng, u64) -> sqnet_nnet::GradCheck,
{
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = case(&mut rng, seed);
        if r.near_kink() {
            continue;
        }
        used += 1;
        worst = worst.max(r.max_rel_error);
    }
    assert!(worst < TOL, "{name}: max relative error {worst:e}");
    assert!(used >= 50, "{name}: only {used} instances away from kinks");
    (worst, used)
}

#[test]
fn conv2d() {
    run_case("conv2d", |rng, s| {
        let x = rand_tensor(rng, &[2, 2, 5, 4], 1.0);
        let w = rand_tensor(rng, &[3, 2, 3, 3], 0.5);
        let b = rand_tensor(rng, &[3], 0.5);
        grad_check(&[x, w, b], EPS, |g, v| {
            let y = g.conv2d(v[0], v[1], v[2])?;
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn dense() {
    run_case("dense", |rng, s| {
        let x = rand_tensor(rng, &[3, 4], 1.0);
        let w = rand_tensor(rng, &[4, 5], 1.0);
        let b = rand_tensor(rng, &[5], 1.0);
        grad_check(&[x, w, b], EPS, |g, v| {
            let y = g.dense(v[0], v[1], v[2])?;
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn relu() {
    run_case("relu", |rng, s| {
        let x = rand_tensor(rng, &[12], 1.0);
        grad_check(&[x], EPS, |g, v| {
            let y = g.relu(v[0]);
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn max_pool() {
    run_case("max_pool2", |rng, s| {
        let x = rand_tensor(rng, &[1, 2, 4, 5], 1.0);
        grad_check(&[x], EPS, |g, v| {
            let y = g.max_pool2(v[0])?;
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn l2_normalize() {
    run_case("l2_normalize", |rng, s| {
        let x = rand_tensor(rng, &[3, 4], 1.0);
        grad_check(&[x], EPS, |g, v| {
            let y = g.l2_normalize(v[0])?;
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn euclidean_distance() {
    run_case("row_distance", |rng, s| {
        let a = rand_tensor(rng, &[4, 3], 1.0);
        let b = rand_tensor(rng, &[4, 3], 1.0);
        grad_check(&[a, b], EPS, |g, v| {
            let y = g.row_distance(v[0], v[1])?;
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn softmax_cross_entropy() {
    let (worst, _) = run_case("softmax_cross_entropy", |rng, s| {
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
        let x = rand_tensor(rng, &[4, 5], 3.0);
        grad_check(&[x], EPS, |g, v| {
            let y = g.softmax_cross_entropy(v[0], &labels)?;
            project(g, y, s)
        })
        .unwrap()
    });
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn hinge() {
    run_case("hinge", |rng, s| {
        let x = rand_tensor(rng, &[10], 2.0);
        let m = rng.random_range(0.0..1.5);
        grad_check(&[x], EPS, |g, v| {
            let y = g.hinge(v[0], m);
            project(g, y, s)
        })
        .unwrap()
    });
}

#[test]
fn elementwise() {
    run_case("elementwise", |rng, _| {
        let a = rand_tensor(rng, &[6], 1.0);
        let b = rand_tensor(rng, &[6], 1.0);
        grad_check(&[a, b], EPS, |g, v| {
            let d = g.sub(v[0], v[1])?;
            let p = g.mul(d, v[0])?;
            let q = g.square(p);
            let q = g.scale(q, 0.7);
            let q = g.add(q, v[1])?;
            let m = g.mean(q);
            let t = g.sum(q);
            let t = g.add(m, t)?;
            Ok(t)
        })
        .unwrap()
    });
}

#[test]
fn encoder_end_to_end() {
    let cfg = ModelConfig {
        input_side: 8,
        conv_channels: vec![2, 3],
        kernel: 3,
        hidden: 6,
        embed_dim: 4,
        class_count: 3,
        seed: 0,
    };
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for seed in 0..20 {
        let mut c = cfg.clone();
        c.seed = seed;
        let model = Model::build(c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[2, 3, 8, 8], 1.0);
        let mut inputs = model.params().tensors().to_vec();
        inputs.push(x);
        let r = grad_check_sampled(&inputs, EPS, 12, |g, v| {
            let vars = ModelVars::from_vars(v[..v.len() - 1].to_vec());
            let (e, l) = model.forward_graph(g, &vars, Branch::Sketch, v[v.len() - 1])?;
            let ce = g.softmax_cross_entropy(l, &[0, 2])?;
            let ce = g.sum(ce);
            let pe = project(g, e, seed)?;
            g.add(ce, pe)
        })
        .unwrap();
        if r.near_kink() {
            continue;
        }
        used += 1;
        worst = worst.max(r.max_rel_error);
    }
    assert!(used >= 10, "{used}");
    assert!(worst < TOL, "{worst:e}");
}
