use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqnet_nnet::{checkpoint, Branch, Graph, Model, ModelConfig, Tensor};

fn config(seed: u64) -> ModelConfig {
    ModelConfig {
        input_side: 16,
        conv_channels: vec![4, 6],
        kernel: 3,
        hidden: 10,
        embed_dim: 5,
        class_count: 3,
        seed,
    }
}

fn batch(n: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = n * 3 * 16 * 16;
    Tensor::new(vec![n, 3, 16, 16], (0..len).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn norms(e: &Tensor) -> Vec<f64> {
    (0..e.shape()[0]).map(|i| e.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

#[test]
fn same_seed_same_parameters() {
    let a = Model::build(config(3)).unwrap();
    let b = Model::build(config(3)).unwrap();
    let c = Model::build(config(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.params(), c.params());
    assert_eq!(a.parameter_count(), c.parameter_count());
}

#[test]
fn forward_is_pure_and_shaped() {
    let m = Model::build(config(1)).unwrap();
    let x = batch(3, 0);
    let (e1, l1) = m.forward(Branch::Photo, &x).unwrap();
    let (e2, l2) = m.forward(Branch::Photo, &x).unwrap();
    assert_eq!((&e1, &l1), (&e2, &l2));
    assert_eq!(e1.shape(), &[3, 5]);
    assert_eq!(l1.shape(), &[3, 3]);
}

#[test]
fn blank_input_still_has_unit_embedding() {
    let m = Model::build(config(2)).unwrap();
    for branch in [Branch::Sketch, Branch::Photo] {
        let (e, _) = m.forward(branch, &Tensor::zeros(&[1, 3, 16, 16])).unwrap();
        assert!((norms(&e)[0] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn rows_are_independent() {
    let m = Model::build(config(5)).unwrap();
    let x = batch(8, 7);
    let (all, _) = m.forward(Branch::Sketch, &x).unwrap();
    let plane = 3 * 16 * 16;
    for i in [0, 3, 7] {
        let one = Tensor::new(vec![1, 3, 16, 16], x.data()[i * plane..(i + 1) * plane].to_vec()).unwrap();
        let (e, _) = m.forward(Branch::Sketch, &one).unwrap();
        for (a, b) in e.row(0).iter().zip(all.row(i)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn branches_are_private_head_is_shared() {
    let base = Model::build(config(6)).unwrap();
    let x = batch(2, 1);
    let out = |m: &Model, b| m.forward(b, &x).unwrap().0;
    let (sk0, ph0) = (out(&base, Branch::Sketch), out(&base, Branch::Photo));

    let mut head = base.clone();
    for v in head.params_mut().by_name_mut("shared.fc1.w").unwrap().data_mut() {
        *v += 1e-3;
    }
    assert_ne!(out(&head, Branch::Sketch), sk0);
    assert_ne!(out(&head, Branch::Photo), ph0);

    let mut photo = base.clone();
    for v in photo.params_mut().by_name_mut("photo.conv0.w").unwrap().data_mut() {
        *v += 1e-3;
    }
    assert_eq!(out(&photo, Branch::Sketch), sk0);
    assert_ne!(out(&photo, Branch::Photo), ph0);
}

#[test]
fn photo_step_moves_sketch_outputs_through_shared_head() {
    use sqnet_nnet::{backward_and_step, Adam, AdamConfig};
    let mut m = Model::build(config(8)).unwrap();
    let x = batch(2, 2);
    let (sk_before, _) = m.forward(Branch::Sketch, &x).unwrap();
    let mut opt = Adam::new(AdamConfig::default(), m.params());
    let mut g = Graph::new();
    let vars = m.bind(&mut g);
    let xv = g.leaf(x.clone());
    let (_, logits) = m.forward_graph(&mut g, &vars, Branch::Photo, xv).unwrap();
    let ce = g.softmax_cross_entropy(logits, &[0, 1]).unwrap();
    let loss = g.mean(ce);
    let mut params = m.params().clone();
    backward_and_step(&g, loss, &mut params, &vars, &mut opt).unwrap();
    let sketch_w = m.params().by_name("sketch.conv0.w").unwrap().clone();
    *m.params_mut() = params;
    assert_eq!(m.params().by_name("sketch.conv0.w").unwrap(), &sketch_w);
    let (sk_after, _) = m.forward(Branch::Sketch, &x).unwrap();
    assert_ne!(sk_before, sk_after);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sqnm");
    let m = Model::build(config(11)).unwrap();
    checkpoint::save(&m, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back, m);
    assert_eq!(std::fs::read(&path).unwrap(), checkpoint::encode(&back));
}

#[test]
fn checkpoint_with_wrong_shapes_is_rejected() {
    let m = Model::build(config(1)).unwrap();
    let mut other = config(1);
    other.hidden = 11;
    assert!(Model::from_params(other, m.params().clone()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn embeddings_are_unit_norm(seed in 0u64..1000, scale in 0.0f64..50.0, sketch in any::<bool>()) {
        let m = Model::build(config(seed % 7)).unwrap();
        let mut x = batch(2, seed);
        for v in x.data_mut() {
            *v *= scale;
        }
        let branch = if sketch { Branch::Sketch } else { Branch::Photo };
        let (e, _) = m.forward(branch, &x).unwrap();
        for n in norms(&e) {
            prop_assert!((n - 1.0).abs() < 1e-9);
        }
    }
}
