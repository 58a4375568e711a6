use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqnet_nnet::{backward_and_step, Adam, AdamConfig, Graph, NnetError, ParamStore, Tensor};

fn store_with(name: &str, t: Tensor) -> ParamStore {
    let mut s = ParamStore::new();
    s.push(name, t);
    s
}

#[test]
fn quadratic_bowl_converges() {
    let target = vec![0.7, -1.3, 0.25, 2.0];
    let mut store = store_with("w", Tensor::vector(vec![0.0; 4]));
    let cfg = AdamConfig {
        lr: 0.05,
        ..AdamConfig::default()
    };
    let mut opt = Adam::new(cfg, &store);
    for _ in 0..500 {
        let mut g = Graph::new();
        let vars = store.bind(&mut g);
        let t = g.leaf(Tensor::vector(target.clone()));
        let d = g.sub(vars.var(0), t).unwrap();
        let sq = g.square(d);
        let loss = g.sum(sq);
        backward_and_step(&g, loss, &mut store, &vars, &mut opt).unwrap();
    }
    for (w, t) in store.get(0).data().iter().zip(&target) {
        assert!((w - t).abs() < 1e-4, "{w} vs {t}");
    }
    assert_eq!(opt.step_count(), 500);
}

#[test]
fn zero_gradient_leaves_parameters() {
    let init = Tensor::vector(vec![1.0, 2.0]);
    let mut store = store_with("w", init.clone());
    let mut opt = Adam::new(AdamConfig::default(), &store);

    // gradient is exactly zero
    let mut g = Graph::new();
    let vars = store.bind(&mut g);
    let z = g.scale(vars.var(0), 0.0);
    let loss = g.sum(z);
    backward_and_step(&g, loss, &mut store, &vars, &mut opt).unwrap();

    // parameter absent from the loss
    let mut g = Graph::new();
    let vars = store.bind(&mut g);
    let loss = g.scalar(3.0);
    backward_and_step(&g, loss, &mut store, &vars, &mut opt).unwrap();

    assert_eq!(store.get(0), &init);
    assert_eq!(opt.step_count(), 2);
}

#[test]
fn single_step_reduces_cross_entropy() {
    let mut improved = 0;
    let trials = 200;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_t = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let x = rand_t(&[8, 6]);
        let mut store = ParamStore::new();
        store.push("w", rand_t(&[6, 4]));
        store.push("b", rand_t(&[4]));
        let labels: Vec<usize> = (0..8).map(|i| (i * 7 + seed as usize) % 4).collect();
        let eval = |store: &ParamStore| {
            let mut g = Graph::new();
            let vars = store.bind(&mut g);
            let xv = g.leaf(x.clone());
            let l = g.dense(xv, vars.var(0), vars.var(1)).unwrap();
            let ce = g.softmax_cross_entropy(l, &labels).unwrap();
            let loss = g.mean(ce);
            (g, vars, loss)
        };
        let mut opt = Adam::new(AdamConfig::default(), &store);
        let (g, vars, loss) = eval(&store);
        let before = backward_and_step(&g, loss, &mut store, &vars, &mut opt).unwrap();
        let (g, _, loss) = eval(&store);
        if g.value(loss).item() < before {
            improved += 1;
        }
    }
    assert!(improved as f64 >= 0.95 * trials as f64, "{improved}/{trials}");
}

#[test]
fn non_finite_values_abort_with_context() {
    let mut store = store_with("layer.w", Tensor::vector(vec![1.0]));
    let mut opt = Adam::new(AdamConfig::default(), &store);

    let mut g = Graph::new();
    let vars = store.bind(&mut g);
    let big = g.scale(vars.var(0), f64::INFINITY);
    let loss = g.sum(big);
    match backward_and_step(&g, loss, &mut store, &vars, &mut opt) {
        Err(NnetError::NonFiniteLoss { step, .. }) => assert_eq!(step, 1),
        other => panic!("{other:?}"),
    }

    // finite forward value whose gradient overflows
    let mut tiny = store_with("layer.w", Tensor::vector(vec![1e-320]));
    let mut opt = Adam::new(AdamConfig::default(), &tiny);
    let mut g = Graph::new();
    let vars = tiny.bind(&mut g);
    let r = g.sqrt(vars.var(0));
    let r = g.scale(r, 1e200);
    let loss = g.sum(r);
    assert!(g.value(loss).item().is_finite());
    match backward_and_step(&g, loss, &mut tiny, &vars, &mut opt) {
        Err(NnetError::NonFiniteGradient { param, step }) => {
            assert_eq!(param, "layer.w");
            assert_eq!(step, 1);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(tiny.get(0).data(), &[1e-320]);
    assert_eq!(store.get(0).data(), &[1.0]);
}
