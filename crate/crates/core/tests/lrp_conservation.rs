use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relstab_core::explain::{lrp_explain, lrp_relevance, LrpConfig, Target};
use relstab_core::model::{ModelConfig, Network};
use relstab_core::nn::{forward_pass, LayerSpec, Params};
use relstab_core::Tensor;

fn small_cnn(rng: &mut ChaCha8Rng) -> (Vec<LayerSpec>, usize) {
    let c1 = rng.random_range(1..4);
    let c2 = rng.random_range(1..4);
    let side = 4 * rng.random_range(2..5);
    let hidden = rng.random_range(2..8);
    let flat = c2 * (side / 4) * (side / 4);
    let specs = vec![
        LayerSpec::conv3x3(1, c1),
        LayerSpec::Relu,
        LayerSpec::MaxPool2,
        LayerSpec::conv3x3(c1, c2),
        LayerSpec::Relu,
        LayerSpec::MaxPool2,
        LayerSpec::Flatten,
        LayerSpec::dense(flat, hidden),
        LayerSpec::Relu,
        LayerSpec::dense(hidden, 2),
    ];
    (specs, side)
}

fn bias_free<T: relstab_core::Scalar>(mut p: Params<T>) -> Params<T> {
    for layer in p.layers.iter_mut().flatten() {
        layer.bias.fill(T::zero());
    }
    p
}

#[test]
fn bias_free_networks_conserve_relevance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let (specs, side) = small_cnn(&mut rng);
        let params: Params<f32> = bias_free(Params::kaiming_uniform(&specs, &mut rng));
        let x = Tensor::<f32>::from_fn(vec![1, 1, side, side], |_| rng.random_range(0.0..1.0));
        let (logits, _) = forward_pass(&params, &specs, &x).unwrap();
        for target in 0..2 {
            let logit = logits.data()[target] as f64;
            let rel = lrp_relevance(&params, &specs, &x, target, 0.0).unwrap();
            let total: f64 = rel.data().iter().map(|&v| v as f64).sum();
            let tol = 1e-5f64.max(1e-4 * logit.abs());
            assert!((total - logit).abs() <= tol, "case {case} target {target}: Σ R = {total}, logit = {logit}");
        }
    }
}

#[test]
fn epsilon_absorbs_a_little_relevance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (specs, side) = small_cnn(&mut rng);
    let params: Params<f64> = bias_free(Params::kaiming_uniform(&specs, &mut rng));
    let x = Tensor::<f64>::from_fn(vec![1, 1, side, side], |_| rng.random_range(0.0..1.0));
    let (logits, _) = forward_pass(&params, &specs, &x).unwrap();
    let exact: f64 = lrp_relevance(&params, &specs, &x, 0, 0.0).unwrap().sum();
    let damped: f64 = lrp_relevance(&params, &specs, &x, 0, 1e-1).unwrap().sum();
    assert!((exact - logits.data()[0]).abs() < 1e-9);
    assert!(damped.abs() <= exact.abs() + 1e-12);
}

#[test]
fn explain_on_default_model_is_finite_and_channel_summed() {
    let config = ModelConfig::default_cnn();
    let params: Params<f32> = config.init_params(3);
    let net = Network::new(&config, &params);
    let image = Tensor::<f32>::from_fn(vec![1, 64, 64], |i| ((i % 97) as f32) / 97.0);
    let map = lrp_explain(&net, &image, &LrpConfig { target: Target::Class(1), ..LrpConfig::default() }).unwrap();
    assert_eq!(map.values.shape(), &[64, 64]);
    assert!(map.values.all_finite());
    assert_eq!(map.target, 1);
}
