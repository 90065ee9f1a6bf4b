use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relstab_core::checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint};
use relstab_core::corruption::{select_indices, StampSpec};
use relstab_core::datagen::{generate_dataset, split_train_val, SyntheticSpec};
use relstab_core::explain::{occlusion_coverage, ExplainerKind, RelevanceMap, region_relevance_fraction};
use relstab_core::model::ModelConfig;
use relstab_core::nn::{backward_pass_with_input, forward_pass, LayerSpec, Params};
use relstab_core::pgm::{decode_pgm, encode_pgm};
use relstab_core::rssa::normalize_map;
use relstab_core::Tensor;

fn image_strategy() -> impl Strategy<Value = Tensor<f32>> {
    (1usize..20, 1usize..20).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f32..=1.0, h * w).prop_map(move |d| Tensor::new(vec![h, w], d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pgm_round_trip_within_one_step(img in image_strategy()) {
        let back: Tensor<f32> = decode_pgm(&encode_pgm(&img).unwrap()).unwrap();
        prop_assert_eq!(back.shape(), img.shape());
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() as f64 <= 1.0 / 65535.0);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>()) {
        let config = ModelConfig::default_cnn();
        let params: Params<f32> = config.init_params(seed);
        let ckpt = Checkpoint::new(config, params);
        let back: Checkpoint<f32> = decode_checkpoint(&encode_checkpoint(&ckpt)).unwrap();
        prop_assert_eq!(&back.config, &ckpt.config);
        for (a, b) in ckpt.params.tensors().zip(back.params.tensors()) {
            prop_assert_eq!(a.shape(), b.shape());
            prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    /// The gradient reaching a pooling input is the upstream gradient routed
    /// to exactly one winner per window, so sums agree and each input gets
    /// either zero or one upstream value.
    #[test]
    fn maxpool_routes_each_gradient_once(seed in any::<u64>(), h in 2usize..9, w in 2usize..9) {
        let specs = [LayerSpec::MaxPool2];
        let params = Params::<f64>::zeros(&specs);
        let x = Tensor::<f64>::from_fn(vec![1, 2, h, w], |i| ((i as u64).wrapping_mul(seed | 1) % 1009) as f64);
        let (y, tape) = forward_pass(&params, &specs, &x).unwrap();
        let up = Tensor::<f64>::from_fn(y.shape().to_vec(), |i| i as f64 + 1.0);
        let (_, gx) = backward_pass_with_input(&tape, &params, &up).unwrap();
        prop_assert_eq!(gx.sum(), up.sum());
        let nonzero = gx.data().iter().filter(|&&v| v != 0.0).count();
        prop_assert_eq!(nonzero, up.len());
    }

    #[test]
    fn normalized_maps_lie_in_unit_interval(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let n = values.len();
        let out = normalize_map(&Tensor::new(vec![n], values).unwrap());
        prop_assert!(out.values.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn selection_count_is_rounded_fraction(n in 0usize..300, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let chosen = select_indices(n, p, seed).unwrap();
        prop_assert_eq!(chosen.len(), (p * n as f64).round() as usize);
        prop_assert!(chosen.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(chosen.iter().all(|&i| i < n));
    }

    #[test]
    fn region_fractions_are_complementary(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Tensor::<f64>::from_fn(vec![32, 32], |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let map = RelevanceMap { values, explainer: ExplainerKind::Lrp, target: 0, source: String::new() };
        let mask = StampSpec::default().footprint((seed % 2) as usize, 32, 32).unwrap();
        let inside = region_relevance_fraction(&map, &mask).unwrap().fraction;
        let outside = region_relevance_fraction(&map, &mask.complement()).unwrap().fraction;
        prop_assert!((inside + outside - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occlusion_coverage_counts_positions(side in 4usize..24, patch in 1usize..5, stride in 1usize..5) {
        prop_assume!(patch <= side);
        let cover = occlusion_coverage(side, side, patch, stride);
        let positions = (side - patch) / stride + 1;
        let total: u32 = cover.iter().sum();
        prop_assert_eq!(total as usize, positions * positions * patch * patch);
    }
}

#[test]
fn default_split_is_stratified() {
    let ds = generate_dataset::<f32>(&SyntheticSpec::default()).unwrap();
    assert_eq!(ds.len(), 1000);
    assert_eq!(ds.class_counts(2), vec![500, 500]);
    let (train, val) = split_train_val(&ds, 0.8, 1).unwrap();
    assert_eq!((train.len(), val.len()), (800, 200));
    assert_eq!(train.class_counts(2), vec![400, 400]);
    assert_eq!(val.class_counts(2), vec![100, 100]);
    let mut ids: Vec<usize> = train.ids.iter().chain(&val.ids).copied().collect();
    ids.sort_unstable();
    assert_eq!(ids, (0..1000).collect::<Vec<_>>());
}

#[test]
fn featureless_corpus_gives_identical_class_means() {
    let spec = SyntheticSpec { noise_sigma: 0.0, blob_delta: 0.0, counts: [5, 5], ..SyntheticSpec::default() };
    let ds = generate_dataset::<f64>(&spec).unwrap();
    for img in &ds.images[1..] {
        assert_eq!(img, &ds.images[0]);
    }
}
