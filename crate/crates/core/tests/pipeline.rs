use relstab_core::corruption::{corrupt_corpus, CorruptionPlan, Corruptor, NoiseKind, StampSpec};
use relstab_core::datagen::{generate_dataset, SyntheticSpec};
use relstab_core::explain::{Explainer, ExplainerKind, LimeConfig, OcclusionConfig, Target};
use relstab_core::model::{build_default_model, train, ModelConfig, Network, TrainConfig};
use relstab_core::rssa::{rssa_matrix, NoiseGrid, RssaConfig};
use relstab_core::Params32;

fn tiny_corpus() -> relstab_core::Dataset32 {
    generate_dataset(&SyntheticSpec { counts: [3, 3], ..SyntheticSpec::default() }).unwrap()
}

#[test]
fn rssa_matrix_shape_and_identity_column() {
    let (config, params): (ModelConfig, Params32) = build_default_model(4);
    let net = Network::new(&config, &params);
    let ds = tiny_corpus();
    let grid = NoiseGrid { lambdas: vec![0.0, 0.15], ..NoiseGrid::default() };
    let explainers = [
        Explainer::default_for(ExplainerKind::Lrp),
        Explainer::Lime(LimeConfig { n_samples: 96, ..LimeConfig::default() }),
        Explainer::Occlusion(OcclusionConfig { stride: 8, ..OcclusionConfig::default() }),
    ];
    for ex in &explainers {
        let m = rssa_matrix(ex, &net, &ds.images[..2], &grid, &RssaConfig::default()).unwrap();
        assert_eq!(m.values.len(), 3 * 2);
        assert_eq!(m.explainer, ex.kind());
        for r in 0..3 {
            assert!((m.get(r, 0) - 1.0).abs() <= 1e-6, "{} row {r}: {}", ex.kind(), m.get(r, 0));
            assert!(m.get(r, 1) <= 1.0 + 1e-9);
        }
        assert!(m.lookup(NoiseKind::Rician, 0.15).is_some());
    }
    assert!(rssa_matrix(&explainers[0], &net, &[], &grid, &RssaConfig::default()).is_err());
}

#[test]
fn explainers_are_deterministic_on_a_cnn() {
    let (config, params): (ModelConfig, Params32) = build_default_model(5);
    let net = Network::new(&config, &params);
    let image = &tiny_corpus().images[4];
    for ex in [
        Explainer::default_for(ExplainerKind::Lrp),
        Explainer::Lime(LimeConfig { n_samples: 64, ..LimeConfig::default() }),
        Explainer::default_for(ExplainerKind::Occlusion),
    ] {
        let ex = ex.with_target(Target::Class(1));
        let a = ex.explain(&net, image).unwrap();
        let b = ex.explain(&net, image).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.shape(), &[64, 64]);
        assert!(a.values.all_finite());
    }
}

#[test]
fn fully_stamped_corpus_is_learned_perfectly() {
    let spec = SyntheticSpec { counts: [24, 24], ..SyntheticSpec::default() };
    let ds = generate_dataset::<f32>(&spec).unwrap();
    let plan = CorruptionPlan { fraction: 1.0, corruptor: Corruptor::Stamp(StampSpec::default()), seed: 3 };
    let (stamped, chosen) = corrupt_corpus(&ds, &plan).unwrap();
    assert_eq!(chosen.len(), ds.len());
    let (config, params) = build_default_model::<f32>(1);
    let cfg = TrainConfig { epochs: 20, track_train_accuracy: true, ..TrainConfig::default() };
    let (_, trace) = train(&cfg, &config, params, &stamped, &stamped).unwrap();
    assert_eq!(trace.train_accuracy.last().copied(), Some(1.0), "{:?}", trace.train_accuracy);
}
