use metasel::net::score_batch;
use metasel::synth::random_expected;
use metasel::trainer::{evaluate_batch, loss, soft_select_weights, MetricChoice, TrainConfig};
use metasel::{
    aggregate_distribution, brute_force_best_subset, generate_synthetic, phi_corpus, train, DistributionTable,
    MetadataSchema, NetConfig, SampleMetadata, SynthProfile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn driving() -> MetadataSchema {
    MetadataSchema::driving()
}

fn sample(schema: &MetadataSchema, id: String, duration: f64, tags: &[(&str, f64)]) -> SampleMetadata {
    SampleMetadata::from_tags(id, duration, tags.iter().map(|&(k, v)| (k, v)), schema).unwrap()
}

/// Cluster X: highway, 2 lanes, mostly one-way. Cluster Y: primary road,
/// 4 lanes, with a bridge. `e` is cluster X's own aggregate.
fn two_clusters(n_each: usize, seed: u64) -> (MetadataSchema, Vec<SampleMetadata>, DistributionTable) {
    let schema = driving();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::new();
    for i in 0..n_each {
        let d = rng.gen_range(30.0..50.0);
        corpus.push(sample(
            &schema,
            format!("x{i:03}"),
            d,
            &[
                ("Way type/Highway", d * rng.gen_range(0.85..1.0)),
                ("Number of lane/2-lanes", d * rng.gen_range(0.8..1.0)),
                ("One way/One way", d * rng.gen_range(0.6..0.9)),
            ],
        ));
        let d = rng.gen_range(30.0..50.0);
        corpus.push(sample(
            &schema,
            format!("y{i:03}"),
            d,
            &[
                ("Way type/Primary way", d * rng.gen_range(0.85..1.0)),
                ("Number of lane/4-lanes", d * rng.gen_range(0.8..1.0)),
                ("Bridge/Bridge", d * rng.gen_range(0.1..0.3)),
            ],
        ));
    }
    let x: Vec<SampleMetadata> = corpus.iter().filter(|s| s.sample_id().starts_with('x')).cloned().collect();
    let e = aggregate_distribution(&x, &schema).unwrap();
    (schema, corpus, e)
}

fn top_by_score(corpus: &[SampleMetadata], scores: &[f64], k: usize) -> Vec<SampleMetadata> {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order[..k].iter().map(|&i| corpus[i].clone()).collect()
}

#[test]
fn two_cluster_fixture_learns_the_matching_cluster() {
    let (schema, corpus, e) = two_clusters(20, 3);
    let cfg = TrainConfig {
        keep_ratio: 0.5,
        ..TrainConfig::default()
    };
    let (params, log) = train(&corpus, &e, &schema, &NetConfig::for_inputs(schema.cell_count(), 1), &cfg).unwrap();
    assert_eq!(log.epochs.len(), 120);
    let x = phi_corpus(&corpus, &schema).unwrap();
    let scores = score_batch(&params, &x).unwrap();
    let mean = |prefix: char| {
        let v: Vec<f64> = corpus
            .iter()
            .zip(&scores)
            .filter(|(s, _)| s.sample_id().starts_with(prefix))
            .map(|(_, &v)| v)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean('x') > mean('y'));
    let chosen = top_by_score(&corpus, &scores, 20);
    let a = aggregate_distribution(&chosen, &schema).unwrap();
    let s_c = 1.0 - loss(&a, &e, MetricChoice::Category, &schema).unwrap();
    assert!(s_c >= 0.95, "S_c = {s_c}");
}

#[test]
fn optimum_at_start_stays_at_zero() {
    let schema = driving();
    let d = 40.0;
    let corpus: Vec<_> = (0..6)
        .map(|i| sample(&schema, format!("s{i}"), d, &[("Way type/Highway", 20.0), ("Toll/Toll", 4.0)]))
        .collect();
    let e = aggregate_distribution(&corpus, &schema).unwrap();
    let cfg = TrainConfig {
        keep_ratio: 1.0,
        epochs: 10,
        ..TrainConfig::default()
    };
    let (_, log) = train(&corpus, &e, &schema, &NetConfig::for_inputs(16, 0), &cfg).unwrap();
    for ep in &log.epochs {
        assert!(ep.loss.abs() < 1e-12, "epoch {} loss {}", ep.epoch, ep.loss);
    }
}

#[test]
fn final_loss_not_above_first_epoch() {
    let schema = driving();
    for seed in 0..6u64 {
        let profile = SynthProfile::random(&schema, 4, 1.0, seed);
        let corpus = generate_synthetic(300, &schema, &profile).unwrap();
        let e = random_expected(&schema, seed);
        for (rho, metric) in [(0.2, MetricChoice::Category), (0.5, MetricChoice::Domain), (0.7, MetricChoice::Blend(0.5))] {
            let cfg = TrainConfig {
                keep_ratio: rho,
                metric,
                epochs: 40,
                batch_size: 128,
                shuffle_seed: seed,
                ..TrainConfig::default()
            };
            let (_, log) = train(&corpus, &e, &schema, &NetConfig::for_inputs(16, seed), &cfg).unwrap();
            let l = log.losses();
            assert!(l[l.len() - 1] <= l[0], "seed {seed} {metric:?}: {} -> {}", l[0], l[l.len() - 1]);
        }
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let schema = driving();
    let corpus = generate_synthetic(500, &schema, &SynthProfile::random(&schema, 3, 1.0, 11)).unwrap();
    let e = random_expected(&schema, 11);
    let cfg = TrainConfig {
        keep_ratio: 0.3,
        epochs: 15,
        batch_size: 200,
        shuffle_seed: 4,
        ..TrainConfig::default()
    };
    let net = NetConfig::for_inputs(16, 8);
    let (p1, l1) = train(&corpus, &e, &schema, &net, &cfg).unwrap();
    let (p2, l2) = train(&corpus, &e, &schema, &net, &cfg).unwrap();
    let bits = |l: &metasel::TrainLog| l.losses().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&l1), bits(&l2));
    assert_eq!(p1, p2);
}

#[test]
fn thread_count_does_not_change_results() {
    let schema = driving();
    let corpus = generate_synthetic(400, &schema, &SynthProfile::random(&schema, 3, 1.0, 2)).unwrap();
    let e = random_expected(&schema, 2);
    let cfg = TrainConfig {
        keep_ratio: 0.4,
        epochs: 5,
        ..TrainConfig::default()
    };
    let net = NetConfig::for_inputs(16, 3);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&corpus, &e, &schema, &net, &cfg).unwrap())
    };
    let (p1, l1) = run(1);
    let (p3, l3) = run(3);
    assert_eq!(p1, p3);
    assert_eq!(l1.losses(), l3.losses());
}

#[test]
fn soft_loss_matches_hard_loss_at_tiny_temperature() {
    let schema = driving();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..30u64 {
        let corpus = generate_synthetic(24, &schema, &SynthProfile::random(&schema, 2, 1.0, case)).unwrap();
        let e = random_expected(&schema, case);
        // well-separated scores: a shuffled ladder with unit spacing
        let mut scores: Vec<f64> = (0..24).map(|i| i as f64).collect();
        for i in (1..24).rev() {
            scores.swap(i, rng.gen_range(0..=i));
        }
        let rho = [0.25, 0.5, 0.75][(case % 3) as usize];
        let cfg = TrainConfig {
            keep_ratio: rho,
            temperature: 1e-6,
            ..TrainConfig::default()
        };
        let refs: Vec<&SampleMetadata> = corpus.iter().collect();
        let soft = evaluate_batch(&scores, &refs, &e, &schema, &cfg).unwrap().loss;
        // τ sits strictly between two ladder rungs; everything above it is kept
        let w = soft_select_weights(&scores, rho, 1e-6).unwrap();
        let kept = w.iter().filter(|&&x| x > 0.5).count();
        assert_eq!(kept, metasel::selection_quota(rho, 24));
        let hard = top_by_score(&corpus, &scores, kept);
        let hard_loss = loss(&aggregate_distribution(&hard, &schema).unwrap(), &e, MetricChoice::Category, &schema).unwrap();
        assert!((soft - hard_loss).abs() < 1e-6, "case {case}: soft {soft} hard {hard_loss}");
    }
}

#[test]
fn trained_pipeline_never_beats_the_oracle() {
    let schema = driving();
    for seed in 0..5u64 {
        let corpus = generate_synthetic(12, &schema, &SynthProfile::random(&schema, 4, 1.0, 40 + seed)).unwrap();
        let e = random_expected(&schema, 40 + seed);
        let cfg = TrainConfig {
            keep_ratio: 0.5,
            epochs: 60,
            ..TrainConfig::default()
        };
        let (params, _) = train(&corpus, &e, &schema, &NetConfig::for_inputs(16, seed), &cfg).unwrap();
        let scores = score_batch(&params, &phi_corpus(&corpus, &schema).unwrap()).unwrap();
        let a = aggregate_distribution(&top_by_score(&corpus, &scores, 6), &schema).unwrap();
        let ours = 1.0 - loss(&a, &e, MetricChoice::Category, &schema).unwrap();
        let oracle = brute_force_best_subset(&corpus, &e, 0.5, MetricChoice::Category, &schema).unwrap();
        assert!(ours <= oracle.score + 1e-12);
    }
}
