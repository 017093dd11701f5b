mod common;

use std::collections::BTreeSet;

use common::*;
use fsrl_core::diff::{AdamConfig, Tape};
use fsrl_core::kg::{generate_synthetic_kg, EmbeddingTable, KnowledgeGraph, RelationTask, SynthSpec, SyntheticKg};
use fsrl_core::model::{Fsrl, ModelConfig, Variant};
use fsrl_core::training::*;
use fsrl_core::{rng, Error};
use proptest::prelude::*;

struct Fixture {
    syn: SyntheticKg,
    table: EmbeddingTable<f64>,
}

fn fixture(dim: usize, epochs: usize) -> Fixture {
    let syn = generate_synthetic_kg(&SynthSpec::default(), 7).unwrap();
    let pg = pretraining_graph(&syn.graph, &syn.background, &syn.split);
    let cfg = PretrainConfig {
        dim,
        epochs,
        ..PretrainConfig::default()
    };
    let table = pretrain_embeddings(&pg, &cfg).unwrap();
    Fixture { syn, table }
}

fn model(dim: usize, variant: Variant, seed: u64) -> Fsrl<f64> {
    let cfg = ModelConfig {
        dim,
        variant: variant.config(),
        ..ModelConfig::default()
    };
    Fsrl::new(cfg, seed).unwrap()
}

fn small_train(max_episodes: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        max_episodes,
        eval_interval: 25,
        adam: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn loss_of(m: &Fsrl<f64>, f: &Fixture, ep: &Episode, margin: f64, gamma: f64) -> LossValues {
    let mut tape = Tape::new();
    let nodes = episode_loss(m, &m.store, &mut tape, ep, &f.syn.background, &f.table, margin, gamma).unwrap();
    LossValues {
        total: tape.scalar_value(nodes.total),
        rank: tape.scalar_value(nodes.rank),
        reconstruction: nodes.reconstruction.map_or(0.0, |v| tape.scalar_value(v)),
    }
}

#[test]
fn negatives_are_never_true_tails() {
    let f = fixture(4, 0);
    let task = &f.syn.split.meta_train[0];
    let graph = &f.syn.graph;
    let mut r = rng::seeded(3);
    let mut drawn = 0;
    while drawn < 1000 {
        let ep = sample_episode(task, graph, 3, 1, &mut r).unwrap();
        for &(h, t) in &ep.negatives {
            assert!(!graph.contains(h, task.relation, t));
            assert!(task.tail_pool.contains(&t));
            drawn += 1;
        }
    }
}

#[test]
fn k_plus_one_pairs_force_the_partition() {
    let f = fixture(4, 0);
    let mut task: RelationTask = f.syn.split.meta_train[0].clone();
    task.train_pairs.truncate(4);
    let ep = sample_episode(&task, &f.syn.graph, 3, 1, &mut rng::seeded(0)).unwrap();
    assert_eq!(ep.reference.len(), 3);
    assert_eq!(ep.positives.len(), 1);
    let mut all: Vec<_> = ep.reference.iter().chain(&ep.positives).copied().collect();
    all.sort_unstable();
    let mut want = task.train_pairs.clone();
    want.sort_unstable();
    assert_eq!(all, want);

    task.train_pairs.truncate(3);
    assert!(matches!(
        sample_episode(&task, &f.syn.graph, 3, 1, &mut rng::seeded(0)),
        Err(Error::SkipTask(_))
    ));
}

#[test]
fn episodes_are_seeded() {
    let f = fixture(4, 0);
    let task = &f.syn.split.meta_train[2];
    let a = sample_episode(task, &f.syn.graph, 3, 8, &mut rng::seeded(21)).unwrap();
    let b = sample_episode(task, &f.syn.graph, 3, 8, &mut rng::seeded(21)).unwrap();
    assert_eq!(a, b);
    let distinct: BTreeSet<_> = a.reference.iter().chain(&a.positives).collect();
    assert_eq!(distinct.len(), 11);
}

#[test]
fn hinge_closed_forms() {
    assert_eq!(ranking_loss(&[10.0], &[2.0], 5.0).unwrap(), 0.0);
    assert_eq!(ranking_loss(&[3.0], &[2.0], 5.0).unwrap(), 4.0);
    assert!(matches!(ranking_loss(&[1.0, 2.0], &[0.0], 5.0), Err(Error::LengthMismatch { .. })));
}

#[test]
fn reconstruction_closed_forms() {
    let e = vec![vec![0.5, -1.0], vec![2.0, 3.0]];
    assert_eq!(reconstruction_loss(&e, &e).unwrap(), 0.0);
    assert_eq!(reconstruction_loss(&[vec![0.0, 0.0]], &[vec![1.0, 2.0]]).unwrap(), 5.0);
    assert!(reconstruction_loss(&e, &e[..1]).is_err());
    assert!(reconstruction_loss(&[vec![0.0]], &[vec![1.0, 2.0]]).is_err());
}

#[test]
fn weighted_sum_arithmetic() {
    let mut tape = Tape::<f64>::new();
    let rank = tape.constant(fsrl_core::diff::Tensor::scalar(2.0));
    let re = tape.constant(fsrl_core::diff::Tensor::scalar(1000.0));
    let w = tape.scale(re, 1e-4);
    let total = tape.add(rank, w).unwrap();
    assert!((tape.scalar_value(total) - 2.1).abs() < 1e-12);
}

#[test]
fn losses_match_scalar_loops() {
    let mut r = rng::seeded(8);
    for _ in 0..100 {
        use rand::Rng;
        let n = r.gen_range(1..10);
        let pos: Vec<f64> = (0..n).map(|_| r.gen_range(-10.0..10.0)).collect();
        let neg: Vec<f64> = (0..n).map(|_| r.gen_range(-10.0..10.0)).collect();
        let margin = r.gen_range(0.1..6.0);
        let got = ranking_loss(&pos, &neg, margin).unwrap();
        assert!((got - ranking_loss_oracle(&pos, &neg, margin)).abs() < 1e-12);

        let k = r.gen_range(1..5);
        let w = r.gen_range(1..9);
        let a: Vec<Vec<f64>> = (0..k).map(|_| (0..w).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let b: Vec<Vec<f64>> = (0..k).map(|_| (0..w).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        assert!((reconstruction_loss(&a, &b).unwrap() - reconstruction_oracle(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn gamma_zero_leaves_the_ranking_loss() {
    let f = fixture(4, 2);
    let m = model(4, Variant::Fsrl, 1);
    let ep = sample_episode(&f.syn.split.meta_train[0], &f.syn.graph, 3, 4, &mut rng::seeded(1)).unwrap();
    let v = loss_of(&m, &f, &ep, 5.0, 0.0);
    assert_eq!(v.total, v.rank);
    assert!(v.reconstruction > 0.0);
}

#[test]
fn joint_loss_matches_composed_oracles() {
    let f = fixture(4, 2);
    let d = 4;
    for seed in 0..10 {
        let mut m = model(d, Variant::Fsrl, seed);
        randomize(&mut m.store, &mut rng::seeded(100 + seed), 0.3);
        let task = &f.syn.split.meta_train[seed as usize % f.syn.split.meta_train.len()];
        let ep = sample_episode(task, &f.syn.graph, 3, 3, &mut rng::seeded(seed)).unwrap();
        let (g, t) = (&f.syn.background, &f.table);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&p, &n) in ep.positives.iter().zip(&ep.negatives) {
            pos.push(score_oracle(&m, g, t, p, &ep.reference));
            neg.push(score_oracle(&m, g, t, n, &ep.reference));
        }
        let pairs: Vec<_> = ep.reference.iter().map(|&(h, tl)| pair_oracle(&m, g, t, h, tl)).collect();
        let agg = aggregate(&m.store, d, &pairs, m.config.variant.aggregate_mode);
        let rank = ranking_loss_oracle(&pos, &neg, 5.0);
        let re = reconstruction_oracle(&agg.decoder, &pairs);
        let got = loss_of(&m, &f, &ep, 5.0, 0.5);
        assert!((got.rank - rank).abs() < 1e-10, "{} vs {rank}", got.rank);
        assert!((got.reconstruction - re).abs() < 1e-10);
        assert!((got.total - (rank + 0.5 * re)).abs() < 1e-10);
    }
}

#[test]
fn decoder_free_variants_report_no_reconstruction() {
    let f = fixture(4, 2);
    let ep = sample_episode(&f.syn.split.meta_train[1], &f.syn.graph, 3, 4, &mut rng::seeded(4)).unwrap();
    for v in [Variant::As2a, Variant::As2c, Variant::MaxP, Variant::MeanP, Variant::Max] {
        let m = model(4, v, 2);
        let mut tape = Tape::new();
        let nodes = episode_loss(&m, &m.store, &mut tape, &ep, &f.syn.background, &f.table, 5.0, 1.0).unwrap();
        assert!(nodes.reconstruction.is_none(), "{}", v.name());
    }
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let f = fixture(4, 2);
    let m = model(4, Variant::Fsrl, 3);
    let init = m.store.clone();
    let out = meta_train(m, &f.syn.split, &f.syn.background, &f.table, &small_train(60, 0.0), &mut ()).unwrap();
    assert_eq!(out.episodes, 60);
    assert!(out.model.store.same_values(&init));
}

#[test]
fn seeded_training_is_reproducible() {
    let f = fixture(4, 2);
    let run = || {
        let out = meta_train(model(4, Variant::Fsrl, 5), &f.syn.split, &f.syn.background, &f.table, &small_train(50, 0.001), &mut ()).unwrap();
        (out.log, out.model.store)
    };
    let (la, sa) = run();
    let (lb, sb) = run();
    assert_eq!(la, lb);
    assert!(sa.same_values(&sb));
    assert_eq!(la.steps().count(), 50);
    assert!(la.to_jsonl().unwrap().lines().count() >= 52);
}

#[test]
fn invalid_config_is_rejected_before_training() {
    let f = fixture(4, 0);
    let cfg = TrainConfig {
        batch_size: 0,
        ..small_train(10, 0.001)
    };
    assert!(matches!(
        meta_train(model(4, Variant::Fsrl, 0), &f.syn.split, &f.syn.background, &f.table, &cfg, &mut ()),
        Err(Error::Config(_))
    ));
}

#[test]
fn reconstruction_falls_with_training() {
    let f = fixture(16, 20);
    let init = model(16, Variant::Fsrl, 0);
    let cfg = TrainConfig {
        batch_size: 16,
        max_episodes: 2000,
        eval_interval: 250,
        patience: 100,
        ..TrainConfig::default()
    };
    let trained = meta_train(init.clone(), &f.syn.split, &f.syn.background, &f.table, &cfg, &mut ()).unwrap();
    let mut r = rng::seeded(77);
    let episodes: Vec<Episode> = (0..100)
        .map(|i| {
            let task = &f.syn.split.meta_train[i % f.syn.split.meta_train.len()];
            sample_episode(task, &f.syn.graph, 3, 4, &mut r).unwrap()
        })
        .collect();
    let mean_re = |m: &Fsrl<f64>| {
        episodes.iter().map(|ep| loss_of(m, &f, ep, 5.0, 1e-4).reconstruction).sum::<f64>() / episodes.len() as f64
    };
    let (before, after) = (mean_re(&init), mean_re(&trained.model));
    assert!(after < before, "L_re {before} -> {after}");
}

#[test]
fn translation_scores_separate_true_triples() {
    let f = fixture(16, 20);
    let g: &KnowledgeGraph = &f.syn.background;
    let n = g.num_entities() as u32;
    let mut r = rng::seeded(2);
    let (mut pos, mut neg, mut count) = (0.0, 0.0, 0);
    for t in g.triples() {
        use rand::Rng;
        let corrupt = fsrl_core::kg::EntityId(r.gen_range(0..n));
        if g.contains(t.head, t.relation, corrupt) {
            continue;
        }
        pos += transe_score(&f.table, t.head, t.relation, t.tail).unwrap();
        neg += transe_score(&f.table, t.head, t.relation, corrupt).unwrap();
        count += 1;
    }
    assert!(pos / count as f64 > neg / count as f64);
    assert!(f.table.covers(&f.syn.graph));
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let syn = generate_synthetic_kg(&SynthSpec::default(), 7).unwrap();
    let pg = pretraining_graph(&syn.graph, &syn.background, &syn.split);
    let cfg = |epochs| PretrainConfig {
        dim: 6,
        epochs,
        seed: 4,
        ..PretrainConfig::default()
    };
    let a = pretrain_embeddings::<f64>(&pg, &cfg(0)).unwrap();
    let b = pretrain_embeddings::<f64>(&pg, &cfg(0)).unwrap();
    let c = pretrain_embeddings::<f64>(&pg, &cfg(1)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for e in syn.graph.entity_ids() {
        let v = a.entity(e).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pretraining_sees_no_query_pairs() {
    let syn = generate_synthetic_kg(&SynthSpec::default(), 7).unwrap();
    let pg = pretraining_graph(&syn.graph, &syn.background, &syn.split);
    for task in syn.split.meta_valid.iter().chain(&syn.split.meta_test) {
        for q in &task.test_pairs {
            let also_reference = task.train_pairs.contains(&(q.head, q.tail));
            assert!(also_reference || !pg.contains(q.head, task.relation, q.tail));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn joint_loss_is_non_negative(seed in 0u64..10_000, variant in 0usize..9, gamma in 0.0f64..2.0) {
        let f = fixture(4, 0);
        let v = Variant::ALL[variant];
        let mut m = model(4, v, seed);
        randomize(&mut m.store, &mut rng::seeded(seed), 1.0);
        let task = &f.syn.split.meta_train[seed as usize % f.syn.split.meta_train.len()];
        let ep = sample_episode(task, &f.syn.graph, 3, 4, &mut rng::seeded(seed)).unwrap();
        let l = loss_of(&m, &f, &ep, 5.0, gamma);
        prop_assert!(l.total >= 0.0 && l.rank >= 0.0 && l.reconstruction >= 0.0);
    }

    #[test]
    fn hinge_vanishes_iff_every_margin_holds(
        pairs in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..12),
        margin in 0.1f64..8.0,
    ) {
        let (pos, neg): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let loss = ranking_loss(&pos, &neg, margin).unwrap();
        let all_hold = pos.iter().zip(&neg).all(|(p, n)| p - n >= margin);
        prop_assert!(loss >= 0.0);
        prop_assert_eq!(loss == 0.0, all_hold);
    }
}
