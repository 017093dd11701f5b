mod common;

use common::*;
use fsrl_core::evaluation::*;
use fsrl_core::kg::{
    generate_synthetic_kg, EmbeddingTable, EntityId, KnowledgeGraph, RankingMode, RelationId, SynthSpec, SyntheticKg,
};
use fsrl_core::model::{Fsrl, ModelConfig, NeighborSampling, Variant};
use fsrl_core::training::{meta_train, pretrain_embeddings, pretraining_graph, PretrainConfig, TrainConfig};
use fsrl_core::{rng, Error};
use proptest::prelude::*;
use rand::Rng;
use serde_json::json;

fn results(ranks: &[usize]) -> Vec<QueryResult> {
    ranks
        .iter()
        .enumerate()
        .map(|(i, &rank)| QueryResult {
            head: EntityId(i as u32),
            relation: RelationId(0),
            tail: EntityId(0),
            rank,
            candidates: 50,
        })
        .collect()
}

struct Fixture {
    syn: SyntheticKg,
    table: EmbeddingTable<f64>,
}

fn fixture(dim: usize) -> Fixture {
    let syn = generate_synthetic_kg(&SynthSpec::default(), 7).unwrap();
    let pg = pretraining_graph(&syn.graph, &syn.background, &syn.split);
    let table = pretrain_embeddings(
        &pg,
        &PretrainConfig {
            dim,
            epochs: 10,
            ..PretrainConfig::default()
        },
    )
    .unwrap();
    Fixture { syn, table }
}

fn model(dim: usize, variant: Variant, seed: u64) -> Fsrl<f64> {
    Fsrl::new(
        ModelConfig {
            dim,
            variant: variant.config(),
            ..ModelConfig::default()
        },
        seed,
    )
    .unwrap()
}

fn tiny_train() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        max_episodes: 40,
        eval_interval: 20,
        ..TrainConfig::default()
    }
}

#[test]
fn strict_winner_ranks_first() {
    assert_eq!(rank_of(&[0.9, 0.1, 0.2], 0).unwrap(), 1);
}

#[test]
fn ties_rank_against_the_truth() {
    assert_eq!(rank_of(&[0.5, 0.7, 0.5, 0.3], 0).unwrap(), 3);
    assert_eq!(rank_of(&[f64::NAN, 0.1], 0).unwrap(), 2);
    assert!(matches!(rank_of::<f64>(&[], 0), Err(Error::Empty(_))));
    assert!(rank_of(&[0.1], 3).is_err());
}

#[test]
fn metrics_closed_forms() {
    let m = compute_metrics(&results(&[1, 2, 4])).unwrap();
    assert!((m.mrr - 1.75 / 3.0).abs() < 1e-15);
    assert!((m.hits_at_1 - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!((m.hits_at_5, m.hits_at_10), (1.0, 1.0));
    let ones = compute_metrics(&results(&[1; 7])).unwrap();
    assert_eq!(ones.hits(), [1.0; 3]);
    assert_eq!(ones.mrr, 1.0);
    assert!(compute_metrics(&[]).is_err());
}

#[test]
fn metrics_match_scalar_loop_on_random_ranks() {
    let mut r = rng::seeded(12);
    let ranks: Vec<usize> = (0..1000).map(|_| r.gen_range(1..=50)).collect();
    let m = compute_metrics(&results(&ranks)).unwrap();
    let (h1, h5, h10, mrr) = metrics_oracle(&ranks);
    assert!((m.hits_at_1 - h1).abs() < 1e-12);
    assert!((m.hits_at_5 - h5).abs() < 1e-12);
    assert!((m.hits_at_10 - h10).abs() < 1e-12);
    assert!((m.mrr - mrr).abs() < 1e-12);
    assert!(m.is_lawful());
}

#[test]
fn random_scores_average_to_the_harmonic_expectation() {
    let expected = random_ranking_mrr(50);
    assert!((expected - 0.08998).abs() < 1e-4);
    let mut r = rng::seeded(4);
    let trials = 20_000;
    let mut total = 0.0;
    for _ in 0..trials {
        let scores: Vec<f64> = (0..50).map(|_| r.gen()).collect();
        total += 1.0 / rank_of(&scores, 0).unwrap() as f64;
    }
    assert!((total / trials as f64 - expected).abs() < 0.005);
}

#[test]
fn fingerprint_is_stable_and_content_sensitive() {
    let a = TrainConfig::default();
    let f = fingerprint(&a).unwrap();
    assert_eq!(f, fingerprint(&a.clone()).unwrap());
    assert_eq!(f.len(), 64);
    let b = TrainConfig { seed: 1, ..a };
    assert_ne!(f, fingerprint(&b).unwrap());
}

#[test]
fn median_handles_odd_and_even_lengths() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    assert!(median(&[]).is_nan());
}

#[test]
fn evaluation_is_deterministic_and_lawful() {
    let f = fixture(8);
    let m = model(8, Variant::Fsrl, 3);
    let a = evaluate_split(&m, &f.syn.split.meta_test, &f.syn.background, &f.table).unwrap();
    let b = evaluate_split(&m, &f.syn.split.meta_test, &f.syn.background, &f.table).unwrap();
    assert_eq!(a, b);
    assert!(a.is_lawful());
    assert_eq!(a.relations.len(), f.syn.split.meta_test.len());
    let queries: usize = f.syn.split.meta_test.iter().map(|t| t.test_pairs.len()).sum();
    assert_eq!(a.aggregate.queries, queries);
    let table = a.with_fingerprint("abc").table();
    assert!(table.starts_with("# fingerprint abc\n"));
    assert_eq!(table.lines().count(), 2 + queries.min(1) * (f.syn.split.meta_test.len() + 1));
}

#[test]
fn ranks_agree_with_sorting_the_oracle_scores() {
    let f = fixture(4);
    let g = &f.syn.background;
    for seed in 0..4 {
        let mut m = model(4, Variant::ALL[seed as usize * 2], seed);
        randomize(&mut m.store, &mut rng::seeded(seed), 0.5);
        let task = &f.syn.split.meta_test[seed as usize % f.syn.split.meta_test.len()];
        let refs = task.reference();
        let mut fwd = m.forward(g, &f.table, NeighborSampling::Canonical);
        let reference = fwd.reference(&refs).unwrap();
        for pair in task.test_pairs.iter().take(3) {
            let got = rank_candidates(&mut fwd, &reference, task.relation, pair).unwrap();
            assert_eq!(got.len(), 1);
            let c = &pair.candidates.candidates;
            let scores: Vec<f64> = c.iter().map(|&t| score_oracle(&m, g, &f.table, (pair.head, t), &refs)).collect();
            let truth = c.iter().position(|&t| t == pair.tail).unwrap();
            assert_eq!(got[0].rank, sort_rank(&scores, truth));
            assert_eq!(got[0].candidates, c.len());
        }
    }
}

#[test]
fn untrained_model_on_unstructured_inputs_ranks_near_chance() {
    // tails drawn uniformly from their type, no neighbors and random inputs:
    // nothing links a query's truth to the reference pairs
    let spec = SynthSpec {
        noise_rate: 0.999,
        ..SynthSpec::default()
    };
    let syn = generate_synthetic_kg(&spec, 7).unwrap();
    let isolated = KnowledgeGraph::new(syn.graph.entities().clone(), syn.graph.relations().clone(), []);
    let seeds = 12;
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut r = rng::seeded(900 + seed);
        let table = random_table(&mut r, syn.graph.num_entities(), syn.graph.num_relations(), 8);
        let m = model(8, Variant::Fsrl, seed);
        total += evaluate_split(&m, &syn.split.meta_test, &isolated, &table).unwrap().aggregate.mrr;
    }
    let mean = total / seeds as f64;
    assert!((mean - random_ranking_mrr(50)).abs() < 0.02, "mean untrained MRR {mean}");
}

#[test]
fn training_beats_the_untrained_model() {
    let f = fixture(8);
    let init = model(8, Variant::Fsrl, 1);
    let before = evaluate_split(&init, &f.syn.split.meta_test, &f.syn.background, &f.table).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        max_episodes: 1500,
        eval_interval: 250,
        ..TrainConfig::default()
    };
    let out = meta_train(init, &f.syn.split, &f.syn.background, &f.table, &cfg, &mut ()).unwrap();
    let after = evaluate_split(&out.model, &f.syn.split.meta_test, &f.syn.background, &f.table).unwrap();
    assert!(after.aggregate.mrr >= before.aggregate.mrr, "{} -> {}", before.aggregate.mrr, after.aggregate.mrr);
}

#[test]
fn export_rows_cover_every_candidate_with_true_labels() {
    let f = fixture(4);
    let m = model(4, Variant::Fsrl, 2);
    let task = &f.syn.split.meta_test[0];
    let table = export_embeddings(&m, task, &f.syn.background, &f.table).unwrap();
    let total: usize = task.test_pairs.iter().map(|p| p.candidates.candidates.len()).sum();
    assert_eq!(table.rows.len(), total);
    let positives = table.rows.iter().filter(|r| r.positive).count();
    assert_eq!(positives, task.test_pairs.len());
    for row in &table.rows {
        assert_eq!(row.positive, f.syn.graph.contains(row.head, task.relation, row.tail));
        assert_eq!(row.embedding.len(), 8);
    }
    for axis in 0..2 {
        let mean = table.rows.iter().map(|r| r.projection[axis]).sum::<f64>() / total as f64;
        assert!(mean.abs() < 1e-10, "axis {axis} mean {mean}");
    }
    let tsv = table.to_tsv(&f.syn.graph, "fp");
    assert_eq!(tsv.lines().count(), total + 2);
    assert!(tsv.lines().next().unwrap().contains("fingerprint fp"));
    assert_eq!(tsv.lines().nth(1).unwrap().split('\t').count(), 3 + 8 + 2);
}

#[test]
fn principal_components_of_a_line_lie_on_the_first_axis() {
    let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, 2.0 * i as f64, -1.0]).collect();
    let pcs = principal_components(&rows);
    assert_eq!(pcs.len(), 9);
    for (i, p) in pcs.iter().enumerate() {
        assert!((p[0].abs() - ((i as f64 - 4.0) * 5f64.sqrt()).abs()).abs() < 1e-9);
        assert!(p[1].abs() < 1e-9);
    }
}

#[test]
fn ablation_enumerates_nine_reproducible_rows() {
    let f = fixture(4);
    let base = ModelConfig {
        dim: 4,
        ..ModelConfig::default()
    };
    let run = || {
        run_ablation_matrix(&f.syn.split, &f.syn.background, &f.table, base, &tiny_train(), &Variant::ALL, &[0]).unwrap()
    };
    let a = run();
    let names: Vec<_> = a.rows.iter().map(|r| r.variant.name()).collect();
    assert_eq!(
        names,
        ["FSRL", "AS_1", "AS_2a", "AS_2b", "AS_2c", "AS_3", "GMatching-MaxP", "GMatching-MeanP", "GMatching-Max"]
    );
    assert!(a.rows.iter().all(|r| r.reports.len() == 1 && r.reports[0].is_lawful()));
    assert_eq!(a.row(Variant::Fsrl).unwrap(), run().row(Variant::Fsrl).unwrap());
    assert_eq!(a.table().lines().count(), 10);
}

#[test]
fn sweep_emits_one_point_per_k_differing_only_in_k() {
    let f = fixture(4);
    let base = ModelConfig {
        dim: 4,
        ..ModelConfig::default()
    };
    let ks = [1, 3, 5];
    let rep = sweep_few_shot_size(&f.syn.split, &f.syn.split_config, &f.syn.background, &f.table, base, &tiny_train(), &ks, &[2]).unwrap();
    assert_eq!(rep.points.len(), 3);
    for (p, &k) in rep.points.iter().zip(&ks) {
        assert_eq!(p.few_shot, k);
        assert!(p.skipped.is_empty());
        let cfg = TrainConfig {
            few_shot: k,
            seed: 2,
            ..tiny_train()
        };
        let want = fingerprint(&json!({ "model": base, "train": cfg })).unwrap();
        assert_eq!(p.reports[0].fingerprint, want);
    }
    assert_eq!(rep.series().lines().count(), 4);
    assert!(RankingMode::default() == RankingMode::Filtered);
}

proptest! {
    #[test]
    fn tie_handling_matches_the_sort_oracle(
        levels in prop::collection::vec(0u8..4, 1..60),
        truth_pick in any::<prop::sample::Index>(),
    ) {
        let scores: Vec<f64> = levels.iter().map(|&l| l as f64 * 0.25).collect();
        let truth = truth_pick.index(scores.len());
        prop_assert_eq!(rank_of(&scores, truth).unwrap(), sort_rank(&scores, truth));
    }

    #[test]
    fn reported_metrics_are_lawful(ranks in prop::collection::vec(1usize..60, 1..200)) {
        let m = compute_metrics(&results(&ranks)).unwrap();
        prop_assert!(m.is_lawful());
        prop_assert_eq!(m.mrr == 1.0, ranks.iter().all(|&r| r == 1));
    }
}
