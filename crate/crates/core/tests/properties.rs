use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use easyfirst::config::Config;
use easyfirst::easyfirst::{action_count, Action, Arc, ModelConfig, ParserModel, Pending};
use easyfirst::eval::{score, EvalOptions};
use easyfirst::oracle::OracleState;
use easyfirst::repr::{build_vocab, ReprConfig};
use easyfirst::synthetic::{random_projective_heads, random_sentence};
use easyfirst::train::{hinge_loss, TrainBatch};
use easyfirst::treebank::{heads_projective, parse_conll, validate_heads, write_conll, HeadAssignment};

/// A random single-rooted tree, projective or not.
fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[rng.gen_range(0..k)];
    }
    heads
}

fn dominates(heads: &[usize], h: usize, mut x: usize) -> bool {
    while x != 0 {
        if x == h {
            return true;
        }
        x = heads[x - 1];
    }
    h == 0
}

// Every token strictly between a head and its dependent is dominated by the
// head, with the artificial root at position 0.
fn projective_by_dominance(heads: &[usize]) -> bool {
    heads.iter().enumerate().all(|(i, &h)| {
        let d = i + 1;
        (h.min(d) + 1..h.max(d)).all(|z| dominates(heads, h, z))
    })
}

fn arc_set(arcs: &[Arc]) -> BTreeSet<(usize, usize, usize)> {
    arcs.iter().map(|a| (a.head, a.dependent, a.relation)).collect()
}

fn gold_arcs(heads: &[usize], rels: &[usize]) -> BTreeSet<(usize, usize, usize)> {
    heads
        .iter()
        .zip(rels)
        .enumerate()
        .map(|(i, (&h, &r))| (h, i + 1, r))
        .collect()
}

fn noop(_: &mut (), _: (), _: easyfirst::easyfirst::Direction, _: usize) -> Result<(), easyfirst::easyfirst::ParseError> {
    Ok(())
}

fn tiny_model(seed: u64) -> ParserModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<_> = (0..20).map(|_| random_sentence(&mut rng, 6, 4, 12)).collect();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let config = ModelConfig {
        repr: ReprConfig {
            word_dim: 6,
            pos_dim: 3,
            char_dim: 4,
            char_hidden: 3,
            char_layers: 1,
            vprime_dim: 5,
            sent_hidden: 4,
            sent_layers: 1,
            ..ReprConfig::default()
        },
        tree_hidden: 4,
        rel_dim: 3,
        mlp_hidden: 5,
    };
    ParserModel::new(config, vocab, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conll_round_trip(seed in any::<u64>(), n in 1usize..15, count in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sentences: Vec<_> = (0..count).map(|_| random_sentence(&mut rng, n, 6, 40)).collect();
        let text = write_conll(&sentences, None).unwrap();
        prop_assert_eq!(parse_conll(&text).unwrap(), sentences);
    }

    #[test]
    fn projectivity_matches_dominance_definition(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = random_tree(&mut rng, n);
        validate_heads(&heads).unwrap();
        prop_assert_eq!(heads_projective(&heads), projective_by_dominance(&heads), "{:?}", heads);
    }

    #[test]
    fn generated_trees_are_projective(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(projective_by_dominance(&random_projective_heads(&mut rng, n)));
    }

    /// After arbitrary actions, including wrong ones, some action stays valid.
    #[test]
    fn oracle_always_offers_a_valid_action(seed in any::<u64>(), n in 2usize..11, r in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = random_projective_heads(&mut rng, n);
        let rels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..r)).collect();
        let mut oracle = OracleState::new(&heads, &rels);
        let mut pending = Pending::new(vec![(); n]).unwrap();
        while pending.len() > 1 {
            let mask = oracle.valid_mask(&pending, r);
            prop_assert!(mask.iter().any(|&v| v), "no valid action; heads {:?} arcs {:?}", heads, pending.arcs());
            let k = rng.gen_range(0..action_count(pending.len(), r));
            let arc = pending.apply(&Action::from_canonical(k, r), noop).unwrap().clone();
            oracle.observe(&arc);
        }
    }

    #[test]
    fn oracle_completeness(seed in any::<u64>(), n in 1usize..11, r in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = random_projective_heads(&mut rng, n);
        let rels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..r)).collect();
        let root_rel = rels[heads.iter().position(|&h| h == 0).unwrap()];
        let mut oracle = OracleState::new(&heads, &rels);
        let mut pending = Pending::new(vec![(); n]).unwrap();
        while pending.len() > 1 {
            let valid: Vec<usize> = oracle
                .valid_mask(&pending, r)
                .iter()
                .enumerate()
                .filter_map(|(k, &v)| v.then_some(k))
                .collect();
            let k = valid[rng.gen_range(0..valid.len())];
            let arc = pending.apply(&Action::from_canonical(k, r), noop).unwrap().clone();
            oracle.observe(&arc);
        }
        let arcs = pending.finish(root_rel).unwrap();
        prop_assert_eq!(arc_set(&arcs), gold_arcs(&heads, &rels));
    }

    /// While a dependent's gold head is still pending, a valid action builds
    /// exactly the gold arc.
    #[test]
    fn oracle_soundness(seed in any::<u64>(), n in 2usize..11, r in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = random_projective_heads(&mut rng, n);
        let rels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..r)).collect();
        let mut oracle = OracleState::new(&heads, &rels);
        let mut pending = Pending::new(vec![(); n]).unwrap();
        while pending.len() > 1 {
            for k in 0..action_count(pending.len(), r) {
                let a = Action::from_canonical(k, r);
                if oracle.is_valid(&pending, &a) {
                    let (h, d) = pending.endpoints(&a).unwrap();
                    prop_assert_eq!(a.relation, rels[d - 1]);
                    if !oracle.head_gone(d) {
                        prop_assert_eq!(h, heads[d - 1]);
                    }
                }
            }
            let k = rng.gen_range(0..action_count(pending.len(), r));
            let arc = pending.apply(&Action::from_canonical(k, r), noop).unwrap().clone();
            oracle.observe(&arc);
        }
    }

    #[test]
    fn eval_invariants(seed in any::<u64>(), count in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gold: Vec<_> = (0..count).map(|_| { let n = rng.gen_range(1..9); random_sentence(&mut rng, n, 3, 10) }).collect();
        let pred: Vec<Vec<HeadAssignment>> = gold
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .map(|t| {
                        let head = if rng.gen_bool(0.3) { rng.gen_range(0..=s.len()) } else { t.head };
                        let deprel = if rng.gen_bool(0.3) { "r0".to_owned() } else { t.deprel.clone() };
                        HeadAssignment::new(head, deprel)
                    })
                    .collect()
            })
            .collect();
        let opts = EvalOptions::default();
        let r = score(&gold, &pred, &opts).unwrap();

        let (mut total, mut uh, mut ul) = (0usize, 0usize, 0usize);
        for (g, p) in gold.iter().zip(&pred) {
            for (t, a) in g.tokens.iter().zip(p) {
                total += 1;
                uh += (t.head == a.head) as usize;
                ul += (t.head == a.head && t.deprel == a.deprel) as usize;
            }
        }
        prop_assert_eq!(r.counts.tokens, total);
        prop_assert_eq!(r.counts.correct_heads, uh);
        prop_assert_eq!(r.counts.correct_labels, ul);
        prop_assert!(r.las <= r.uas);

        let mut order: Vec<usize> = (0..count).collect();
        for i in (1..count).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let g2: Vec<_> = order.iter().map(|&i| gold[i].clone()).collect();
        let p2: Vec<_> = order.iter().map(|&i| pred[i].clone()).collect();
        let r2 = score(&g2, &p2, &opts).unwrap();
        prop_assert_eq!(r2.counts, r.counts);
        prop_assert_eq!(r2.uas, r.uas);
        prop_assert_eq!(r2.per_relation, r.per_relation);
    }

    #[test]
    fn hinge_is_nonnegative_and_zero_iff_margin(
        scores in prop::collection::vec(-3.0f64..3.0, 2..30),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut valid: Vec<bool> = scores.iter().map(|_| rng.gen_bool(0.3)).collect();
        valid[0] = true;
        let last = valid.len() - 1;
        valid[last] = false;
        let best_valid = scores.iter().zip(&valid).filter(|(_, &v)| v).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        let best_invalid = scores.iter().zip(&valid).filter(|(_, &v)| !v).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        match hinge_loss(&scores, &valid).unwrap() {
            Some(h) => {
                prop_assert!(h.loss > 0.0);
                prop_assert!(best_valid < best_invalid + 1.0);
            }
            None => prop_assert!(best_valid >= best_invalid + 1.0),
        }
    }

    #[test]
    fn update_count_follows_threshold(errors in prop::collection::vec(0usize..20, 1..60), threshold in 1usize..60) {
        let mut batch = TrainBatch::new(threshold);
        let mut steps = 0;
        for &e in &errors {
            batch.add(e, e as f64);
            if batch.is_full() {
                steps += 1;
                batch.reset();
            }
        }
        let flush = !batch.is_empty();
        // Each step consumes strictly more than `threshold` errors, so steps
        // are bounded by the total, and a flush leaves at most `threshold`.
        let total: usize = errors.iter().sum();
        prop_assert!(steps * (threshold + 1) <= total);
        if flush {
            prop_assert!(batch.errors() <= threshold);
        }
        let mut acc = 0;
        let mut expected = 0;
        for &e in &errors {
            acc += e;
            if acc > threshold {
                expected += 1;
                acc = 0;
            }
        }
        prop_assert_eq!(steps, expected);
        prop_assert_eq!(flush, acc > 0);
    }

    #[test]
    fn config_render_round_trips(
        epochs in 1usize..100,
        seed in any::<u64>(),
        lr in 1e-6f64..1.0,
        use_char in any::<bool>(),
        dropout in prop::option::of(0.01f64..2.0),
    ) {
        let mut c = Config::default();
        c.training.epochs = epochs;
        c.training.seed = seed;
        c.training.learning_rate = lr;
        c.training.word_dropout = dropout;
        c.model_config.repr.use_char = use_char;
        prop_assert_eq!(Config::parse(&c.render(), None).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn untrained_parses_are_well_formed(model_seed in 0u64..4, seed in any::<u64>(), n in 1usize..14) {
        let model = tiny_model(model_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sentence(&mut rng, n, 4, 20);
        let out = model.parse(&s).unwrap();
        prop_assert_eq!(out.len(), n);
        let heads: Vec<usize> = out.iter().map(|a| a.head).collect();
        validate_heads(&heads).unwrap();
        prop_assert_eq!(heads.iter().filter(|&&h| h == 0).count(), 1);
        prop_assert!(heads_projective(&heads));
        prop_assert!(projective_by_dominance(&heads));
    }
}
