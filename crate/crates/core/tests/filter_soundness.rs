use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use novelword::corpus::{CountMode, Origin, ParallelCorpus, Side, Token};
use novelword::fixtures::{generate, pipeline_fixture, PipelineFixtureSpec, ToyLanguageSpec};
use novelword::wordselect::{sample_references, select_words, split_corpus, SelectionCriteria};
use proptest::prelude::*;

#[test]
fn hundred_thousand_pairs_fifty_words() {
    let start = Instant::now();
    let fx = pipeline_fixture(&PipelineFixtureSpec {
        n_genuine: 100_000,
        n_backtranslation: 0,
        n_test: 2_000,
        n_rare: 50,
        train_occurrences: 25,
        backtranslation_occurrences: 0,
        test_occurrences: 6,
        ..PipelineFixtureSpec::default()
    });
    let train = fx.genuine;
    let criteria = SelectionCriteria {
        max_words: 50,
        ..SelectionCriteria::default()
    };
    let words = select_words(&train, &fx.test, &criteria).unwrap();
    let selected: BTreeSet<&Token> = words.iter().map(|w| &w.target_word).collect();
    let planted: BTreeSet<&Token> = fx.rare_words.iter().map(|(t, _)| t).collect();
    assert_eq!(selected, planted);

    let split = split_corpus(&train, &words);

    // Nothing of an evaluation word survives on the target side.
    for p in split.filtered_training.pairs() {
        for w in &selected {
            assert!(!p.target.contains(w), "pair {} still has {w}", p.id);
        }
    }
    for w in &selected {
        assert_eq!(split.filtered_training.count_occurrences(w, Side::Target), 0);
    }

    // Kept and held-out pairs partition the corpus.
    let kept: HashSet<u64> = split.filtered_training.pairs().iter().map(|p| p.id).collect();
    let held: HashSet<u64> = split.held_out_pool.values().flatten().map(|p| p.id).collect();
    assert!(kept.is_disjoint(&held));
    assert_eq!(kept.len() + held.len(), train.len());
    assert_eq!(split.held_out_len(), held.len());

    // Each pool is exactly the pairs containing its word.
    for ew in &split.evaluation_words {
        let w = &ew.target_word;
        let expected: Vec<u64> = train.pairs().iter().filter(|p| p.target.contains(w)).map(|p| p.id).collect();
        let pool: Vec<u64> = split.held_out_pool[w].iter().map(|p| p.id).collect();
        assert_eq!(pool, expected);
        assert_eq!(ew.held_out, expected);
        assert_eq!(pool.len(), 25);
    }
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn exclusions_apply_after_ranking() {
    let fx = pipeline_fixture(&PipelineFixtureSpec::default());
    let train = fx.genuine.concat(fx.backtranslation).unwrap();
    let all = SelectionCriteria {
        max_words: 6,
        ..SelectionCriteria::default()
    };
    let words = select_words(&train, &fx.test, &all).unwrap();
    assert_eq!(words.len(), 6);
    let excluded: BTreeSet<Token> = [Token::new("w0").unwrap(), Token::new("w3").unwrap()].into();
    let fewer = select_words(
        &train,
        &fx.test,
        &SelectionCriteria {
            exclusion_list: excluded.clone(),
            ..all
        },
    )
    .unwrap();
    // The freed slots are not refilled from further down the ranking.
    assert_eq!(fewer.len(), 4);
    assert!(fewer.iter().all(|w| !excluded.contains(&w.target_word)));
}

#[test]
fn sentence_counting_mode() {
    let train = ParallelCorpus::from_lines(
        [("a", "x x y"), ("b", "x y"), ("c", "y")],
        Origin::Genuine,
    )
    .unwrap();
    let test = train.clone();
    let criteria = |mode| SelectionCriteria {
        min_train_count: 3,
        min_test_count: 3,
        count_mode: mode,
        ..SelectionCriteria::default()
    };
    let by_token: Vec<String> = select_words(&train, &test, &criteria(CountMode::Token))
        .unwrap()
        .iter()
        .map(|w| w.target_word.to_string())
        .collect();
    assert_eq!(by_token, ["x", "y"]);
    let by_sentence: Vec<String> = select_words(&train, &test, &criteria(CountMode::Sentence))
        .unwrap()
        .iter()
        .map(|w| w.target_word.to_string())
        .collect();
    assert_eq!(by_sentence, ["y"]);
}

fn toy(n: usize, vocab: usize, seed: u64) -> ParallelCorpus {
    generate(&ToyLanguageSpec {
        vocab_size: vocab,
        n_pairs: n,
        seed,
        ..Default::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selection_ignores_pair_order(n in 20usize..200, vocab in 5usize..30, seed in 0u64..500, rot in 0usize..200) {
        let train = toy(n, vocab, seed);
        let test = toy(n / 2 + 1, vocab, seed + 1);
        let mut pairs = train.pairs().to_vec();
        let k = rot % pairs.len();
        pairs.rotate_left(k);
        pairs.reverse();
        let shuffled = ParallelCorpus::new(pairs).unwrap();
        let criteria = SelectionCriteria { min_train_count: 3, min_test_count: 1, max_words: 7, ..SelectionCriteria::default() };
        let a = select_words(&train, &test, &criteria).unwrap();
        let b = select_words(&shuffled, &test, &criteria).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn split_partitions(n in 20usize..200, vocab in 5usize..30, seed in 0u64..500, max_words in 1usize..6) {
        let train = toy(n, vocab, seed);
        let criteria = SelectionCriteria { min_train_count: 1, min_test_count: 1, max_words, ..SelectionCriteria::default() };
        let words = select_words(&train, &train, &criteria).unwrap();
        let split = split_corpus(&train, &words);
        let held: HashSet<u64> = split.held_out_pool.values().flatten().map(|p| p.id).collect();
        prop_assert_eq!(split.filtered_training.len() + held.len(), train.len());
        for p in split.filtered_training.pairs() {
            prop_assert!(words.iter().all(|w| !p.target.contains(&w.target_word)));
        }
        for id in &held {
            let p = train.get(*id).unwrap();
            prop_assert!(words.iter().any(|w| p.target.contains(&w.target_word)));
        }
    }

    #[test]
    fn reference_draws_are_distinct_and_stable(pool_size in 1usize..60, n in 0usize..60, seed in any::<u64>()) {
        let corpus = toy(pool_size, 6, 1);
        let pool = corpus.pairs();
        let w = Token::new("w").unwrap();
        match sample_references(&w, pool, n, seed) {
            Ok(refs) => {
                prop_assert!(n <= pool_size);
                let ids: HashSet<u64> = refs.iter().map(|p| p.id).collect();
                prop_assert_eq!(ids.len(), n);
                prop_assert_eq!(refs, sample_references(&w, pool, n, seed).unwrap());
            }
            Err(_) => prop_assert!(n > pool_size),
        }
    }
}
