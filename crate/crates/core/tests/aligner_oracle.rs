use std::collections::{BTreeMap, HashMap};

use novelword::aligner::{align, extract_lexicon, train, TranslationTable};
use novelword::corpus::{Origin, ParallelCorpus, Token};
use novelword::fixtures::{coal_corpus, generate, ToyLanguageSpec, COAL_SOURCE, COAL_TARGET};
use novelword::wordselect::EvaluationWord;
use proptest::prelude::*;

fn tok(s: &str) -> Token {
    Token::new(s).unwrap()
}

/// Textbook Model 1 EM over strings, one nested loop per formula.
fn reference_em(pairs: &[(Vec<String>, Vec<String>)], iterations: usize) -> HashMap<(String, String), f64> {
    const NULL: &str = "<null>";
    let mut t: HashMap<(String, String), f64> = HashMap::new();
    let target_vocab: std::collections::BTreeSet<&String> = pairs.iter().flat_map(|(_, f)| f).collect();
    let init = 1.0 / target_vocab.len() as f64;
    for (e, f) in pairs {
        for fj in f {
            t.insert((NULL.into(), fj.clone()), init);
            for ei in e {
                t.insert((ei.clone(), fj.clone()), init);
            }
        }
    }
    for _ in 0..iterations {
        let mut count: HashMap<(String, String), f64> = HashMap::new();
        let mut total: HashMap<String, f64> = HashMap::new();
        for (e, f) in pairs {
            let sources: Vec<String> = std::iter::once(NULL.to_string()).chain(e.iter().cloned()).collect();
            for fj in f {
                let z: f64 = sources.iter().map(|s| t[&(s.clone(), fj.clone())]).sum();
                for s in &sources {
                    let c = t[&(s.clone(), fj.clone())] / z;
                    *count.entry((s.clone(), fj.clone())).or_default() += c;
                    *total.entry(s.clone()).or_default() += c;
                }
            }
        }
        for ((s, f), c) in &count {
            t.insert((s.clone(), f.clone()), c / total[s]);
        }
    }
    t
}

fn as_strings(c: &ParallelCorpus) -> Vec<(Vec<String>, Vec<String>)> {
    c.pairs()
        .iter()
        .map(|p| {
            (
                p.source.tokens().iter().map(|t| t.to_string()).collect(),
                p.target.tokens().iter().map(|t| t.to_string()).collect(),
            )
        })
        .collect()
}

#[test]
fn table_matches_reference_em() {
    let corpus = generate(&ToyLanguageSpec {
        vocab_size: 8,
        n_pairs: 60,
        seed: 3,
        ..Default::default()
    });
    let table = train(&corpus, 5, None).unwrap();
    let oracle = reference_em(&as_strings(&corpus), 5);
    for ((s, f), p) in &oracle {
        let source = if s == "<null>" { None } else { Some(tok(s)) };
        let got = table.prob(source.as_ref(), &tok(f));
        assert!((got - p).abs() < 1e-12, "t({f}|{s}): {got} vs {p}");
    }
}

#[test]
fn recovers_bijective_lexicon() {
    for (vocab, n_pairs, seed) in [(5, 100, 1), (10, 120, 2), (20, 200, 3), (20, 100, 4)] {
        let spec = ToyLanguageSpec {
            vocab_size: vocab,
            n_pairs,
            seed,
            ..Default::default()
        };
        let corpus = generate(&spec);
        let table = train(&corpus, 5, None).unwrap();
        let lexicon: BTreeMap<Token, Token> = spec.entries().into_iter().collect();
        let targets: Vec<Token> = lexicon.values().cloned().collect();
        for (s, t) in &lexicon {
            let best = targets
                .iter()
                .max_by(|a, b| table.prob(Some(s), a).total_cmp(&table.prob(Some(s), b)))
                .unwrap();
            assert_eq!(best, t, "vocab {vocab} seed {seed}: argmax t(.|{s})");
        }
        for p in corpus.pairs() {
            let a = align(p, &table);
            for j in 0..p.target.len() {
                let linked = a.sources_of(j);
                assert_eq!(linked.len(), 1);
                assert_eq!(&lexicon[&p.source.tokens()[linked[0]]], &p.target.tokens()[j]);
            }
        }
        let words: Vec<EvaluationWord> =
            targets.iter().map(|t| EvaluationWord::new(t.clone(), 0, 0)).collect();
        let extracted = extract_lexicon(&corpus, &table, &words);
        assert!(extracted.unaligned.is_empty());
        for (s, t) in &lexicon {
            assert_eq!(extracted.get(t), Some(s));
        }
    }
}

#[test]
fn one_pair_one_iteration() {
    let corpus = ParallelCorpus::from_lines([("x", "y")], Origin::Genuine).unwrap();
    let uniform = TranslationTable::uniform(&corpus).unwrap();
    assert_eq!(uniform.link_posteriors(&corpus.pairs()[0]), vec![vec![0.5, 0.5]]);
    let table = train(&corpus, 1, None).unwrap();
    assert_eq!(table.link_posteriors(&corpus.pairs()[0]), vec![vec![0.5, 0.5]]);
    assert_eq!(table.prob(Some(&tok("x")), &tok("y")), 1.0);
    assert_eq!(table.prob(None, &tok("y")), 1.0);
    assert_eq!(table.log_likelihood(), &[0.0, 0.0]);
}

#[test]
fn two_pairs_one_iteration_by_hand() {
    // Uniform start gives every co-occurring t(f|e) = 1/2. Expected counts:
    // c(x|NULL) = c(x|a) = 1/2 + 1/3, c(y|NULL) = c(y|a) = 1/3, c(x|b) = c(y|b) = 1/3.
    let corpus = ParallelCorpus::from_lines([("a", "x"), ("a b", "x y")], Origin::Genuine).unwrap();
    let table = train(&corpus, 1, None).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
    assert!(close(table.prob(None, &tok("x")), 5.0 / 7.0));
    assert!(close(table.prob(Some(&tok("a")), &tok("x")), 5.0 / 7.0));
    assert!(close(table.prob(Some(&tok("a")), &tok("y")), 2.0 / 7.0));
    assert!(close(table.prob(Some(&tok("b")), &tok("y")), 0.5));

    let post = table.link_posteriors(&corpus.pairs()[1]);
    let expected_y = [4.0 / 15.0, 4.0 / 15.0, 7.0 / 15.0];
    for (got, want) in post[1].iter().zip(expected_y) {
        assert!(close(*got, want), "{got} vs {want}");
    }

    let ll = table.log_likelihood();
    assert_eq!(ll.len(), 2);
    assert!(close(ll[0], 3.0 * 0.5f64.ln()));
    let ll1 = (5.0f64 / 7.0).ln() + (9.0f64 / 14.0).ln() + (5.0f64 / 14.0).ln();
    assert!(close(ll[1], ll1), "{} vs {ll1}", ll[1]);
}

#[test]
fn coal_links_to_charbon() {
    let corpus = coal_corpus();
    let table = train(&corpus, 5, None).unwrap();
    let pair = corpus
        .pairs()
        .iter()
        .find(|p| p.source.to_string() == COAL_SOURCE && p.target.to_string() == COAL_TARGET)
        .unwrap();
    let a = align(pair, &table);
    assert_eq!(a.sources_of(0), vec![1]);
    let words = vec![EvaluationWord::new(tok("coal"), 0, 0)];
    assert_eq!(extract_lexicon(&corpus, &table, &words).get(&tok("coal")), Some(&tok("charbon")));
}

#[test]
fn thread_count_does_not_change_tables() {
    let corpus = generate(&ToyLanguageSpec {
        vocab_size: 20,
        n_pairs: 2000,
        seed: 11,
        ..Default::default()
    });
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&corpus, 3, Some(4.0)).unwrap().to_tsv())
    };
    assert_eq!(run(1), run(4));
}

fn small_corpus() -> impl Strategy<Value = ParallelCorpus> {
    let sentence = prop::collection::vec(0u8..6, 1..6);
    prop::collection::vec((sentence.clone(), sentence), 1..25).prop_map(|pairs| {
        let lines: Vec<(String, String)> = pairs
            .iter()
            .map(|(s, t)| {
                let join = |v: &Vec<u8>, p: &str| v.iter().map(|x| format!("{p}{x}")).collect::<Vec<_>>().join(" ");
                (join(s, "s"), join(t, "t"))
            })
            .collect();
        ParallelCorpus::from_lines(lines.iter().map(|(s, t)| (s.as_str(), t.as_str())), Origin::Genuine)
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_likelihood_never_decreases(corpus in small_corpus(), tension in prop::option::of(0.0f64..8.0)) {
        let table = train(&corpus, 5, tension).unwrap();
        let ll = table.log_likelihood();
        prop_assert_eq!(ll.len(), 6);
        for w in ll.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{:?}", ll);
        }
    }

    #[test]
    fn rows_sum_to_one(corpus in small_corpus(), tension in prop::option::of(0.0f64..8.0)) {
        let table = train(&corpus, 3, tension).unwrap();
        for s in table.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        for p in corpus.pairs() {
            for row in table.link_posteriors(p) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
