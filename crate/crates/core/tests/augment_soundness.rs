use std::collections::BTreeMap;

use novelword::aligner::{
    align, extract_lexicon, train, Alignment, Lexicon, LexiconEntry, TranslationTable, NULL_SYMBOL,
};
use novelword::augment::{
    augment_word, substitute, AugmentConfig, DiscardReason, Substitution,
};
use novelword::corpus::{Origin, ParallelCorpus, Sentence, SentencePair, Token};
use novelword::ctxsearch::{search_contexts, ContextMatch, SearchConfig};
use novelword::embed::HashedContextProvider;
use novelword::fixtures::{
    coal_corpus, copy_language, COAL_SOURCE, COAL_TARGET, NUCLEAR_SOURCE, NUCLEAR_TARGET,
};
use novelword::seeding;
use novelword::wordselect::EvaluationWord;

fn tok(s: &str) -> Token {
    Token::new(s).unwrap()
}

/// References for a novel word `w`: copy-language pairs with one position
/// overwritten by `w` on both sides.
fn copy_references(corpus: &ParallelCorpus, w: &Token, n: usize) -> Vec<(SentencePair, usize)> {
    corpus.pairs()[..n]
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pos = i % p.target.len();
            let mut toks = p.target.tokens().to_vec();
            toks[pos] = w.clone();
            let s = Sentence::new(toks).unwrap();
            (SentencePair::new(100_000 + i as u64, s.clone(), s, Origin::Genuine), pos)
        })
        .collect()
}

#[test]
fn copy_language_yields_full_quota_without_discards() {
    let corpus = copy_language(20, 600, 3);
    let w = tok("cnew");
    let refs = copy_references(&corpus, &w, 5);
    // Candidates exclude the pairs the references were derived from.
    let candidates = corpus.filter(|p| p.id >= 5);

    let with_refs =
        ParallelCorpus::new(corpus.pairs().iter().cloned().chain(refs.iter().map(|(p, _)| p.clone())).collect())
            .unwrap();
    let full_table = train(&with_refs, 5, None).unwrap();
    let lexicon = extract_lexicon(&with_refs, &full_table, &[EvaluationWord::new(w.clone(), 5, 0)]);
    assert_eq!(lexicon.get(&w), Some(&w));

    let table = train(&candidates, 5, None).unwrap();
    let config = AugmentConfig {
        per_reference_target: 19,
        k: None,
        search: SearchConfig {
            seed: 12,
            ..SearchConfig::default()
        },
    };
    let provider = HashedContextProvider::default();
    let out = augment_word(&w, &refs, &candidates, &provider, &table, &lexicon, &config).unwrap();

    assert_eq!(out.references.len(), refs.len());
    for r in &out.references {
        assert_eq!(r.synthetics.len(), 19);
        assert!(r.discards.is_empty());
        assert_eq!(r.shortfall, 0);
        assert_eq!(r.attempts, 19);
    }
    for s in out.synthetics() {
        assert!(s.is_consistent(&w, &w));
        assert_eq!(s.pair.target.count(&w), 1);
        assert_eq!(s.pair.source.count(&w), 1);
        let original = candidates.get(s.provenance.source_pair_id).unwrap();
        let span = s.provenance.replaced_span;
        assert_eq!(span.1 - span.0, 1);
        // Copy language: the replaced source token is the target token.
        assert_eq!(
            original.source.tokens()[span.0],
            original.target.tokens()[s.provenance.masked_position]
        );
        // Everything else is untouched.
        assert_eq!(s.pair.target.len(), original.target.len());
        assert_eq!(s.pair.source.len(), original.source.len());
    }
}

#[test]
fn planted_alignments_give_planted_reasons() {
    // (source, target, pharaoh links, masked position, expected outcome)
    let w = tok("W");
    let wp = tok("V");
    let cases: Vec<(&str, &str, &str, usize, Option<DiscardReason>)> = vec![
        ("a b c d", "x y z", "0-0 1-1 2-2", 1, None),
        ("a b c d", "x y z", "0-0 1-1 2-1 3-2", 1, None),
        ("a b c d", "x y z", "0-0 1-1 3-1 2-2", 1, Some(DiscardReason::NonConsecutiveAlignment)),
        ("a b c d e", "x y z", "0-2 4-2", 2, Some(DiscardReason::NonConsecutiveAlignment)),
        ("a b c d e", "x y z", "0-0 1-0 3-0", 0, Some(DiscardReason::NonConsecutiveAlignment)),
        ("a b c", "x y z", "0-0 2-2", 1, Some(DiscardReason::NoAlignedSource)),
        ("a b c", "x y z", "", 0, Some(DiscardReason::NoAlignedSource)),
        ("a b c", "x W z", "0-0 1-1 2-2", 0, Some(DiscardReason::WAlreadyPresent)),
        ("a b c", "x y z", "0-0", 3, Some(DiscardReason::Degenerate)),
    ];
    let mut tally: BTreeMap<Option<DiscardReason>, usize> = BTreeMap::new();
    for (id, (src, tgt, links, pos, expected)) in cases.iter().enumerate() {
        let id = id as u64;
        let pair = SentencePair::new(id, Sentence::parse(src).unwrap(), Sentence::parse(tgt).unwrap(), Origin::Genuine);
        let alignment = Alignment::from_pharaoh(id, links).unwrap();
        let m = ContextMatch {
            pair_id: id,
            position: *pos,
            similarity: 0.5,
        };
        let got = match substitute(&m, &pair, &alignment, &w, &wp) {
            Substitution::Synthetic(s) => {
                assert!(s.is_consistent(&w, &wp));
                None
            }
            Substitution::Discarded(d) => {
                assert_eq!(d.pair_id, id);
                Some(d.reason)
            }
        };
        assert_eq!(got, *expected, "case {id}: {src} | {tgt} | {links} @ {pos}");
        *tally.entry(got).or_default() += 1;
    }
    assert_eq!(tally[&None], 2);
    assert_eq!(tally[&Some(DiscardReason::NonConsecutiveAlignment)], 3);
    assert_eq!(tally[&Some(DiscardReason::NoAlignedSource)], 2);
}

/// Target tokens `junk` have no source counterpart and align to NULL.
fn junk_fixture() -> (ParallelCorpus, TranslationTable) {
    let mut lines = Vec::new();
    for i in 0..300u64 {
        let n = 3 + (i % 5) as usize;
        let src: Vec<String> = (0..n).map(|k| format!("s{}", (i as usize * 7 + k * 3) % 15)).collect();
        let mut tgt: Vec<String> = Vec::new();
        for s in &src {
            tgt.push(s.replacen('s', "t", 1));
            if i % 2 == 0 {
                tgt.push("junk".into());
            }
        }
        lines.push((src.join(" "), tgt.join(" ")));
    }
    let corpus =
        ParallelCorpus::from_lines(lines.iter().map(|(s, t)| (s.as_str(), t.as_str())), Origin::Genuine).unwrap();
    let mut tsv = format!("{NULL_SYMBOL}\tjunk\t1\n");
    for k in 0..15 {
        tsv.push_str(&format!("s{k}\tt{k}\t1\n"));
    }
    (corpus, TranslationTable::from_tsv(&tsv, None).unwrap())
}

#[test]
fn unaligned_positions_are_discarded_exactly() {
    let (candidates, table) = junk_fixture();
    // sanity: the planted tokens really are NULL-aligned
    for p in candidates.pairs() {
        let a = align(p, &table);
        for (j, t) in p.target.tokens().iter().enumerate() {
            assert_eq!(a.sources_of(j).is_empty(), t.as_str() == "junk");
        }
    }
    let w = tok("wnew");
    let lexicon = Lexicon {
        entries: [(
            w.clone(),
            LexiconEntry {
                source: tok("vnew"),
                count: 1,
                candidates: BTreeMap::new(),
            },
        )]
        .into_iter()
        .collect(),
        unaligned: Vec::new(),
    };
    let reference = SentencePair::new(
        5000,
        Sentence::parse("s1 vnew s2").unwrap(),
        Sentence::parse("t1 wnew t2").unwrap(),
        Origin::Genuine,
    );
    let provider = HashedContextProvider::new(64, 3, 1);
    let config = AugmentConfig {
        per_reference_target: 10,
        k: Some(30),
        search: SearchConfig {
            seed: 8,
            ..SearchConfig::default()
        },
    };
    let out = augment_word(&w, &[(reference.clone(), 1)], &candidates, &provider, &table, &lexicon, &config)
        .unwrap();
    let r = &out.references[0];

    // Walk the same ranking independently and predict each outcome. The
    // second fetch of 2k continues the first, so one ranking of 60 covers both.
    let search = SearchConfig {
        k: 60,
        seed: seeding::mix(8, &[reference.id]),
        ..SearchConfig::default()
    };
    let ranked = search_contexts(&reference, 1, &candidates, &provider, &search).unwrap();
    let mut expected_synth = Vec::new();
    let mut expected_discards = Vec::new();
    for m in &ranked {
        if expected_synth.len() == 10 {
            break;
        }
        let token = &candidates.get(m.pair_id).unwrap().target.tokens()[m.position];
        if token.as_str() == "junk" {
            expected_discards.push(m.pair_id);
        } else {
            expected_synth.push(m.pair_id);
        }
    }
    assert!(!expected_discards.is_empty(), "fixture should plant at least one discard");
    let got_synth: Vec<u64> = r.synthetics.iter().map(|s| s.provenance.source_pair_id).collect();
    let got_discards: Vec<u64> = r.discards.iter().map(|d| d.pair_id).collect();
    assert_eq!(got_synth, expected_synth);
    assert_eq!(got_discards, expected_discards);
    assert!(r.discards.iter().all(|d| d.reason == DiscardReason::NoAlignedSource));
    assert_eq!(r.attempts, expected_synth.len() + expected_discards.len());
}

#[test]
fn shortfall_when_nothing_substitutes() {
    let lines: Vec<(String, String)> = (0..20).map(|i| (format!("s{i}"), "junk".to_string())).collect();
    let candidates =
        ParallelCorpus::from_lines(lines.iter().map(|(s, t)| (s.as_str(), t.as_str())), Origin::Genuine).unwrap();
    let table = TranslationTable::from_tsv(&format!("{NULL_SYMBOL}\tjunk\t1\n"), None).unwrap();
    let w = tok("wnew");
    let lexicon = Lexicon {
        entries: [(
            w.clone(),
            LexiconEntry {
                source: tok("vnew"),
                count: 1,
                candidates: BTreeMap::new(),
            },
        )]
        .into_iter()
        .collect(),
        unaligned: Vec::new(),
    };
    let reference = SentencePair::new(99, Sentence::parse("vnew").unwrap(), Sentence::parse("wnew").unwrap(), Origin::Genuine);
    let config = AugmentConfig {
        per_reference_target: 4,
        k: Some(5),
        ..AugmentConfig::default()
    };
    let provider = HashedContextProvider::new(8, 2, 0);
    let out = augment_word(&w, &[(reference, 0)], &candidates, &provider, &table, &lexicon, &config).unwrap();
    let r = &out.references[0];
    assert!(r.synthetics.is_empty());
    assert_eq!(r.shortfall, 4);
    // k, then 2k once: ten candidates tried in total.
    assert_eq!(r.attempts, 10);
    assert_eq!(r.discards.len(), 10);
}

#[test]
fn coal_pair_becomes_nuclear_end_to_end() {
    let corpus = coal_corpus();
    let table = train(&corpus, 5, None).unwrap();
    let s2 = corpus
        .pairs()
        .iter()
        .find(|p| p.source.to_string() == COAL_SOURCE && p.target.to_string() == COAL_TARGET)
        .unwrap();
    let m = ContextMatch {
        pair_id: s2.id,
        position: 0,
        similarity: 1.0,
    };
    let Substitution::Synthetic(s3) = substitute(&m, s2, &align(s2, &table), &tok("nuclear"), &tok("nucléaire"))
    else {
        panic!("coal pair should substitute");
    };
    assert_eq!(s3.pair.source.to_string(), NUCLEAR_SOURCE);
    assert_eq!(s3.pair.target.to_string(), NUCLEAR_TARGET);
}

#[test]
fn subword_candidates_are_rejected() {
    let candidates = ParallelCorpus::from_lines([("a b", "x y@@ z")], Origin::Genuine).unwrap();
    let table = train(&candidates, 1, None).unwrap();
    let w = tok("w");
    let lexicon = Lexicon {
        entries: [(
            w.clone(),
            LexiconEntry {
                source: tok("v"),
                count: 1,
                candidates: BTreeMap::new(),
            },
        )]
        .into_iter()
        .collect(),
        unaligned: Vec::new(),
    };
    let reference = SentencePair::new(9, Sentence::parse("v").unwrap(), Sentence::parse("w").unwrap(), Origin::Genuine);
    let err = augment_word(
        &w,
        &[(reference, 0)],
        &candidates,
        &HashedContextProvider::default(),
        &table,
        &lexicon,
        &AugmentConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, novelword::Error::SubwordInput(_)));
}
