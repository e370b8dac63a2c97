//! Evaluation-word selection and the held-out split.
//!
//! Evaluation words are rare target-side words that still occur often enough
//! to be measurable. Every training pair whose target contains one of them is
//! pulled out of the training data into a per-word pool; reference sentences
//! for fine-tuning are later drawn from those pools.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CountMode, ParallelCorpus, SentencePair, Side, Token};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionCriteria {
    pub min_test_count: usize,
    pub min_train_count: usize,
    pub max_words: usize,
    /// Words dropped after ranking (manual curation).
    pub exclusion_list: BTreeSet<Token>,
    pub count_mode: CountMode,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            min_test_count: 5,
            min_train_count: 20,
            max_words: 100,
            exclusion_list: BTreeSet::new(),
            count_mode: CountMode::Token,
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.min_test_count == 0 || self.min_train_count == 0 || self.max_words == 0 {
            return Err(Error::InvalidConfig(
                "selection thresholds and max_words must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationWord {
    #[serde(rename = "word")]
    pub target_word: Token,
    pub source_word: Option<Token>,
    pub train_count: usize,
    pub test_count: usize,
    #[serde(rename = "held_out_ids")]
    pub held_out: Vec<u64>,
}

impl EvaluationWord {
    pub fn new(target_word: Token, train_count: usize, test_count: usize) -> Self {
        EvaluationWord {
            target_word,
            source_word: None,
            train_count,
            test_count,
            held_out: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilteredSplit {
    pub filtered_training: ParallelCorpus,
    pub evaluation_words: Vec<EvaluationWord>,
    /// Held-out pairs per evaluation word, in corpus order.
    pub held_out_pool: BTreeMap<Token, Vec<SentencePair>>,
}

impl FilteredSplit {
    /// Number of distinct held-out pairs.
    pub fn held_out_len(&self) -> usize {
        self.held_out_pool
            .values()
            .flatten()
            .map(|p| p.id)
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Picks the rarest target words meeting both frequency thresholds.
///
/// Candidates are ranked by ascending training count (ties lexicographic),
/// the first `max_words` are kept, and only then is the exclusion list
/// applied. A list of 100 candidates with four exclusions therefore yields 96.
pub fn select_words(
    train: &ParallelCorpus,
    test: &ParallelCorpus,
    criteria: &SelectionCriteria,
) -> Result<Vec<EvaluationWord>> {
    criteria.validate()?;
    let train_counts = train.counts(Side::Target, criteria.count_mode);
    let test_counts = test.counts(Side::Target, criteria.count_mode);

    let mut candidates: Vec<(usize, &Token, usize)> = train_counts
        .iter()
        .filter(|(_, &n)| n >= criteria.min_train_count)
        .filter_map(|(w, &n)| {
            let m = test_counts.get(w).copied().unwrap_or(0);
            (m >= criteria.min_test_count).then_some((n, w, m))
        })
        .collect();
    candidates.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    candidates.truncate(criteria.max_words);

    let words: Vec<EvaluationWord> = candidates
        .into_iter()
        .filter(|(_, w, _)| !criteria.exclusion_list.contains(*w))
        .map(|(n, w, m)| EvaluationWord::new(w.clone(), n, m))
        .collect();

    if words.is_empty() {
        return Err(Error::NoQualifyingWords {
            min_train_count: criteria.min_train_count,
            min_test_count: criteria.min_test_count,
        });
    }
    Ok(words)
}

/// Moves every pair whose target mentions an evaluation word into that
/// word's held-out pool. A pair mentioning several words is listed under each
/// of them but removed from training once.
pub fn split_corpus(train: &ParallelCorpus, words: &[EvaluationWord]) -> FilteredSplit {
    let lookup: HashSet<&Token> = words.iter().map(|w| &w.target_word).collect();

    let hits: Vec<Vec<&Token>> = train
        .pairs()
        .par_iter()
        .map(|p| {
            let mut found: Vec<&Token> = p
                .target
                .tokens()
                .iter()
                .filter_map(|t| lookup.get(t).copied())
                .collect();
            found.sort_unstable();
            found.dedup();
            found
        })
        .collect();

    let mut pool: BTreeMap<Token, Vec<SentencePair>> = words
        .iter()
        .map(|w| (w.target_word.clone(), Vec::new()))
        .collect();
    let mut kept = Vec::with_capacity(train.len());
    for (pair, found) in train.pairs().iter().zip(&hits) {
        if found.is_empty() {
            kept.push(pair.clone());
            continue;
        }
        for w in found {
            pool.get_mut(*w).expect("word in pool").push(pair.clone());
        }
    }

    let evaluation_words = words
        .iter()
        .map(|w| {
            let mut w = w.clone();
            w.held_out = pool[&w.target_word].iter().map(|p| p.id).collect();
            w
        })
        .collect();

    FilteredSplit {
        filtered_training: ParallelCorpus::new(kept).expect("subset of a valid corpus"),
        evaluation_words,
        held_out_pool: pool,
    }
}

/// Draws `n` distinct pairs from a word's pool, uniformly and reproducibly.
///
/// The generator is keyed by `(seed, word)` so one word's draw does not shift
/// when other words are added or removed.
pub fn sample_references(
    word: &Token,
    pool: &[SentencePair],
    n: usize,
    seed: u64,
) -> Result<Vec<SentencePair>> {
    if pool.len() < n {
        return Err(Error::PoolTooSmall {
            word: word.to_string(),
            pool: pool.len(),
            requested: n,
        });
    }
    let mut rng = seeding::rng_for_str(seed, word.as_str(), &[]);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}
