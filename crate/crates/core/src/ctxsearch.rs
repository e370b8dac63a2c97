//! Retrieval of candidate sentences whose context resembles a reference
//! word's context.
//!
//! Each candidate contributes one randomly sampled position. Its context
//! vector is compared with the reference word's, and the best `k` candidates
//! are returned. [`exhaustive_search`] scores every position instead and
//! serves as the reference result in tests.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Origin, ParallelCorpus, SentencePair};
use crate::embed::{cosine, ContextQuery, ContextVector, EmbedError, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextMatch {
    pub pair_id: u64,
    /// Index of the sampled token in the candidate's target sentence.
    pub position: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateOrigin {
    #[default]
    GenuineOnly,
    Any,
}

impl CandidateOrigin {
    pub fn admits(self, origin: Origin) -> bool {
        match self {
            CandidateOrigin::GenuineOnly => origin == Origin::Genuine,
            CandidateOrigin::Any => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub k: usize,
    pub seed: u64,
    /// Matches below this similarity are dropped. `-1` disables the cut.
    pub min_similarity: f64,
    pub candidate_origin: CandidateOrigin,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k: 57,
            seed: 0,
            min_similarity: -1.0,
            candidate_origin: CandidateOrigin::GenuineOnly,
        }
    }
}

/// The position sampled in a candidate sentence of length `len`.
///
/// Depends only on `(seed, pair_id)`, so the choice for one candidate never
/// changes with iteration order or the rest of the corpus.
pub fn sampled_position(seed: u64, pair_id: u64, len: usize) -> usize {
    seeding::rng(seed, &[pair_id]).gen_range(0..len)
}

fn is_reference(candidate: &SentencePair, reference: &SentencePair) -> bool {
    candidate.id == reference.id
        || (candidate.source == reference.source && candidate.target == reference.target)
}

fn reference_vector<P: EmbeddingProvider + ?Sized>(
    reference: &SentencePair,
    w_position: usize,
    provider: &P,
) -> Result<ContextVector> {
    let query = ContextQuery::new(&reference.target, w_position)?;
    Ok(provider.embed(&query)?)
}

fn rank(mut matches: Vec<ContextMatch>, k: usize) -> Vec<ContextMatch> {
    matches.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.pair_id.cmp(&b.pair_id))
    });
    matches.truncate(k);
    matches
}

fn eligible<'a>(
    reference: &'a SentencePair,
    candidates: &'a ParallelCorpus,
    origin: CandidateOrigin,
) -> impl ParallelIterator<Item = &'a SentencePair> + 'a {
    candidates
        .pairs()
        .par_iter()
        .filter(move |c| origin.admits(c.origin) && !is_reference(c, reference))
}

/// Top-`k` candidates by context similarity, one sampled position each.
///
/// Makes exactly one provider call for the reference plus one per eligible
/// candidate. Output is sorted by similarity descending, ties by pair id.
pub fn search_contexts<P: EmbeddingProvider + ?Sized>(
    reference: &SentencePair,
    w_position: usize,
    candidates: &ParallelCorpus,
    provider: &P,
    config: &SearchConfig,
) -> Result<Vec<ContextMatch>> {
    if config.k == 0 {
        return Err(Error::InvalidConfig("search k must be at least 1".into()));
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let v = reference_vector(reference, w_position, provider)?;

    let scored: Vec<ContextMatch> = eligible(reference, candidates, config.candidate_origin)
        .map(|c| -> Result<ContextMatch, EmbedError> {
            let position = sampled_position(config.seed, c.id, c.target.len());
            let u = provider.embed(&ContextQuery::new(&c.target, position)?)?;
            Ok(ContextMatch {
                pair_id: c.id,
                position,
                similarity: cosine(&v, &u)?,
            })
        })
        .collect::<Result<_, _>>()?;

    let pool = scored.len();
    let scored = scored
        .into_iter()
        .filter(|m| m.similarity >= config.min_similarity)
        .collect();
    if config.k > pool {
        log::warn!(
            "context search asked for {} matches but only {pool} candidates are eligible",
            config.k
        );
    }
    Ok(rank(scored, config.k))
}

/// Scores every position of every candidate and keeps each candidate's best
/// position. Quadratic in sentence length; meant for verification.
pub fn exhaustive_search<P: EmbeddingProvider + ?Sized>(
    reference: &SentencePair,
    w_position: usize,
    candidates: &ParallelCorpus,
    provider: &P,
    k: usize,
    origin: CandidateOrigin,
) -> Result<Vec<ContextMatch>> {
    let v = reference_vector(reference, w_position, provider)?;
    let scored: Vec<ContextMatch> = eligible(reference, candidates, origin)
        .map(|c| -> Result<ContextMatch, EmbedError> {
            let mut best: Option<ContextMatch> = None;
            for position in 0..c.target.len() {
                let u = provider.embed(&ContextQuery::new(&c.target, position)?)?;
                let similarity = cosine(&v, &u)?;
                // strict comparison keeps the earliest position on ties
                if best.is_none_or(|b| similarity > b.similarity) {
                    best = Some(ContextMatch {
                        pair_id: c.id,
                        position,
                        similarity,
                    });
                }
            }
            Ok(best.expect("sentences are non-empty"))
        })
        .collect::<Result<_, _>>()?;
    Ok(rank(scored, k))
}

/// Audit dump: `pair_id, position, similarity, sampled token, sentence`.
pub fn matches_to_tsv(matches: &[ContextMatch], candidates: &ParallelCorpus) -> String {
    let mut out = String::from("pair_id\tposition\tsimilarity\ttoken\tsentence\n");
    for m in matches {
        let (token, sentence) = match candidates.get(m.pair_id) {
            Some(p) => (
                p.target.get(m.position).map(|t| t.to_string()).unwrap_or_default(),
                p.target.to_string(),
            ),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}",
            m.pair_id, m.position, m.similarity, token, sentence
        );
    }
    out
}

pub fn write_matches_tsv(
    path: &Path,
    matches: &[ContextMatch],
    candidates: &ParallelCorpus,
) -> Result<()> {
    std::fs::write(path, matches_to_tsv(matches, candidates)).map_err(|e| Error::io(path, e))
}
