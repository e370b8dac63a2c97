//! Synthesis of new sentence pairs for an evaluation word.
//!
//! A retrieved candidate pair has one sampled target position `u`. The target
//! token at `u` becomes the evaluation word `w`, and the source tokens aligned
//! to `u` become its translation `w'`. Candidates where `u` is unaligned, or
//! aligned to a non-contiguous source span, are discarded.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aligner::{align, Alignment, Lexicon, TranslationTable};
use crate::corpus::{ParallelCorpus, Sentence, SentencePair, Token};
use crate::ctxsearch::{search_contexts, ContextMatch, SearchConfig};
use crate::embed::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::seeding;

/// Continuation marker left by BPE segmentation (`fastBPE`, `subword-nmt`).
pub const SUBWORD_MARKER: &str = "@@";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_pair_id: u64,
    pub masked_position: usize,
    /// Half-open span of the candidate's source sentence that was replaced.
    pub replaced_span: (usize, usize),
    pub evaluation_word: Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub pair: SentencePair,
    pub provenance: Provenance,
    pub similarity: f64,
}

impl SyntheticPair {
    /// The target holds `w` at the masked position and the source holds `w'`
    /// at the start of the replaced span.
    pub fn is_consistent(&self, w: &Token, w_prime: &Token) -> bool {
        let p = &self.provenance;
        self.pair.target.get(p.masked_position) == Some(w)
            && self.pair.source.get(p.replaced_span.0) == Some(w_prime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    NoAlignedSource,
    NonConsecutiveAlignment,
    WAlreadyPresent,
    Degenerate,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::NoAlignedSource => "no_aligned_source",
            DiscardReason::NonConsecutiveAlignment => "non_consecutive_alignment",
            DiscardReason::WAlreadyPresent => "w_already_present",
            DiscardReason::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardRecord {
    pub pair_id: u64,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Substitution {
    Synthetic(SyntheticPair),
    Discarded(DiscardRecord),
}

fn replace_at(sentence: &Sentence, span: (usize, usize), with: &Token) -> Sentence {
    let toks = sentence.tokens();
    let mut out = Vec::with_capacity(toks.len() + 1 - (span.1 - span.0));
    out.extend_from_slice(&toks[..span.0]);
    out.push(with.clone());
    out.extend_from_slice(&toks[span.1..]);
    Sentence::new(out).expect("replacement keeps sentence non-empty")
}

/// Puts `w` at the matched target position and `w'` over the source span
/// aligned to it.
pub fn substitute(
    m: &ContextMatch,
    candidate: &SentencePair,
    alignment: &Alignment,
    w: &Token,
    w_prime: &Token,
) -> Substitution {
    let discard = |reason| {
        Substitution::Discarded(DiscardRecord {
            pair_id: candidate.id,
            reason,
        })
    };
    if m.pair_id != candidate.id
        || alignment.pair_id != candidate.id
        || m.position >= candidate.target.len()
    {
        return discard(DiscardReason::Degenerate);
    }
    if candidate.target.contains(w) {
        return discard(DiscardReason::WAlreadyPresent);
    }
    let mut linked = alignment.sources_of(m.position);
    linked.sort_unstable();
    linked.dedup();
    let (Some(&first), Some(&last)) = (linked.first(), linked.last()) else {
        return discard(DiscardReason::NoAlignedSource);
    };
    if last - first + 1 != linked.len() || last >= candidate.source.len() {
        return discard(DiscardReason::NonConsecutiveAlignment);
    }
    let span = (first, last + 1);
    Substitution::Synthetic(SyntheticPair {
        pair: SentencePair::new(
            candidate.id,
            replace_at(&candidate.source, span, w_prime),
            replace_at(&candidate.target, (m.position, m.position + 1), w),
            candidate.origin,
        ),
        provenance: Provenance {
            source_pair_id: candidate.id,
            masked_position: m.position,
            replaced_span: span,
            evaluation_word: w.clone(),
        },
        similarity: m.similarity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Synthetic pairs wanted per reference sentence.
    pub per_reference_target: usize,
    /// Matches retrieved per reference. Defaults to three times the target.
    pub k: Option<usize>,
    pub search: SearchConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            per_reference_target: 19,
            k: None,
            search: SearchConfig::default(),
        }
    }
}

impl AugmentConfig {
    pub fn effective_k(&self) -> usize {
        self.k.unwrap_or(3 * self.per_reference_target).max(1)
    }
}

/// Outcome for one reference sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAugmentation {
    pub reference_id: u64,
    /// Successful substitutions in rank order.
    pub synthetics: Vec<SyntheticPair>,
    pub discards: Vec<DiscardRecord>,
    pub attempts: usize,
    /// How many synthetics short of the target this reference ended up.
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAugmentation {
    pub word: Token,
    pub source_word: Token,
    pub references: Vec<ReferenceAugmentation>,
}

impl WordAugmentation {
    pub fn synthetics(&self) -> impl Iterator<Item = &SyntheticPair> {
        self.references.iter().flat_map(|r| &r.synthetics)
    }

    pub fn discards(&self) -> impl Iterator<Item = &DiscardRecord> {
        self.references.iter().flat_map(|r| &r.discards)
    }
}

fn check_word_level<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Result<()> {
    for s in sentences {
        if let Some(t) = s.tokens().iter().find(|t| t.as_str().ends_with(SUBWORD_MARKER)) {
            return Err(Error::SubwordInput(t.to_string()));
        }
    }
    Ok(())
}

/// Generates synthetic pairs for every `(reference, position of w)` given.
///
/// Each reference runs a context search over `candidates`, then tries
/// substitutions in rank order until `per_reference_target` succeed. If the
/// first `k` matches are not enough, `2k` are fetched once more before giving
/// up with a shortfall warning. `table` must be the one trained on the
/// filtered corpus.
pub fn augment_word<P: EmbeddingProvider + ?Sized>(
    word: &Token,
    references: &[(SentencePair, usize)],
    candidates: &ParallelCorpus,
    provider: &P,
    table: &TranslationTable,
    lexicon: &Lexicon,
    config: &AugmentConfig,
) -> Result<WordAugmentation> {
    let w_prime = lexicon
        .get(word)
        .ok_or_else(|| Error::MissingLexiconEntry(word.to_string()))?;
    check_word_level(references.iter().map(|(p, _)| &p.target))?;
    check_word_level(candidates.pairs().iter().map(|p| &p.target))?;
    check_word_level(candidates.pairs().iter().map(|p| &p.source))?;

    let target = config.per_reference_target;
    let k = config.effective_k();

    let results = references
        .par_iter()
        .map(|(reference, position)| -> Result<ReferenceAugmentation> {
            let mut search = config.search;
            search.seed = seeding::mix(config.search.seed, &[reference.id]);
            let mut out = ReferenceAugmentation {
                reference_id: reference.id,
                synthetics: Vec::new(),
                discards: Vec::new(),
                attempts: 0,
                shortfall: 0,
            };
            let mut tried = 0;
            for fetch in [k, 2 * k] {
                search.k = fetch;
                let matches = search_contexts(reference, *position, candidates, provider, &search)?;
                for m in &matches[tried.min(matches.len())..] {
                    if out.synthetics.len() >= target {
                        break;
                    }
                    let candidate = candidates.get(m.pair_id).expect("match from candidates");
                    out.attempts += 1;
                    match substitute(m, candidate, &align(candidate, table), word, w_prime) {
                        Substitution::Synthetic(s) => out.synthetics.push(s),
                        Substitution::Discarded(d) => out.discards.push(d),
                    }
                }
                tried = matches.len();
                if out.synthetics.len() >= target || matches.len() < fetch {
                    break;
                }
            }
            if out.synthetics.len() < target {
                out.shortfall = target - out.synthetics.len();
                log::warn!(
                    "{word}: reference {} yielded {} of {target} synthetic pairs",
                    reference.id,
                    out.synthetics.len()
                );
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(WordAugmentation {
        word: word.clone(),
        source_word: w_prime.clone(),
        references: results,
    })
}
