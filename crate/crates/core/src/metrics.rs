//! Translation scoring: rare-word accuracy, over-translation and BLEU.
//!
//! For a word `w`, let `n_i` and `p_i` count `w` in reference and hypothesis
//! sentence `i`. Then
//!
//! ```text
//! accuracy(w)        = sum_i min(p_i, n_i)     / sum_i n_i
//! overtranslation(w) = sum_i max(p_i - n_i, 0) / sum_i n_i
//! ```
//!
//! and the overall figures are unweighted means over words. Integer numerators
//! and denominators are kept next to every ratio.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Token};
use crate::error::{Error, Result};

/// Hypothesis/reference sentence pairs, aligned line by line.
#[derive(Debug, Clone)]
pub struct EvalCorpus {
    entries: Vec<(Sentence, Sentence)>,
}

impl EvalCorpus {
    pub fn new(hypotheses: Vec<Sentence>, references: Vec<Sentence>) -> Result<Self> {
        if hypotheses.len() != references.len() {
            return Err(Error::EvalLengthMismatch {
                hypotheses: hypotheses.len(),
                references: references.len(),
            });
        }
        Ok(EvalCorpus {
            entries: hypotheses.into_iter().zip(references).collect(),
        })
    }

    pub fn entries(&self) -> &[(Sentence, Sentence)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyMode {
    /// Pool clipped counts over sentences, then divide.
    #[default]
    Micro,
    /// Average per-sentence ratios over sentences whose reference has the word.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: Token,
    /// Occurrences in references.
    pub n_total: u64,
    /// Occurrences in hypotheses.
    pub p_total: u64,
    /// Sum of per-sentence `min(p, n)`.
    pub p_clipped: u64,
    /// Sum of per-sentence `max(p - n, 0)`.
    pub excess: u64,
    /// Reference sentences containing the word.
    pub sentences: u64,
    pub accuracy: f64,
    pub overtranslation: f64,
    pub mode: AccuracyMode,
}

/// Clipped accuracy and over-translation of one word.
pub fn word_score(corpus: &EvalCorpus, word: &Token, mode: AccuracyMode) -> Result<WordScore> {
    let mut n_total = 0u64;
    let mut p_total = 0u64;
    let mut p_clipped = 0u64;
    let mut excess = 0u64;
    let mut sentences = 0u64;
    let mut ratio_sum = 0.0;
    for (hyp, reference) in &corpus.entries {
        let n = reference.count(word) as u64;
        let p = hyp.count(word) as u64;
        n_total += n;
        p_total += p;
        p_clipped += p.min(n);
        excess += p.saturating_sub(n);
        if n > 0 {
            sentences += 1;
            ratio_sum += p.min(n) as f64 / n as f64;
        }
    }
    if n_total == 0 {
        return Err(Error::WordAbsent(word.to_string()));
    }
    let accuracy = match mode {
        AccuracyMode::Micro => p_clipped as f64 / n_total as f64,
        AccuracyMode::Macro => ratio_sum / sentences as f64,
    };
    Ok(WordScore {
        word: word.clone(),
        n_total,
        p_total,
        p_clipped,
        excess,
        sentences,
        accuracy,
        overtranslation: excess as f64 / n_total as f64,
        mode,
    })
}

/// Micro-averaged clipped accuracy of one word.
pub fn word_accuracy(corpus: &EvalCorpus, word: &Token) -> Result<WordScore> {
    word_score(corpus, word, AccuracyMode::Micro)
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

pub fn overall_accuracy(corpus: &EvalCorpus, words: &[Token], mode: AccuracyMode) -> Result<f64> {
    let scores = words
        .iter()
        .map(|w| word_score(corpus, w, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(scores.iter().map(|s| s.accuracy)))
}

pub fn over_translation(corpus: &EvalCorpus, word: &Token) -> Result<f64> {
    Ok(word_accuracy(corpus, word)?.overtranslation)
}

pub fn overall_over_translation(corpus: &EvalCorpus, words: &[Token]) -> Result<f64> {
    let scores = words
        .iter()
        .map(|w| over_translation(corpus, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(scores.into_iter()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// 0 to 100.
    pub score: f64,
    /// `(clipped matches, hypothesis n-grams)` for n = 1..=max_n.
    pub ngram_counts: Vec<(u64, u64)>,
    pub hypothesis_length: u64,
    pub reference_length: u64,
    pub brevity_penalty: f64,
}

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], u64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *out.entry(g).or_insert(0) += 1;
        }
    }
    out
}

/// Corpus-level BLEU on tokenized text, single reference, no smoothing.
///
/// Follows the Moses `multi-bleu` conventions: any zero n-gram precision
/// makes the score 0, and the brevity penalty is `exp(1 - r/c)` when the
/// hypothesis is shorter than the reference.
pub fn corpus_bleu(corpus: &EvalCorpus, max_n: usize) -> Result<BleuScore> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if max_n == 0 {
        return Err(Error::InvalidConfig("BLEU order must be at least 1".into()));
    }
    let mut counts = vec![(0u64, 0u64); max_n];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, reference) in &corpus.entries {
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for (n, slot) in (1..=max_n).zip(counts.iter_mut()) {
            let h = ngram_counts(hyp.tokens(), n);
            let r = ngram_counts(reference.tokens(), n);
            for (g, &c) in &h {
                slot.0 += c.min(r.get(g).copied().unwrap_or(0));
                slot.1 += c;
            }
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let score = if counts.iter().any(|&(m, t)| m == 0 || t == 0) {
        0.0
    } else {
        let log_mean = counts
            .iter()
            .map(|&(m, t)| (m as f64 / t as f64).ln())
            .sum::<f64>()
            / max_n as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore {
        score,
        ngram_counts: counts,
        hypothesis_length: hyp_len,
        reference_length: ref_len,
        brevity_penalty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub overall_bleu: f64,
    pub overall_accuracy: f64,
    pub overall_overtranslation: f64,
    pub accuracy_mode: AccuracyMode,
    pub bleu: BleuScore,
    pub per_word: Vec<WordScore>,
}

impl ScoreReport {
    pub fn compute(corpus: &EvalCorpus, words: &[Token], mode: AccuracyMode) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidConfig("no evaluation words to score".into()));
        }
        let bleu = corpus_bleu(corpus, 4)?;
        let per_word = words
            .iter()
            .map(|w| word_score(corpus, w, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreReport {
            overall_bleu: bleu.score,
            overall_accuracy: mean(per_word.iter().map(|s| s.accuracy)),
            overall_overtranslation: mean(per_word.iter().map(|s| s.overtranslation)),
            accuracy_mode: mode,
            bleu,
            per_word,
        })
    }

    pub fn per_word_csv(&self) -> String {
        let mut out = String::from(
            "word,n_total,p_total,p_clipped,excess,sentences,accuracy,overtranslation\n",
        );
        for s in &self.per_word {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(s.word.as_str()),
                s.n_total,
                s.p_total,
                s.p_clipped,
                s.excess,
                s.sentences,
                s.accuracy,
                s.overtranslation
            );
        }
        out
    }
}

/// One point of the adaptation curves: scores after fine-tuning on one set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRow {
    pub approach: String,
    pub ratio: usize,
    pub occurrences: usize,
    pub bleu: f64,
    pub accuracy: f64,
    pub overtranslation: f64,
}

pub fn adaptation_csv(rows: &[AdaptationRow]) -> String {
    let mut out = String::from("approach,ratio,occurrences,bleu,accuracy,overtranslation\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.approach),
            r.ratio,
            r.occurrences,
            r.bleu,
            r.accuracy,
            r.overtranslation
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(pairs: &[(&str, &str)]) -> EvalCorpus {
        EvalCorpus::new(
            pairs.iter().map(|(h, _)| Sentence::parse(h).unwrap()).collect(),
            pairs.iter().map(|(_, r)| Sentence::parse(r).unwrap()).collect(),
        )
        .unwrap()
    }

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    #[test]
    fn clipping_caps_at_one() {
        let c = corpus(&[("w w w x", "w w y")]);
        let s = word_accuracy(&c, &tok("w")).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert_eq!((s.p_clipped, s.n_total, s.excess), (2, 2, 1));
    }

    #[test]
    fn missing_word_scores_zero() {
        let c = corpus(&[("a b", "w b")]);
        assert_eq!(word_accuracy(&c, &tok("w")).unwrap().accuracy, 0.0);
    }

    #[test]
    fn three_sentence_fixture() {
        // n = (1, 2, 1), p = (1, 0, 2)
        let c = corpus(&[("w", "w"), ("a", "w w"), ("w w", "w")]);
        let s = word_accuracy(&c, &tok("w")).unwrap();
        assert_eq!(s.accuracy, 0.5);
        assert_eq!(s.p_clipped, 2);
        assert_eq!(s.n_total, 4);
        // macro: mean(1, 0, 1)
        let m = word_score(&c, &tok("w"), AccuracyMode::Macro).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn over_translation_counts_excess() {
        // n = (1, 1), p = (3, 0)
        let c = corpus(&[("w w w", "w"), ("a", "w")]);
        assert_eq!(over_translation(&c, &tok("w")).unwrap(), 1.0);
        let c = corpus(&[("w", "w w"), ("a", "w")]);
        assert_eq!(over_translation(&c, &tok("w")).unwrap(), 0.0);
    }

    #[test]
    fn overall_is_unweighted_mean() {
        let c = corpus(&[("a", "a"), ("x", "b b b")]);
        assert_eq!(overall_accuracy(&c, &[tok("a"), tok("b")], AccuracyMode::Micro).unwrap(), 0.5);
        assert_eq!(overall_accuracy(&c, &[tok("a")], AccuracyMode::Micro).unwrap(), 1.0);
    }

    #[test]
    fn absent_word_is_an_error() {
        let c = corpus(&[("a", "b")]);
        assert!(matches!(word_accuracy(&c, &tok("w")), Err(Error::WordAbsent(_))));
    }

    #[test]
    fn unrelated_sentences_leave_accuracy_unchanged() {
        let base = corpus(&[("w a", "w b"), ("c", "w w")]);
        let padded = corpus(&[("w a", "w b"), ("q", "r s"), ("c", "w w"), ("x y", "z")]);
        assert_eq!(
            word_accuracy(&base, &tok("w")).unwrap().accuracy,
            word_accuracy(&padded, &tok("w")).unwrap().accuracy
        );
    }

    #[test]
    fn bleu_identity_and_zero() {
        let c = corpus(&[
            ("the cat sat on the mat", "the cat sat on the mat"),
            ("a quick brown fox jumps", "a quick brown fox jumps"),
        ]);
        assert_eq!(corpus_bleu(&c, 4).unwrap().score, 100.0);
        let c = corpus(&[("a b c d e", "a b c e d")]);
        assert_eq!(corpus_bleu(&c, 4).unwrap().score, 0.0);
    }

    #[test]
    fn bleu_brevity_penalty() {
        let c = corpus(&[("a b c d", "a b c d e f g h")]);
        let b = corpus_bleu(&c, 4).unwrap();
        assert!((b.brevity_penalty - (1.0f64 - 2.0).exp()).abs() < 1e-15);
        assert!((b.score - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn bleu_rejects_empty() {
        let c = EvalCorpus::new(vec![], vec![]).unwrap();
        assert!(matches!(corpus_bleu(&c, 4), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn report_csv_quotes_commas() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("ab"), "ab");
    }
}
