//! Lexical word alignment trained by expectation maximisation.
//!
//! The model is IBM Model 1 with a NULL source word: every target token is
//! generated by one source token (or NULL) with probability `t(target |
//! source)`. Optionally the alignment prior can be replaced by the diagonal
//! prior popularised by fast_align,
//!
//! ```text
//! a(NULL | j)  = p0
//! a(i | j)     = (1 - p0) * exp(-tension * |(i+1)/m - (j+1)/n|) / Z_j
//! ```
//!
//! with a fixed `tension`. The prior is not learned.
//!
//! Expected counts are accumulated over fixed-size chunks of the corpus in
//! parallel and merged in chunk order, and rows are kept sorted by target id,
//! so a training run is bitwise reproducible regardless of thread count.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ParallelCorpus, SentencePair, Token};
use crate::error::{Error, Result};
use crate::wordselect::EvaluationWord;

/// Probability used for `(source, target)` combinations absent from the table.
pub const UNSEEN_PROB: f64 = 1e-6;
/// Probability mass reserved for NULL under the diagonal prior.
pub const DIAGONAL_NULL_PROB: f64 = 0.08;
/// How the NULL source word is written in table files.
pub const NULL_SYMBOL: &str = "<eps>";

const CHUNK: usize = 256;
const NULL: u32 = 0;

#[derive(Debug, Clone)]
pub struct TranslationTable {
    // index 0 is NULL
    sources: Vec<Option<Token>>,
    source_ids: HashMap<Token, u32>,
    targets: Vec<Token>,
    target_ids: HashMap<Token, u32>,
    // per source id, sorted by target id
    rows: Vec<Vec<(u32, f64)>>,
    diagonal_tension: Option<f64>,
    log_likelihood: Vec<f64>,
}

struct Encoded {
    source: Vec<u32>,
    target: Vec<u32>,
}

impl TranslationTable {
    fn with_vocab(corpus: &ParallelCorpus) -> (Self, Vec<Encoded>) {
        let mut table = TranslationTable {
            sources: vec![None],
            source_ids: HashMap::new(),
            targets: Vec::new(),
            target_ids: HashMap::new(),
            rows: Vec::new(),
            diagonal_tension: None,
            log_likelihood: Vec::new(),
        };
        let encoded = corpus
            .pairs()
            .iter()
            .map(|p| Encoded {
                source: p.source.tokens().iter().map(|t| table.intern_source(t)).collect(),
                target: p.target.tokens().iter().map(|t| table.intern_target(t)).collect(),
            })
            .collect();
        (table, encoded)
    }

    fn intern_source(&mut self, t: &Token) -> u32 {
        if let Some(&id) = self.source_ids.get(t) {
            return id;
        }
        let id = self.sources.len() as u32;
        self.sources.push(Some(t.clone()));
        self.source_ids.insert(t.clone(), id);
        id
    }

    fn intern_target(&mut self, t: &Token) -> u32 {
        if let Some(&id) = self.target_ids.get(t) {
            return id;
        }
        let id = self.targets.len() as u32;
        self.targets.push(t.clone());
        self.target_ids.insert(t.clone(), id);
        id
    }

    /// The table before any EM step: `t(target | source) = 1 / |target vocab|`
    /// for every co-occurring combination.
    pub fn uniform(corpus: &ParallelCorpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let (mut table, encoded) = Self::with_vocab(corpus);
        table.init_uniform(&encoded);
        Ok(table)
    }

    fn init_uniform(&mut self, encoded: &[Encoded]) {
        let mut support: Vec<Vec<u32>> = vec![Vec::new(); self.sources.len()];
        for e in encoded {
            for &t in &e.target {
                support[NULL as usize].push(t);
                for &s in &e.source {
                    support[s as usize].push(t);
                }
            }
        }
        let p = 1.0 / self.targets.len() as f64;
        self.rows = support
            .into_iter()
            .map(|mut ts| {
                ts.sort_unstable();
                ts.dedup();
                ts.into_iter().map(|t| (t, p)).collect()
            })
            .collect();
    }

    fn lookup(&self, s: u32, t: u32) -> Option<f64> {
        let row = &self.rows[s as usize];
        row.binary_search_by_key(&t, |&(k, _)| k).ok().map(|i| row[i].1)
    }

    /// `t(target | source)`, with `None` standing for NULL. Zero if unseen.
    pub fn prob(&self, source: Option<&Token>, target: &Token) -> f64 {
        let s = match source {
            None => NULL,
            Some(tok) => match self.source_ids.get(tok) {
                Some(&id) => id,
                None => return 0.0,
            },
        };
        self.target_ids
            .get(target)
            .and_then(|&t| self.lookup(s, t))
            .unwrap_or(0.0)
    }

    pub fn diagonal_tension(&self) -> Option<f64> {
        self.diagonal_tension
    }

    /// Corpus log-likelihood before each EM iteration, followed by the value
    /// under the final parameters.
    pub fn log_likelihood(&self) -> &[f64] {
        &self.log_likelihood
    }

    /// Sum of each source row, NULL first. All ones after training.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, p)| p).sum())
            .collect()
    }

    pub fn source_vocab_len(&self) -> usize {
        self.sources.len()
    }

    /// Unnormalised prior weights for source positions `0..m` (NULL last)
    /// generating target position `j` of `n`.
    fn prior(&self, j: usize, m: usize, n: usize) -> Vec<f64> {
        match self.diagonal_tension {
            None => vec![1.0; m + 1],
            Some(tension) => {
                let mut w: Vec<f64> = (0..m)
                    .map(|i| {
                        let h = ((i + 1) as f64 / m as f64 - (j + 1) as f64 / n as f64).abs();
                        (-tension * h).exp()
                    })
                    .collect();
                let z: f64 = w.iter().sum();
                for x in &mut w {
                    *x *= (1.0 - DIAGONAL_NULL_PROB) / z;
                }
                w.push(DIAGONAL_NULL_PROB);
                w
            }
        }
    }

    /// Posterior `P(a_j = i | pair)` under the current table. Row `j` holds
    /// NULL at index 0 and source position `i` at index `i + 1`.
    pub fn link_posteriors(&self, pair: &SentencePair) -> Vec<Vec<f64>> {
        let src: Vec<Option<u32>> = pair
            .source
            .tokens()
            .iter()
            .map(|t| self.source_ids.get(t).copied())
            .collect();
        let m = src.len();
        let n = pair.target.len();
        pair.target
            .tokens()
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let tid = self.target_ids.get(t).copied();
                let prior = self.prior(j, m, n);
                let score = |s: Option<u32>| match (s, tid) {
                    (Some(s), Some(t)) => self.lookup(s, t).unwrap_or(UNSEEN_PROB),
                    _ => UNSEEN_PROB,
                };
                let mut row = Vec::with_capacity(m + 1);
                row.push(prior[m] * score(Some(NULL)));
                row.extend(src.iter().enumerate().map(|(i, &s)| prior[i] * score(s)));
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= z);
                row
            })
            .collect()
    }

    /// Expected counts and log-likelihood of one chunk.
    fn expect(&self, chunk: &[Encoded]) -> (HashMap<(u32, u32), f64>, f64) {
        let mut counts = HashMap::new();
        let mut ll = 0.0;
        let mut scores = Vec::new();
        for e in chunk {
            let m = e.source.len();
            let n = e.target.len();
            for (j, &t) in e.target.iter().enumerate() {
                let prior = self.prior(j, m, n);
                scores.clear();
                scores.push(prior[m] * self.lookup(NULL, t).unwrap_or(0.0));
                for (i, &s) in e.source.iter().enumerate() {
                    scores.push(prior[i] * self.lookup(s, t).unwrap_or(0.0));
                }
                let z: f64 = scores.iter().sum();
                ll += match self.diagonal_tension {
                    None => (z / (m + 1) as f64).ln(),
                    Some(_) => z.ln(),
                };
                let sources = std::iter::once(NULL).chain(e.source.iter().copied());
                for (s, &score) in sources.zip(&scores) {
                    *counts.entry((s, t)).or_insert(0.0) += score / z;
                }
            }
        }
        (counts, ll)
    }

    /// One E step over the corpus. Returns merged counts and log-likelihood.
    fn expectation(&self, encoded: &[Encoded]) -> (Vec<BTreeMap<u32, f64>>, f64) {
        let partials: Vec<_> = encoded.par_chunks(CHUNK).map(|c| self.expect(c)).collect();
        let mut counts: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); self.sources.len()];
        let mut ll = 0.0;
        for (chunk_counts, chunk_ll) in partials {
            ll += chunk_ll;
            for ((s, t), c) in chunk_counts {
                *counts[s as usize].entry(t).or_insert(0.0) += c;
            }
        }
        (counts, ll)
    }

    fn maximize(&mut self, counts: Vec<BTreeMap<u32, f64>>) {
        self.rows = counts
            .into_iter()
            .map(|row| {
                let total: f64 = row.values().sum();
                row.into_iter().map(|(t, c)| (t, c / total)).collect()
            })
            .collect();
    }
}

/// Trains a translation table with `iterations` EM rounds from uniform
/// initialisation. `diagonal_tension` switches on the fixed diagonal prior.
pub fn train(
    corpus: &ParallelCorpus,
    iterations: usize,
    diagonal_tension: Option<f64>,
) -> Result<TranslationTable> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("aligner needs at least one iteration".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if diagonal_tension.is_some_and(|t| !t.is_finite() || t < 0.0) {
        return Err(Error::InvalidConfig("diagonal tension must be finite and >= 0".into()));
    }
    let (mut table, encoded) = TranslationTable::with_vocab(corpus);
    table.diagonal_tension = diagonal_tension;
    table.init_uniform(&encoded);
    for it in 0..iterations {
        let (counts, ll) = table.expectation(&encoded);
        log::debug!("EM iteration {}: log-likelihood {ll:.6}", it + 1);
        table.log_likelihood.push(ll);
        table.maximize(counts);
    }
    let (_, ll) = table.expectation(&encoded);
    table.log_likelihood.push(ll);
    Ok(table)
}

/// Viterbi links of one pair, as `(source index, target index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub pair_id: u64,
    pub links: Vec<(usize, usize)>,
}

impl Alignment {
    /// Source indices linked to target position `j`.
    pub fn sources_of(&self, j: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|&&(_, t)| t == j)
            .map(|&(s, _)| s)
            .collect()
    }

    /// Pharaoh format: space-separated `i-j`.
    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_pharaoh(pair_id: u64, line: &str) -> Option<Self> {
        let links = line
            .split_whitespace()
            .map(|l| {
                let (i, j) = l.split_once('-')?;
                Some((i.parse().ok()?, j.parse().ok()?))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Alignment { pair_id, links })
    }
}

/// Links each target token to its most probable generator. NULL wins ties
/// and produces no link, as do target tokens never seen in training.
pub fn align(pair: &SentencePair, table: &TranslationTable) -> Alignment {
    let m = pair.source.len();
    let n = pair.target.len();
    let src: Vec<Option<u32>> = pair
        .source
        .tokens()
        .iter()
        .map(|t| table.source_ids.get(t).copied())
        .collect();
    let mut links = Vec::new();
    for (j, t) in pair.target.tokens().iter().enumerate() {
        let Some(&tid) = table.target_ids.get(t) else {
            continue;
        };
        let prior = table.prior(j, m, n);
        let p = |s: Option<u32>| s.and_then(|s| table.lookup(s, tid)).unwrap_or(UNSEEN_PROB);
        let mut best = None;
        let mut best_score = prior[m] * p(Some(NULL));
        for (i, &s) in src.iter().enumerate() {
            let score = prior[i] * p(s);
            if score > best_score {
                best_score = score;
                best = Some(i);
            }
        }
        if let Some(i) = best {
            links.push((i, j));
        }
    }
    Alignment {
        pair_id: pair.id,
        links,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub source: Token,
    pub count: usize,
    /// Every source token aligned to the word, with counts.
    pub candidates: BTreeMap<Token, usize>,
}

/// Target word to source translation, chosen by alignment counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub entries: BTreeMap<Token, LexiconEntry>,
    /// Words with no aligned source token anywhere.
    pub unaligned: Vec<Token>,
}

impl Lexicon {
    pub fn get(&self, word: &Token) -> Option<&Token> {
        self.entries.get(word).map(|e| &e.source)
    }
}

/// For each evaluation word, the source token most often aligned to its
/// occurrences (token-weighted; ties broken lexicographically).
pub fn extract_lexicon(
    corpus: &ParallelCorpus,
    table: &TranslationTable,
    words: &[EvaluationWord],
) -> Lexicon {
    let results: Vec<(Token, BTreeMap<Token, usize>)> = words
        .par_iter()
        .map(|w| {
            let word = &w.target_word;
            let mut counts = BTreeMap::new();
            for pair in corpus.pairs().iter().filter(|p| p.target.contains(word)) {
                let alignment = align(pair, table);
                for &(i, j) in &alignment.links {
                    if pair.target.tokens()[j] == *word {
                        *counts.entry(pair.source.tokens()[i].clone()).or_insert(0) += 1;
                    }
                }
            }
            (word.clone(), counts)
        })
        .collect();

    let mut lexicon = Lexicon::default();
    for (word, candidates) in results {
        match most_aligned(&candidates) {
            Some((source, count)) => {
                lexicon.entries.insert(
                    word,
                    LexiconEntry {
                        source,
                        count,
                        candidates,
                    },
                );
            }
            None => lexicon.unaligned.push(word),
        }
    }
    lexicon
}

/// Highest count wins; among equal counts the lexicographically smallest.
fn most_aligned(candidates: &BTreeMap<Token, usize>) -> Option<(Token, usize)> {
    candidates
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(t, &c)| (t.clone(), c))
}

impl TranslationTable {
    /// `source TAB target TAB prob`, sorted, NULL written as [`NULL_SYMBOL`].
    pub fn to_tsv(&self) -> String {
        let mut lines: Vec<(&str, &str, f64)> = Vec::new();
        for (s, row) in self.rows.iter().enumerate() {
            let src = self.sources[s].as_ref().map_or(NULL_SYMBOL, |t| t.as_str());
            for &(t, p) in row {
                lines.push((src, self.targets[t as usize].as_str(), p));
            }
        }
        lines.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = String::new();
        for (s, t, p) in lines {
            let _ = writeln!(out, "{s}\t{t}\t{p:e}");
        }
        out
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_tsv(text: &str, diagonal_tension: Option<f64>) -> Result<Self> {
        let mut table = TranslationTable {
            sources: vec![None],
            source_ids: HashMap::new(),
            targets: Vec::new(),
            target_ids: HashMap::new(),
            rows: vec![Vec::new()],
            diagonal_tension,
            log_likelihood: Vec::new(),
        };
        for (n, line) in text.lines().enumerate() {
            let bad = || Error::InvalidConfig(format!("translation table line {}: {line:?}", n + 1));
            let mut parts = line.split('\t');
            let (Some(s), Some(t), Some(p), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let p: f64 = p.parse().map_err(|_| bad())?;
            let sid = if s == NULL_SYMBOL {
                NULL
            } else {
                table.intern_source(&Token::new(s)?)
            };
            let tid = table.intern_target(&Token::new(t)?);
            if table.rows.len() <= sid as usize {
                table.rows.resize(sid as usize + 1, Vec::new());
            }
            table.rows[sid as usize].push((tid, p));
        }
        for row in &mut table.rows {
            row.sort_by_key(|&(t, _)| t);
        }
        Ok(table)
    }

    pub fn load_tsv(path: &Path, diagonal_tension: Option<f64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, diagonal_tension)
    }
}
