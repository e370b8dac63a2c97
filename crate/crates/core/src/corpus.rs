//! Tokenized parallel corpora.
//!
//! Input is expected to be tokenized already (one sentence per line, tokens
//! separated by single spaces). Nothing here re-tokenizes; the only
//! transformation applied on load is optional lowercasing.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single word token. Never empty, never contains whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken(text));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Token::new(value)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Token {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Token {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// A non-empty sequence of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidToken(String::new()));
        }
        Ok(Sentence { tokens })
    }

    /// Parses a space-separated line.
    pub fn parse(line: &str) -> Result<Self> {
        let tokens = line
            .split_whitespace()
            .map(|t| Token(t.to_owned()))
            .collect();
        Sentence::new(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Token> {
        self.tokens.get(index)
    }

    pub fn count(&self, word: &Token) -> usize {
        self.tokens.iter().filter(|t| *t == word).count()
    }

    pub fn contains(&self, word: &Token) -> bool {
        self.tokens.iter().any(|t| t == word)
    }

    pub fn position(&self, word: &Token) -> Option<usize> {
        self.tokens.iter().position(|t| t == word)
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

impl TryFrom<String> for Sentence {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Sentence::parse(&value)
    }
}

impl From<Sentence> for String {
    fn from(s: Sentence) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Genuine,
    SyntheticBacktranslation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

/// How frequencies are counted for word selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Every occurrence counts, including repeats within one sentence.
    #[default]
    Token,
    /// A sentence counts once no matter how often the word repeats.
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: u64,
    pub source: Sentence,
    pub target: Sentence,
    pub origin: Origin,
}

impl SentencePair {
    pub fn new(id: u64, source: Sentence, target: Sentence, origin: Origin) -> Self {
        SentencePair {
            id,
            source,
            target,
            origin,
        }
    }

    pub fn side(&self, side: Side) -> &Sentence {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }
}

/// Options applied while reading corpus files.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub lowercase: bool,
}

/// An immutable parallel corpus with per-side frequency tables.
#[derive(Debug, Clone, Default)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    source_freq: HashMap<Token, usize>,
    target_freq: HashMap<Token, usize>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        let mut source_freq = HashMap::new();
        let mut target_freq = HashMap::new();
        for p in &pairs {
            for t in p.source.tokens() {
                *source_freq.entry(t.clone()).or_insert(0) += 1;
            }
            for t in p.target.tokens() {
                *target_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Ok(ParallelCorpus {
            pairs,
            source_freq,
            target_freq,
        })
    }

    /// Builds a corpus from `(source, target)` line pairs, numbering them from 0.
    pub fn from_lines<'a, I>(lines: I, origin: Origin) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs = lines
            .into_iter()
            .enumerate()
            .map(|(i, (s, t))| {
                Ok(SentencePair::new(
                    i as u64,
                    Sentence::parse(s)?,
                    Sentence::parse(t)?,
                    origin,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        ParallelCorpus::new(pairs)
    }

    /// Appends `other`, renumbering its ids to follow this corpus.
    pub fn concat(self, other: ParallelCorpus) -> Result<Self> {
        let offset = self.next_id();
        let mut pairs = self.pairs;
        pairs.extend(other.pairs.into_iter().map(|mut p| {
            p.id += offset;
            p
        }));
        ParallelCorpus::new(pairs)
    }

    fn next_id(&self) -> u64 {
        self.pairs.iter().map(|p| p.id + 1).max().unwrap_or(0)
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&SentencePair> {
        // ids are usually dense and in order
        match self.pairs.get(id as usize) {
            Some(p) if p.id == id => Some(p),
            _ => self.pairs.iter().find(|p| p.id == id),
        }
    }

    pub fn frequencies(&self, side: Side) -> &HashMap<Token, usize> {
        match side {
            Side::Source => &self.source_freq,
            Side::Target => &self.target_freq,
        }
    }

    /// Total token-level occurrences of `word` on `side`.
    pub fn count_occurrences(&self, word: &Token, side: Side) -> usize {
        self.frequencies(side).get(word).copied().unwrap_or(0)
    }

    /// Number of sentences on `side` containing `word` at least once.
    pub fn count_sentences(&self, word: &Token, side: Side) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.side(side).contains(word))
            .count()
    }

    pub fn count(&self, word: &Token, side: Side, mode: CountMode) -> usize {
        match mode {
            CountMode::Token => self.count_occurrences(word, side),
            CountMode::Sentence => self.count_sentences(word, side),
        }
    }

    /// Frequency table under `mode`. Sentence mode is recomputed on each call.
    pub fn counts(&self, side: Side, mode: CountMode) -> HashMap<Token, usize> {
        match mode {
            CountMode::Token => self.frequencies(side).clone(),
            CountMode::Sentence => {
                let mut out = HashMap::new();
                for p in &self.pairs {
                    let mut toks: Vec<&Token> = p.side(side).tokens().iter().collect();
                    toks.sort_unstable();
                    toks.dedup();
                    for t in toks {
                        *out.entry(t.clone()).or_insert(0) += 1;
                    }
                }
                out
            }
        }
    }

    pub fn filter<F>(&self, mut keep: F) -> ParallelCorpus
    where
        F: FnMut(&SentencePair) -> bool,
    {
        let pairs = self.pairs.iter().filter(|p| keep(p)).cloned().collect();
        ParallelCorpus::new(pairs).expect("subset of a valid corpus")
    }

    /// Writes the corpus as two parallel text files.
    pub fn save(&self, source_path: &Path, target_path: &Path) -> Result<()> {
        write_lines(source_path, self.pairs.iter().map(|p| &p.source))?;
        write_lines(target_path, self.pairs.iter().map(|p| &p.target))
    }

    /// Writes the corpus as a single `source<TAB>target` file.
    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&p.source.to_string());
            out.push('\t');
            out.push_str(&p.target.to_string());
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn write_lines<'a, I>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in lines {
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path, opts: &LoadOptions) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| if opts.lowercase { l.to_lowercase() } else { l.to_owned() })
        .collect())
}

fn parse_line(path: &Path, line_no: usize, line: &str) -> Result<Sentence> {
    if line.trim().is_empty() {
        return Err(Error::EmptyLine {
            path: path.to_owned(),
            line: line_no,
        });
    }
    Sentence::parse(line)
}

/// Loads a corpus from two parallel text files.
///
/// Pair ids follow file order starting at 0. Line counts must match and no
/// line may be empty.
pub fn load_corpus(
    source_path: &Path,
    target_path: &Path,
    origin: Origin,
    opts: &LoadOptions,
) -> Result<ParallelCorpus> {
    let src = read_lines(source_path, opts)?;
    let tgt = read_lines(target_path, opts)?;
    if src.len() != tgt.len() {
        return Err(Error::LineCountMismatch {
            source_lines: src.len(),
            target_lines: tgt.len(),
        });
    }
    let mut pairs = Vec::with_capacity(src.len());
    for (i, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let source = parse_line(source_path, i + 1, s)?;
        let target = parse_line(target_path, i + 1, t)?;
        pairs.push(SentencePair::new(i as u64, source, target, origin));
    }
    ParallelCorpus::new(pairs)
}

/// Loads a corpus from a single file of `source<TAB>target` lines.
pub fn load_tsv(path: &Path, origin: Origin, opts: &LoadOptions) -> Result<ParallelCorpus> {
    let lines = read_lines(path, opts)?;
    let mut pairs = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let mut parts = line.split('\t');
        let (Some(s), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::MalformedTsv {
                path: path.to_owned(),
                line: i + 1,
            });
        };
        let source = parse_line(path, i + 1, s)?;
        let target = parse_line(path, i + 1, t)?;
        pairs.push(SentencePair::new(i as u64, source, target, origin));
    }
    ParallelCorpus::new(pairs)
}

/// Loads one side of a monolingual file, e.g. hypotheses to score.
pub fn load_sentences(path: &Path, opts: &LoadOptions) -> Result<Vec<Sentence>> {
    read_lines(path, opts)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_line(path, i + 1, l))
        .collect()
}

/// Reads a plain word list, one token per line. Blank lines are skipped.
pub fn load_word_list(path: &Path, opts: &LoadOptions) -> Result<Vec<Token>> {
    read_lines(path, opts)?
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(Token::new)
        .collect()
}
