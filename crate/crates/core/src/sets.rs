//! Fine-tuning set construction.
//!
//! Every set mixes three roles. With `n_ref` reference pairs, `n_synth`
//! synthetic pairs and `n_rand` random padding pairs,
//!
//! ```text
//! n_total = n_ref + n_synth + n_rand
//! r       = n_total / n_ref
//! ```
//!
//! Each reference brings `r - 1` companions: `synth_share` synthetic and
//! `rand_share` random pairs. A reference sentence that serves two evaluation
//! words is emitted once but keeps its companions for both words, so the
//! ratio holds exactly on reference *slots* and the difference is reported as
//! a dedup adjustment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::SyntheticPair;
use crate::corpus::{ParallelCorpus, Sentence, SentencePair, Token};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproachKind {
    Finetune,
    Randompad,
    Augmented,
    Half,
}

impl ApproachKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ApproachKind::Finetune => "finetune",
            ApproachKind::Randompad => "randompad",
            ApproachKind::Augmented => "augmented",
            ApproachKind::Half => "half",
        }
    }
}

/// An approach with its ratio and the split of companions per reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ApproachSpec {
    kind: ApproachKind,
    ratio: usize,
    synth_share: usize,
    rand_share: usize,
}

impl ApproachSpec {
    pub fn finetune() -> Self {
        ApproachSpec {
            kind: ApproachKind::Finetune,
            ratio: 1,
            synth_share: 0,
            rand_share: 0,
        }
    }

    pub fn randompad(ratio: usize) -> Result<Self> {
        Self::new(ApproachKind::Randompad, ratio, 0, ratio.saturating_sub(1))
    }

    pub fn augmented(ratio: usize) -> Result<Self> {
        Self::new(ApproachKind::Augmented, ratio, ratio.saturating_sub(1), 0)
    }

    /// Synthetic share rounds up: `half(20)` is 1 reference, 10 synthetic
    /// and 9 random pairs.
    pub fn half(ratio: usize) -> Result<Self> {
        let companions = ratio.saturating_sub(1);
        let synth = companions.div_ceil(2);
        Self::new(ApproachKind::Half, ratio, synth, companions - synth)
    }

    pub fn new(
        kind: ApproachKind,
        ratio: usize,
        synth_share: usize,
        rand_share: usize,
    ) -> Result<Self> {
        let bad = |why: &str| Err(Error::InvalidConfig(format!("{}({ratio}): {why}", kind.as_str())));
        if ratio == 0 || 1 + synth_share + rand_share != ratio {
            return bad("shares must satisfy 1 + synth + rand == r >= 1");
        }
        match kind {
            ApproachKind::Finetune if ratio != 1 => return bad("finetune has r = 1"),
            ApproachKind::Randompad if synth_share != 0 || ratio < 2 => {
                return bad("randompad uses random padding only, r >= 2")
            }
            ApproachKind::Augmented if rand_share != 0 || ratio < 2 => {
                return bad("augmented uses synthetic pairs only, r >= 2")
            }
            ApproachKind::Half if synth_share == 0 || rand_share == 0 => {
                return bad("half needs both synthetic and random pairs, r >= 3")
            }
            _ => {}
        }
        Ok(ApproachSpec {
            kind,
            ratio,
            synth_share,
            rand_share,
        })
    }

    pub fn kind(&self) -> ApproachKind {
        self.kind
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn synth_share(&self) -> usize {
        self.synth_share
    }

    pub fn rand_share(&self) -> usize {
        self.rand_share
    }

    /// `{kind}_{r}`, the prefix of set file names.
    pub fn label(&self) -> String {
        format!("{}_{}", self.kind.as_str(), self.ratio)
    }

    /// File stem of the set built at `c` occurrences.
    pub fn file_stem(&self, c: usize) -> String {
        format!("{}_{c}", self.label())
    }

    /// Epoch and learning-rate defaults for the external trainer.
    pub fn trainer_defaults(&self) -> TrainerDefaults {
        let (slow_lr, fast_epochs, fast_lr) = match self.kind {
            ApproachKind::Finetune => (4e-5, 30, 1e-4),
            ApproachKind::Randompad if self.ratio <= 2 => (4e-5, 30, 1e-4),
            ApproachKind::Randompad => (1e-5, 30, 4e-5),
            ApproachKind::Augmented | ApproachKind::Half => (4e-6, 10, 4e-5),
        };
        TrainerDefaults {
            slow: Schedule {
                epochs: 10,
                learning_rate: slow_lr,
            },
            fast: Schedule {
                epochs: fast_epochs,
                learning_rate: fast_lr,
            },
        }
    }
}

impl fmt::Display for ApproachSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ApproachKind::Finetune => f.write_str("finetune"),
            k => write!(f, "{}({})", k.as_str(), self.ratio),
        }
    }
}

impl FromStr for ApproachSpec {
    type Err = Error;

    /// Accepts `finetune`, `randompad(2)`, `augmented(20)`, `half(20)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, ratio) = match s.split_once('(') {
            Some((name, rest)) => {
                let digits = rest.strip_suffix(')').unwrap_or("");
                let r = digits
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad approach {s:?}")))?;
                (name.trim(), Some(r))
            }
            None => (s, None),
        };
        match (name, ratio) {
            ("finetune", None | Some(1)) => Ok(Self::finetune()),
            ("randompad", Some(r)) => Self::randompad(r),
            ("augmented", Some(r)) => Self::augmented(r),
            ("half", Some(r)) => Self::half(r),
            _ => Err(Error::InvalidConfig(format!("bad approach {s:?}"))),
        }
    }
}

impl TryFrom<String> for ApproachSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ApproachSpec> for String {
    fn from(a: ApproachSpec) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerDefaults {
    pub slow: Schedule,
    pub fast: Schedule,
}

/// Reference counts at which fine-tuning is evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct OccurrenceSchedule(Vec<usize>);

impl OccurrenceSchedule {
    pub fn new(steps: Vec<usize>) -> Result<Self> {
        if steps.is_empty()
            || steps[0] == 0
            || steps.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidConfig(format!(
                "occurrence schedule {steps:?} must be positive and strictly increasing"
            )));
        }
        Ok(OccurrenceSchedule(steps))
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("non-empty")
    }
}

impl Default for OccurrenceSchedule {
    fn default() -> Self {
        OccurrenceSchedule(vec![1, 2, 3, 5, 10, 15, 20])
    }
}

impl TryFrom<Vec<usize>> for OccurrenceSchedule {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OccurrenceSchedule> for Vec<usize> {
    fn from(s: OccurrenceSchedule) -> Vec<usize> {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Synthetic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedPair {
    pub role: Role,
    /// The evaluation word this pair was attached for.
    pub word: Token,
    pub pair: SentencePair,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub n_ref: usize,
    pub n_synth: usize,
    pub n_rand: usize,
    pub n_total: usize,
    /// Reference slots that reused a pair already emitted for another word.
    pub dedup_adjustments: usize,
}

impl RoleCounts {
    /// Reference slots before deduplication.
    pub fn reference_slots(&self) -> usize {
        self.n_ref + self.dedup_adjustments
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneSet {
    pub approach: ApproachSpec,
    pub occurrences: usize,
    pub seed: u64,
    /// Shuffled mixture of all roles.
    pub pairs: Vec<TaggedPair>,
    pub counts: RoleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetManifest {
    pub approach: ApproachSpec,
    pub ratio: usize,
    pub occurrences: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub counts: RoleCounts,
    pub effective_ratio: f64,
    pub trainer_defaults: TrainerDefaults,
}

impl FinetuneSet {
    pub fn file_stem(&self) -> String {
        self.approach.file_stem(self.occurrences)
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.pair.source)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.pair.target)
    }

    pub fn manifest(&self) -> SetManifest {
        SetManifest {
            approach: self.approach,
            ratio: self.approach.ratio(),
            occurrences: self.occurrences,
            seed: self.seed,
            counts: self.counts,
            effective_ratio: self.counts.n_total as f64 / self.counts.n_ref.max(1) as f64,
            trainer_defaults: self.approach.trainer_defaults(),
        }
    }

    /// Ids of the reference pairs, in the order they were taken.
    pub fn reference_ids(&self) -> Vec<u64> {
        let mut refs: Vec<&TaggedPair> =
            self.pairs.iter().filter(|p| p.role == Role::Reference).collect();
        refs.sort_by_key(|p| p.pair.id);
        refs.iter().map(|p| p.pair.id).collect()
    }
}

/// Synthetic pairs per word, one list per reference sentence in the same
/// order as the word's references, each list in rank order.
pub type SyntheticPools = BTreeMap<Token, Vec<Vec<SyntheticPair>>>;

/// Builds one set: for each word its first `c` references, each with its
/// synthetic and random companions, shuffled together.
pub fn build_set(
    approach: ApproachSpec,
    c: usize,
    references: &BTreeMap<Token, Vec<SentencePair>>,
    synthetics: &SyntheticPools,
    filtered_training: &ParallelCorpus,
    seed: u64,
) -> Result<FinetuneSet> {
    let label = approach.file_stem(c);
    let mut pairs = Vec::new();
    let mut counts = RoleCounts::default();
    let mut emitted = HashSet::new();
    // word each random slot is attached for
    let mut random_slots: Vec<&Token> = Vec::new();

    for (word, refs) in references {
        if refs.len() < c {
            return Err(Error::InsufficientReferences {
                word: word.to_string(),
                available: refs.len(),
                needed: c,
            });
        }
        for (idx, reference) in refs[..c].iter().enumerate() {
            if emitted.insert(reference.id) {
                pairs.push(TaggedPair {
                    role: Role::Reference,
                    word: word.clone(),
                    pair: reference.clone(),
                });
                counts.n_ref += 1;
            } else {
                counts.dedup_adjustments += 1;
            }

            if approach.synth_share() > 0 {
                let pool = synthetics
                    .get(word)
                    .and_then(|per_ref| per_ref.get(idx))
                    .map(Vec::as_slice)
                    .unwrap_or_default();
                if pool.len() < approach.synth_share() {
                    return Err(Error::InsufficientSynthetics {
                        word: word.to_string(),
                        reference: idx,
                        available: pool.len(),
                        needed: approach.synth_share(),
                    });
                }
                let chosen: Vec<usize> = match approach.kind() {
                    ApproachKind::Half => {
                        let mut rng = seeding::rng_for_str(seed, word.as_str(), &[idx as u64]);
                        let mut picks =
                            rand::seq::index::sample(&mut rng, pool.len(), approach.synth_share())
                                .into_vec();
                        picks.sort_unstable();
                        picks
                    }
                    _ => (0..approach.synth_share()).collect(),
                };
                for i in chosen {
                    pairs.push(TaggedPair {
                        role: Role::Synthetic,
                        word: word.clone(),
                        pair: pool[i].pair.clone(),
                    });
                    counts.n_synth += 1;
                }
            }
            random_slots.extend(std::iter::repeat_n(word, approach.rand_share()));
        }
    }

    if !random_slots.is_empty() {
        let available = filtered_training.len();
        if available < random_slots.len() {
            return Err(Error::InsufficientPadding {
                available,
                needed: random_slots.len(),
            });
        }
        let mut rng = seeding::rng_for_str(seed, &label, &[]);
        let picks = rand::seq::index::sample(&mut rng, available, random_slots.len());
        for (word, i) in random_slots.into_iter().zip(picks) {
            pairs.push(TaggedPair {
                role: Role::Random,
                word: word.clone(),
                pair: filtered_training.pairs()[i].clone(),
            });
            counts.n_rand += 1;
        }
    }

    counts.n_total = pairs.len();
    let mut rng = seeding::rng_for_str(seed, &label, &[1]);
    pairs.shuffle(&mut rng);

    Ok(FinetuneSet {
        approach,
        occurrences: c,
        seed,
        pairs,
        counts,
    })
}

/// One set per `(approach, c)` cell, approaches outermost.
pub fn schedule_runs(
    schedule: &OccurrenceSchedule,
    approaches: &[ApproachSpec],
    references: &BTreeMap<Token, Vec<SentencePair>>,
    synthetics: &SyntheticPools,
    filtered_training: &ParallelCorpus,
    seed: u64,
) -> Result<Vec<FinetuneSet>> {
    let cells: Vec<(ApproachSpec, usize)> = approaches
        .iter()
        .flat_map(|&a| schedule.steps().iter().map(move |&c| (a, c)))
        .collect();
    cells
        .into_par_iter()
        .map(|(a, c)| build_set(a, c, references, synthetics, filtered_training, seed))
        .collect()
}
