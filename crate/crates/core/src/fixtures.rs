//! Deterministic synthetic corpora and literal example data.
//!
//! Toy languages are generated from a bijective lexicon, position by
//! position, so the identity alignment is the correct one by construction.
//! That makes every pipeline stage checkable exactly.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::corpus::{Origin, ParallelCorpus, Sentence, SentencePair, Token};
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyLanguageSpec {
    pub vocab_size: usize,
    /// Source to target lexicon. Must be a bijection; `None` generates
    /// `s{i} -> t{i}`.
    pub lexicon: Option<BTreeMap<Token, Token>>,
    pub min_len: usize,
    pub max_len: usize,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for ToyLanguageSpec {
    fn default() -> Self {
        ToyLanguageSpec {
            vocab_size: 10,
            lexicon: None,
            min_len: 3,
            max_len: 8,
            n_pairs: 100,
            seed: 0,
        }
    }
}

impl ToyLanguageSpec {
    /// The lexicon in use, as ordered `(source, target)` entries.
    pub fn entries(&self) -> Vec<(Token, Token)> {
        match &self.lexicon {
            Some(l) => l.iter().map(|(s, t)| (s.clone(), t.clone())).collect(),
            None => (0..self.vocab_size)
                .map(|i| {
                    (
                        Token::new(format!("s{i}")).unwrap(),
                        Token::new(format!("t{i}")).unwrap(),
                    )
                })
                .collect(),
        }
    }

    pub fn is_bijective(&self) -> bool {
        let entries = self.entries();
        let targets: HashSet<&Token> = entries.iter().map(|(_, t)| t).collect();
        targets.len() == entries.len()
    }
}

/// Generates `n_pairs` pairs with `target[j] == lexicon(source[j])`.
pub fn generate(spec: &ToyLanguageSpec) -> ParallelCorpus {
    assert!(spec.is_bijective(), "toy lexicon must be a bijection");
    assert!(spec.min_len >= 1 && spec.min_len <= spec.max_len);
    let entries = spec.entries();
    let pairs = (0..spec.n_pairs)
        .map(|i| {
            let mut rng = seeding::rng(spec.seed, &[i as u64]);
            let len = rng.gen_range(spec.min_len..=spec.max_len);
            let picks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..entries.len())).collect();
            let source = picks.iter().map(|&k| entries[k].0.clone()).collect();
            let target = picks.iter().map(|&k| entries[k].1.clone()).collect();
            SentencePair::new(
                i as u64,
                Sentence::new(source).unwrap(),
                Sentence::new(target).unwrap(),
                Origin::Genuine,
            )
        })
        .collect();
    ParallelCorpus::new(pairs).unwrap()
}

/// A copy language: source and target sentences are identical.
pub fn copy_language(vocab_size: usize, n_pairs: usize, seed: u64) -> ParallelCorpus {
    let lexicon = (0..vocab_size)
        .map(|i| {
            let t = Token::new(format!("c{i}")).unwrap();
            (t.clone(), t)
        })
        .collect();
    generate(&ToyLanguageSpec {
        vocab_size,
        lexicon: Some(lexicon),
        n_pairs,
        seed,
        ..Default::default()
    })
}

/// Overwrites one aligned position in `count` distinct pairs with
/// `source_word`/`target_word`. Positions already holding a planted word are
/// left alone, so planting several words never erases an earlier one.
///
/// Returns the ids of the planted pairs.
pub fn plant(
    corpus: &mut [SentencePair],
    source_word: &Token,
    target_word: &Token,
    count: usize,
    planted: &mut HashSet<(u64, usize)>,
    seed: u64,
) -> Vec<u64> {
    assert!(count <= corpus.len(), "cannot plant {count} times in {} pairs", corpus.len());
    let mut rng = seeding::rng_for_str(seed, target_word.as_str(), &[]);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut ids = Vec::with_capacity(count);
    for idx in order {
        if ids.len() == count {
            break;
        }
        let pair = &mut corpus[idx];
        let len = pair.target.len();
        if pair.source.len() != len || pair.target.contains(target_word) {
            continue;
        }
        let free: Vec<usize> = (0..len).filter(|&j| !planted.contains(&(pair.id, j))).collect();
        if free.is_empty() {
            continue;
        }
        let j = free[rng.gen_range(0..free.len())];
        let mut src = pair.source.tokens().to_vec();
        let mut tgt = pair.target.tokens().to_vec();
        src[j] = source_word.clone();
        tgt[j] = target_word.clone();
        pair.source = Sentence::new(src).unwrap();
        pair.target = Sentence::new(tgt).unwrap();
        planted.insert((pair.id, j));
        ids.push(pair.id);
    }
    assert_eq!(ids.len(), count, "not enough room to plant {target_word}");
    ids
}

/// A train/test setup with planted rare words.
#[derive(Debug, Clone)]
pub struct PipelineFixture {
    pub genuine: ParallelCorpus,
    pub backtranslation: ParallelCorpus,
    pub test: ParallelCorpus,
    /// `(target word, source word)` for every planted rare word.
    pub rare_words: Vec<(Token, Token)>,
}

#[derive(Debug, Clone)]
pub struct PipelineFixtureSpec {
    pub vocab_size: usize,
    pub n_genuine: usize,
    pub n_backtranslation: usize,
    pub n_test: usize,
    pub n_rare: usize,
    /// Planted occurrences of each rare word in the genuine training data.
    pub train_occurrences: usize,
    /// Extra occurrences in the backtranslated data.
    pub backtranslation_occurrences: usize,
    pub test_occurrences: usize,
    pub seed: u64,
}

impl Default for PipelineFixtureSpec {
    fn default() -> Self {
        PipelineFixtureSpec {
            vocab_size: 40,
            n_genuine: 3000,
            n_backtranslation: 600,
            n_test: 200,
            n_rare: 6,
            train_occurrences: 24,
            backtranslation_occurrences: 2,
            test_occurrences: 6,
            seed: 7,
        }
    }
}

pub fn rare_word(k: usize) -> (Token, Token) {
    (
        Token::new(format!("w{k}")).unwrap(),
        Token::new(format!("v{k}")).unwrap(),
    )
}

pub fn pipeline_fixture(spec: &PipelineFixtureSpec) -> PipelineFixture {
    let toy = |n_pairs, salt| ToyLanguageSpec {
        vocab_size: spec.vocab_size,
        lexicon: None,
        min_len: 4,
        max_len: 12,
        n_pairs,
        seed: seeding::mix(spec.seed, &[salt]),
    };
    let rare_words: Vec<(Token, Token)> = (0..spec.n_rare).map(rare_word).collect();

    let plant_all = |corpus: ParallelCorpus, per_word: usize, salt: u64, origin: Origin| {
        let mut pairs = corpus.pairs().to_vec();
        for p in &mut pairs {
            p.origin = origin;
        }
        let mut planted = HashSet::new();
        for (target, source) in &rare_words {
            plant(&mut pairs, source, target, per_word, &mut planted, seeding::mix(spec.seed, &[salt]));
        }
        ParallelCorpus::new(pairs).unwrap()
    };

    PipelineFixture {
        genuine: plant_all(generate(&toy(spec.n_genuine, 1)), spec.train_occurrences, 11, Origin::Genuine),
        backtranslation: plant_all(
            generate(&toy(spec.n_backtranslation, 2)),
            spec.backtranslation_occurrences,
            12,
            Origin::SyntheticBacktranslation,
        ),
        test: plant_all(generate(&toy(spec.n_test, 3)), spec.test_occurrences, 13, Origin::Genuine),
        rare_words,
    }
}

/// The 96 curated evaluation words of the Gujarati-English setup.
pub const CURATED_WORDS: [&str; 96] = [
    "2018", "ATM", "Ahmedabad", "Ambani", "Amul", "Anand", "Ayr", //
    "BJP", "Bachchan", "Becker", "Bedford", "Chequers", "Constantinople", "Conway", //
    "DM", "Dinesh", "Dragons", "Fidelity", "Fleetwood", "GB", "GST", //
    "Gadkari", "Giga", "HDFC", "Hastings", "Isabel", "Jammu", "Kapoor", //
    "Kavanaugh", "Keyser", "Kohli", "Lavrov", "Lina", "Lucknow", "MLA", //
    "Manish", "Mayorga", "Meng", "Modi", "Molinari", "Mukesh", "Musk", //
    "Márquez", "Nana", "Narendra", "Nifty", "Oldham", "Palu", "Patriarch", //
    "Patriarchate", "Prithvi", "Pune", "RCN", "RTI", "Rajkot", "Rupani", //
    "Rupee", "Sachin", "Salman", "Scalia", "Seeley", "Sensex", "Shetty", //
    "Shilpa", "Spiegel", "Sulawesi", "Surat", "Sushma", "Tendulkar", "Tesla", //
    "Tiwari", "Twitter", "Vadodara", "Virat", "Vyas", "Watts", "app", //
    "apps", "cleanliness", "crores", "cylinders", "dough", "fortress", "ghee", //
    "inaugurate", "intoxicated", "lakhs", "litre", "mentioning", "moustache", "niece", //
    "refrigerators", "sacrificed", "slab", "smartphone", "strawberries",
];

/// A sentence with a highlighted token.
#[derive(Debug, Clone, Copy)]
pub struct MarkedSentence {
    pub text: &'static str,
    pub position: usize,
}

impl MarkedSentence {
    pub fn sentence(&self) -> Sentence {
        Sentence::parse(self.text).unwrap()
    }

    pub fn token(&self) -> Token {
        self.sentence().tokens()[self.position].clone()
    }
}

/// Reference sentence for "Sulawesi", tokenized.
pub const SULAWESI_REFERENCE: MarkedSentence = MarkedSentence {
    text: "A powerful 7.5 magnitude earthquake hit the Indonesian island of Sulawesi on Friday , \
           September 29 , triggering a tsunami and leaving nearly 400 people dead .",
    position: 10,
};

/// The five retrieved sentences reported for the Sulawesi reference, with
/// the sampled position of each.
pub const SULAWESI_MATCHES: [MarkedSentence; 5] = [
    MarkedSentence {
        text: "This labour shortage prompted the authorities to import slaves from Indonesia \
               and Madagascar .",
        position: 10,
    },
    MarkedSentence {
        text: "Many of them have settled down in Ahmedabad , Vadodara , Mumbai , Kolkota , Delhi , \
               Nagpur and far away places like Java , Rangoon , Singapore , Fiji , Eden , Kenya , \
               Uganda , America etc and established their business in these places .",
        position: 23,
    },
    MarkedSentence {
        text: "The rice lands of Java are among the richest in the world .",
        position: 4,
    },
    MarkedSentence {
        text: "Rising ocean temperatures and ocean acidification means that the capacity of the \
               ocean carbon sink will gradually get weaker , giving rise to global concerns \
               expressed in the Monaco and Manado Declarations .",
        position: 28,
    },
    MarkedSentence {
        text: "Lara 's first school was St. Joseph 's Roman Catholic primary .",
        position: 0,
    },
];

/// French-English pair `s_2` in which "coal" is replaced by "nuclear".
pub const COAL_SOURCE: &str = "le charbon est une énergie non renouvelable .";
pub const COAL_TARGET: &str = "coal is a non-renewable energy .";
pub const NUCLEAR_SOURCE: &str = "le nucléaire est une énergie non renouvelable .";
pub const NUCLEAR_TARGET: &str = "nuclear is a non-renewable energy .";

/// A small French-English corpus on which Model 1 links "coal" to "charbon".
pub fn coal_corpus() -> ParallelCorpus {
    let lines = [
        (COAL_SOURCE, COAL_TARGET),
        ("le charbon est sale .", "coal is dirty ."),
        ("le gaz est une énergie .", "gas is an energy ."),
        ("une centrale à charbon .", "a coal plant ."),
        ("le vent est une énergie renouvelable .", "wind is a renewable energy ."),
        ("le charbon brûle .", "coal burns ."),
        ("le gaz brûle .", "gas burns ."),
        ("une centrale à gaz .", "a gas plant ."),
        ("le vent est propre .", "wind is clean ."),
        ("une énergie propre .", "a clean energy ."),
        ("le pétrole est sale .", "oil is dirty ."),
        ("le pétrole brûle .", "oil burns ."),
        ("une énergie sale .", "a dirty energy ."),
        ("le vent souffle .", "wind blows ."),
    ];
    ParallelCorpus::from_lines(lines, Origin::Genuine).unwrap()
}
