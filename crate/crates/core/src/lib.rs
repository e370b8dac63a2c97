//! Corpus toolkit for few-shot adaptation of machine translation systems to
//! novel words.
//!
//! The pipeline holds out rare target words from a training corpus, then
//! rebuilds fine-tuning material for them from a handful of reference
//! sentences:
//!
//! 1. [`wordselect`] picks evaluation words and splits the corpus.
//! 2. [`aligner`] trains lexical alignments and finds each word's translation.
//! 3. [`ctxsearch`] retrieves sentences whose context matches a reference
//!    word's context, using an [`embed`] provider.
//! 4. [`augment`] substitutes the word and its translation into them.
//! 5. [`sets`] mixes references, synthetic and random pairs into
//!    fine-tuning sets.
//! 6. [`metrics`] scores the fine-tuned system's translations.
//!
//! ```
//! use novelword::corpus::{Origin, ParallelCorpus, Side, Token};
//!
//! let corpus = ParallelCorpus::from_lines(
//!     [("le chat", "the cat"), ("le chien", "the dog")],
//!     Origin::Genuine,
//! )?;
//! assert_eq!(corpus.count_occurrences(&Token::new("the")?, Side::Target), 2);
//! # Ok::<(), novelword::Error>(())
//! ```

pub mod aligner;
pub mod augment;
pub mod corpus;
pub mod ctxsearch;
pub mod embed;
mod error;
pub mod fixtures;
pub mod metrics;
pub mod seeding;
pub mod sets;
pub mod wordselect;

pub use error::{Error, ErrorCategory, Result};

// The README and guide code listings run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/context-search.md")]
    mod context_search {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/finetune-sets.md")]
    mod finetune_sets {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
