//! Contextual embeddings of a token position.
//!
//! A provider maps `(sentence, position)` to a vector describing the context
//! *around* the position. Providers are masked: the token at the position
//! itself never influences the vector, so a word never seen before can still
//! be embedded through its neighbours.

mod external;
mod hashed;

pub use external::ExternalProvider;
pub use hashed::{Bucket, HashedContextProvider};

use crate::corpus::Sentence;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    /// Connection-level failure. Safe to retry on a fresh connection.
    #[error("embedding provider unavailable: {0}")]
    Transport(String),
    #[error("embedding protocol violation: {0}")]
    Protocol(String),
    #[error("embedding provider error: {0}")]
    Remote(String),
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vectors come from different embedding providers")]
    MixedSpaces,
    #[error("position {position} out of range for a {len}-token sentence")]
    InvalidQuery { position: usize, len: usize },
}

impl EmbedError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, EmbedError::Transport(_))
    }

    /// True for failures caused by the provider rather than the caller.
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            EmbedError::Transport(_)
                | EmbedError::Protocol(_)
                | EmbedError::Remote(_)
                | EmbedError::DimensionMismatch { .. }
        )
    }
}

/// Identifies the vector space a provider produces. Vectors from different
/// spaces are never compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

impl SpaceId {
    pub fn new(name: &str, dim: usize) -> Self {
        SpaceId(seeding::mix(seeding::fnv1a(name.as_bytes()), &[dim as u64]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    values: Vec<f64>,
    norm: f64,
    space: SpaceId,
}

impl ContextVector {
    pub fn new(values: Vec<f64>, space: SpaceId) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        ContextVector {
            values,
            norm,
            space,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ContextVector::new(self.values.iter().map(|v| v * factor).collect(), self.space)
    }
}

/// One focus position in a target-language sentence.
#[derive(Debug, Clone, Copy)]
pub struct ContextQuery<'a> {
    sentence: &'a Sentence,
    position: usize,
}

impl<'a> ContextQuery<'a> {
    pub fn new(sentence: &'a Sentence, position: usize) -> Result<Self, EmbedError> {
        if position >= sentence.len() {
            return Err(EmbedError::InvalidQuery {
                position,
                len: sentence.len(),
            });
        }
        Ok(ContextQuery { sentence, position })
    }

    pub fn sentence(&self) -> &'a Sentence {
        self.sentence
    }

    pub fn position(&self) -> usize {
        self.position
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Dimension declared by the provider; every vector it returns has it.
    fn dim(&self) -> usize;

    fn space(&self) -> SpaceId {
        SpaceId::new(self.name(), self.dim())
    }

    fn embed(&self, query: &ContextQuery<'_>) -> Result<ContextVector, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn space(&self) -> SpaceId {
        (**self).space()
    }
    fn embed(&self, query: &ContextQuery<'_>) -> Result<ContextVector, EmbedError> {
        (**self).embed(query)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn space(&self) -> SpaceId {
        (**self).space()
    }
    fn embed(&self, query: &ContextQuery<'_>) -> Result<ContextVector, EmbedError> {
        (**self).embed(query)
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
///
/// A zero-norm vector (a context with no neighbours) has similarity 0 to
/// everything.
pub fn cosine(a: &ContextVector, b: &ContextVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.space != b.space {
        return Err(EmbedError::MixedSpaces);
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        log::warn!("cosine of a degenerate (zero-norm) context vector taken as 0");
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}
