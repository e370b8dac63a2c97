use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;

use super::{ContextQuery, ContextVector, EmbedError, EmbeddingProvider};
use crate::seeding;

/// Distance class of a neighbour relative to the focus position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    /// Immediately adjacent (distance 1).
    Near = 0,
    /// Distance 2 up to the window size.
    Far = 1,
}

impl Bucket {
    pub fn for_distance(distance: usize) -> Self {
        if distance <= 1 {
            Bucket::Near
        } else {
            Bucket::Far
        }
    }
}

type DirectionCache = HashMap<(String, u8), Arc<[f64]>>;

/// Deterministic built-in provider based on hashed random projections.
///
/// For focus position `i` the vector is
///
/// ```text
/// v = sum over j != i, |j - i| <= window of  (1 / |j - i|) * h(token_j, bucket(|j - i|))
/// ```
///
/// where `h` expands a stable hash of `(token, bucket)` into a unit vector of
/// `dim` pseudo-random components. Sentences that share neighbours around the
/// focus get high cosine similarity.
#[derive(Debug)]
pub struct HashedContextProvider {
    dim: usize,
    window: usize,
    seed: u64,
    name: String,
    cache: RwLock<DirectionCache>,
}

/// Directions kept in memory at most. Past this, new ones are recomputed.
const CACHE_CAPACITY: usize = 1 << 15;

impl Clone for HashedContextProvider {
    fn clone(&self) -> Self {
        HashedContextProvider::new(self.dim, self.window, self.seed)
    }
}

impl HashedContextProvider {
    pub const DEFAULT_DIM: usize = 256;
    pub const DEFAULT_WINDOW: usize = 5;

    pub fn new(dim: usize, window: usize, seed: u64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        HashedContextProvider {
            dim,
            window,
            seed,
            name: format!("hashed-context(dim={dim},window={window},seed={seed})"),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// The unit direction assigned to a token in a distance bucket.
    pub fn direction(&self, token: &str, bucket: Bucket) -> Arc<[f64]> {
        let key = (token.to_owned(), bucket as u8);
        if let Some(v) = self.cache.read().unwrap_or_else(|p| p.into_inner()).get(&key) {
            return Arc::clone(v);
        }
        let v: Arc<[f64]> = self.compute_direction(token, bucket).into();
        let mut cache = self.cache.write().unwrap_or_else(|p| p.into_inner());
        if cache.len() < CACHE_CAPACITY {
            cache.insert(key, Arc::clone(&v));
        }
        v
    }

    fn compute_direction(&self, token: &str, bucket: Bucket) -> Vec<f64> {
        let mut rng = seeding::rng(
            self.seed,
            &[seeding::fnv1a(token.as_bytes()), bucket as u64],
        );
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        v
    }
}

impl Default for HashedContextProvider {
    fn default() -> Self {
        HashedContextProvider::new(Self::DEFAULT_DIM, Self::DEFAULT_WINDOW, 0)
    }
}

impl EmbeddingProvider for HashedContextProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, query: &ContextQuery<'_>) -> Result<ContextVector, EmbedError> {
        let tokens = query.sentence().tokens();
        let focus = query.position();
        let lo = focus.saturating_sub(self.window);
        let hi = (focus + self.window).min(tokens.len() - 1);
        let mut acc = vec![0.0; self.dim];
        for (j, token) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
            if j == focus {
                continue;
            }
            let d = focus.abs_diff(j);
            let weight = 1.0 / d as f64;
            let dir = self.direction(token.as_str(), Bucket::for_distance(d));
            for (a, x) in acc.iter_mut().zip(dir.iter()) {
                *a += weight * x;
            }
        }
        Ok(ContextVector::new(acc, self.space()))
    }
}
