//! Per-episode experience store with cosine-similarity retrieval.

use crate::action::Action;
use crate::topomap::NodeId;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

pub const EMBEDDING_DIM: usize = 512;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("experience step {step} is not after last stored step {last}")]
    NonMonotonicStep { step: u32, last: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed experience record: {0}")]
    Malformed(#[from] serde_json::Error),
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    /// Unit-norm vector, or the zero vector for text without tokens.
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Lowercased alphanumeric tokens hashed (FNV-1a) into fixed buckets.
#[derive(Debug, Clone, Copy)]
pub struct HashedBagOfWords {
    pub dim: usize,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self { dim: EMBEDDING_DIM }
    }
}

pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashedBagOfWords {
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl Embedder for HashedBagOfWords {
    fn id(&self) -> &str {
        "hashed-bow-512"
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for t in tokens(text) {
            v[self.bucket(&t)] += 1.0;
        }
        normalize(&mut v);
        v
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub step: u32,
    pub scene_description: String,
    pub position: NodeId,
    pub action: Action,
    pub embedding: Vec<f64>,
}

impl Experience {
    pub fn new(step: u32, scene_description: &str, position: NodeId, action: Action, embedder: &dyn Embedder) -> Self {
        Self {
            step,
            scene_description: scene_description.to_string(),
            position,
            action,
            embedding: embedder.embed(scene_description),
        }
    }
}

#[derive(Clone)]
pub struct ExperienceStore {
    embedder: Arc<dyn Embedder>,
    experiences: Vec<Experience>,
}

impl std::fmt::Debug for ExperienceStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperienceStore")
            .field("embedder", &self.embedder.id())
            .field("len", &self.experiences.len())
            .finish()
    }
}

impl Default for ExperienceStore {
    fn default() -> Self {
        Self::new(Arc::new(HashedBagOfWords::default()))
    }
}

impl ExperienceStore {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self { embedder, experiences: Vec::new() }
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn embedder_id(&self) -> &str {
        self.embedder.id()
    }

    pub fn len(&self) -> usize {
        self.experiences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiences.is_empty()
    }

    pub fn experiences(&self) -> &[Experience] {
        &self.experiences
    }

    pub fn record(&mut self, experience: Experience) -> Result<(), MemoryError> {
        if let Some(last) = self.experiences.last() {
            if experience.step <= last.step {
                return Err(MemoryError::NonMonotonicStep { step: experience.step, last: last.step });
            }
        }
        self.experiences.push(experience);
        Ok(())
    }

    /// Embeds and records one step.
    pub fn record_step(
        &mut self,
        step: u32,
        scene_description: &str,
        position: NodeId,
        action: Action,
    ) -> Result<(), MemoryError> {
        let e = Experience::new(step, scene_description, position, action, self.embedder.as_ref());
        self.record(e)
    }

    /// Most similar stored experience; ties go to the latest step.
    pub fn retrieve(&self, query: &str) -> Option<(&Experience, f64)> {
        let q = self.embedder.embed(query);
        let mut best: Option<(&Experience, f64)> = None;
        for e in &self.experiences {
            let s = cosine(&q, &e.embedding);
            match best {
                Some((b, bs)) if s < bs || (s == bs && e.step < b.step) => {}
                _ => best = Some((e, s)),
            }
        }
        best
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), MemoryError> {
        for e in &self.experiences {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(embedder: Arc<dyn Embedder>, r: R) -> Result<Self, MemoryError> {
        let mut store = Self::new(embedder);
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            store.record(serde_json::from_str(&line)?)?;
        }
        Ok(store)
    }
}
