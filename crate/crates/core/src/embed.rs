//! Per-token contextual embeddings.
//!
//! Embeddings are produced outside this crate and ingested from JSONL, one
//! question per line:
//!
//! ```text
//! {"q": "<question>", "emb": [[f64; D]; T]}
//! {"q": "<question>", "layers": [[[f64; D]; T]; 3]}
//! ```
//!
//! The second form carries the three layers of the language model and is
//! combined token by token with [`average_layers`]. [`stub_embed`] provides a
//! deterministic stand-in for tests and smoke runs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::preproc::TokenizedQuestion;
use crate::{Error, Result};

/// Embedding width of the contextual model the architecture was built for.
pub const DEFAULT_DIM: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbedding(Vec<f64>);

impl TokenEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("token embedding is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("token embedding coordinate {i}")));
        }
        Ok(TokenEmbedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// How the three layers of a `layers` record are folded into one vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerCombine {
    #[default]
    Mean,
    Sum,
}

/// Elementwise mean of three equally sized layer vectors.
pub fn average_layers(
    layer0: &TokenEmbedding,
    layer1: &TokenEmbedding,
    layer2: &TokenEmbedding,
) -> Result<TokenEmbedding> {
    combine_layers(layer0, layer1, layer2, LayerCombine::Mean)
}

pub fn combine_layers(
    layer0: &TokenEmbedding,
    layer1: &TokenEmbedding,
    layer2: &TokenEmbedding,
    mode: LayerCombine,
) -> Result<TokenEmbedding> {
    let d = layer0.dim();
    if layer1.dim() != d || layer2.dim() != d {
        return Err(Error::shape(
            "average_layers",
            format!("{} / {} / {}", d, layer1.dim(), layer2.dim()),
        ));
    }
    let values = (0..d)
        .map(|j| {
            let s = layer0.0[j] + layer1.0[j] + layer2.0[j];
            match mode {
                LayerCombine::Mean => s / 3.0,
                LayerCombine::Sum => s,
            }
        })
        .collect();
    TokenEmbedding::new(values)
}

/// A `T × D` row-major matrix of token vectors, `T ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionEmbedding {
    dim: usize,
    data: Vec<f64>,
}

impl QuestionEmbedding {
    pub fn from_tokens(tokens: &[TokenEmbedding]) -> Result<Self> {
        let first = tokens
            .first()
            .ok_or_else(|| Error::InvalidInput("question embedding has no tokens".into()))?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(dim * tokens.len());
        for (t, tok) in tokens.iter().enumerate() {
            if tok.dim() != dim {
                return Err(Error::shape("question embedding", format!("token {t} has dim {} not {dim}", tok.dim())));
            }
            data.extend_from_slice(&tok.0);
        }
        Ok(QuestionEmbedding { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let tokens = rows.into_iter().map(TokenEmbedding::new).collect::<Result<Vec<_>>>()?;
        Self::from_tokens(&tokens)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tokens `T`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn token(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Deterministic pseudo-embedding: each coordinate is drawn uniformly from
/// `[-1, 1]` by a ChaCha8 stream keyed on SHA-256 of `(seed, position, token)`.
pub fn stub_embed(tokens: &TokenizedQuestion, dim: usize, seed: u64) -> Result<QuestionEmbedding> {
    if dim == 0 {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    let rows = tokens
        .tokens()
        .iter()
        .enumerate()
        .map(|(pos, tok)| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update((pos as u64).to_le_bytes());
            h.update(tok.as_bytes());
            let key: [u8; 32] = h.finalize().into();
            let mut rng = ChaCha8Rng::from_seed(key);
            (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        })
        .collect();
    QuestionEmbedding::from_rows(rows)
}

/// Immutable map from canonical question text to its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: IndexMap<String, QuestionEmbedding>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    q: String,
    emb: Option<Vec<Vec<f64>>>,
    layers: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    q: &'a str,
    emb: Vec<&'a [f64]>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            entries: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds an entry. Re-inserting identical vectors is a no-op; different
    /// vectors for the same question are an error.
    pub fn insert(&mut self, question: impl Into<String>, emb: QuestionEmbedding) -> Result<()> {
        let question = question.into();
        if emb.dim() != self.dim {
            return Err(Error::shape(
                "embedding store",
                format!("{question:?} has dim {} but the store holds dim {}", emb.dim(), self.dim),
            ));
        }
        match self.entries.get(&question) {
            Some(existing) if *existing == emb => Ok(()),
            Some(_) => Err(Error::InvalidInput(format!(
                "question {question:?} listed twice with different vectors"
            ))),
            None => {
                self.entries.insert(question, emb);
                Ok(())
            }
        }
    }

    pub fn get(&self, question: &str) -> Result<&QuestionEmbedding> {
        self.entries
            .get(question)
            .ok_or_else(|| Error::MissingEmbedding(question.to_owned()))
    }

    pub fn contains(&self, question: &str) -> bool {
        self.entries.contains_key(question)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &QuestionEmbedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Loads a JSONL file, combining `layers` records with `combine`.
    pub fn load(path: impl AsRef<Path>, combine: LayerCombine) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut store: Option<EmbeddingStore> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let location = format!("{}:{}", path.display(), i + 1);
            let malformed = |detail: String| Error::Malformed {
                location: location.clone(),
                detail,
            };
            let rec: RecordIn = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let emb = match (rec.emb, rec.layers) {
                (Some(rows), None) => QuestionEmbedding::from_rows(rows),
                (None, Some(layers)) => embedding_from_layers(layers, combine),
                _ => return Err(malformed("record needs exactly one of \"emb\" or \"layers\"".into())),
            }
            .map_err(|e| malformed(e.to_string()))?;
            let store = store.get_or_insert_with(|| EmbeddingStore::new(emb.dim()));
            store.insert(rec.q, emb).map_err(|e| malformed(e.to_string()))?;
        }
        store.ok_or_else(|| Error::Malformed {
            location: path.display().to_string(),
            detail: "no records".into(),
        })
    }

    /// Writes the store as `emb` records in insertion order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (q, emb) in &self.entries {
            let rec = RecordOut {
                q,
                emb: emb.rows().collect(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::io(path, e.into()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn embedding_from_layers(layers: Vec<Vec<Vec<f64>>>, combine: LayerCombine) -> Result<QuestionEmbedding> {
    let [l0, l1, l2]: [Vec<Vec<f64>>; 3] = layers
        .try_into()
        .map_err(|v: Vec<_>| Error::InvalidInput(format!("expected 3 layers, found {}", v.len())))?;
    if l1.len() != l0.len() || l2.len() != l0.len() {
        return Err(Error::shape(
            "layers",
            format!("token counts {} / {} / {}", l0.len(), l1.len(), l2.len()),
        ));
    }
    let tokens = l0
        .into_iter()
        .zip(l1)
        .zip(l2)
        .map(|((a, b), c)| {
            combine_layers(
                &TokenEmbedding::new(a)?,
                &TokenEmbedding::new(b)?,
                &TokenEmbedding::new(c)?,
                combine,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    QuestionEmbedding::from_tokens(&tokens)
}
