//! A small separable pair dataset for checking that training learns.
//!
//! Questions are drawn from two disjoint vocabularies. Pairs within one
//! vocabulary are labeled similar, pairs across vocabularies not similar.
//! Embeddings come from the deterministic stub embedder.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::augment::{Dataset, Label, Provenance};
use crate::embed::{stub_embed, EmbeddingStore};
use crate::model::ModelConfig;
use crate::nncore::AdamConfig;
use crate::preproc::{tokenize, RawQuestion};
use crate::Result;

const VOCAB: [[&str; 6]; 2] = [
    ["river", "boat", "fish", "bridge", "water", "shore"],
    ["engine", "wheel", "road", "fuel", "brake", "garage"],
];
const QUESTIONS_PER_CLUSTER: usize = 10;

/// `pairs` labeled pairs, half similar and half not, with stub embeddings of
/// width `dim`. Everything is derived from `seed`.
pub fn cluster_pairs(pairs: usize, dim: usize, seed: u64) -> Result<(Dataset, EmbeddingStore)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters: Vec<Vec<String>> = VOCAB
        .iter()
        .map(|vocab| {
            let mut seen = HashSet::new();
            while seen.len() < QUESTIONS_PER_CLUSTER {
                let len = rng.gen_range(3..=5);
                let words: Vec<&str> = (0..len).map(|_| *vocab.choose(&mut rng).unwrap()).collect();
                seen.insert(words.join(" ") + " ?");
            }
            let mut qs: Vec<String> = seen.into_iter().collect();
            qs.sort();
            qs
        })
        .collect();

    let mut ds = Dataset::new();
    let mut used = HashSet::new();
    let positives = pairs.div_ceil(2);
    while ds.len() < pairs {
        let similar = ds.len() < positives;
        let c1 = rng.gen_range(0..2);
        let c2 = if similar { c1 } else { 1 - c1 };
        let a = clusters[c1].choose(&mut rng).unwrap();
        let b = clusters[c2].choose(&mut rng).unwrap();
        let key = if a <= b { (a, b) } else { (b, a) };
        if a == b || !used.insert(key) {
            continue;
        }
        let label = if similar { Label::Similar } else { Label::NotSimilar };
        ds.push_text(a, b, label, Provenance::Original);
    }
    // Interleave labels so batches are mixed regardless of shuffling.
    ds.pairs.shuffle(&mut rng);

    let mut store = EmbeddingStore::new(dim);
    for q in ds.questions.texts() {
        let tokens = tokenize(&RawQuestion::new(q.as_str())?)?;
        store.insert(q.clone(), stub_embed(&tokens, dim, seed)?)?;
    }
    Ok((ds, store))
}

/// Reduced model and batch settings under which the 50-pair task trains in
/// seconds. Optimizer settings are the defaults.
pub fn small_config(input_dim: usize) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            input_dim,
            hidden: 16,
            chunk_size: 4,
            num_layers: 2,
            head_units: vec![32, 16],
            dropout: 0.2,
            forget_bias: 0.0,
        },
        optimizer: AdamConfig::default(),
        batch_size: 8,
        epochs: 200,
        ..TrainConfig::default()
    }
}
