//! Mini-batch training, prediction, metrics and the five-replica ensemble
//! protocol.

mod ensemble;
mod metrics;
pub mod synthetic;

pub use ensemble::{evaluate_models, run_experiment, train_replicas, EnsembleReport, TrainedReplica};
pub use metrics::{f1_score, majority_vote, Metrics, ENSEMBLE_SIZE};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::Dataset;
use crate::embed::{EmbeddingStore, QuestionEmbedding};
use crate::model::{ModelConfig, SiameseModel};
use crate::nncore::{AdamConfig, AdamState, RunMode, Tape};
use crate::{Error, Result};

/// Examples whose gradients are computed concurrently before being summed.
/// Fixed, so the summation order never depends on the thread count.
const GRAD_CHUNK: usize = 8;

/// Numeric precision of training. Only 64-bit is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// One seed per ensemble replica.
    pub seeds: Vec<u64>,
    /// Probability at or above which a pair is labeled similar.
    pub threshold: f64,
    pub precision: Precision,
}

pub const DEFAULT_BASE_SEED: u64 = 42;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            optimizer: AdamConfig::default(),
            batch_size: 256,
            epochs: 100,
            seeds: seeds_from_base(DEFAULT_BASE_SEED),
            threshold: 0.5,
            precision: Precision::F64,
        }
    }
}

/// `base, base + 1, …` for every ensemble replica.
pub fn seeds_from_base(base: u64) -> Vec<u64> {
    (0..ENSEMBLE_SIZE as u64).map(|i| base.wrapping_add(i)).collect()
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.eps > 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2)
        {
            return bad(format!("invalid optimizer settings {o:?}"));
        }
        if self.seeds.len() != ENSEMBLE_SIZE {
            return bad(format!("expected {ENSEMBLE_SIZE} seeds, got {}", self.seeds.len()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// Evaluation-mode mean loss of the initialized model.
    pub initial: f64,
    /// Mean training loss of each epoch.
    pub epochs: Vec<f64>,
    pub steps: u64,
}

/// Pair embeddings resolved against a store, plus 0/1 targets.
#[derive(Debug, Clone)]
pub struct Examples<'a> {
    pairs: Vec<(&'a QuestionEmbedding, &'a QuestionEmbedding)>,
    labels: Vec<u8>,
}

impl<'a> Examples<'a> {
    pub fn resolve(dataset: &Dataset, store: &'a EmbeddingStore) -> Result<Self> {
        let mut pairs = Vec::with_capacity(dataset.len());
        let mut labels = Vec::with_capacity(dataset.len());
        for p in &dataset.pairs {
            let (a, b) = dataset.pair_texts(p);
            pairs.push((store.get(a)?, store.get(b)?));
            labels.push(p.label.as_u8());
        }
        Ok(Examples { pairs, labels })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Trains one model replica, epoch by epoch.
#[derive(Debug)]
pub struct Trainer<'a> {
    config: TrainConfig,
    examples: Examples<'a>,
    model: SiameseModel,
    adam: AdamState,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    history: LossHistory,
}

impl<'a> Trainer<'a> {
    pub fn new(config: &TrainConfig, examples: Examples<'a>, seed: u64) -> Result<Self> {
        config.validate()?;
        if examples.is_empty() {
            return Err(Error::InvalidDataset("no training pairs".into()));
        }
        let model = SiameseModel::new(config.model.clone(), seed)?;
        let adam = AdamState::new(config.optimizer, model.params());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let initial = mean_loss(&model, &examples)?;
        let order = (0..examples.len()).collect();
        Ok(Trainer {
            config: config.clone(),
            examples,
            model,
            adam,
            rng,
            order,
            history: LossHistory {
                initial,
                epochs: Vec::new(),
                steps: 0,
            },
        })
    }

    /// One pass over the shuffled data; returns the epoch's mean loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        self.order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in self.order.chunks(self.config.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| self.rng.gen()).collect();
            let (loss_sum, grads) = batch_gradients(&self.model, &self.examples, batch, &seeds)?;
            let scale = 1.0 / batch.len() as f64;
            let grads: Vec<Vec<f64>> = grads
                .into_iter()
                .map(|g| g.into_iter().map(|v| v * scale).collect())
                .collect();
            self.adam.step(self.model.params_mut(), &grads)?;
            self.history.steps += 1;
            total += loss_sum;
        }
        let mean = total / self.examples.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", self.history.epochs.len() + 1);
        self.history.epochs.push(mean);
        Ok(mean)
    }

    pub fn epochs_done(&self) -> usize {
        self.history.epochs.len()
    }

    pub fn model(&self) -> &SiameseModel {
        &self.model
    }

    pub fn history(&self) -> &LossHistory {
        &self.history
    }

    pub fn examples(&self) -> &Examples<'a> {
        &self.examples
    }

    pub fn finish(self) -> (SiameseModel, LossHistory) {
        (self.model, self.history)
    }
}

/// Per-example loss, summed, and per-parameter gradients, summed in batch
/// order.
fn batch_gradients(
    model: &SiameseModel,
    examples: &Examples,
    batch: &[usize],
    seeds: &[u64],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut loss_sum = 0.0;
    let mut acc: Vec<Vec<f64>> = model.params().iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
    let work: Vec<(usize, u64)> = batch.iter().copied().zip(seeds.iter().copied()).collect();
    for chunk in work.chunks(GRAD_CHUNK) {
        let results: Vec<Result<(f64, Vec<Vec<f64>>)>> = chunk
            .par_iter()
            .map(|&(i, seed)| example_gradient(model, examples, i, seed))
            .collect();
        for r in results {
            let (loss, grads) = r?;
            loss_sum += loss;
            for (a, g) in acc.iter_mut().zip(grads) {
                for (x, y) in a.iter_mut().zip(g) {
                    *x += y;
                }
            }
        }
    }
    Ok((loss_sum, acc))
}

fn example_gradient(model: &SiameseModel, examples: &Examples, i: usize, seed: u64) -> Result<(f64, Vec<Vec<f64>>)> {
    let (a, b) = examples.pairs[i];
    let mut tape = Tape::with_params(model.params());
    let mut mode = RunMode::train(seed);
    let loss = model.pair_loss(&mut tape, a, b, examples.labels[i], &mut mode)?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("training loss of example {i}")));
    }
    let grads = tape.backward(loss)?;
    Ok((value, grads.into_param_grads(model.params())))
}

/// Evaluation-mode mean BCE over all examples.
pub fn mean_loss(model: &SiameseModel, examples: &Examples) -> Result<f64> {
    let losses: Vec<f64> = (0..examples.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = examples.pairs[i];
            let mut tape = Tape::with_params(model.params());
            let loss = model.pair_loss(&mut tape, a, b, examples.labels[i], &mut RunMode::eval())?;
            Ok(tape.scalar(loss))
        })
        .collect::<Result<_>>()?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite("evaluation loss".into()));
    }
    Ok(mean)
}

/// Trains one replica for `config.epochs` epochs.
pub fn train_model(
    config: &TrainConfig,
    dataset: &Dataset,
    store: &EmbeddingStore,
    seed: u64,
) -> Result<(SiameseModel, LossHistory)> {
    let examples = Examples::resolve(dataset, store)?;
    let mut trainer = Trainer::new(config, examples, seed)?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}

/// Evaluation-mode similarity probabilities, in dataset order.
pub fn predict_probs(model: &SiameseModel, examples: &Examples) -> Result<Vec<f64>> {
    examples
        .pairs
        .par_iter()
        .map(|&(a, b)| model.predict(a, b))
        .collect()
}

/// `1` iff `p >= threshold`.
pub fn threshold_labels(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}

pub fn predict_labels(
    model: &SiameseModel,
    dataset: &Dataset,
    store: &EmbeddingStore,
    threshold: f64,
) -> Result<Vec<u8>> {
    let examples = Examples::resolve(dataset, store)?;
    Ok(threshold_labels(&predict_probs(model, &examples)?, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{Label, Provenance};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            model: ModelConfig {
                input_dim: 3,
                hidden: 4,
                chunk_size: 2,
                num_layers: 1,
                head_units: vec![4],
                dropout: 0.2,
                forget_bias: 0.0,
            },
            batch_size: 4,
            epochs: 2,
            ..TrainConfig::default()
        }
    }

    fn toy() -> (Dataset, EmbeddingStore) {
        let mut ds = Dataset::new();
        let mut store = EmbeddingStore::new(3);
        for i in 0..10 {
            let (a, b) = (format!("q{i}"), format!("r{i}"));
            let label = if i % 2 == 0 { Label::Similar } else { Label::NotSimilar };
            ds.push_text(&a, &b, label, Provenance::Original);
            let x = i as f64 / 10.0;
            store
                .insert(a, QuestionEmbedding::from_rows(vec![vec![x, 0.1, -x], vec![0.3, x, 0.0]]).unwrap())
                .unwrap();
            store
                .insert(b, QuestionEmbedding::from_rows(vec![vec![-x, 0.2, x]]).unwrap())
                .unwrap();
        }
        (ds, store)
    }

    #[test]
    fn step_count_is_ceil_of_batches() {
        let (ds, store) = toy();
        let mut c = tiny_config();
        c.epochs = 1;
        let (_, h) = train_model(&c, &ds, &store, 1).unwrap();
        assert_eq!(h.steps, 3); // ⌈10 / 4⌉
        assert_eq!(h.epochs.len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let (ds, store) = toy();
        let c = tiny_config();
        let (m1, h1) = train_model(&c, &ds, &store, 9).unwrap();
        let (m2, h2) = train_model(&c, &ds, &store, 9).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
        let (m3, _) = train_model(&c, &ds, &store, 10).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn missing_embedding_is_reported() {
        let (mut ds, store) = toy();
        ds.push_text("q0", "unknown", Label::Similar, Provenance::Original);
        assert!(matches!(
            train_model(&tiny_config(), &ds, &store, 0),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.seeds = vec![1, 1, 2, 3, 4];
        assert!(c.validate().is_err());
        c.seeds = vec![1, 2, 3];
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(TrainConfig::default().seeds, [42, 43, 44, 45, 46]);
    }

    #[test]
    fn config_json_defaults_and_unknown_fields() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "model": {"hidden": 8}}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.model.hidden, 8);
        assert_eq!(c.model.input_dim, 1024);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"precision": "f32"}"#).is_err());
    }

    #[test]
    fn ties_are_positive() {
        assert_eq!(threshold_labels(&[0.5, 0.4999, 0.9], 0.5), [1, 0, 1]);
    }

    #[test]
    fn fresh_zero_model_labels_everything_positive() {
        let (ds, store) = toy();
        let m = SiameseModel::zeros(tiny_config().model).unwrap();
        assert!(predict_labels(&m, &ds, &store, 0.5).unwrap().iter().all(|&l| l == 1));
    }
}
