use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{f1_score, majority_vote, predict_probs, threshold_labels, train_model, Examples, LossHistory, Metrics};
use super::{TrainConfig, ENSEMBLE_SIZE};
use crate::augment::Dataset;
use crate::embed::EmbeddingStore;
use crate::model::SiameseModel;
use crate::{Error, Result};

/// F1 of five replicas on one evaluation set. F1 values are fractions in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub per_model_f1: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub vote: f64,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub durations_sec: Vec<f64>,
    pub per_model: Vec<Metrics>,
    pub vote_metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct TrainedReplica {
    pub seed: u64,
    pub model: SiameseModel,
    pub history: LossHistory,
    pub duration_sec: f64,
}

/// Scores five models on `eval` and combines them by majority vote.
pub fn evaluate_models(
    models: &[&SiameseModel],
    config: &TrainConfig,
    durations_sec: Vec<f64>,
    eval: &Dataset,
    store: &EmbeddingStore,
) -> Result<EnsembleReport> {
    if models.len() != ENSEMBLE_SIZE {
        return Err(Error::InvalidInput(format!(
            "ensemble needs {ENSEMBLE_SIZE} models, got {}",
            models.len()
        )));
    }
    let examples = Examples::resolve(eval, store)?;
    let votes = models
        .iter()
        .map(|m| Ok(threshold_labels(&predict_probs(m, &examples)?, config.threshold)))
        .collect::<Result<Vec<_>>>()?;
    let per_model = votes
        .iter()
        .map(|v| f1_score(v, examples.labels()))
        .collect::<Result<Vec<_>>>()?;
    let vote_metrics = f1_score(&majority_vote(&votes)?, examples.labels())?;

    let per_model_f1: Vec<f64> = per_model.iter().map(|m| m.f1).collect();
    let min = per_model_f1.iter().copied().fold(f64::INFINITY, f64::min);
    let max = per_model_f1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Clamped so rounding can never put the mean outside [min, max].
    let avg = (per_model_f1.iter().sum::<f64>() / ENSEMBLE_SIZE as f64).clamp(min, max);
    Ok(EnsembleReport {
        per_model_f1,
        min,
        max,
        avg,
        vote: vote_metrics.f1,
        config: config.clone(),
        seeds: config.seeds.clone(),
        durations_sec,
        per_model,
        vote_metrics,
    })
}

/// Trains one replica per configured seed, in parallel.
pub fn train_replicas(config: &TrainConfig, train: &Dataset, store: &EmbeddingStore) -> Result<Vec<TrainedReplica>> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let (model, history) = train_model(config, train, store, seed)?;
            let duration_sec = start.elapsed().as_secs_f64();
            log::info!("replica seed {seed} trained in {duration_sec:.1}s");
            Ok(TrainedReplica {
                seed,
                model,
                history,
                duration_sec,
            })
        })
        .collect()
}

/// Trains five replicas on `train` and reports their F1 on `eval`.
pub fn run_experiment(
    config: &TrainConfig,
    train: &Dataset,
    eval: &Dataset,
    store: &EmbeddingStore,
) -> Result<(EnsembleReport, Vec<TrainedReplica>)> {
    let replicas = train_replicas(config, train, store)?;
    let models: Vec<&SiameseModel> = replicas.iter().map(|r| &r.model).collect();
    let durations = replicas.iter().map(|r| r.duration_sec).collect();
    let report = evaluate_models(&models, config, durations, eval, store)?;
    Ok((report, replicas))
}
