//! Finite-difference check of the complete model at a small size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, SiameseModel};
use crate::embed::QuestionEmbedding;
use crate::nncore::{grad_check, GradCheckOptions, GradCheckReport, RunMode};
use crate::Result;

/// Central-difference step for the full-model check. At `1e-5` the rounding
/// of an O(1) loss alone (one ulp over `2 · eps`, about `5e-12`) exceeds the
/// `1e-4` tolerance for gradients below `1e-7`, which the gated recurrence
/// produces routinely.
pub const TINY_CHECK_EPS: f64 = 3e-4;

pub const TINY_CHECK_TOLERANCE: f64 = 1e-4;

/// Width 8 inputs, 4 hidden units per direction in chunks of 2, two layers,
/// head 8 → 4 → 2 → 1.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        input_dim: 8,
        hidden: 4,
        chunk_size: 2,
        num_layers: 2,
        head_units: vec![4, 2],
        dropout: 0.2,
        forget_bias: 0.0,
    }
}

/// Checks every parameter of a tiny model on the summed loss of a similar
/// and a dissimilar pair of 3-token questions, dropout off.
///
/// Parameters are drawn uniformly from `[-1, 1]`, biases included, so that
/// no ReLU sits within `eps` of its kink.
pub fn tiny_gradient_check(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SiameseModel::zeros(tiny_config())?;
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
    }
    let mut question = || {
        let rows = (0..3)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        QuestionEmbedding::from_rows(rows)
    };
    let (a, b, c) = (question()?, question()?, question()?);
    let opts = GradCheckOptions {
        eps,
        max_coords_per_param: None,
        seed,
    };
    grad_check(
        model.params(),
        |tape| {
            let mut mode = RunMode::eval();
            let similar = model.pair_loss(tape, &a, &b, 1, &mut mode)?;
            let dissimilar = model.pair_loss(tape, &a, &c, 0, &mut mode)?;
            tape.add(similar, dissimilar)
        },
        opts,
    )
}
