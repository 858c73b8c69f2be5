//! Siamese question-pair classifier.
//!
//! Each question's token embeddings pass through stacked bidirectional
//! ON-LSTM layers (forward and backward outputs concatenated per step), and
//! weighted attention pools the last layer's outputs into one representation
//! vector. Both questions share every encoder weight. The two vectors are
//! merged by elementwise squared difference and scored by an MLP head.

mod attention;
mod cell;
mod check;
mod head;
mod io;

pub use attention::{attention_pool, merge_pairwise_sqdist, Pooled};
pub use cell::{
    onlstm_cell_step, run_direction, GateActivations, GateNodes, GateParams, OnLstmCellParams, OnLstmState,
    StateNodes, GATE_NAMES,
};
pub use check::{tiny_config, tiny_gradient_check, TINY_CHECK_EPS, TINY_CHECK_TOLERANCE};
pub use head::{mlp_head, Dense, MlpHead};
pub use io::{load_params, save_params, SaveSummary, FORMAT_VERSION, MAGIC};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::QuestionEmbedding;
use crate::nncore::{glorot_uniform, reborrow, NodeId, ParamId, ParamStore, RunMode, Tape, Tensor};
use crate::{Error, Result};

/// Architecture hyperparameters. Defaults are the full-size configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Token embedding width.
    pub input_dim: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    pub chunk_size: usize,
    /// Stacked bidirectional ON-LSTM layers.
    pub num_layers: usize,
    /// Widths of the ReLU layers of the head.
    pub head_units: Vec<usize>,
    pub dropout: f64,
    /// Initial bias of the standard forget gate.
    pub forget_bias: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 1024,
            hidden: 256,
            chunk_size: 8,
            num_layers: 2,
            head_units: vec![1024, 512, 256, 128],
            dropout: 0.2,
            forget_bias: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.input_dim == 0 || self.hidden == 0 || self.chunk_size == 0 || self.num_layers == 0 {
            return bad("input_dim, hidden, chunk_size and num_layers must be positive".into());
        }
        if !self.hidden.is_multiple_of(self.chunk_size) {
            return bad(format!(
                "hidden ({}) must be divisible by chunk_size ({})",
                self.hidden, self.chunk_size
            ));
        }
        if self.head_units.contains(&0) {
            return bad("head layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !self.forget_bias.is_finite() {
            return bad("forget_bias must be finite".into());
        }
        Ok(())
    }

    /// Width of the encoder output and of the merged vector: `2 · hidden`.
    pub fn repr_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Trainable scalar count derived from the shape chain alone.
    pub fn param_count(&self) -> usize {
        let mut total = 0;
        let mut input = self.input_dim;
        for _ in 0..self.num_layers {
            total += 2 * OnLstmCellParams::count(input, self.hidden, self.chunk_size);
            input = self.repr_dim();
        }
        total + self.repr_dim() + MlpHead::count(self.repr_dim(), &self.head_units)
    }
}

/// Forward and backward cells of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiLayer {
    pub forward: OnLstmCellParams,
    pub backward: OnLstmCellParams,
}

/// Parameter layout of the whole model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<BiLayer>,
    /// `[2 · hidden]` scoring vector of the attention pool.
    pub attention: ParamId,
    pub head: MlpHead,
}

/// Result of encoding one question.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub pooled: Pooled,
    /// Per-step outputs of the last layer, `[2 · hidden]` each.
    pub outputs: Vec<NodeId>,
}

/// Siamese ON-LSTM model: configuration, parameter values and layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl SiameseModel {
    /// Randomly initialized model: Glorot-uniform weights, zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(config, Some(&mut rng))
    }

    /// Model with every parameter zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        Self::build(config, None)
    }

    fn build(config: ModelConfig, mut rng: Option<&mut dyn RngCore>) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut input = config.input_dim;
        for l in 0..config.num_layers {
            let mut cell = |dir: &str, rng: Option<&mut dyn RngCore>| {
                OnLstmCellParams::register(
                    &mut store,
                    &format!("layer{l}.{dir}"),
                    input,
                    config.hidden,
                    config.chunk_size,
                    config.forget_bias,
                    rng,
                )
            };
            let forward = cell("fwd", reborrow(&mut rng))?;
            let backward = cell("bwd", reborrow(&mut rng))?;
            layers.push(BiLayer { forward, backward });
            input = config.repr_dim();
        }
        let w_a = match reborrow(&mut rng) {
            Some(r) => {
                let t = glorot_uniform(config.repr_dim(), 1, r);
                Tensor::vector(t.into_data())
            }
            None => Tensor::zeros(&[config.repr_dim()]),
        };
        let attention = store.add("attention.w_a", w_a);
        let head = MlpHead::register(&mut store, config.repr_dim(), &config.head_units, rng);
        Ok(SiameseModel {
            config,
            params: store,
            layout: Layout {
                layers,
                attention,
                head,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    /// Encodes one question on `tape`, which must be bound to this model's
    /// parameters.
    pub fn encode(&self, tape: &mut Tape, emb: &QuestionEmbedding, mode: &mut RunMode) -> Result<Encoding> {
        if emb.dim() != self.config.input_dim {
            return Err(Error::shape(
                "encode_question",
                format!("embedding dim {} but model expects {}", emb.dim(), self.config.input_dim),
            ));
        }
        let mut seq: Vec<NodeId> = emb
            .rows()
            .map(|row| tape.constant(Tensor::vector(row.to_vec())))
            .collect();
        let last = self.layout.layers.len() - 1;
        for (l, layer) in self.layout.layers.iter().enumerate() {
            let rate = if l < last { self.config.dropout } else { 0.0 };
            let fwd = run_direction(tape, &layer.forward, &seq, false, rate, mode)?;
            let bwd = run_direction(tape, &layer.backward, &seq, true, rate, mode)?;
            seq = fwd
                .into_iter()
                .zip(bwd)
                .map(|(f, b)| tape.concat(&[f, b], 0))
                .collect::<Result<_>>()?;
        }
        let w_a = tape.param(self.layout.attention);
        let pooled = attention_pool(tape, w_a, &seq)?;
        Ok(Encoding { pooled, outputs: seq })
    }

    /// Similarity probability of a pair as a one-element node.
    pub fn forward_pair(
        &self,
        tape: &mut Tape,
        a: &QuestionEmbedding,
        b: &QuestionEmbedding,
        mode: &mut RunMode,
    ) -> Result<NodeId> {
        let va = self.encode(tape, a, mode)?.pooled.repr;
        let vb = self.encode(tape, b, mode)?.pooled.repr;
        let vm = merge_pairwise_sqdist(tape, va, vb)?;
        mlp_head(tape, &self.layout.head, vm, self.config.dropout, mode)
    }

    /// Binary cross-entropy of one labeled pair.
    pub fn pair_loss(
        &self,
        tape: &mut Tape,
        a: &QuestionEmbedding,
        b: &QuestionEmbedding,
        label: u8,
        mode: &mut RunMode,
    ) -> Result<NodeId> {
        let p = self.forward_pair(tape, a, b, mode)?;
        tape.bce(p, f64::from(label))
    }

    /// Evaluation-mode probability for a pair.
    pub fn predict(&self, a: &QuestionEmbedding, b: &QuestionEmbedding) -> Result<f64> {
        let mut tape = Tape::with_params(&self.params);
        let p = self.forward_pair(&mut tape, a, b, &mut RunMode::eval())?;
        Ok(tape.scalar(p))
    }

    /// Evaluation-mode representation vector of one question.
    pub fn represent(&self, emb: &QuestionEmbedding) -> Result<Vec<f64>> {
        let mut tape = Tape::with_params(&self.params);
        let enc = self.encode(&mut tape, emb, &mut RunMode::eval())?;
        Ok(tape.value(enc.pooled.repr).to_vec())
    }

    /// Evaluation-mode attention weights over the question's tokens.
    pub fn attention_weights(&self, emb: &QuestionEmbedding) -> Result<Vec<f64>> {
        let mut tape = Tape::with_params(&self.params);
        let enc = self.encode(&mut tape, emb, &mut RunMode::eval())?;
        Ok(tape.value(enc.pooled.weights).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_dim: 3,
            hidden: 4,
            chunk_size: 2,
            num_layers: 2,
            head_units: vec![4, 2],
            dropout: 0.2,
            forget_bias: 0.0,
        }
    }

    fn emb(rows: Vec<Vec<f64>>) -> QuestionEmbedding {
        QuestionEmbedding::from_rows(rows).unwrap()
    }

    #[test]
    fn param_count_matches_registration() {
        let m = SiameseModel::new(tiny(), 1).unwrap();
        assert_eq!(m.num_params(), m.config().param_count());
    }

    #[test]
    fn full_size_count() {
        // Two bidirectional layers (1024→256 and 512→256, 4·256+2·32 gate rows),
        // the 512-wide attention vector and the 512→1024→512→256→128→1 head.
        assert_eq!(ModelConfig::default().param_count(), 5_675_777);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = tiny();
        c.chunk_size = 3;
        assert!(SiameseModel::new(c, 0).is_err());
        let mut c = tiny();
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_token_attention_is_one() {
        let m = SiameseModel::new(tiny(), 2).unwrap();
        let e = emb(vec![vec![0.5, -0.1, 0.3]]);
        assert_eq!(m.attention_weights(&e).unwrap(), [1.0]);
        let mut tape = Tape::with_params(m.params());
        let enc = m.encode(&mut tape, &e, &mut RunMode::eval()).unwrap();
        assert_eq!(tape.value(enc.pooled.repr), tape.value(enc.outputs[0]));
    }

    #[test]
    fn identical_embeddings_depend_only_on_head_bias() {
        let mut m = SiameseModel::new(tiny(), 3).unwrap();
        let e = emb(vec![vec![0.5, -0.1, 0.3], vec![0.2, 0.2, 0.2]]);
        let p = m.predict(&e, &e).unwrap();
        // Vm = 0 and zero biases → every hidden pre-activation is zero.
        assert_eq!(p, 0.5);
        let out_b = m.layout().head.output.b;
        m.params_mut().get_mut(out_b).data_mut()[0] = 2.0;
        let p = m.predict(&e, &e).unwrap();
        assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn wrong_embedding_dim() {
        let m = SiameseModel::new(tiny(), 0).unwrap();
        assert!(m.represent(&emb(vec![vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn zero_head_predicts_half() {
        let m = SiameseModel::zeros(tiny()).unwrap();
        let a = emb(vec![vec![0.5, -0.1, 0.3]]);
        let b = emb(vec![vec![0.9, 0.1, -0.3], vec![0.0, 1.0, 0.0]]);
        assert_eq!(m.predict(&a, &b).unwrap(), 0.5);
    }
}
