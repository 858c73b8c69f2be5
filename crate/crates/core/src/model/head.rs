//! Fully connected decision head: ReLU layers with dropout, then a single
//! sigmoid unit.

use rand::RngCore;

use crate::nncore::{glorot_uniform, reborrow, NodeId, ParamId, ParamStore, RunMode, Tape, Tensor};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    /// `[out × in]`
    pub w: ParamId,
    /// `[out]`
    pub b: ParamId,
}

impl Dense {
    fn register(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        output: usize,
        rng: Option<&mut dyn RngCore>,
    ) -> Self {
        let w = match rng {
            Some(r) => glorot_uniform(output, input, r),
            None => Tensor::zeros(&[output, input]),
        };
        Dense {
            w: store.add(format!("{prefix}.W"), w),
            b: store.add(format!("{prefix}.b"), Tensor::zeros(&[output])),
        }
    }

    fn apply(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let (w, b) = (tape.param(self.w), tape.param(self.b));
        let z = tape.matvec(w, x)?;
        tape.add_bias(z, b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpHead {
    pub hidden: Vec<Dense>,
    pub output: Dense,
}

impl MlpHead {
    pub(crate) fn register(
        store: &mut ParamStore,
        input: usize,
        units: &[usize],
        mut rng: Option<&mut dyn RngCore>,
    ) -> Self {
        let mut width = input;
        let mut hidden = Vec::with_capacity(units.len());
        for (i, &u) in units.iter().enumerate() {
            hidden.push(Dense::register(store, &format!("head.dense{i}"), width, u, reborrow(&mut rng)));
            width = u;
        }
        let output = Dense::register(store, "head.output", width, 1, rng);
        MlpHead { hidden, output }
    }

    pub fn count(input: usize, units: &[usize]) -> usize {
        let mut width = input;
        let mut total = 0;
        for &u in units.iter().chain(std::iter::once(&1)) {
            total += width * u + u;
            width = u;
        }
        total
    }
}

/// `sigmoid(W_out · drop(relu(… drop(relu(W_1 · vm + b_1)) …)) + b_out)`,
/// returned as a one-element node.
pub fn mlp_head(tape: &mut Tape, head: &MlpHead, vm: NodeId, dropout: f64, mode: &mut RunMode) -> Result<NodeId> {
    let mut x = vm;
    for layer in &head.hidden {
        let z = layer.apply(tape, x)?;
        let a = tape.relu(z);
        x = tape.dropout(a, dropout, mode)?;
    }
    let logit = head.output.apply(tape, x)?;
    Ok(tape.sigmoid(logit))
}
