//! Ordered-neurons LSTM cell.
//!
//! Besides the four standard LSTM gates the cell has a master forget gate
//! `f̃ = cumax(·)` and a master input gate `ĩ = 1 − cumax(·)`, both computed
//! at chunk resolution (`hidden / chunk_size` levels) and then expanded by
//! repeating each level `chunk_size` times. Their overlap `w = f̃ ∘ ĩ` decides
//! how much of the ordinary forget/input gating survives:
//!
//! ```text
//! f̂ = f ∘ w + (f̃ − w)        î = i ∘ w + (ĩ − w)
//! c = f̂ ∘ c_prev + î ∘ ĉ      h = o ∘ tanh(c)
//! ```

use rand::RngCore;

use crate::nncore::{glorot_uniform, reborrow, NodeId, ParamId, ParamStore, RunMode, Tape, Tensor};
use crate::{Error, Result};

/// `W x + U h + b` parameters of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateParams {
    /// `[rows × input_dim]`
    pub w: ParamId,
    /// `[rows × hidden]`
    pub u: ParamId,
    /// `[rows]`
    pub b: ParamId,
}

/// Parameters of one ON-LSTM direction. Standard gates have `hidden` rows,
/// master gates `hidden / chunk_size` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnLstmCellParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub chunk_size: usize,
    pub forget: GateParams,
    pub input: GateParams,
    pub output: GateParams,
    pub candidate: GateParams,
    pub master_forget: GateParams,
    pub master_input: GateParams,
}

pub const GATE_NAMES: [&str; 6] = [
    "forget",
    "input",
    "output",
    "candidate",
    "master_forget",
    "master_input",
];

impl OnLstmCellParams {
    /// Registers the cell's tensors in `store` under `prefix`. With an `rng`
    /// weights are Glorot-uniform; without one everything is zero. Biases
    /// start at zero except the standard forget gate, which gets
    /// `forget_bias`.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        chunk_size: usize,
        forget_bias: f64,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || chunk_size == 0 || !hidden.is_multiple_of(chunk_size) {
            return Err(Error::InvalidInput(format!(
                "ON-LSTM needs hidden ({hidden}) divisible by chunk size ({chunk_size}) and input_dim > 0"
            )));
        }
        let levels = hidden / chunk_size;
        let mut gate = |name: &str, rows: usize, bias: f64| -> GateParams {
            let mut mat = |cols: usize| match reborrow(&mut rng) {
                Some(r) => glorot_uniform(rows, cols, r),
                None => Tensor::zeros(&[rows, cols]),
            };
            let w = mat(input_dim);
            let u = mat(hidden);
            GateParams {
                w: store.add(format!("{prefix}.{name}.W"), w),
                u: store.add(format!("{prefix}.{name}.U"), u),
                b: store.add(format!("{prefix}.{name}.b"), Tensor::vector(vec![bias; rows])),
            }
        };
        Ok(OnLstmCellParams {
            input_dim,
            hidden,
            chunk_size,
            forget: gate(GATE_NAMES[0], hidden, forget_bias),
            input: gate(GATE_NAMES[1], hidden, 0.0),
            output: gate(GATE_NAMES[2], hidden, 0.0),
            candidate: gate(GATE_NAMES[3], hidden, 0.0),
            master_forget: gate(GATE_NAMES[4], levels, 0.0),
            master_input: gate(GATE_NAMES[5], levels, 0.0),
        })
    }

    /// Number of master-gate levels, `hidden / chunk_size`.
    pub fn levels(&self) -> usize {
        self.hidden / self.chunk_size
    }

    pub fn gates(&self) -> [(&'static str, GateParams); 6] {
        [
            (GATE_NAMES[0], self.forget),
            (GATE_NAMES[1], self.input),
            (GATE_NAMES[2], self.output),
            (GATE_NAMES[3], self.candidate),
            (GATE_NAMES[4], self.master_forget),
            (GATE_NAMES[5], self.master_input),
        ]
    }

    /// Closed-form scalar parameter count.
    pub fn count(input_dim: usize, hidden: usize, chunk_size: usize) -> usize {
        (input_dim + hidden + 1) * (4 * hidden + 2 * (hidden / chunk_size))
    }
}

/// Recurrent state `(h, c)` as tape nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateNodes {
    pub h: NodeId,
    pub c: NodeId,
}

impl StateNodes {
    /// All-zero initial state.
    pub fn zeros(tape: &mut Tape, hidden: usize) -> Self {
        StateNodes {
            h: tape.constant(Tensor::zeros(&[hidden])),
            c: tape.constant(Tensor::zeros(&[hidden])),
        }
    }

    pub fn values(&self, tape: &Tape) -> OnLstmState {
        OnLstmState {
            h: tape.value(self.h).to_vec(),
            c: tape.value(self.c).to_vec(),
        }
    }
}

/// Concrete state values.
#[derive(Debug, Clone, PartialEq)]
pub struct OnLstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Tape nodes of every intermediate gate signal of one step.
#[derive(Debug, Clone, Copy)]
pub struct GateNodes {
    pub forget: NodeId,
    pub input: NodeId,
    pub output: NodeId,
    pub candidate: NodeId,
    pub master_forget_levels: NodeId,
    pub master_input_levels: NodeId,
    pub master_forget: NodeId,
    pub master_input: NodeId,
    pub overlap: NodeId,
    pub forget_hat: NodeId,
    pub input_hat: NodeId,
}

/// Diagnostic record of one cell step. `master_*_levels` are at chunk
/// resolution; `master_forget` / `master_input` are expanded to `hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateActivations {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub master_forget_levels: Vec<f64>,
    pub master_input_levels: Vec<f64>,
    pub master_forget: Vec<f64>,
    pub master_input: Vec<f64>,
    pub overlap: Vec<f64>,
    pub forget_hat: Vec<f64>,
    pub input_hat: Vec<f64>,
}

impl GateNodes {
    pub fn values(&self, tape: &Tape) -> GateActivations {
        let v = |n: NodeId| tape.value(n).to_vec();
        GateActivations {
            forget: v(self.forget),
            input: v(self.input),
            output: v(self.output),
            candidate: v(self.candidate),
            master_forget_levels: v(self.master_forget_levels),
            master_input_levels: v(self.master_input_levels),
            master_forget: v(self.master_forget),
            master_input: v(self.master_input),
            overlap: v(self.overlap),
            forget_hat: v(self.forget_hat),
            input_hat: v(self.input_hat),
        }
    }
}

fn preactivation(tape: &mut Tape, gate: GateParams, x: NodeId, h: NodeId) -> Result<NodeId> {
    let (w, u, b) = (tape.param(gate.w), tape.param(gate.u), tape.param(gate.b));
    let wx = tape.matvec(w, x)?;
    let uh = tape.matvec(u, h)?;
    let s = tape.add(wx, uh)?;
    tape.add_bias(s, b)
}

/// One ON-LSTM step.
pub fn onlstm_cell_step(
    tape: &mut Tape,
    cell: &OnLstmCellParams,
    x: NodeId,
    prev: StateNodes,
) -> Result<(StateNodes, GateNodes)> {
    if tape.shape(x) != [cell.input_dim] {
        return Err(Error::shape(
            "onlstm_cell_step",
            format!("input {:?}, cell expects [{}]", tape.shape(x), cell.input_dim),
        ));
    }
    if tape.shape(prev.h) != [cell.hidden] || tape.shape(prev.c) != [cell.hidden] {
        return Err(Error::shape("onlstm_cell_step", "previous state does not match hidden size"));
    }
    let h = prev.h;

    let f = preactivation(tape, cell.forget, x, h)?;
    let f = tape.sigmoid(f);
    let i = preactivation(tape, cell.input, x, h)?;
    let i = tape.sigmoid(i);
    let o = preactivation(tape, cell.output, x, h)?;
    let o = tape.sigmoid(o);
    let c_hat = preactivation(tape, cell.candidate, x, h)?;
    let c_hat = tape.tanh(c_hat);

    let mf = preactivation(tape, cell.master_forget, x, h)?;
    let mf_levels = tape.cumax(mf, 0)?;
    let mi = preactivation(tape, cell.master_input, x, h)?;
    let mi = tape.cumax(mi, 0)?;
    let mi_levels = tape.one_minus(mi);
    let mf_full = tape.repeat_each(mf_levels, cell.chunk_size)?;
    let mi_full = tape.repeat_each(mi_levels, cell.chunk_size)?;

    let w = tape.mul(mf_full, mi_full)?;
    let fw = tape.mul(f, w)?;
    let mf_rest = tape.sub(mf_full, w)?;
    let f_hat = tape.add(fw, mf_rest)?;
    let iw = tape.mul(i, w)?;
    let mi_rest = tape.sub(mi_full, w)?;
    let i_hat = tape.add(iw, mi_rest)?;

    let keep = tape.mul(f_hat, prev.c)?;
    let write = tape.mul(i_hat, c_hat)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h_new = tape.mul(o, tc)?;

    if !tape.value(h_new).iter().chain(tape.value(c)).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("ON-LSTM state".into()));
    }
    Ok((
        StateNodes { h: h_new, c },
        GateNodes {
            forget: f,
            input: i,
            output: o,
            candidate: c_hat,
            master_forget_levels: mf_levels,
            master_input_levels: mi_levels,
            master_forget: mf_full,
            master_input: mi_full,
            overlap: w,
            forget_hat: f_hat,
            input_hat: i_hat,
        },
    ))
}

/// Runs a cell over a sequence from a zero state and returns the hidden
/// output of every step in input order. With `reverse` the sequence is
/// consumed back to front. Dropout at `dropout` is applied to each output
/// when `mode` is training.
pub fn run_direction(
    tape: &mut Tape,
    cell: &OnLstmCellParams,
    sequence: &[NodeId],
    reverse: bool,
    dropout: f64,
    mode: &mut RunMode,
) -> Result<Vec<NodeId>> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("cannot run an ON-LSTM over an empty sequence".into()));
    }
    let mut state = StateNodes::zeros(tape, cell.hidden);
    let mut outputs = vec![state.h; sequence.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..sequence.len()).rev())
    } else {
        Box::new(0..sequence.len())
    };
    for t in order {
        state = onlstm_cell_step(tape, cell, sequence[t], state)?.0;
        outputs[t] = state.h;
    }
    outputs
        .into_iter()
        .map(|h| tape.dropout(h, dropout, mode))
        .collect()
}
