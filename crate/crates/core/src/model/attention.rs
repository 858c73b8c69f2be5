//! Sequence weighted attention: `e_t = h_t · w_a`, `a = softmax(e)`,
//! `v = Σ a_t h_t`. The scoring vector `w_a` is the only parameter; there is
//! no bias term.

use crate::nncore::{NodeId, Tape};
use crate::{Error, Result};

/// Pooled representation and the attention weights that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Pooled {
    /// `[width]`
    pub repr: NodeId,
    /// `[T]`, nonnegative, sums to one.
    pub weights: NodeId,
}

pub fn attention_pool(tape: &mut Tape, w_a: NodeId, outputs: &[NodeId]) -> Result<Pooled> {
    if outputs.is_empty() {
        return Err(Error::InvalidInput("attention over an empty sequence".into()));
    }
    let steps = tape.stack(outputs)?;
    let scores = tape.matvec(steps, w_a)?;
    let weights = tape.softmax(scores, 0)?;
    let t = outputs.len();
    let row = tape.reshape(weights, &[1, t])?;
    let pooled = tape.matmul(row, steps)?;
    let width = tape.shape(steps)[1];
    let repr = tape.reshape(pooled, &[width])?;
    Ok(Pooled { repr, weights })
}

/// `Vm_j = (V1_j − V2_j)²`.
pub fn merge_pairwise_sqdist(tape: &mut Tape, v1: NodeId, v2: NodeId) -> Result<NodeId> {
    let d = tape.sub(v1, v2)?;
    tape.mul(d, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Tensor;

    fn v(t: &mut Tape, x: &[f64]) -> NodeId {
        t.constant(Tensor::vector(x.to_vec()))
    }

    #[test]
    fn equal_steps_give_uniform_weights() {
        let mut t = Tape::new();
        let w = v(&mut t, &[0.3, -2.0, 1.0]);
        let h = v(&mut t, &[1.0, 2.0, 3.0]);
        let p = attention_pool(&mut t, w, &[h, h, h, h]).unwrap();
        assert!(t.value(p.weights).iter().all(|a| (a - 0.25).abs() < 1e-15));
        for (a, b) in t.value(p.repr).iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_step() {
        let mut t = Tape::new();
        let w = v(&mut t, &[5.0, 5.0]);
        let h = v(&mut t, &[-1.0, 0.5]);
        let p = attention_pool(&mut t, w, &[h]).unwrap();
        assert_eq!(t.value(p.weights), [1.0]);
        assert_eq!(t.value(p.repr), [-1.0, 0.5]);
    }

    #[test]
    fn merge_examples() {
        let mut t = Tape::new();
        let a = v(&mut t, &[1.0, 2.0]);
        let b = v(&mut t, &[3.0, 0.0]);
        let m = merge_pairwise_sqdist(&mut t, a, b).unwrap();
        assert_eq!(t.value(m), [4.0, 4.0]);
        let m2 = merge_pairwise_sqdist(&mut t, b, a).unwrap();
        assert_eq!(t.value(m), t.value(m2));
        let z = merge_pairwise_sqdist(&mut t, a, a).unwrap();
        assert_eq!(t.value(z), [0.0, 0.0]);
        let c = v(&mut t, &[1.0]);
        assert!(merge_pairwise_sqdist(&mut t, a, c).is_err());
    }
}
