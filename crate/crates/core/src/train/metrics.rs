use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of replicas in the ensemble protocol.
pub const ENSEMBLE_SIZE: usize = 5;

/// Binary classification metrics with label `1` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(pred: &[u8], truth: &[u8]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, pred.len()),
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Per item, the label chosen by at least three of the five models.
pub fn majority_vote(votes: &[Vec<u8>]) -> Result<Vec<u8>> {
    if votes.len() != ENSEMBLE_SIZE {
        return Err(Error::InvalidInput(format!(
            "majority vote needs {ENSEMBLE_SIZE} label lists, got {}",
            votes.len()
        )));
    }
    let n = votes[0].len();
    if votes.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("label lists have different lengths".into()));
    }
    Ok((0..n)
        .map(|i| {
            let yes = votes.iter().filter(|v| v[i] != 0).count();
            u8::from(yes > ENSEMBLE_SIZE / 2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        // TP=2, FP=1, FN=1, TN=1
        let m = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 1));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 0.6).abs() < 1e-15);

        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap().f1, 1.0);
        assert_eq!(f1_score(&[0, 0, 0], &[1, 0, 1]).unwrap().f1, 0.0);
        assert!(f1_score(&[0, 1], &[1]).is_err());
    }

    #[test]
    fn fn_field_serializes_as_fn() {
        let m = f1_score(&[0], &[1]).unwrap();
        let v = serde_json::to_value(m).unwrap();
        assert_eq!(v["fn"], 1);
    }

    #[test]
    fn vote_examples() {
        let lists = |xs: [u8; 5]| xs.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        assert_eq!(majority_vote(&lists([1, 1, 0, 0, 1])).unwrap(), [1]);
        assert_eq!(majority_vote(&lists([0, 0, 0, 0, 0])).unwrap(), [0]);
        assert_eq!(majority_vote(&lists([1, 1, 0, 0, 0])).unwrap(), [0]);
        assert!(majority_vote(&[vec![1], vec![1]]).is_err());
        let mut ragged = lists([1, 1, 1, 1, 1]);
        ragged[2].push(0);
        assert!(majority_vote(&ragged).is_err());
    }
}
