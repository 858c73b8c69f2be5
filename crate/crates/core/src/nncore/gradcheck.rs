use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{NodeId, ParamStore, Tape};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Check at most this many coordinates per tensor (sampled without
    /// replacement); `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            max_coords_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// `(parameter, coordinate, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub per_param: Vec<ParamCheck>,
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of `f` against central differences
/// `(f(θ + eps) − f(θ − eps)) / (2 eps)`, one coordinate at a time.
///
/// `f` builds a scalar loss on a tape bound to the given store; it must be
/// deterministic (no active dropout).
pub fn grad_check<F>(params: &ParamStore, f: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape) -> Result<NodeId>,
{
    let analytic = {
        let mut tape = Tape::with_params(params);
        let loss = f(&mut tape)?;
        tape.backward(loss)?.into_param_grads(params)
    };
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::with_params(store);
        let loss = f(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst: None,
        per_param: Vec::new(),
    };
    for id in params.ids() {
        let n = params.get(id).len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < n => {
                let mut c = sample(&mut rng, n, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        let mut worst_here = 0.0f64;
        for &j in &coords {
            let orig = params.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = orig + opts.eps;
            let up = eval(&work)?;
            work.get_mut(id).data_mut()[j] = orig - opts.eps;
            let down = eval(&work)?;
            work.get_mut(id).data_mut()[j] = orig;

            let numeric = (up - down) / (2.0 * opts.eps);
            let a = analytic[id.0][j];
            let err = relative_error(a, numeric);
            worst_here = worst_here.max(err);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((params.name(id).to_owned(), j, a, numeric));
            }
        }
        report.coords_checked += coords.len();
        report.per_param.push(ParamCheck {
            name: params.name(id).to_owned(),
            coords_checked: coords.len(),
            max_rel_error: worst_here,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Tensor;

    #[test]
    fn linear_function_is_exact() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.3, -1.7, 2.2, 0.01]));
        let coeffs = Tensor::vector(vec![1.5, -0.5, 2.0, 3.0]);
        let report = grad_check(
            &store,
            |t| {
                let x = t.param(w);
                let c = t.constant(coeffs.clone());
                let y = t.mul(x, c)?;
                Ok(t.sum(y))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-10, "{report:?}");
        assert_eq!(report.coords_checked, 4);
    }

    #[test]
    fn sigmoid_chain() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::matrix(2, 3, vec![0.2, -0.4, 0.9, 1.1, -0.3, 0.05]).unwrap());
        let x = store.add("x", Tensor::vector(vec![0.7, -1.2, 0.4]));
        let report = grad_check(
            &store,
            |t| {
                let (w, x) = (t.param(w), t.param(x));
                let h = t.matvec(w, x)?;
                let h = t.sigmoid(h);
                let h = t.sigmoid(h);
                let h = t.mul(h, h)?;
                Ok(t.sum(h))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn sampling_limits_coordinates() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector((0..50).map(|i| i as f64 * 0.01).collect()));
        let report = grad_check(
            &store,
            |t| {
                let x = t.param(w);
                let y = t.tanh(x);
                Ok(t.sum(y))
            },
            GradCheckOptions {
                max_coords_per_param: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.coords_checked, 7);
    }
}
