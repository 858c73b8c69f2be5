//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here is written with plain loops over
//! `Vec<f64>` and plain set arithmetic, sharing no code with the library
//! beyond reading parameter tensors by name.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use sqsim::augment::{Dataset, Label, LabeledPair, Provenance, QuestionId, QuestionIndex};
use sqsim::embed::QuestionEmbedding;
use sqsim::model::{ModelConfig, SiameseModel, GATE_NAMES};
use sqsim::nncore::ParamStore;

pub type Triple = (u32, u32, u8);

pub fn triples(pairs: &[LabeledPair]) -> BTreeSet<Triple> {
    pairs.iter().map(|p| (p.q1.0, p.q2.0, p.label.as_u8())).collect()
}

/// A random consistent dataset: at most `max_q` questions and `max_pairs`
/// pairs, no repeated ordered pair, one label per unordered pair. Mirrors
/// and self-pairs occur.
pub fn random_dataset(rng: &mut impl Rng, max_q: u32, max_pairs: usize) -> Dataset {
    let nq = rng.gen_range(1..=max_q);
    let target = rng.gen_range(0..=max_pairs);
    let mut ds = Dataset::new();
    let mut labels: HashMap<(u32, u32), Label> = HashMap::new();
    let mut ordered = BTreeSet::new();
    for _ in 0..target * 4 {
        if ds.pairs.len() == target {
            break;
        }
        let a = rng.gen_range(0..nq);
        let b = if rng.gen_bool(0.1) { a } else { rng.gen_range(0..nq) };
        let key = (a.min(b), a.max(b));
        let label = match labels.get(&key) {
            Some(&l) => l,
            None if a == b => Label::Similar,
            None if rng.gen_bool(0.55) => Label::Similar,
            None => Label::NotSimilar,
        };
        if !ordered.insert((a, b)) {
            continue;
        }
        labels.insert(key, label);
        ds.push_text(&format!("q{a}"), &format!("q{b}"), label, Provenance::Original);
    }
    ds
}

fn lookup(pairs: &[LabeledPair]) -> HashMap<(u32, u32), u8> {
    pairs.iter().map(|p| ((p.q1.0, p.q2.0), p.label.as_u8())).collect()
}

/// Single-pass transitive closure by enumerating every ordered triple
/// `(x, y, z)`: a positive premise `(x, y)` and any pair joining `y` and `z`
/// yield `(x, z)` with the second pair's label. Pairs already present in
/// either orientation are never derived. Unordered pairs reached with both
/// labels are dropped. A pair derived in both orientations is emitted once,
/// smaller id first.
pub fn oracle_transitive(pairs: &[LabeledPair], questions: u32) -> BTreeSet<Triple> {
    let lab = lookup(pairs);
    let either = |x: u32, y: u32| lab.get(&(x, y)).or_else(|| lab.get(&(y, x))).copied();
    let mut derived: BTreeMap<(u32, u32), BTreeSet<u8>> = BTreeMap::new();
    for x in 0..questions {
        for y in 0..questions {
            if lab.get(&(x, y)) != Some(&1) {
                continue;
            }
            for z in 0..questions {
                if x == z || either(x, z).is_some() {
                    continue;
                }
                if let Some(l) = either(y, z) {
                    derived.entry((x, z)).or_default().insert(l);
                }
            }
        }
    }
    let mut out = triples(pairs);
    let mut done = BTreeSet::new();
    for &(x, z) in derived.keys() {
        let key = (x.min(z), x.max(z));
        if !done.insert(key) {
            continue;
        }
        let fwd = derived.get(&key);
        let bwd = derived.get(&(key.1, key.0));
        let all: BTreeSet<u8> = fwd.into_iter().chain(bwd).flatten().copied().collect();
        if all.len() != 1 {
            continue;
        }
        let l = *all.iter().next().unwrap();
        let (a, b) = match (fwd, bwd) {
            (Some(_), Some(_)) | (Some(_), None) => key,
            (None, Some(_)) => (key.1, key.0),
            (None, None) => unreachable!(),
        };
        out.insert((a, b, l));
    }
    out
}

pub fn oracle_symmetric(pairs: &BTreeSet<Triple>) -> BTreeSet<Triple> {
    let mut out = pairs.clone();
    for &(a, b, l) in pairs {
        out.insert((b, a, l));
    }
    out
}

pub fn oracle_reflexive(pairs: &BTreeSet<Triple>, questions: u32) -> BTreeSet<Triple> {
    let mut out = pairs.clone();
    for q in 0..questions {
        if !pairs.iter().any(|&(a, b, _)| a == q && b == q) {
            out.insert((q, q, 1));
        }
    }
    out
}

pub fn question_count(index: &QuestionIndex) -> u32 {
    index.len() as u32
}

pub fn qid(i: u32) -> QuestionId {
    QuestionId(i)
}

// ---------------------------------------------------------------------------
// Scalar arithmetic oracles for the network.

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn cumsum(z: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    z.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

pub fn cumax(z: &[f64]) -> Vec<f64> {
    cumsum(&softmax(z))
}

fn matrix(store: &ParamStore, name: &str) -> Vec<Vec<f64>> {
    let t = store.get(store.find(name).unwrap_or_else(|| panic!("missing {name}")));
    let cols = t.shape()[1];
    t.data().chunks(cols).map(<[f64]>::to_vec).collect()
}

fn vector(store: &ParamStore, name: &str) -> Vec<f64> {
    store.get(store.find(name).unwrap_or_else(|| panic!("missing {name}"))).data().to_vec()
}

/// `W x + U h + b` for one gate, read from `store`.
pub struct ScalarGate {
    w: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl ScalarGate {
    fn pre(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..self.b.len())
            .map(|r| {
                let wx: f64 = self.w[r].iter().zip(x).map(|(w, x)| w * x).sum();
                let uh: f64 = self.u[r].iter().zip(h).map(|(u, h)| u * h).sum();
                self.b[r] + wx + uh
            })
            .collect()
    }
}

pub struct ScalarCell {
    pub hidden: usize,
    pub chunk: usize,
    gates: Vec<ScalarGate>,
}

#[derive(Debug, Clone)]
pub struct ScalarStep {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub mf_levels: Vec<f64>,
    pub mi_levels: Vec<f64>,
    pub mf: Vec<f64>,
    pub mi: Vec<f64>,
    pub w: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub i_hat: Vec<f64>,
}

impl ScalarCell {
    pub fn from_store(store: &ParamStore, prefix: &str, hidden: usize, chunk: usize) -> Self {
        let gates = GATE_NAMES
            .iter()
            .map(|g| ScalarGate {
                w: matrix(store, &format!("{prefix}.{g}.W")),
                u: matrix(store, &format!("{prefix}.{g}.U")),
                b: vector(store, &format!("{prefix}.{g}.b")),
            })
            .collect();
        ScalarCell { hidden, chunk, gates }
    }

    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> ScalarStep {
        let n = self.hidden;
        let f: Vec<f64> = self.gates[0].pre(x, h).into_iter().map(sigmoid).collect();
        let i: Vec<f64> = self.gates[1].pre(x, h).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = self.gates[2].pre(x, h).into_iter().map(sigmoid).collect();
        let c_hat: Vec<f64> = self.gates[3].pre(x, h).into_iter().map(f64::tanh).collect();
        let mf_levels = cumax(&self.gates[4].pre(x, h));
        let mi_levels: Vec<f64> = cumax(&self.gates[5].pre(x, h)).iter().map(|v| 1.0 - v).collect();
        let mf: Vec<f64> = (0..n).map(|j| mf_levels[j / self.chunk]).collect();
        let mi: Vec<f64> = (0..n).map(|j| mi_levels[j / self.chunk]).collect();
        let mut w = vec![0.0; n];
        let mut f_hat = vec![0.0; n];
        let mut i_hat = vec![0.0; n];
        let mut c_new = vec![0.0; n];
        let mut h_new = vec![0.0; n];
        for j in 0..n {
            w[j] = mf[j] * mi[j];
            f_hat[j] = f[j] * w[j] + (mf[j] - w[j]);
            i_hat[j] = i[j] * w[j] + (mi[j] - w[j]);
            c_new[j] = f_hat[j] * c[j] + i_hat[j] * c_hat[j];
            h_new[j] = o[j] * c_new[j].tanh();
        }
        ScalarStep {
            h: h_new,
            c: c_new,
            f,
            i,
            o,
            c_hat,
            mf_levels,
            mi_levels,
            mf,
            mi,
            w,
            f_hat,
            i_hat,
        }
    }

    /// Hidden outputs for every step, in input order.
    pub fn run(&self, seq: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
        let n = self.hidden;
        let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
        let mut out = vec![Vec::new(); seq.len()];
        let order: Vec<usize> = if reverse {
            (0..seq.len()).rev().collect()
        } else {
            (0..seq.len()).collect()
        };
        for t in order {
            let s = self.step(&seq[t], &h, &c);
            h = s.h;
            c = s.c;
            out[t] = h.clone();
        }
        out
    }
}

/// Attention weights and pooled vector: `e_t = h_t · w`, `a = softmax(e)`,
/// `v = Σ a_t h_t`.
pub fn attention(w: &[f64], outputs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let e: Vec<f64> = outputs
        .iter()
        .map(|h| h.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    let a = softmax(&e);
    let mut v = vec![0.0; w.len()];
    for (t, h) in outputs.iter().enumerate() {
        for j in 0..v.len() {
            v[j] += a[t] * h[j];
        }
    }
    (a, v)
}

fn dense(store: &ParamStore, prefix: &str, x: &[f64]) -> Vec<f64> {
    let w = matrix(store, &format!("{prefix}.W"));
    let b = vector(store, &format!("{prefix}.b"));
    w.iter()
        .zip(&b)
        .map(|(row, bias)| row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + bias)
        .collect()
}

pub fn head(store: &ParamStore, layers: usize, vm: &[f64]) -> f64 {
    let mut x = vm.to_vec();
    for l in 0..layers {
        x = dense(store, &format!("head.dense{l}"), &x)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
    }
    sigmoid(dense(store, "head.output", &x)[0])
}

/// Evaluation-mode encoder: `(attention weights, representation)`.
pub fn encode(model: &SiameseModel, emb: &QuestionEmbedding) -> (Vec<f64>, Vec<f64>) {
    let cfg: &ModelConfig = model.config();
    let store = model.params();
    let mut seq: Vec<Vec<f64>> = emb.rows().map(<[f64]>::to_vec).collect();
    for l in 0..cfg.num_layers {
        let fwd = ScalarCell::from_store(store, &format!("layer{l}.fwd"), cfg.hidden, cfg.chunk_size).run(&seq, false);
        let bwd = ScalarCell::from_store(store, &format!("layer{l}.bwd"), cfg.hidden, cfg.chunk_size).run(&seq, true);
        seq = fwd
            .into_iter()
            .zip(bwd)
            .map(|(mut f, b)| {
                f.extend(b);
                f
            })
            .collect();
    }
    attention(&vector(store, "attention.w_a"), &seq)
}

/// Evaluation-mode similarity probability.
pub fn forward_pair(model: &SiameseModel, a: &QuestionEmbedding, b: &QuestionEmbedding) -> f64 {
    let (_, va) = encode(model, a);
    let (_, vb) = encode(model, b);
    let vm: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| (x - y) * (x - y)).collect();
    head(model.params(), model.config().head_units.len(), &vm)
}

pub fn random_embedding(rng: &mut impl Rng, len: usize, dim: usize) -> QuestionEmbedding {
    let rows = (0..len)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    QuestionEmbedding::from_rows(rows).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
