use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqsim::augment::{Dataset, Provenance};
use sqsim::model::SiameseModel;
use sqsim::nncore::ParamStore;
use sqsim::train::synthetic::{cluster_pairs, small_config};
use sqsim::train::{
    evaluate_models, f1_score, majority_vote, mean_loss, predict_labels, run_experiment, train_model, Examples,
    Trainer,
};

const DIM: usize = 16;

fn count_oracle(pred: &[u8], truth: &[u8]) -> (f64, f64, f64) {
    let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == 1 && t == 1).count() as f64;
    let fp = pred.iter().zip(truth).filter(|&(&p, &t)| p == 1 && t == 0).count() as f64;
    let fn_ = pred.iter().zip(truth).filter(|&(&p, &t)| p == 0 && t == 1).count() as f64;
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

fn labels(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2)).collect()
}

proptest! {
    #[test]
    fn f1_matches_counting_and_ignores_order(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, truth) = (labels(&mut rng, n), labels(&mut rng, n));
        let m = f1_score(&pred, &truth).unwrap();
        let (p, r, f) = count_oracle(&pred, &truth);
        prop_assert!((m.precision - p).abs() < 1e-15);
        prop_assert!((m.recall - r).abs() < 1e-15);
        prop_assert!((m.f1 - f).abs() < 1e-15);
        prop_assert_eq!(m.tp + m.fp + m.tn + m.fn_, n);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let pp: Vec<u8> = order.iter().map(|&i| pred[i]).collect();
        let tt: Vec<u8> = order.iter().map(|&i| truth[i]).collect();
        prop_assert_eq!(f1_score(&pp, &tt).unwrap(), m);
    }

    #[test]
    fn vote_matches_per_item_count(seed in any::<u64>(), n in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let votes: Vec<Vec<u8>> = (0..5).map(|_| labels(&mut rng, n)).collect();
        let got = majority_vote(&votes).unwrap();
        for (j, &g) in got.iter().enumerate() {
            let ones = votes.iter().filter(|v| v[j] == 1).count();
            prop_assert_eq!(g, u8::from(ones >= 3));
        }
    }
}

#[test]
fn vote_rejects_wrong_shapes() {
    assert!(majority_vote(&vec![vec![1]; 4]).is_err());
    assert!(majority_vote(&[vec![1], vec![1], vec![1], vec![1], vec![1, 0]]).is_err());
    assert!(f1_score(&[1, 0], &[1]).is_err());
}

#[test]
fn first_epoch_lowers_loss_for_every_seed() {
    let (ds, store) = cluster_pairs(50, DIM, 42).unwrap();
    let config = small_config(DIM);
    for &seed in &config.seeds {
        let examples = Examples::resolve(&ds, &store).unwrap();
        let mut trainer = Trainer::new(&config, examples, seed).unwrap();
        trainer.run_epoch().unwrap();
        let after = mean_loss(trainer.model(), trainer.examples()).unwrap();
        let before = trainer.history().initial;
        assert!(after < before, "seed {seed}: {before} → {after}");
    }
}

#[test]
fn short_experiment_report_is_ordered_and_complete() {
    let (ds, store) = cluster_pairs(30, DIM, 7).unwrap();
    let mut config = small_config(DIM);
    config.epochs = 3;
    let (report, replicas) = run_experiment(&config, &ds, &ds, &store).unwrap();
    assert_eq!(report.per_model_f1.len(), 5);
    assert!(report.min <= report.avg && report.avg <= report.max);
    assert_eq!(report.seeds, config.seeds);
    assert_eq!(report.durations_sec.len(), 5);
    assert_eq!(replicas.len(), 5);
    for (r, seed) in replicas.iter().zip(&config.seeds) {
        assert_eq!(r.seed, *seed);
        assert_eq!(r.history.epochs.len(), 3);
        // ⌈30 / 8⌉ batches per epoch.
        assert_eq!(r.history.steps, 12);
    }
    let json = serde_json::to_value(&report).unwrap();
    for key in ["per_model_f1", "min", "max", "avg", "vote", "config", "seeds", "durations_sec"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn identical_models_give_degenerate_report() {
    let (ds, store) = cluster_pairs(20, DIM, 3).unwrap();
    let mut config = small_config(DIM);
    config.epochs = 2;
    let (model, _) = train_model(&config, &ds, &store, 11).unwrap();
    let models = vec![&model; 5];
    let report = evaluate_models(&models, &config, vec![0.0; 5], &ds, &store).unwrap();
    assert_eq!(report.min, report.max);
    assert_eq!(report.avg, report.max);
    assert_eq!(report.vote, report.max);
    assert!(evaluate_models(&models[..4], &config, vec![0.0; 4], &ds, &store).is_err());
}

fn scramble(store: &mut ParamStore, rng: &mut impl Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.get_mut(id).data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
}

#[test]
fn labels_ignore_pair_orientation() {
    let (ds, store) = cluster_pairs(40, DIM, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut swapped = Dataset::new();
    for p in &ds.pairs {
        let (a, b) = ds.pair_texts(p);
        swapped.push_text(b, a, p.label, Provenance::Original);
    }
    for seed in 0..5 {
        let mut model = SiameseModel::new(small_config(DIM).model, seed).unwrap();
        scramble(model.params_mut(), &mut rng);
        let forward = predict_labels(&model, &ds, &store, 0.5).unwrap();
        let backward = predict_labels(&model, &swapped, &store, 0.5).unwrap();
        assert_eq!(forward, backward);
    }
}

#[test]
fn retraining_reproduces_parameters_and_history() {
    let (ds, store) = cluster_pairs(24, DIM, 9).unwrap();
    let mut config = small_config(DIM);
    config.epochs = 4;
    let (m1, h1) = train_model(&config, &ds, &store, 44).unwrap();
    let (m2, h2) = train_model(&config, &ds, &store, 44).unwrap();
    assert_eq!(h1, h2);
    for ((_, n1, t1), (_, n2, t2)) in m1.params().iter().zip(m2.params().iter()) {
        assert_eq!(n1, n2);
        let b1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
        let b2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(b1, b2);
    }
    let (m3, _) = train_model(&config, &ds, &store, 45).unwrap();
    assert_ne!(m1.params().iter().next().unwrap().2, m3.params().iter().next().unwrap().2);
}
