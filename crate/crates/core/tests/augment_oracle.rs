mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqsim::augment::{
    apply_reflexive, apply_symmetric, apply_transitive, augment_all, read_pairs_tsv, write_pairs_tsv, Dataset,
    Label, Provenance, Stages,
};

fn dataset(seed: u64) -> Dataset {
    random_dataset(&mut ChaCha8Rng::seed_from_u64(seed), 8, 20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn transitive_matches_triple_enumeration(seed in any::<u64>()) {
        let ds = dataset(seed);
        let n = question_count(&ds.questions);
        let out = apply_transitive(&ds.pairs).unwrap();
        prop_assert_eq!(triples(&out.pairs), oracle_transitive(&ds.pairs, n));
        prop_assert_eq!(&out.pairs[..ds.len()], &ds.pairs[..]);
        prop_assert!(out.pairs[ds.len()..].iter().all(|p| p.provenance == Provenance::Transitive));
        // No duplicates: the set has as many members as the list.
        prop_assert_eq!(triples(&out.pairs).len(), out.pairs.len());
    }

    #[test]
    fn symmetric_matches_mirror_oracle(seed in any::<u64>()) {
        let ds = dataset(seed);
        let out = apply_symmetric(&ds.pairs).unwrap();
        prop_assert_eq!(triples(&out), oracle_symmetric(&triples(&ds.pairs)));
        prop_assert_eq!(triples(&out).len(), out.len());
        let twice = apply_symmetric(&out).unwrap();
        prop_assert_eq!(twice.len(), out.len());
        let swapped: BTreeSet<_> = triples(&out).into_iter().map(|(a, b, l)| (b, a, l)).collect();
        prop_assert_eq!(swapped, triples(&out));
    }

    #[test]
    fn reflexive_matches_oracle(seed in any::<u64>()) {
        let ds = dataset(seed);
        let n = question_count(&ds.questions);
        let out = apply_reflexive(&ds.pairs, &ds.questions);
        prop_assert_eq!(triples(&out), oracle_reflexive(&triples(&ds.pairs), n));
        let self_pairs = ds.pairs.iter().filter(|p| p.q1 == p.q2).count();
        prop_assert_eq!(out.len() - ds.len(), n as usize - self_pairs);
        prop_assert!(out[ds.len()..].iter().all(|p| p.label == Label::Similar));
    }

    #[test]
    fn composed_stages_match_composed_oracles(seed in any::<u64>()) {
        let ds = dataset(seed);
        let n = question_count(&ds.questions);
        let aug = augment_all(&ds, Stages::ALL).unwrap();
        let expected = oracle_reflexive(&oracle_symmetric(&oracle_transitive(&ds.pairs, n)), n);
        prop_assert_eq!(triples(&aug.dataset.pairs), expected);
        let t = aug.stage_counts.totals();
        prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(t[3], aug.dataset.len());
    }
}

#[test]
fn single_pair_stage_counts() {
    let mut ds = Dataset::new();
    ds.push_text("A", "B", Label::Similar, Provenance::Original);
    let aug = augment_all(&ds, Stages::ALL).unwrap();
    assert_eq!(aug.stage_counts.totals(), [1, 1, 2, 4]);
    assert_eq!(aug.stage_counts.reflexive.positive, 4);
}

#[test]
fn selected_stages_only() {
    let mut ds = Dataset::new();
    ds.push_text("A", "B", Label::Similar, Provenance::Original);
    ds.push_text("B", "C", Label::NotSimilar, Provenance::Original);
    let aug = augment_all(&ds, Stages::parse("s").unwrap()).unwrap();
    assert_eq!(aug.stage_counts.totals(), [2, 2, 4, 4]);
    let aug = augment_all(&ds, Stages::ALL).unwrap();
    // A≁C derived, then mirrored, then three self-pairs.
    assert_eq!(aug.stage_counts.totals(), [2, 3, 6, 9]);
    assert_eq!(aug.stage_counts.reflexive.negative, 4);
}

#[test]
fn augmented_tsv_round_trip() {
    let mut ds = Dataset::new();
    ds.push_text("مرحبا ، كيف الحال ؟", "كيف حالك ؟", Label::Similar, Provenance::Original);
    ds.push_text("كيف حالك ؟", "ما اسمك ؟", Label::NotSimilar, Provenance::Original);
    let aug = augment_all(&ds, Stages::ALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aug.tsv");
    write_pairs_tsv(&path, &aug.dataset).unwrap();
    let back = read_pairs_tsv(&path).unwrap();
    assert_eq!(back.pairs, aug.dataset.pairs);
    assert_eq!(back.questions, aug.dataset.questions);
}

#[test]
fn generator_exercises_every_rule() {
    let (mut derived, mut conflicts, mut mirrors, mut self_pairs) = (0, 0, 0, 0);
    for seed in 0..500 {
        let ds = dataset(seed);
        let out = apply_transitive(&ds.pairs).unwrap();
        derived += usize::from(out.pairs.len() > ds.len());
        conflicts += usize::from(!out.conflicts.is_empty());
        let t = triples(&ds.pairs);
        mirrors += usize::from(t.iter().any(|&(a, b, l)| a != b && t.contains(&(b, a, l))));
        self_pairs += usize::from(t.iter().any(|&(a, b, _)| a == b));
    }
    eprintln!("derived {derived} conflicts {conflicts} mirrors {mirrors} self {self_pairs}");
    assert!(derived > 100 && conflicts > 50 && mirrors > 50 && self_pairs > 50);
}
