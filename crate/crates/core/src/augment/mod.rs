//! Dataset expansion by relational closure over labeled question pairs.
//!
//! Three rules are applied in order, each as a pure dataset-to-dataset stage:
//!
//! 1. **Transitive** (one pass): `A~B, B~C ⇒ A~C` and `A~B, B≁C ⇒ A≁C`.
//!    The shared question `B` is always the second member of the positive
//!    premise; the second premise may mention `B` on either side.
//! 2. **Symmetric**: every `(A, B, l)` gets a mirrored `(B, A, l)`.
//! 3. **Reflexive**: every known question `Q` gets `(Q, Q, 1)`.
//!
//! Stages never remove or relabel an existing pair. When a derived label
//! contradicts an existing pair the existing label wins; when two derivations
//! disagree with each other the pair is not emitted at all. Both cases are
//! returned as [`Conflict`] records.

mod tsv;

pub use tsv::{read_pair_rows, read_pairs_tsv, write_pair_rows, write_pairs_tsv, PairRow};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense id of a canonical (preprocessed) question string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuestionId(pub u32);

impl QuestionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    NotSimilar,
    Similar,
}

impl Label {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::NotSimilar),
            1 => Ok(Label::Similar),
            _ => Err(Error::InvalidInput(format!("label must be 0 or 1, got {v}"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::NotSimilar => 0,
            Label::Similar => 1,
        }
    }

    pub fn is_similar(self) -> bool {
        self == Label::Similar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Transitive,
    Symmetric,
    Reflexive,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Transitive => "transitive",
            Provenance::Symmetric => "symmetric",
            Provenance::Reflexive => "reflexive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Provenance::Original),
            "transitive" => Ok(Provenance::Transitive),
            "symmetric" => Ok(Provenance::Symmetric),
            "reflexive" => Ok(Provenance::Reflexive),
            _ => Err(Error::InvalidInput(format!("unknown provenance {s:?}"))),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub q1: QuestionId,
    pub q2: QuestionId,
    pub label: Label,
    pub provenance: Provenance,
}

impl LabeledPair {
    pub fn new(q1: QuestionId, q2: QuestionId, label: Label, provenance: Provenance) -> Self {
        LabeledPair {
            q1,
            q2,
            label,
            provenance,
        }
    }

    pub fn original(q1: u32, q2: u32, label: Label) -> Self {
        Self::new(QuestionId(q1), QuestionId(q2), label, Provenance::Original)
    }

    pub fn key(&self) -> (QuestionId, QuestionId) {
        (self.q1, self.q2)
    }

    fn unordered_key(&self) -> (QuestionId, QuestionId) {
        unordered(self.q1, self.q2)
    }
}

fn unordered(a: QuestionId, b: QuestionId) -> (QuestionId, QuestionId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Bidirectional map between canonical question text and [`QuestionId`].
/// Ids are assigned densely in order of first insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuestionIndex {
    texts: Vec<String>,
    ids: HashMap<String, QuestionId>,
}

impl QuestionIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, text: &str) -> QuestionId {
        if let Some(&id) = self.ids.get(text) {
            return id;
        }
        let id = QuestionId(self.texts.len() as u32);
        self.texts.push(text.to_owned());
        self.ids.insert(text.to_owned(), id);
        id
    }

    pub fn get(&self, text: &str) -> Option<QuestionId> {
        self.ids.get(text).copied()
    }

    pub fn text(&self, id: QuestionId) -> &str {
        &self.texts[id.index()]
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = QuestionId> {
        (0..self.texts.len() as u32).map(QuestionId)
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }
}

/// Labeled pairs together with the question strings they reference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub questions: QuestionIndex,
    pub pairs: Vec<LabeledPair>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a pair given by question text, interning both questions.
    pub fn push_text(&mut self, q1: &str, q2: &str, label: Label, provenance: Provenance) {
        let a = self.questions.intern(q1);
        let b = self.questions.intern(q2);
        self.pairs.push(LabeledPair::new(a, b, label, provenance));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair_texts(&self, pair: &LabeledPair) -> (&str, &str) {
        (self.questions.text(pair.q1), self.questions.text(pair.q2))
    }

    pub fn tally(&self) -> StageTally {
        StageTally::of(&self.pairs)
    }
}

/// Rejects duplicate ordered pairs and unordered pairs carrying two labels.
pub fn validate_pairs(pairs: &[LabeledPair]) -> Result<()> {
    let mut seen: HashMap<(QuestionId, QuestionId), Label> = HashMap::with_capacity(pairs.len());
    let mut ordered = std::collections::HashSet::with_capacity(pairs.len());
    for (row, p) in pairs.iter().enumerate() {
        if !ordered.insert(p.key()) {
            return Err(Error::InvalidDataset(format!(
                "pair ({}, {}) appears twice (row {row})",
                p.q1.0, p.q2.0
            )));
        }
        if let Some(&prev) = seen.get(&p.unordered_key()) {
            if prev != p.label {
                return Err(Error::InvalidDataset(format!(
                    "questions {} and {} carry both labels (row {row})",
                    p.q1.0, p.q2.0
                )));
            }
        } else {
            seen.insert(p.unordered_key(), p.label);
        }
    }
    Ok(())
}

/// A transitive derivation that was not emitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub q1: QuestionId,
    pub q2: QuestionId,
    /// Label already present in the dataset, if any.
    pub existing: Option<Label>,
    /// Every `(via, label)` derivation that reached this pair.
    pub derivations: Vec<(QuestionId, Label)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitiveOutcome {
    pub pairs: Vec<LabeledPair>,
    pub conflicts: Vec<Conflict>,
}

#[derive(Default)]
struct Candidate {
    labels: BTreeSet<Label>,
    orientations: BTreeSet<(QuestionId, QuestionId)>,
    derivations: Vec<(QuestionId, Label)>,
}

/// Single-pass transitive derivation.
///
/// For every positive pair `(A, B)` and every pair mentioning `B` as
/// `(B, C, l)` or `(C, B, l)`, the pair `(A, C, l)` is derived unless `A = C`
/// or `{A, C}` is already labeled. Derived pairs are appended after the input
/// in ascending `(q1, q2)` order. If both orientations of a new pair are
/// derived, the one with the smaller first id is kept.
pub fn apply_transitive(pairs: &[LabeledPair]) -> Result<TransitiveOutcome> {
    validate_pairs(pairs)?;

    let mut existing: HashMap<(QuestionId, QuestionId), Label> = HashMap::with_capacity(pairs.len());
    let mut neighbours: HashMap<QuestionId, Vec<(QuestionId, Label)>> = HashMap::new();
    for p in pairs {
        existing.insert(p.unordered_key(), p.label);
        neighbours.entry(p.q1).or_default().push((p.q2, p.label));
        if p.q1 != p.q2 {
            neighbours.entry(p.q2).or_default().push((p.q1, p.label));
        }
    }

    let mut candidates: BTreeMap<(QuestionId, QuestionId), Candidate> = BTreeMap::new();
    let mut clashes: BTreeMap<(QuestionId, QuestionId), Conflict> = BTreeMap::new();

    for premise in pairs.iter().filter(|p| p.label.is_similar()) {
        let (a, b) = (premise.q1, premise.q2);
        let Some(partners) = neighbours.get(&b) else {
            continue;
        };
        for &(c, label) in partners {
            if a == c {
                continue;
            }
            let key = unordered(a, c);
            if let Some(&old) = existing.get(&key) {
                if old != label {
                    let entry = clashes.entry(key).or_insert_with(|| Conflict {
                        q1: key.0,
                        q2: key.1,
                        existing: Some(old),
                        derivations: Vec::new(),
                    });
                    entry.derivations.push((b, label));
                }
                continue;
            }
            let cand = candidates.entry(key).or_default();
            cand.labels.insert(label);
            cand.orientations.insert((a, c));
            cand.derivations.push((b, label));
        }
    }

    let mut derived = Vec::new();
    for (key, cand) in candidates {
        if cand.labels.len() > 1 {
            clashes.insert(
                key,
                Conflict {
                    q1: key.0,
                    q2: key.1,
                    existing: None,
                    derivations: cand.derivations,
                },
            );
            continue;
        }
        let label = *cand.labels.iter().next().expect("candidate has a label");
        let (q1, q2) = if cand.orientations.len() == 1 {
            *cand.orientations.iter().next().unwrap()
        } else {
            key
        };
        derived.push(LabeledPair::new(q1, q2, label, Provenance::Transitive));
    }
    derived.sort_by_key(LabeledPair::key);

    let conflicts: Vec<Conflict> = clashes.into_values().collect();
    if !conflicts.is_empty() {
        log::debug!("transitive stage dropped {} conflicting derivations", conflicts.len());
    }

    let mut out = Vec::with_capacity(pairs.len() + derived.len());
    out.extend_from_slice(pairs);
    out.extend(derived);
    Ok(TransitiveOutcome {
        pairs: out,
        conflicts,
    })
}

/// Appends the mirror `(B, A, l)` of every non-self pair whose mirror is
/// missing. Input order is preserved.
pub fn apply_symmetric(pairs: &[LabeledPair]) -> Result<Vec<LabeledPair>> {
    validate_pairs(pairs)?;
    let mut present: std::collections::HashSet<(QuestionId, QuestionId)> =
        pairs.iter().map(LabeledPair::key).collect();
    let mut out = pairs.to_vec();
    for p in pairs {
        if p.q1 != p.q2 && present.insert((p.q2, p.q1)) {
            out.push(LabeledPair::new(p.q2, p.q1, p.label, Provenance::Symmetric));
        }
    }
    Ok(out)
}

/// Appends `(Q, Q, 1)` for every question of the index not yet paired with
/// itself, in id order.
pub fn apply_reflexive(pairs: &[LabeledPair], questions: &QuestionIndex) -> Vec<LabeledPair> {
    let self_paired: std::collections::HashSet<QuestionId> =
        pairs.iter().filter(|p| p.q1 == p.q2).map(|p| p.q1).collect();
    let mut out = pairs.to_vec();
    out.extend(
        questions
            .ids()
            .filter(|q| !self_paired.contains(q))
            .map(|q| LabeledPair::new(q, q, Label::Similar, Provenance::Reflexive)),
    );
    out
}

/// Which stages [`augment_all`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub transitive: bool,
    pub symmetric: bool,
    pub reflexive: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        transitive: true,
        symmetric: true,
        reflexive: true,
    };

    /// Parses a comma-separated list such as `t,s,r` (or full stage names).
    /// An empty string selects no stage.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut stages = Stages {
            transitive: false,
            symmetric: false,
            reflexive: false,
        };
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match part {
                "t" | "transitive" => stages.transitive = true,
                "s" | "symmetric" => stages.symmetric = true,
                "r" | "reflexive" => stages.reflexive = true,
                other => {
                    return Err(Error::InvalidInput(format!("unknown augmentation stage {other:?}")))
                }
            }
        }
        Ok(stages)
    }
}

impl Default for Stages {
    fn default() -> Self {
        Stages::ALL
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTally {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
}

impl StageTally {
    pub fn of(pairs: &[LabeledPair]) -> Self {
        let positive = pairs.iter().filter(|p| p.label.is_similar()).count();
        StageTally {
            total: pairs.len(),
            positive,
            negative: pairs.len() - positive,
        }
    }
}

/// Dataset size after each stage: O, O+T, O+T+S, O+T+S+R. A skipped stage
/// repeats the previous tally.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub original: StageTally,
    pub transitive: StageTally,
    pub symmetric: StageTally,
    pub reflexive: StageTally,
}

impl StageCounts {
    pub fn totals(&self) -> [usize; 4] {
        [
            self.original.total,
            self.transitive.total,
            self.symmetric.total,
            self.reflexive.total,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub dataset: Dataset,
    pub stage_counts: StageCounts,
    pub stages: Stages,
    pub conflicts: Vec<Conflict>,
}

/// JSON summary written next to an augmented TSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub stages: Stages,
    pub stage_counts: StageCounts,
    pub distinct_questions: usize,
    pub conflicts: usize,
}

impl AugmentedDataset {
    pub fn summary(&self) -> AugmentSummary {
        AugmentSummary {
            stages: self.stages,
            stage_counts: self.stage_counts,
            distinct_questions: self.dataset.questions.len(),
            conflicts: self.conflicts.len(),
        }
    }
}

/// Runs the selected stages in the fixed order transitive, symmetric,
/// reflexive and records the tally after each.
pub fn augment_all(original: &Dataset, stages: Stages) -> Result<AugmentedDataset> {
    validate_pairs(&original.pairs)?;
    let mut pairs = original.pairs.clone();
    let mut conflicts = Vec::new();
    let o = StageTally::of(&pairs);

    if stages.transitive {
        let outcome = apply_transitive(&pairs)?;
        pairs = outcome.pairs;
        conflicts = outcome.conflicts;
    }
    let t = StageTally::of(&pairs);

    if stages.symmetric {
        pairs = apply_symmetric(&pairs)?;
    }
    let s = StageTally::of(&pairs);

    if stages.reflexive {
        pairs = apply_reflexive(&pairs, &original.questions);
    }
    let r = StageTally::of(&pairs);

    Ok(AugmentedDataset {
        dataset: Dataset {
            questions: original.questions.clone(),
            pairs,
        },
        stage_counts: StageCounts {
            original: o,
            transitive: t,
            symmetric: s,
            reflexive: r,
        },
        stages,
        conflicts,
    })
}
