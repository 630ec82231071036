//! Experiment designs: the sequence lists for linear-inversion GST, germ-power
//! (long-sequence) GST and predictive testing, plus fiducial diagnostics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GstError, Result};
use crate::model::{validate_label, GateSet, Sequence};

/// What an experiment is for; drives matrix assembly in LGST and averaging
/// in scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Spam,
    Fid,
    FidPair,
    Sandwich,
    GermPower,
    TestPartial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: String,
    pub sequence: Sequence,
    pub role: Role,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Experiment {
    fn new(id: String, sequence: Sequence, role: Role, meta: &[(&str, String)]) -> Self {
        Experiment {
            id,
            sequence,
            role,
            meta: meta
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    /// Copy of another experiment with an extra gate at the measurement end.
    pub fn is_appended(&self) -> bool {
        self.meta.contains_key("appended")
    }

    pub fn meta_usize(&self, key: &str) -> Result<usize> {
        let raw = self.meta.get(key).ok_or_else(|| {
            GstError::InconsistentFiducials(format!("experiment `{}` lacks `{key}`", self.id))
        })?;
        raw.parse().map_err(|_| {
            GstError::InconsistentFiducials(format!(
                "experiment `{}` has non-integer `{key}` = `{raw}`",
                self.id
            ))
        })
    }

    /// Identity used for deduplication. Test partials are identified by their
    /// base sequence and length so that every base keeps a full set of
    /// partials even when prefixes coincide (all `L = 0` partials are empty).
    fn identity(&self) -> (Role, String) {
        match self.role {
            Role::TestPartial => (
                self.role,
                format!(
                    "{}#{}",
                    self.meta.get("base").map(String::as_str).unwrap_or(""),
                    self.meta.get("L").map(String::as_str).unwrap_or("")
                ),
            ),
            _ => (self.role, self.sequence.key()),
        }
    }
}

/// Ordered, deduplicated list of experiments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentDesign {
    experiments: Vec<Experiment>,
    seen: HashMap<(Role, String), usize>,
    ids: HashSet<String>,
}

impl ExperimentDesign {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append unless an entry with the same role and sequence already exists.
    /// Returns the index of the stored entry and whether it was inserted.
    pub fn push(&mut self, exp: Experiment) -> Result<(usize, bool)> {
        let identity = exp.identity();
        if let Some(&idx) = self.seen.get(&identity) {
            return Ok((idx, false));
        }
        if !self.ids.insert(exp.id.clone()) {
            return Err(GstError::InvalidArgument(format!(
                "duplicate experiment id `{}`",
                exp.id
            )));
        }
        self.seen.insert(identity, self.experiments.len());
        self.experiments.push(exp);
        Ok((self.experiments.len() - 1, true))
    }

    pub fn experiments(&self) -> &[Experiment] {
        &self.experiments
    }

    pub fn len(&self) -> usize {
        self.experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experiment> {
        self.experiments.iter()
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &Experiment> {
        self.experiments.iter().filter(move |e| e.role == role)
    }

    pub fn contains(&self, role: Role, seq: &Sequence) -> bool {
        self.seen.contains_key(&(role, seq.key()))
    }

    /// Distinct sequences in first-appearance order.
    pub fn unique_sequences(&self) -> Vec<Sequence> {
        let mut seen = HashSet::new();
        self.experiments
            .iter()
            .filter(|e| seen.insert(e.sequence.key()))
            .map(|e| e.sequence.clone())
            .collect()
    }

    /// Union of two designs (entries of `other` that are not already present).
    pub fn extend(&mut self, other: &ExperimentDesign) -> Result<()> {
        for e in other.iter() {
            self.push(e.clone())?;
        }
        Ok(())
    }

    /// Sub-design containing only the given roles.
    pub fn restrict(&self, roles: &[Role]) -> ExperimentDesign {
        let mut out = ExperimentDesign::new();
        for e in self.iter().filter(|e| roles.contains(&e.role)) {
            out.push(e.clone()).expect("ids already unique");
        }
        out
    }

    /// Recover the fiducial list from the `FID` entries. A `FID` entry may
    /// carry several comma-separated indices when identical fiducials were
    /// collapsed.
    pub fn fiducials(&self) -> Result<FiducialSet> {
        let mut by_index: BTreeMap<usize, Sequence> = BTreeMap::new();
        for e in self.with_role(Role::Fid).filter(|e| !e.is_appended()) {
            let raw = e.meta.get("j").ok_or_else(|| {
                GstError::InconsistentFiducials(format!("FID entry `{}` lacks `j`", e.id))
            })?;
            for part in raw.split(',') {
                let j: usize = part.trim().parse().map_err(|_| {
                    GstError::InconsistentFiducials(format!("bad fiducial index `{part}`"))
                })?;
                if by_index.insert(j, e.sequence.clone()).is_some() {
                    return Err(GstError::InconsistentFiducials(format!(
                        "fiducial index {j} appears twice"
                    )));
                }
            }
        }
        if by_index.is_empty() {
            return Err(GstError::EmptyFiducials);
        }
        if by_index.keys().enumerate().any(|(pos, j)| pos != *j) {
            return Err(GstError::InconsistentFiducials(
                "fiducial indices are not contiguous from 0".into(),
            ));
        }
        FiducialSet::new(by_index.into_values().collect())
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.experiments {
            out.push_str(&serde_json::to_string(e).expect("experiment serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut design = ExperimentDesign::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let exp: Experiment =
                serde_json::from_str(line).map_err(|err| GstError::MalformedRecord {
                    line: i + 1,
                    reason: err.to_string(),
                })?;
            design.push(exp)?;
        }
        Ok(design)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Short gate strings `F_k` that turn the single preparation and measurement
/// into spanning sets of effective states and effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiducialSet(Vec<Sequence>);

impl FiducialSet {
    pub fn new(fiducials: Vec<Sequence>) -> Result<Self> {
        if fiducials.is_empty() {
            return Err(GstError::EmptyFiducials);
        }
        Ok(FiducialSet(fiducials))
    }

    /// One single-gate fiducial per label, `F_k = G_k`.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::new(labels.iter().map(|l| Sequence::new([l.as_ref()])).collect())
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &Sequence {
        &self.0[i]
    }
}

fn check_labels<S: AsRef<str>>(labels: &[S]) -> Result<()> {
    labels.iter().try_for_each(|l| validate_label(l.as_ref()))
}

/// `F_j`, `F_j F_k` and `F_j G_i F_k` for every fiducial pair and gate.
/// Within a sequence `F_k` comes first, then `G_i`, then `F_j`.
pub fn lgst_design<S: AsRef<str>>(
    gate_labels: &[S],
    fiducials: &FiducialSet,
) -> Result<ExperimentDesign> {
    check_labels(gate_labels)?;
    if fiducials.is_empty() {
        return Err(GstError::EmptyFiducials);
    }
    let mut design = ExperimentDesign::new();
    let n = fiducials.len();

    for j in 0..n {
        let exp = Experiment::new(
            format!("fid:{j}"),
            fiducials.get(j).clone(),
            Role::Fid,
            &[("j", j.to_string())],
        );
        let (idx, inserted) = design.push(exp)?;
        if !inserted {
            // Identical fiducial: keep one entry that answers for both indices.
            let entry = &mut design.experiments[idx];
            let joined = format!("{},{j}", entry.meta["j"]);
            entry.meta.insert("j".into(), joined);
        }
    }
    for j in 0..n {
        for k in 0..n {
            design.push(Experiment::new(
                format!("pair:{j}:{k}"),
                fiducials.get(k).then(fiducials.get(j)),
                Role::FidPair,
                &[("j", j.to_string()), ("k", k.to_string())],
            ))?;
        }
    }
    for gate in gate_labels {
        let gate = gate.as_ref();
        let g = Sequence::new([gate]);
        for j in 0..n {
            for k in 0..n {
                design.push(Experiment::new(
                    format!("sandwich:{j}:{gate}:{k}"),
                    fiducials.get(k).then(&g).then(fiducials.get(j)),
                    Role::Sandwich,
                    &[
                        ("j", j.to_string()),
                        ("gate", gate.to_string()),
                        ("k", k.to_string()),
                    ],
                ))?;
            }
        }
    }
    Ok(design)
}

fn spam_experiment() -> Experiment {
    Experiment::new("spam".into(), Sequence::empty(), Role::Spam, &[])
}

/// The LGST experiments plus the empty SPAM sequence.
pub fn short_design<S: AsRef<str>>(
    gate_labels: &[S],
    fiducials: &FiducialSet,
) -> Result<ExperimentDesign> {
    let mut design = ExperimentDesign::new();
    design.push(spam_experiment())?;
    design.extend(&lgst_design(gate_labels, fiducials)?)?;
    Ok(design)
}

/// Short design plus `F_j G_i^p F_k` for every power, optionally doubled by
/// appending `append_gate` at the measurement end of every experiment.
pub fn germ_power_design<S: AsRef<str>>(
    gate_labels: &[S],
    fiducials: &FiducialSet,
    powers: &[usize],
    append_gate: Option<&str>,
) -> Result<ExperimentDesign> {
    if let Some(&bad) = powers.iter().find(|&&p| p == 0) {
        return Err(GstError::InvalidArgument(format!(
            "germ powers must be positive, got {bad}"
        )));
    }
    let mut design = short_design(gate_labels, fiducials)?;
    let n = fiducials.len();
    for &p in powers {
        for gate in gate_labels {
            let gate = gate.as_ref();
            let germ = Sequence::new([gate]).repeat(p);
            for j in 0..n {
                for k in 0..n {
                    design.push(Experiment::new(
                        format!("germ:{j}:{gate}^{p}:{k}"),
                        fiducials.get(k).then(&germ).then(fiducials.get(j)),
                        Role::GermPower,
                        &[
                            ("j", j.to_string()),
                            ("germ", gate.to_string()),
                            ("p", p.to_string()),
                            ("k", k.to_string()),
                        ],
                    ))?;
                }
            }
        }
    }
    if let Some(extra) = append_gate {
        validate_label(extra)?;
        let tail = Sequence::new([extra]);
        let base: Vec<Experiment> = design.experiments().to_vec();
        for e in base {
            let mut meta = e.meta.clone();
            meta.insert("appended".into(), extra.to_string());
            design.push(Experiment {
                id: format!("{}+{extra}", e.id),
                sequence: e.sequence.then(&tail),
                role: e.role,
                meta,
            })?;
        }
    }
    Ok(design)
}

/// Test sequences of `length` gates: one uniform repetition per label, one
/// alternation of the second and third labels, and `num_random` seeded
/// uniformly random strings. Every base contributes its partials `L = 0..=length`.
pub fn test_design<S: AsRef<str>>(
    gate_labels: &[S],
    length: usize,
    num_random: usize,
    seed: u64,
) -> Result<ExperimentDesign> {
    check_labels(gate_labels)?;
    if gate_labels.len() < 3 {
        return Err(GstError::TooFewGates {
            needed: 3,
            found: gate_labels.len(),
        });
    }
    if length == 0 {
        return Err(GstError::InvalidArgument(
            "test length must be at least 1".into(),
        ));
    }
    let labels: Vec<&str> = gate_labels.iter().map(AsRef::as_ref).collect();
    let mut bases: Vec<(Sequence, Vec<(&str, String)>)> = Vec::new();
    for label in &labels {
        bases.push((
            Sequence::new([*label]).repeat(length),
            vec![("kind", "uniform".into()), ("gate", label.to_string())],
        ));
    }
    let alternating = Sequence::new((0..length).map(|i| labels[1 + i % 2]));
    bases.push((alternating, vec![("kind", "alternating".into())]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..num_random {
        let seq = Sequence::new((0..length).map(|_| labels[rng.random_range(0..labels.len())]));
        bases.push((
            seq,
            vec![("kind", "random".into()), ("seed", seed.to_string())],
        ));
    }

    let mut design = ExperimentDesign::new();
    for (b, (base, extra)) in bases.iter().enumerate() {
        for l in 0..=length {
            let mut meta = vec![("base", b.to_string()), ("L", l.to_string())];
            meta.extend(extra.iter().cloned());
            design.push(Experiment::new(
                format!("test:{b}:{l}"),
                base.prefix(l),
                Role::TestPartial,
                &meta,
            ))?;
        }
    }
    Ok(design)
}

/// Relative singular-value threshold used for numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Spectral summary of a fiducial Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Completeness {
    pub gram: DMatrix<f64>,
    pub min_singular_value: f64,
    pub rank: usize,
}

/// Model-predicted Gram matrix `gram[j][k] = <<E| F_j F_k |rho>>`.
pub fn model_gram(gs: &GateSet, fiducials: &FiducialSet) -> Result<DMatrix<f64>> {
    let n = fiducials.len();
    let mut gram = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            gram[(j, k)] = gs.probability(&fiducials.get(k).then(fiducials.get(j)))?;
        }
    }
    Ok(gram)
}

pub(crate) fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

pub(crate) fn numerical_rank(sv_desc: &[f64]) -> usize {
    let top = sv_desc.first().cloned().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sv_desc
        .iter()
        .filter(|s| **s > RANK_THRESHOLD * top)
        .count()
}

/// Minimum singular value and numerical rank of the model Gram matrix.
pub fn completeness_diagnostic(gs: &GateSet, fiducials: &FiducialSet) -> Result<Completeness> {
    let gram = model_gram(gs, fiducials)?;
    let sv = singular_values_desc(&gram);
    Ok(Completeness {
        min_singular_value: sv.last().cloned().unwrap_or(0.0),
        rank: numerical_rank(&sv),
        gram,
    })
}

/// The `d^2`-th largest singular value of the Gram matrix of a subset: the
/// smallest singular value that must be nonzero for informational
/// completeness. Equals the minimum singular value for square subsets.
fn completeness_score(gram: &DMatrix<f64>, keep: &[usize], required: usize) -> f64 {
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |r, c| gram[(keep[r], keep[c])]);
    let sv = singular_values_desc(&sub);
    sv.get(required - 1).cloned().unwrap_or(0.0)
}

/// Greedily cast out the fiducial whose removal leaves the best-conditioned
/// Gram matrix, until `target_count` remain. Ties go to the lowest index.
pub fn select_fiducials(
    gs: &GateSet,
    candidates: &FiducialSet,
    target_count: usize,
) -> Result<FiducialSet> {
    let required = gs.hs_dim();
    if target_count < required || target_count > candidates.len() {
        return Err(GstError::InvalidTargetCount {
            target: target_count,
            candidates: candidates.len(),
            minimum: required,
        });
    }
    let gram = model_gram(gs, candidates)?;
    let mut keep: Vec<usize> = (0..candidates.len()).collect();
    while keep.len() > target_count {
        let mut best: Option<(usize, f64)> = None;
        for pos in 0..keep.len() {
            let mut trial = keep.clone();
            trial.remove(pos);
            let score = completeness_score(&gram, &trial, required);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((pos, score));
            }
        }
        let (pos, _) = best.expect("at least one candidate");
        keep.remove(pos);
    }
    let score = completeness_score(&gram, &keep, required);
    let top = singular_values_desc(&gram).first().cloned().unwrap_or(0.0);
    let rank = numerical_rank(&singular_values_desc(&DMatrix::from_fn(
        keep.len(),
        keep.len(),
        |r, c| gram[(keep[r], keep[c])],
    )));
    if score <= RANK_THRESHOLD * top.max(f64::MIN_POSITIVE) {
        return Err(GstError::InformationallyIncomplete {
            rank,
            required,
            min_singular_value: score,
        });
    }
    FiducialSet::new(keep.iter().map(|&i| candidates.get(i).clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{ideal_targets, TARGET_LABELS};

    fn default_fiducials() -> FiducialSet {
        FiducialSet::from_labels(&TARGET_LABELS).unwrap()
    }

    #[test]
    fn lgst_design_counts() {
        let d = lgst_design(&TARGET_LABELS, &default_fiducials()).unwrap();
        assert_eq!(d.len(), 84);
        let short = short_design(&TARGET_LABELS, &default_fiducials()).unwrap();
        assert_eq!(short.len(), 85);
        let one = lgst_design(&["G1"], &FiducialSet::from_labels(&["G1"]).unwrap()).unwrap();
        assert_eq!(one.len(), 3);
    }

    #[test]
    fn lgst_design_sequence_order() {
        let d = lgst_design(&TARGET_LABELS, &default_fiducials()).unwrap();
        let e = d.iter().find(|e| e.id == "sandwich:0:G3:2").unwrap();
        // F_k (G3) first, then the gate, then F_j (G1).
        assert_eq!(e.sequence, Sequence::new(["G3", "G3", "G1"]));
        assert_eq!(e.meta["gate"], "G3");
        let p = d.iter().find(|e| e.id == "pair:1:3").unwrap();
        assert_eq!(p.sequence, Sequence::new(["G4", "G2"]));
    }

    #[test]
    fn empty_fiducials_rejected() {
        assert!(matches!(
            FiducialSet::new(vec![]),
            Err(GstError::EmptyFiducials)
        ));
    }

    #[test]
    fn germ_design_counts() {
        let f = default_fiducials();
        let powers = [2, 4, 8, 16, 32, 64, 128];
        assert_eq!(
            germ_power_design(&TARGET_LABELS, &f, &powers, None)
                .unwrap()
                .len(),
            533
        );
        assert_eq!(
            germ_power_design(&TARGET_LABELS, &f, &powers, Some("G4"))
                .unwrap()
                .len(),
            1066
        );
        assert_eq!(
            germ_power_design(&TARGET_LABELS, &f, &[], None)
                .unwrap()
                .len(),
            85
        );
        assert!(germ_power_design(&TARGET_LABELS, &f, &[0], None).is_err());
    }

    #[test]
    fn germ_sequence_lengths() {
        let f = default_fiducials();
        let d = germ_power_design(&TARGET_LABELS, &f, &[2, 8], Some("G4")).unwrap();
        for e in d.with_role(Role::GermPower) {
            let p = e.meta_usize("p").unwrap();
            let extra = usize::from(e.meta.contains_key("appended"));
            assert_eq!(e.sequence.len(), 1 + p + 1 + extra);
        }
    }

    #[test]
    fn test_design_counts_and_determinism() {
        let d = test_design(&TARGET_LABELS, 100, 5, 11).unwrap();
        assert_eq!(d.len(), 1010);
        let again = test_design(&TARGET_LABELS, 100, 5, 11).unwrap();
        assert_eq!(d.to_jsonl(), again.to_jsonl());
        let other = test_design(&TARGET_LABELS, 100, 5, 12).unwrap();
        assert_ne!(d.to_jsonl(), other.to_jsonl());

        let tiny = test_design(&TARGET_LABELS, 1, 0, 0).unwrap();
        assert_eq!(tiny.len(), 5 * 2);
        for e in tiny.iter() {
            let l = e.meta_usize("L").unwrap();
            assert_eq!(e.sequence.len(), l);
        }
        assert!(matches!(
            test_design(&["G1", "G2"], 10, 0, 0),
            Err(GstError::TooFewGates { .. })
        ));
    }

    #[test]
    fn alternating_base_uses_second_and_third_labels() {
        let d = test_design(&TARGET_LABELS, 4, 0, 0).unwrap();
        let e = d.iter().find(|e| e.id == "test:4:4").unwrap();
        assert_eq!(e.sequence, Sequence::new(["G2", "G3", "G2", "G3"]));
    }

    #[test]
    fn design_jsonl_round_trip() {
        let d = germ_power_design(&TARGET_LABELS, &default_fiducials(), &[2], Some("G4")).unwrap();
        let back = ExperimentDesign::from_jsonl(&d.to_jsonl()).unwrap();
        assert_eq!(back.experiments(), d.experiments());
        let line = d.to_jsonl().lines().next().unwrap().to_string();
        assert_eq!(
            line,
            r#"{"id":"spam","sequence":[],"role":"SPAM","meta":{}}"#
        );
    }

    #[test]
    fn fiducials_recovered_from_design() {
        let d = short_design(&TARGET_LABELS, &default_fiducials()).unwrap();
        assert_eq!(d.fiducials().unwrap(), default_fiducials());
        let dup = FiducialSet::from_labels(&["G1", "G2", "G2", "G3"]).unwrap();
        let d = lgst_design(&TARGET_LABELS, &dup).unwrap();
        assert_eq!(d.fiducials().unwrap(), dup);
    }

    #[test]
    fn completeness_of_target_fiducials() {
        let gs = ideal_targets();
        let c = completeness_diagnostic(&gs, &default_fiducials()).unwrap();
        assert_eq!(c.rank, 4);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.5, 0.5, 1.0, 0.5, 1.0, 0.5, 0.5, 0.5, 0.5, 1.0, 0.5, 1.0, 0.5, 0.5, 0.0,
            ],
        );
        assert!((c.gram - expected).amax() < 1e-14);
        assert!(c.min_singular_value > 0.1);
    }

    #[test]
    fn degenerate_fiducials_lose_rank() {
        let gs = ideal_targets();
        let same = FiducialSet::from_labels(&["G1", "G1", "G1", "G1"]).unwrap();
        // Ideal SPAM is orthogonal, so every entry <<E|rho>> vanishes.
        assert_eq!(completeness_diagnostic(&gs, &same).unwrap().rank, 0);
        let noisy = crate::targets::noisy_targets(0.01, 0.005);
        assert_eq!(completeness_diagnostic(&noisy, &same).unwrap().rank, 1);
        let z_axis = FiducialSet::new(vec![
            Sequence::new(["G1"]),
            Sequence::new(["G4"]),
            Sequence::new(["G4", "G4"]),
            Sequence::new(["G1"]),
        ])
        .unwrap();
        assert!(completeness_diagnostic(&gs, &z_axis).unwrap().rank <= 2);
    }

    #[test]
    fn select_keeps_complete_set_and_drops_duplicate() {
        let gs = ideal_targets();
        let f = default_fiducials();
        assert_eq!(select_fiducials(&gs, &f, 4).unwrap(), f);

        let with_dup = FiducialSet::from_labels(&["G1", "G2", "G2", "G3", "G4"]).unwrap();
        let kept = select_fiducials(&gs, &with_dup, 4).unwrap();
        assert_eq!(kept, f);

        assert!(matches!(
            select_fiducials(&gs, &f, 3),
            Err(GstError::InvalidTargetCount { .. })
        ));
        let flat = FiducialSet::from_labels(&["G1", "G1", "G4", "G4"]).unwrap();
        assert!(matches!(
            select_fiducials(&gs, &flat, 4),
            Err(GstError::InformationallyIncomplete { .. })
        ));
    }

    #[test]
    fn greedy_selection_matches_exhaustive_search() {
        let gs = crate::targets::noisy_targets(0.02, 0.01);
        let candidates = FiducialSet::new(vec![
            Sequence::new(["G1"]),
            Sequence::new(["G2"]),
            Sequence::new(["G3"]),
            Sequence::new(["G4"]),
            Sequence::new(["G2", "G3"]),
            Sequence::new(["G3", "G3", "G2"]),
        ])
        .unwrap();
        let kept = select_fiducials(&gs, &candidates, 4).unwrap();
        let kept_min = completeness_diagnostic(&gs, &kept)
            .unwrap()
            .min_singular_value;

        // Exhaustive oracle over all 15 four-element subsets.
        let mut best = 0.0f64;
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    for d in c + 1..6 {
                        let subset = FiducialSet::new(
                            [a, b, c, d]
                                .iter()
                                .map(|&i| candidates.get(i).clone())
                                .collect(),
                        )
                        .unwrap();
                        let m = completeness_diagnostic(&gs, &subset)
                            .unwrap()
                            .min_singular_value;
                        best = best.max(m);
                    }
                }
            }
        }
        assert!(
            (kept_min - best).abs() < 1e-12,
            "greedy {kept_min} vs exhaustive {best}"
        );
    }
}
