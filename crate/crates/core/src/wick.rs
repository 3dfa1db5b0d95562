//! Symbolic second-quantization algebra for normal-form operator words.
//!
//! Words have the shape (all annihilators)(all creators) read left to right,
//! with the vacuum on both sides. The vacuum expectation expands into a sum
//! over perfect matchings (pairings) of creators with annihilators; repeated
//! labels are merged by `collapse_repeated_labels` with multiplicities added.
//! `brute_force_vev` evaluates the same expectation on a truncated Fock space
//! of discrete modes and serves as the independent oracle for the expansion.
//!
//! Convention: a pair is stored as (creator label c, annihilator label a) and
//! its eventual numerical value is a function of the separation c - a. In the
//! discrete oracle the contraction is the bilinear overlap sum_i c_i * a_i
//! (no conjugation), matching [a_i, a_j^+] = delta_ij.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

/// Identifies a spacetime point in an operator word. Labels compare equal
/// only when base symbol, optional spatial offset, and time all match.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PointLabel {
    base: String,
    spatial_offset: Option<OffsetVec>,
    time: TotalF64,
}

/// f64 wrapper ordered by total_cmp; constructors keep values finite and
/// normalize -0.0 so derived equality is an equivalence relation.
#[derive(Clone, Copy, Debug, PartialEq)]
struct TotalF64(f64);

impl Eq for TotalF64 {}
impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct OffsetVec(Vec<TotalF64>);

fn canon(x: f64) -> TotalF64 {
    assert!(x.is_finite(), "point labels must have finite coordinates");
    TotalF64(if x == 0.0 { 0.0 } else { x })
}

impl PointLabel {
    pub fn new(base: impl Into<String>, time: f64) -> Self {
        PointLabel {
            base: base.into(),
            spatial_offset: None,
            time: canon(time),
        }
    }

    pub fn with_offset(base: impl Into<String>, offset: &[f64], time: f64) -> Self {
        PointLabel {
            base: base.into(),
            spatial_offset: Some(OffsetVec(offset.iter().map(|&c| canon(c)).collect())),
            time: canon(time),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn spatial_offset(&self) -> Option<Vec<f64>> {
        self.spatial_offset
            .as_ref()
            .map(|o| o.0.iter().map(|c| c.0).collect())
    }

    pub fn time(&self) -> f64 {
        self.time.0
    }
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        if let Some(off) = &self.spatial_offset {
            write!(f, "+(")?;
            for (i, c) in off.0.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", c.0)?;
            }
            write!(f, ")")?;
        }
        write!(f, "@t={}", self.time.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// phi^- : annihilation part
    Annihilation,
    /// phi^+ : creation part
    Creation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorFactor {
    pub kind: FactorKind,
    pub label: PointLabel,
}

impl OperatorFactor {
    pub fn annihilation(label: PointLabel) -> Self {
        OperatorFactor {
            kind: FactorKind::Annihilation,
            label,
        }
    }

    pub fn creation(label: PointLabel) -> Self {
        OperatorFactor {
            kind: FactorKind::Creation,
            label,
        }
    }
}

/// Ordered product of factors; the leftmost factor acts last.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorWord {
    pub factors: Vec<OperatorFactor>,
}

impl OperatorWord {
    pub fn new(factors: Vec<OperatorFactor>) -> Self {
        OperatorWord { factors }
    }

    /// Annihilator labels (left block) in word order.
    pub fn annihilators(&self) -> Vec<&PointLabel> {
        self.factors
            .iter()
            .filter(|f| f.kind == FactorKind::Annihilation)
            .map(|f| &f.label)
            .collect()
    }

    /// Creator labels (right block) in word order.
    pub fn creators(&self) -> Vec<&PointLabel> {
        self.factors
            .iter()
            .filter(|f| f.kind == FactorKind::Creation)
            .map(|f| &f.label)
            .collect()
    }

    /// Normal form: every annihilation factor precedes every creation factor.
    pub fn is_normal_form(&self) -> bool {
        let mut seen_creation = false;
        for f in &self.factors {
            match f.kind {
                FactorKind::Creation => seen_creation = true,
                FactorKind::Annihilation if seen_creation => return false,
                FactorKind::Annihilation => {}
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tag {
    TeleportDirect,
    TeleportExchange,
    Parasitic,
    Untagged,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::TeleportDirect => "teleport_direct",
            Tag::TeleportExchange => "teleport_exchange",
            Tag::Parasitic => "parasitic",
            Tag::Untagged => "untagged",
        }
    }
}

/// One perfect matching of creators with annihilators.
#[derive(Clone, Debug, PartialEq)]
pub struct PairingTerm {
    /// (creator, annihilator) pairs, kept sorted for canonical ordering.
    pub pairs: Vec<(PointLabel, PointLabel)>,
    pub multiplicity: u64,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WickExpansion {
    pub terms: Vec<PairingTerm>,
    pub source_word: OperatorWord,
}

#[derive(Debug, thiserror::Error)]
pub enum WickError {
    #[error(
        "word is not in normal form: factor {position} is an annihilation \
         operator to the right of a creation operator"
    )]
    NotNormalForm { position: usize },
    #[error("role sets do not partition the word's labels: {detail}")]
    RolesNotPartition { detail: String },
    #[error("oracle limits exceeded: modes {modes} > 6 or occupancy cap {cap} > 4")]
    OracleLimits { modes: usize, cap: usize },
    #[error("no mode assignment for label {0}")]
    MissingAssignment(String),
    #[error("mode amplitude for label {label} has length {got}, expected {expected}")]
    WrongAmplitudeLength {
        label: String,
        got: usize,
        expected: usize,
    },
}

fn canonical_pairs(mut pairs: Vec<(PointLabel, PointLabel)>) -> Vec<(PointLabel, PointLabel)> {
    pairs.sort();
    pairs
}

fn sort_terms(terms: &mut [PairingTerm]) {
    terms.sort_by(|s, t| s.pairs.cmp(&t.pairs).then(s.tag.cmp(&t.tag)));
}

/// Expand the vacuum expectation of a normal-form word into all perfect
/// matchings, one term per permutation, multiplicity 1 each. A word with
/// unequal creator and annihilator counts has vanishing expectation and
/// yields an empty expansion.
pub fn vacuum_expectation_symbolic(word: &OperatorWord) -> Result<WickExpansion, WickError> {
    if let Some(position) = first_normal_form_violation(word) {
        return Err(WickError::NotNormalForm { position });
    }
    let annis = word.annihilators();
    let creators = word.creators();
    let mut terms = Vec::new();
    if annis.len() == creators.len() && !annis.is_empty() {
        let n = annis.len();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let pairs = canonical_pairs(
                (0..n)
                    .map(|i| (creators[i].clone(), annis[perm[i]].clone()))
                    .collect(),
            );
            terms.push(PairingTerm {
                pairs,
                multiplicity: 1,
                tag: Tag::Untagged,
            });
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }
    sort_terms(&mut terms);
    Ok(WickExpansion {
        terms,
        source_word: word.clone(),
    })
}

fn first_normal_form_violation(word: &OperatorWord) -> Option<usize> {
    let mut seen_creation = false;
    for (i, f) in word.factors.iter().enumerate() {
        match f.kind {
            FactorKind::Creation => seen_creation = true,
            FactorKind::Annihilation if seen_creation => return Some(i),
            FactorKind::Annihilation => {}
        }
    }
    None
}

/// Lexicographic next permutation; returns false after the last one.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Merge terms whose pair sets coincide (which happens when the word repeats
/// a label), adding multiplicities. Total multiplicity is preserved.
pub fn collapse_repeated_labels(exp: &WickExpansion) -> WickExpansion {
    let mut merged: BTreeMap<Vec<(PointLabel, PointLabel)>, PairingTerm> = BTreeMap::new();
    for term in &exp.terms {
        merged
            .entry(term.pairs.clone())
            .and_modify(|t| t.multiplicity += term.multiplicity)
            .or_insert_with(|| term.clone());
    }
    let mut terms: Vec<PairingTerm> = merged.into_values().collect();
    sort_terms(&mut terms);
    WickExpansion {
        terms,
        source_word: exp.source_word.clone(),
    }
}

/// Tag every term by the fate of the packet creator: pairing it with the free
/// output annihilator is parasitic; pairing it with the first measurement
/// label is the direct teleport channel, with the second the exchange channel.
/// `measurement_labels` is ordered [direct, exchange].
pub fn classify_terms(
    exp: &WickExpansion,
    packet_label: &PointLabel,
    epr_labels: &[PointLabel],
    output_label: &PointLabel,
    measurement_labels: &[PointLabel],
) -> Result<WickExpansion, WickError> {
    if measurement_labels.len() != 2 {
        return Err(WickError::RolesNotPartition {
            detail: format!(
                "expected 2 measurement labels, got {}",
                measurement_labels.len()
            ),
        });
    }
    let mut expected_creators: Vec<&PointLabel> =
        std::iter::once(packet_label).chain(epr_labels).collect();
    expected_creators.sort();
    let mut actual_creators = exp.source_word.creators();
    actual_creators.sort();
    if expected_creators != actual_creators {
        return Err(WickError::RolesNotPartition {
            detail: "creator roles (packet + EPR) do not match the word's creators".into(),
        });
    }
    let mut expected_annis: Vec<&PointLabel> = std::iter::once(output_label)
        .chain(measurement_labels)
        .collect();
    expected_annis.sort();
    let mut actual_annis = exp.source_word.annihilators();
    actual_annis.sort();
    if expected_annis != actual_annis {
        return Err(WickError::RolesNotPartition {
            detail: "annihilator roles (output + measurement) do not match the word's annihilators"
                .into(),
        });
    }

    let mut terms = Vec::with_capacity(exp.terms.len());
    for term in &exp.terms {
        let partner = term
            .pairs
            .iter()
            .find(|(c, _)| c == packet_label)
            .map(|(_, a)| a)
            .ok_or_else(|| WickError::RolesNotPartition {
                detail: format!("packet label {packet_label} absent from a pairing"),
            })?;
        let tag = if partner == output_label {
            Tag::Parasitic
        } else if partner == &measurement_labels[0] {
            Tag::TeleportDirect
        } else if partner == &measurement_labels[1] {
            Tag::TeleportExchange
        } else {
            return Err(WickError::RolesNotPartition {
                detail: format!("packet partner {partner} matches no annihilator role"),
            });
        };
        terms.push(PairingTerm {
            pairs: term.pairs.clone(),
            multiplicity: term.multiplicity,
            tag,
        });
    }
    sort_terms(&mut terms);
    Ok(WickExpansion {
        terms,
        source_word: exp.source_word.clone(),
    })
}

pub type ModeAssignment = BTreeMap<PointLabel, Vec<Complex64>>;

/// Discrete contraction of (creator, annihilator): bilinear mode overlap.
pub fn discrete_contraction(c: &[Complex64], a: &[Complex64]) -> Complex64 {
    c.iter().zip(a.iter()).map(|(x, y)| x * y).sum()
}

/// Evaluate a symbolic expansion numerically with discrete mode overlaps as
/// the contraction values.
pub fn evaluate_expansion_discrete(
    exp: &WickExpansion,
    assignment: &ModeAssignment,
) -> Result<Complex64, WickError> {
    let lookup = |label: &PointLabel| -> Result<&Vec<Complex64>, WickError> {
        assignment
            .get(label)
            .ok_or_else(|| WickError::MissingAssignment(label.to_string()))
    };
    let mut total = Complex64::new(0.0, 0.0);
    for term in &exp.terms {
        let mut product = Complex64::new(term.multiplicity as f64, 0.0);
        for (c, a) in &term.pairs {
            product *= discrete_contraction(lookup(c)?, lookup(a)?);
        }
        total += product;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug)]
pub struct BruteForceVev {
    pub value: Complex64,
    /// True when amplitude leaked past the occupancy cap; the value is then
    /// unreliable.
    pub truncation_overflow: bool,
}

/// Vacuum expectation on a truncated Fock space: each factor becomes its mode
/// expansion in explicit ladder operators and the word is applied to |0>.
/// Desk-scale only: modes <= 6, occupancy_cap <= 4.
pub fn brute_force_vev(
    word: &OperatorWord,
    modes: usize,
    occupancy_cap: usize,
    assignment: &ModeAssignment,
) -> Result<BruteForceVev, WickError> {
    if modes == 0 || modes > 6 || occupancy_cap == 0 || occupancy_cap > 4 {
        return Err(WickError::OracleLimits {
            modes,
            cap: occupancy_cap,
        });
    }
    for f in &word.factors {
        let amps = assignment
            .get(&f.label)
            .ok_or_else(|| WickError::MissingAssignment(f.label.to_string()))?;
        if amps.len() != modes {
            return Err(WickError::WrongAmplitudeLength {
                label: f.label.to_string(),
                got: amps.len(),
                expected: modes,
            });
        }
    }

    let radix = occupancy_cap + 1;
    let dim = radix.pow(modes as u32);
    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    state[0] = Complex64::new(1.0, 0.0);
    let mut overflow = false;

    // stride of mode i in the mixed-radix occupancy index
    let stride = |i: usize| radix.pow(i as u32);
    let occupancy = |idx: usize, i: usize| idx / stride(i) % radix;

    // rightmost factor acts first on |0>
    for f in word.factors.iter().rev() {
        let amps = &assignment[&f.label];
        let mut next = vec![Complex64::new(0.0, 0.0); dim];
        for (idx, &coef) in state.iter().enumerate() {
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (i, &amp) in amps.iter().enumerate() {
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let n = occupancy(idx, i);
                match f.kind {
                    FactorKind::Creation => {
                        if n == occupancy_cap {
                            overflow = true;
                        } else {
                            next[idx + stride(i)] +=
                                coef * amp * ((n + 1) as f64).sqrt();
                        }
                    }
                    FactorKind::Annihilation => {
                        if n > 0 {
                            next[idx - stride(i)] += coef * amp * (n as f64).sqrt();
                        }
                    }
                }
            }
        }
        state = next;
    }

    Ok(BruteForceVev {
        value: state[0],
        truncation_overflow: overflow,
    })
}

/// Canonical JSON form: a list of {pairs: [[creator, annihilator], ...],
/// multiplicity, tag}, sorted lexicographically on the serialized pair lists.
pub fn expansion_to_json(exp: &WickExpansion) -> serde_json::Value {
    let mut keyed: Vec<(String, serde_json::Value)> = exp
        .terms
        .iter()
        .map(|t| {
            let pairs: Vec<serde_json::Value> = t
                .pairs
                .iter()
                .map(|(c, a)| serde_json::json!([c.to_string(), a.to_string()]))
                .collect();
            let key = serde_json::to_string(&pairs).expect("pair list serializes");
            (
                key,
                serde_json::json!({
                    "pairs": pairs,
                    "multiplicity": t.multiplicity,
                    "tag": t.tag.as_str(),
                }),
            )
        })
        .collect();
    keyed.sort_by(|p, q| p.0.cmp(&q.0));
    serde_json::Value::Array(keyed.into_iter().map(|(_, v)| v).collect())
}
