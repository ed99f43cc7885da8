//! Decomposable properties of chain labelings.
//!
//! A property maps a whole labeling to a discrete value by combining
//! per-part component values through a small algebra: `Empty` (the property
//! fired nowhere), `Val(v)` (every firing agreed on `v`), and `Bottom`
//! (firings conflicted). Components are functions of one chain edge
//! `(y[j-1], y[j])` plus token context; look-ahead properties become
//! edge-local after the label set is augmented so that runs of the
//! background label carry their predecessor.

use crate::chain::ChainInstance;
use crate::{Error, Result};
use std::collections::HashMap;

pub type LabelId = usize;

/// A named label set; `other` is the background label that properties skip
/// over (when present).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
    other: Option<LabelId>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Self {
        let other = names.iter().position(|n| n == "Other");
        LabelSet { names, other }
    }

    pub fn with_other(names: Vec<String>, other: LabelId) -> Result<Self> {
        if other >= names.len() {
            return Err(Error::ValueOutOfRange { value: other, r: names.len() });
        }
        Ok(LabelSet { names, other: Some(other) })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn other(&self) -> Option<LabelId> {
        self.other
    }

    pub fn lookup(&self, name: &str) -> Option<LabelId> {
        self.names.iter().position(|n| n == name)
    }
}

/// Value of a decomposable property on a labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyValue {
    /// Every firing part agreed on this range element.
    Val(usize),
    /// The property fired at no part.
    Empty,
    /// Two parts fired with different values.
    Bottom,
}

/// Combines two partial property values: `Empty` is the identity, `Bottom`
/// absorbs, and distinct values conflict into `Bottom`.
pub fn combine(a: PropertyValue, b: PropertyValue) -> PropertyValue {
    use PropertyValue::*;
    match (a, b) {
        (Empty, x) | (x, Empty) => x,
        (Bottom, _) | (_, Bottom) => Bottom,
        (Val(x), Val(y)) if x == y => Val(x),
        _ => Bottom,
    }
}

/// An element of a property's component range.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RangeSymbol {
    Label(LabelId),
    /// Sequence-end sentinel for look-ahead properties.
    End,
    /// Sequence-start sentinel for token-valued properties.
    Start,
    Token(String),
}

#[derive(Debug, Clone)]
pub enum PropertyKind {
    /// The label of every occurrence of a fixed token.
    TokenLabel { token: String },
    /// The first non-Other label of the sequence.
    FirstNonOtherLabel,
    /// The first non-Other label after each `anchor` segment; `End` when an
    /// anchor segment closes the sequence.
    NextLabel { anchor: LabelId },
    /// The token immediately before each `anchor` segment; `Start` at the
    /// beginning of the sequence.
    BeforeToken { anchor: LabelId },
}

/// How a property needs runs of the background label refined so its
/// components become edge-local.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OtherRefinement {
    /// No refinement needed.
    None,
    /// Other-runs following these anchors must carry the anchor.
    Anchors(Vec<LabelId>),
    /// Every Other-run must carry its predecessor label.
    Full,
}

#[derive(Debug, Clone)]
pub struct Property {
    pub id: String,
    kind: PropertyKind,
    range: Vec<RangeSymbol>,
    token_index: HashMap<String, usize>,
}

impl Property {
    fn build(id: String, kind: PropertyKind, range: Vec<RangeSymbol>) -> Self {
        let token_index = range
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                RangeSymbol::Token(t) => Some((t.clone(), i)),
                _ => None,
            })
            .collect();
        Property { id, kind, range, token_index }
    }

    /// Property returning the label of a fixed token; the component range is
    /// the full label set.
    pub fn token_label(labels: &LabelSet, token: &str) -> Self {
        let range = (0..labels.len()).map(RangeSymbol::Label).collect();
        Self::build(
            format!("token-label({token})"),
            PropertyKind::TokenLabel { token: token.to_string() },
            range,
        )
    }

    /// Property returning the first non-Other label of the labeling.
    pub fn first_non_other(labels: &LabelSet) -> Result<Self> {
        let other = require_other(labels)?;
        let range = (0..labels.len())
            .filter(|&l| l != other)
            .map(RangeSymbol::Label)
            .collect();
        Ok(Self::build("first-non-other".into(), PropertyKind::FirstNonOtherLabel, range))
    }

    /// Property returning the first non-Other label after each `anchor`
    /// segment, with an `End` sentinel.
    pub fn next_label(labels: &LabelSet, anchor: &str) -> Result<Self> {
        let other = require_other(labels)?;
        let anchor_id = labels
            .lookup(anchor)
            .ok_or_else(|| Error::InvalidParameter(format!("anchor label {anchor} not in label set")))?;
        if anchor_id == other {
            return Err(Error::InvalidParameter("anchor label cannot be Other".into()));
        }
        let mut range: Vec<RangeSymbol> = (0..labels.len())
            .filter(|&l| l != other)
            .map(RangeSymbol::Label)
            .collect();
        range.push(RangeSymbol::End);
        Ok(Self::build(
            format!("next-label({anchor})"),
            PropertyKind::NextLabel { anchor: anchor_id },
            range,
        ))
    }

    /// Property returning the token before each `anchor` segment. The range
    /// is instantiated from the given vocabulary plus the `Start` sentinel.
    pub fn before_token(labels: &LabelSet, anchor: &str, vocab: &[String]) -> Result<Self> {
        let anchor_id = labels
            .lookup(anchor)
            .ok_or_else(|| Error::InvalidParameter(format!("anchor label {anchor} not in label set")))?;
        let mut range = vec![RangeSymbol::Start];
        let mut seen = std::collections::HashSet::new();
        for t in vocab {
            if seen.insert(t.clone()) {
                range.push(RangeSymbol::Token(t.clone()));
            }
        }
        Ok(Self::build(
            format!("before-token({anchor})"),
            PropertyKind::BeforeToken { anchor: anchor_id },
            range,
        ))
    }

    pub fn kind(&self) -> &PropertyKind {
        &self.kind
    }

    /// The component range (labels, tokens, sentinels) the property maps to.
    pub fn range(&self) -> &[RangeSymbol] {
        &self.range
    }

    pub fn range_len(&self) -> usize {
        self.range.len()
    }

    pub fn refinement(&self) -> OtherRefinement {
        match &self.kind {
            PropertyKind::TokenLabel { .. } | PropertyKind::BeforeToken { .. } => {
                OtherRefinement::None
            }
            PropertyKind::FirstNonOtherLabel => OtherRefinement::Full,
            PropertyKind::NextLabel { anchor } => OtherRefinement::Anchors(vec![*anchor]),
        }
    }

    /// Whether the property applies to this instance at all.
    pub fn in_domain(&self, instance: &ChainInstance) -> bool {
        match &self.kind {
            PropertyKind::TokenLabel { token } => {
                instance.tokens().iter().any(|t| t == token)
            }
            _ => true,
        }
    }

    fn label_range_index(&self, label: LabelId) -> Option<usize> {
        self.range.iter().position(|s| matches!(s, RangeSymbol::Label(l) if *l == label))
    }

    fn end_range_index(&self) -> Option<usize> {
        self.range.iter().position(|s| matches!(s, RangeSymbol::End))
    }

    /// Component value at part `j` of an augmented labeling: the pair
    /// `(prev, cur)` where `prev` is `None` at the sequence start. `None`
    /// means the property does not fire at this part.
    pub fn eval_part(
        &self,
        instance: &ChainInstance,
        aug: &LabelAugmentation,
        j: usize,
        prev: Option<LabelId>,
        cur: LabelId,
    ) -> Option<usize> {
        match &self.kind {
            PropertyKind::TokenLabel { token } => {
                if instance.tokens()[j] == *token {
                    self.label_range_index(aug.strip(cur))
                } else {
                    None
                }
            }
            PropertyKind::FirstNonOtherLabel => {
                let cur_base = aug.strip(cur);
                let is_non_other = !aug.is_other_family(cur);
                let fresh = match prev {
                    None => true,
                    Some(p) => aug.is_plain_other(p),
                };
                if is_non_other && fresh {
                    self.label_range_index(cur_base)
                } else {
                    None
                }
            }
            PropertyKind::NextLabel { anchor } => {
                let after_anchor = match prev {
                    Some(p) => aug.strip_anchor(p) == Some(*anchor) || p == *anchor,
                    None => false,
                };
                let continues_anchor = prev == Some(*anchor) && cur == *anchor;
                if after_anchor && !aug.is_other_family(cur) && !continues_anchor {
                    self.label_range_index(aug.strip(cur))
                } else {
                    None
                }
            }
            PropertyKind::BeforeToken { anchor } => {
                let starts_segment = cur == *anchor && prev != Some(*anchor);
                if !starts_segment {
                    return None;
                }
                if j == 0 {
                    Some(0) // Start sentinel is always range index 0
                } else {
                    self.token_index.get(&instance.tokens()[j - 1]).copied()
                }
            }
        }
    }

    /// Component value at the virtual end part, given the last label.
    pub fn eval_end(&self, aug: &LabelAugmentation, last: LabelId) -> Option<usize> {
        match &self.kind {
            PropertyKind::NextLabel { anchor } => {
                if last == *anchor || aug.strip_anchor(last) == Some(*anchor) {
                    self.end_range_index()
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

fn require_other(labels: &LabelSet) -> Result<LabelId> {
    labels.other().ok_or_else(|| {
        Error::InvalidParameter("property requires a background (Other) label".into())
    })
}

/// The augmented label space: base labels first, then one `After-X` label
/// per refined anchor `X`. `After-X` marks Other-runs that follow `X`, which
/// makes look-ahead properties functions of single edges.
#[derive(Debug, Clone)]
pub struct LabelAugmentation {
    base: LabelSet,
    /// Anchors with an After-label, ascending.
    anchors: Vec<LabelId>,
    /// Whether every non-Other label is refined (full predecessor tracking).
    full: bool,
}

impl LabelAugmentation {
    /// Identity augmentation (no look-ahead properties).
    pub fn identity(base: LabelSet) -> Self {
        LabelAugmentation { base, anchors: Vec::new(), full: false }
    }

    pub fn base(&self) -> &LabelSet {
        &self.base
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    /// Total number of augmented labels.
    pub fn len(&self) -> usize {
        self.base.len() + self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_identity(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn name(&self, id: LabelId) -> String {
        match self.strip_anchor(id) {
            Some(anchor) => format!("After-{}", self.base.name(anchor)),
            None => self.base.name(id).to_string(),
        }
    }

    /// The anchor of an `After-X` label, `None` for base labels.
    pub fn strip_anchor(&self, id: LabelId) -> Option<LabelId> {
        if id >= self.base.len() {
            Some(self.anchors[id - self.base.len()])
        } else {
            None
        }
    }

    /// Maps an augmented label to its base label (`After-X` becomes Other).
    pub fn strip(&self, id: LabelId) -> LabelId {
        match self.strip_anchor(id) {
            Some(_) => self.base.other().expect("augmentation implies an Other label"),
            None => id,
        }
    }

    fn after_of(&self, anchor: LabelId) -> Option<LabelId> {
        self.anchors.iter().position(|&a| a == anchor).map(|i| self.base.len() + i)
    }

    pub fn is_plain_other(&self, id: LabelId) -> bool {
        Some(id) == self.base.other()
    }

    pub fn is_other_family(&self, id: LabelId) -> bool {
        self.is_plain_other(id) || id >= self.base.len()
    }

    /// Whether a refined anchor starts an After-run when followed by Other.
    fn refines(&self, label: LabelId) -> bool {
        self.after_of(label).is_some()
    }

    /// Whether this augmentation provides everything the refinement asks for.
    pub fn satisfies(&self, r: &OtherRefinement) -> bool {
        match r {
            OtherRefinement::None => true,
            OtherRefinement::Anchors(a) => a.iter().all(|&x| self.refines(x)),
            OtherRefinement::Full => {
                self.full
                    || match self.base.other() {
                        Some(other) => {
                            (0..self.base.len()).filter(|&l| l != other).all(|l| self.refines(l))
                        }
                        None => false,
                    }
            }
        }
    }

    /// Valid transitions of the augmented chain; `prev = None` at position 0.
    /// Exactly the relabelings of base sequences are valid, so augmentation
    /// preserves Viterbi scores.
    pub fn transition_allowed(&self, prev: Option<LabelId>, cur: LabelId) -> bool {
        if let Some(anchor) = self.strip_anchor(cur) {
            // After-X continues an X segment or an After-X run
            return prev == Some(anchor) || prev.map(|p| self.strip_anchor(p)) == Some(Some(anchor));
        }
        if self.is_plain_other(cur) {
            // plain Other carries no predecessor: invalid after a refined
            // anchor or an After-run
            return match prev {
                None => true,
                Some(p) => !self.refines(p) && self.strip_anchor(p).is_none(),
            };
        }
        true
    }

    /// Relabels a base sequence into the augmented space.
    pub fn relabel(&self, base_seq: &[LabelId]) -> Vec<LabelId> {
        let other = self.base.other();
        let mut out = Vec::with_capacity(base_seq.len());
        let mut carried: Option<LabelId> = None;
        for &y in base_seq {
            if Some(y) == other {
                match carried.and_then(|a| self.after_of(a)) {
                    Some(after) => out.push(after),
                    None => out.push(y),
                }
            } else {
                carried = Some(y);
                out.push(y);
            }
        }
        out
    }

    /// Maps an augmented sequence back to base labels.
    pub fn unrelabel(&self, aug_seq: &[LabelId]) -> Vec<LabelId> {
        aug_seq.iter().map(|&y| self.strip(y)).collect()
    }
}

/// Builds the label augmentation required by a set of properties: the union
/// of their refinement requirements.
pub fn augment_labels(labels: &LabelSet, properties: &[Property]) -> Result<LabelAugmentation> {
    let mut full = false;
    let mut anchors: Vec<LabelId> = Vec::new();
    for p in properties {
        match p.refinement() {
            OtherRefinement::None => {}
            OtherRefinement::Full => full = true,
            OtherRefinement::Anchors(a) => anchors.extend(a),
        }
    }
    if full {
        let other = require_other(labels)?;
        anchors = (0..labels.len()).filter(|&l| l != other).collect();
    }
    if !anchors.is_empty() {
        require_other(labels)?;
    }
    anchors.sort_unstable();
    anchors.dedup();
    for &a in &anchors {
        if a >= labels.len() {
            return Err(Error::ValueOutOfRange { value: a, r: labels.len() });
        }
    }
    Ok(LabelAugmentation { base: labels.clone(), anchors, full })
}

/// Value of `property` on a base labeling of `instance`: the fold of the
/// per-part component values under [`combine`].
pub fn property_of_labeling(
    property: &Property,
    aug: &LabelAugmentation,
    instance: &ChainInstance,
    base_labels: &[LabelId],
) -> Result<PropertyValue> {
    if !property.in_domain(instance) {
        return Err(Error::NotApplicable(format!(
            "instance outside the domain of {}",
            property.id
        )));
    }
    if base_labels.len() != instance.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} tokens",
            base_labels.len(),
            instance.len()
        )));
    }
    for &y in base_labels {
        if y >= aug.base_len() {
            return Err(Error::ValueOutOfRange { value: y, r: aug.base_len() });
        }
    }
    let seq = aug.relabel(base_labels);
    let mut acc = PropertyValue::Empty;
    for j in 0..seq.len() {
        let prev = if j == 0 { None } else { Some(seq[j - 1]) };
        if let Some(v) = property.eval_part(instance, aug, j, prev, seq[j]) {
            acc = combine(acc, PropertyValue::Val(v));
        }
    }
    if let Some(v) = property.eval_end(aug, *seq.last().expect("chains are non-empty")) {
        acc = combine(acc, PropertyValue::Val(v));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainInstance;

    fn labels_tao() -> LabelSet {
        LabelSet::new(vec!["Title".into(), "Author".into(), "Other".into()])
    }

    fn chain(tokens: &[&str], num_labels: usize) -> ChainInstance {
        let t = tokens.len();
        ChainInstance::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            vec![vec![0.0; num_labels]; t],
            vec![vec![vec![0.0; num_labels]; num_labels]; t.saturating_sub(1)],
        )
        .unwrap()
    }

    #[test]
    fn combine_laws() {
        use PropertyValue::*;
        let elems = [Empty, Bottom, Val(0), Val(1), Val(2), Val(3)];
        for &x in &elems {
            assert_eq!(combine(Empty, x), x);
            assert_eq!(combine(x, Empty), x);
            assert_eq!(combine(Bottom, x), Bottom);
            assert_eq!(combine(x, Bottom), Bottom);
        }
        assert_eq!(combine(Val(0), Val(0)), Val(0));
        assert_eq!(combine(Val(0), Val(1)), Bottom);
        for &a in &elems {
            for &b in &elems {
                assert_eq!(combine(a, b), combine(b, a));
                for &c in &elems {
                    assert_eq!(combine(combine(a, b), c), combine(a, combine(b, c)));
                }
            }
        }
    }

    #[test]
    fn token_label_cases() {
        let labels = labels_tao();
        let p = Property::token_label(&labels, "france");
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        let inst = chain(&["in", "france", "and", "france"], labels.len());
        // both occurrences labeled Title
        let v = property_of_labeling(&p, &aug, &inst, &[2, 0, 2, 0]).unwrap();
        assert_eq!(v, PropertyValue::Val(0));
        // conflicting labels
        let v = property_of_labeling(&p, &aug, &inst, &[2, 0, 2, 1]).unwrap();
        assert_eq!(v, PropertyValue::Bottom);
        // no occurrence: outside the domain
        let inst2 = chain(&["in", "spain"], labels.len());
        assert!(property_of_labeling(&p, &aug, &inst2, &[2, 2]).is_err());
        assert!(!p.in_domain(&inst2));
        // presence without firing is impossible for token-label, but a
        // non-firing fold yields Empty
        let p2 = Property::token_label(&labels, "spain");
        let aug2 = augment_labels(&labels, std::slice::from_ref(&p2)).unwrap();
        let v = property_of_labeling(&p2, &aug2, &chain(&["x", "spain"], 3), &[2, 2]).unwrap();
        assert_eq!(v, PropertyValue::Val(2));
        let inst3 = chain(&["spain", "x"], labels.len());
        let v = property_of_labeling(&p2, &aug2, &inst3, &[1, 2]).unwrap();
        assert_eq!(v, PropertyValue::Val(1));
    }

    #[test]
    fn next_label_cases() {
        let labels = labels_tao();
        let p = Property::next_label(&labels, "Title").unwrap();
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        // After-Title added
        assert_eq!(aug.len(), 4);
        assert_eq!(aug.name(3), "After-Title");

        let inst = chain(&["a", "b", "c", "d", "e", "f"], labels.len());
        // Title Other Author Title Other Author -> Author
        let v = property_of_labeling(&p, &aug, &inst, &[0, 2, 1, 0, 2, 1]).unwrap();
        assert_eq!(v, PropertyValue::Val(1)); // range: Title=0, Author=1, End=2
        // Titles followed by Author and by Title -> conflict
        let v = property_of_labeling(&p, &aug, &inst, &[0, 2, 1, 2, 0, 0]).unwrap();
        assert_eq!(v, PropertyValue::Bottom);
        // no Title -> Empty
        let v = property_of_labeling(&p, &aug, &inst, &[2, 2, 1, 1, 2, 2]).unwrap();
        assert_eq!(v, PropertyValue::Empty);
        // trailing Title + Others -> End
        let v = property_of_labeling(&p, &aug, &inst, &[2, 2, 1, 0, 2, 2]).unwrap();
        assert_eq!(v, PropertyValue::Val(2));
        // multi-token Title segment followed by Author fires once
        let v = property_of_labeling(&p, &aug, &inst, &[0, 0, 1, 2, 2, 2]).unwrap();
        assert_eq!(v, PropertyValue::Val(1));
    }

    #[test]
    fn before_token_cases() {
        let labels = labels_tao();
        let vocab: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let p = Property::before_token(&labels, "Title", &vocab).unwrap();
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        assert!(aug.is_identity());

        let inst = chain(&["x", "y", "z"], labels.len());
        // Title at position 0 -> Start
        let v = property_of_labeling(&p, &aug, &inst, &[0, 2, 2]).unwrap();
        assert_eq!(v, PropertyValue::Val(0));
        // Title segment starting at position 1 -> token "x"
        let v = property_of_labeling(&p, &aug, &inst, &[2, 0, 0]).unwrap();
        assert_eq!(v, PropertyValue::Val(1));
        // two Title segments with different preceding tokens -> Bottom
        let inst2 = chain(&["x", "t", "y", "t"], labels.len());
        let v = property_of_labeling(&p, &aug, &inst2, &[2, 0, 2, 0]).unwrap();
        assert_eq!(v, PropertyValue::Bottom);
    }

    #[test]
    fn first_non_other_cases() {
        let labels = labels_tao();
        let p = Property::first_non_other(&labels).unwrap();
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        // full refinement: After-Title and After-Author
        assert_eq!(aug.len(), 5);

        let inst = chain(&["a", "b", "c"], labels.len());
        let v = property_of_labeling(&p, &aug, &inst, &[2, 1, 0]).unwrap();
        assert_eq!(v, PropertyValue::Val(1)); // range: Title=0, Author=1
        let v = property_of_labeling(&p, &aug, &inst, &[2, 2, 2]).unwrap();
        assert_eq!(v, PropertyValue::Empty);
        // fires exactly once even with later labels
        let v = property_of_labeling(&p, &aug, &inst, &[0, 2, 1]).unwrap();
        assert_eq!(v, PropertyValue::Val(0));
    }

    #[test]
    fn anchor_must_exist() {
        let labels = labels_tao();
        assert!(Property::next_label(&labels, "Venue").is_err());
        let no_other = LabelSet::new(vec!["A".into(), "B".into()]);
        assert!(Property::first_non_other(&no_other).is_err());
    }

    #[test]
    fn relabel_round_trip() {
        let labels = labels_tao();
        let p = Property::next_label(&labels, "Title").unwrap();
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        assert_eq!(aug.relabel(&[0, 2, 1]), vec![0, 3, 1]);
        // round trip on random sequences
        let mut rng = crate::synth::Rng64::new(3);
        for _ in 0..100 {
            let t = 1 + (rng.next_u64() % 8) as usize;
            let seq: Vec<LabelId> = (0..t).map(|_| (rng.next_u64() % 3) as usize).collect();
            assert_eq!(aug.unrelabel(&aug.relabel(&seq)), seq);
        }
        // no look-ahead properties: identity
        let tl = Property::token_label(&labels, "w");
        let aug2 = augment_labels(&labels, std::slice::from_ref(&tl)).unwrap();
        assert!(aug2.is_identity());
        assert_eq!(aug2.relabel(&[0, 2, 1]), vec![0, 2, 1]);
    }

    #[test]
    fn transition_validity_matches_relabeled_sequences() {
        let labels = labels_tao();
        let p = Property::first_non_other(&labels).unwrap();
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        let total = aug.len();
        // every relabeled base sequence is transition-valid, and every
        // transition-valid augmented sequence unrelabels+relabels to itself
        let t = 4;
        let mut seq = vec![0usize; t];
        loop {
            let valid = (0..t).all(|j| {
                let prev = if j == 0 { None } else { Some(seq[j - 1]) };
                aug.transition_allowed(prev, seq[j])
            });
            let round = aug.relabel(&aug.unrelabel(&seq)) == seq;
            assert_eq!(valid, round, "seq {seq:?}");
            let mut i = t;
            let mut done = true;
            while i > 0 {
                i -= 1;
                seq[i] += 1;
                if seq[i] < total {
                    done = false;
                    break;
                }
                seq[i] = 0;
            }
            if done {
                break;
            }
        }
    }

    /// Three-case fold oracle applied directly to collected component values.
    #[test]
    fn fold_matches_case_analysis() {
        let labels = labels_tao();
        let inst = chain(&["w", "x", "w", "y"], labels.len());
        let props = [
            Property::token_label(&labels, "w"),
            Property::next_label(&labels, "Title").unwrap(),
            Property::first_non_other(&labels).unwrap(),
        ];
        let aug = augment_labels(&labels, &props).unwrap();
        let mut rng = crate::synth::Rng64::new(7);
        for _ in 0..200 {
            let seq: Vec<LabelId> = (0..4).map(|_| (rng.next_u64() % 3) as usize).collect();
            for p in &props {
                let got = property_of_labeling(p, &aug, &inst, &seq).unwrap();
                // oracle: collect component values, then apply the case table
                let aug_seq = aug.relabel(&seq);
                let mut fired = Vec::new();
                for j in 0..aug_seq.len() {
                    let prev = if j == 0 { None } else { Some(aug_seq[j - 1]) };
                    if let Some(v) = p.eval_part(&inst, &aug, j, prev, aug_seq[j]) {
                        fired.push(v);
                    }
                }
                if let Some(v) = p.eval_end(&aug, *aug_seq.last().unwrap()) {
                    fired.push(v);
                }
                let want = if fired.is_empty() {
                    PropertyValue::Empty
                } else if fired.iter().all(|&v| v == fired[0]) {
                    PropertyValue::Val(fired[0])
                } else {
                    PropertyValue::Bottom
                };
                assert_eq!(got, want);
            }
        }
    }
}
