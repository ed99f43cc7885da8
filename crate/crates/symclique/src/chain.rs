//! Chain-shaped MRFs: Viterbi decoding and property-aware message
//! computation.
//!
//! The aggregated message `M(u_1..u_K)` of an instance is the best chain
//! score over labelings whose property values equal the given combination.
//! It is computed by a forward pass whose state is `(label, combined value
//! per property)`; each edge contributes the component values of the
//! incident properties, merged with the property algebra. Unreachable
//! combinations carry a `-inf` sentinel and all arithmetic saturates.

use crate::properties::{
    LabelAugmentation, LabelId, Property, PropertyValue,
};
use crate::{Error, Result};

/// One chain instance: tokens plus dense node and edge potential tables.
/// Potentials may be `-inf` (forbidden choices) but never `NaN` or `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInstance {
    tokens: Vec<String>,
    node: Vec<Vec<f64>>,
    edge: Vec<Vec<Vec<f64>>>,
}

impl ChainInstance {
    pub fn new(tokens: Vec<String>, node: Vec<Vec<f64>>, edge: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let t = tokens.len();
        if t == 0 {
            return Err(Error::InvalidParameter("chains must have at least one token".into()));
        }
        if node.len() != t {
            return Err(Error::Dimension(format!("{} node rows for {t} tokens", node.len())));
        }
        let l = node[0].len();
        if l == 0 {
            return Err(Error::InvalidParameter("empty label set".into()));
        }
        let ok_entry = |x: f64| !x.is_nan() && x != f64::INFINITY;
        for row in &node {
            if row.len() != l || !row.iter().all(|&x| ok_entry(x)) {
                return Err(Error::Dimension("bad node potential row".into()));
            }
        }
        if edge.len() != t - 1 {
            return Err(Error::Dimension(format!(
                "{} edge tables for {t} tokens",
                edge.len()
            )));
        }
        for table in &edge {
            if table.len() != l
                || table.iter().any(|row| row.len() != l || !row.iter().all(|&x| ok_entry(x)))
            {
                return Err(Error::Dimension("bad edge potential table".into()));
            }
        }
        Ok(ChainInstance { tokens, node, edge })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> usize {
        self.node[0].len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn node_potential(&self, j: usize, y: LabelId) -> f64 {
        self.node[j][y]
    }

    pub fn edge_potential(&self, j: usize, a: LabelId, b: LabelId) -> f64 {
        self.edge[j][a][b]
    }

    /// Chain score `sum_j node[j][y_j] + sum_j edge[j][y_j][y_{j+1}]`.
    pub fn score(&self, labels: &[LabelId]) -> Result<f64> {
        if labels.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} tokens",
                labels.len(),
                self.len()
            )));
        }
        let mut s = 0.0;
        for (j, &y) in labels.iter().enumerate() {
            if y >= self.labels() {
                return Err(Error::ValueOutOfRange { value: y, r: self.labels() });
            }
            s += self.node[j][y];
            if j + 1 < self.len() {
                s += self.edge[j][y][labels[j + 1]];
            }
        }
        Ok(s)
    }

    /// The instance over the augmented label space: augmented labels score
    /// like their base labels and invalid transitions are forbidden, so the
    /// valid augmented labelings are exactly the relabeled base labelings.
    pub fn augmented(&self, aug: &LabelAugmentation) -> ChainInstance {
        if aug.is_identity() {
            return self.clone();
        }
        let t = self.len();
        let l2 = aug.len();
        let node: Vec<Vec<f64>> = (0..t)
            .map(|j| {
                (0..l2)
                    .map(|y| {
                        if j == 0 && !aug.transition_allowed(None, y) {
                            f64::NEG_INFINITY
                        } else {
                            self.node[j][aug.strip(y)]
                        }
                    })
                    .collect()
            })
            .collect();
        let edge: Vec<Vec<Vec<f64>>> = (0..t - 1)
            .map(|j| {
                (0..l2)
                    .map(|a| {
                        (0..l2)
                            .map(|b| {
                                if aug.transition_allowed(Some(a), b) {
                                    self.edge[j][aug.strip(a)][aug.strip(b)]
                                } else {
                                    f64::NEG_INFINITY
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ChainInstance { tokens: self.tokens.clone(), node, edge }
    }
}

/// Exact chain MAP in `O(T L^2)`. Ties resolve to the lexicographically
/// smallest labeling.
pub fn viterbi(instance: &ChainInstance) -> (Vec<LabelId>, f64) {
    let t = instance.len();
    let l = instance.labels();
    // suffix scores: beta[j][y] = best score of positions j.. with y_j = y
    let mut beta = vec![vec![f64::NEG_INFINITY; l]; t];
    for y in 0..l {
        beta[t - 1][y] = instance.node[t - 1][y];
    }
    for j in (0..t - 1).rev() {
        for y in 0..l {
            let mut best = f64::NEG_INFINITY;
            for y2 in 0..l {
                let s = instance.edge[j][y][y2] + beta[j + 1][y2];
                if s > best {
                    best = s;
                }
            }
            beta[j][y] = instance.node[j][y] + best;
        }
    }
    let mut labels = Vec::with_capacity(t);
    let mut best = f64::NEG_INFINITY;
    let mut first = 0;
    for y in 0..l {
        if beta[0][y] > best {
            best = beta[0][y];
            first = y;
        }
    }
    labels.push(first);
    for j in 1..t {
        let prev = labels[j - 1];
        let mut best_y = 0;
        let mut best_s = f64::NEG_INFINITY;
        for y in 0..l {
            let s = instance.edge[j - 1][prev][y] + beta[j][y];
            if s > best_s {
                best_s = s;
                best_y = y;
            }
        }
        labels.push(best_y);
    }
    // report the score in the canonical accumulation order so it compares
    // exactly against enumeration and message-table entries
    let score = instance.score(&labels).expect("viterbi labeling is valid");
    (labels, score)
}

/// A property's component range restricted to the values still worth
/// tracking; the `Empty` and `Bottom` sentinels keep the last two indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveRange {
    active: Vec<usize>,
    full_to_active: Vec<Option<usize>>,
}

impl ActiveRange {
    /// Every range value active.
    pub fn full(range_len: usize) -> Self {
        ActiveRange {
            active: (0..range_len).collect(),
            full_to_active: (0..range_len).map(Some).collect(),
        }
    }

    /// Only the given full-range indices are tracked; the rest are pruned
    /// from the message grids.
    pub fn restricted(range_len: usize, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        indices.retain(|&i| i < range_len);
        let mut full_to_active = vec![None; range_len];
        for (a, &f) in indices.iter().enumerate() {
            full_to_active[f] = Some(a);
        }
        ActiveRange { active: indices, full_to_active }
    }

    pub fn num_values(&self) -> usize {
        self.active.len()
    }

    /// Active indices back into the full range.
    pub fn active_indices(&self) -> &[usize] {
        &self.active
    }

    pub fn empty_index(&self) -> usize {
        self.active.len()
    }

    pub fn bottom_index(&self) -> usize {
        self.active.len() + 1
    }

    /// Message vectors over this range have this length.
    pub fn total(&self) -> usize {
        self.active.len() + 2
    }

    pub fn to_active(&self, full_idx: usize) -> Option<usize> {
        self.full_to_active.get(full_idx).copied().flatten()
    }

    pub fn encode(&self, value: PropertyValue) -> Option<usize> {
        match value {
            PropertyValue::Val(f) => self.to_active(f),
            PropertyValue::Empty => Some(self.empty_index()),
            PropertyValue::Bottom => Some(self.bottom_index()),
        }
    }

    pub fn decode(&self, idx: usize) -> PropertyValue {
        if idx == self.empty_index() {
            PropertyValue::Empty
        } else if idx == self.bottom_index() {
            PropertyValue::Bottom
        } else {
            PropertyValue::Val(self.active[idx])
        }
    }
}

/// A property together with its active range, as used by the message DP.
pub struct PropertyContext<'a> {
    pub property: &'a Property,
    pub range: &'a ActiveRange,
}

/// The aggregated message of one instance: the best chain score per
/// combination of property values, with traceback data for decoding.
#[derive(Debug, Clone)]
pub struct AggregatedMessage {
    radices: Vec<usize>,
    u_total: usize,
    table: Vec<f64>,
    /// per final combination: the best `(label, pre-end combination)` state
    final_best: Vec<Option<(usize, usize)>>,
    /// per layer and state `label * u_total + u`: packed predecessor state
    parents: Vec<Vec<u32>>,
}

const NO_PARENT: u32 = u32::MAX;

impl AggregatedMessage {
    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn num_combinations(&self) -> usize {
        self.u_total
    }

    pub fn index_of(&self, u: &[usize]) -> usize {
        debug_assert_eq!(u.len(), self.radices.len());
        let mut idx = 0;
        let mut stride = 1;
        for (k, &v) in u.iter().enumerate() {
            idx += v * stride;
            stride *= self.radices[k];
        }
        idx
    }

    pub fn combination_of(&self, mut idx: usize) -> Vec<usize> {
        let mut u = Vec::with_capacity(self.radices.len());
        for &r in &self.radices {
            u.push(idx % r);
            idx /= r;
        }
        u
    }

    /// `M(u)`; `-inf` when no labeling produces the combination.
    pub fn entry(&self, u: &[usize]) -> f64 {
        self.table[self.index_of(u)]
    }

    pub fn entry_by_index(&self, idx: usize) -> f64 {
        self.table[idx]
    }

    /// Tracebacks the labeling achieving `M` at the given combination.
    pub fn decode(&self, u_index: usize) -> Option<Vec<LabelId>> {
        let (mut label, mut u) = self.final_best[u_index]?;
        let t = self.parents.len();
        let mut labels = vec![0usize; t];
        labels[t - 1] = label;
        for j in (1..t).rev() {
            let packed = self.parents[j][label * self.u_total + u];
            debug_assert_ne!(packed, NO_PARENT);
            label = packed as usize / self.u_total;
            u = packed as usize % self.u_total;
            labels[j - 1] = label;
        }
        Some(labels)
    }
}

fn check_properties(aug: &LabelAugmentation, props: &[PropertyContext]) -> Result<()> {
    for p in props {
        if !aug.satisfies(&p.property.refinement()) {
            return Err(Error::NotApplicable(format!(
                "property {} is not edge-local under the current label augmentation",
                p.property.id
            )));
        }
    }
    Ok(())
}

/// Merges a component firing into a per-property combined state (both in
/// active-range encoding). `None` prunes the state (the firing is outside
/// the active range).
fn merge_state(range: &ActiveRange, state: usize, fired: Option<Option<usize>>) -> Option<usize> {
    match fired {
        None => Some(state),
        Some(None) => None,
        Some(Some(v)) => {
            let empty = range.empty_index();
            let bottom = range.bottom_index();
            Some(if state == bottom {
                bottom
            } else if state == empty || state == v {
                v
            } else {
                bottom
            })
        }
    }
}

fn aggregated_message_impl(
    instance: &ChainInstance,
    aug: &LabelAugmentation,
    props: &[PropertyContext],
    beam: Option<usize>,
) -> Result<AggregatedMessage> {
    check_properties(aug, props)?;
    let t = instance.len();
    let l = instance.labels();
    let radices: Vec<usize> = props.iter().map(|p| p.range.total()).collect();
    let u_total: usize = radices.iter().product::<usize>().max(1);
    let strides: Vec<usize> = {
        let mut s = Vec::with_capacity(props.len());
        let mut acc = 1;
        for &r in &radices {
            s.push(acc);
            acc *= r;
        }
        s
    };
    let empty_u: usize = props
        .iter()
        .enumerate()
        .map(|(k, p)| p.range.empty_index() * strides[k])
        .sum();

    // advance a combined state through part j
    let step = |j: usize, prev: Option<usize>, cur: usize, u: usize| -> Option<usize> {
        let mut out = 0;
        for (k, p) in props.iter().enumerate() {
            let state = (u / strides[k]) % radices[k];
            let fired = p
                .property
                .eval_part(instance, aug, j, prev, cur)
                .map(|full| p.range.to_active(full));
            let merged = merge_state(p.range, state, fired)?;
            out += merged * strides[k];
        }
        Some(out)
    };

    let prune = |scores: &mut Vec<f64>| {
        if let Some(b) = beam {
            let mut live: Vec<(usize, f64)> = scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > f64::NEG_INFINITY)
                .map(|(i, &s)| (i, s))
                .collect();
            if live.len() > b {
                live.sort_by(|x, y| y.1.partial_cmp(&x.1).expect("no NaN").then(x.0.cmp(&y.0)));
                for &(i, _) in &live[b..] {
                    scores[i] = f64::NEG_INFINITY;
                }
            }
        }
    };

    let mut scores = vec![f64::NEG_INFINITY; l * u_total];
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(t);
    parents.push(vec![NO_PARENT; l * u_total]);
    for y in 0..l {
        if instance.node[0][y] == f64::NEG_INFINITY {
            continue;
        }
        if let Some(u) = step(0, None, y, empty_u) {
            let s = instance.node[0][y];
            let idx = y * u_total + u;
            if s > scores[idx] {
                scores[idx] = s;
            }
        }
    }
    prune(&mut scores);

    for j in 1..t {
        let mut next = vec![f64::NEG_INFINITY; l * u_total];
        let mut par = vec![NO_PARENT; l * u_total];
        for y in 0..l {
            for u in 0..u_total {
                let s = scores[y * u_total + u];
                if s == f64::NEG_INFINITY {
                    continue;
                }
                for y2 in 0..l {
                    let e = instance.edge[j - 1][y][y2];
                    if e == f64::NEG_INFINITY {
                        continue;
                    }
                    let total = s + e + instance.node[j][y2];
                    if total == f64::NEG_INFINITY {
                        continue;
                    }
                    if let Some(u2) = step(j, Some(y), y2, u) {
                        let idx = y2 * u_total + u2;
                        if total > next[idx] {
                            next[idx] = total;
                            par[idx] = (y * u_total + u) as u32;
                        }
                    }
                }
            }
        }
        prune(&mut next);
        scores = next;
        parents.push(par);
    }

    // fold in the end-part components
    let mut table = vec![f64::NEG_INFINITY; u_total];
    let mut final_best: Vec<Option<(usize, usize)>> = vec![None; u_total];
    for y in 0..l {
        for u in 0..u_total {
            let s = scores[y * u_total + u];
            if s == f64::NEG_INFINITY {
                continue;
            }
            let mut out = 0;
            let mut ok = true;
            for (k, p) in props.iter().enumerate() {
                let state = (u / strides[k]) % radices[k];
                let fired =
                    p.property.eval_end(aug, y).map(|full| p.range.to_active(full));
                match merge_state(p.range, state, fired) {
                    Some(m) => out += m * strides[k],
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && s > table[out] {
                table[out] = s;
                final_best[out] = Some((y, u));
            }
        }
    }

    Ok(AggregatedMessage { radices, u_total, table, final_best, parents })
}

/// Exact aggregated message: `M(u)` is the best chain score among labelings
/// whose property values equal `u`. Complexity
/// `O(T L^2 prod_k |range_k|)`.
pub fn property_messages(
    instance: &ChainInstance,
    aug: &LabelAugmentation,
    props: &[PropertyContext],
) -> Result<AggregatedMessage> {
    aggregated_message_impl(instance, aug, props, None)
}

/// Beam-limited aggregated message: keeps only the `beam` best states per
/// position. Present entries are lower bounds of the exact message; with a
/// beam at least the full grid size the result is exact.
pub fn beam_property_messages(
    instance: &ChainInstance,
    aug: &LabelAugmentation,
    props: &[PropertyContext],
    beam: usize,
) -> Result<AggregatedMessage> {
    if beam < 1 {
        return Err(Error::InvalidParameter("beam width must be at least 1".into()));
    }
    aggregated_message_impl(instance, aug, props, Some(beam))
}

/// Message from an instance to one of its incident property cliques:
/// `m(v) = max over combinations with u_target = v of M(u) + sum of the other
/// properties' incoming messages at their combination values`.
pub fn msg_instance_to_clique(
    agg: &AggregatedMessage,
    target: usize,
    incoming: &[Vec<f64>],
) -> Vec<f64> {
    let radices = agg.radices();
    debug_assert_eq!(incoming.len(), radices.len());
    let mut out = vec![f64::NEG_INFINITY; radices[target]];
    for idx in 0..agg.num_combinations() {
        let m = agg.entry_by_index(idx);
        if m == f64::NEG_INFINITY {
            continue;
        }
        let u = agg.combination_of(idx);
        let mut s = m;
        for (k, &uv) in u.iter().enumerate() {
            if k != target {
                s += incoming[k][uv];
            }
        }
        if s > out[u[target]] {
            out[u[target]] = s;
        }
    }
    out
}

/// First approximation: shrink each property's range to the values its
/// independent Viterbi MAPs actually fire, plus the sentinels.
pub fn restrict_ranges(
    instances: &[ChainInstance],
    aug: &LabelAugmentation,
    properties: &[Property],
) -> Result<Vec<ActiveRange>> {
    let maps: Vec<Vec<LabelId>> = instances
        .iter()
        .map(|inst| {
            let (labels, _) = viterbi(&inst.augmented(aug));
            aug.unrelabel(&labels)
        })
        .collect();
    properties
        .iter()
        .map(|p| {
            let mut observed = Vec::new();
            for (inst, map) in instances.iter().zip(&maps) {
                if !p.in_domain(inst) {
                    continue;
                }
                if let PropertyValue::Val(v) = property_of_labeling_checked(p, aug, inst, map)? {
                    observed.push(v);
                }
            }
            Ok(ActiveRange::restricted(p.range_len(), observed))
        })
        .collect()
}

fn property_of_labeling_checked(
    p: &Property,
    aug: &LabelAugmentation,
    inst: &ChainInstance,
    labels: &[LabelId],
) -> Result<PropertyValue> {
    crate::properties::property_of_labeling(p, aug, inst, labels)
}

/// Second approximation: absorb a normalized incoming message locally at
/// every part where the property's component fires, on a copy of the
/// instance. Exact when the MAP fires the property at most once.
pub fn local_absorb(
    instance: &ChainInstance,
    aug: &LabelAugmentation,
    property: &Property,
    range: &ActiveRange,
    message: &[f64],
) -> Result<ChainInstance> {
    if message.len() != range.total() {
        return Err(Error::Dimension(format!(
            "message of length {} over a range of {}",
            message.len(),
            range.total()
        )));
    }
    let base = message[range.empty_index()];
    let mut out = instance.clone();
    let t = instance.len();
    let l = instance.labels();
    let norm = |active: usize| -> Option<f64> {
        let x = message[active] - base;
        x.is_finite().then_some(x)
    };
    // part 0 depends only on the first label
    for y in 0..l {
        if let Some(active) =
            property.eval_part(instance, aug, 0, None, y).and_then(|f| range.to_active(f))
        {
            if let Some(b) = norm(active) {
                out.node[0][y] += b;
            }
        }
    }
    for j in 1..t {
        for a in 0..l {
            for b in 0..l {
                if let Some(active) =
                    property.eval_part(instance, aug, j, Some(a), b).and_then(|f| range.to_active(f))
                {
                    if let Some(bonus) = norm(active) {
                        out.edge[j - 1][a][b] += bonus;
                    }
                }
            }
        }
    }
    for y in 0..l {
        if let Some(active) = property.eval_end(aug, y).and_then(|f| range.to_active(f)) {
            if let Some(b) = norm(active) {
                out.node[t - 1][y] += b;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::{augment_labels, property_of_labeling, LabelSet};
    use crate::synth::Rng64;

    fn simple_labels(n: usize) -> LabelSet {
        LabelSet::new((0..n).map(|i| format!("L{i}")).collect())
    }

    fn random_chain(rng: &mut Rng64, t: usize, l: usize, tokens: Vec<String>) -> ChainInstance {
        let node = (0..t).map(|_| (0..l).map(|_| rng.next_f64() * 2.0 - 1.0).collect()).collect();
        let edge = (0..t.saturating_sub(1))
            .map(|_| {
                (0..l)
                    .map(|_| (0..l).map(|_| rng.next_f64() - 0.5).collect())
                    .collect()
            })
            .collect();
        ChainInstance::new(tokens, node, edge).unwrap()
    }

    fn enumerate_labelings(t: usize, l: usize) -> Vec<Vec<LabelId>> {
        let mut out = Vec::new();
        let mut cur = vec![0usize; t];
        loop {
            out.push(cur.clone());
            let mut i = t;
            let mut done = true;
            while i > 0 {
                i -= 1;
                cur[i] += 1;
                if cur[i] < l {
                    done = false;
                    break;
                }
                cur[i] = 0;
            }
            if done {
                return out;
            }
        }
    }

    #[test]
    fn viterbi_single_token() {
        let inst = ChainInstance::new(
            vec!["w".into()],
            vec![vec![0.5, 2.0, 1.0]],
            vec![],
        )
        .unwrap();
        let (labels, score) = viterbi(&inst);
        assert_eq!(labels, vec![1]);
        assert_eq!(score, 2.0);
    }

    #[test]
    fn viterbi_uniform_is_lexicographically_smallest() {
        let inst = ChainInstance::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![0.0; 2]; 3],
            vec![vec![vec![0.0; 2]; 2]; 2],
        )
        .unwrap();
        let (labels, score) = viterbi(&inst);
        assert_eq!(labels, vec![0, 0, 0]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn viterbi_matches_enumeration() {
        let mut rng = Rng64::new(5);
        for _ in 0..60 {
            let t = 1 + (rng.next_u64() % 6) as usize;
            let l = 2 + (rng.next_u64() % 2) as usize;
            let tokens = (0..t).map(|i| format!("t{i}")).collect();
            let inst = random_chain(&mut rng, t, l, tokens);
            let (labels, score) = viterbi(&inst);
            let mut best = f64::NEG_INFINITY;
            for cand in enumerate_labelings(t, l) {
                best = best.max(inst.score(&cand).unwrap());
            }
            assert_eq!(score, best);
            assert_eq!(inst.score(&labels).unwrap(), best);
        }
    }

    #[test]
    fn aggregated_message_no_properties_is_viterbi() {
        let mut rng = Rng64::new(7);
        let inst = random_chain(&mut rng, 4, 3, (0..4).map(|i| format!("t{i}")).collect());
        let labels = simple_labels(3);
        let aug = LabelAugmentation::identity(labels);
        let agg = property_messages(&inst, &aug, &[]).unwrap();
        assert_eq!(agg.num_combinations(), 1);
        let (map, score) = viterbi(&inst);
        assert_eq!(agg.entry(&[]), score);
        assert_eq!(agg.decode(0).unwrap(), map);
    }

    #[test]
    fn aggregated_message_token_label_example() {
        // two tokens "w", two labels, node (1,0) and (0,1), zero edges
        let inst = ChainInstance::new(
            vec!["w".into(), "w".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![vec![0.0; 2]; 2]],
        )
        .unwrap();
        let labels = simple_labels(2);
        let p = Property::token_label(&labels, "w");
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        let range = ActiveRange::full(p.range_len());
        let agg =
            property_messages(&inst, &aug, &[PropertyContext { property: &p, range: &range }])
                .unwrap();
        assert_eq!(agg.entry(&[0]), 1.0); // both labeled 0
        assert_eq!(agg.entry(&[1]), 1.0); // both labeled 1
        assert_eq!(agg.entry(&[range.bottom_index()]), 2.0); // disagree
        assert_eq!(agg.entry(&[range.empty_index()]), f64::NEG_INFINITY);
    }

    /// Enumeration oracle: group all labelings by property-value combination
    /// and compare the grouped maxima with the DP message.
    fn check_against_oracle(
        inst: &ChainInstance,
        labels: &LabelSet,
        props: &[Property],
        ranges: &[ActiveRange],
    ) {
        let aug = augment_labels(labels, props).unwrap();
        let aug_inst = inst.augmented(&aug);
        let ctxs: Vec<PropertyContext> = props
            .iter()
            .zip(ranges)
            .map(|(property, range)| PropertyContext { property, range })
            .collect();
        let agg = property_messages(&aug_inst, &aug, &ctxs).unwrap();

        let mut oracle = vec![f64::NEG_INFINITY; agg.num_combinations()];
        for labeling in enumerate_labelings(inst.len(), labels.len()) {
            let score = inst.score(&labeling).unwrap();
            let mut u = Vec::new();
            let mut trackable = true;
            for (p, range) in props.iter().zip(ranges) {
                let v = property_of_labeling(p, &aug, inst, &labeling).unwrap();
                match range.encode(v) {
                    Some(e) => u.push(e),
                    None => {
                        trackable = false;
                        break;
                    }
                }
            }
            if trackable {
                let idx = agg.index_of(&u);
                oracle[idx] = oracle[idx].max(score);
            }
        }
        for idx in 0..agg.num_combinations() {
            assert_eq!(
                agg.entry_by_index(idx),
                oracle[idx],
                "combination {:?}",
                agg.combination_of(idx)
            );
            // traceback reproduces the entry
            if agg.entry_by_index(idx) > f64::NEG_INFINITY {
                let decoded = agg.decode(idx).unwrap();
                let base = aug.unrelabel(&decoded);
                assert_eq!(inst.score(&base).unwrap(), agg.entry_by_index(idx));
            }
        }
    }

    #[test]
    fn aggregated_message_matches_oracle() {
        let mut rng = Rng64::new(11);
        for trial in 0..40 {
            let t = 1 + (rng.next_u64() % 5) as usize;
            let names: Vec<String> =
                vec!["Title".into(), "Author".into(), "Other".into()];
            let labels = LabelSet::new(names);
            let tokens: Vec<String> =
                (0..t).map(|j| if (rng.next_u64() % 2) == 0 { "w".into() } else { format!("t{j}") }).collect();
            let inst = random_chain(&mut rng, t, labels.len(), tokens);
            let props: Vec<Property> = match trial % 3 {
                0 => vec![Property::token_label(&labels, "w")],
                1 => vec![Property::next_label(&labels, "Title").unwrap()],
                _ => vec![
                    Property::token_label(&labels, "w"),
                    Property::first_non_other(&labels).unwrap(),
                ],
            };
            if props.iter().any(|p| !p.in_domain(&inst)) {
                continue;
            }
            let ranges: Vec<ActiveRange> =
                props.iter().map(|p| ActiveRange::full(p.range_len())).collect();
            check_against_oracle(&inst, &labels, &props, &ranges);
        }
    }

    #[test]
    fn restricted_range_prunes_monotonically() {
        let mut rng = Rng64::new(13);
        for _ in 0..20 {
            let labels = LabelSet::new(vec!["Title".into(), "Author".into(), "Other".into()]);
            let t = 2 + (rng.next_u64() % 3) as usize;
            let inst =
                random_chain(&mut rng, t, labels.len(), (0..t).map(|_| "w".into()).collect());
            let p = Property::token_label(&labels, "w");
            let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
            let full = ActiveRange::full(p.range_len());
            let restricted = ActiveRange::restricted(p.range_len(), vec![0]);
            let ctx_full = [PropertyContext { property: &p, range: &full }];
            let ctx_res = [PropertyContext { property: &p, range: &restricted }];
            let agg_full = property_messages(&inst, &aug, &ctx_full).unwrap();
            let agg_res = property_messages(&inst, &aug, &ctx_res).unwrap();
            // shared entries: Val(0), Empty, Bottom
            assert!(agg_res.entry(&[0]) <= agg_full.entry(&[0]));
            assert!(
                agg_res.entry(&[restricted.empty_index()])
                    <= agg_full.entry(&[full.empty_index()])
            );
            assert!(
                agg_res.entry(&[restricted.bottom_index()])
                    <= agg_full.entry(&[full.bottom_index()])
            );
        }
    }

    #[test]
    fn restrict_ranges_from_viterbi_maps() {
        let labels = LabelSet::new(vec!["Title".into(), "Author".into(), "Other".into()]);
        // all instances' MAPs label "w" as Author (label 1)
        let mk = |bias: usize| {
            let node = vec![
                {
                    let mut row = vec![0.0; 3];
                    row[bias] = 5.0;
                    row
                },
                vec![0.0, 0.0, 1.0],
            ];
            ChainInstance::new(
                vec!["w".into(), "x".into()],
                node,
                vec![vec![vec![0.0; 3]; 3]],
            )
            .unwrap()
        };
        let p = Property::token_label(&labels, "w");
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        let ranges =
            restrict_ranges(&[mk(1), mk(1), mk(1)], &aug, std::slice::from_ref(&p)).unwrap();
        assert_eq!(ranges[0].active_indices(), &[1]);
        // two observed values
        let ranges =
            restrict_ranges(&[mk(0), mk(1)], &aug, std::slice::from_ref(&p)).unwrap();
        assert_eq!(ranges[0].active_indices(), &[0, 1]);
    }

    #[test]
    fn msg_instance_to_clique_shifts_argmax() {
        let inst = ChainInstance::new(
            vec!["w".into(), "w".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![vec![0.0; 2]; 2]],
        )
        .unwrap();
        let labels = simple_labels(2);
        let p = Property::token_label(&labels, "w");
        let p2 = Property::token_label(&labels, "w");
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        let range = ActiveRange::full(p.range_len());
        let range2 = ActiveRange::full(p2.range_len());
        let ctxs = [
            PropertyContext { property: &p, range: &range },
            PropertyContext { property: &p2, range: &range2 },
        ];
        let agg = property_messages(&inst, &aug, &ctxs).unwrap();
        // single-property view: zero incoming
        let zero = vec![vec![0.0; range.total()], vec![0.0; range2.total()]];
        let m = msg_instance_to_clique(&agg, 0, &zero);
        assert_eq!(m[0], 1.0);
        assert_eq!(m[1], 1.0);
        assert_eq!(m[range.bottom_index()], 2.0);
        // bonus +5 on Val(0) from the second property shifts the argmax
        let mut boosted = zero.clone();
        boosted[1][0] = 5.0;
        let m = msg_instance_to_clique(&agg, 0, &boosted);
        assert_eq!(m[0], 6.0); // both properties fire 0 together
        assert_eq!(m[1], 1.0);
    }

    #[test]
    fn beam_is_lower_bound_and_exact_at_full_width() {
        let mut rng = Rng64::new(17);
        for _ in 0..20 {
            let labels = LabelSet::new(vec!["Title".into(), "Author".into(), "Other".into()]);
            let t = 4;
            let inst =
                random_chain(&mut rng, t, labels.len(), (0..t).map(|_| "w".into()).collect());
            let p = Property::token_label(&labels, "w");
            let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
            let range = ActiveRange::full(p.range_len());
            let ctxs = [PropertyContext { property: &p, range: &range }];
            let exact = property_messages(&inst, &aug, &ctxs).unwrap();
            let full_width = inst.labels() * range.total();
            let beam_exact = beam_property_messages(&inst, &aug, &ctxs, full_width).unwrap();
            for idx in 0..exact.num_combinations() {
                assert_eq!(beam_exact.entry_by_index(idx), exact.entry_by_index(idx));
            }
            let narrow = beam_property_messages(&inst, &aug, &ctxs, 1).unwrap();
            for idx in 0..exact.num_combinations() {
                assert!(narrow.entry_by_index(idx) <= exact.entry_by_index(idx));
            }
            assert!(beam_property_messages(&inst, &aug, &ctxs, 0).is_err());
        }
    }

    #[test]
    fn local_absorb_zero_message_is_identity() {
        let labels = LabelSet::new(vec!["Title".into(), "Author".into(), "Other".into()]);
        let inst = ChainInstance::new(
            vec!["w".into(), "x".into()],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![vec![vec![0.0; 3]; 3]],
        )
        .unwrap();
        let p = Property::token_label(&labels, "w");
        let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
        let range = ActiveRange::full(p.range_len());
        let absorbed =
            local_absorb(&inst, &aug, &p, &range, &vec![0.0; range.total()]).unwrap();
        assert_eq!(absorbed, inst);
    }

    #[test]
    fn local_absorb_single_firing_matches_exact() {
        // "Title" can occur only at position 0 (elsewhere forbidden), so the
        // property fires at most once and local absorption is exact.
        let labels = LabelSet::new(vec!["Title".into(), "Author".into(), "Other".into()]);
        let mut rng = Rng64::new(19);
        for _ in 0..20 {
            let t = 3;
            let mut node: Vec<Vec<f64>> =
                (0..t).map(|_| (0..3).map(|_| rng.next_f64()).collect()).collect();
            for row in node.iter_mut().skip(1) {
                row[0] = f64::NEG_INFINITY; // Title only at the start
            }
            let inst = ChainInstance::new(
                vec!["a".into(), "b".into(), "c".into()],
                node,
                vec![vec![vec![0.0; 3]; 3]; 2],
            )
            .unwrap();
            let vocab = vec!["a".into(), "b".into(), "c".into()];
            let p = Property::before_token(&labels, "Title", &vocab).unwrap();
            let aug = augment_labels(&labels, std::slice::from_ref(&p)).unwrap();
            let range = ActiveRange::full(p.range_len());
            let mut message = vec![0.0; range.total()];
            for m in message.iter_mut() {
                *m = rng.next_f64() * 2.0;
            }
            // exact: maximize score + message(property value)
            let mut best = f64::NEG_INFINITY;
            for labeling in enumerate_labelings(t, 3) {
                let s = inst.score(&labeling);
                let s = match s {
                    Ok(x) if x > f64::NEG_INFINITY => x,
                    _ => continue,
                };
                let v = property_of_labeling(&p, &aug, &inst, &labeling).unwrap();
                let bonus = message[range.encode(v).unwrap()] - message[range.empty_index()];
                best = best.max(s + bonus);
            }
            let absorbed = local_absorb(&inst, &aug, &p, &range, &message).unwrap();
            let (_, score) = viterbi(&absorbed);
            assert!((score - best).abs() < 1e-9);

            // absorbing a constant-shifted message yields the same labeling
            let shifted: Vec<f64> = message.iter().map(|x| x + 3.5).collect();
            let a1 = local_absorb(&inst, &aug, &p, &range, &message).unwrap();
            let a2 = local_absorb(&inst, &aug, &p, &range, &shifted).unwrap();
            assert_eq!(viterbi(&a1).0, viterbi(&a2).0);
        }
    }
}
