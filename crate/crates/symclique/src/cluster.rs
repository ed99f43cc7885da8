//! Collective inference on the cluster graph.
//!
//! The model couples a set of chain instances through property cliques: one
//! clique per property, with one vertex per instance in the property's
//! domain. Rounds alternate two synchronous phases: every instance sends its
//! property-aware max-marginal vector to each incident clique, then every
//! clique answers with pinned clique-inference optima. Decoding picks, per
//! instance, the property-value combination maximizing its aggregated
//! message plus the incoming clique messages.

use crate::chain::{
    msg_instance_to_clique, property_messages, restrict_ranges, viterbi, ActiveRange,
    AggregatedMessage, ChainInstance, PropertyContext,
};
use crate::clique::engine as clique_engine;
use crate::majority::{lr_max_marginals_entry, modified_max_marginals_entry, LrConfig, MaskedMajority};
use crate::potentials::{CliquePotential, SymmetricPotential};
use crate::properties::{
    augment_labels, property_of_labeling, LabelAugmentation, LabelId, LabelSet, Property,
};
use crate::{Error, Result};

/// How the `Empty` and `Bottom` sentinels interact with clique potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SentinelMode {
    /// Sentinels are assignable but excluded from the count histogram: an
    /// instance whose property does not fire does not vote.
    #[default]
    Exclude,
    /// Sentinels count like ordinary values.
    Include,
}

/// Clique potential recipe for a property; instantiated once the clique size
/// and (possibly restricted) range are known. `lambda = 0` yields a zero
/// potential, which decouples the instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropertyPotentialSpec {
    Potts { lambda: f64 },
    Entropy { lambda: f64 },
    Makespan { lambda: f64 },
    Makespan2 { lambda: f64 },
    /// Linear majority with `W = lambda * I`: rewards the majority value's
    /// own count.
    MajorityDiag { lambda: f64 },
}

impl PropertyPotentialSpec {
    pub fn is_majority(self) -> bool {
        matches!(self, PropertyPotentialSpec::MajorityDiag { .. })
    }

    pub fn lambda(self) -> f64 {
        match self {
            PropertyPotentialSpec::Potts { lambda }
            | PropertyPotentialSpec::Entropy { lambda }
            | PropertyPotentialSpec::Makespan { lambda }
            | PropertyPotentialSpec::Makespan2 { lambda }
            | PropertyPotentialSpec::MajorityDiag { lambda } => lambda,
        }
    }

    fn instantiate(self, r: usize, clique_size: usize) -> Result<Option<CliquePotential>> {
        if r == 0 {
            return Ok(None);
        }
        let zero = || CliquePotential::additive_tables(vec![vec![0.0; clique_size + 1]; r]);
        let pot = match self {
            PropertyPotentialSpec::Potts { lambda } => {
                if lambda == 0.0 {
                    zero()?
                } else {
                    CliquePotential::potts(lambda, r)?
                }
            }
            PropertyPotentialSpec::Entropy { lambda } => {
                if lambda == 0.0 {
                    zero()?
                } else {
                    CliquePotential::entropy(lambda, r)?
                }
            }
            PropertyPotentialSpec::Makespan { lambda } => {
                if lambda == 0.0 {
                    zero()?
                } else {
                    CliquePotential::linear_makespan(lambda, r)?
                }
            }
            PropertyPotentialSpec::Makespan2 { lambda } => {
                if lambda == 0.0 {
                    zero()?
                } else {
                    CliquePotential::square_makespan(lambda, r)?
                }
            }
            PropertyPotentialSpec::MajorityDiag { lambda } => {
                let mut w = vec![vec![0.0; r]; r];
                for (i, row) in w.iter_mut().enumerate() {
                    row[i] = lambda;
                }
                CliquePotential::majority(w)?
            }
        };
        Ok(Some(pot))
    }
}

/// Which clique solver computes the pinned message table.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageSolver {
    /// The sweep family; applicable to any symmetric potential.
    AlphaPass,
    /// The modified sweep for majority potentials.
    ModifiedAlphaPass,
    /// Pinned Lagrangian relaxation for majority potentials.
    Lr(LrConfig),
}

/// One property coupling: the property, its clique potential recipe, and an
/// optional solver override (majority potentials default to the modified
/// sweep, everything else to the plain sweep).
#[derive(Debug, Clone)]
pub struct PropertyCoupling {
    pub property: Property,
    pub potential: PropertyPotentialSpec,
    pub solver: Option<MessageSolver>,
}

impl PropertyCoupling {
    pub fn new(property: Property, potential: PropertyPotentialSpec) -> Self {
        PropertyCoupling { property, potential, solver: None }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOptions {
    pub sentinel_mode: SentinelMode,
    /// Shrink property ranges to the values fired by independent Viterbi
    /// maps before building message grids.
    pub restrict_ranges: bool,
    /// Damping factor in `[0, 1)` applied to message updates; 0 disables.
    pub damping: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            sentinel_mode: SentinelMode::Exclude,
            restrict_ranges: true,
            damping: 0.0,
        }
    }
}

/// Default number of message rounds.
pub const DEFAULT_ROUNDS: usize = 3;

/// A symmetric potential over a property's message range: the base potential
/// sees only the first `counted` values (sentinels may be excluded).
#[derive(Debug, Clone)]
struct MaskedPotential {
    base: Option<CliquePotential>,
    counted: usize,
    total: usize,
}

impl SymmetricPotential for MaskedPotential {
    fn num_values(&self) -> usize {
        self.total
    }

    fn eval_counts(&self, counts: &[usize]) -> f64 {
        match &self.base {
            None => 0.0,
            Some(b) => b.eval_counts(&counts[..self.counted]),
        }
    }
}

struct BuiltProperty {
    property: Property,
    range: ActiveRange,
    potential: MaskedPotential,
    /// Majority weights over counted values, when the majority solvers run.
    weights: Option<Vec<Vec<f64>>>,
    solver: MessageSolver,
    dom: Vec<usize>,
}

/// Per-round diagnostics: decoded labelings (base label space), the joint
/// objective they score, and the largest message change.
#[derive(Debug, Clone)]
pub struct RoundDiagnostics {
    pub round: usize,
    pub labelings: Vec<Vec<LabelId>>,
    pub objective: f64,
    pub max_message_delta: f64,
}

pub struct CollectiveModel {
    labels: LabelSet,
    aug: LabelAugmentation,
    base_instances: Vec<ChainInstance>,
    aug_instances: Vec<ChainInstance>,
    props: Vec<BuiltProperty>,
    /// instance -> incident property indices
    incident: Vec<Vec<usize>>,
    /// [property][dom position] -> message vector over the property range
    m_to_clique: Vec<Vec<Vec<f64>>>,
    m_to_instance: Vec<Vec<Vec<f64>>>,
    agg: Vec<Option<AggregatedMessage>>,
    options: ClusterOptions,
    rounds_run: usize,
}

/// Builds the model: augments the label set for the given properties,
/// optionally restricts property ranges to Viterbi-observed values, and
/// zero-initializes all messages.
pub fn build(
    labels: LabelSet,
    instances: Vec<ChainInstance>,
    couplings: Vec<PropertyCoupling>,
    options: ClusterOptions,
) -> Result<CollectiveModel> {
    if !(0.0..1.0).contains(&options.damping) {
        return Err(Error::InvalidParameter(format!(
            "damping {} not in [0, 1)",
            options.damping
        )));
    }
    for inst in &instances {
        if inst.labels() != labels.len() {
            return Err(Error::Dimension(format!(
                "instance over {} labels in a {}-label model",
                inst.labels(),
                labels.len()
            )));
        }
    }
    let properties: Vec<Property> = couplings.iter().map(|c| c.property.clone()).collect();
    let aug = augment_labels(&labels, &properties)?;
    let aug_instances: Vec<ChainInstance> =
        instances.iter().map(|inst| inst.augmented(&aug)).collect();

    let ranges: Vec<ActiveRange> = if options.restrict_ranges {
        restrict_ranges(&instances, &aug, &properties)?
    } else {
        properties.iter().map(|p| ActiveRange::full(p.range_len())).collect()
    };

    let mut props = Vec::with_capacity(couplings.len());
    let mut incident = vec![Vec::new(); instances.len()];
    for ((coupling, property), range) in couplings.into_iter().zip(properties).zip(ranges) {
        let dom: Vec<usize> =
            (0..instances.len()).filter(|&i| property.in_domain(&instances[i])).collect();
        let counted = match options.sentinel_mode {
            SentinelMode::Exclude => range.num_values(),
            SentinelMode::Include => range.total(),
        };
        let base = coupling.potential.instantiate(counted, dom.len())?;
        let weights = match &base {
            Some(CliquePotential::Majority { w }) => Some(w.clone()),
            _ => None,
        };
        let solver = match coupling.solver {
            Some(s) => {
                if matches!(s, MessageSolver::ModifiedAlphaPass | MessageSolver::Lr(_))
                    && weights.is_none()
                {
                    return Err(Error::NotApplicable(
                        "majority message solvers need a majority potential".into(),
                    ));
                }
                s
            }
            None => {
                if weights.is_some() {
                    MessageSolver::ModifiedAlphaPass
                } else {
                    MessageSolver::AlphaPass
                }
            }
        };
        let solver = if counted == 0 { MessageSolver::AlphaPass } else { solver };
        for &i in &dom {
            incident[i].push(props.len());
        }
        props.push(BuiltProperty {
            property,
            potential: MaskedPotential { base, counted, total: range.total() },
            range,
            weights,
            solver,
            dom,
        });
    }

    let m_to_clique: Vec<Vec<Vec<f64>>> =
        props.iter().map(|p| vec![vec![0.0; p.potential.total]; p.dom.len()]).collect();
    let m_to_instance = m_to_clique.clone();
    let agg = vec![None; instances.len()];
    Ok(CollectiveModel {
        labels,
        aug,
        base_instances: instances,
        aug_instances,
        props,
        incident,
        m_to_clique,
        m_to_instance,
        agg,
        options,
        rounds_run: 0,
    })
}

fn damp(old: f64, fresh: f64, d: f64) -> f64 {
    if d == 0.0 || !old.is_finite() || !fresh.is_finite() {
        fresh
    } else {
        d * old + (1.0 - d) * fresh
    }
}

fn delta(old: f64, new: f64) -> f64 {
    if old.is_finite() && new.is_finite() {
        (new - old).abs()
    } else if old == new {
        0.0
    } else {
        f64::INFINITY
    }
}

impl CollectiveModel {
    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn augmentation(&self) -> &LabelAugmentation {
        &self.aug
    }

    pub fn instances(&self) -> &[ChainInstance] {
        &self.base_instances
    }

    pub fn num_properties(&self) -> usize {
        self.props.len()
    }

    /// Domain (instance indices) of one property clique.
    pub fn domain(&self, p: usize) -> &[usize] {
        &self.props[p].dom
    }

    pub fn active_range(&self, p: usize) -> &ActiveRange {
        &self.props[p].range
    }

    pub fn messages_to_clique(&self, p: usize) -> &[Vec<f64>] {
        &self.m_to_clique[p]
    }

    pub fn messages_to_instance(&self, p: usize) -> &[Vec<f64>] {
        &self.m_to_instance[p]
    }

    fn dom_pos(&self, p: usize, instance: usize) -> Option<usize> {
        self.props[p].dom.iter().position(|&i| i == instance)
    }

    /// The clique-to-instance message table of property `p` under the
    /// current instance-to-clique messages: entry `(j, v)` is the best
    /// clique score over assignments with vertex `j` pinned to `v`, counting
    /// only the other vertices' messages (vertex `j`'s own row is zeroed for
    /// its solve, realizing the sum over the remaining instances directly).
    fn clique_table(&self, p: usize) -> Vec<Vec<f64>> {
        let prop = &self.props[p];
        let psi = &self.m_to_clique[p];
        let n = psi.len();
        if n == 0 {
            return Vec::new();
        }
        let total = prop.potential.total;
        let mut table = vec![vec![f64::NEG_INFINITY; total]; n];
        let mut zeroed = psi.clone();
        for (i, row) in table.iter_mut().enumerate() {
            let own = std::mem::replace(&mut zeroed[i], vec![0.0; total]);
            for (v, entry) in row.iter_mut().enumerate() {
                let pin = crate::clique::Pin { vertex: i, value: v };
                *entry = match &prop.solver {
                    MessageSolver::AlphaPass => {
                        clique_engine::alpha_pass_pinned_raw(&zeroed, &prop.potential, pin).1
                    }
                    MessageSolver::ModifiedAlphaPass => {
                        let mask = MaskedMajority {
                            psi: &zeroed,
                            w: prop.weights.as_ref().expect("majority solver has weights"),
                            counted: prop.potential.counted,
                            total,
                        };
                        modified_max_marginals_entry(&mask, pin)
                    }
                    MessageSolver::Lr(config) => {
                        let mask = MaskedMajority {
                            psi: &zeroed,
                            w: prop.weights.as_ref().expect("majority solver has weights"),
                            counted: prop.potential.counted,
                            total,
                        };
                        lr_max_marginals_entry(&mask, pin, config)
                    }
                };
            }
            zeroed[i] = own;
        }
        table
    }

    /// The message from property clique `p` to `instance`: the best clique
    /// score over the other instances' messages with this instance pinned to
    /// each value in turn.
    pub fn msg_clique_to_instance(&self, p: usize, instance: usize) -> Result<Vec<f64>> {
        let pos = self.dom_pos(p, instance).ok_or_else(|| {
            Error::NotApplicable(format!("instance {instance} not in the domain of property {p}"))
        })?;
        let table = self.clique_table(p);
        Ok(table[pos].clone())
    }

    /// Runs `rounds` synchronous message rounds, decoding after each one.
    pub fn run(&mut self, rounds: usize) -> Result<Vec<RoundDiagnostics>> {
        if rounds < 1 {
            return Err(Error::InvalidParameter("need at least one round".into()));
        }
        let mut out = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let mut max_delta = 0.0f64;

            // instance -> clique phase, reading the previous round's
            // clique -> instance messages
            for i in 0..self.base_instances.len() {
                if self.incident[i].is_empty() {
                    continue;
                }
                let incident = self.incident[i].clone();
                let ctxs: Vec<PropertyContext> = incident
                    .iter()
                    .map(|&p| PropertyContext {
                        property: &self.props[p].property,
                        range: &self.props[p].range,
                    })
                    .collect();
                let agg = property_messages(&self.aug_instances[i], &self.aug, &ctxs)?;
                let incoming: Vec<Vec<f64>> = incident
                    .iter()
                    .map(|&p2| {
                        let pos = self.dom_pos(p2, i).expect("incident implies in domain");
                        self.m_to_instance[p2][pos].clone()
                    })
                    .collect();
                for (slot, &p) in incident.iter().enumerate() {
                    let fresh = msg_instance_to_clique(&agg, slot, &incoming);
                    let pos = self.dom_pos(p, i).expect("incident implies in domain");
                    for (v, f) in fresh.into_iter().enumerate() {
                        let old = self.m_to_clique[p][pos][v];
                        let new = damp(old, f, self.options.damping);
                        max_delta = max_delta.max(delta(old, new));
                        self.m_to_clique[p][pos][v] = new;
                    }
                }
                self.agg[i] = Some(agg);
            }

            // clique -> instance phase, using the fresh instance messages
            for p in 0..self.props.len() {
                let table = self.clique_table(p);
                for (pos, fresh) in table.into_iter().enumerate() {
                    for (v, f) in fresh.into_iter().enumerate() {
                        let old = self.m_to_instance[p][pos][v];
                        let new = damp(old, f, self.options.damping);
                        max_delta = max_delta.max(delta(old, new));
                        self.m_to_instance[p][pos][v] = new;
                    }
                }
            }

            self.rounds_run += 1;
            let labelings = self.decode()?;
            let objective = self.objective(&labelings)?;
            out.push(RoundDiagnostics {
                round: self.rounds_run,
                labelings,
                objective,
                max_message_delta: max_delta,
            });
        }
        Ok(out)
    }

    /// Decodes every instance against the current messages: instances
    /// without incident properties decode by Viterbi; the rest pick the
    /// combination maximizing `M(u) + sum_p m_{p->i}(u_p)` and traceback.
    /// Labels are reported in the base label space.
    pub fn decode(&self) -> Result<Vec<Vec<LabelId>>> {
        let mut out = Vec::with_capacity(self.base_instances.len());
        for i in 0..self.base_instances.len() {
            if self.incident[i].is_empty() {
                let (labels, _) = viterbi(&self.aug_instances[i]);
                out.push(self.aug.unrelabel(&labels));
                continue;
            }
            let agg = self.agg[i].as_ref().ok_or_else(|| {
                Error::InvalidParameter("decode requires at least one completed round".into())
            })?;
            let incident = &self.incident[i];
            let incoming: Vec<&[f64]> = incident
                .iter()
                .map(|&p| {
                    let pos = self.dom_pos(p, i).expect("incident implies in domain");
                    self.m_to_instance[p][pos].as_slice()
                })
                .collect();
            let mut best = f64::NEG_INFINITY;
            let mut best_idx = None;
            for idx in 0..agg.num_combinations() {
                let m = agg.entry_by_index(idx);
                if m == f64::NEG_INFINITY {
                    continue;
                }
                let u = agg.combination_of(idx);
                let mut s = m;
                for (slot, &uv) in u.iter().enumerate() {
                    s += incoming[slot][uv];
                }
                if best_idx.is_none() || s > best {
                    best = s;
                    best_idx = Some(idx);
                }
            }
            let idx = best_idx
                .ok_or_else(|| Error::InvalidParameter("no reachable combination".into()))?;
            let labels = agg.decode(idx).expect("finite entries decode");
            out.push(self.aug.unrelabel(&labels));
        }
        Ok(out)
    }

    /// The joint objective of a set of labelings: the sum of chain scores
    /// plus each property potential evaluated on the histogram of property
    /// values over its domain (honoring the sentinel mode).
    pub fn objective(&self, labelings: &[Vec<LabelId>]) -> Result<f64> {
        if labelings.len() != self.base_instances.len() {
            return Err(Error::Dimension(format!(
                "{} labelings for {} instances",
                labelings.len(),
                self.base_instances.len()
            )));
        }
        let mut total = 0.0;
        for (inst, labels) in self.base_instances.iter().zip(labelings) {
            total += inst.score(labels)?;
        }
        for prop in &self.props {
            let mut counts = vec![0usize; prop.potential.total];
            for &i in &prop.dom {
                let v = property_of_labeling(
                    &prop.property,
                    &self.aug,
                    &self.base_instances[i],
                    &labelings[i],
                )?;
                if let Some(enc) = prop.range.encode(v) {
                    counts[enc] += 1;
                }
            }
            total += prop.potential.eval_counts(&counts);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Rng64;

    fn simple_labels() -> LabelSet {
        LabelSet::new(vec!["A".into(), "B".into()])
    }

    fn random_instance(rng: &mut Rng64, t: usize, l: usize, key_token: &str) -> ChainInstance {
        let mut tokens: Vec<String> = (0..t).map(|j| format!("t{j}")).collect();
        let slot = rng.below(t);
        tokens[slot] = key_token.to_string();
        let node = (0..t).map(|_| (0..l).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let edge = (0..t - 1)
            .map(|_| (0..l).map(|_| (0..l).map(|_| rng.uniform(-0.5, 0.5)).collect()).collect())
            .collect();
        ChainInstance::new(tokens, node, edge).unwrap()
    }

    fn token_model(rng: &mut Rng64, num_instances: usize, lambda: f64, options: ClusterOptions) -> CollectiveModel {
        let labels = simple_labels();
        let instances: Vec<ChainInstance> = (0..num_instances)
            .map(|_| {
                let t = 2 + rng.below(3);
                random_instance(rng, t, 2, "w")
            })
            .collect();
        let p = Property::token_label(&labels, "w");
        build(
            labels,
            instances,
            vec![PropertyCoupling::new(p, PropertyPotentialSpec::Potts { lambda })],
            options,
        )
        .unwrap()
    }

    #[test]
    fn zero_properties_is_independent_viterbi() {
        let mut rng = Rng64::new(3);
        let labels = simple_labels();
        let instances: Vec<ChainInstance> =
            (0..4).map(|_| random_instance(&mut rng, 3, 2, "w")).collect();
        let expected: Vec<Vec<LabelId>> = instances.iter().map(|i| viterbi(i).0).collect();
        let mut model = build(labels, instances, Vec::new(), ClusterOptions::default()).unwrap();
        let diag = model.run(1).unwrap();
        assert_eq!(diag[0].labelings, expected);
        let sum: f64 = model
            .base_instances
            .iter()
            .zip(&expected)
            .map(|(i, l)| i.score(l).unwrap())
            .sum();
        assert_eq!(diag[0].objective, sum);
    }

    #[test]
    fn zero_potential_matches_independent_viterbi() {
        for seed in 0..20 {
            let mut rng = Rng64::new(500 + seed);
            let mut model = token_model(&mut rng, 3, 0.0, ClusterOptions::default());
            let expected: Vec<Vec<LabelId>> =
                model.base_instances.iter().map(|i| viterbi(i).0).collect();
            let diag = model.run(2).unwrap();
            assert_eq!(diag[1].labelings, expected, "seed {seed}");
        }
    }

    #[test]
    fn singleton_clique_message_is_unit_potential() {
        let labels = simple_labels();
        let inst = ChainInstance::new(vec!["w".into()], vec![vec![0.7, 0.1]], vec![]).unwrap();
        let p = Property::token_label(&labels, "w");
        let mut model = build(
            labels,
            vec![inst],
            vec![PropertyCoupling::new(p, PropertyPotentialSpec::Potts { lambda: 1.0 })],
            ClusterOptions { restrict_ranges: false, ..ClusterOptions::default() },
        )
        .unwrap();
        model.run(1).unwrap();
        let msg = model.msg_clique_to_instance(0, 0).unwrap();
        // C(e_v) = lambda for counted values, 0 for sentinels
        assert_eq!(msg[0], 1.0);
        assert_eq!(msg[1], 1.0);
        let range = model.active_range(0);
        assert_eq!(msg[range.empty_index()], 0.0);
        assert_eq!(msg[range.bottom_index()], 0.0);
    }

    #[test]
    fn clique_message_bounded_by_pinned_enumeration() {
        // the message excludes the target's own contribution: it can never
        // exceed (and for these sizes should match) the exact pinned optimum
        // over the other instances' messages plus the clique potential
        let mut rng = Rng64::new(11);
        let mut model = token_model(&mut rng, 3, 1.0, ClusterOptions::default());
        model.run(1).unwrap();
        let psi = model.messages_to_clique(0).to_vec();
        let prop = &model.props[0];
        let total = prop.potential.total;
        let n = psi.len();
        for (pos, &i) in model.domain(0).to_vec().iter().enumerate() {
            let msg = model.msg_clique_to_instance(0, i).unwrap();
            for (v, &m) in msg.iter().enumerate() {
                // enumeration over the other vertices' values
                let mut exact = f64::NEG_INFINITY;
                let others: Vec<usize> = (0..n).filter(|&j| j != pos).collect();
                let mut choice = vec![0usize; others.len()];
                loop {
                    let mut values = vec![0usize; n];
                    values[pos] = v;
                    let mut s = 0.0;
                    for (slot, &j) in others.iter().enumerate() {
                        values[j] = choice[slot];
                        s += psi[j][choice[slot]];
                    }
                    if s > f64::NEG_INFINITY {
                        let counts = crate::clique::engine::count_values(&values, total);
                        exact = exact.max(s + prop.potential.eval_counts(&counts));
                    }
                    let mut k = others.len();
                    let mut done = true;
                    while k > 0 {
                        k -= 1;
                        choice[k] += 1;
                        if choice[k] < total {
                            done = false;
                            break;
                        }
                        choice[k] = 0;
                    }
                    if done {
                        break;
                    }
                }
                assert!(m <= exact + 1e-9, "message exceeds the pinned optimum");
                if m.is_finite() {
                    assert!(exact.is_finite());
                }
            }
        }
    }

    /// Joint enumeration of all labelings of all instances.
    fn joint_oracle(model: &CollectiveModel) -> (Vec<Vec<LabelId>>, f64) {
        let l = model.labels.len();
        let sizes: Vec<usize> = model.base_instances.iter().map(|i| i.len()).collect();
        let total: usize = sizes.iter().sum();
        let mut flat = vec![0usize; total];
        let mut best = f64::NEG_INFINITY;
        let mut best_labelings = Vec::new();
        loop {
            let mut labelings = Vec::with_capacity(sizes.len());
            let mut off = 0;
            for &t in &sizes {
                labelings.push(flat[off..off + t].to_vec());
                off += t;
            }
            let obj = model.objective(&labelings).unwrap();
            if obj > best {
                best = obj;
                best_labelings = labelings;
            }
            let mut i = total;
            let mut done = true;
            while i > 0 {
                i -= 1;
                flat[i] += 1;
                if flat[i] < l {
                    done = false;
                    break;
                }
                flat[i] = 0;
            }
            if done {
                break;
            }
        }
        (best_labelings, best)
    }

    #[test]
    fn tiny_models_reach_joint_optimum() {
        let mut hits = 0;
        let trials = 20;
        for seed in 0..trials {
            let mut rng = Rng64::new(1000 + seed);
            let mut model = token_model(
                &mut rng,
                3,
                1.0,
                ClusterOptions { restrict_ranges: false, ..ClusterOptions::default() },
            );
            let diag = model.run(2).unwrap();
            let got = diag.last().unwrap().objective;
            let (_, want) = joint_oracle(&model);
            assert!(got <= want + 1e-9);
            if (got - want).abs() < 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= trials * 9 / 10, "only {hits}/{trials} reached the optimum");
    }

    #[test]
    fn ambiguous_instance_resolved_by_peers() {
        // four conformant instances label "w" as A; the fifth slightly
        // prefers B but the clique flips it
        let labels = simple_labels();
        let mk = |delta: f64| {
            ChainInstance::new(
                vec!["w".into(), "x".into()],
                vec![vec![0.5 + delta, 0.5], vec![0.0, 0.3]],
                vec![vec![vec![0.0; 2]; 2]],
            )
            .unwrap()
        };
        let mut instances: Vec<ChainInstance> = (0..4).map(|_| mk(0.4)).collect();
        instances.push(mk(-0.1)); // prefers B by 0.1
        let p = Property::token_label(&labels, "w");
        let (amb_labels, _) = viterbi(&instances[4]);
        assert_eq!(amb_labels[0], 1, "viterbi alone must pick the decoy");
        let mut model = build(
            labels,
            instances,
            vec![PropertyCoupling::new(p, PropertyPotentialSpec::Potts { lambda: 1.0 })],
            ClusterOptions { restrict_ranges: false, ..ClusterOptions::default() },
        )
        .unwrap();
        let diag = model.run(1).unwrap();
        for labeling in &diag[0].labelings {
            assert_eq!(labeling[0], 0, "collective decoding must agree on A");
        }
        let (joint, best) = joint_oracle(&model);
        assert_eq!(joint[4][0], 0);
        assert!((diag[0].objective - best).abs() < 1e-9);
    }

    #[test]
    fn sentinel_exclusion_keeps_histogram_clean() {
        // one instance without the token sits outside the domain; a
        // domain instance that decodes to Empty must not vote either
        let labels = simple_labels();
        let with = ChainInstance::new(vec!["w".into()], vec![vec![1.0, 0.0]], vec![]).unwrap();
        let without = ChainInstance::new(vec!["q".into()], vec![vec![1.0, 0.0]], vec![]).unwrap();
        let p = Property::token_label(&labels, "w");
        let model = build(
            labels,
            vec![with, without],
            vec![PropertyCoupling::new(p, PropertyPotentialSpec::Potts { lambda: 1.0 })],
            ClusterOptions { restrict_ranges: false, ..ClusterOptions::default() },
        )
        .unwrap();
        assert_eq!(model.domain(0), &[0]);
        // objective: two chain scores of 1.0 plus potts over one counted vote
        let obj = model.objective(&[vec![0], vec![0]]).unwrap();
        assert_eq!(obj, 1.0 + 1.0 + 1.0);
    }

    #[test]
    fn majority_property_potential_runs() {
        let mut rng = Rng64::new(21);
        let labels = simple_labels();
        let instances: Vec<ChainInstance> =
            (0..3).map(|_| random_instance(&mut rng, 2, 2, "w")).collect();
        let p = Property::token_label(&labels, "w");
        for solver in [None, Some(MessageSolver::Lr(LrConfig::default()))] {
            let mut coupling = PropertyCoupling::new(
                p.clone(),
                PropertyPotentialSpec::MajorityDiag { lambda: 0.8 },
            );
            coupling.solver = solver;
            let mut model = build(
                labels.clone(),
                instances.clone(),
                vec![coupling],
                ClusterOptions { restrict_ranges: false, ..ClusterOptions::default() },
            )
            .unwrap();
            let diag = model.run(2).unwrap();
            // objective is recomputable from the decoded labelings
            let again = model.objective(&diag[1].labelings).unwrap();
            assert_eq!(diag[1].objective, again);
        }
    }

    #[test]
    fn restricted_ranges_round_runs() {
        let mut rng = Rng64::new(33);
        let mut model = token_model(&mut rng, 4, 1.0, ClusterOptions::default());
        let diag = model.run(DEFAULT_ROUNDS).unwrap();
        assert_eq!(diag.len(), DEFAULT_ROUNDS);
        for d in &diag {
            let again = model.objective(&d.labelings).unwrap();
            assert_eq!(d.objective, again);
        }
    }
}
