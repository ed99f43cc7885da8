//! MAP inference for linear majority potentials.
//!
//! The objective is `F(v) = sum_i psi[i][v_i] + sum_v w[a][v] n_v` with `a`
//! the count argmax (ties to the lowest value id). Three solvers:
//!
//! * [`modified_alpha_pass`] — the sweep heuristic with the clique term
//!   folded into the vertex potentials; candidates whose majority value is
//!   not the swept value are discarded.
//! * [`exact_majority`] — exact: for each guessed majority value and count,
//!   a degree-constrained bipartite matching solved as min-cost flow.
//! * [`lr_solve`] — Lagrangian relaxation of the majority constraint with
//!   subgradient, golden-section, or conservative multiplier updates.

use crate::clique::{evaluate_objective, Assignment, CliqueProblem, Pin};
use crate::potentials::{majority_value, CliquePotential, ValueId};
use crate::{Error, Result};

/// A clique problem with a linear majority potential.
#[derive(Debug, Clone)]
pub struct MajorityProblem {
    psi: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

impl MajorityProblem {
    pub fn new(psi: Vec<Vec<f64>>, w: Vec<Vec<f64>>) -> Result<Self> {
        // reuse the clique-problem validation
        let problem = CliqueProblem::new(psi, CliquePotential::majority(w)?)?;
        let (psi, potential) = (problem.psi().to_vec(), problem.potential().clone());
        let w = match potential {
            CliquePotential::Majority { w } => w,
            _ => unreachable!(),
        };
        Ok(MajorityProblem { psi, w })
    }

    pub fn n(&self) -> usize {
        self.psi.len()
    }

    pub fn r(&self) -> usize {
        self.w.len()
    }

    pub fn psi(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// The same problem as a generic clique problem (for the oracle solvers).
    pub fn to_clique_problem(&self) -> CliqueProblem {
        CliqueProblem::new(self.psi.clone(), CliquePotential::majority(self.w.clone()).unwrap())
            .unwrap()
    }

    fn objective(&self, values: &[ValueId]) -> f64 {
        evaluate_objective(&self.to_clique_problem(), values).expect("valid assignment")
    }
}

// ---------------------------------------------------------------------------
// Masked majority core
//
// The cluster graph evaluates majority potentials over property-value ranges
// where trailing sentinel values may be excluded from the count histogram.
// All majority solvers run over this shared form: `counted <= total` values
// participate in counts and carry weights; the rest only contribute vertex
// potentials. A pure majority problem is the special case counted == total.
// ---------------------------------------------------------------------------

pub(crate) struct MaskedMajority<'a> {
    pub psi: &'a [Vec<f64>],
    /// counted x counted weight matrix
    pub w: &'a [Vec<f64>],
    pub counted: usize,
    pub total: usize,
}

impl MaskedMajority<'_> {
    fn n(&self) -> usize {
        self.psi.len()
    }

    fn weight(&self, a: ValueId, v: ValueId) -> f64 {
        if v < self.counted {
            self.w[a][v]
        } else {
            0.0
        }
    }

    fn counted_counts(&self, values: &[ValueId]) -> Vec<usize> {
        let mut counts = vec![0usize; self.counted];
        for &v in values {
            if v < self.counted {
                counts[v] += 1;
            }
        }
        counts
    }

    /// True objective: vertex score plus the majority row of the counted
    /// histogram. Accumulated exactly like `evaluate_objective` on a pure
    /// majority problem so scores compare bitwise.
    pub(crate) fn objective(&self, values: &[ValueId]) -> f64 {
        let mut s = 0.0;
        for (i, &v) in values.iter().enumerate() {
            s += self.psi[i][v];
        }
        s + self.clique_score(&self.counted_counts(values))
    }

    fn clique_score(&self, counted_counts: &[usize]) -> f64 {
        if self.counted == 0 {
            return 0.0;
        }
        let a = majority_value(counted_counts);
        self.w[a].iter().zip(counted_counts).map(|(wv, &c)| wv * c as f64).sum()
    }
}

// ---------------------------------------------------------------------------
// Modified alpha-pass
// ---------------------------------------------------------------------------

/// Modified sweep over `mask`: the clique term is folded into the vertex
/// potentials (`psi[i][v] + w[alpha][v]`) and candidates whose counted
/// majority is not `alpha` are discarded. Returns the best surviving
/// candidate by true objective, or `None` if nothing survives.
pub(crate) fn modified_sweep(mask: &MaskedMajority, pin: Option<Pin>) -> Option<(Vec<ValueId>, f64)> {
    use crate::clique::engine::alpha_data;

    let mut best: Option<(Vec<ValueId>, f64)> = None;
    for alpha in 0..mask.counted {
        let psi_mod: Vec<Vec<f64>> = mask
            .psi
            .iter()
            .map(|row| row.iter().enumerate().map(|(v, &x)| x + mask.weight(alpha, v)).collect())
            .collect();
        let data = alpha_data(&psi_mod, alpha);

        let mut order: Vec<usize> = Vec::with_capacity(mask.n());
        match pin {
            Some(p) if p.value == alpha => {
                order.push(p.vertex);
                order.extend(data.order.iter().copied().filter(|&i| i != p.vertex));
            }
            Some(p) => order.extend(data.order.iter().copied().filter(|&i| i != p.vertex)),
            None => order.extend(data.order.iter().copied()),
        }

        let mut values: Vec<ValueId> = data.bn_value.clone();
        if let Some(p) = pin {
            values[p.vertex] = p.value;
        }
        let mut counts = mask.counted_counts(&values);
        for &i in &order {
            let from = values[i];
            if from != alpha {
                if from < mask.counted {
                    counts[from] -= 1;
                }
                counts[alpha] += 1;
                values[i] = alpha;
            }
            if majority_value(&counts) == alpha {
                let score = mask.objective(&values);
                match &best {
                    Some((_, b)) if score <= *b => {}
                    _ => best = Some((values.clone(), score)),
                }
            }
        }
    }
    best
}

/// The modified alpha-pass heuristic for linear majority potentials.
pub fn modified_alpha_pass(problem: &MajorityProblem) -> Result<Assignment> {
    let mask = MaskedMajority {
        psi: &problem.psi,
        w: &problem.w,
        counted: problem.r(),
        total: problem.r(),
    };
    let (values, score) =
        modified_sweep(&mask, None).expect("the all-alpha candidate is always feasible");
    Ok(Assignment { values, score })
}

/// One pinned modified-sweep message entry: the best surviving candidate
/// score with `values[pin.vertex] = pin.value`, falling back to a direct
/// evaluation when no sweep candidate survives (tiny or heavily pinned
/// cliques).
pub(crate) fn modified_max_marginals_entry(mask: &MaskedMajority, pin: Pin) -> f64 {
    if let Some((_, score)) = modified_sweep(mask, Some(pin)) {
        score
    } else {
        let mut values = vec![0usize; mask.n()];
        values[pin.vertex] = pin.value;
        mask.objective(&values)
    }
}

// ---------------------------------------------------------------------------
// Exact solver: degree-constrained matching by min-cost flow
// ---------------------------------------------------------------------------

mod flow {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    struct HeapItem(f64, usize);

    impl PartialEq for HeapItem {
        fn eq(&self, other: &Self) -> bool {
            self.0 == other.0 && self.1 == other.1
        }
    }
    impl Eq for HeapItem {}
    impl PartialOrd for HeapItem {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for HeapItem {
        fn cmp(&self, other: &Self) -> Ordering {
            // min-heap by cost
            other.0.partial_cmp(&self.0).expect("costs are not NaN").then(other.1.cmp(&self.1))
        }
    }

    /// Min-cost flow by successive shortest paths with Johnson potentials.
    /// All edge costs must be non-negative when added.
    pub struct MinCostFlow {
        to: Vec<usize>,
        cap: Vec<i64>,
        cost: Vec<f64>,
        adj: Vec<Vec<usize>>,
    }

    impl MinCostFlow {
        pub fn new(nodes: usize) -> Self {
            MinCostFlow { to: Vec::new(), cap: Vec::new(), cost: Vec::new(), adj: vec![Vec::new(); nodes] }
        }

        pub fn add_edge(&mut self, u: usize, v: usize, cap: i64, cost: f64) -> usize {
            let id = self.to.len();
            self.to.push(v);
            self.cap.push(cap);
            self.cost.push(cost);
            self.adj[u].push(id);
            self.to.push(u);
            self.cap.push(0);
            self.cost.push(-cost);
            self.adj[v].push(id + 1);
            id
        }

        /// Flow currently on the forward edge `id`.
        pub fn flow(&self, id: usize) -> i64 {
            self.cap[id ^ 1]
        }

        /// Sends exactly `want` units from `s` to `t`; returns the total cost
        /// or `None` when the max flow is smaller.
        pub fn solve(&mut self, s: usize, t: usize, mut want: i64) -> Option<f64> {
            let n = self.adj.len();
            let mut phi = vec![0.0f64; n];
            let mut total = 0.0;
            while want > 0 {
                let mut dist = vec![f64::INFINITY; n];
                let mut prev_edge = vec![usize::MAX; n];
                let mut done = vec![false; n];
                dist[s] = 0.0;
                let mut heap = BinaryHeap::new();
                heap.push(HeapItem(0.0, s));
                while let Some(HeapItem(d, u)) = heap.pop() {
                    if done[u] || d > dist[u] {
                        continue;
                    }
                    done[u] = true;
                    for &e in &self.adj[u] {
                        if self.cap[e] <= 0 {
                            continue;
                        }
                        let v = self.to[e];
                        // reduced cost; clamp tiny negative float residue
                        let rc = (self.cost[e] + phi[u] - phi[v]).max(0.0);
                        let nd = d + rc;
                        if nd < dist[v] {
                            dist[v] = nd;
                            prev_edge[v] = e;
                            heap.push(HeapItem(nd, v));
                        }
                    }
                }
                if !dist[t].is_finite() {
                    return None;
                }
                for v in 0..n {
                    if dist[v].is_finite() {
                        phi[v] += dist[v];
                    }
                }
                // bottleneck along the path
                let mut bn = want;
                let mut v = t;
                while v != s {
                    let e = prev_edge[v];
                    bn = bn.min(self.cap[e]);
                    v = self.to[e ^ 1];
                }
                let mut v = t;
                while v != s {
                    let e = prev_edge[v];
                    self.cap[e] -= bn;
                    self.cap[e ^ 1] += bn;
                    total += self.cost[e] * bn as f64;
                    v = self.to[e ^ 1];
                }
                want -= bn;
            }
            Some(total)
        }
    }
}

/// Solves one degree-constrained subproblem by min-cost flow: exactly `k`
/// vertices take `alpha` and every other value `v` takes at most `caps[v]`
/// vertices, maximizing `sum_i (psi[i][v_i] + w[alpha][v_i])`. Returns `None`
/// when infeasible.
fn solve_degree_constrained(
    psi: &[Vec<f64>],
    w: &[Vec<f64>],
    alpha: ValueId,
    k: usize,
    caps: &[usize],
) -> Option<Vec<ValueId>> {
    let n = psi.len();
    let r = w.len();
    if k > n {
        return None;
    }
    // shift all assignment costs to be non-negative; every unit of flow
    // crosses exactly one vertex->value edge, so the shift is a constant
    let mut c0 = f64::NEG_INFINITY;
    for row in psi.iter() {
        for (v, &x) in row.iter().enumerate() {
            c0 = c0.max(x + w[alpha][v]);
        }
    }
    let source = 0;
    let vertex = |i: usize| 1 + i;
    let value = |v: usize| 1 + n + v;
    let t_rest = 1 + n + r;
    let t_all = t_rest + 1;
    let mut net = flow::MinCostFlow::new(t_all + 1);
    let mut pick = vec![vec![usize::MAX; r]; n];
    for i in 0..n {
        net.add_edge(source, vertex(i), 1, 0.0);
        for v in 0..r {
            pick[i][v] = net.add_edge(vertex(i), value(v), 1, c0 - (psi[i][v] + w[alpha][v]));
        }
    }
    for v in 0..r {
        if v == alpha {
            // exactly k: the alpha node feeds the super-sink directly
            net.add_edge(value(v), t_all, k as i64, 0.0);
        } else {
            net.add_edge(value(v), t_rest, caps[v] as i64, 0.0);
        }
    }
    net.add_edge(t_rest, t_all, (n - k) as i64, 0.0);
    net.solve(source, t_all, n as i64)?;
    let mut values = vec![0usize; n];
    for i in 0..n {
        let mut assigned = false;
        for v in 0..r {
            if net.flow(pick[i][v]) > 0 {
                values[i] = v;
                assigned = true;
                break;
            }
        }
        debug_assert!(assigned, "vertex {i} left unassigned by a feasible flow");
    }
    Some(values)
}

/// Solution of one `(alpha, k)` majority subproblem.
#[derive(Debug, Clone)]
pub struct MajoritySubproblem {
    /// The maximizing assignment, scored by the true majority objective.
    pub assignment: Assignment,
    /// Objective under the guessed majority value,
    /// `sum_i (psi[i][v_i] + w[alpha][v_i])`.
    pub guessed_objective: f64,
}

/// Maximizes `sum_i (psi[i][v_i] + w[alpha][v_i])` subject to exactly `k`
/// vertices at `alpha` and every other value used at most `k` times.
/// Integral optima are guaranteed; returns `Ok(None)` when the constraints
/// are unsatisfiable.
pub fn exact_majority_subproblem(
    problem: &MajorityProblem,
    alpha: ValueId,
    k: usize,
) -> Result<Option<MajoritySubproblem>> {
    let (n, r) = (problem.n(), problem.r());
    if alpha >= r {
        return Err(Error::ValueOutOfRange { value: alpha, r });
    }
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} not in 1..={n}")));
    }
    let caps = vec![k; r];
    match solve_degree_constrained(&problem.psi, &problem.w, alpha, k, &caps) {
        None => Ok(None),
        Some(values) => {
            let guessed: f64 = values
                .iter()
                .enumerate()
                .map(|(i, &v)| problem.psi[i][v] + problem.w[alpha][v])
                .sum();
            let score = problem.objective(&values);
            Ok(Some(MajoritySubproblem {
                assignment: Assignment { values, score },
                guessed_objective: guessed,
            }))
        }
    }
}

/// Exact MAP for the linear majority objective: solves one degree-constrained
/// matching per guessed majority value and count, and keeps the best true
/// objective.
///
/// The per-subproblem caps are tightened to `k - 1` for values below the
/// guess so that each subproblem's feasible set has the guess as its count
/// argmax under the lowest-id tie rule; the subproblems then partition the
/// assignment space and the best one is the global optimum. Large counts
/// (where no cap can bind) skip the flow and reuse the sweep state, which is
/// vertex-optimal for a fixed count.
pub fn exact_majority(problem: &MajorityProblem) -> Result<Assignment> {
    let (n, r) = (problem.n(), problem.r());
    let mut best: Option<(Vec<ValueId>, f64)> = None;
    let k_min = n.div_ceil(r);
    for alpha in 0..r {
        // counts k where even n - k vertices cannot violate any cap
        let greedy_min = if alpha == 0 { n.div_ceil(2) } else { (n + 1).div_ceil(2) };
        let psi_mod: Vec<Vec<f64>> = problem
            .psi
            .iter()
            .map(|row| row.iter().enumerate().map(|(v, &x)| x + problem.w[alpha][v]).collect())
            .collect();
        let data = crate::clique::engine::alpha_data(&psi_mod, alpha);

        for k in k_min..greedy_min.min(n + 1) {
            let mut caps = vec![0usize; r];
            for (v,c) in caps.iter_mut().enumerate() {
                *c = if v < alpha { k - 1 } else { k };
            }
            if let Some(values) = solve_degree_constrained(&problem.psi, &problem.w, alpha, k, &caps)
            {
                let score = problem.objective(&values);
                match &best {
                    Some((_, b)) if score <= *b => {}
                    _ => best = Some((values, score)),
                }
            }
        }

        // incremental sweep over the remaining counts
        let mut values = data.bn_value.clone();
        let mut taken = 0usize;
        for &i in &data.order {
            values[i] = alpha;
            taken += 1;
            if taken >= greedy_min.max(k_min) {
                let score = problem.objective(&values);
                match &best {
                    Some((_, b)) if score <= *b => {}
                    _ => best = Some((values.clone(), score)),
                }
            }
        }
    }
    let (values, score) = best.expect("the all-alpha candidates always exist");
    Ok(Assignment { values, score })
}

// ---------------------------------------------------------------------------
// Lagrangian relaxation
// ---------------------------------------------------------------------------

/// Non-negative multipliers for the relaxed majority constraints, together
/// with the guessed majority value.
#[derive(Debug, Clone)]
pub struct Multipliers {
    pub gamma: Vec<f64>,
    pub alpha: ValueId,
}

impl Multipliers {
    pub fn zero(r: usize, alpha: ValueId) -> Self {
        Multipliers { gamma: vec![0.0; r], alpha }
    }
}

/// Multiplier update strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrStrategy {
    /// All multipliers move along the violation vector with step `c/(1+k)`.
    /// The weakest of the three in practice; kept for comparison runs.
    Subgradient,
    /// Golden-section line search on the worst violator's multiplier.
    Golden,
    /// Conservative coordinate descent: move the worst violator's multiplier
    /// barely enough to flip one vertex.
    Conservative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrConfig {
    pub max_iters: usize,
    /// Relative tolerance: termination accepts residual complementary
    /// slackness up to this fraction of the violating multiplier's upper
    /// bound.
    pub tolerance: f64,
    pub strategy: LrStrategy,
    /// Step-size constant for the subgradient schedule `c/(1+k)`.
    pub subgradient_c: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            max_iters: 200,
            tolerance: 1e-2,
            strategy: LrStrategy::Conservative,
            subgradient_c: 1.0,
        }
    }
}

/// Result of a Lagrangian-relaxation solve.
#[derive(Debug, Clone)]
pub struct LrOutcome {
    pub assignment: Assignment,
    /// Upper bound on the optimum: the largest over guessed majority values
    /// of the lowest Lagrangian seen for that guess.
    pub bound: f64,
    /// False when any per-guess loop ran out of iterations.
    pub converged: bool,
}

/// One per-iteration diagnostics row.
#[derive(Debug, Clone)]
pub struct LrTraceRow {
    pub alpha: ValueId,
    pub iter: usize,
    pub l_value: f64,
    pub worst_value: Option<ValueId>,
    pub violation: f64,
}

struct LrState<'a> {
    mask: &'a MaskedMajority<'a>,
    alpha: ValueId,
    gamma: Vec<f64>,
    pin: Option<Pin>,
}

impl LrState<'_> {
    fn gamma_at(&self, v: ValueId) -> f64 {
        if v < self.mask.counted {
            self.gamma[v]
        } else {
            0.0
        }
    }

    fn gamma_sum(&self) -> f64 {
        self.gamma.iter().sum()
    }

    /// Modified vertex potential `psi^alpha[i][v]`.
    fn psi_alpha(&self, i: usize, v: ValueId) -> f64 {
        let bonus = if v == self.alpha { self.gamma_sum() } else { 0.0 };
        self.mask.psi[i][v] + self.mask.weight(self.alpha, v) - self.gamma_at(v) + bonus
    }

    /// Per-vertex argmax of `psi^alpha`, preferring `alpha` then the lowest
    /// value id on ties; honors the pin.
    fn argmax_assignment(&self) -> Vec<ValueId> {
        let n = self.mask.n();
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            if let Some(p) = self.pin {
                if p.vertex == i {
                    z.push(p.value);
                    continue;
                }
            }
            let mut best_v = self.alpha;
            let mut best = self.psi_alpha(i, self.alpha);
            for v in 0..self.mask.total {
                if v == self.alpha {
                    continue;
                }
                let s = self.psi_alpha(i, v);
                if s > best {
                    best = s;
                    best_v = v;
                }
            }
            z.push(best_v);
        }
        z
    }

    /// `L(gamma)` and its maximizing assignment. The Lagrangian is
    /// accumulated as guessed-objective + penalty so that converged bounds
    /// compare exactly against objective scores.
    fn compute_l(&self) -> (f64, Vec<ValueId>) {
        let z = self.argmax_assignment();
        let counts = self.mask.counted_counts(&z);
        let mut obj = 0.0;
        for (i, &v) in z.iter().enumerate() {
            obj += self.mask.psi[i][v];
        }
        if self.mask.counted > 0 {
            obj += self.mask.w[self.alpha]
                .iter()
                .zip(&counts)
                .map(|(wv, &c)| wv * c as f64)
                .sum::<f64>();
        }
        let count_alpha = counts.get(self.alpha).copied().unwrap_or(0) as f64;
        let penalty: f64 = self
            .gamma
            .iter()
            .enumerate()
            .map(|(v, &g)| g * (count_alpha - counts[v] as f64))
            .sum();
        (obj + penalty, z)
    }

    /// `psi[i][v] + w[alpha][v] - psi[i][v'] - w[alpha][v']`
    fn delta_psi(&self, i: usize, v: ValueId, v2: ValueId) -> f64 {
        self.mask.psi[i][v] + self.mask.weight(self.alpha, v)
            - self.mask.psi[i][v2]
            - self.mask.weight(self.alpha, v2)
    }

    /// Second-best value of vertex `i` under `psi^alpha`, excluding `v`.
    fn runner_up(&self, i: usize, v: ValueId) -> ValueId {
        let mut best_v = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        // prefer alpha, then the lowest id, like the argmax
        let order = std::iter::once(self.alpha).chain((0..self.mask.total).filter(|&x| x != self.alpha));
        for cand in order {
            if cand == v {
                continue;
            }
            let s = self.psi_alpha(i, cand);
            if s > best {
                best = s;
                best_v = cand;
            }
        }
        best_v
    }

    /// Flip-point multiplier value for vertex `i` and value `v`.
    fn flip_level(&self, i: usize, v: ValueId, beta: ValueId) -> f64 {
        if beta != self.alpha {
            self.delta_psi(i, v, beta) + self.gamma_at(beta)
        } else {
            let others: f64 = (0..self.mask.counted).filter(|&x| x != v).map(|x| self.gamma[x]).sum();
            0.5 * (self.delta_psi(i, v, self.alpha) - others)
        }
    }

    /// Upper bound on `gamma[v]`: past it every vertex currently at `v` has
    /// flipped away.
    fn upper_bound(&self, z: &[ValueId], v: ValueId) -> Option<f64> {
        let mut ub: Option<f64> = None;
        for (i, &zi) in z.iter().enumerate() {
            if zi != v || self.pin.map(|p| p.vertex == i).unwrap_or(false) {
                continue;
            }
            let beta = self.runner_up(i, v);
            let level = self.flip_level(i, v, beta);
            ub = Some(match ub {
                Some(u) => u.max(level),
                None => level,
            });
        }
        ub
    }
}

/// Worst constraint violation of `z` under the multipliers.
enum Violation {
    /// Some value's count exceeds the guess's count.
    Count { value: ValueId },
    /// Counts are feasible but complementary slackness is off.
    Slack { value: ValueId, magnitude: f64 },
    None,
}

fn worst_violation(state: &LrState, z: &[ValueId]) -> Violation {
    let counts = state.mask.counted_counts(z);
    if state.mask.counted == 0 {
        return Violation::None;
    }
    let ca = counts[state.alpha];
    let mut worst: Option<(usize, ValueId)> = None;
    for (v, &c) in counts.iter().enumerate() {
        if v != state.alpha && c > ca {
            let excess = c - ca;
            if worst.map(|(e, _)| excess > e).unwrap_or(true) {
                worst = Some((excess, v));
            }
        }
    }
    if let Some((_, v)) = worst {
        return Violation::Count { value: v };
    }
    let mut worst: Option<(f64, ValueId)> = None;
    for (v, &g) in state.gamma.iter().enumerate() {
        if v == state.alpha {
            continue;
        }
        let mag = g * (ca as f64 - counts[v] as f64);
        if mag > 0.0 && worst.map(|(m, _)| mag > m).unwrap_or(true) {
            worst = Some((mag, v));
        }
    }
    match worst {
        Some((magnitude, value)) => Violation::Slack { value, magnitude },
        None => Violation::None,
    }
}

fn conservative_update(state: &mut LrState, z: &[ValueId], violation: &Violation) {
    match *violation {
        Violation::Count { value: v } => {
            // raise gamma[v] just enough to flip the easiest vertex off v
            let mut new_gamma = f64::INFINITY;
            for (i, &zi) in z.iter().enumerate() {
                if zi != v || state.pin.map(|p| p.vertex == i).unwrap_or(false) {
                    continue;
                }
                let beta = state.runner_up(i, v);
                new_gamma = new_gamma.min(state.flip_level(i, v, beta));
            }
            if new_gamma.is_finite() {
                state.gamma[v] = new_gamma.max(0.0);
            }
        }
        Violation::Slack { value: v, .. } => {
            // lower gamma[v] barely enough to flip one vertex back to v
            let mut new_gamma = f64::NEG_INFINITY;
            for (i, &zi) in z.iter().enumerate() {
                if zi == v || state.pin.map(|p| p.vertex == i).unwrap_or(false) {
                    continue;
                }
                new_gamma = new_gamma.max(state.flip_level(i, v, zi));
            }
            if new_gamma.is_finite() {
                state.gamma[v] = new_gamma.max(0.0);
            } else {
                state.gamma[v] = 0.0;
            }
        }
        Violation::None => {}
    }
}

fn golden_update(state: &mut LrState, z: &[ValueId], violation: &Violation) {
    let (v, increase) = match *violation {
        Violation::Count { value } => (value, true),
        Violation::Slack { value, .. } => (value, false),
        Violation::None => return,
    };
    let hi = if increase {
        match state.upper_bound(z, v) {
            Some(u) if u > 0.0 => u,
            _ => return,
        }
    } else {
        state.gamma[v]
    };
    if !(hi > 0.0) {
        state.gamma[v] = 0.0;
        return;
    }
    let eval = |state: &mut LrState, x: f64| -> f64 {
        let old = state.gamma[v];
        state.gamma[v] = x;
        let (l, _) = state.compute_l();
        state.gamma[v] = old;
        l
    };
    let inv_phi = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (0.0f64, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(state, x1);
    let mut f2 = eval(state, x2);
    let mut best = (f1, x1);
    if f2 < best.0 {
        best = (f2, x2);
    }
    for _ in 0..24 {
        // ties resolve toward the lower sub-interval
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(state, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(state, x2);
        }
        if f1 < best.0 {
            best = (f1, x1);
        }
        if f2 < best.0 {
            best = (f2, x2);
        }
    }
    state.gamma[v] = best.1.max(0.0);
}

fn subgradient_update(state: &mut LrState, z: &[ValueId], step_index: usize, c: f64) {
    let counts = state.mask.counted_counts(z);
    let ca = counts[state.alpha] as f64;
    let eta = c / (1.0 + step_index as f64);
    for v in 0..state.mask.counted {
        if v == state.alpha {
            continue;
        }
        let d = counts[v] as f64 - ca;
        state.gamma[v] = (state.gamma[v] + eta * d).max(0.0);
    }
}

/// Modified vertex potentials `psi^alpha` and the Lagrangian value
/// `L(gamma)` with its per-vertex maximizer. Ties prefer the guessed value,
/// then the lowest value id.
pub fn compute_l(problem: &MajorityProblem, mult: &Multipliers) -> Result<(f64, Vec<ValueId>)> {
    let r = problem.r();
    if mult.alpha >= r {
        return Err(Error::ValueOutOfRange { value: mult.alpha, r });
    }
    if mult.gamma.len() != r {
        return Err(Error::Dimension(format!("{} multipliers for {r} values", mult.gamma.len())));
    }
    if mult.gamma.iter().any(|&g| g < 0.0) {
        return Err(Error::InvalidParameter("multipliers must be non-negative".into()));
    }
    let mask = MaskedMajority { psi: &problem.psi, w: &problem.w, counted: r, total: r };
    let state = LrState { mask: &mask, alpha: mult.alpha, gamma: mult.gamma.clone(), pin: None };
    Ok(state.compute_l())
}

/// One multiplier update for the given strategy; `step` indexes the
/// subgradient schedule. Conservative and golden updates touch only the
/// worst violator; a violation-free state is returned unchanged (except
/// under subgradient, whose direction is then zero anyway).
pub fn update_gamma(
    problem: &MajorityProblem,
    mult: &Multipliers,
    z: &[ValueId],
    strategy: LrStrategy,
    step: usize,
    config: &LrConfig,
) -> Result<Multipliers> {
    let r = problem.r();
    if z.len() != problem.n() {
        return Err(Error::Dimension(format!("{} values for {} vertices", z.len(), problem.n())));
    }
    let mask = MaskedMajority { psi: &problem.psi, w: &problem.w, counted: r, total: r };
    let mut state =
        LrState { mask: &mask, alpha: mult.alpha, gamma: mult.gamma.clone(), pin: None };
    let violation = worst_violation(&state, z);
    match strategy {
        LrStrategy::Subgradient => subgradient_update(&mut state, z, step, config.subgradient_c),
        LrStrategy::Golden => golden_update(&mut state, z, &violation),
        LrStrategy::Conservative => conservative_update(&mut state, z, &violation),
    }
    Ok(Multipliers { gamma: state.gamma, alpha: mult.alpha })
}

struct AlphaRun {
    best: Option<(Vec<ValueId>, f64)>,
    min_l: f64,
    converged: bool,
}

fn lr_run_alpha(
    mask: &MaskedMajority,
    alpha: ValueId,
    pin: Option<Pin>,
    config: &LrConfig,
    mut trace: Option<&mut Vec<LrTraceRow>>,
) -> AlphaRun {
    let mut state = LrState { mask, alpha, gamma: vec![0.0; mask.counted], pin };
    let mut run = AlphaRun { best: None, min_l: f64::INFINITY, converged: false };

    let feasible = |values: &[ValueId]| -> bool {
        if mask.counted == 0 {
            return true;
        }
        majority_value(&mask.counted_counts(values)) == alpha
    };
    let offer = |run: &mut AlphaRun, values: &[ValueId]| {
        let score = mask.objective(values);
        match &run.best {
            Some((_, b)) if score <= *b => {}
            _ => run.best = Some((values.to_vec(), score)),
        }
    };

    // feasible baseline: everything at alpha (except a pinned vertex)
    {
        let mut base = vec![alpha; mask.n()];
        if let Some(p) = pin {
            base[p.vertex] = p.value;
        }
        if pin.is_none() || feasible(&base) {
            offer(&mut run, &base);
        } else if pin.is_some() {
            // score it anyway: pinned tables need a candidate per pin
            offer(&mut run, &base);
        }
    }

    let mut last_z: Option<Vec<ValueId>> = None;
    for iter in 0..config.max_iters {
        let (l, z) = state.compute_l();
        run.min_l = run.min_l.min(l);
        if feasible(&z) {
            offer(&mut run, &z);
        }
        let violation = worst_violation(&state, &z);
        let (worst_value, magnitude) = match violation {
            Violation::Count { value } => (Some(value), f64::INFINITY),
            Violation::Slack { value, magnitude } => (Some(value), magnitude),
            Violation::None => (None, 0.0),
        };
        if let Some(t) = trace.as_deref_mut() {
            t.push(LrTraceRow { alpha, iter, l_value: l, worst_value, violation: magnitude });
        }
        let tol_scale = match worst_value {
            Some(v) => match state.upper_bound(&z, v) {
                Some(u) if u > 0.0 => u,
                _ => l.abs().max(1.0),
            },
            None => 1.0,
        };
        if magnitude <= config.tolerance * tol_scale {
            run.converged = true;
            last_z = Some(z);
            break;
        }
        match config.strategy {
            LrStrategy::Subgradient => subgradient_update(&mut state, &z, iter, config.subgradient_c),
            LrStrategy::Golden => golden_update(&mut state, &z, &violation),
            LrStrategy::Conservative => conservative_update(&mut state, &z, &violation),
        }
        last_z = Some(z);
    }

    // repair the final maximizer into feasibility and offer it too
    if let Some(mut z) = last_z {
        if !feasible(&z) && mask.counted > 0 {
            loop {
                if feasible(&z) {
                    break;
                }
                // flip the lowest-regret vertex into alpha
                let mut best: Option<(f64, usize)> = None;
                for (i, &zi) in z.iter().enumerate() {
                    if zi == alpha || pin.map(|p| p.vertex == i).unwrap_or(false) {
                        continue;
                    }
                    let loss = state.delta_psi(i, zi, alpha);
                    if best.map(|(l, _)| loss < l).unwrap_or(true) {
                        best = Some((loss, i));
                    }
                }
                match best {
                    Some((_, i)) => z[i] = alpha,
                    None => break,
                }
            }
            if feasible(&z) || pin.is_some() {
                offer(&mut run, &z);
            }
        }
    }
    run
}

fn lr_solve_impl(
    problem: &MajorityProblem,
    config: &LrConfig,
    mut trace: Option<&mut Vec<LrTraceRow>>,
) -> LrOutcome {
    let mask = MaskedMajority {
        psi: &problem.psi,
        w: &problem.w,
        counted: problem.r(),
        total: problem.r(),
    };
    let mut best: Option<(Vec<ValueId>, f64)> = None;
    let mut bound = f64::NEG_INFINITY;
    let mut converged = true;
    for alpha in 0..problem.r() {
        let run = lr_run_alpha(&mask, alpha, None, config, trace.as_deref_mut());
        bound = bound.max(run.min_l);
        converged &= run.converged;
        if let Some((values, score)) = run.best {
            match &best {
                Some((_, b)) if score <= *b => {}
                _ => best = Some((values, score)),
            }
        }
    }
    let (values, score) = best.expect("all-alpha baselines always exist");
    // the returned score is itself a lower bound on the optimum; the dual
    // minima are float sums, so round the reported bound outward a few ulps
    // to keep it a valid upper bound under summation error
    let bound = bound.max(score);
    let bound = bound + bound.abs() * (64.0 * f64::EPSILON);
    LrOutcome { assignment: Assignment { values, score }, bound, converged }
}

/// Lagrangian-relaxation solver: for each guessed majority value, minimizes
/// the dual bound over non-negative multipliers and tracks the best feasible
/// assignment seen. The returned bound is always at least the returned
/// score.
pub fn lr_solve(problem: &MajorityProblem, config: &LrConfig) -> Result<LrOutcome> {
    Ok(lr_solve_impl(problem, config, None))
}

/// [`lr_solve`] with per-iteration diagnostics rows.
pub fn lr_solve_traced(
    problem: &MajorityProblem,
    config: &LrConfig,
) -> Result<(LrOutcome, Vec<LrTraceRow>)> {
    let mut trace = Vec::new();
    let outcome = lr_solve_impl(problem, config, Some(&mut trace));
    Ok((outcome, trace))
}

/// One pinned LR message entry: the best assignment score found over all
/// majority guesses with `values[pin.vertex] = pin.value`.
pub(crate) fn lr_max_marginals_entry(mask: &MaskedMajority, pin: Pin, config: &LrConfig) -> f64 {
    if mask.counted == 0 {
        // no counted values: the clique term vanishes
        let mut values = vec![0usize; mask.n()];
        values[pin.vertex] = pin.value;
        return mask.objective(&values);
    }
    let mut best = f64::NEG_INFINITY;
    for alpha in 0..mask.counted {
        let run = lr_run_alpha(mask, alpha, Some(pin), config, None);
        if let Some((_, score)) = run.best {
            best = best.max(score);
        }
    }
    best
}
