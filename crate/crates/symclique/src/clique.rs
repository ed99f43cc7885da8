//! Clique MAP inference for symmetric potentials.
//!
//! The clique inference problem: given an `n x R` table of vertex potentials
//! `psi` and a symmetric clique potential `C`, maximize
//! `F(v) = sum_i psi[i][v_i] + C(histogram(v))` over value assignments.
//!
//! Solvers:
//! * [`alpha_pass`] — the sweep algorithm; exact for max-label potentials and
//!   for any symmetric potential on two values, 13/15-approximate for Potts.
//! * [`generalized_alpha_pass`] — sweeps over value subsets of size <= q;
//!   8/9-approximate for Potts at q = 2.
//! * [`expansion_move`] / [`alpha_expansion`] — optimal single-value
//!   expansion moves for additive potentials, found by dynamic programming.
//! * [`icm`] — iterated conditional modes.
//! * [`brute_force`] — the enumeration oracle.
//!
//! Tie rules, used consistently by every solver: per-vertex value argmaxes
//! resolve to the highest value id; candidate trackers keep the first
//! encountered maximum (strict improvement); sort ties resolve by vertex
//! index.

use crate::potentials::{histogram_of, CliquePotential, SymmetricPotential, ValueId};
use crate::{Error, Result};
use itertools::Itertools;

/// A clique inference problem: vertex potentials plus one symmetric clique
/// potential.
#[derive(Debug, Clone)]
pub struct CliqueProblem {
    psi: Vec<Vec<f64>>,
    potential: CliquePotential,
    /// Constant added internally so vertex potentials are non-negative;
    /// reported scores are in the original scale.
    shift: f64,
}

impl CliqueProblem {
    pub fn new(psi: Vec<Vec<f64>>, potential: CliquePotential) -> Result<Self> {
        let n = psi.len();
        let r = potential.r();
        if n < 1 {
            return Err(Error::InvalidParameter("need at least one vertex".into()));
        }
        if r < 2 {
            return Err(Error::InvalidParameter("need at least two values".into()));
        }
        let mut min = f64::INFINITY;
        for row in &psi {
            if row.len() != r {
                return Err(Error::Dimension(format!(
                    "psi row of length {} for {} values",
                    row.len(),
                    r
                )));
            }
            for &x in row {
                if !x.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite vertex potential {x}"
                    )));
                }
                min = min.min(x);
            }
        }
        let shift = if min < 0.0 { -min } else { 0.0 };
        Ok(CliqueProblem { psi, potential, shift })
    }

    pub fn n(&self) -> usize {
        self.psi.len()
    }

    pub fn r(&self) -> usize {
        self.potential.r()
    }

    pub fn psi(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn potential(&self) -> &CliquePotential {
        &self.potential
    }

    /// Vertex potential in the internal non-negative scale.
    fn psi_at(&self, i: usize, v: ValueId) -> f64 {
        self.psi[i][v] + self.shift
    }
}

/// A value per vertex together with its objective score.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<ValueId>,
    pub score: f64,
}

/// Restriction `values[vertex] = value` for pinned solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pin {
    pub vertex: usize,
    pub value: ValueId,
}

/// Evaluates `F(values) = sum_i psi[i][values[i]] + C(histogram(values))`.
pub fn evaluate_objective(problem: &CliqueProblem, values: &[ValueId]) -> Result<f64> {
    if values.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "{} values for {} vertices",
            values.len(),
            problem.n()
        )));
    }
    let hist = histogram_of(values, problem.r())?;
    let mut s = 0.0;
    for (i, &v) in values.iter().enumerate() {
        s += problem.psi[i][v];
    }
    Ok(s + problem.potential.eval_counts(hist.counts()))
}

fn assignment_of(problem: &CliqueProblem, values: Vec<ValueId>) -> Assignment {
    let score = evaluate_objective(problem, &values).expect("internal assignment is valid");
    Assignment { values, score }
}

// ---------------------------------------------------------------------------
// Sweep engine
//
// Shared by the alpha-pass family, the pinned variants used for
// max-marginals, and (through `majority`) the modified sweep. Vertex
// potentials may contain -inf entries (unreachable choices coming from
// message tables); the engine keeps sums NaN-free by tracking -inf terms
// separately and guarding metric subtractions.
// ---------------------------------------------------------------------------

pub(crate) mod engine {
    use super::*;

    /// `a - b` for sort metrics where either side may be -inf.
    pub(crate) fn guarded_metric(in_score: f64, out_score: f64) -> f64 {
        if in_score == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if out_score == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            in_score - out_score
        }
    }

    /// Running sum over scores that may include -inf terms.
    #[derive(Clone, Copy, Default)]
    pub(crate) struct InfSum {
        finite: f64,
        neg_inf: usize,
    }

    impl InfSum {
        pub(crate) fn add(&mut self, x: f64) {
            if x == f64::NEG_INFINITY {
                self.neg_inf += 1;
            } else {
                self.finite += x;
            }
        }

        pub(crate) fn remove(&mut self, x: f64) {
            if x == f64::NEG_INFINITY {
                self.neg_inf -= 1;
            } else {
                self.finite -= x;
            }
        }

        pub(crate) fn value(&self) -> f64 {
            if self.neg_inf > 0 {
                f64::NEG_INFINITY
            } else {
                self.finite
            }
        }
    }

    /// Best value for a row under a membership predicate; ties resolve to the
    /// highest value id. Returns `None` when no value qualifies.
    pub(crate) fn best_value_where(
        row: &[f64],
        mut allowed: impl FnMut(ValueId) -> bool,
    ) -> Option<(ValueId, f64)> {
        let mut best: Option<(ValueId, f64)> = None;
        for (v, &s) in row.iter().enumerate() {
            if !allowed(v) {
                continue;
            }
            match best {
                Some((_, bs)) if s < bs => {}
                _ => best = Some((v, s)),
            }
        }
        best
    }

    /// Tracks the best candidate seen; first maximum wins on ties.
    pub(crate) struct BestTracker {
        pub score: f64,
        pub values: Option<Vec<ValueId>>,
    }

    impl BestTracker {
        pub(crate) fn new() -> Self {
            BestTracker { score: f64::NEG_INFINITY, values: None }
        }

        pub(crate) fn offer(&mut self, score: f64, values: &[ValueId]) {
            if self.values.is_none() || score > self.score {
                self.score = score;
                self.values = Some(values.to_vec());
            }
        }
    }

    /// One sweep over the value subset `set`: for each k, the top-k vertices
    /// by the subset metric take their best value inside the set, the rest
    /// take their best value outside. Visits every candidate in k order.
    pub(crate) fn sweep_set(
        psi: &[Vec<f64>],
        pot: &dyn SymmetricPotential,
        set: &[ValueId],
        tracker: &mut BestTracker,
    ) {
        let n = psi.len();
        let r = pot.num_values();
        let full = set.len() == r;
        let in_best: Vec<(ValueId, f64)> = psi
            .iter()
            .map(|row| best_value_where(row, |v| set.binary_search(&v).is_ok()).unwrap())
            .collect();

        if full {
            // Only k = n is defined: every vertex takes its best value.
            let values: Vec<ValueId> = in_best.iter().map(|&(v, _)| v).collect();
            let mut psi_sum = InfSum::default();
            for &(_, s) in &in_best {
                psi_sum.add(s);
            }
            let counts = count_values(&values, r);
            let score = psi_sum.value() + pot.eval_counts(&counts);
            tracker.offer(score, &values);
            return;
        }

        let out_best: Vec<(ValueId, f64)> = psi
            .iter()
            .map(|row| best_value_where(row, |v| set.binary_search(&v).is_err()).unwrap())
            .collect();

        let mut order: Vec<usize> = (0..n).collect();
        let metric: Vec<f64> =
            (0..n).map(|i| guarded_metric(in_best[i].1, out_best[i].1)).collect();
        order.sort_by(|&a, &b| {
            metric[b].partial_cmp(&metric[a]).expect("metrics are not NaN").then(a.cmp(&b))
        });

        // k = 0 state: everything outside the set.
        let mut values: Vec<ValueId> = out_best.iter().map(|&(v, _)| v).collect();
        let mut counts = count_values(&values, r);
        let mut c_score = pot.eval_counts(&counts);
        let mut psi_sum = InfSum::default();
        for &(_, s) in &out_best {
            psi_sum.add(s);
        }

        for k in 1..=n {
            let i = order[k - 1];
            let (to, in_score) = in_best[i];
            let from = values[i];
            let delta = pot.delta_move(&counts, from, to);
            counts[from] -= 1;
            counts[to] += 1;
            c_score += delta;
            psi_sum.remove(out_best[i].1);
            psi_sum.add(in_score);
            values[i] = to;
            tracker.offer(psi_sum.value() + c_score, &values);
        }
    }

    /// Per-alpha data shared across pinned sweeps: the sorted order and each
    /// vertex's best non-alpha value.
    pub(crate) struct AlphaData {
        pub order: Vec<usize>,
        pub bn_value: Vec<ValueId>,
        pub bn_score: Vec<f64>,
    }

    pub(crate) fn alpha_data(psi: &[Vec<f64>], alpha: ValueId) -> AlphaData {
        let n = psi.len();
        let mut bn_value = Vec::with_capacity(n);
        let mut bn_score = Vec::with_capacity(n);
        for row in psi {
            let (v, s) = best_value_where(row, |v| v != alpha).expect("R >= 2");
            bn_value.push(v);
            bn_score.push(s);
        }
        let metric: Vec<f64> =
            (0..n).map(|i| guarded_metric(psi[i][alpha], bn_score[i])).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            metric[b].partial_cmp(&metric[a]).expect("metrics are not NaN").then(a.cmp(&b))
        });
        AlphaData { order, bn_value, bn_score }
    }

    /// Sweep for one alpha honoring an optional pin. A vertex pinned to alpha
    /// goes first in the order; a vertex pinned elsewhere keeps its pinned
    /// value and is excluded from contention.
    pub(crate) fn sweep_alpha_pinned(
        psi: &[Vec<f64>],
        pot: &dyn SymmetricPotential,
        alpha: ValueId,
        data: &AlphaData,
        pin: Option<Pin>,
        tracker: &mut BestTracker,
    ) {
        let n = psi.len();
        let r = pot.num_values();
        let mut order: Vec<usize> = Vec::with_capacity(n);
        match pin {
            Some(p) if p.value == alpha => {
                order.push(p.vertex);
                order.extend(data.order.iter().copied().filter(|&i| i != p.vertex));
            }
            Some(p) => {
                order.extend(data.order.iter().copied().filter(|&i| i != p.vertex));
            }
            None => order.extend(data.order.iter().copied()),
        }

        // k = 0 state: non-pinned vertices at their best non-alpha value.
        let mut values: Vec<ValueId> = data.bn_value.clone();
        let mut psi_sum = InfSum::default();
        if let Some(p) = pin {
            values[p.vertex] = p.value;
        }
        for (i, &v) in values.iter().enumerate() {
            psi_sum.add(if Some(i) == pin.map(|p| p.vertex) { psi[i][v] } else { data.bn_score[i] });
        }
        let mut counts = count_values(&values, r);
        let mut c_score = pot.eval_counts(&counts);

        for &i in &order {
            let from = values[i];
            if from != alpha {
                let delta = pot.delta_move(&counts, from, alpha);
                counts[from] -= 1;
                counts[alpha] += 1;
                c_score += delta;
                psi_sum.remove(if Some(i) == pin.map(|p| p.vertex) {
                    psi[i][from]
                } else {
                    data.bn_score[i]
                });
                psi_sum.add(psi[i][alpha]);
                values[i] = alpha;
            }
            tracker.offer(psi_sum.value() + c_score, &values);
        }
    }

    pub(crate) fn count_values(values: &[ValueId], r: usize) -> Vec<usize> {
        let mut counts = vec![0usize; r];
        for &v in values {
            counts[v] += 1;
        }
        counts
    }

    /// Canonical objective over raw tables; -inf vertex entries allowed.
    /// Matches the accumulation order of `evaluate_objective`.
    pub(crate) fn raw_objective(
        psi: &[Vec<f64>],
        pot: &dyn SymmetricPotential,
        values: &[ValueId],
    ) -> f64 {
        let mut sum = InfSum::default();
        for (i, &v) in values.iter().enumerate() {
            sum.add(psi[i][v]);
        }
        let counts = count_values(values, pot.num_values());
        sum.value() + pot.eval_counts(&counts)
    }

    /// Pinned alpha-pass over raw tables: the canonical objective of the
    /// best pinned sweep candidate with `values[pin.vertex] = pin.value`.
    pub(crate) fn alpha_pass_pinned_raw(
        psi: &[Vec<f64>],
        pot: &dyn SymmetricPotential,
        pin: Pin,
    ) -> (Vec<ValueId>, f64) {
        let r = pot.num_values();
        let mut tracker = BestTracker::new();
        for alpha in 0..r {
            let data = alpha_data(psi, alpha);
            sweep_alpha_pinned(psi, pot, alpha, &data, Some(pin), &mut tracker);
        }
        let values = tracker.values.expect("pinned sweeps always yield a candidate");
        let score = raw_objective(psi, pot, &values);
        (values, score)
    }
}

use engine::{sweep_set, BestTracker};

// ---------------------------------------------------------------------------
// Public solvers
// ---------------------------------------------------------------------------

fn single_vertex_argmax(problem: &CliqueProblem) -> Assignment {
    let r = problem.r();
    let mut best_v = 0;
    let mut best = f64::NEG_INFINITY;
    for v in 0..r {
        let mut counts = vec![0usize; r];
        counts[v] = 1;
        let s = problem.psi[0][v] + problem.potential.eval_counts(&counts);
        if s > best {
            best = s;
            best_v = v;
        }
    }
    Assignment { values: vec![best_v], score: best }
}

/// The alpha-pass sweep: for each value `alpha` and count `k`, the `k`
/// vertices with the largest margin toward `alpha` take it and the rest take
/// their best other value; the best candidate over all `(alpha, k)` wins.
///
/// Exact for max-label potentials and for any symmetric potential with two
/// values; at least 13/15 of the optimum for Potts potentials.
pub fn alpha_pass(problem: &CliqueProblem) -> Result<Assignment> {
    Ok(generalized_alpha_pass(problem, 1).expect("q = 1 is always valid"))
}

/// Alpha-pass restricted to assignments with `values[pin.vertex] = pin.value`.
pub fn alpha_pass_pinned(problem: &CliqueProblem, pin: Pin) -> Result<Assignment> {
    check_pin(problem, pin)?;
    if problem.n() == 1 {
        let mut counts = vec![0usize; problem.r()];
        counts[pin.value] = 1;
        let score = problem.psi[0][pin.value] + problem.potential.eval_counts(&counts);
        return Ok(Assignment { values: vec![pin.value], score });
    }
    let shifted = shifted_psi(problem);
    let (values, _) = engine::alpha_pass_pinned_raw(&shifted, &problem.potential, pin);
    Ok(assignment_of(problem, values))
}

fn check_pin(problem: &CliqueProblem, pin: Pin) -> Result<()> {
    if pin.vertex >= problem.n() {
        return Err(Error::InvalidParameter(format!(
            "pin vertex {} out of range for n = {}",
            pin.vertex,
            problem.n()
        )));
    }
    if pin.value >= problem.r() {
        return Err(Error::ValueOutOfRange { value: pin.value, r: problem.r() });
    }
    Ok(())
}

fn shifted_psi(problem: &CliqueProblem) -> Vec<Vec<f64>> {
    if problem.shift == 0.0 {
        problem.psi.clone()
    } else {
        problem
            .psi
            .iter()
            .map(|row| row.iter().map(|&x| x + problem.shift).collect())
            .collect()
    }
}

/// Table of pinned alpha-pass scores: entry `(i, v)` equals
/// `alpha_pass_pinned(problem, Pin { vertex: i, value: v }).score`.
pub fn max_marginals(problem: &CliqueProblem) -> Result<Vec<Vec<f64>>> {
    if problem.n() == 1 {
        let r = problem.r();
        return Ok(vec![(0..r)
            .map(|v| {
                let mut counts = vec![0usize; r];
                counts[v] = 1;
                problem.psi[0][v] + problem.potential.eval_counts(&counts)
            })
            .collect()]);
    }
    let shifted = shifted_psi(problem);
    let data: Vec<engine::AlphaData> =
        (0..problem.r()).map(|alpha| engine::alpha_data(&shifted, alpha)).collect();
    let mut table = vec![vec![f64::NEG_INFINITY; problem.r()]; problem.n()];
    for (i, row) in table.iter_mut().enumerate() {
        for (v, entry) in row.iter_mut().enumerate() {
            let pin = Pin { vertex: i, value: v };
            let mut tracker = BestTracker::new();
            for alpha in 0..problem.r() {
                engine::sweep_alpha_pinned(
                    &shifted,
                    &problem.potential,
                    alpha,
                    &data[alpha],
                    Some(pin),
                    &mut tracker,
                );
            }
            let values = tracker.values.expect("pinned sweeps always yield a candidate");
            *entry = evaluate_objective(problem, &values)?;
        }
    }
    Ok(table)
}

/// Generalized alpha-pass: sweeps every value subset of size at most `q`.
/// For each subset `A` and count `k`, the top-k vertices by the subset margin
/// take their best value inside `A` and the rest their best value outside.
/// `q = 1` reproduces [`alpha_pass`] exactly; `q = 2` is 8/9-approximate for
/// Potts potentials. Runs in `O(n R^q log n)`.
pub fn generalized_alpha_pass(problem: &CliqueProblem, q: usize) -> Result<Assignment> {
    let r = problem.r();
    if q < 1 || q > r {
        return Err(Error::InvalidParameter(format!("q = {q} not in 1..={r}")));
    }
    if problem.n() == 1 {
        return Ok(single_vertex_argmax(problem));
    }
    let shifted = shifted_psi(problem);
    let mut tracker = BestTracker::new();
    for size in 1..=q {
        for set in (0..r).combinations(size) {
            sweep_set(&shifted, &problem.potential, &set, &mut tracker);
        }
    }
    let values = tracker.values.expect("at least one candidate");
    Ok(assignment_of(problem, values))
}

/// The optimal single expansion move: switches the best subset of vertices to
/// `alpha`, maximizing the objective over all such subsets via dynamic
/// programming over per-value sorted lists. Requires an additive potential.
/// Returns `current` unchanged when no move strictly improves it.
pub fn expansion_move(
    problem: &CliqueProblem,
    current: &Assignment,
    alpha: ValueId,
) -> Result<Assignment> {
    if !problem.potential.is_additive() {
        return Err(Error::NotApplicable(
            "expansion moves require an additive potential".into(),
        ));
    }
    if alpha >= problem.r() {
        return Err(Error::ValueOutOfRange { value: alpha, r: problem.r() });
    }
    let n = problem.n();
    let r = problem.r();
    if current.values.len() != n {
        return Err(Error::Dimension(format!(
            "{} values for {} vertices",
            current.values.len(),
            n
        )));
    }
    let cur_counts = histogram_of(&current.values, r)?;
    let cur_counts = cur_counts.counts();

    // Per-value sorted lists: vertices currently at v, by descending gain of
    // switching to alpha.
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); r];
    for (i, &v) in current.values.iter().enumerate() {
        if v != alpha {
            lists[v].push(i);
        }
    }
    for list in &mut lists {
        list.sort_by(|&a, &b| {
            let ga = problem.psi_at(a, alpha) - problem.psi[a][current.values[a]] ;
            let gb = problem.psi_at(b, alpha) - problem.psi[b][current.values[b]];
            gb.partial_cmp(&ga).expect("finite potentials").then(a.cmp(&b))
        });
    }

    let movable = n - cur_counts[alpha];
    let f = |v: ValueId, c: usize| problem.potential.additive_term(v, c).expect("additive");

    // dp[k]: best total over processed values with k vertices switched;
    // choices[j][k]: how many were taken from the j-th processed list.
    let mut dp = vec![f64::NEG_INFINITY; movable + 1];
    dp[0] = 0.0;
    let mut processed: Vec<ValueId> = Vec::new();
    let mut choices: Vec<Vec<usize>> = Vec::new();
    for v in 0..r {
        if v == alpha {
            continue;
        }
        let list = &lists[v];
        let m = list.len();
        // prefix_gain[l]: psi for the top-l switched to alpha plus the rest
        // kept at v.
        let mut keep_all = 0.0;
        for &i in list {
            keep_all += problem.psi_at(i, v);
        }
        let mut term = Vec::with_capacity(m + 1);
        let mut switched = 0.0;
        let mut kept = keep_all;
        term.push(kept + f(v, m));
        for (l, &i) in list.iter().enumerate() {
            switched += problem.psi_at(i, alpha);
            kept -= problem.psi_at(i, v);
            term.push(switched + kept + f(v, m - (l + 1)));
        }

        let mut next = vec![f64::NEG_INFINITY; movable + 1];
        let mut choice = vec![0usize; movable + 1];
        for k in 0..=movable {
            for l in 0..=m.min(k) {
                if dp[k - l] == f64::NEG_INFINITY {
                    continue;
                }
                let s = dp[k - l] + term[l];
                if s > next[k] {
                    next[k] = s;
                    choice[k] = l;
                }
            }
        }
        dp = next;
        processed.push(v);
        choices.push(choice);
    }

    let mut alpha_keep = 0.0;
    for (i, &v) in current.values.iter().enumerate() {
        if v == alpha {
            alpha_keep += problem.psi_at(i, alpha);
        }
    }

    let mut best_k = 0;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=movable {
        if dp[k] == f64::NEG_INFINITY {
            continue;
        }
        let s = dp[k] + alpha_keep + f(alpha, k + cur_counts[alpha]);
        if s > best {
            best = s;
            best_k = k;
        }
    }

    // Reconstruct the switched set for the best k.
    let mut values = current.values.clone();
    let mut k = best_k;
    for (j, &v) in processed.iter().enumerate().rev() {
        let l = choices[j][k];
        for &i in lists[v].iter().take(l) {
            values[i] = alpha;
        }
        k -= l;
    }

    let moved = assignment_of(problem, values);
    let cur_score = evaluate_objective(problem, &current.values)?;
    if moved.score > cur_score {
        Ok(moved)
    } else {
        Ok(Assignment { values: current.values.clone(), score: cur_score })
    }
}

/// Repeats expansion moves over all values until a full round changes
/// nothing. Every accepted move strictly increases the objective, so the
/// loop terminates.
pub fn alpha_expansion(problem: &CliqueProblem, init: &Assignment) -> Result<Assignment> {
    let mut cur = Assignment {
        values: init.values.clone(),
        score: evaluate_objective(problem, &init.values)?,
    };
    loop {
        let mut changed = false;
        for alpha in 0..problem.r() {
            let next = expansion_move(problem, &cur, alpha)?;
            if next.score > cur.score {
                cur = next;
                changed = true;
            }
        }
        if !changed {
            return Ok(cur);
        }
    }
}

/// Per-vertex argmax of the vertex potentials alone; the default ICM start.
pub fn vertex_optimal_assignment(problem: &CliqueProblem) -> Assignment {
    let values: Vec<ValueId> = problem
        .psi
        .iter()
        .map(|row| engine::best_value_where(row, |_| true).expect("R >= 2").0)
        .collect();
    assignment_of(problem, values)
}

/// Iterated conditional modes: vertices are visited round-robin in ascending
/// index order, each taking its best value given the rest; stops at a fixed
/// point. Moves require strict improvement, so the objective never decreases.
pub fn icm(problem: &CliqueProblem, init: &Assignment) -> Result<Assignment> {
    let n = problem.n();
    let r = problem.r();
    if init.values.len() != n {
        return Err(Error::Dimension(format!("{} values for {} vertices", init.values.len(), n)));
    }
    let mut values = init.values.clone();
    let mut counts = histogram_of(&values, r)?.counts().to_vec();
    loop {
        let mut changed = false;
        for i in 0..n {
            let cur = values[i];
            let mut best_v = cur;
            let mut best_delta = 0.0;
            for v in 0..r {
                if v == cur {
                    continue;
                }
                let delta = problem.psi[i][v] - problem.psi[i][cur]
                    + problem.potential.delta_move(&counts, cur, v);
                if delta > best_delta {
                    best_delta = delta;
                    best_v = v;
                }
            }
            if best_v != cur {
                counts[cur] -= 1;
                counts[best_v] += 1;
                values[i] = best_v;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assignment_of(problem, values))
}

/// Default brute-force cap on `R^n`.
pub const BRUTE_FORCE_CAP: f64 = 2e6;

/// Exact optimum by enumeration; ties resolve to the lexicographically
/// smallest assignment. Rejected when `R^n` exceeds `cap`.
pub fn brute_force_capped(problem: &CliqueProblem, cap: f64) -> Result<Assignment> {
    let n = problem.n();
    let r = problem.r();
    let size = (r as f64).powi(n as i32);
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }

    struct Search<'a> {
        problem: &'a CliqueProblem,
        values: Vec<ValueId>,
        counts: Vec<usize>,
        best: f64,
        best_values: Vec<ValueId>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, psi_sum: f64) {
            if i == self.problem.n() {
                let score = psi_sum + self.problem.potential.eval_counts(&self.counts);
                if score > self.best {
                    self.best = score;
                    self.best_values.copy_from_slice(&self.values);
                }
                return;
            }
            for v in 0..self.problem.r() {
                self.values[i] = v;
                self.counts[v] += 1;
                self.go(i + 1, psi_sum + self.problem.psi[i][v]);
                self.counts[v] -= 1;
            }
        }
    }

    let mut search = Search {
        problem,
        values: vec![0; n],
        counts: vec![0; r],
        best: f64::NEG_INFINITY,
        best_values: vec![0; n],
    };
    search.go(0, 0.0);
    let values = search.best_values;
    Ok(Assignment { score: search.best, values })
}

/// [`brute_force_capped`] with the default cap.
pub fn brute_force(problem: &CliqueProblem) -> Result<Assignment> {
    brute_force_capped(problem, BRUTE_FORCE_CAP)
}

/// All `(alpha, k)` sweep candidates of the plain alpha-pass, for oracle
/// checks against the sweep-state claims.
#[doc(hidden)]
pub fn alpha_sweep_candidates(problem: &CliqueProblem) -> Vec<(ValueId, usize, Assignment)> {
    let shifted = shifted_psi(problem);
    let mut out = Vec::new();
    for alpha in 0..problem.r() {
        let data = engine::alpha_data(&shifted, alpha);
        let mut values: Vec<ValueId> = data.bn_value.clone();
        for (idx, &i) in data.order.iter().enumerate() {
            values[i] = alpha;
            out.push((alpha, idx + 1, assignment_of(problem, values.clone())));
        }
    }
    out
}
