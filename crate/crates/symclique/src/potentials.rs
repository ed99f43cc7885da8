//! Symmetric (cardinality-based) clique potential families.
//!
//! A symmetric clique potential scores an assignment of values to clique
//! vertices through the histogram of value counts alone, so it is invariant
//! under any permutation of the vertices. Three families are supported:
//!
//! * max-label: `C = max_v f_v(n_v)` with non-decreasing `f_v` (the makespan
//!   variants),
//! * additive: `C = sum_v f_v(n_v)` (Potts is `lambda * sum_v n_v^2`, entropy
//!   is `lambda * sum_v n_v ln n_v`),
//! * linear majority: `C = sum_v w[a][v] * n_v` where `a` is the value with
//!   the highest count.

use crate::{Error, Result};

/// Index of a value in a problem's value set `0..R`.
pub type ValueId = usize;

/// Counts of each value among the vertices of a clique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountHistogram {
    counts: Vec<usize>,
    n: usize,
}

impl CountHistogram {
    /// Builds a histogram from explicit counts.
    pub fn new(counts: Vec<usize>) -> Self {
        let n = counts.iter().sum();
        CountHistogram { counts, n }
    }

    /// Histogram with a single vertex at `value` (the unit vector `e_v`).
    pub fn unit(value: ValueId, r: usize) -> Self {
        let mut counts = vec![0; r];
        counts[value] = 1;
        CountHistogram { counts, n: 1 }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of vertices counted.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.counts.len()
    }
}

/// Counts each value in `assignment`; entry `v` is `|{i : assignment[i] = v}|`.
pub fn histogram_of(assignment: &[ValueId], r: usize) -> Result<CountHistogram> {
    let mut counts = vec![0usize; r];
    for &v in assignment {
        if v >= r {
            return Err(Error::ValueOutOfRange { value: v, r });
        }
        counts[v] += 1;
    }
    Ok(CountHistogram { counts, n: assignment.len() })
}

/// Per-value score function `f_v(count)` shared by the max-label and additive
/// families.
#[derive(Debug, Clone, PartialEq)]
pub enum PerValueFn {
    /// `f_v(x) = lambda * x`
    Linear { lambda: f64 },
    /// `f_v(x) = lambda * x^2`
    Square { lambda: f64 },
    /// `f_v(x) = lambda * x * ln x`, with `0 ln 0 = 0`
    Entropy { lambda: f64 },
    /// Dense per-value tables; `tables[v][c]` is `f_v(c)` for counts `0..=n`.
    Tables(Vec<Vec<f64>>),
}

impl PerValueFn {
    fn eval(&self, v: ValueId, count: usize) -> f64 {
        match self {
            PerValueFn::Linear { lambda } => lambda * count as f64,
            PerValueFn::Square { lambda } => lambda * (count * count) as f64,
            PerValueFn::Entropy { lambda } => {
                if count == 0 {
                    0.0
                } else {
                    let c = count as f64;
                    lambda * c * c.ln()
                }
            }
            PerValueFn::Tables(tables) => tables[v][count],
        }
    }

    fn check_count(&self, r: usize, max_count: usize) -> Result<()> {
        if let PerValueFn::Tables(tables) = self {
            if tables.len() != r {
                return Err(Error::Dimension(format!(
                    "{} per-value tables for {} values",
                    tables.len(),
                    r
                )));
            }
            for t in tables {
                if t.len() <= max_count {
                    return Err(Error::Dimension(format!(
                        "per-value table of length {} cannot score count {}",
                        t.len(),
                        max_count
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A symmetric clique potential, evaluated on count histograms.
#[derive(Debug, Clone, PartialEq)]
pub enum CliquePotential {
    /// `C = max_v f_v(n_v)`
    MaxLabel { f: PerValueFn, r: usize },
    /// `C = sum_v f_v(n_v)`
    Additive { f: PerValueFn, r: usize },
    /// `C = sum_v w[a][v] * n_v` with `a` the count argmax (ties to the
    /// lowest value id).
    Majority { w: Vec<Vec<f64>> },
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn validate_tables(tables: &[Vec<f64>]) -> Result<()> {
    if tables.is_empty() {
        return Err(Error::InvalidParameter("no per-value tables".into()));
    }
    for (v, t) in tables.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::InvalidParameter(format!("empty table for value {v}")));
        }
        for w in t.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "table for value {v} is not non-decreasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
    }
    Ok(())
}

impl CliquePotential {
    /// Potts potential `lambda * sum_v n_v^2`, `lambda > 0`.
    pub fn potts(lambda: f64, r: usize) -> Result<Self> {
        validate_lambda(lambda)?;
        Ok(CliquePotential::Additive { f: PerValueFn::Square { lambda }, r })
    }

    /// Entropy potential `lambda * sum_v n_v ln n_v`, natural log, `lambda > 0`.
    pub fn entropy(lambda: f64, r: usize) -> Result<Self> {
        validate_lambda(lambda)?;
        Ok(CliquePotential::Additive { f: PerValueFn::Entropy { lambda }, r })
    }

    /// Linear makespan `lambda * max_v n_v`.
    pub fn linear_makespan(lambda: f64, r: usize) -> Result<Self> {
        validate_lambda(lambda)?;
        Ok(CliquePotential::MaxLabel { f: PerValueFn::Linear { lambda }, r })
    }

    /// Square makespan `lambda * max_v n_v^2`.
    pub fn square_makespan(lambda: f64, r: usize) -> Result<Self> {
        validate_lambda(lambda)?;
        Ok(CliquePotential::MaxLabel { f: PerValueFn::Square { lambda }, r })
    }

    /// Max-label potential from per-value tables (validated non-decreasing).
    pub fn max_label_tables(tables: Vec<Vec<f64>>) -> Result<Self> {
        validate_tables(&tables)?;
        let r = tables.len();
        Ok(CliquePotential::MaxLabel { f: PerValueFn::Tables(tables), r })
    }

    /// Additive potential from per-value tables (validated non-decreasing).
    pub fn additive_tables(tables: Vec<Vec<f64>>) -> Result<Self> {
        validate_tables(&tables)?;
        let r = tables.len();
        Ok(CliquePotential::Additive { f: PerValueFn::Tables(tables), r })
    }

    /// Linear majority potential with weight matrix `w` (`r x r`, unconstrained).
    pub fn majority(w: Vec<Vec<f64>>) -> Result<Self> {
        let r = w.len();
        if r == 0 || w.iter().any(|row| row.len() != r) {
            return Err(Error::Dimension("majority weight matrix must be square".into()));
        }
        Ok(CliquePotential::Majority { w })
    }

    /// Number of values the potential is defined over.
    pub fn r(&self) -> usize {
        match self {
            CliquePotential::MaxLabel { r, .. } | CliquePotential::Additive { r, .. } => *r,
            CliquePotential::Majority { w } => w.len(),
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, CliquePotential::Additive { .. })
    }

    pub fn is_majority(&self) -> bool {
        matches!(self, CliquePotential::Majority { .. })
    }

    /// The additive per-value term `f_v(count)`; `None` for non-additive
    /// potentials.
    pub fn additive_term(&self, v: ValueId, count: usize) -> Option<f64> {
        match self {
            CliquePotential::Additive { f, .. } => Some(f.eval(v, count)),
            _ => None,
        }
    }

    /// Evaluates the potential on a histogram, checking dimensions.
    pub fn evaluate(&self, hist: &CountHistogram) -> Result<f64> {
        if hist.r() != self.r() {
            return Err(Error::Dimension(format!(
                "histogram over {} values, potential over {}",
                hist.r(),
                self.r()
            )));
        }
        if let CliquePotential::MaxLabel { f, r } | CliquePotential::Additive { f, r } = self {
            f.check_count(*r, hist.n())?;
        }
        Ok(self.eval_counts(hist.counts()))
    }

    /// The majority weight row contribution `w[a][v]`; `None` for
    /// non-majority potentials.
    pub fn majority_weight(&self, a: ValueId, v: ValueId) -> Option<f64> {
        match self {
            CliquePotential::Majority { w } => Some(w[a][v]),
            _ => None,
        }
    }
}

/// Value with the highest count, ties broken by the lowest value id.
/// Every solver and oracle in the crate uses this same rule.
pub fn majority_value(counts: &[usize]) -> ValueId {
    let mut best = 0;
    for (v, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = v;
        }
    }
    best
}

/// Evaluation of potentials on raw count slices, without dimension checks.
/// This is the hot path shared by all solvers; callers validate sizes once.
pub trait SymmetricPotential {
    fn num_values(&self) -> usize;

    fn eval_counts(&self, counts: &[usize]) -> f64;

    /// Change in the potential when one vertex moves from value `from` to
    /// value `to`, given the counts before the move. The default recomputes;
    /// additive potentials override with an O(1) update.
    fn delta_move(&self, counts: &[usize], from: ValueId, to: ValueId) -> f64 {
        if from == to {
            return 0.0;
        }
        let mut after = counts.to_vec();
        after[from] -= 1;
        after[to] += 1;
        self.eval_counts(&after) - self.eval_counts(counts)
    }
}

impl SymmetricPotential for CliquePotential {
    fn num_values(&self) -> usize {
        self.r()
    }

    fn eval_counts(&self, counts: &[usize]) -> f64 {
        match self {
            CliquePotential::MaxLabel { f, .. } => counts
                .iter()
                .enumerate()
                .map(|(v, &c)| f.eval(v, c))
                .fold(f64::NEG_INFINITY, f64::max),
            CliquePotential::Additive { f, .. } => {
                counts.iter().enumerate().map(|(v, &c)| f.eval(v, c)).sum()
            }
            CliquePotential::Majority { w } => {
                let a = majority_value(counts);
                w[a].iter().zip(counts).map(|(wv, &c)| wv * c as f64).sum()
            }
        }
    }

    fn delta_move(&self, counts: &[usize], from: ValueId, to: ValueId) -> f64 {
        if from == to {
            return 0.0;
        }
        match self {
            CliquePotential::Additive { f, .. } => {
                f.eval(to, counts[to] + 1) - f.eval(to, counts[to])
                    + f.eval(from, counts[from] - 1)
                    - f.eval(from, counts[from])
            }
            _ => {
                let mut after = counts.to_vec();
                after[from] -= 1;
                after[to] += 1;
                self.eval_counts(&after) - self.eval_counts(counts)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Rng64;

    fn hist(counts: &[usize]) -> CountHistogram {
        CountHistogram::new(counts.to_vec())
    }

    #[test]
    fn potts_counts_2_1() {
        let p = CliquePotential::potts(1.0, 2).unwrap();
        assert_eq!(p.evaluate(&hist(&[2, 1])).unwrap(), 5.0);
    }

    #[test]
    fn linear_makespan_counts_1_2() {
        let p = CliquePotential::linear_makespan(1.0, 2).unwrap();
        assert_eq!(p.evaluate(&hist(&[1, 2])).unwrap(), 2.0);
    }

    #[test]
    fn majority_ties_to_lowest_value() {
        // counts (2,1): a = 0, score 1*2 + 0*1
        let p = CliquePotential::majority(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(p.evaluate(&hist(&[2, 1])).unwrap(), 2.0);
        // tied counts go to value 0 even though row 1 scores higher
        assert_eq!(p.evaluate(&hist(&[1, 1])).unwrap(), 1.0);
    }

    #[test]
    fn entropy_natural_log() {
        let p = CliquePotential::entropy(1.0, 2).unwrap();
        let got = p.evaluate(&hist(&[2, 2])).unwrap();
        assert!((got - 4.0 * 2.0_f64.ln()).abs() < 1e-12);
        assert!((got - 2.7725887222397812).abs() < 1e-12);
        // 0 ln 0 = 0
        assert_eq!(p.evaluate(&hist(&[0, 4])).unwrap(), 4.0 * 4.0_f64.ln());
    }

    #[test]
    fn histogram_of_counts_values() {
        assert_eq!(histogram_of(&[0, 0, 1], 2).unwrap().counts(), &[2, 1]);
        assert_eq!(histogram_of(&[], 3).unwrap().counts(), &[0, 0, 0]);
        assert_eq!(histogram_of(&[2, 2, 2], 3).unwrap().counts(), &[0, 0, 3]);
        assert!(matches!(
            histogram_of(&[3], 3),
            Err(Error::ValueOutOfRange { value: 3, r: 3 })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = CliquePotential::potts(1.0, 3).unwrap();
        assert!(matches!(p.evaluate(&hist(&[1, 1])), Err(Error::Dimension(_))));
    }

    #[test]
    fn tables_must_be_monotone() {
        assert!(CliquePotential::additive_tables(vec![vec![0.0, 1.0, 0.5]]).is_err());
        assert!(CliquePotential::additive_tables(vec![vec![0.0, 1.0, 1.0]]).is_ok());
    }

    /// All histograms with the given total, in composition order.
    fn all_histograms(n: usize, r: usize) -> Vec<Vec<usize>> {
        fn rec(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if slots == 1 {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
                return;
            }
            for c in 0..=left {
                cur.push(c);
                rec(left - c, slots - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(n, r, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn associative_builtins_maximized_by_unanimity() {
        for n in 1..=8usize {
            for r in 2..=4usize {
                for pot in [
                    CliquePotential::potts(0.7, r).unwrap(),
                    CliquePotential::linear_makespan(1.3, r).unwrap(),
                    CliquePotential::square_makespan(0.9, r).unwrap(),
                ] {
                    let unanimous = {
                        let mut c = vec![0; r];
                        c[0] = n;
                        pot.eval_counts(&c)
                    };
                    for h in all_histograms(n, r) {
                        assert!(
                            pot.eval_counts(&h) <= unanimous,
                            "histogram {h:?} beats unanimity for {pot:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn potts_equals_edge_form() {
        // lambda * sum n_v^2 == lambda * (n + 2 * #same-valued pairs)
        let lambda = 0.8;
        for n in 1..=6usize {
            let r = 3;
            let pot = CliquePotential::potts(lambda, r).unwrap();
            let mut assignment = vec![0usize; n];
            loop {
                let h = histogram_of(&assignment, r).unwrap();
                let same_pairs: usize = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| assignment[i] == assignment[j])
                    .count();
                let edge_form = lambda * (n as f64 + 2.0 * same_pairs as f64);
                let direct = pot.evaluate(&h).unwrap();
                assert!((direct - edge_form).abs() < 1e-9);
                // next assignment in lexicographic order
                let mut i = n;
                loop {
                    if i == 0 {
                        return;
                    }
                    i -= 1;
                    assignment[i] += 1;
                    if assignment[i] < r {
                        break;
                    }
                    assignment[i] = 0;
                }
                if assignment.iter().all(|&v| v == 0) {
                    break;
                }
            }
        }
    }

    #[test]
    fn symmetry_under_permutation() {
        let mut rng = Rng64::new(7);
        for _ in 0..200 {
            let r = 2 + (rng.next_u64() % 3) as usize;
            let n = 1 + (rng.next_u64() % 7) as usize;
            let mut assignment: Vec<usize> =
                (0..n).map(|_| (rng.next_u64() % r as u64) as usize).collect();
            let pots = [
                CliquePotential::potts(1.0 + rng.next_f64(), r).unwrap(),
                CliquePotential::entropy(0.5 + rng.next_f64(), r).unwrap(),
                CliquePotential::linear_makespan(1.0, r).unwrap(),
                CliquePotential::majority(
                    (0..r)
                        .map(|_| (0..r).map(|_| rng.next_f64() * 2.0).collect())
                        .collect(),
                )
                .unwrap(),
            ];
            let before: Vec<f64> = pots
                .iter()
                .map(|p| p.evaluate(&histogram_of(&assignment, r).unwrap()).unwrap())
                .collect();
            // rotate + swap is enough to generate interesting permutations
            assignment.rotate_left(1.min(n - 1));
            if n >= 2 {
                assignment.swap(0, n - 1);
            }
            let h = histogram_of(&assignment, r).unwrap();
            for (p, b) in pots.iter().zip(before) {
                assert_eq!(p.evaluate(&h).unwrap(), b);
            }
        }
    }
}
