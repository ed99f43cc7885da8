//! Seeded synthetic-dataset generators.
//!
//! Everything here is a pure function of its spec and seed: the generator is
//! PCG64 with per-problem seeds derived through SplitMix64, and floating
//! values are built from raw generator output with fixed arithmetic, so
//! emitted datasets are byte-identical across platforms and runs.

use crate::chain::ChainInstance;
use crate::clique::CliqueProblem;
use crate::potentials::CliquePotential;
use crate::properties::{LabelId, LabelSet};
use crate::{Error, Result};
use rand_core::{Rng as _, SeedableRng};
use rand_pcg::Pcg64;

/// SplitMix64 step, used to derive independent per-index seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit generator: PCG64 seeded from a single `u64`.
pub struct Rng64(Pcg64);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64(Pcg64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// The six clique benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliqueFamily {
    Potts,
    Entropy,
    Makespan,
    Makespan2,
    MajDense,
    MajSparse,
}

impl CliqueFamily {
    pub fn name(self) -> &'static str {
        match self {
            CliqueFamily::Potts => "potts",
            CliqueFamily::Entropy => "entropy",
            CliqueFamily::Makespan => "makespan",
            CliqueFamily::Makespan2 => "makespan2",
            CliqueFamily::MajDense => "maj-dense",
            CliqueFamily::MajSparse => "maj-sparse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "potts" => CliqueFamily::Potts,
            "entropy" => CliqueFamily::Entropy,
            "makespan" => CliqueFamily::Makespan,
            "makespan2" => CliqueFamily::Makespan2,
            "maj-dense" => CliqueFamily::MajDense,
            "maj-sparse" => CliqueFamily::MajSparse,
            _ => return None,
        })
    }

    pub fn is_majority(self) -> bool {
        matches!(self, CliqueFamily::MajDense | CliqueFamily::MajSparse)
    }
}

/// An arithmetic sweep of the coupling strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSweep {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl LambdaSweep {
    /// Values `start, start+step, ..` up to and including `end` (with an
    /// epsilon guard against float drift).
    pub fn inclusive(start: f64, end: f64, step: f64) -> Result<Self> {
        Self::check(start, end, step)?;
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        Ok(LambdaSweep { start, step, count })
    }

    /// Values in the half-open interval `[start, end)`.
    pub fn half_open(start: f64, end: f64, step: f64) -> Result<Self> {
        Self::check(start, end, step)?;
        let count = ((end - start) / step - 1e-9).ceil() as usize;
        if count == 0 {
            return Err(Error::InvalidParameter("empty lambda sweep".into()));
        }
        Ok(LambdaSweep { start, step, count })
    }

    pub fn single(value: f64) -> Self {
        LambdaSweep { start: value, step: 1.0, count: 1 }
    }

    fn check(start: f64, end: f64, step: f64) -> Result<()> {
        if !(step > 0.0) || end < start || !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad lambda range {start}:{end}:{step}"
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |k| self.start + k as f64 * self.step)
    }
}

/// Specification of one clique benchmark dataset.
#[derive(Debug, Clone)]
pub struct CliqueDatasetSpec {
    pub family: CliqueFamily,
    pub n: usize,
    pub r: usize,
    pub sweep: LambdaSweep,
    pub cliques_per_lambda: usize,
    pub seed: u64,
    /// Scale the coupling as `lambda / n` (balances vertex and clique terms
    /// on large cliques).
    pub lambda_over_n: bool,
}

/// One generated problem with its provenance.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub id: usize,
    pub lambda: f64,
    pub seed: u64,
    pub problem: CliqueProblem,
}

/// Generates the dataset: for each lambda in the sweep, `cliques_per_lambda`
/// problems with vertex potentials uniform in `[0, 2)`. Majority families
/// draw a symmetric weight matrix per problem; the sparse variant zeroes
/// roughly 70% of its entries.
pub fn gen_clique_dataset(spec: &CliqueDatasetSpec) -> Result<Vec<GeneratedProblem>> {
    if spec.n < 1 || spec.r < 2 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and r >= 2, got n = {}, r = {}",
            spec.n, spec.r
        )));
    }
    if spec.cliques_per_lambda < 1 {
        return Err(Error::InvalidParameter("need at least one clique per lambda".into()));
    }
    let mut out = Vec::with_capacity(spec.sweep.count * spec.cliques_per_lambda);
    let mut id = 0;
    for lambda in spec.sweep.values() {
        let effective = if spec.lambda_over_n { lambda / spec.n as f64 } else { lambda };
        for _ in 0..spec.cliques_per_lambda {
            let seed = derive_seed(spec.seed, id as u64);
            let mut rng = Rng64::new(seed);
            let psi: Vec<Vec<f64>> = (0..spec.n)
                .map(|_| (0..spec.r).map(|_| rng.uniform(0.0, 2.0)).collect())
                .collect();
            let potential = match spec.family {
                CliqueFamily::Potts => CliquePotential::potts(effective, spec.r)?,
                CliqueFamily::Entropy => CliquePotential::entropy(effective, spec.r)?,
                CliqueFamily::Makespan => CliquePotential::linear_makespan(effective, spec.r)?,
                CliqueFamily::Makespan2 => CliquePotential::square_makespan(effective, spec.r)?,
                CliqueFamily::MajDense => {
                    CliquePotential::majority(gen_w_dense(&mut rng, spec.r, effective))?
                }
                CliqueFamily::MajSparse => {
                    CliquePotential::majority(gen_w_sparse(&mut rng, spec.r, effective))?
                }
            };
            out.push(GeneratedProblem {
                id,
                lambda: effective,
                seed,
                problem: CliqueProblem::new(psi, potential)?,
            });
            id += 1;
        }
    }
    Ok(out)
}

/// Symmetric weights: the diagonal is `lambda`, off-diagonals uniform in
/// `[0, 2 lambda)`.
fn gen_w_dense(rng: &mut Rng64, r: usize, lambda: f64) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; r]; r];
    for i in 0..r {
        w[i][i] = lambda;
        for j in i + 1..r {
            let x = rng.uniform(0.0, 2.0 * lambda);
            w[i][j] = x;
            w[j][i] = x;
        }
    }
    w
}

/// Symmetric weights uniform in `[0, 2 lambda)` with roughly 70% of the
/// entries zeroed (symmetrically).
fn gen_w_sparse(rng: &mut Rng64, r: usize, lambda: f64) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in i..r {
            let x = rng.uniform(0.0, 2.0 * lambda);
            let keep = rng.next_f64() >= 0.7;
            let x = if keep { x } else { 0.0 };
            w[i][j] = x;
            w[j][i] = x;
        }
    }
    w
}

/// Specification of a synthetic labeled corpus for collective inference:
/// each domain fixes one label-order template; instances emit noisy node
/// potentials around their gold labeling, and a fraction are made ambiguous
/// so that only cross-instance conformance can recover the gold labels.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub num_domains: usize,
    pub instances_per_domain: usize,
    /// Label names; must contain "Other".
    pub labels: Vec<String>,
    /// Templates: orders of non-Other label ids.
    pub templates: Vec<Vec<LabelId>>,
    /// Potential noise amplitude in `[0, 1]`.
    pub noise: f64,
    /// Fraction of instances per domain with a misleading first segment.
    pub ambiguous_fraction: f64,
    /// Margin by which the misleading label beats the gold one.
    pub ambiguity_margin: f64,
    pub seed: u64,
}

/// One generated instance with its gold labeling and domain index.
#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub chain: ChainInstance,
    pub gold: Vec<LabelId>,
    pub domain: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub labels: LabelSet,
    pub instances: Vec<CorpusInstance>,
}

/// Generates the corpus. With zero noise and no ambiguous instances, every
/// instance's independent Viterbi decoding equals its gold labeling.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::InvalidParameter(format!("noise {} not in [0,1]", spec.noise)));
    }
    if !(0.0..=1.0).contains(&spec.ambiguous_fraction) {
        return Err(Error::InvalidParameter("ambiguous fraction must lie in [0,1]".into()));
    }
    let labels = LabelSet::new(spec.labels.clone());
    let other = labels
        .other()
        .ok_or_else(|| Error::InvalidParameter("corpus label set needs an Other label".into()))?;
    if spec.templates.is_empty() {
        return Err(Error::InvalidParameter("need at least one template".into()));
    }
    for t in &spec.templates {
        if t.is_empty() || t.iter().any(|&l| l >= labels.len() || l == other) {
            return Err(Error::InvalidParameter("bad template label".into()));
        }
    }

    let boost = 1.0;
    let mut instances = Vec::new();
    for d in 0..spec.num_domains {
        let mut drng = Rng64::new(derive_seed(spec.seed, d as u64));
        let template = &spec.templates[drng.below(spec.templates.len())];
        let ambiguous_count =
            (spec.ambiguous_fraction * spec.instances_per_domain as f64).floor() as usize;
        for inst_idx in 0..spec.instances_per_domain {
            let mut rng =
                Rng64::new(derive_seed(spec.seed, (1 + d * spec.instances_per_domain + inst_idx) as u64 * 2654435761));
            // gold labeling: template segments (1-2 tokens) separated by
            // 0-1 Other tokens, with an optional leading Other
            let mut gold: Vec<LabelId> = Vec::new();
            let mut tokens: Vec<String> = Vec::new();
            if rng.below(2) == 0 {
                gold.push(other);
                tokens.push(format!("oth{}", rng.below(4)));
            }
            for (si, &seg) in template.iter().enumerate() {
                let seg_len = 1 + rng.below(2);
                for _ in 0..seg_len {
                    gold.push(seg);
                    tokens.push(format!("w{seg}_{}", rng.below(4)));
                }
                if si + 1 < template.len() && rng.below(2) == 0 {
                    gold.push(other);
                    tokens.push(format!("oth{}", rng.below(4)));
                }
            }
            let t = gold.len();
            let l = labels.len();
            let mut node: Vec<Vec<f64>> = (0..t)
                .map(|j| {
                    (0..l)
                        .map(|y| {
                            let base = if y == gold[j] { boost } else { 0.0 };
                            base + spec.noise * rng.uniform(-0.5, 0.5)
                        })
                        .collect()
                })
                .collect();
            if inst_idx < ambiguous_count {
                // flip the first non-Other segment's potentials toward a
                // decoy label; cross-instance conformance must repair it
                let first = gold.iter().position(|&y| y != other).expect("template non-empty");
                let gold_label = gold[first];
                let decoy = (0..l).find(|&y| y != gold_label && y != other).unwrap_or(gold_label);
                let mut j = first;
                while j < t && gold[j] == gold_label {
                    node[j][decoy] = node[j][gold_label] + spec.ambiguity_margin;
                    j += 1;
                }
            }
            let edge = vec![vec![vec![0.0; l]; l]; t - 1];
            instances.push(CorpusInstance {
                chain: ChainInstance::new(tokens, node, edge)?,
                gold,
                domain: d,
            });
        }
    }
    Ok(Corpus { labels, instances })
}
