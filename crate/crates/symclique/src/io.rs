//! Text file formats: clique problem suites, chain instances, and
//! collective-model manifests.
//!
//! All formats are line oriented; `#` starts a comment and blank lines are
//! skipped. Numbers are written with Rust's shortest round-trip formatting
//! (dot decimal, locale independent), so files regenerate byte-identically
//! from the same inputs.
//!
//! Problem file: one block per problem,
//!
//! ```text
//! n R family params...
//! <n rows of R vertex potentials>
//! <R rows of R majority weights, for the majority family only>
//! ```
//!
//! where `family params...` is one of `potts L`, `entropy L`, `makespan L`,
//! `makespan2 L`, or `majority`.
//!
//! Chain file:
//!
//! ```text
//! chain T L
//! tokens <T tokens>
//! <T rows of L node potentials>
//! <(T-1)*L rows of L edge potentials, grouped by position>
//! gold <T label names>        # optional
//! ```
//!
//! Collective manifest:
//!
//! ```text
//! labels <name...>
//! option <key>=<value>        # sentinels, restrict-ranges, damping
//! instance <relative path>
//! property kind=<kind> [anchor=L] [token=T] potential=<family> lambda=<x> [solver=<s>]
//! ```

use crate::chain::ChainInstance;
use crate::clique::CliqueProblem;
use crate::cluster::{ClusterOptions, MessageSolver, PropertyCoupling, PropertyPotentialSpec, SentinelMode};
use crate::majority::{LrConfig, MajorityProblem};
use crate::potentials::{CliquePotential, PerValueFn};
use crate::properties::{LabelId, LabelSet, Property};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Lines with content: (1-based line number, trimmed text).
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_floats(line: usize, text: &str, expect: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| parse_err(line, format!("bad number {t}: {e}"))))
        .collect::<Result<_>>()?;
    if vals.len() != expect {
        return Err(parse_err(line, format!("expected {expect} numbers, got {}", vals.len())));
    }
    Ok(vals)
}

/// Serializes one problem block. Only named potential families round-trip
/// through files; table-backed potentials are in-memory constructions.
pub fn write_problem(out: &mut String, problem: &CliqueProblem) -> Result<()> {
    let (family, lambda, w) = match problem.potential() {
        CliquePotential::Additive { f: PerValueFn::Square { lambda }, .. } => {
            ("potts", Some(*lambda), None)
        }
        CliquePotential::Additive { f: PerValueFn::Entropy { lambda }, .. } => {
            ("entropy", Some(*lambda), None)
        }
        CliquePotential::MaxLabel { f: PerValueFn::Linear { lambda }, .. } => {
            ("makespan", Some(*lambda), None)
        }
        CliquePotential::MaxLabel { f: PerValueFn::Square { lambda }, .. } => {
            ("makespan2", Some(*lambda), None)
        }
        CliquePotential::Majority { w } => ("majority", None, Some(w)),
        _ => {
            return Err(Error::NotApplicable(
                "table-backed potentials have no file form".into(),
            ))
        }
    };
    match lambda {
        Some(l) => writeln!(out, "{} {} {} {}", problem.n(), problem.r(), family, l),
        None => writeln!(out, "{} {} {}", problem.n(), problem.r(), family),
    }
    .expect("writing to a string");
    for row in problem.psi() {
        push_row(out, row);
    }
    if let Some(w) = w {
        for row in w {
            push_row(out, row);
        }
    }
    Ok(())
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, x) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{x}").expect("writing to a string");
    }
    out.push('\n');
}

/// Serializes a whole problem suite.
pub fn write_problems(problems: &[CliqueProblem]) -> Result<String> {
    let mut out = String::new();
    for (i, p) in problems.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_problem(&mut out, p)?;
    }
    Ok(out)
}

/// Serializes a suite with per-problem seed annotations (`# seed N` before
/// each block), as written by the dataset generator.
pub fn write_problems_with_seeds(problems: &[(CliqueProblem, u64)]) -> Result<String> {
    let mut out = String::new();
    for (i, (p, seed)) in problems.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "# seed {seed}").expect("writing to a string");
        write_problem(&mut out, p)?;
    }
    Ok(out)
}

/// Parses a suite along with its `# seed N` annotations (zero when absent).
pub fn read_problems_with_seeds(text: &str) -> Result<Vec<(CliqueProblem, u64)>> {
    let mut seeds = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("# seed ") {
            if let Ok(s) = rest.trim().parse::<u64>() {
                seeds.push(s);
            }
        }
    }
    let problems = read_problems(text)?;
    Ok(problems
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, seeds.get(i).copied().unwrap_or(0)))
        .collect())
}

/// Parses a problem suite.
pub fn read_problems(text: &str) -> Result<Vec<CliqueProblem>> {
    let mut lines = content_lines(text).peekable();
    let mut out = Vec::new();
    while let Some((lno, header)) = lines.next() {
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lno, "bad vertex count"))?;
        let r: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lno, "bad value count"))?;
        let family = parts.next().ok_or_else(|| parse_err(lno, "missing family"))?;
        let lambda = parts.next().map(|t| {
            t.parse::<f64>().map_err(|e| parse_err(lno, format!("bad lambda {t}: {e}")))
        });
        let mut take_rows = |count: usize, width: usize| -> Result<Vec<Vec<f64>>> {
            (0..count)
                .map(|_| {
                    let (l, text) =
                        lines.next().ok_or_else(|| parse_err(lno, "unexpected end of block"))?;
                    parse_floats(l, text, width)
                })
                .collect()
        };
        let psi = take_rows(n, r)?;
        let potential = match family {
            "potts" => CliquePotential::potts(
                lambda.ok_or_else(|| parse_err(lno, "potts needs lambda"))??,
                r,
            )?,
            "entropy" => CliquePotential::entropy(
                lambda.ok_or_else(|| parse_err(lno, "entropy needs lambda"))??,
                r,
            )?,
            "makespan" => CliquePotential::linear_makespan(
                lambda.ok_or_else(|| parse_err(lno, "makespan needs lambda"))??,
                r,
            )?,
            "makespan2" => CliquePotential::square_makespan(
                lambda.ok_or_else(|| parse_err(lno, "makespan2 needs lambda"))??,
                r,
            )?,
            "majority" => CliquePotential::majority(take_rows(r, r)?)?,
            other => return Err(parse_err(lno, format!("unknown family {other}"))),
        };
        out.push(CliqueProblem::new(psi, potential)?);
    }
    Ok(out)
}

/// The majority view of a problem read from a file, when applicable.
pub fn as_majority(problem: &CliqueProblem) -> Option<MajorityProblem> {
    match problem.potential() {
        CliquePotential::Majority { w } => {
            MajorityProblem::new(problem.psi().to_vec(), w.clone()).ok()
        }
        _ => None,
    }
}

/// Serializes one chain instance; `gold` labels are written by name.
pub fn write_chain(
    instance: &ChainInstance,
    labels: &LabelSet,
    gold: Option<&[LabelId]>,
) -> String {
    let mut out = String::new();
    let t = instance.len();
    let l = instance.labels();
    writeln!(out, "chain {t} {l}").unwrap();
    writeln!(out, "tokens {}", instance.tokens().join(" ")).unwrap();
    for j in 0..t {
        let row: Vec<f64> = (0..l).map(|y| instance.node_potential(j, y)).collect();
        push_row(&mut out, &row);
    }
    for j in 0..t - 1 {
        for a in 0..l {
            let row: Vec<f64> = (0..l).map(|b| instance.edge_potential(j, a, b)).collect();
            push_row(&mut out, &row);
        }
    }
    if let Some(gold) = gold {
        let names: Vec<&str> = gold.iter().map(|&y| labels.name(y)).collect();
        writeln!(out, "gold {}", names.join(" ")).unwrap();
    }
    out
}

/// Parses a chain file; gold labels are resolved against `labels`.
pub fn read_chain(text: &str, labels: &LabelSet) -> Result<(ChainInstance, Option<Vec<LabelId>>)> {
    let mut lines = content_lines(text);
    let (lno, header) = lines.next().ok_or_else(|| parse_err(0, "empty chain file"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("chain") {
        return Err(parse_err(lno, "expected 'chain T L' header"));
    }
    let t: usize = parts
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err(lno, "bad token count"))?;
    let l: usize = parts
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| parse_err(lno, "bad label count"))?;
    if l != labels.len() {
        return Err(parse_err(lno, format!("chain over {l} labels, model has {}", labels.len())));
    }
    let (lno, tok_line) = lines.next().ok_or_else(|| parse_err(lno, "missing tokens line"))?;
    let mut tok_parts = tok_line.split_whitespace();
    if tok_parts.next() != Some("tokens") {
        return Err(parse_err(lno, "expected tokens line"));
    }
    let tokens: Vec<String> = tok_parts.map(|s| s.to_string()).collect();
    if tokens.len() != t {
        return Err(parse_err(lno, format!("expected {t} tokens, got {}", tokens.len())));
    }
    let mut node = Vec::with_capacity(t);
    for _ in 0..t {
        let (l2, text) = lines.next().ok_or_else(|| parse_err(lno, "missing node row"))?;
        node.push(parse_floats(l2, text, l)?);
    }
    let mut edge = Vec::with_capacity(t.saturating_sub(1));
    for _ in 0..t.saturating_sub(1) {
        let mut table = Vec::with_capacity(l);
        for _ in 0..l {
            let (l2, text) = lines.next().ok_or_else(|| parse_err(lno, "missing edge row"))?;
            table.push(parse_floats(l2, text, l)?);
        }
        edge.push(table);
    }
    let mut gold = None;
    if let Some((l2, text)) = lines.next() {
        let mut parts = text.split_whitespace();
        if parts.next() != Some("gold") {
            return Err(parse_err(l2, "expected optional gold line"));
        }
        let ids: Vec<LabelId> = parts
            .map(|name| {
                labels
                    .lookup(name)
                    .ok_or_else(|| parse_err(l2, format!("unknown gold label {name}")))
            })
            .collect::<Result<_>>()?;
        if ids.len() != t {
            return Err(parse_err(l2, format!("expected {t} gold labels, got {}", ids.len())));
        }
        gold = Some(ids);
    }
    Ok((ChainInstance::new(tokens, node, edge)?, gold))
}

/// A parsed collective-model manifest.
pub struct Manifest {
    pub labels: LabelSet,
    pub instances: Vec<ChainInstance>,
    pub gold: Vec<Option<Vec<LabelId>>>,
    pub couplings: Vec<PropertyCoupling>,
    pub options: ClusterOptions,
}

/// Reads a manifest; instance paths resolve relative to `dir`.
pub fn read_manifest(text: &str, dir: &Path) -> Result<Manifest> {
    let mut labels: Option<LabelSet> = None;
    let mut instances = Vec::new();
    let mut gold = Vec::new();
    let mut property_lines: Vec<(usize, String)> = Vec::new();
    let mut options = ClusterOptions::default();
    let mut vocab: Vec<String> = Vec::new();

    for (lno, line) in content_lines(text) {
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match head {
            "labels" => {
                let names: Vec<String> = rest.split_whitespace().map(|s| s.to_string()).collect();
                if names.is_empty() {
                    return Err(parse_err(lno, "empty label set"));
                }
                labels = Some(LabelSet::new(names));
            }
            "instance" => {
                let labels = labels
                    .as_ref()
                    .ok_or_else(|| parse_err(lno, "labels must come before instances"))?;
                let path = dir.join(rest.trim());
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    parse_err(lno, format!("cannot read {}: {e}", path.display()))
                })?;
                let (inst, g) = read_chain(&text, labels)?;
                vocab.extend(inst.tokens().iter().cloned());
                instances.push(inst);
                gold.push(g);
            }
            "property" => property_lines.push((lno, rest.to_string())),
            "option" => {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| parse_err(lno, "options are key=value"))?;
                match key.trim() {
                    "sentinels" => {
                        options.sentinel_mode = match value.trim() {
                            "exclude" => SentinelMode::Exclude,
                            "include" => SentinelMode::Include,
                            other => {
                                return Err(parse_err(lno, format!("unknown sentinel mode {other}")))
                            }
                        }
                    }
                    "restrict-ranges" => {
                        options.restrict_ranges = match value.trim() {
                            "on" => true,
                            "off" => false,
                            other => {
                                return Err(parse_err(lno, format!("bad restrict-ranges {other}")))
                            }
                        }
                    }
                    "damping" => {
                        options.damping = value
                            .trim()
                            .parse()
                            .map_err(|e| parse_err(lno, format!("bad damping: {e}")))?;
                    }
                    other => return Err(parse_err(lno, format!("unknown option {other}"))),
                }
            }
            other => return Err(parse_err(lno, format!("unknown directive {other}"))),
        }
    }

    let labels = labels.ok_or_else(|| parse_err(0, "manifest has no labels line"))?;
    vocab.sort();
    vocab.dedup();

    let mut couplings = Vec::new();
    for (lno, rest) in property_lines {
        let mut kind = None;
        let mut anchor = None;
        let mut token = None;
        let mut potential = None;
        let mut lambda = 1.0f64;
        let mut solver = None;
        for field in rest.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_err(lno, "property fields are key=value"))?;
            match key {
                "kind" => kind = Some(value.to_string()),
                "anchor" => anchor = Some(value.to_string()),
                "token" => token = Some(value.to_string()),
                "potential" => potential = Some(value.to_string()),
                "lambda" => {
                    lambda =
                        value.parse().map_err(|e| parse_err(lno, format!("bad lambda: {e}")))?
                }
                "solver" => solver = Some(value.to_string()),
                other => return Err(parse_err(lno, format!("unknown property field {other}"))),
            }
        }
        let kind = kind.ok_or_else(|| parse_err(lno, "property needs kind="))?;
        let property = match kind.as_str() {
            "tokenlabel" => {
                let t = token.ok_or_else(|| parse_err(lno, "tokenlabel needs token="))?;
                Property::token_label(&labels, &t)
            }
            "firstnonother" => Property::first_non_other(&labels)?,
            "nextlabel" => {
                let a = anchor.ok_or_else(|| parse_err(lno, "nextlabel needs anchor="))?;
                Property::next_label(&labels, &a)?
            }
            "beforetoken" => {
                let a = anchor.ok_or_else(|| parse_err(lno, "beforetoken needs anchor="))?;
                Property::before_token(&labels, &a, &vocab)?
            }
            other => return Err(parse_err(lno, format!("unknown property kind {other}"))),
        };
        let potential = match potential.as_deref().unwrap_or("potts") {
            "potts" => PropertyPotentialSpec::Potts { lambda },
            "entropy" => PropertyPotentialSpec::Entropy { lambda },
            "makespan" => PropertyPotentialSpec::Makespan { lambda },
            "makespan2" => PropertyPotentialSpec::Makespan2 { lambda },
            "majority" => PropertyPotentialSpec::MajorityDiag { lambda },
            other => return Err(parse_err(lno, format!("unknown potential {other}"))),
        };
        let solver = match solver.as_deref() {
            None => None,
            Some("alpha") => Some(MessageSolver::AlphaPass),
            Some("modified-alpha") => Some(MessageSolver::ModifiedAlphaPass),
            Some("lr") => Some(MessageSolver::Lr(LrConfig::default())),
            Some(other) => return Err(parse_err(lno, format!("unknown solver {other}"))),
        };
        couplings.push(PropertyCoupling { property, potential, solver });
    }

    Ok(Manifest { labels, instances, gold, couplings, options })
}
