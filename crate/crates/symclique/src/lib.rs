//! MAP inference for cliques with symmetric (cardinality-based) potentials,
//! plus a collective-inference engine that labels multiple chain MRFs jointly
//! by coupling them through decomposable properties.
//!
//! The crate is organized bottom-up:
//!
//! * [`potentials`] — symmetric clique potential families evaluated on count
//!   histograms.
//! * [`clique`] — clique MAP solvers: the sweep (alpha-pass) family,
//!   expansion moves, ICM, and a brute-force oracle.
//! * [`majority`] — solvers specific to linear majority potentials: a
//!   modified sweep heuristic, an exact matching-based solver, and a
//!   Lagrangian-relaxation solver.
//! * [`properties`] — the decomposable-property algebra over labelings and a
//!   library of built-in properties.
//! * [`chain`] — chain MRFs: Viterbi and property-aware message computation.
//! * [`cluster`] — the top-level cluster-graph engine coupling instances and
//!   property cliques.
//! * [`synth`] — seeded generators for benchmark cliques and corpora.
//! * [`bench`] — solver comparison runs and CSV reports.
//! * [`io`] — text file formats for problems, chains, and collective models.

pub mod bench;
pub mod chain;
pub mod clique;
pub mod cluster;
mod error;
pub mod io;
pub mod majority;
pub mod potentials;
pub mod properties;
pub mod synth;

pub use error::{Error, Result};
