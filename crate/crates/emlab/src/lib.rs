//! Desk-scale experiments on noise-induced purity decay and the limits of
//! quantum error mitigation.
//!
//! The crate combines a small stabilizer/Pauli toolbox with an exact dense
//! density-matrix oracle and uses the pair to run quantitative experiments:
//!
//! - [`pauli`] and [`clifford`]: packed Pauli strings, Clifford tableaux,
//!   exact uniform Clifford sampling, and Pauli-mixing verification.
//! - [`noise`]: depolarizing, Pauli, and amplitude-damping channels in both
//!   transfer and Kraus form.
//! - [`dense`]: dense density matrices, divergences, observable expectations,
//!   and basis sampling; the brute-force reference for everything else.
//! - [`circuit`]: layered circuit families (random mixing layers, identity
//!   baseline, brickwork lattices, parity-encoding circuits) with noise
//!   attached after every unitary layer.
//! - [`purity`]: exact and Monte-Carlo Pauli-path purity evaluation, weight
//!   spectra, closed-form decay predictions, and decay-rate sweeps.
//! - [`mitigate`]: probabilistic error cancellation, zero-noise
//!   extrapolation, virtual distillation, and shot-cost accounting for
//!   accuracy targets.
//! - [`bounds`]: Fano and Le Cam sample-complexity calculators plus the
//!   mitigation cost chart built on purity decay output.
//! - [`parity`]: parity distributions, a statistical-query oracle with an
//!   adversarial answering policy, Yatracos hypothesis selection, and the
//!   sampling-vs-queries contrast experiment.
//! - [`config`], [`runner`], [`records`]: the batch CLI layer with
//!   deterministic seeding, CSV/JSON emission, and run manifests.
//!
//! All randomized entry points take explicit seeds and produce identical
//! output for a fixed seed regardless of worker count.

pub mod bounds;
pub mod circuit;
pub mod clifford;
pub mod config;
pub mod dense;
pub mod error;
pub mod mitigate;
pub mod noise;
pub mod parity;
pub mod pauli;
pub mod purity;
pub mod records;
pub mod runner;
pub mod stats;

pub use error::{EmlabError, Result};
