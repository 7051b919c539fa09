//! Noise channel descriptions: local and global depolarizing, general Pauli
//! channels, and amplitude damping in Kraus form.
//!
//! Channels are immutable value types. Their dense action on density
//! matrices lives in [`crate::dense`]; this module owns parameter domains,
//! transfer coefficients, and serialization.

use crate::error::{EmlabError, Result};
use crate::pauli::PauliString;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tolerance for the Kraus completeness condition.
pub const KRAUS_COMPLETENESS_TOL: f64 = 1e-12;

/// Scope of a depolarizing channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepolarizingScope {
    /// One single-qubit depolarizing factor per qubit.
    LocalPerQubit,
    /// One depolarizing map on the full 2^n-dimensional system.
    Global,
}

/// Depolarizing channel `M -> p M + (1 - p) Tr[M] I / d` with the damping
/// parameter `p` and the stated scope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingSpec {
    pub p: f64,
    pub scope: DepolarizingScope,
}

impl DepolarizingSpec {
    pub fn local(p: f64) -> Self {
        Self {
            p,
            scope: DepolarizingScope::LocalPerQubit,
        }
    }

    pub fn global(p: f64) -> Self {
        Self {
            p,
            scope: DepolarizingScope::Global,
        }
    }

    /// Dimension of one channel factor when acting on `n` qubits.
    pub fn dimension(&self, n: usize) -> usize {
        match self.scope {
            DepolarizingScope::LocalPerQubit => 2,
            DepolarizingScope::Global => 1usize << n,
        }
    }

    /// Checks the complete-positivity range of `p`: a d-dimensional
    /// depolarizing map is a channel for `p` in `[-1/(d^2 - 1), 1]`, which is
    /// `[-1/3, 1]` per qubit.
    pub fn validate(&self, n: usize) -> Result<()> {
        let d = self.dimension(n) as f64;
        let lo = -1.0 / (d * d - 1.0);
        if !(self.p >= lo && self.p <= 1.0) {
            return Err(EmlabError::InvalidParameter(format!(
                "depolarizing p = {} outside [{:.6}, 1]",
                self.p, lo
            )));
        }
        Ok(())
    }
}

/// A Pauli channel: a probability distribution over the `4^n` Pauli letters.
///
/// Entry `q[i]` is the probability of conjugating by the string with letter
/// index `i` (two bits per qubit, digit `x + 2z`, so I=0, X=1, Z=2, Y=3 per
/// qubit, qubit 0 least significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    pub n: usize,
    pub q: Vec<f64>,
}

impl PauliChannel {
    /// Validates normalization and non-negativity.
    pub fn new(n: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != 1usize << (2 * n) {
            return Err(EmlabError::DimensionMismatch(format!(
                "pauli channel on {n} qubits needs {} weights, got {}",
                1usize << (2 * n),
                q.len()
            )));
        }
        if q.iter().any(|&w| w < 0.0) {
            return Err(EmlabError::InvalidParameter(
                "pauli channel weights must be non-negative".into(),
            ));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EmlabError::InvalidParameter(format!(
                "pauli channel weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { n, q })
    }
}

/// A channel given by a list of Kraus operators on `k` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    pub k: usize,
    pub ops: Vec<DMatrix<Complex64>>,
}

impl KrausChannel {
    /// Validates dimensions and the completeness relation
    /// `sum K† K = I` to [`KRAUS_COMPLETENESS_TOL`].
    pub fn new(k: usize, ops: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let dim = 1usize << k;
        if ops.is_empty() {
            return Err(EmlabError::InvalidParameter(
                "kraus channel needs at least one operator".into(),
            ));
        }
        for op in &ops {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(EmlabError::DimensionMismatch(format!(
                    "kraus operator is {}x{}, expected {dim}x{dim}",
                    op.nrows(),
                    op.ncols()
                )));
            }
        }
        let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
        for op in &ops {
            sum += op.adjoint() * op;
        }
        for r in 0..dim {
            for c in 0..dim {
                let expect = if r == c {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                if (sum[(r, c)] - expect).norm() > KRAUS_COMPLETENESS_TOL {
                    return Err(EmlabError::InvalidParameter(format!(
                        "kraus completeness violated at ({r},{c}): {}",
                        sum[(r, c)]
                    )));
                }
            }
        }
        Ok(Self { k, ops })
    }
}

/// Serializable description of a noise layer, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Single-qubit depolarizing with damping `p` on every qubit.
    #[serde(rename = "depolarizing-local")]
    DepolarizingLocal { p: f64 },
    /// One global depolarizing map on the whole register.
    #[serde(rename = "depolarizing-global")]
    DepolarizingGlobal { p: f64 },
    /// Explicit Pauli channel weights (letter-index order).
    #[serde(rename = "pauli")]
    Pauli { n: usize, q: Vec<f64> },
    /// Per-qubit amplitude damping with decay probability `gamma`.
    #[serde(rename = "amplitude-damping")]
    AmplitudeDamping { gamma: f64 },
}

impl NoiseSpec {
    /// Short label for records and CSV rows.
    pub fn kind_label(&self) -> &'static str {
        match self {
            NoiseSpec::DepolarizingLocal { .. } => "depolarizing-local",
            NoiseSpec::DepolarizingGlobal { .. } => "depolarizing-global",
            NoiseSpec::Pauli { .. } => "pauli",
            NoiseSpec::AmplitudeDamping { .. } => "amplitude-damping",
        }
    }

    /// The scalar parameter used in experiment records.
    pub fn parameter(&self) -> f64 {
        match self {
            NoiseSpec::DepolarizingLocal { p } | NoiseSpec::DepolarizingGlobal { p } => *p,
            NoiseSpec::Pauli { q, .. } => q.first().copied().unwrap_or(f64::NAN),
            NoiseSpec::AmplitudeDamping { gamma } => *gamma,
        }
    }

    /// Validates parameter domains against an `n`-qubit register.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            NoiseSpec::DepolarizingLocal { p } => DepolarizingSpec::local(*p).validate(n),
            NoiseSpec::DepolarizingGlobal { p } => DepolarizingSpec::global(*p).validate(n),
            NoiseSpec::Pauli { n: cn, q } => {
                if *cn != n {
                    return Err(EmlabError::DimensionMismatch(format!(
                        "pauli channel on {cn} qubits attached to {n}-qubit circuit"
                    )));
                }
                PauliChannel::new(*cn, q.clone()).map(|_| ())
            }
            NoiseSpec::AmplitudeDamping { gamma } => {
                if !(0.0..=1.0).contains(gamma) {
                    return Err(EmlabError::InvalidParameter(format!(
                        "amplitude damping gamma = {gamma} outside [0, 1]"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Diagonal Pauli-transfer coefficient of a noise layer: the factor by
/// which the channel scales the Pauli string `P`.
///
/// Depolarizing channels and general Pauli channels act diagonally in the
/// Pauli basis; amplitude damping does not (it mixes the identity into Z)
/// and is rejected with an unsupported-noise error so callers can fall back
/// to the dense oracle.
pub fn transfer_coefficient(spec: &NoiseSpec, p: &PauliString) -> Result<f64> {
    let n = p.num_qubits();
    spec.validate(n)?;
    match spec {
        NoiseSpec::DepolarizingLocal { p: dp } => {
            depolarizing_damping(&DepolarizingSpec::local(*dp), p)
        }
        NoiseSpec::DepolarizingGlobal { p: dp } => {
            depolarizing_damping(&DepolarizingSpec::global(*dp), p)
        }
        NoiseSpec::Pauli { n: cn, q } => {
            // sigma P sigma = +-P, so the channel scales P by the signed sum
            // of weights: +q for commuting sigma, -q for anticommuting.
            let mut coef = 0.0;
            for (idx, &w) in q.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let sigma = PauliString::from_letter_index(*cn, idx as u64)?;
                coef += if p.commutes(&sigma)? { w } else { -w };
            }
            Ok(coef)
        }
        NoiseSpec::AmplitudeDamping { .. } => Err(EmlabError::UnsupportedNoise(
            "amplitude damping has no diagonal Pauli-transfer action; use the dense oracle"
                .into(),
        )),
    }
}

/// Transfer coefficient of a depolarizing channel on a Pauli string: the
/// channel maps `P` to `damping * P`.
///
/// Local scope gives `p^w(P)`; global scope gives `p` for non-identity `P`
/// and 1 for the identity.
pub fn depolarizing_damping(spec: &DepolarizingSpec, p: &PauliString) -> Result<f64> {
    spec.validate(p.num_qubits())?;
    match spec.scope {
        DepolarizingScope::LocalPerQubit => Ok(spec.p.powi(p.weight() as i32)),
        DepolarizingScope::Global => {
            if p.is_identity_letters() {
                Ok(1.0)
            } else {
                Ok(spec.p)
            }
        }
    }
}

/// Writes single-qubit depolarizing as a Pauli channel:
/// `q_I = (1 + 3p)/4`, `q_X = q_Y = q_Z = (1 - p)/4`.
pub fn single_qubit_depolarizing_as_pauli_channel(p: f64) -> Result<PauliChannel> {
    DepolarizingSpec::local(p).validate(1)?;
    let q_i = (1.0 + 3.0 * p) / 4.0;
    let q_other = (1.0 - p) / 4.0;
    PauliChannel::new(1, vec![q_i, q_other, q_other, q_other])
}

/// The standard T1-decay amplitude damping channel with decay probability
/// `gamma`; non-unital for every `gamma > 0`.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(EmlabError::InvalidParameter(format!(
            "amplitude damping gamma = {gamma} outside [0, 1]"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let k0 = DMatrix::from_row_slice(2, 2, &[one, zero, zero, Complex64::new((1.0 - gamma).sqrt(), 0.0)]);
    let k1 = DMatrix::from_row_slice(2, 2, &[zero, Complex64::new(gamma.sqrt(), 0.0), zero, zero]);
    KrausChannel::new(1, vec![k0, k1])
}
