//! Error-mitigation protocols and the weak/strong mitigation interfaces.
//!
//! Implements probabilistic error cancellation (PEC) for local depolarizing
//! noise, zero-noise extrapolation (ZNE) via exponent re-parameterization
//! `p -> p^lambda`, order-2 virtual distillation on the dense oracle, an
//! adaptive weak-mitigation harness with a joint `(epsilon, delta)`
//! guarantee over an observable set, and additive/multiplicative checks for
//! samplers against an exact reference distribution.

use crate::circuit::{attach_noise, LayeredCircuit, UnitaryLayer};
use crate::dense::{
    bretagnolle_huber_bound, expectation_on_vector, pauli_trace_of_matrix, tableau_to_unitary,
    tv_distance, DensityMatrix, Observable,
};
use crate::error::{EmlabError, Result};
use crate::noise::NoiseSpec;
use crate::pauli::PauliString;
use crate::stats::{derive_seed, median_of_means, RunningStats};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Block size for the median-of-means confidence conversion.
pub const MOM_BLOCK: usize = 30;

/// Shots used to pilot-estimate the per-shot variance before committing to
/// a full run.
const PILOT_SHOTS: u64 = 300;

/// A labelled finite set of norm-bounded Pauli-sum observables.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    entries: Vec<(String, Observable)>,
}

impl ObservableSet {
    pub fn new(entries: Vec<(String, Observable)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(EmlabError::InvalidParameter(
                "observable set must be non-empty".into(),
            ));
        }
        let n = entries[0].1.num_qubits();
        for (label, obs) in &entries {
            if obs.num_qubits() != n {
                return Err(EmlabError::DimensionMismatch(format!(
                    "observable '{label}' on {} qubits, expected {n}",
                    obs.num_qubits()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_qubits(&self) -> usize {
        self.entries[0].1.num_qubits()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, Observable)> {
        self.entries.iter()
    }
}

/// Outcome of a mitigation run.
#[derive(Clone, Debug, Serialize)]
pub struct MitigationResult {
    pub protocol: String,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Target accuracy when the run had one.
    pub epsilon: Option<f64>,
    /// Target failure probability when the run had one.
    pub delta: Option<f64>,
    /// Shots actually consumed.
    pub shots: u64,
    /// Shots the accuracy target demanded (equals `shots` when met).
    pub required_shots: u64,
    /// Multiplicative-error parameter for strong runs.
    pub kappa: Option<f64>,
    /// True when the shot cap cut the run short of its requirement.
    pub partial: bool,
}

impl MitigationResult {
    fn validate(self) -> Result<Self> {
        if self.shots == 0 {
            return Err(EmlabError::InvalidParameter(
                "mitigation result must consume at least one shot".into(),
            ));
        }
        for v in [self.epsilon, self.delta].into_iter().flatten() {
            if !(0.0..1.0).contains(&v) || v == 0.0 {
                return Err(EmlabError::InvalidParameter(format!(
                    "epsilon/delta must lie in (0,1), got {v}"
                )));
            }
        }
        Ok(self)
    }
}

/// Quasi-probability representation of the inverse of the single-qubit
/// depolarizing channel, indexed like Pauli letter digits (I, X, Z, Y).
#[derive(Clone, Copy, Debug)]
pub struct QuasiProbRep {
    pub a: [f64; 4],
    pub pec_gamma: f64,
}

/// Signed Pauli-conjugation weights inverting single-qubit depolarizing
/// noise: `a_I = (p+3)/(4p)`, `a_X = a_Y = a_Z = (p-1)/(4p)`, with
/// sampling overhead `pecGamma = (3-p)/(2p)`.
pub fn pec_inverse_representation(p: f64) -> Result<QuasiProbRep> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(EmlabError::InvalidParameter(format!(
            "pec inverse needs p in (0,1], got {p}"
        )));
    }
    let a_i = (p + 3.0) / (4.0 * p);
    let a_other = (p - 1.0) / (4.0 * p);
    Ok(QuasiProbRep {
        a: [a_i, a_other, a_other, a_other],
        pec_gamma: (3.0 - p) / (2.0 * p),
    })
}

/// Dense unitaries of a circuit's layers (None for identity layers), used
/// to run pure-state trajectories.
fn layer_unitaries(circuit: &LayeredCircuit) -> Result<Vec<Option<DMatrix<Complex64>>>> {
    circuit
        .layers
        .iter()
        .map(|layer| match &layer.unitary {
            UnitaryLayer::Identity => Ok(None),
            UnitaryLayer::Tableau(t) => Ok(Some(tableau_to_unitary(t)?)),
        })
        .collect()
}

fn require_noiseless(circuit: &LayeredCircuit) -> Result<()> {
    if circuit.layers.iter().any(|l| l.noise.is_some()) {
        return Err(EmlabError::InvalidParameter(
            "pass the noiseless circuit; the protocol attaches its own noise model".into(),
        ));
    }
    Ok(())
}

fn set_letter_digit(p: &mut PauliString, q: usize, digit: usize) -> Result<()> {
    match digit {
        0 => Ok(()),
        1 => p.set_letter(q, 'X'),
        2 => p.set_letter(q, 'Z'),
        _ => p.set_letter(q, 'Y'),
    }
}

/// Trajectory engine for PEC: per layer, the circuit unitary, a stochastic
/// Pauli unraveling of the depolarizing noise, and a quasi-probability
/// recovery insertion, all acting on a pure state.
struct PecSampler {
    n: usize,
    unitaries: Vec<Option<DMatrix<Complex64>>>,
    rep: QuasiProbRep,
    /// Cumulative distribution of the depolarizing channel as a Pauli mix.
    noise_cdf: [f64; 4],
    /// Cumulative distribution of |a|/gamma over the four letters.
    recovery_cdf: [f64; 4],
    /// Total quasi-probability weight `gamma^L` over all insertion points.
    weight: f64,
    locations: u64,
}

impl PecSampler {
    fn new(circuit: &LayeredCircuit, p: f64) -> Result<Self> {
        require_noiseless(circuit)?;
        let rep = pec_inverse_representation(p)?;
        let unitaries = layer_unitaries(circuit)?;
        let q_i = (1.0 + 3.0 * p) / 4.0;
        let q_other = (1.0 - p) / 4.0;
        let noise_cdf = [q_i, q_i + q_other, q_i + 2.0 * q_other, 1.0];
        let mut recovery_cdf = [0.0; 4];
        let mut acc = 0.0;
        for (i, &a) in rep.a.iter().enumerate() {
            acc += a.abs() / rep.pec_gamma;
            recovery_cdf[i] = acc;
        }
        let locations = (circuit.n * circuit.layers.len()) as u64;
        Ok(Self {
            n: circuit.n,
            unitaries,
            rep,
            noise_cdf,
            recovery_cdf,
            weight: rep.pec_gamma.powi(locations as i32),
            locations,
        })
    }

    fn sample_digit<R: Rng>(cdf: &[f64; 4], rng: &mut R) -> usize {
        let r: f64 = rng.gen();
        cdf.iter().position(|&c| r < c).unwrap_or(3)
    }

    /// Runs one noisy trajectory with recovery insertions and returns the
    /// signed, weighted outcome. The observable is read exactly on the
    /// trajectory state, so the noise unraveling and the quasi-probability
    /// sampling are the only randomness.
    fn shot<R: Rng>(&self, obs: &Observable, rng: &mut R) -> Result<f64> {
        let dim = 1usize << self.n;
        let mut psi = DVector::<Complex64>::zeros(dim);
        psi[0] = Complex64::new(1.0, 0.0);
        let mut sign = 1.0;
        let mut noise = PauliString::identity(self.n);
        let mut recovery = PauliString::identity(self.n);
        for u in &self.unitaries {
            if let Some(u) = u {
                psi = u * psi;
            }
            noise.reset_to_identity();
            recovery.reset_to_identity();
            for q in 0..self.n {
                set_letter_digit(&mut noise, q, Self::sample_digit(&self.noise_cdf, rng))?;
                let digit = Self::sample_digit(&self.recovery_cdf, rng);
                if self.rep.a[digit] < 0.0 {
                    sign = -sign;
                }
                set_letter_digit(&mut recovery, q, digit)?;
            }
            psi = crate::dense::apply_pauli_to_vector(&noise, &psi)?;
            psi = crate::dense::apply_pauli_to_vector(&recovery, &psi)?;
        }
        Ok(sign * self.weight * expectation_on_vector(&psi, obs)?)
    }
}

/// PEC point estimate with its empirical spread.
#[derive(Clone, Copy, Debug)]
pub struct PecEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub shots: u64,
    pub pec_gamma: f64,
    pub locations: u64,
}

/// Monte-Carlo PEC for a noiseless circuit under local depolarizing `p`
/// attached after every layer: unbiased for the noiseless expectation.
pub fn pec_estimate(
    circuit: &LayeredCircuit,
    p: f64,
    obs: &Observable,
    shots: u64,
    seed: u64,
) -> Result<PecEstimate> {
    if shots == 0 {
        return Err(EmlabError::InvalidParameter("pec needs at least one shot".into()));
    }
    let sampler = PecSampler::new(circuit, p)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut stats = RunningStats::new();
    for _ in 0..shots {
        stats.push(sampler.shot(obs, &mut rng)?);
    }
    Ok(PecEstimate {
        mean: stats.mean(),
        stderr: stats.stderr(),
        variance: stats.variance(),
        shots,
        pec_gamma: sampler.rep.pec_gamma,
        locations: sampler.locations,
    })
}

/// Exact PEC expectation: evolves the noisy state through every recovery
/// insertion pattern and sums the signed weights. Exponential in
/// qubit-layers, so capped at 6 insertion points.
pub fn pec_exact_expectation(circuit: &LayeredCircuit, p: f64, obs: &Observable) -> Result<f64> {
    require_noiseless(circuit)?;
    let rep = pec_inverse_representation(p)?;
    let unitaries = layer_unitaries(circuit)?;
    let n = circuit.n;
    let locations = n * circuit.layers.len();
    if locations > 6 {
        return Err(EmlabError::InvalidParameter(format!(
            "exact pec enumeration capped at 6 insertion points, got {locations}"
        )));
    }
    let spec = NoiseSpec::DepolarizingLocal { p };
    let rho0 = DensityMatrix::basis_state(n, 0)?;
    let mut total = 0.0;
    let patterns = 1u64 << (2 * locations);
    let mut insertion = PauliString::identity(n);
    for pattern in 0..patterns {
        let mut weight = 1.0;
        let mut m = rho0.matrix().clone();
        let mut cursor = pattern;
        for u in &unitaries {
            if let Some(u) = u {
                m = u * m * u.adjoint();
            }
            m = crate::dense::apply_noise_spec_matrix(&m, n, &spec)?;
            insertion.reset_to_identity();
            for q in 0..n {
                let digit = (cursor & 3) as usize;
                cursor >>= 2;
                weight *= rep.a[digit];
                set_letter_digit(&mut insertion, q, digit)?;
            }
            m = crate::dense::conjugate_matrix_by_pauli(&m, &insertion)?;
        }
        let mut value = 0.0;
        for (coef, term) in obs.terms() {
            value += coef * pauli_trace_of_matrix(&m, term)?.re;
        }
        total += weight * value;
    }
    Ok(total)
}

/// Richardson (Lagrange-at-zero) extrapolation weights for distinct nodes.
pub fn richardson_weights(lambdas: &[f64]) -> Result<Vec<f64>> {
    if lambdas.is_empty() {
        return Err(EmlabError::InvalidParameter("zne needs at least one node".into()));
    }
    for (i, &li) in lambdas.iter().enumerate() {
        if li <= 0.0 {
            return Err(EmlabError::InvalidParameter(format!(
                "zne scale factors must be positive, got {li}"
            )));
        }
        for &lj in &lambdas[i + 1..] {
            if (li - lj).abs() < 1e-12 {
                return Err(EmlabError::InvalidParameter(format!(
                    "degenerate zne nodes at lambda = {li}"
                )));
            }
        }
    }
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            lambdas
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| lj / (lj - li))
                .product()
        })
        .collect())
}

/// One measured extrapolation node.
#[derive(Clone, Copy, Debug)]
pub struct ZneNode {
    pub lambda: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// ZNE output: extrapolated value, propagated standard error, and the
/// per-node measurements.
#[derive(Clone, Debug)]
pub struct ZneEstimate {
    pub value: f64,
    pub stderr: f64,
    pub nodes: Vec<ZneNode>,
    pub weights: Vec<f64>,
    pub shots: u64,
}

/// Zero-noise extrapolation for a noiseless circuit under local
/// depolarizing `p`, with noise scaled per node as `p -> p^lambda`.
///
/// With `shots_per_node = None` the node expectations are computed exactly
/// on the dense oracle (any observable); with shots, nodes are measured by
/// computational-basis sampling, which requires a diagonal observable.
pub fn zne_estimate(
    circuit: &LayeredCircuit,
    p: f64,
    obs: &Observable,
    lambdas: &[f64],
    shots_per_node: Option<u64>,
    seed: u64,
) -> Result<ZneEstimate> {
    require_noiseless(circuit)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(EmlabError::InvalidParameter(format!(
            "zne needs p in (0,1], got {p}"
        )));
    }
    let weights = richardson_weights(lambdas)?;
    if let Some(0) = shots_per_node {
        return Err(EmlabError::InvalidParameter("zne needs at least one shot per node".into()));
    }
    if shots_per_node.is_some() && !obs.is_diagonal() {
        return Err(EmlabError::InvalidParameter(
            "sampled zne requires an observable diagonal in the computational basis".into(),
        ));
    }
    let mut nodes = Vec::with_capacity(lambdas.len());
    let mut shots_total = 0;
    for (i, &lambda) in lambdas.iter().enumerate() {
        let scaled = NoiseSpec::DepolarizingLocal { p: p.powf(lambda) };
        let noisy = attach_noise(circuit, &scaled)?;
        let rho = DensityMatrix::basis_state(circuit.n, 0)?.evolve(&noisy)?;
        match shots_per_node {
            None => nodes.push(ZneNode {
                lambda,
                mean: rho.expectation(obs)?,
                stderr: 0.0,
            }),
            Some(m) => {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 3, i as u64));
                let mut stats = RunningStats::new();
                for _ in 0..m {
                    let label = rho.sample_basis(&mut rng);
                    stats.push(obs.eigenvalue_on_basis(label)?);
                }
                shots_total += m;
                nodes.push(ZneNode {
                    lambda,
                    mean: stats.mean(),
                    stderr: stats.stderr(),
                });
            }
        }
    }
    let value = nodes.iter().zip(&weights).map(|(nd, w)| w * nd.mean).sum();
    let var: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(nd, w)| (w * nd.stderr).powi(2))
        .sum();
    Ok(ZneEstimate {
        value,
        stderr: var.sqrt(),
        nodes,
        weights,
        shots: shots_total,
    })
}

/// Order-2 virtual distillation on the dense oracle:
/// `Tr(O rho^2) / Tr(rho^2)`.
pub fn virtual_distillation_estimate(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    if obs.num_qubits() != rho.num_qubits() {
        return Err(EmlabError::DimensionMismatch(format!(
            "observable on {} qubits against {}-qubit state",
            obs.num_qubits(),
            rho.num_qubits()
        )));
    }
    let purity = rho.purity();
    if purity < 1e-12 {
        return Err(EmlabError::Numerical(format!(
            "purity {purity:.3e} too small for distillation"
        )));
    }
    let squared = rho.matrix() * rho.matrix();
    let mut numerator = 0.0;
    for (coef, p) in obs.terms() {
        numerator += coef * pauli_trace_of_matrix(&squared, p)?.re;
    }
    Ok(numerator / purity)
}

/// Weak-mitigation protocol selector.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum ProtocolKind {
    Pec,
    Zne { lambdas: Vec<f64> },
    Vd,
}

impl ProtocolKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProtocolKind::Pec => "pec",
            ProtocolKind::Zne { .. } => "zne",
            ProtocolKind::Vd => "vd",
        }
    }
}

/// Accuracy / confidence / budget targets for a weak-mitigation run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WeakMitigationConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub shot_cap: u64,
}

fn check_eps_delta(epsilon: f64, delta: f64) -> Result<()> {
    for v in [epsilon, delta] {
        if !(v > 0.0 && v < 1.0) {
            return Err(EmlabError::InvalidParameter(format!(
                "epsilon and delta must lie in (0,1), got {v}"
            )));
        }
    }
    Ok(())
}

/// Shot requirement for one observable at per-observable confidence
/// `delta_each`: a sub-Gaussian term from the pilot variance plus a
/// median-of-means floor that covers heavy tails.
fn required_shots(sigma2: f64, epsilon: f64, delta_each: f64) -> u64 {
    let gaussian = (2.0 * sigma2 * (2.0 / delta_each).ln() / (epsilon * epsilon)).ceil();
    let blocks = (8.0 * (2.0 / delta_each).ln()).ceil();
    let floor = MOM_BLOCK as f64 * blocks;
    gaussian.max(floor) as u64
}

/// Runs a weak-mitigation protocol until every observable in the set meets
/// the joint `(epsilon, delta)` target, or the shot cap intervenes.
///
/// The failure budget is split evenly over the observables (union bound);
/// per observable, a pilot batch estimates the per-shot variance, the shot
/// requirement follows, and the final estimate is a median of means over
/// blocks of [`MOM_BLOCK`]. If the requirement exceeds the remaining cap
/// the run keeps its pilot-only estimate for that observable and flags the
/// result partial instead of erroring.
pub fn weak_mitigate(
    kind: &ProtocolKind,
    circuit: &LayeredCircuit,
    p: f64,
    observables: &ObservableSet,
    cfg: &WeakMitigationConfig,
    seed: u64,
) -> Result<MitigationResult> {
    check_eps_delta(cfg.epsilon, cfg.delta)?;
    if observables.num_qubits() != circuit.n {
        return Err(EmlabError::DimensionMismatch(format!(
            "observables on {} qubits, circuit on {}",
            observables.num_qubits(),
            circuit.n
        )));
    }
    let ell = observables.len() as f64;
    let delta_each = cfg.delta / ell;

    if let ProtocolKind::Vd = kind {
        // The distillation functional is computed exactly on the dense
        // oracle; its single evaluation counts as one shot and the
        // accuracy targets are met by construction of the estimator.
        let noisy = attach_noise(circuit, &NoiseSpec::DepolarizingLocal { p })?;
        let rho = DensityMatrix::basis_state(circuit.n, 0)?.evolve(&noisy)?;
        let mut estimates = Vec::new();
        for (_, obs) in observables.iter() {
            estimates.push(virtual_distillation_estimate(&rho, obs)?);
        }
        let len = estimates.len();
        return MitigationResult {
            protocol: "vd".into(),
            estimates,
            stderrs: vec![0.0; len],
            epsilon: Some(cfg.epsilon),
            delta: Some(cfg.delta),
            shots: 1,
            required_shots: 1,
            kappa: None,
            partial: false,
        }
        .validate();
    }

    // Per-shot samplers for the stochastic protocols.
    let pec_sampler = match kind {
        ProtocolKind::Pec => Some(PecSampler::new(circuit, p)?),
        _ => None,
    };
    let zne_setup: Option<(Vec<f64>, Vec<f64>, Vec<DensityMatrix>)> = match kind {
        ProtocolKind::Zne { lambdas } => {
            let weights = richardson_weights(lambdas)?;
            let mut states = Vec::with_capacity(lambdas.len());
            for &lambda in lambdas {
                let scaled = NoiseSpec::DepolarizingLocal { p: p.powf(lambda) };
                let noisy = attach_noise(circuit, &scaled)?;
                states.push(DensityMatrix::basis_state(circuit.n, 0)?.evolve(&noisy)?);
            }
            for (_, obs) in observables.iter() {
                if !obs.is_diagonal() {
                    return Err(EmlabError::InvalidParameter(
                        "sampled zne requires diagonal observables".into(),
                    ));
                }
            }
            Some((lambdas.clone(), weights, states))
        }
        _ => None,
    };

    let mut estimates = Vec::new();
    let mut stderrs = Vec::new();
    let mut shots_used = 0u64;
    let mut shots_required_total = 0u64;
    let mut partial = false;

    for (oi, (_, obs)) in observables.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 10, oi as u64));
        let draw = |rng: &mut ChaCha12Rng| -> Result<(f64, u64)> {
            match kind {
                ProtocolKind::Pec => {
                    let s = pec_sampler.as_ref().expect("pec sampler prepared");
                    Ok((s.shot(obs, rng)?, 1))
                }
                ProtocolKind::Zne { .. } => {
                    let (_, weights, states) = zne_setup.as_ref().expect("zne setup prepared");
                    let mut value = 0.0;
                    for (w, rho) in weights.iter().zip(states) {
                        let label = rho.sample_basis(rng);
                        value += w * obs.eigenvalue_on_basis(label)?;
                    }
                    Ok((value, weights.len() as u64))
                }
                ProtocolKind::Vd => unreachable!("handled above"),
            }
        };

        let mut values = Vec::new();
        let mut pilot_stats = RunningStats::new();
        for _ in 0..PILOT_SHOTS {
            let (v, cost) = draw(&mut rng)?;
            shots_used += cost;
            pilot_stats.push(v);
            values.push(v);
        }
        // Clamp the pilot variance by the hard per-shot range bound so an
        // unlucky pilot cannot understate a bounded estimator.
        let range_bound = match kind {
            ProtocolKind::Pec => {
                let s = pec_sampler.as_ref().expect("pec sampler prepared");
                (s.weight * obs.norm_bound()).powi(2)
            }
            ProtocolKind::Zne { .. } => {
                let (_, weights, _) = zne_setup.as_ref().expect("zne setup prepared");
                let wsum: f64 = weights.iter().map(|w| w.abs()).sum();
                (wsum * obs.norm_bound()).powi(2)
            }
            ProtocolKind::Vd => unreachable!(),
        };
        let sigma2 = pilot_stats.variance().min(range_bound);
        let m_req = required_shots(sigma2, cfg.epsilon, delta_each).max(PILOT_SHOTS);
        shots_required_total += m_req;

        let extra = m_req.saturating_sub(PILOT_SHOTS);
        let cost_per_draw = match kind {
            ProtocolKind::Zne { lambdas } => lambdas.len() as u64,
            _ => 1,
        };
        if shots_used + extra * cost_per_draw > cfg.shot_cap {
            partial = true;
        } else {
            for _ in 0..extra {
                let (v, cost) = draw(&mut rng)?;
                shots_used += cost;
                values.push(v);
            }
        }
        let estimate = median_of_means(&values, MOM_BLOCK)?;
        let mut stats = RunningStats::new();
        for &v in &values {
            stats.push(v);
        }
        estimates.push(estimate);
        stderrs.push(stats.stderr());
    }

    MitigationResult {
        protocol: kind.label().into(),
        estimates,
        stderrs,
        epsilon: Some(cfg.epsilon),
        delta: Some(cfg.delta),
        shots: shots_used,
        required_shots: shots_required_total,
        kappa: None,
        partial,
    }
    .validate()
}

/// Strong-mitigation acceptance mode.
#[derive(Clone, Copy, Debug)]
pub enum StrongMode {
    /// Pass when the total variation to the reference is at most epsilon.
    Additive { epsilon: f64 },
    /// Pass when `reference(z) / mu(z) <= kappa` on the whole support.
    Multiplicative { kappa: f64 },
}

/// Three-way verdict: multiplicative checks on sampled data can be
/// inconclusive when the sample misses a support point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StrongVerdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Result of a strong-mitigation check.
#[derive(Clone, Debug, Serialize)]
pub struct StrongCheckReport {
    pub verdict: StrongVerdict,
    /// Total variation between mu and the reference (additive mode).
    pub measured_tv: Option<f64>,
    /// Largest reference/mu ratio over the support (multiplicative mode).
    pub max_ratio: Option<f64>,
    /// Additive accuracy certified by a multiplicative pass:
    /// `sqrt(1 - 1/kappa)` via the Bretagnolle-Huber inequality.
    pub implied_additive_epsilon: Option<f64>,
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&v| v < -1e-12) {
        return Err(EmlabError::InvalidParameter(format!(
            "{name} has negative entries"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(EmlabError::InvalidParameter(format!(
            "{name} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Strong check with an exactly known output distribution `mu`.
pub fn strong_check_exact(
    mu: &[f64],
    reference: &[f64],
    mode: StrongMode,
) -> Result<StrongCheckReport> {
    check_distribution(mu, "mu")?;
    check_distribution(reference, "reference")?;
    if mu.len() != reference.len() {
        return Err(EmlabError::DimensionMismatch(format!(
            "mu support {} vs reference support {}",
            mu.len(),
            reference.len()
        )));
    }
    match mode {
        StrongMode::Additive { epsilon } => {
            let tv = tv_distance(mu, reference)?;
            Ok(StrongCheckReport {
                verdict: if tv <= epsilon {
                    StrongVerdict::Pass
                } else {
                    StrongVerdict::Fail
                },
                measured_tv: Some(tv),
                max_ratio: None,
                implied_additive_epsilon: None,
            })
        }
        StrongMode::Multiplicative { kappa } => {
            if kappa < 1.0 {
                return Err(EmlabError::InvalidParameter(format!(
                    "kappa must be at least 1, got {kappa}"
                )));
            }
            let mut max_ratio: f64 = 0.0;
            for (&m, &r) in mu.iter().zip(reference) {
                if r <= 0.0 {
                    continue;
                }
                if m <= 0.0 {
                    max_ratio = f64::INFINITY;
                } else {
                    max_ratio = max_ratio.max(r / m);
                }
            }
            let pass = max_ratio <= kappa;
            Ok(StrongCheckReport {
                verdict: if pass {
                    StrongVerdict::Pass
                } else {
                    StrongVerdict::Fail
                },
                measured_tv: None,
                max_ratio: Some(max_ratio),
                implied_additive_epsilon: pass.then(|| (1.0 - 1.0 / kappa).sqrt()),
            })
        }
    }
}

/// Strong check against sampled outcomes from `mu`.
///
/// Additive mode compares the empirical distribution's total variation to
/// the target. Multiplicative mode certifies ratios with a conservative
/// normal lower bound on each support probability; a support point with no
/// samples makes the verdict inconclusive rather than a failure.
pub fn strong_check_sampled(
    samples: &[u64],
    reference: &[f64],
    mode: StrongMode,
) -> Result<StrongCheckReport> {
    check_distribution(reference, "reference")?;
    if samples.is_empty() {
        return Err(EmlabError::InvalidParameter("no samples provided".into()));
    }
    let k = reference.len();
    let mut counts = vec![0u64; k];
    for &s in samples {
        let idx = s as usize;
        if idx >= k {
            return Err(EmlabError::InvalidParameter(format!(
                "sample {s} outside support of size {k}"
            )));
        }
        counts[idx] += 1;
    }
    let m = samples.len() as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
    match mode {
        StrongMode::Additive { .. } => strong_check_exact(&empirical, reference, mode),
        StrongMode::Multiplicative { kappa } => {
            if kappa < 1.0 {
                return Err(EmlabError::InvalidParameter(format!(
                    "kappa must be at least 1, got {kappa}"
                )));
            }
            let mut max_ratio: f64 = 0.0;
            let mut any_unvisited = false;
            let mut any_fail = false;
            for (&c, &r) in counts.iter().zip(reference) {
                if r <= 0.0 {
                    continue;
                }
                if c == 0 {
                    any_unvisited = true;
                    continue;
                }
                let p_hat = c as f64 / m;
                let se = (p_hat * (1.0 - p_hat) / m).sqrt();
                let lower = p_hat - 2.0 * se;
                let upper = (p_hat + 2.0 * se).min(1.0);
                if r / upper > kappa {
                    any_fail = true;
                }
                if lower > 0.0 {
                    max_ratio = max_ratio.max(r / lower);
                } else {
                    any_unvisited = true;
                }
            }
            let verdict = if any_fail {
                StrongVerdict::Fail
            } else if any_unvisited || max_ratio > kappa {
                StrongVerdict::Inconclusive
            } else {
                StrongVerdict::Pass
            };
            Ok(StrongCheckReport {
                verdict,
                measured_tv: None,
                max_ratio: Some(max_ratio),
                implied_additive_epsilon: (verdict == StrongVerdict::Pass)
                    .then(|| (1.0 - 1.0 / kappa).sqrt()),
            })
        }
    }
}

/// The additive accuracy implied by a multiplicative-error bound.
pub fn kappa_to_additive_epsilon(kappa: f64) -> Result<f64> {
    if kappa < 1.0 {
        return Err(EmlabError::InvalidParameter(format!(
            "kappa must be at least 1, got {kappa}"
        )));
    }
    // d(ref || mu) <= log2(kappa) in KL, so Bretagnolle-Huber bounds the
    // total variation by sqrt(1 - 1/kappa).
    Ok(bretagnolle_huber_bound(kappa.log2()))
}
