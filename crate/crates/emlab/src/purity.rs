//! Pauli-path purity engine and decay-rate experiments.
//!
//! A basis state expands over the `2^n` diagonal Pauli strings; a Clifford
//! layer moves each coefficient to a single new Pauli, and a Pauli-diagonal
//! noise layer scales it. Purity is the normalized sum of squared
//! coefficients, so each initial `Z^b` contributes the square of its
//! accumulated damping and the whole computation runs over `2^n` independent
//! paths instead of `4^n` dense entries.
//!
//! The module also provides the one-layer closed forms for random mixing
//! layers, weight-spectrum diagnostics, decay sweeps over `(n, D)` grids,
//! and the dense non-unital (amplitude-damping) decay experiment.

use crate::circuit::{
    attach_noise, build_brickwork_circuit, build_identity_circuit, build_mixing_circuit,
    LayeredCircuit, UnitaryLayer,
};
use crate::clifford::CliffordTableau;
use crate::dense::{
    apply_single_qubit_kraus_matrix, purity_of_matrix, relative_entropy_to_maximally_mixed_matrix,
    tableau_to_unitary, DensityMatrix,
};
use crate::error::{EmlabError, Result};
use crate::noise::{amplitude_damping, DepolarizingSpec, NoiseSpec};
use crate::pauli::PauliString;
use crate::stats::{derive_seed, mann_kendall_increasing, ols_fit, OlsFit, RunningStats};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest register for exact path enumeration (2^n paths).
pub const EXACT_PATH_LIMIT: usize = 20;

/// Largest register for the non-unital dense experiment.
pub const NONUNITAL_DENSE_LIMIT: usize = 8;

/// Floor used when taking logs of excess purity that has decayed to zero.
const EXPONENT_FLOOR: f64 = 1e-300;

/// Fixed work chunk so parallel reductions sum in a thread-count-independent
/// order.
const PATH_CHUNK: u64 = 4096;

/// A purity value with its Monte-Carlo standard error (zero for exact
/// modes) and the number of Pauli paths evaluated.
#[derive(Clone, Copy, Debug)]
pub struct PurityEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths_used: u64,
}

/// Path-engine evaluation mode.
#[derive(Clone, Copy, Debug)]
pub enum PathMode {
    /// Enumerates all `2^n` initial Z-strings.
    Exact,
    /// Stratified Monte-Carlo: the identity path contributes its exact 1,
    /// and `paths` uniform non-zero strings estimate the rest.
    MonteCarlo { paths: u64, seed: u64 },
}

/// Noise resolved into its diagonal Pauli-transfer form.
enum PathNoise {
    None,
    LocalDepol(f64),
    GlobalDepol(f64),
    Channel(Vec<(f64, PauliString)>),
}

struct PathLayer<'a> {
    tableau: Option<&'a CliffordTableau>,
    noise: PathNoise,
}

fn compile_path_layers(circuit: &LayeredCircuit) -> Result<Vec<PathLayer<'_>>> {
    let n = circuit.n;
    circuit
        .layers
        .iter()
        .map(|layer| {
            let tableau = match &layer.unitary {
                UnitaryLayer::Identity => None,
                UnitaryLayer::Tableau(t) => {
                    if t.num_qubits() != n {
                        return Err(EmlabError::DimensionMismatch(format!(
                            "layer tableau on {} qubits in {n}-qubit circuit",
                            t.num_qubits()
                        )));
                    }
                    Some(t)
                }
            };
            let noise = match &layer.noise {
                None => PathNoise::None,
                Some(spec) => {
                    spec.validate(n)?;
                    match spec {
                        NoiseSpec::DepolarizingLocal { p } => PathNoise::LocalDepol(*p),
                        NoiseSpec::DepolarizingGlobal { p } => PathNoise::GlobalDepol(*p),
                        NoiseSpec::Pauli { n: cn, q } => {
                            let terms = q
                                .iter()
                                .enumerate()
                                .filter(|(_, &w)| w != 0.0)
                                .map(|(idx, &w)| {
                                    Ok((w, PauliString::from_letter_index(*cn, idx as u64)?))
                                })
                                .collect::<Result<Vec<_>>>()?;
                            PathNoise::Channel(terms)
                        }
                        NoiseSpec::AmplitudeDamping { .. } => {
                            return Err(EmlabError::UnsupportedNoise(
                                "amplitude damping is not diagonal in the Pauli basis; \
                                 use the dense oracle"
                                    .into(),
                            ))
                        }
                    }
                }
            };
            Ok(PathLayer { tableau, noise })
        })
        .collect()
}

/// Evolves the path starting at `Z^b` through the compiled layers and
/// returns the squared damping plus the final Pauli weight. Inputs are
/// validated by the compile step, so the inner algebra cannot fail.
fn path_lambda_squared(
    layers: &[PathLayer<'_>],
    n: usize,
    b: u64,
    p: &mut PauliString,
    tmp: &mut PauliString,
) -> (f64, usize) {
    p.reset_to_identity();
    for j in 0..n {
        if (b >> j) & 1 == 1 {
            p.set_z_bit(j, true);
        }
    }
    let mut lam2 = 1.0;
    for layer in layers {
        if let Some(t) = layer.tableau {
            t.conjugate_into(p, tmp).expect("compile step checked sizes");
            std::mem::swap(p, tmp);
        }
        let f = match &layer.noise {
            PathNoise::None => 1.0,
            PathNoise::LocalDepol(dp) => dp.powi(p.weight() as i32),
            PathNoise::GlobalDepol(dp) => {
                if p.is_identity_letters() {
                    1.0
                } else {
                    *dp
                }
            }
            PathNoise::Channel(terms) => terms
                .iter()
                .map(|(w, sigma)| {
                    if p.commutes(sigma).expect("compile step checked sizes") {
                        *w
                    } else {
                        -*w
                    }
                })
                .sum(),
        };
        lam2 *= f * f;
        if lam2 == 0.0 {
            break;
        }
    }
    (lam2, p.weight())
}

fn check_path_register(circuit: &LayeredCircuit, input_label: u64) -> Result<()> {
    let n = circuit.n;
    if n == 0 || n > 63 {
        return Err(EmlabError::InvalidParameter(format!(
            "path engine supports 1..=63 qubits, got {n}"
        )));
    }
    if input_label >> n != 0 {
        return Err(EmlabError::InvalidParameter(format!(
            "input label {input_label} out of range for {n} qubits"
        )));
    }
    Ok(())
}

/// Purity of the circuit output on a computational basis input, via Pauli
/// paths.
///
/// The initial coefficients are signs `(-1)^(b . label)` that square away,
/// so the result is independent of the basis label; the label is still
/// validated as part of the interface contract.
pub fn pauli_path_purity(
    circuit: &LayeredCircuit,
    input_label: u64,
    mode: PathMode,
) -> Result<PurityEstimate> {
    check_path_register(circuit, input_label)?;
    let n = circuit.n;
    let layers = compile_path_layers(circuit)?;
    let scale = 0.5f64.powi(n as i32);
    match mode {
        PathMode::Exact => {
            if n > EXACT_PATH_LIMIT {
                return Err(EmlabError::InvalidParameter(format!(
                    "exact path enumeration supports n <= {EXACT_PATH_LIMIT}, got {n}"
                )));
            }
            let dim = 1u64 << n;
            let chunks = dim.div_ceil(PATH_CHUNK);
            let partials: Vec<f64> = (0..chunks)
                .into_par_iter()
                .map(|ci| {
                    let mut p = PauliString::identity(n);
                    let mut tmp = PauliString::identity(n);
                    let hi = dim.min((ci + 1) * PATH_CHUNK);
                    let mut acc = 0.0;
                    for b in ci * PATH_CHUNK..hi {
                        acc += path_lambda_squared(&layers, n, b, &mut p, &mut tmp).0;
                    }
                    acc
                })
                .collect();
            let total: f64 = partials.iter().sum();
            Ok(PurityEstimate {
                value: scale * total,
                stderr: 0.0,
                paths_used: dim,
            })
        }
        PathMode::MonteCarlo { paths, seed } => {
            if paths == 0 {
                return Err(EmlabError::InvalidParameter(
                    "monte-carlo mode needs at least one path".into(),
                ));
            }
            let dim = 1u64 << n;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let bs: Vec<u64> = (0..paths).map(|_| rng.gen_range(1..dim)).collect();
            let values: Vec<Vec<f64>> = bs
                .par_chunks(PATH_CHUNK as usize)
                .map(|chunk| {
                    let mut p = PauliString::identity(n);
                    let mut tmp = PauliString::identity(n);
                    chunk
                        .iter()
                        .map(|&b| path_lambda_squared(&layers, n, b, &mut p, &mut tmp).0)
                        .collect()
                })
                .collect();
            let mut stats = RunningStats::new();
            for chunk in &values {
                for &v in chunk {
                    stats.push(v);
                }
            }
            let nonzero_fraction = 1.0 - scale;
            Ok(PurityEstimate {
                value: scale + nonzero_fraction * stats.mean(),
                stderr: nonzero_fraction * stats.stderr(),
                paths_used: paths,
            })
        }
    }
}

/// Contribution of each Pauli weight class to the purity.
#[derive(Clone, Debug)]
pub struct WeightSpectrum {
    pub n: usize,
    /// `c[k]` is the weight-k contribution; entries sum to the purity.
    pub c: Vec<f64>,
}

impl WeightSpectrum {
    pub fn total(&self) -> f64 {
        self.c.iter().sum()
    }
}

/// Exact weight spectrum of a dense state by projecting onto every Pauli.
pub fn weight_spectrum_dense(rho: &DensityMatrix) -> Result<WeightSpectrum> {
    let n = rho.num_qubits();
    if n > 10 {
        return Err(EmlabError::InvalidParameter(format!(
            "dense weight spectrum supports n <= 10, got {n}"
        )));
    }
    let scale = 0.5f64.powi(n as i32);
    let mut c = vec![0.0; n + 1];
    for idx in 0..1u64 << (2 * n) {
        let p = PauliString::from_letter_index(n, idx)?;
        let t = rho.pauli_trace(&p)?;
        c[p.weight()] += scale * t.norm_sqr();
    }
    Ok(WeightSpectrum { n, c })
}

/// Exact weight spectrum of the circuit output on a basis input, via Pauli
/// paths (same preconditions as exact [`pauli_path_purity`]).
pub fn weight_spectrum_path(circuit: &LayeredCircuit, input_label: u64) -> Result<WeightSpectrum> {
    check_path_register(circuit, input_label)?;
    let n = circuit.n;
    if n > EXACT_PATH_LIMIT {
        return Err(EmlabError::InvalidParameter(format!(
            "exact path enumeration supports n <= {EXACT_PATH_LIMIT}, got {n}"
        )));
    }
    let layers = compile_path_layers(circuit)?;
    let scale = 0.5f64.powi(n as i32);
    let dim = 1u64 << n;
    let chunks = dim.div_ceil(PATH_CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut p = PauliString::identity(n);
            let mut tmp = PauliString::identity(n);
            let mut bins = vec![0.0; n + 1];
            let hi = dim.min((ci + 1) * PATH_CHUNK);
            for b in ci * PATH_CHUNK..hi {
                let (lam2, w) = path_lambda_squared(&layers, n, b, &mut p, &mut tmp);
                bins[w] += scale * lam2;
            }
            bins
        })
        .collect();
    let mut c = vec![0.0; n + 1];
    for bins in &partials {
        for (k, v) in bins.iter().enumerate() {
            c[k] += v;
        }
    }
    Ok(WeightSpectrum { n, c })
}

/// Average damping `E[p^(2w)]` over the uniform non-identity Pauli on `n`
/// qubits: `((1 + 3p^2)^n - 1) / (4^n - 1)`.
pub fn expected_weight_damping(n: usize, p: f64) -> Result<f64> {
    if n == 0 || n > 63 {
        return Err(EmlabError::InvalidParameter(format!(
            "expected_weight_damping needs 1..=63 qubits, got {n}"
        )));
    }
    DepolarizingSpec::local(p).validate(1)?;
    let num = (1.0 + 3.0 * p * p).powi(n as i32) - 1.0;
    let den = 4f64.powi(n as i32) - 1.0;
    Ok(num / den)
}

/// Predicted mean purity after `depth` rounds of (fresh uniform mixing
/// layer, local depolarizing p): `2^-n + (1 - 2^-n) q^depth` with
/// `q = expected_weight_damping(n, p)`.
pub fn expected_purity_recursion(n: usize, p: f64, depth: usize) -> Result<f64> {
    let q = expected_weight_damping(n, p)?;
    let scale = 0.5f64.powi(n as i32);
    Ok(scale + (1.0 - scale) * q.powi(depth as i32))
}

/// Exact purity of the identity circuit under `depth` layers of local
/// depolarizing noise: `((1 + p^(2 depth)) / 2)^n`.
pub fn identity_purity_closed_form(n: usize, p: f64, depth: usize) -> Result<f64> {
    if n == 0 {
        return Err(EmlabError::InvalidParameter("need at least one qubit".into()));
    }
    DepolarizingSpec::local(p).validate(1)?;
    Ok(((1.0 + p.powi(2 * depth as i32)) / 2.0).powi(n as i32))
}

/// Circuit family used in sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Identity,
    Mixing,
    Brickwork,
}

impl FamilyKind {
    pub fn label(&self) -> &'static str {
        match self {
            FamilyKind::Identity => "identity",
            FamilyKind::Mixing => "mixing",
            FamilyKind::Brickwork => "brickwork",
        }
    }
}

/// Purity estimator used for sweep points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PurityEstimator {
    ExactPath,
    MonteCarloPath { paths: u64 },
    Dense,
    /// Family closed form (identity: exact; mixing: ensemble mean).
    ClosedForm,
}

impl PurityEstimator {
    pub fn label(&self) -> &'static str {
        match self {
            PurityEstimator::ExactPath => "exact-path",
            PurityEstimator::MonteCarloPath { .. } => "monte-carlo-path",
            PurityEstimator::Dense => "dense",
            PurityEstimator::ClosedForm => "closed-form",
        }
    }
}

/// One sweep point with its derived decay quantities.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayPoint {
    pub n: usize,
    pub depth: usize,
    pub purity: f64,
    pub stderr: f64,
    pub seed: u64,
    /// Lemma-style entropy bound `n + log2(purity)`.
    pub entropy_bound: f64,
    /// Register decay exponent `-log2(purity - 2^-n)`.
    pub excess_exponent: f64,
    /// Per-qubit decay exponent `-log2(purity^(1/n) - 1/2)`.
    pub per_qubit_excess_exponent: f64,
}

/// A purity decay curve over an `(n, depth)` grid.
#[derive(Clone, Debug, Serialize)]
pub struct DecayCurve {
    pub family: FamilyKind,
    pub noise: NoiseSpec,
    pub estimator: PurityEstimator,
    pub master_seed: u64,
    pub points: Vec<DecayPoint>,
}

/// Which exponent column a fit should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentKind {
    Register,
    PerQubit,
}

/// Which regressor a fit should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regressor {
    Depth,
    NTimesDepth,
}

impl DecayCurve {
    /// Fits the chosen decay exponent against the chosen regressor.
    pub fn fit_exponent(&self, kind: ExponentKind, regressor: Regressor) -> Result<OlsFit> {
        let x: Vec<f64> = self
            .points
            .iter()
            .map(|pt| match regressor {
                Regressor::Depth => pt.depth as f64,
                Regressor::NTimesDepth => (pt.n * pt.depth) as f64,
            })
            .collect();
        let y: Vec<f64> = self
            .points
            .iter()
            .map(|pt| match kind {
                ExponentKind::Register => pt.excess_exponent,
                ExponentKind::PerQubit => pt.per_qubit_excess_exponent,
            })
            .collect();
        ols_fit(&x, &y)
    }

    /// Largest increase of purity along consecutive depths at fixed `n`,
    /// minus a `3 * (stderr_a + stderr_b)` statistical allowance. At most
    /// zero for a unital decay that is monotone within noise.
    pub fn max_monotonicity_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for pair in self.points.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.n == b.n && b.depth > a.depth {
                worst = worst.max(b.purity - a.purity - 3.0 * (a.stderr + b.stderr));
            }
        }
        worst
    }
}

fn decay_point_from_purity(n: usize, depth: usize, est: PurityEstimate, seed: u64) -> DecayPoint {
    let scale = 0.5f64.powi(n as i32);
    let excess = (est.value - scale).max(EXPONENT_FLOOR);
    let per_qubit = (est.value.powf(1.0 / n as f64) - 0.5).max(EXPONENT_FLOOR);
    DecayPoint {
        n,
        depth,
        purity: est.value,
        stderr: est.stderr,
        seed,
        entropy_bound: n as f64 + est.value.log2(),
        excess_exponent: -excess.log2(),
        per_qubit_excess_exponent: -per_qubit.log2(),
    }
}

fn build_family_circuit(
    family: FamilyKind,
    n: usize,
    depth: usize,
    seed: u64,
) -> Result<LayeredCircuit> {
    match family {
        FamilyKind::Identity => Ok(build_identity_circuit(n, depth)),
        FamilyKind::Mixing => Ok(build_mixing_circuit(n, depth, seed)),
        FamilyKind::Brickwork => build_brickwork_circuit(n, depth, seed),
    }
}

fn evaluate_decay_point(
    family: FamilyKind,
    n: usize,
    depth: usize,
    noise: &NoiseSpec,
    estimator: PurityEstimator,
    circuit_seed: u64,
    mc_seed: u64,
) -> Result<DecayPoint> {
    let est = match estimator {
        PurityEstimator::ClosedForm => {
            let p = match noise {
                NoiseSpec::DepolarizingLocal { p } => *p,
                other => {
                    return Err(EmlabError::InvalidParameter(format!(
                        "closed-form estimator needs local depolarizing noise, got {}",
                        other.kind_label()
                    )))
                }
            };
            let value = match family {
                FamilyKind::Identity => identity_purity_closed_form(n, p, depth)?,
                FamilyKind::Mixing => expected_purity_recursion(n, p, depth)?,
                FamilyKind::Brickwork => {
                    return Err(EmlabError::InvalidParameter(
                        "no closed form for the brickwork family".into(),
                    ))
                }
            };
            PurityEstimate {
                value,
                stderr: 0.0,
                paths_used: 0,
            }
        }
        PurityEstimator::ExactPath | PurityEstimator::MonteCarloPath { .. } => {
            let circuit = attach_noise(&build_family_circuit(family, n, depth, circuit_seed)?, noise)?;
            let mode = match estimator {
                PurityEstimator::ExactPath => PathMode::Exact,
                PurityEstimator::MonteCarloPath { paths } => PathMode::MonteCarlo {
                    paths,
                    seed: mc_seed,
                },
                _ => unreachable!(),
            };
            pauli_path_purity(&circuit, 0, mode)?
        }
        PurityEstimator::Dense => {
            let circuit = attach_noise(&build_family_circuit(family, n, depth, circuit_seed)?, noise)?;
            let rho = DensityMatrix::basis_state(n, 0)?.evolve(&circuit)?;
            PurityEstimate {
                value: rho.purity(),
                stderr: 0.0,
                paths_used: 0,
            }
        }
    };
    Ok(decay_point_from_purity(n, depth, est, circuit_seed))
}

/// Sweeps a circuit family over the `(ns x depths)` grid and returns the
/// decay curve. Points are evaluated in parallel with per-point derived
/// seeds, so the result is independent of the worker count.
pub fn decay_sweep(
    family: FamilyKind,
    ns: &[usize],
    depths: &[usize],
    noise: &NoiseSpec,
    estimator: PurityEstimator,
    master_seed: u64,
) -> Result<DecayCurve> {
    if ns.is_empty() || depths.is_empty() {
        return Err(EmlabError::InvalidParameter("empty sweep grid".into()));
    }
    let grid: Vec<(usize, usize)> = ns
        .iter()
        .flat_map(|&n| depths.iter().map(move |&d| (n, d)))
        .collect();
    let points = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (n, depth) = grid[idx];
            let circuit_seed = derive_seed(master_seed, 1, idx as u64);
            let mc_seed = derive_seed(master_seed, 2, idx as u64);
            evaluate_decay_point(family, n, depth, noise, estimator, circuit_seed, mc_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayCurve {
        family,
        noise: noise.clone(),
        estimator,
        master_seed,
        points,
    })
}

/// One grid point of the non-unital experiment: trial means of purity and
/// relative entropy to the maximally mixed state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NonunitalPoint {
    pub n: usize,
    pub depth: usize,
    pub mean_purity: f64,
    pub mean_divergence: f64,
    pub stderr_divergence: f64,
}

/// Results of the non-unital decay experiment.
#[derive(Clone, Debug, Serialize)]
pub struct NonunitalCurve {
    pub gamma: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub points: Vec<NonunitalPoint>,
}

impl NonunitalCurve {
    /// OLS slope of `log2(mean divergence)` against depth for one `n`.
    pub fn slope_for_n(&self, n: usize) -> Result<OlsFit> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for pt in self.points.iter().filter(|pt| pt.n == n) {
            if pt.mean_divergence <= 0.0 {
                return Err(EmlabError::Numerical(format!(
                    "mean divergence non-positive at n={n}, D={}",
                    pt.depth
                )));
            }
            x.push(pt.depth as f64);
            y.push(pt.mean_divergence.log2());
        }
        ols_fit(&x, &y)
    }

    /// Divergence-decay slopes for every register size, in first-appearance
    /// order.
    pub fn slopes(&self) -> Result<Vec<(usize, OlsFit)>> {
        let mut ns = Vec::new();
        for pt in &self.points {
            if !ns.contains(&pt.n) {
                ns.push(pt.n);
            }
        }
        ns.into_iter()
            .map(|n| Ok((n, self.slope_for_n(n)?)))
            .collect()
    }

    /// Divergence decay exponents per register size: the negated fit slope,
    /// positive when the divergence shrinks with depth.
    pub fn decay_exponents(&self) -> Result<Vec<(usize, f64)>> {
        Ok(self
            .slopes()?
            .into_iter()
            .map(|(n, fit)| (n, -fit.slope))
            .collect())
    }

    /// Mann-Kendall test that the decay exponents increase with `n`;
    /// returns `(S, p_value)` where small p supports a strictly increasing
    /// trend.
    pub fn increasing_decay_trend(&self) -> Result<(i64, f64)> {
        let exponents: Vec<f64> = self
            .decay_exponents()?
            .into_iter()
            .map(|(_, e)| e)
            .collect();
        mann_kendall_increasing(&exponents)
    }
}

fn nonunital_trial(
    n: usize,
    depths: &[usize],
    max_depth: usize,
    gamma: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let channel = amplitude_damping(gamma)?;
    let dim = 1usize << n;
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    rho[(0, 0)] = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(depths.len());
    for t in 1..=max_depth {
        let tableau = CliffordTableau::sample_uniform(n, &mut rng);
        let u = tableau_to_unitary(&tableau)?;
        rho = &u * &rho * u.adjoint();
        for q in 0..n {
            rho = apply_single_qubit_kraus_matrix(&rho, n, q, &channel)?;
        }
        if depths.contains(&t) {
            out.push((
                purity_of_matrix(&rho),
                relative_entropy_to_maximally_mixed_matrix(&rho)?,
            ));
        }
    }
    Ok(out)
}

/// Monte-Carlo non-unital decay: per trial, alternate a fresh uniform
/// Clifford layer (applied densely) with per-qubit amplitude damping, and
/// record purity and `D(rho || I/2^n)` at each requested depth.
///
/// Trials share their unitary prefix across depths, run in parallel with
/// per-trial derived seeds, and reduce in a fixed order.
pub fn nonunital_decay_experiment(
    ns: &[usize],
    depths: &[usize],
    gamma: f64,
    trials: u64,
    master_seed: u64,
) -> Result<NonunitalCurve> {
    if ns.is_empty() || depths.is_empty() || trials == 0 {
        return Err(EmlabError::InvalidParameter(
            "non-unital experiment needs non-empty grids and at least one trial".into(),
        ));
    }
    if !depths.windows(2).all(|w| w[0] < w[1]) || depths[0] == 0 {
        return Err(EmlabError::InvalidParameter(
            "depths must be strictly increasing and positive".into(),
        ));
    }
    for &n in ns {
        if n == 0 || n > NONUNITAL_DENSE_LIMIT {
            return Err(EmlabError::InvalidParameter(format!(
                "non-unital experiment supports 1..={NONUNITAL_DENSE_LIMIT} qubits, got {n}"
            )));
        }
    }
    amplitude_damping(gamma)?;
    let max_depth = *depths.last().expect("non-empty");
    let mut points = Vec::with_capacity(ns.len() * depths.len());
    for (ni, &n) in ns.iter().enumerate() {
        let per_trial: Vec<Vec<(f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|t| nonunital_trial(n, depths, max_depth, gamma, derive_seed(master_seed, ni as u64 + 1, t)))
            .collect::<Result<Vec<_>>>()?;
        for (di, &depth) in depths.iter().enumerate() {
            let mut purity_stats = RunningStats::new();
            let mut div_stats = RunningStats::new();
            for trial in &per_trial {
                purity_stats.push(trial[di].0);
                div_stats.push(trial[di].1);
            }
            points.push(NonunitalPoint {
                n,
                depth,
                mean_purity: purity_stats.mean(),
                mean_divergence: div_stats.mean(),
                stderr_divergence: div_stats.stderr(),
            });
        }
    }
    Ok(NonunitalCurve {
        gamma,
        trials,
        master_seed,
        points,
    })
}
