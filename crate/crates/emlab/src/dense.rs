//! Exact dense density-matrix simulation for small registers.
//!
//! This module is the brute-force reference oracle: circuit evolution with
//! interleaved noise, purity, divergences, observable expectations, and
//! computational-basis sampling, all computed exactly (up to floating point)
//! on `2^n x 2^n` matrices. The practical limit is `n <= 12`.
//!
//! All divergences are reported in bits (log base 2).

use crate::circuit::{LayeredCircuit, UnitaryLayer};
use crate::clifford::CliffordTableau;
use crate::error::{EmlabError, Result};
use crate::noise::{amplitude_damping, single_qubit_depolarizing_as_pauli_channel, KrausChannel, NoiseSpec};
use crate::pauli::PauliString;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

/// Largest register size accepted by the dense oracle.
pub const DENSE_LIMIT: usize = 12;

/// Spectral cutoff separating true zero eigenvalues from roundoff when
/// checking divergence support conditions.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGENVALUE_TOL: f64 = -1e-10;

fn check_dense_limit(n: usize) -> Result<()> {
    if n == 0 || n > DENSE_LIMIT {
        return Err(EmlabError::InvalidParameter(format!(
            "dense oracle supports 1..={DENSE_LIMIT} qubits, got {n}"
        )));
    }
    Ok(())
}

/// A density matrix on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a matrix after validating Hermiticity, unit trace, and
    /// positivity within the documented tolerances.
    pub fn new(n: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        check_dense_limit(n)?;
        let dim = 1usize << n;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(EmlabError::DimensionMismatch(format!(
                "density matrix is {}x{}, expected {dim}x{dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let rho = Self { n, mat };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix assumed valid (used internally after trace-preserving
    /// positive maps).
    fn wrap(n: usize, mat: DMatrix<Complex64>) -> Self {
        Self { n, mat }
    }

    /// Computational basis state `|label><label|`.
    pub fn basis_state(n: usize, label: u64) -> Result<Self> {
        check_dense_limit(n)?;
        let dim = 1usize << n;
        if label >= dim as u64 {
            return Err(EmlabError::InvalidParameter(format!(
                "basis label {label} out of range for {n} qubits"
            )));
        }
        let mut mat = DMatrix::zeros(dim, dim);
        mat[(label as usize, label as usize)] = Complex64::new(1.0, 0.0);
        Ok(Self::wrap(n, mat))
    }

    /// The maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_dense_limit(n)?;
        let dim = 1usize << n;
        let mat = DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        Ok(Self::wrap(n, mat))
    }

    /// Pure state from an amplitude vector (normalized by the caller to
    /// within 1e-12).
    pub fn pure_state(n: usize, amplitudes: &DVector<Complex64>) -> Result<Self> {
        check_dense_limit(n)?;
        let dim = 1usize << n;
        if amplitudes.len() != dim {
            return Err(EmlabError::DimensionMismatch(format!(
                "amplitude vector has length {}, expected {dim}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(EmlabError::InvalidParameter(format!(
                "amplitude vector has squared norm {norm}"
            )));
        }
        let mat = amplitudes * amplitudes.adjoint();
        Ok(Self::wrap(n, mat))
    }

    /// A random mixed state from the trace-normalized Ginibre ensemble.
    pub fn random_mixed<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        check_dense_limit(n)?;
        let dim = 1usize << n;
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(standard_normal(rng), standard_normal(rng))
        });
        let mut m = &g * g.adjoint();
        let trace: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
        m /= Complex64::new(trace, 0.0);
        Ok(Self::wrap(n, m))
    }

    /// A Haar-like random pure state (Gaussian amplitudes, normalized).
    pub fn random_pure<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        check_dense_limit(n)?;
        let dim = 1usize << n;
        let mut v = DVector::from_fn(dim, |_, _| {
            Complex64::new(standard_normal(rng), standard_normal(rng))
        });
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v /= Complex64::new(norm, 0.0);
        Self::pure_state(n, &v)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Checks the class invariants: Hermitian to 1e-12, trace one to 1e-12,
    /// eigenvalues at least -1e-10.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for r in 0..dim {
            for c in r..dim {
                let d = (self.mat[(r, c)] - self.mat[(c, r)].conj()).norm();
                if d > HERMITICITY_TOL {
                    return Err(EmlabError::Numerical(format!(
                        "density matrix not Hermitian at ({r},{c}): deviation {d:.3e}"
                    )));
                }
            }
        }
        let trace: f64 = (0..dim).map(|i| self.mat[(i, i)].re).sum();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(EmlabError::Numerical(format!(
                "density matrix trace {trace} differs from 1"
            )));
        }
        let (evals, _) = hermitian_eigen(&self.mat)?;
        if let Some(&min) = evals
            .iter()
            .min_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"))
        {
            if min < EIGENVALUE_TOL {
                return Err(EmlabError::Numerical(format!(
                    "density matrix has eigenvalue {min:.3e} below tolerance"
                )));
            }
        }
        Ok(())
    }

    /// Purity `Tr(rho^2)`; for Hermitian matrices this is the squared
    /// Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Trace of a Pauli string against the state, `Tr(P rho)`.
    pub fn pauli_trace(&self, p: &PauliString) -> Result<Complex64> {
        if p.num_qubits() != self.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "pauli on {} qubits against {}-qubit state",
                p.num_qubits(),
                self.n
            )));
        }
        pauli_trace_of_matrix(&self.mat, p)
    }

    /// Expectation value `Tr(O rho)` of a Pauli-sum observable.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        if obs.num_qubits() != self.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "observable on {} qubits against {}-qubit state",
                obs.num_qubits(),
                self.n
            )));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (coef, p) in obs.terms() {
            total += self.pauli_trace(p)? * Complex64::new(*coef, 0.0);
        }
        if total.im.abs() > 1e-10 {
            return Err(EmlabError::Numerical(format!(
                "expectation has imaginary part {:.3e}",
                total.im
            )));
        }
        Ok(total.re)
    }

    /// Diagonal of the state in the computational basis, clamped to a
    /// probability vector.
    pub fn basis_distribution(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut probs: Vec<f64> = (0..dim).map(|i| self.mat[(i, i)].re.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if total > 0.0 {
            for p in &mut probs {
                *p /= total;
            }
        }
        probs
    }

    /// Samples one computational-basis outcome.
    pub fn sample_basis<R: Rng>(&self, rng: &mut R) -> u64 {
        let probs = self.basis_distribution();
        let mut u: f64 = rng.gen();
        for (i, &p) in probs.iter().enumerate() {
            if u < p {
                return i as u64;
            }
            u -= p;
        }
        (probs.len() - 1) as u64
    }

    /// Applies a unitary matrix: `U rho U†`.
    pub fn apply_unitary(&self, u: &DMatrix<Complex64>) -> Result<DensityMatrix> {
        let dim = self.dim();
        if u.nrows() != dim || u.ncols() != dim {
            return Err(EmlabError::DimensionMismatch(format!(
                "unitary is {}x{}, state dimension {dim}",
                u.nrows(),
                u.ncols()
            )));
        }
        Ok(Self::wrap(self.n, u * &self.mat * u.adjoint()))
    }

    /// Applies a Clifford tableau by building its dense unitary.
    pub fn apply_tableau(&self, t: &CliffordTableau) -> Result<DensityMatrix> {
        let u = tableau_to_unitary(t)?;
        self.apply_unitary(&u)
    }

    /// Applies a noise layer described by a [`NoiseSpec`].
    pub fn apply_noise(&self, spec: &NoiseSpec) -> Result<DensityMatrix> {
        let mat = apply_noise_spec_matrix(&self.mat, self.n, spec)?;
        Ok(Self::wrap(self.n, mat))
    }

    /// Runs the full noisy circuit: for each layer, the unitary followed by
    /// its noise entry (if any).
    pub fn evolve(&self, circuit: &LayeredCircuit) -> Result<DensityMatrix> {
        if circuit.n != self.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "circuit on {} qubits, state on {}",
                circuit.n, self.n
            )));
        }
        let mut state = self.clone();
        for layer in &circuit.layers {
            match &layer.unitary {
                UnitaryLayer::Identity => {}
                UnitaryLayer::Tableau(t) => state = state.apply_tableau(t)?,
            }
            if let Some(spec) = &layer.noise {
                state = state.apply_noise(spec)?;
            }
        }
        Ok(state)
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller transform from two uniforms.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn phase_value(exponent: u32) -> Complex64 {
    match exponent % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Trace of a Pauli string against a raw matrix, `Tr(P m)`, using the
/// sparse one-entry-per-row structure of Pauli matrices.
pub fn pauli_trace_of_matrix(m: &DMatrix<Complex64>, p: &PauliString) -> Result<Complex64> {
    let n = p.num_qubits();
    let dim = 1usize << n;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(EmlabError::DimensionMismatch(format!(
            "matrix is {}x{}, pauli on {n} qubits",
            m.nrows(),
            m.ncols()
        )));
    }
    let x = p.x_words().first().copied().unwrap_or(0) as usize;
    let z = p.z_words().first().copied().unwrap_or(0) as usize;
    let base = phase_value((u32::from(p.phase_exponent()) + p.xz_exponent()) % 4);
    let mut acc = Complex64::new(0.0, 0.0);
    for e in 0..dim {
        let sign = if ((e & z).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
        acc += m[(e, e ^ x)] * sign;
    }
    Ok(base * acc)
}

/// Expectation of a Pauli-sum observable on a pure state vector.
pub fn expectation_on_vector(psi: &DVector<Complex64>, obs: &Observable) -> Result<f64> {
    let n = obs.num_qubits();
    let dim = 1usize << n;
    if psi.len() != dim {
        return Err(EmlabError::DimensionMismatch(format!(
            "vector length {} against {n}-qubit observable",
            psi.len()
        )));
    }
    let mut total = 0.0;
    for (coef, p) in obs.terms() {
        let image = apply_pauli_to_vector(p, psi)?;
        total += coef * psi.dotc(&image).re;
    }
    Ok(total)
}

/// Dense matrix of a Pauli string (including its phase).
pub fn pauli_to_dense(p: &PauliString) -> Result<DMatrix<Complex64>> {
    let n = p.num_qubits();
    check_dense_limit(n)?;
    let dim = 1usize << n;
    let x = p.x_words().first().copied().unwrap_or(0) as usize;
    let z = p.z_words().first().copied().unwrap_or(0) as usize;
    let base = phase_value((u32::from(p.phase_exponent()) + p.xz_exponent()) % 4);
    let mut m = DMatrix::zeros(dim, dim);
    for e in 0..dim {
        let sign = if ((e & z).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
        m[(e ^ x, e)] = base * sign;
    }
    Ok(m)
}

/// Applies a Pauli string to a state vector: `out = P v`.
pub fn apply_pauli_to_vector(p: &PauliString, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let n = p.num_qubits();
    let dim = 1usize << n;
    if v.len() != dim {
        return Err(EmlabError::DimensionMismatch(format!(
            "vector length {} against {n}-qubit pauli",
            v.len()
        )));
    }
    let x = p.x_words().first().copied().unwrap_or(0) as usize;
    let z = p.z_words().first().copied().unwrap_or(0) as usize;
    let base = phase_value((u32::from(p.phase_exponent()) + p.xz_exponent()) % 4);
    let mut out = DVector::zeros(dim);
    for e in 0..dim {
        let sign = if ((e & z).count_ones() & 1) == 1 { -1.0 } else { 1.0 };
        out[e ^ x] = base * sign * v[e];
    }
    Ok(out)
}

/// Conjugates a matrix by a Pauli string: `P m P†`.
pub fn conjugate_matrix_by_pauli(m: &DMatrix<Complex64>, p: &PauliString) -> Result<DMatrix<Complex64>> {
    let n = p.num_qubits();
    let dim = 1usize << n;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(EmlabError::DimensionMismatch(format!(
            "matrix is {}x{}, pauli on {n} qubits",
            m.nrows(),
            m.ncols()
        )));
    }
    let x = p.x_words().first().copied().unwrap_or(0) as usize;
    let z = p.z_words().first().copied().unwrap_or(0) as usize;
    let base = phase_value((u32::from(p.phase_exponent()) + p.xz_exponent()) % 4);
    let mut out = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        let fr = base * if ((r ^ x) & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
        for c in 0..dim {
            let fc = base.conj() * if ((c ^ x) & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
            out[(r, c)] = fr * fc * m[(r ^ x, c ^ x)];
        }
    }
    Ok(out)
}

/// Applies a noise layer to a raw matrix (linear extension of the channel).
pub fn apply_noise_spec_matrix(
    m: &DMatrix<Complex64>,
    n: usize,
    spec: &NoiseSpec,
) -> Result<DMatrix<Complex64>> {
    spec.validate(n)?;
    let dim = 1usize << n;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(EmlabError::DimensionMismatch(format!(
            "matrix is {}x{} for {n} qubits",
            m.nrows(),
            m.ncols()
        )));
    }
    match spec {
        NoiseSpec::DepolarizingLocal { p } => {
            let ch = single_qubit_depolarizing_as_pauli_channel(*p)?;
            let mut out = m.clone();
            for q in 0..n {
                let mut acc = &out * Complex64::new(ch.q[0], 0.0);
                for (digit, letter) in [(1usize, 'X'), (2, 'Z'), (3, 'Y')] {
                    if ch.q[digit] == 0.0 {
                        continue;
                    }
                    let sigma = PauliString::single(n, q, letter)?;
                    acc += conjugate_matrix_by_pauli(&out, &sigma)? * Complex64::new(ch.q[digit], 0.0);
                }
                out = acc;
            }
            Ok(out)
        }
        NoiseSpec::DepolarizingGlobal { p } => {
            let trace: Complex64 = (0..dim).map(|i| m[(i, i)]).sum();
            let mixed = DMatrix::identity(dim, dim) * (trace / dim as f64);
            Ok(m * Complex64::new(*p, 0.0) + mixed * Complex64::new(1.0 - *p, 0.0))
        }
        NoiseSpec::Pauli { n: cn, q } => {
            let mut out = DMatrix::zeros(dim, dim);
            for (idx, &w) in q.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let sigma = PauliString::from_letter_index(*cn, idx as u64)?;
                out += conjugate_matrix_by_pauli(m, &sigma)? * Complex64::new(w, 0.0);
            }
            Ok(out)
        }
        NoiseSpec::AmplitudeDamping { gamma } => {
            let ch = amplitude_damping(*gamma)?;
            let mut out = m.clone();
            for q in 0..n {
                out = apply_single_qubit_kraus_matrix(&out, n, q, &ch)?;
            }
            Ok(out)
        }
    }
}

/// Applies a single-qubit Kraus channel to qubit `q` of an n-qubit matrix.
pub fn apply_single_qubit_kraus_matrix(
    m: &DMatrix<Complex64>,
    n: usize,
    q: usize,
    ch: &KrausChannel,
) -> Result<DMatrix<Complex64>> {
    if ch.k != 1 {
        return Err(EmlabError::InvalidParameter(format!(
            "expected a single-qubit kraus channel, got {} qubits",
            ch.k
        )));
    }
    if q >= n {
        return Err(EmlabError::InvalidParameter(format!(
            "qubit {q} out of range for {n}"
        )));
    }
    let dim = 1usize << n;
    let half = dim >> 1;
    let insert = |rest: usize, bit: usize| -> usize {
        let low = rest & ((1usize << q) - 1);
        let high = (rest >> q) << (q + 1);
        low | high | (bit << q)
    };
    let mut out = DMatrix::zeros(dim, dim);
    for kraus in &ch.ops {
        let k00 = kraus[(0, 0)];
        let k01 = kraus[(0, 1)];
        let k10 = kraus[(1, 0)];
        let k11 = kraus[(1, 1)];
        for r_rest in 0..half {
            let r0 = insert(r_rest, 0);
            let r1 = insert(r_rest, 1);
            for c_rest in 0..half {
                let c0 = insert(c_rest, 0);
                let c1 = insert(c_rest, 1);
                let b00 = m[(r0, c0)];
                let b01 = m[(r0, c1)];
                let b10 = m[(r1, c0)];
                let b11 = m[(r1, c1)];
                // 2x2 block transform K B K†.
                let t00 = k00 * b00 + k01 * b10;
                let t01 = k00 * b01 + k01 * b11;
                let t10 = k10 * b00 + k11 * b10;
                let t11 = k10 * b01 + k11 * b11;
                out[(r0, c0)] += t00 * k00.conj() + t01 * k01.conj();
                out[(r0, c1)] += t00 * k10.conj() + t01 * k11.conj();
                out[(r1, c0)] += t10 * k00.conj() + t11 * k01.conj();
                out[(r1, c1)] += t10 * k10.conj() + t11 * k11.conj();
            }
        }
    }
    Ok(out)
}

/// Builds the dense unitary of a Clifford tableau (up to global phase).
///
/// The column construction uses the stabilizer projector: the image rows of
/// `Z_j` generate the stabilizer of `U|0...0>`, whose projector is the
/// product of `(I + S_j)/2`. Any non-zero column of that rank-one projector
/// is `U|0...0>` up to phase, and the remaining columns follow from
/// `U|x> = (U X^x U†) U|0...0>`.
pub fn tableau_to_unitary(t: &CliffordTableau) -> Result<DMatrix<Complex64>> {
    let n = t.num_qubits();
    check_dense_limit(n)?;
    let dim = 1usize << n;
    // Apply the commuting projector factors to one basis vector at a time;
    // the diagonal entry of the full projector is the squared norm of the
    // result, and since (I + S)/2 only ever shrinks norms we can abandon a
    // candidate early.
    let threshold = 0.5 / dim as f64;
    let mut phi0: Option<DVector<Complex64>> = None;
    'candidates: for c in 0..dim {
        let mut v = DVector::<Complex64>::zeros(dim);
        v[c] = Complex64::new(1.0, 0.0);
        for j in 0..n {
            let sv = apply_pauli_to_vector(t.z_image(j), &v)?;
            v = (v + sv) * Complex64::new(0.5, 0.0);
            if v.norm_squared() <= threshold {
                continue 'candidates;
            }
        }
        let norm2 = v.norm_squared();
        if norm2 > threshold {
            phi0 = Some(v / Complex64::new(norm2.sqrt(), 0.0));
            break;
        }
    }
    let phi0 = phi0
        .ok_or_else(|| EmlabError::Numerical("stabilizer projector has empty diagonal".into()))?;

    let mut u = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let mut xs = PauliString::identity(n);
        for j in 0..n {
            if (x >> j) & 1 == 1 {
                xs.set_letter(j, 'X')?;
            }
        }
        let image = t.conjugate(&xs)?;
        let col = apply_pauli_to_vector(&image, &phi0)?;
        u.set_column(x, &col);
    }
    Ok(u)
}

/// Hermitian eigendecomposition with symmetrization, returning eigenvalues
/// and the matching eigenvector columns.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| EmlabError::Numerical("hermitian eigendecomposition failed".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Divergences of a state pair, in bits.
#[derive(Clone, Debug)]
pub struct DivergenceReport {
    /// Umegaki relative entropy `D(rho || sigma)`.
    pub relative_entropy: f64,
    /// Petz-Renyi divergences for the requested orders.
    pub renyi: Vec<(f64, f64)>,
    /// Max-relative entropy: the least `g` with `rho <= 2^g sigma`.
    pub max_relative_entropy: f64,
}

/// Computes relative entropy, Petz-Renyi divergences, and max-relative
/// entropy of `rho` against `sigma`.
///
/// A genuine support violation (mass of `rho` outside the support of
/// `sigma`) yields `f64::INFINITY` entries for the divergences that require
/// support containment; numerical failures return errors instead.
pub fn divergences(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    alphas: &[f64],
) -> Result<DivergenceReport> {
    if rho.num_qubits() != sigma.num_qubits() {
        return Err(EmlabError::DimensionMismatch(format!(
            "divergences: {} vs {} qubits",
            rho.num_qubits(),
            sigma.num_qubits()
        )));
    }
    for &a in alphas {
        if a <= 0.0 || (a - 1.0).abs() < 1e-12 {
            return Err(EmlabError::InvalidParameter(format!(
                "renyi order {a} must be positive and different from 1"
            )));
        }
    }
    let (lam_raw, u) = hermitian_eigen(rho.matrix())?;
    let (mu_raw, v) = hermitian_eigen(sigma.matrix())?;
    let lam: Vec<f64> = lam_raw.iter().map(|&x| x.max(0.0)).collect();
    let mu: Vec<f64> = mu_raw.iter().map(|&x| x.max(0.0)).collect();
    let overlap = u.adjoint() * &v; // overlap[i][j] = <u_i|v_j>
    let dim = lam.len();
    let o2 = |i: usize, j: usize| overlap[(i, j)].norm_sqr();

    // Mass of rho outside sigma's support.
    let mut outside = 0.0;
    for i in 0..dim {
        if lam[i] <= SUPPORT_CUTOFF {
            continue;
        }
        for j in 0..dim {
            if mu[j] <= SUPPORT_CUTOFF {
                outside += lam[i] * o2(i, j);
            }
        }
    }
    let violated = outside > SUPPORT_CUTOFF;

    let relative_entropy = if violated {
        f64::INFINITY
    } else {
        let mut d = 0.0;
        for i in 0..dim {
            if lam[i] > 0.0 {
                d += lam[i] * lam[i].log2();
            }
        }
        for i in 0..dim {
            if lam[i] == 0.0 {
                continue;
            }
            for j in 0..dim {
                if mu[j] > SUPPORT_CUTOFF {
                    d -= lam[i] * o2(i, j) * mu[j].log2();
                }
            }
        }
        d
    };

    let mut renyi = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let value = if a > 1.0 && violated {
            f64::INFINITY
        } else {
            let mut trace = 0.0;
            for i in 0..dim {
                if lam[i] == 0.0 {
                    continue;
                }
                let la = lam[i].powf(a);
                for j in 0..dim {
                    if mu[j] > SUPPORT_CUTOFF {
                        trace += la * mu[j].powf(1.0 - a) * o2(i, j);
                    } else if a < 1.0 {
                        // sigma^(1-a) vanishes outside its support.
                    }
                }
            }
            if trace <= 0.0 {
                f64::INFINITY
            } else {
                trace.log2() / (a - 1.0)
            }
        };
        renyi.push((a, value));
    }

    let max_relative_entropy = if violated {
        f64::INFINITY
    } else {
        // lambda_max of sigma^{-1/2} rho sigma^{-1/2} on the support.
        let mut inv_half = DMatrix::<Complex64>::zeros(dim, dim);
        for j in 0..dim {
            if mu[j] > SUPPORT_CUTOFF {
                let s = Complex64::new(1.0 / mu[j].sqrt(), 0.0);
                let col = v.column(j);
                for r in 0..dim {
                    for c in 0..dim {
                        inv_half[(r, c)] += col[r] * col[c].conj() * s;
                    }
                }
            }
        }
        let b = &inv_half * rho.matrix() * &inv_half;
        let (bev, _) = hermitian_eigen(&b)?;
        let top = bev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top <= 0.0 {
            f64::NEG_INFINITY
        } else {
            top.log2()
        }
    };

    Ok(DivergenceReport {
        relative_entropy,
        renyi,
        max_relative_entropy,
    })
}

/// Relative entropy against the maximally mixed state, computed
/// cancellation-free as `sum lambda * log2(lambda * 2^n)`.
///
/// The naive form `n - S(rho)` loses all precision once the divergence drops
/// toward roundoff; this form stays accurate.
pub fn relative_entropy_to_maximally_mixed(rho: &DensityMatrix) -> Result<f64> {
    relative_entropy_to_maximally_mixed_matrix(rho.matrix())
}

/// Matrix-level variant of [`relative_entropy_to_maximally_mixed`] for hot
/// loops that track raw matrices.
pub fn relative_entropy_to_maximally_mixed_matrix(m: &DMatrix<Complex64>) -> Result<f64> {
    let (lam, _) = hermitian_eigen(m)?;
    let dim = m.nrows() as f64;
    let mut d = 0.0;
    for &l in &lam {
        if l > 0.0 {
            d += l * (l * dim).log2();
        }
    }
    Ok(d)
}

/// Purity of a raw matrix: squared Frobenius norm (equals `Tr(m^2)` for
/// Hermitian `m`).
pub fn purity_of_matrix(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

/// Total variation distance between two distributions on the same finite
/// support: half the l1 distance.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(EmlabError::DimensionMismatch(format!(
            "tv distance: supports of size {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<f64>())
}

/// KL divergence `D(p || q)` between distributions, in bits; infinite on
/// support violation.
pub fn kl_divergence_bits(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(EmlabError::DimensionMismatch(format!(
            "kl divergence: supports of size {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        d += a * (a / b).log2();
    }
    Ok(d.max(0.0))
}

/// Bretagnolle-Huber bound on total variation from a KL divergence in bits:
/// `tv <= sqrt(1 - 2^(-kl))`.
pub fn bretagnolle_huber_bound(kl_bits: f64) -> f64 {
    (1.0 - 2f64.powf(-kl_bits)).max(0.0).sqrt()
}

/// Writes a density matrix to a binary fixture: one JSON header line
/// followed by row-major little-endian complex doubles.
pub fn save_fixture<P: AsRef<Path>>(path: P, rho: &DensityMatrix) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let header = serde_json::json!({
        "n": rho.num_qubits(),
        "endianness": "little",
        "layout": "row-major-complex-f64",
    });
    file.write_all(header.to_string().as_bytes())?;
    file.write_all(b"\n")?;
    let dim = rho.dim();
    let mut bytes = Vec::with_capacity(dim * dim * 16);
    for r in 0..dim {
        for c in 0..dim {
            let v = rho.matrix()[(r, c)];
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    file.write_all(&bytes)?;
    Ok(())
}

/// Reads a density matrix fixture written by [`save_fixture`].
pub fn load_fixture<P: AsRef<Path>>(path: P) -> Result<DensityMatrix> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| EmlabError::Parse("fixture has no header line".into()))?;
    let header: serde_json::Value = serde_json::from_slice(&raw[..newline])?;
    let n = header["n"]
        .as_u64()
        .ok_or_else(|| EmlabError::Parse("fixture header missing n".into()))? as usize;
    if header["endianness"].as_str() != Some("little") {
        return Err(EmlabError::Parse("fixture must be little-endian".into()));
    }
    let dim = 1usize << n;
    let body = &raw[newline + 1..];
    if body.len() != dim * dim * 16 {
        return Err(EmlabError::Parse(format!(
            "fixture body has {} bytes, expected {}",
            body.len(),
            dim * dim * 16
        )));
    }
    let mut mat = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let off = (r * dim + c) * 16;
            let re = f64::from_le_bytes(body[off..off + 8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(body[off + 8..off + 16].try_into().expect("8 bytes"));
            mat[(r, c)] = Complex64::new(re, im);
        }
    }
    DensityMatrix::new(n, mat)
}

/// A Pauli-sum observable with real coefficients and norm bound
/// `sum |c| <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl Observable {
    /// Builds an observable, folding real Pauli phases into coefficients and
    /// enforcing the norm bound.
    pub fn new(n: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut folded = Vec::with_capacity(terms.len());
        let mut norm = 0.0;
        for (coef, p) in terms {
            if p.num_qubits() != n {
                return Err(EmlabError::DimensionMismatch(format!(
                    "observable term on {} qubits, expected {n}",
                    p.num_qubits()
                )));
            }
            if !p.is_hermitian() {
                return Err(EmlabError::InvalidParameter(format!(
                    "observable term {p} is not Hermitian"
                )));
            }
            let sign = if p.phase_exponent() == 2 { -1.0 } else { 1.0 };
            norm += coef.abs();
            folded.push((coef * sign, p.with_phase(0)));
        }
        if norm > 1.0 + 1e-12 {
            return Err(EmlabError::InvalidParameter(format!(
                "observable norm bound violated: sum |c| = {norm}"
            )));
        }
        Ok(Self { n, terms: folded })
    }

    /// Parses a Pauli-sum from text: terms joined by `+`, each an optional
    /// real coefficient, `*`, and a Pauli string, e.g. `0.5*XI + -0.5*IZ`
    /// or just `Z`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n = None;
        for raw in text.split('+') {
            let piece = raw.trim();
            if piece.is_empty() {
                return Err(EmlabError::Parse(format!("empty term in '{text}'")));
            }
            let (coef, pauli_text) = match piece.split_once('*') {
                Some((c, p)) => {
                    let coef: f64 = c.trim().parse().map_err(|_| {
                        EmlabError::Parse(format!("bad coefficient '{c}' in '{text}'"))
                    })?;
                    (coef, p.trim())
                }
                None => (1.0, piece),
            };
            let p: PauliString = pauli_text.parse()?;
            let qubits = p.num_qubits();
            if *n.get_or_insert(qubits) != qubits {
                return Err(EmlabError::DimensionMismatch(format!(
                    "term '{piece}' has {qubits} qubits, expected {}",
                    n.expect("set above")
                )));
            }
            terms.push((coef, p));
        }
        Self::new(n.expect("at least one term"), terms)
    }

    /// Single-Pauli observable.
    pub fn single(coef: f64, p: PauliString) -> Result<Self> {
        let n = p.num_qubits();
        Self::new(n, vec![(coef, p)])
    }

    /// The bit-value readout observable for qubit `i`: its expectation on a
    /// basis state `|x>` is `2 x_i - 1` (bit 1 maps to +1). This is the
    /// negative of the plain `Z_i` letter.
    pub fn bit_readout_z(n: usize, i: usize) -> Result<Self> {
        Self::single(-1.0, PauliString::single(n, i, 'Z')?)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Sum of absolute coefficients (an upper bound on the operator norm).
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// True when every term is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, p)| (0..self.n).all(|j| !p.x_bit(j)))
    }

    /// Evaluates a diagonal observable on one basis label.
    pub fn eigenvalue_on_basis(&self, label: u64) -> Result<f64> {
        if !self.is_diagonal() {
            return Err(EmlabError::InvalidParameter(
                "observable is not diagonal in the computational basis".into(),
            ));
        }
        let mut total = 0.0;
        for (coef, p) in &self.terms {
            let z = p.z_words().first().copied().unwrap_or(0);
            let sign = if ((label & z).count_ones() & 1) == 1 {
                -1.0
            } else {
                1.0
            };
            total += coef * sign;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::DepolarizingSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn purity_reference_values() {
        let pure = DensityMatrix::basis_state(3, 5).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        assert!((mixed.purity() - 0.125).abs() < 1e-14);
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(0.95, 0.0);
        m[(1, 1)] = Complex64::new(0.05, 0.0);
        let rho = DensityMatrix::new(1, m).unwrap();
        assert!((rho.purity() - 0.905).abs() < 1e-14);
    }

    #[test]
    fn trace_product_matches_dense_exhaustive_n3() {
        for a in 0..64u64 {
            for b in 0..64u64 {
                let pa = PauliString::from_letter_index(3, a).unwrap();
                let pb = PauliString::from_letter_index(3, b).unwrap();
                let fast = pa.trace_product(&pb).unwrap();
                let dense = (pauli_to_dense(&pa).unwrap() * pauli_to_dense(&pb).unwrap()).trace();
                assert!(
                    (fast - dense).norm() < 1e-10,
                    "trace mismatch for {pa} * {pb}: {fast} vs {dense}"
                );
            }
        }
    }

    #[test]
    fn pauli_multiply_matches_dense_randomized() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = PauliString::random(2, &mut rng).with_phase(rng.gen_range(0..4));
            let b = PauliString::random(2, &mut rng).with_phase(rng.gen_range(0..4));
            let prod = a.multiply(&b).unwrap();
            let dense = pauli_to_dense(&a).unwrap() * pauli_to_dense(&b).unwrap();
            let diff = (pauli_to_dense(&prod).unwrap() - dense).norm();
            assert!(diff < 1e-12, "dense mismatch for {a} * {b} = {prod}");
        }
    }

    #[test]
    fn tableau_conjugation_matches_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        // The CNOT worked example first: X on the control picks up an X on
        // the target.
        let mut cx = CliffordTableau::identity(2);
        cx.append_cx(0, 1);
        let u = tableau_to_unitary(&cx).unwrap();
        let lhs = &u * pauli_to_dense(&p("XI")).unwrap() * u.adjoint();
        assert!((lhs - pauli_to_dense(&p("XX")).unwrap()).norm() < 1e-10);

        for n in 1..=3usize {
            for _ in 0..10 {
                let t = CliffordTableau::sample_uniform(n, &mut rng);
                let u = tableau_to_unitary(&t).unwrap();
                let dim = 1usize << n;
                // Unitarity.
                let err = (u.adjoint() * &u - DMatrix::<Complex64>::identity(dim, dim)).norm();
                assert!(err < 1e-10, "not unitary: {err:.3e}");
                let q = PauliString::random(n, &mut rng).with_phase(rng.gen_range(0..4) & 2);
                let image = t.conjugate(&q).unwrap();
                let lhs = &u * pauli_to_dense(&q).unwrap() * u.adjoint();
                let rhs = pauli_to_dense(&image).unwrap();
                assert!(
                    (lhs - rhs).norm() < 1e-10,
                    "conjugation mismatch on {q} -> {image}"
                );
            }
        }
    }

    #[test]
    fn expectation_sign_conventions() {
        let zero = DensityMatrix::basis_state(3, 0).unwrap();
        // Plain letter Z on |0> has expectation +1.
        let plain = Observable::single(1.0, p("ZII")).unwrap();
        assert!((zero.expectation(&plain).unwrap() - 1.0).abs() < 1e-12);
        // Bit-readout convention: expectation is 2 x_i - 1.
        for x in 0..8u64 {
            let rho = DensityMatrix::basis_state(3, x).unwrap();
            for i in 0..3 {
                let obs = Observable::bit_readout_z(3, i).unwrap();
                let expect = 2.0 * ((x >> i) & 1) as f64 - 1.0;
                assert!((rho.expectation(&obs).unwrap() - expect).abs() < 1e-12);
            }
        }
        // Traceless observables vanish on the maximally mixed state.
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        let obs = Observable::parse("0.5*XIZ + 0.5*YYI").unwrap();
        assert!(mixed.expectation(&obs).unwrap().abs() < 1e-12);
    }

    #[test]
    fn observable_norm_bound_and_parsing() {
        assert!(Observable::parse("0.6*XI + 0.6*IZ").is_err());
        let o = Observable::parse("0.5*XI + -0.5*IZ").unwrap();
        assert_eq!(o.terms().len(), 2);
        assert!((o.norm_bound() - 1.0).abs() < 1e-12);
        // A negative letter phase folds into the coefficient.
        let o2 = Observable::parse("-Z").unwrap();
        assert_eq!(o2.terms()[0].1, p("Z"));
        assert!((o2.terms()[0].0 + 1.0).abs() < 1e-12);
        assert!(Observable::parse("iZ").is_err());
        assert!(Observable::parse("XI + Z").is_err());
    }

    #[test]
    fn diagonal_eigenvalue_lookup() {
        let o = Observable::parse("0.5*ZI + 0.25*IZ").unwrap();
        assert!(o.is_diagonal());
        // On |01> (label 1: qubit 0 set): ZI gives -1, IZ gives +1.
        let v = o.eigenvalue_on_basis(1).unwrap();
        assert!((v - (-0.5 + 0.25)).abs() < 1e-12);
        assert!(!Observable::parse("X").unwrap().is_diagonal());
    }

    #[test]
    fn sample_basis_point_mass_and_uniform() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let rho = DensityMatrix::basis_state(4, 11).unwrap();
        for _ in 0..50 {
            assert_eq!(rho.sample_basis(&mut rng), 11);
        }
        // Uniformity on the maximally mixed state, n=3, 1e5 draws.
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        let mut counts = [0u64; 8];
        let draws = 100_000u64;
        for _ in 0..draws {
            counts[mixed.sample_basis(&mut rng) as usize] += 1;
        }
        let chi2 = crate::stats::chi_square_uniform(&counts, draws);
        let critical = crate::stats::chi_square_critical(7, 0.01).unwrap();
        assert!(chi2 < critical, "chi2 {chi2:.1} vs critical {critical:.1}");
    }

    #[test]
    fn divergences_reference_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let rho = DensityMatrix::random_mixed(2, &mut rng).unwrap();
        let report = divergences(&rho, &rho, &[0.5, 2.0]).unwrap();
        assert!(report.relative_entropy.abs() < 1e-8);
        assert!(report.max_relative_entropy.abs() < 1e-7);
        for (_, v) in &report.renyi {
            assert!(v.abs() < 1e-8);
        }

        // Pure state against maximally mixed: everything equals n.
        let pure = DensityMatrix::basis_state(3, 4).unwrap();
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        let report = divergences(&pure, &mixed, &[2.0]).unwrap();
        assert!((report.relative_entropy - 3.0).abs() < 1e-9);
        assert!((report.renyi[0].1 - 3.0).abs() < 1e-9);
        assert!((report.max_relative_entropy - 3.0).abs() < 1e-9);
    }

    #[test]
    fn divergence_ordering_and_entropy_chain_randomized() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for n in 2..=4usize {
            let mixed = DensityMatrix::maximally_mixed(n).unwrap();
            for _ in 0..20 {
                let rho = DensityMatrix::random_mixed(n, &mut rng).unwrap();
                let report = divergences(&rho, &mixed, &[2.0]).unwrap();
                let d2 = report.renyi[0].1;
                assert!(report.relative_entropy <= d2 + 1e-9);
                assert!(d2 <= report.max_relative_entropy + 1e-9);
                // Purity controls the relative entropy against I/2^n.
                let bound = n as f64 + rho.purity().log2();
                assert!(report.relative_entropy <= bound + 1e-9);
                assert!((d2 - bound).abs() < 1e-8, "D_2 equals n + log2 purity");
                // The dedicated cancellation-free path agrees.
                let direct = relative_entropy_to_maximally_mixed(&rho).unwrap();
                assert!((direct - report.relative_entropy).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn support_violation_is_infinite_not_error() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let sigma = DensityMatrix::basis_state(2, 0).unwrap();
        let report = divergences(&rho, &sigma, &[2.0]).unwrap();
        assert!(report.relative_entropy.is_infinite());
        assert!(report.renyi[0].1.is_infinite());
        assert!(report.max_relative_entropy.is_infinite());
        // Order below one stays finite under partial overlap.
        let half = divergences(&rho, &sigma, &[0.5]).unwrap();
        assert!(half.renyi[0].1.is_finite());
    }

    #[test]
    fn cancellation_free_relative_entropy_near_mixed() {
        // A tiny perturbation of I/2^n: naive n - S(rho) would drown in
        // cancellation at this scale.
        let n = 4;
        let dim = 1usize << n;
        let eps = 1e-8;
        let mut mat = DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        mat[(0, 0)] += Complex64::new(eps, 0.0);
        mat[(1, 1)] -= Complex64::new(eps, 0.0);
        let rho = DensityMatrix::new(n, mat).unwrap();
        let d = relative_entropy_to_maximally_mixed(&rho).unwrap();
        // Expected leading order: eps^2 * 2^n / ln 2.
        let expected = eps * eps * dim as f64 / std::f64::consts::LN_2;
        assert!(d > 0.0);
        assert!((d - expected).abs() < 0.02 * expected, "d = {d}, expected {expected}");
    }

    #[test]
    fn tv_and_kl_reference_values() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
        assert!(kl_divergence_bits(&[1.0, 0.0], &[0.0, 1.0]).unwrap().is_infinite());
        let kl = kl_divergence_bits(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        let expected = 0.5 * (2f64.log2() + (0.5f64 / 0.75).log2());
        assert!((kl - expected).abs() < 1e-12);
    }

    #[test]
    fn bretagnolle_huber_holds_on_random_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..300 {
            let k = rng.gen_range(2..6);
            let mut p: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let mut q: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let sp: f64 = p.iter().sum();
            let sq: f64 = q.iter().sum();
            p.iter_mut().for_each(|v| *v /= sp);
            q.iter_mut().for_each(|v| *v /= sq);
            let tv = tv_distance(&p, &q).unwrap();
            let kl = kl_divergence_bits(&p, &q).unwrap();
            assert!(tv <= bretagnolle_huber_bound(kl) + 1e-12);
        }
    }

    #[test]
    fn noise_application_reference_cases() {
        // Global depolarizing with p=0 sends everything to I/2^n.
        let rho = DensityMatrix::basis_state(2, 3).unwrap();
        let out = rho.apply_noise(&NoiseSpec::DepolarizingGlobal { p: 0.0 }).unwrap();
        assert!((out.matrix() - DensityMatrix::maximally_mixed(2).unwrap().matrix()).norm() < 1e-14);

        // Identity Pauli channel leaves the input unchanged.
        let mut q = vec![0.0; 16];
        q[0] = 1.0;
        let out = rho.apply_noise(&NoiseSpec::Pauli { n: 2, q }).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-14);

        // Local depolarizing p=0.9 on |0><0| gives diag(0.95, 0.05).
        let zero = DensityMatrix::basis_state(1, 0).unwrap();
        let out = zero.apply_noise(&NoiseSpec::DepolarizingLocal { p: 0.9 }).unwrap();
        assert!((out.matrix()[(0, 0)].re - 0.95).abs() < 1e-14);
        assert!((out.matrix()[(1, 1)].re - 0.05).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_dense_action_matches_transfer_coefficients() {
        // Applying the channel to a dense Pauli and projecting back must
        // reproduce the transfer coefficient exactly.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for n in 1..=3usize {
            for _ in 0..20 {
                let pl = PauliString::random(n, &mut rng);
                let dense = pauli_to_dense(&pl).unwrap();
                for (spec, ds) in [
                    (NoiseSpec::DepolarizingLocal { p: 0.9 }, DepolarizingSpec::local(0.9)),
                    (NoiseSpec::DepolarizingGlobal { p: 0.7 }, DepolarizingSpec::global(0.7)),
                ] {
                    let out = apply_noise_spec_matrix(&dense, n, &spec).unwrap();
                    let damping = crate::noise::depolarizing_damping(&ds, &pl).unwrap();
                    let diff = (&out - &dense * Complex64::new(damping, 0.0)).norm();
                    assert!(diff < 1e-12, "transfer mismatch for {pl}: {diff:.3e}");
                }
            }
        }
    }

    #[test]
    fn amplitude_damping_transfer_action() {
        // On the Bloch operators: I -> I + gamma Z_plain, Z -> (1-gamma) Z,
        // X -> sqrt(1-gamma) X, where Z_plain = diag(1, -1).
        let gamma = 0.36;
        let spec = NoiseSpec::AmplitudeDamping { gamma };
        let id = pauli_to_dense(&p("I")).unwrap();
        let z = pauli_to_dense(&p("Z")).unwrap();
        let x = pauli_to_dense(&p("X")).unwrap();
        let out_i = apply_noise_spec_matrix(&id, 1, &spec).unwrap();
        assert!((&out_i - (&id + &z * Complex64::new(gamma, 0.0))).norm() < 1e-12);
        let out_z = apply_noise_spec_matrix(&z, 1, &spec).unwrap();
        assert!((&out_z - &z * Complex64::new(1.0 - gamma, 0.0)).norm() < 1e-12);
        let out_x = apply_noise_spec_matrix(&x, 1, &spec).unwrap();
        assert!((&out_x - &x * Complex64::new((1.0 - gamma).sqrt(), 0.0)).norm() < 1e-12);

        // Non-unitality sign test, and the gamma=1 constant map.
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let moved = mixed.apply_noise(&spec).unwrap();
        assert!((moved.matrix() - mixed.matrix()).norm() > 1e-3);
        let all = mixed.apply_noise(&NoiseSpec::AmplitudeDamping { gamma: 1.0 }).unwrap();
        let ground = DensityMatrix::basis_state(2, 0).unwrap();
        assert!((all.matrix() - ground.matrix()).norm() < 1e-12);
        let unital = mixed.apply_noise(&NoiseSpec::DepolarizingLocal { p: 0.37 }).unwrap();
        assert!((unital.matrix() - mixed.matrix()).norm() < 1e-13);
    }

    #[test]
    fn single_qubit_kraus_embedding_matches_full_matrix() {
        // Specialized per-qubit application agrees with building the full
        // Kraus operator by tensor products.
        let gamma = 0.2;
        let ch = amplitude_damping(gamma).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 3;
        let dim = 1usize << n;
        let rho = DensityMatrix::random_mixed(n, &mut rng).unwrap();
        for q in 0..n {
            let fast = apply_single_qubit_kraus_matrix(rho.matrix(), n, q, &ch).unwrap();
            let mut slow = DMatrix::<Complex64>::zeros(dim, dim);
            for op in &ch.ops {
                let mut full = DMatrix::<Complex64>::zeros(dim, dim);
                for r in 0..dim {
                    for c in 0..dim {
                        let (rq, cq) = ((r >> q) & 1, (c >> q) & 1);
                        if (r & !(1 << q)) == (c & !(1 << q)) {
                            full[(r, c)] = op[(rq, cq)];
                        }
                    }
                }
                slow += &full * rho.matrix() * full.adjoint();
            }
            assert!((&fast - &slow).norm() < 1e-12);
        }
    }

    #[test]
    fn evolve_preserves_purity_without_noise() {
        use crate::circuit::build_mixing_circuit;
        let circuit = build_mixing_circuit(3, 4, 99);
        let rho = DensityMatrix::basis_state(3, 0).unwrap();
        let out = rho.evolve(&circuit).unwrap();
        assert!((out.purity() - 1.0).abs() < 1e-12);
        out.validate().unwrap();
    }

    #[test]
    fn evolve_identity_circuit_with_local_noise_closed_form() {
        use crate::circuit::{attach_noise, build_identity_circuit};
        let p_val = 0.9;
        for n in 1..=3usize {
            for depth in 0..=3usize {
                let circuit = attach_noise(
                    &build_identity_circuit(n, depth),
                    &NoiseSpec::DepolarizingLocal { p: p_val },
                )
                .unwrap();
                let rho = DensityMatrix::basis_state(n, 0).unwrap();
                let out = rho.evolve(&circuit).unwrap();
                let expected = ((1.0 + p_val.powi(2 * depth as i32)) / 2.0).powi(n as i32);
                assert!(
                    (out.purity() - expected).abs() < 1e-12,
                    "n={n} D={depth}: {} vs {expected}",
                    out.purity()
                );
            }
        }
    }

    #[test]
    fn fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.dmx");
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let rho = DensityMatrix::random_mixed(3, &mut rng).unwrap();
        save_fixture(&path, &rho).unwrap();
        let back = load_fixture(&path).unwrap();
        assert_eq!(back.num_qubits(), 3);
        assert!((back.matrix() - rho.matrix()).norm() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let dim = 4;
        // Non-unit trace.
        let m = DMatrix::<Complex64>::identity(dim, dim);
        assert!(DensityMatrix::new(2, m).is_err());
        // Non-Hermitian.
        let mut m = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(0.25, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(2, m).is_err());
        // Negative eigenvalue.
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(2, m).is_err());
    }
}
