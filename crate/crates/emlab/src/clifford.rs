//! Clifford tableaux: conjugation of Pauli strings, gate and circuit
//! composition, exact uniform sampling over the Clifford group, and a
//! statistical Pauli-mixing verifier.
//!
//! A tableau stores the images of the generators under conjugation: row `i`
//! is `U X_i U†` and row `n + i` is `U Z_i U†`, each a [`PauliString`] whose
//! phase is `+1` or `-1`. This determines the conjugation action of `U` on
//! every Pauli operator exactly.

use crate::error::{EmlabError, Result};
use crate::pauli::PauliString;
use crate::stats::{chi_square_critical, chi_square_uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Conjugation table of an n-qubit Clifford unitary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordTableau {
    n: usize,
    /// Rows 0..n are images of X_i, rows n..2n are images of Z_i.
    rows: Vec<PauliString>,
}

impl CliffordTableau {
    /// The identity circuit's tableau.
    pub fn identity(n: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            rows.push(PauliString::single(n, i, 'X').expect("in range"));
        }
        for i in 0..n {
            rows.push(PauliString::single(n, i, 'Z').expect("in range"));
        }
        Self { n, rows }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Image of `X_i` under conjugation.
    pub fn x_image(&self, i: usize) -> &PauliString {
        &self.rows[i]
    }

    /// Image of `Z_i` under conjugation.
    pub fn z_image(&self, i: usize) -> &PauliString {
        &self.rows[self.n + i]
    }

    /// Checks the symplectic and phase invariants: generator images must
    /// reproduce the generator commutation pattern, and every row phase must
    /// be real.
    pub fn is_valid(&self) -> bool {
        if self.rows.len() != 2 * self.n {
            return false;
        }
        for row in &self.rows {
            if row.num_qubits() != self.n || row.phase_exponent() % 2 != 0 {
                return false;
            }
            if row.is_identity_letters() {
                return false;
            }
        }
        for i in 0..2 * self.n {
            for j in (i + 1)..2 * self.n {
                let should_anticommute = j == i + self.n;
                let commute = self.rows[i]
                    .commutes(&self.rows[j])
                    .expect("row sizes match");
                if commute == should_anticommute {
                    return false;
                }
            }
        }
        true
    }

    /// Conjugates a Pauli string: returns `U P U†`.
    pub fn conjugate(&self, p: &PauliString) -> Result<PauliString> {
        let mut acc = PauliString::identity(self.n);
        self.conjugate_into(p, &mut acc)?;
        Ok(acc)
    }

    /// Conjugation that writes the result into a caller-provided buffer,
    /// avoiding allocation in hot loops.
    pub fn conjugate_into(&self, p: &PauliString, out: &mut PauliString) -> Result<()> {
        if p.num_qubits() != self.n || out.num_qubits() != self.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "conjugate: tableau on {} qubits, input on {}",
                self.n,
                p.num_qubits()
            )));
        }
        // Write P as i^(k+c) X^x Z^z and push the conjugation through the
        // generator images; the X-part rows commute among themselves, as do
        // the Z-part rows, so only the X-before-Z order matters.
        out.reset_to_identity();
        out.add_phase(((u32::from(p.phase_exponent()) + p.xz_exponent()) % 4) as u8);
        for j in 0..self.n {
            if p.x_bit(j) {
                out.mul_assign(&self.rows[j])?;
            }
        }
        for j in 0..self.n {
            if p.z_bit(j) {
                out.mul_assign(&self.rows[self.n + j])?;
            }
        }
        Ok(())
    }

    /// Appends a Hadamard on qubit `q`: the tableau becomes `H_q * U`.
    pub fn append_h(&mut self, q: usize) {
        for row in &mut self.rows {
            let xb = row.x_bit(q);
            let zb = row.z_bit(q);
            if xb && zb {
                row.add_phase(2);
            }
            row.set_x_bit(q, zb);
            row.set_z_bit(q, xb);
        }
    }

    /// Appends a phase gate S on qubit `q`.
    pub fn append_s(&mut self, q: usize) {
        for row in &mut self.rows {
            let xb = row.x_bit(q);
            let zb = row.z_bit(q);
            if xb && zb {
                row.add_phase(2);
            }
            row.set_z_bit(q, zb ^ xb);
        }
    }

    /// Appends a CNOT with control `c` and target `t`.
    pub fn append_cx(&mut self, c: usize, t: usize) {
        assert_ne!(c, t, "CNOT control and target must differ");
        for row in &mut self.rows {
            let xc = row.x_bit(c);
            let zc = row.z_bit(c);
            let xt = row.x_bit(t);
            let zt = row.z_bit(t);
            if xc && zt && (xt == zc) {
                row.add_phase(2);
            }
            row.set_x_bit(t, xt ^ xc);
            row.set_z_bit(c, zc ^ zt);
        }
    }

    /// Appends a Pauli X on qubit `q`.
    pub fn append_x(&mut self, q: usize) {
        for row in &mut self.rows {
            if row.z_bit(q) {
                row.add_phase(2);
            }
        }
    }

    /// Appends a Pauli Z on qubit `q`.
    pub fn append_z(&mut self, q: usize) {
        for row in &mut self.rows {
            if row.x_bit(q) {
                row.add_phase(2);
            }
        }
    }

    /// Composition `after ∘ before` (run `before` first).
    pub fn compose(after: &CliffordTableau, before: &CliffordTableau) -> Result<CliffordTableau> {
        if after.n != before.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "compose: {} vs {} qubits",
                after.n, before.n
            )));
        }
        let rows = before
            .rows
            .iter()
            .map(|r| after.conjugate(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliffordTableau { n: after.n, rows })
    }

    /// Embeds a k-qubit tableau into `n_total` qubits, acting on the listed
    /// qubits (in order) and as the identity elsewhere.
    pub fn embed(&self, n_total: usize, qubits: &[usize]) -> Result<CliffordTableau> {
        if qubits.len() != self.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "embed: tableau on {} qubits, {} target positions",
                self.n,
                qubits.len()
            )));
        }
        let mut seen = vec![false; n_total];
        for &q in qubits {
            if q >= n_total {
                return Err(EmlabError::InvalidParameter(format!(
                    "embed: qubit {q} out of range for {n_total}"
                )));
            }
            if seen[q] {
                return Err(EmlabError::InvalidParameter(format!(
                    "embed: duplicate qubit {q}"
                )));
            }
            seen[q] = true;
        }
        let expand = |small: &PauliString| -> PauliString {
            let mut big = PauliString::identity(n_total);
            for (local, &global) in qubits.iter().enumerate() {
                big.set_x_bit(global, small.x_bit(local));
                big.set_z_bit(global, small.z_bit(local));
            }
            big.add_phase(small.phase_exponent());
            big
        };
        let mut out = CliffordTableau::identity(n_total);
        for (local, &global) in qubits.iter().enumerate() {
            out.rows[global] = expand(self.x_image(local));
            out.rows[n_total + global] = expand(self.z_image(local));
        }
        Ok(out)
    }

    /// Canonical byte serialization of all rows, for hashing and distinctness
    /// counting.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for row in &self.rows {
            out.extend_from_slice(&row.canonical_bytes());
        }
        out
    }

    /// Draws a tableau uniformly at random from the n-qubit Clifford group.
    ///
    /// Uses the canonical-form construction: a quantum Mallows sample fixes
    /// the Hadamard layer and qubit permutation, two random
    /// symmetric/unit-triangular factor pairs fix the Hadamard-free parts,
    /// and 2n random bits fix the generator signs. Every group element
    /// corresponds to exactly one draw, so the distribution is exactly
    /// uniform.
    pub fn sample_uniform<R: Rng>(n: usize, rng: &mut R) -> Self {
        assert!(n >= 1, "sample_uniform needs at least one qubit");
        let (had, perm) = sample_qmallows(n, rng);

        let mut gamma1 = Gf2Mat::zeros(n, n);
        let mut gamma2 = Gf2Mat::zeros(n, n);
        let mut delta1 = Gf2Mat::identity(n);
        let mut delta2 = Gf2Mat::identity(n);
        for i in 0..n {
            gamma1.set(i, i, rng.gen::<bool>());
        }
        for i in 0..n {
            gamma2.set(i, i, rng.gen::<bool>());
        }
        fill_tril(&mut gamma1, rng, true);
        fill_tril(&mut gamma2, rng, true);
        fill_tril(&mut delta1, rng, false);
        fill_tril(&mut delta2, rng, false);

        let table1 = canonical_table(&delta1, &gamma1);
        let table2 = canonical_table(&delta2, &gamma2);

        // Permute the generator labels of the second factor.
        let mut table = Gf2Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            table.data[i] = table2.data[perm[i]].clone();
            table.data[n + i] = table2.data[n + perm[i]].clone();
        }
        // Hadamard layer: swap the X and Z rows of flagged qubits.
        for i in 0..n {
            if had[i] {
                table.data.swap(i, n + i);
            }
        }
        let full = table1.mul(&table);

        let mut rows = Vec::with_capacity(2 * n);
        for r in 0..2 * n {
            let mut p = PauliString::identity(n);
            for j in 0..n {
                p.set_x_bit(j, full.get(r, j));
                p.set_z_bit(j, full.get(r, n + j));
            }
            if rng.gen::<bool>() {
                p.add_phase(2);
            }
            rows.push(p);
        }
        CliffordTableau { n, rows }
    }
}

/// Samples the Hadamard layer and qubit permutation of the canonical form
/// from the quantum Mallows distribution.
fn sample_qmallows<R: Rng>(n: usize, rng: &mut R) -> (Vec<bool>, Vec<usize>) {
    let mut had = vec![false; n];
    let mut perm = vec![0usize; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let m = n - i;
        let eps = 0.25f64.powi(m as i32);
        let r: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let index = -((r + (1.0 - r) * eps).log2().ceil()) as i64;
        let index = index.clamp(0, 2 * m as i64 - 1) as usize;
        had[i] = index < m;
        let k = if index < m { index } else { 2 * m - index - 1 };
        perm[i] = remaining.remove(k);
    }
    (had, perm)
}

/// Fills the strictly-lower triangle with random bits; optionally mirrors to
/// the upper triangle.
fn fill_tril<R: Rng>(mat: &mut Gf2Mat, rng: &mut R, symmetric: bool) {
    let n = mat.rows();
    for i in 0..n {
        for j in 0..i {
            let b = rng.gen::<bool>();
            mat.set(i, j, b);
            if symmetric {
                mat.set(j, i, b);
            }
        }
    }
}

/// Builds the symplectic block matrix `[[Δ, 0], [ΓΔ, (Δ^{-1})^T]]` of a
/// Hadamard-free canonical factor.
fn canonical_table(delta: &Gf2Mat, gamma: &Gf2Mat) -> Gf2Mat {
    let n = delta.rows();
    let prod = gamma.mul(delta);
    let inv_t = delta.inverse_unit_lower().transpose();
    let mut out = Gf2Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, delta.get(i, j));
            out.set(n + i, j, prod.get(i, j));
            out.set(n + i, n + j, inv_t.get(i, j));
        }
    }
    out
}

/// Dense bit matrix over GF(2) with word-packed rows.
struct Gf2Mat {
    cols: usize,
    data: Vec<Vec<u64>>,
}

impl Gf2Mat {
    fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        Self {
            cols,
            data: vec![vec![0u64; words]; rows],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    fn rows(&self) -> usize {
        self.data.len()
    }

    fn get(&self, i: usize, j: usize) -> bool {
        (self.data[i][j / 64] >> (j % 64)) & 1 == 1
    }

    fn set(&mut self, i: usize, j: usize, v: bool) {
        let mask = 1u64 << (j % 64);
        if v {
            self.data[i][j / 64] |= mask;
        } else {
            self.data[i][j / 64] &= !mask;
        }
    }

    /// Matrix product over GF(2).
    fn mul(&self, other: &Gf2Mat) -> Gf2Mat {
        let mut out = Gf2Mat::zeros(self.rows(), other.cols);
        for i in 0..self.rows() {
            for k in 0..other.rows() {
                if self.get(i, k) {
                    let (row_i, row_k) = (&mut out.data[i], &other.data[k]);
                    for (a, b) in row_i.iter_mut().zip(row_k) {
                        *a ^= b;
                    }
                }
            }
        }
        out
    }

    fn transpose(&self) -> Gf2Mat {
        let mut out = Gf2Mat::zeros(self.cols, self.rows());
        for i in 0..self.rows() {
            for j in 0..self.cols {
                if self.get(i, j) {
                    out.set(j, i, true);
                }
            }
        }
        out
    }

    /// Inverse of a unit lower-triangular matrix by forward substitution.
    fn inverse_unit_lower(&self) -> Gf2Mat {
        let n = self.rows();
        let mut inv = Gf2Mat::identity(n);
        for j in 0..n {
            for i in (j + 1)..n {
                let mut s = false;
                for k in j..i {
                    s ^= self.get(i, k) & inv.get(k, j);
                }
                inv.set(i, j, s);
            }
        }
        inv
    }
}

/// Outcome of the statistical Pauli-mixing check.
#[derive(Clone, Debug)]
pub struct MixingReport {
    pub n: usize,
    pub trials: u64,
    /// Counts of conjugated images indexed by letter index.
    pub histogram: Vec<u64>,
    /// True when the input string was the identity.
    pub identity_input: bool,
    /// Identity input: all mass must stay on the identity.
    pub point_mass_ok: bool,
    /// Non-identity input: chi-square of the image histogram against the
    /// uniform distribution on non-identity strings.
    pub chi_square: f64,
    pub dof: usize,
    pub chi_square_critical: f64,
    /// Largest per-cell deviation in binomial standard deviations.
    pub max_cell_sigma: f64,
    /// Overall verdict at the requested significance.
    pub uniform_ok: bool,
}

/// Estimates the conjugation image distribution of `p` under uniformly random
/// Clifford tableaux and tests it against the Pauli-mixing property: the
/// identity maps to itself, and any other string maps to a uniformly random
/// non-identity string.
///
/// `alpha` is the chi-square significance level. Requires `n <= 10` so the
/// histogram over all `4^n` letters stays small.
pub fn verify_pauli_mixing(
    p: &PauliString,
    trials: u64,
    seed: u64,
    alpha: f64,
) -> Result<MixingReport> {
    let n = p.num_qubits();
    if n == 0 || n > 10 {
        return Err(EmlabError::InvalidParameter(format!(
            "verify_pauli_mixing supports 1..=10 qubits, got {n}"
        )));
    }
    if trials == 0 {
        return Err(EmlabError::InvalidParameter("zero trials".into()));
    }
    let cells = 4usize.pow(n as u32);
    let mut histogram = vec![0u64; cells];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut image = PauliString::identity(n);
    for _ in 0..trials {
        let t = CliffordTableau::sample_uniform(n, &mut rng);
        t.conjugate_into(p, &mut image)?;
        histogram[image.letter_index()? as usize] += 1;
    }

    let identity_input = p.is_identity_letters();
    if identity_input {
        let point_mass_ok = histogram[0] == trials;
        return Ok(MixingReport {
            n,
            trials,
            histogram,
            identity_input,
            point_mass_ok,
            chi_square: 0.0,
            dof: 0,
            chi_square_critical: 0.0,
            max_cell_sigma: 0.0,
            uniform_ok: point_mass_ok,
        });
    }

    // Conjugation preserves non-identity, so cell 0 must stay empty.
    let nonidentity = &histogram[1..];
    let dof = cells - 2;
    let chi_square = chi_square_uniform(nonidentity, trials);
    let critical = chi_square_critical(dof, alpha)?;
    let q = 1.0 / (cells - 1) as f64;
    let sd = (trials as f64 * q * (1.0 - q)).sqrt();
    let expected = trials as f64 * q;
    let max_cell_sigma = nonidentity
        .iter()
        .map(|&c| (c as f64 - expected).abs() / sd)
        .fold(0.0f64, f64::max);
    let uniform_ok = histogram[0] == 0 && chi_square < critical;
    Ok(MixingReport {
        n,
        trials,
        histogram,
        identity_input,
        point_mass_ok: true,
        chi_square,
        dof,
        chi_square_critical: critical,
        max_cell_sigma,
        uniform_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn cx_tableau() -> CliffordTableau {
        let mut t = CliffordTableau::identity(2);
        t.append_cx(0, 1);
        t
    }

    #[test]
    fn identity_tableau_fixes_everything() {
        let t = CliffordTableau::identity(3);
        assert!(t.is_valid());
        for s in ["XIZ", "iYYY", "-ZZZ"] {
            assert_eq!(t.conjugate(&p(s)).unwrap(), p(s));
        }
    }

    #[test]
    fn cnot_conjugation_known_images() {
        let t = cx_tableau();
        assert!(t.is_valid());
        assert_eq!(t.conjugate(&p("XI")).unwrap(), p("XX"));
        assert_eq!(t.conjugate(&p("IX")).unwrap(), p("IX"));
        assert_eq!(t.conjugate(&p("ZI")).unwrap(), p("ZI"));
        assert_eq!(t.conjugate(&p("IZ")).unwrap(), p("ZZ"));
        assert_eq!(t.conjugate(&p("XZ")).unwrap(), p("-YY"));
        assert_eq!(t.conjugate(&p("YY")).unwrap(), p("-XZ"));
    }

    #[test]
    fn hadamard_and_s_gate_images() {
        let mut h = CliffordTableau::identity(1);
        h.append_h(0);
        assert_eq!(h.conjugate(&p("X")).unwrap(), p("Z"));
        assert_eq!(h.conjugate(&p("Z")).unwrap(), p("X"));
        assert_eq!(h.conjugate(&p("Y")).unwrap(), p("-Y"));

        let mut s = CliffordTableau::identity(1);
        s.append_s(0);
        assert_eq!(s.conjugate(&p("X")).unwrap(), p("Y"));
        assert_eq!(s.conjugate(&p("Y")).unwrap(), p("-X"));
        assert_eq!(s.conjugate(&p("Z")).unwrap(), p("Z"));
    }

    #[test]
    fn pauli_gate_appends_flip_signs() {
        let mut t = CliffordTableau::identity(1);
        t.append_x(0);
        assert_eq!(t.conjugate(&p("Z")).unwrap(), p("-Z"));
        assert_eq!(t.conjugate(&p("X")).unwrap(), p("X"));
        let mut t2 = CliffordTableau::identity(1);
        t2.append_z(0);
        assert_eq!(t2.conjugate(&p("X")).unwrap(), p("-X"));
    }

    #[test]
    fn conjugation_preserves_phase_structure() {
        // U (iP) U† = i (U P U†), and conjugating a Hermitian string stays
        // Hermitian.
        let t = cx_tableau();
        let img = t.conjugate(&p("iXZ")).unwrap();
        assert_eq!(img, p("-iYY"));
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..100 {
            let u = CliffordTableau::sample_uniform(3, &mut rng);
            let q = PauliString::random(3, &mut rng);
            assert!(u.conjugate(&q).unwrap().is_hermitian());
        }
    }

    #[test]
    fn compose_matches_sequential_conjugation() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..50 {
            let a = CliffordTableau::sample_uniform(3, &mut rng);
            let b = CliffordTableau::sample_uniform(3, &mut rng);
            let ab = CliffordTableau::compose(&a, &b).unwrap();
            assert!(ab.is_valid());
            let q = PauliString::random(3, &mut rng);
            let direct = ab.conjugate(&q).unwrap();
            let sequential = a.conjugate(&b.conjugate(&q).unwrap()).unwrap();
            assert_eq!(direct, sequential);
        }
    }

    #[test]
    fn embed_acts_only_on_selected_qubits() {
        let cx = cx_tableau();
        let t = cx.embed(4, &[2, 0]).unwrap();
        assert!(t.is_valid());
        // Control is qubit 2, target qubit 0.
        assert_eq!(t.conjugate(&p("IIXI")).unwrap(), p("XIXI"));
        assert_eq!(t.conjugate(&p("ZIII")).unwrap(), p("ZIZI"));
        assert_eq!(t.conjugate(&p("IXII")).unwrap(), p("IXII"));
        assert_eq!(t.conjugate(&p("IIIZ")).unwrap(), p("IIIZ"));
        assert!(cx.embed(4, &[1, 1]).is_err());
        assert!(cx.embed(4, &[4, 0]).is_err());
    }

    #[test]
    fn sampled_tableaux_are_valid_and_deterministic() {
        use rand::SeedableRng;
        for n in 1..=5 {
            let mut rng = ChaCha12Rng::seed_from_u64(100 + n as u64);
            for _ in 0..40 {
                assert!(CliffordTableau::sample_uniform(n, &mut rng).is_valid());
            }
        }
        let mut r1 = ChaCha12Rng::seed_from_u64(7);
        let mut r2 = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = CliffordTableau::sample_uniform(4, &mut r1);
            let b = CliffordTableau::sample_uniform(4, &mut r2);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn conjugation_is_bijective_on_letters_n2() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let t = CliffordTableau::sample_uniform(2, &mut rng);
            let mut seen = [false; 16];
            for idx in 0..16u64 {
                let q = PauliString::from_letter_index(2, idx).unwrap();
                let img = t.conjugate(&q).unwrap();
                let out = img.letter_index().unwrap() as usize;
                assert!(!seen[out], "image collision");
                seen[out] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn conjugation_preserves_commutation_exhaustive_n2() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        for _ in 0..10 {
            let t = CliffordTableau::sample_uniform(2, &mut rng);
            for a in 0..16u64 {
                for b in 0..16u64 {
                    let pa = PauliString::from_letter_index(2, a).unwrap();
                    let pb = PauliString::from_letter_index(2, b).unwrap();
                    let before = pa.commutes(&pb).unwrap();
                    let after = t
                        .conjugate(&pa)
                        .unwrap()
                        .commutes(&t.conjugate(&pb).unwrap())
                        .unwrap();
                    assert_eq!(before, after);
                }
            }
        }
    }

    #[test]
    fn single_qubit_sampler_is_uniform_over_24_elements() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let trials = 100_000u64;
        let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
        for _ in 0..trials {
            let t = CliffordTableau::sample_uniform(1, &mut rng);
            *counts.entry(t.canonical_bytes()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 24, "single-qubit Clifford group has order 24");
        let expected = trials as f64 / 24.0;
        let sd = (trials as f64 * (1.0 / 24.0) * (23.0 / 24.0)).sqrt();
        for (_, &c) in counts.iter() {
            assert!(
                (c as f64 - expected).abs() < 3.0 * sd,
                "count {c} deviates from {expected} by more than 3 sigma"
            );
        }
    }

    #[test]
    fn two_qubit_sampler_chi_square_uniform() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let trials = 1_000_000u64;
        let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
        for _ in 0..trials {
            let t = CliffordTableau::sample_uniform(2, &mut rng);
            *counts.entry(t.canonical_bytes()).or_insert(0) += 1;
        }
        let order = 11_520usize;
        assert_eq!(counts.len(), order, "two-qubit Clifford group has order 11520");
        let expected = trials as f64 / order as f64;
        let chi2: f64 = counts
            .values()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let critical = chi_square_critical(order - 1, 0.01).unwrap();
        assert!(
            chi2 < critical,
            "chi-square {chi2:.1} exceeds 1% critical value {critical:.1}"
        );
    }

    #[test]
    fn mixing_identity_input_is_point_mass() {
        let report = verify_pauli_mixing(&p("II"), 2000, 5, 0.01).unwrap();
        assert!(report.identity_input);
        assert!(report.point_mass_ok);
        assert!(report.uniform_ok);
    }

    #[test]
    fn mixing_single_qubit_z_uniform_over_xyz() {
        let report = verify_pauli_mixing(&p("Z"), 30_000, 11, 0.01).unwrap();
        assert!(report.uniform_ok, "chi-square {}", report.chi_square);
        assert_eq!(report.histogram[0], 0);
        // All three non-identity cells within 3 sigma of uniform.
        assert!(report.max_cell_sigma < 3.0, "max sigma {}", report.max_cell_sigma);
    }

    #[test]
    fn mixing_two_qubit_uniform_within_three_sigma_per_cell() {
        let report = verify_pauli_mixing(&p("XI"), 1_000_000, 13, 0.01).unwrap();
        assert!(report.uniform_ok, "chi-square {}", report.chi_square);
        assert!(
            report.max_cell_sigma < 3.0,
            "cell deviation {} sigma",
            report.max_cell_sigma
        );
    }
}
