//! Packed n-qubit Pauli strings with exact phase tracking.
//!
//! A Pauli string is stored as two bit masks `x` and `z` plus a phase
//! exponent `k`, representing `i^k * L_0 ⊗ L_1 ⊗ ... ⊗ L_{n-1}` where the
//! letter on qubit `j` is determined by the bit pair `(x_j, z_j)`:
//! `(0,0) = I`, `(1,0) = X`, `(1,1) = Y`, `(0,1) = Z`. Phases are restricted
//! to the group `{1, i, -1, -i}`, which is closed under multiplication and
//! Clifford conjugation. Masks are packed into machine words so strings with
//! thousands of qubits stay cheap.

use crate::error::{EmlabError, Result};
use num_complex::Complex64;
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// Number of 64-bit words needed for `n` bits.
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

pub(crate) fn get_bit(words: &[u64], j: usize) -> bool {
    (words[j / 64] >> (j % 64)) & 1 == 1
}

pub(crate) fn set_bit(words: &mut [u64], j: usize, value: bool) {
    let mask = 1u64 << (j % 64);
    if value {
        words[j / 64] |= mask;
    } else {
        words[j / 64] &= !mask;
    }
}

fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(&p, &q)| (p & q).count_ones()).sum()
}

/// An n-qubit Pauli operator `i^k * X^x Z^z` in letter form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    /// Exponent of `i` in the operator's phase, modulo 4.
    phase: u8,
}

impl PauliString {
    /// The identity string on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self {
            n,
            x: vec![0; w],
            z: vec![0; w],
            phase: 0,
        }
    }

    /// Builds a string from per-qubit letters, most significant qubit 0
    /// first, with phase exponent 0.
    pub fn from_letters(letters: &str) -> Result<Self> {
        letters.parse()
    }

    /// A single-letter string: the given letter on qubit `q`, identity
    /// elsewhere.
    pub fn single(n: usize, q: usize, letter: char) -> Result<Self> {
        if q >= n {
            return Err(EmlabError::InvalidParameter(format!(
                "qubit {q} out of range for {n} qubits"
            )));
        }
        let mut p = Self::identity(n);
        p.set_letter(q, letter)?;
        Ok(p)
    }

    /// Builds a Z-type string `Z^b` from the bits of `b` (bit `j` of `b`
    /// places a Z on qubit `j`). Requires `n <= 64`.
    pub fn z_string(n: usize, b: u64) -> Result<Self> {
        if n > 64 {
            return Err(EmlabError::InvalidParameter(format!(
                "z_string label form supports up to 64 qubits, got {n}"
            )));
        }
        if n < 64 && b >> n != 0 {
            return Err(EmlabError::InvalidParameter(format!(
                "label {b:#x} has bits beyond qubit {n}"
            )));
        }
        let mut p = Self::identity(n);
        if n > 0 {
            p.z[0] = b;
        }
        Ok(p)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Phase exponent `k` with the operator equal to `i^k` times the plain
    /// letter product.
    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    /// The phase as a complex number.
    pub fn phase_factor(&self) -> Complex64 {
        match self.phase {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Returns a copy with the phase exponent replaced.
    pub fn with_phase(&self, exponent: u8) -> Self {
        let mut p = self.clone();
        p.phase = exponent % 4;
        p
    }

    /// True when the operator is Hermitian (phase is `+1` or `-1`).
    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    pub fn x_bit(&self, j: usize) -> bool {
        get_bit(&self.x, j)
    }

    pub fn z_bit(&self, j: usize) -> bool {
        get_bit(&self.z, j)
    }

    pub(crate) fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub(crate) fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// The letter on qubit `j` as a character.
    pub fn letter(&self, j: usize) -> char {
        match (self.x_bit(j), self.z_bit(j)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    /// Overwrites the letter on qubit `j`.
    pub fn set_letter(&mut self, j: usize, letter: char) -> Result<()> {
        if j >= self.n {
            return Err(EmlabError::InvalidParameter(format!(
                "qubit {j} out of range for {} qubits",
                self.n
            )));
        }
        let (xb, zb) = match letter {
            'I' => (false, false),
            'X' => (true, false),
            'Y' => (true, true),
            'Z' => (false, true),
            other => {
                return Err(EmlabError::Parse(format!(
                    "unknown Pauli letter '{other}'"
                )))
            }
        };
        set_bit(&mut self.x, j, xb);
        set_bit(&mut self.z, j, zb);
        Ok(())
    }

    /// Number of qubits on which the string acts non-trivially.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(&a, &b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity_letters(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Exponent contribution of converting the letter form to `X^x Z^z`
    /// form: the letters equal `i^{|x AND z|} X^x Z^z`.
    pub(crate) fn xz_exponent(&self) -> u32 {
        popcount_and(&self.x, &self.z)
    }

    pub(crate) fn set_x_bit(&mut self, j: usize, value: bool) {
        set_bit(&mut self.x, j, value);
    }

    pub(crate) fn set_z_bit(&mut self, j: usize, value: bool) {
        set_bit(&mut self.z, j, value);
    }

    pub(crate) fn add_phase(&mut self, exponent: u8) {
        self.phase = (self.phase + exponent) % 4;
    }

    /// Replaces `self` with the operator product `self * other` in place,
    /// without allocating.
    pub fn mul_assign(&mut self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "pauli multiply: {} vs {} qubits",
                self.n, other.n
            )));
        }
        let mut k = u32::from(self.phase)
            + u32::from(other.phase)
            + self.xz_exponent()
            + other.xz_exponent()
            + 2 * popcount_and(&self.z, &other.x);
        for i in 0..self.x.len() {
            self.x[i] ^= other.x[i];
            self.z[i] ^= other.z[i];
        }
        k += 4 - self.xz_exponent() % 4;
        self.phase = (k % 4) as u8;
        Ok(())
    }

    /// Operator product `self * other` with exact phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        let mut out = self.clone();
        out.mul_assign(other)?;
        Ok(out)
    }

    /// Resets to the identity string with phase exponent 0, keeping the
    /// allocation.
    pub fn reset_to_identity(&mut self) {
        self.x.fill(0);
        self.z.fill(0);
        self.phase = 0;
    }

    /// Copies `other` into `self` (same qubit count required).
    pub fn copy_from(&mut self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "pauli copy: {} vs {} qubits",
                self.n, other.n
            )));
        }
        self.x.copy_from_slice(&other.x);
        self.z.copy_from_slice(&other.z);
        self.phase = other.phase;
        Ok(())
    }

    /// True when the two strings commute as operators.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        if self.n != other.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "pauli commutes: {} vs {} qubits",
                self.n, other.n
            )));
        }
        let flips = popcount_and(&self.x, &other.z) + popcount_and(&self.z, &other.x);
        Ok(flips % 2 == 0)
    }

    /// Trace of the operator product, `Tr(self * other)`.
    ///
    /// This is `i^k * 2^n` when the letter masks agree (the product is then a
    /// phase times identity) and zero otherwise.
    pub fn trace_product(&self, other: &PauliString) -> Result<Complex64> {
        if self.n != other.n {
            return Err(EmlabError::DimensionMismatch(format!(
                "pauli trace_product: {} vs {} qubits",
                self.n, other.n
            )));
        }
        if self.x != other.x || self.z != other.z {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let product = self.multiply(other)?;
        let dim = 2f64.powi(self.n as i32);
        Ok(product.phase_factor() * dim)
    }

    /// Encodes the letters as an integer with two bits per qubit
    /// (digit `x_j + 2 z_j`, qubit 0 least significant). Requires `n <= 31`.
    /// The phase is ignored.
    pub fn letter_index(&self) -> Result<u64> {
        if self.n > 31 {
            return Err(EmlabError::InvalidParameter(format!(
                "letter_index supports up to 31 qubits, got {}",
                self.n
            )));
        }
        let mut idx = 0u64;
        for j in (0..self.n).rev() {
            let digit = u64::from(self.x_bit(j)) + 2 * u64::from(self.z_bit(j));
            idx = idx * 4 + digit;
        }
        Ok(idx)
    }

    /// Inverse of [`letter_index`](Self::letter_index): phase exponent 0.
    pub fn from_letter_index(n: usize, mut idx: u64) -> Result<Self> {
        if n > 31 {
            return Err(EmlabError::InvalidParameter(format!(
                "from_letter_index supports up to 31 qubits, got {n}"
            )));
        }
        let mut p = Self::identity(n);
        for j in 0..n {
            let digit = idx % 4;
            idx /= 4;
            set_bit(&mut p.x, j, digit & 1 == 1);
            set_bit(&mut p.z, j, digit & 2 == 2);
        }
        if idx != 0 {
            return Err(EmlabError::InvalidParameter(
                "letter index out of range".into(),
            ));
        }
        Ok(p)
    }

    /// A uniformly random string over all `4^n` letter combinations, phase
    /// exponent 0.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut p = Self::identity(n);
        for j in 0..n {
            let digit: u8 = rng.gen_range(0..4);
            set_bit(&mut p.x, j, digit & 1 == 1);
            set_bit(&mut p.z, j, digit & 2 == 2);
        }
        p
    }

    /// A uniformly random non-identity string, phase exponent 0.
    pub fn random_nonidentity<R: Rng>(n: usize, rng: &mut R) -> Self {
        loop {
            let p = Self::random(n, rng);
            if !p.is_identity_letters() {
                return p;
            }
        }
    }

    /// Canonical byte serialization of masks and phase, for hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 * self.x.len() + 9);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for &w in &self.x {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &w in &self.z {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.push(self.phase);
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        for j in 0..self.n {
            write!(f, "{}", self.letter(j))?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = EmlabError;

    /// Parses the text form: an optional phase prefix (`+`, `-`, `i`, `-i`,
    /// `+i`) followed by one letter per qubit, e.g. `-iXZY`.
    fn from_str(s: &str) -> Result<Self> {
        let (phase, letters) = if let Some(rest) = s.strip_prefix("-i") {
            (3u8, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        if letters.is_empty() {
            return Err(EmlabError::Parse(format!(
                "pauli string '{s}' has no letters"
            )));
        }
        let mut p = PauliString::identity(letters.chars().count());
        for (j, c) in letters.chars().enumerate() {
            p.set_letter(j, c)?;
        }
        p.phase = phase;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_multiplication_table() {
        // XZ = -iY, ZX = iY, XY = iZ, YX = -iZ, YZ = iX, ZY = -iX.
        assert_eq!(p("X").multiply(&p("Z")).unwrap().to_string(), "-iY");
        assert_eq!(p("Z").multiply(&p("X")).unwrap().to_string(), "iY");
        assert_eq!(p("X").multiply(&p("Y")).unwrap().to_string(), "iZ");
        assert_eq!(p("Y").multiply(&p("X")).unwrap().to_string(), "-iZ");
        assert_eq!(p("Y").multiply(&p("Z")).unwrap().to_string(), "iX");
        assert_eq!(p("Z").multiply(&p("Y")).unwrap().to_string(), "-iX");
        for letter in ["I", "X", "Y", "Z"] {
            let q = p(letter);
            assert_eq!(q.multiply(&q).unwrap().to_string(), "I");
        }
    }

    #[test]
    fn phases_compose_mod_four() {
        // (iX)(iX) = -I, and (-iY)(iY) = I.
        assert_eq!(p("iX").multiply(&p("iX")).unwrap().to_string(), "-I");
        assert_eq!(p("-iY").multiply(&p("iY")).unwrap().to_string(), "I");
        // i^4 wraps to 1.
        let four_i = p("iI")
            .multiply(&p("iI"))
            .unwrap()
            .multiply(&p("iI"))
            .unwrap()
            .multiply(&p("iI"))
            .unwrap();
        assert_eq!(four_i.to_string(), "I");
    }

    #[test]
    fn weight_counts_nonidentity_sites() {
        assert_eq!(p("IIII").weight(), 0);
        assert_eq!(p("XIZI").weight(), 2);
        assert_eq!(p("XYZ").weight(), 3);
    }

    #[test]
    fn commutation_matches_letterwise_rule() {
        // Two strings commute iff they anticommute on an even number of
        // sites.
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(!p("XI").commutes(&p("ZI")).unwrap());
        assert!(p("XI").commutes(&p("IZ")).unwrap());
        assert!(p("XYZ").commutes(&p("XYZ")).unwrap());
    }

    #[test]
    fn commutation_consistent_with_products() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..300 {
            let a = PauliString::random(4, &mut rng);
            let b = PauliString::random(4, &mut rng);
            let ab = a.multiply(&b).unwrap();
            let ba = b.multiply(&a).unwrap();
            if a.commutes(&b).unwrap() {
                assert_eq!(ab, ba);
            } else {
                assert_eq!(ab.phase_exponent(), (ba.phase_exponent() + 2) % 4);
                assert_eq!(ab.with_phase(0), ba.with_phase(0));
            }
        }
    }

    #[test]
    fn trace_product_orthogonality_single_qubit() {
        let dim = Complex64::new(2.0, 0.0);
        for a in ["I", "X", "Y", "Z"] {
            for b in ["I", "X", "Y", "Z"] {
                let t = p(a).trace_product(&p(b)).unwrap();
                if a == b {
                    assert_eq!(t, dim);
                } else {
                    assert_eq!(t, Complex64::new(0.0, 0.0));
                }
            }
        }
        // Phases carry through: Tr((iX)(X)) = 2i.
        let t = p("iX").trace_product(&p("X")).unwrap();
        assert!((t - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn parse_display_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mut q = PauliString::random(6, &mut rng);
            q = q.with_phase(rng.gen_range(0..4));
            let text = q.to_string();
            let back: PauliString = text.parse().unwrap();
            assert_eq!(q, back, "round trip failed for {text}");
        }
        assert_eq!(p("-iXZY").to_string(), "-iXZY");
        assert_eq!(p("+ZZ"), p("ZZ"));
        assert_eq!(p("+iX"), p("iX"));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("".parse::<PauliString>().is_err());
        assert!("-".parse::<PauliString>().is_err());
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn letter_index_round_trip_exhaustive_n2() {
        for idx in 0..16u64 {
            let q = PauliString::from_letter_index(2, idx).unwrap();
            assert_eq!(q.letter_index().unwrap(), idx);
        }
        // Digit convention: qubit 0 least significant, X=1, Z=2, Y=3.
        assert_eq!(p("XI").letter_index().unwrap(), 1);
        assert_eq!(p("IZ").letter_index().unwrap(), 8);
        assert_eq!(p("YI").letter_index().unwrap(), 3);
    }

    #[test]
    fn z_string_places_z_on_set_bits() {
        let q = PauliString::z_string(4, 0b1010).unwrap();
        assert_eq!(q.to_string(), "IZIZ");
        assert!(PauliString::z_string(2, 0b100).is_err());
    }

    #[test]
    fn wide_strings_use_multiple_words() {
        let n = 200;
        let mut q = PauliString::identity(n);
        q.set_letter(0, 'X').unwrap();
        q.set_letter(130, 'Y').unwrap();
        q.set_letter(199, 'Z').unwrap();
        assert_eq!(q.weight(), 3);
        let r = q.multiply(&q).unwrap();
        assert!(r.is_identity_letters());
        assert_eq!(r.phase_exponent(), 0);
    }

    #[test]
    fn random_nonidentity_never_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert!(!PauliString::random_nonidentity(1, &mut rng).is_identity_letters());
        }
    }
}
