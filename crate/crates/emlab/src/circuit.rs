//! Layered circuit families with interleaved noise.
//!
//! A circuit is a list of layers; each layer is a unitary (identity or a
//! Clifford tableau) followed by an optional noise channel. Evolution
//! applies layer 0 first. The same description drives both the dense oracle
//! and the Pauli-path engine.

use crate::clifford::CliffordTableau;
use crate::error::{EmlabError, Result};
use crate::noise::NoiseSpec;
use crate::pauli::PauliString;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// The unitary part of one layer.
#[derive(Clone, Debug)]
pub enum UnitaryLayer {
    /// No gate; used by the identity family where noise acts alone.
    Identity,
    /// A Clifford unitary given by its tableau.
    Tableau(CliffordTableau),
}

/// One circuit layer: unitary first, then noise (if present).
#[derive(Clone, Debug)]
pub struct CircuitLayer {
    pub unitary: UnitaryLayer,
    pub noise: Option<NoiseSpec>,
}

/// A depth-D layered circuit on `n` qubits.
#[derive(Clone, Debug)]
pub struct LayeredCircuit {
    pub n: usize,
    pub layers: Vec<CircuitLayer>,
}

impl LayeredCircuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Composes the unitary parts into a single tableau (layer 0 innermost).
    pub fn total_tableau(&self) -> Result<CliffordTableau> {
        let mut acc = CliffordTableau::identity(self.n);
        for layer in &self.layers {
            if let UnitaryLayer::Tableau(t) = &layer.unitary {
                acc = CliffordTableau::compose(t, &acc)?;
            }
        }
        Ok(acc)
    }

    /// Content digest over the structure: register size, layer unitaries,
    /// and noise entries. Stable across runs for the same build inputs.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n as u64).to_le_bytes());
        hasher.update((self.layers.len() as u64).to_le_bytes());
        for layer in &self.layers {
            match &layer.unitary {
                UnitaryLayer::Identity => hasher.update([0u8]),
                UnitaryLayer::Tableau(t) => {
                    hasher.update([1u8]);
                    hasher.update(t.canonical_bytes());
                }
            }
            match &layer.noise {
                None => hasher.update([0u8]),
                Some(spec) => {
                    hasher.update([1u8]);
                    hasher.update(
                        serde_json::to_vec(spec).expect("noise spec serializes"),
                    );
                }
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Depth-D identity circuit: no gates, so attached noise acts alone each
/// layer.
pub fn build_identity_circuit(n: usize, depth: usize) -> LayeredCircuit {
    let layers = (0..depth)
        .map(|_| CircuitLayer {
            unitary: UnitaryLayer::Identity,
            noise: None,
        })
        .collect();
    LayeredCircuit { n, layers }
}

/// Depth-D mixing circuit: each layer is an independent uniformly random
/// Clifford on the whole register.
pub fn build_mixing_circuit(n: usize, depth: usize, seed: u64) -> LayeredCircuit {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let layers = (0..depth)
        .map(|_| CircuitLayer {
            unitary: UnitaryLayer::Tableau(CliffordTableau::sample_uniform(n, &mut rng)),
            noise: None,
        })
        .collect();
    LayeredCircuit { n, layers }
}

/// Depth-D brickwork circuit: alternating even/odd nearest-neighbour pairs,
/// each pair getting an independent uniformly random two-qubit Clifford.
/// Qubits without a partner in a layer are left untouched.
pub fn build_brickwork_circuit(n: usize, depth: usize, seed: u64) -> Result<LayeredCircuit> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth);
    for t in 0..depth {
        let offset = t % 2;
        let mut tableau = CliffordTableau::identity(n);
        let mut q = offset;
        while q + 1 < n {
            let block = CliffordTableau::sample_uniform(2, &mut rng);
            let embedded = block.embed(n, &[q, q + 1])?;
            tableau = CliffordTableau::compose(&embedded, &tableau)?;
            q += 2;
        }
        layers.push(CircuitLayer {
            unitary: UnitaryLayer::Tableau(tableau),
            noise: None,
        });
    }
    Ok(LayeredCircuit { n, layers })
}

/// Parity-sampling circuit on `n + 1` qubits for a secret `s`: Hadamards put
/// the data register in uniform superposition, then each data qubit `i` with
/// `s_i = 1` controls a CX into the readout qubit `n`. Measuring the output
/// of `|0...0>` in the computational basis yields a uniform `x` with the
/// parity bit `s . x` on the readout wire.
pub fn build_parity_circuit(n: usize, s: u64) -> Result<LayeredCircuit> {
    if n == 0 || n > 63 {
        return Err(EmlabError::InvalidParameter(format!(
            "parity circuit needs 1..=63 data qubits, got {n}"
        )));
    }
    if s >> n != 0 {
        return Err(EmlabError::InvalidParameter(format!(
            "secret {s:#x} has bits outside {n} data qubits"
        )));
    }
    let total = n + 1;
    let mut tableau = CliffordTableau::identity(total);
    for q in 0..n {
        tableau.append_h(q);
    }
    for q in 0..n {
        if (s >> q) & 1 == 1 {
            tableau.append_cx(q, n);
        }
    }
    Ok(LayeredCircuit {
        n: total,
        layers: vec![CircuitLayer {
            unitary: UnitaryLayer::Tableau(tableau),
            noise: None,
        }],
    })
}

/// Returns a copy of the circuit with the same noise channel attached after
/// every layer.
pub fn attach_noise(circuit: &LayeredCircuit, spec: &NoiseSpec) -> Result<LayeredCircuit> {
    spec.validate(circuit.n)?;
    let layers = circuit
        .layers
        .iter()
        .map(|layer| CircuitLayer {
            unitary: layer.unitary.clone(),
            noise: Some(spec.clone()),
        })
        .collect();
    Ok(LayeredCircuit {
        n: circuit.n,
        layers,
    })
}

/// Returns a copy of the circuit with all noise entries removed.
pub fn drop_noise(circuit: &LayeredCircuit) -> LayeredCircuit {
    let layers = circuit
        .layers
        .iter()
        .map(|layer| CircuitLayer {
            unitary: layer.unitary.clone(),
            noise: None,
        })
        .collect();
    LayeredCircuit {
        n: circuit.n,
        layers,
    }
}

/// Support mask of a tableau generator image: bit `j` set when the image
/// acts non-trivially on qubit `j`.
fn support_mask(p: &PauliString) -> u64 {
    let mut mask = 0u64;
    for j in 0..p.num_qubits() {
        if p.letter(j) != 'I' {
            mask |= 1 << j;
        }
    }
    mask
}

/// Checks that every generator image of the layer tableaux stays within the
/// expected brickwork blocks (used by tests and the validate subcommand).
pub fn brickwork_layer_respects_blocks(tableau: &CliffordTableau, offset: usize) -> bool {
    let n = tableau.num_qubits();
    let block_of = |q: usize| -> u64 {
        let mut mask = 1u64 << q;
        if q >= offset {
            let rel = q - offset;
            let partner = if rel % 2 == 0 { q + 1 } else { q - 1 };
            if partner < n && partner >= offset {
                mask |= 1 << partner;
            }
        }
        mask
    };
    for i in 0..n {
        let allowed = block_of(i);
        if support_mask(tableau.x_image(i)) & !allowed != 0 {
            return false;
        }
        if support_mask(tableau.z_image(i)) & !allowed != 0 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_family_has_no_gates() {
        let c = build_identity_circuit(3, 4);
        assert_eq!(c.depth(), 4);
        assert!(c
            .layers
            .iter()
            .all(|l| matches!(l.unitary, UnitaryLayer::Identity) && l.noise.is_none()));
        let total = c.total_tableau().unwrap();
        assert_eq!(total.canonical_bytes(), CliffordTableau::identity(3).canonical_bytes());
    }

    #[test]
    fn mixing_family_is_seed_deterministic() {
        let a = build_mixing_circuit(4, 3, 7);
        let b = build_mixing_circuit(4, 3, 7);
        let c = build_mixing_circuit(4, 3, 8);
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        for layer in &a.layers {
            match &layer.unitary {
                UnitaryLayer::Tableau(t) => assert!(t.is_valid()),
                UnitaryLayer::Identity => panic!("mixing layer should carry a tableau"),
            }
        }
    }

    #[test]
    fn brickwork_layers_respect_block_structure() {
        let c = build_brickwork_circuit(5, 4, 11).unwrap();
        assert_eq!(c.depth(), 4);
        for (t, layer) in c.layers.iter().enumerate() {
            let tab = match &layer.unitary {
                UnitaryLayer::Tableau(tab) => tab,
                UnitaryLayer::Identity => panic!("brickwork layer should carry a tableau"),
            };
            assert!(tab.is_valid());
            assert!(
                brickwork_layer_respects_blocks(tab, t % 2),
                "layer {t} leaks outside its blocks"
            );
        }
        // Layer 1 (odd offset) must leave qubit 0 untouched.
        let tab = match &c.layers[1].unitary {
            UnitaryLayer::Tableau(tab) => tab,
            UnitaryLayer::Identity => unreachable!(),
        };
        assert_eq!(tab.x_image(0).letter(0), 'X');
        assert_eq!(tab.x_image(0).weight(), 1);
        assert_eq!(tab.z_image(0).letter(0), 'Z');
    }

    #[test]
    fn brickwork_single_qubit_register_is_trivial() {
        let c = build_brickwork_circuit(1, 3, 5).unwrap();
        let total = c.total_tableau().unwrap();
        assert_eq!(total.canonical_bytes(), CliffordTableau::identity(1).canonical_bytes());
    }

    #[test]
    fn parity_circuit_output_distribution_brute_force() {
        use crate::dense::DensityMatrix;
        for n in 1..=3usize {
            for s in 0..(1u64 << n) {
                let circuit = build_parity_circuit(n, s).unwrap();
                let rho = DensityMatrix::basis_state(n + 1, 0).unwrap();
                let out = rho.evolve(&circuit).unwrap();
                let probs = out.basis_distribution();
                for (label, &prob) in probs.iter().enumerate() {
                    let x = (label as u64) & ((1 << n) - 1);
                    let readout = (label >> n) as u64 & 1;
                    let parity = (s & x).count_ones() as u64 & 1;
                    let expected = if readout == parity {
                        1.0 / (1 << n) as f64
                    } else {
                        0.0
                    };
                    assert!(
                        (prob - expected).abs() < 1e-12,
                        "n={n} s={s} label={label}: {prob} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn parity_circuit_rejects_bad_secrets() {
        assert!(build_parity_circuit(3, 0b1000).is_err());
        assert!(build_parity_circuit(0, 0).is_err());
    }

    #[test]
    fn attach_and_drop_noise_round_trip() {
        let base = build_mixing_circuit(2, 3, 1);
        let spec = NoiseSpec::DepolarizingLocal { p: 0.9 };
        let noisy = attach_noise(&base, &spec).unwrap();
        assert!(noisy.layers.iter().all(|l| l.noise.is_some()));
        assert_ne!(base.digest(), noisy.digest());
        let clean = drop_noise(&noisy);
        assert_eq!(clean.digest(), base.digest());
        // Attaching a channel that fails validation is rejected.
        let bad = NoiseSpec::Pauli { n: 3, q: vec![1.0; 64] };
        assert!(attach_noise(&base, &bad).is_err());
    }
}
