//! Sample-complexity lower-bound calculators.
//!
//! Builds basis-state discrimination ensembles against the maximally mixed
//! reference, evaluates their divergences (densely when the register fits,
//! otherwise through the purity-based entropy bound), and turns them into
//! generalized-Fano and Le Cam lower bounds on the number of state copies
//! any mitigation strategy must consume. [`mitigation_cost_chart`] applies
//! the Fano formula to a whole decay sweep for slope inspection.

use crate::circuit::{attach_noise, LayeredCircuit};
use crate::dense::{relative_entropy_to_maximally_mixed, DensityMatrix, DENSE_LIMIT};
use crate::error::{EmlabError, Result};
use crate::noise::NoiseSpec;
use crate::purity::{pauli_path_purity, DecayCurve, PathMode, EXACT_PATH_LIMIT};
use rayon::prelude::*;
use serde::Serialize;

/// Divergences below this are treated as exactly zero (eigensolver jitter
/// on an exactly maximally mixed state is of order 1e-15).
const DIVERGENCE_FLOOR: f64 = 1e-12;

/// One hypothesis state with its divergence to the maximally mixed state.
#[derive(Clone, Debug, Serialize)]
pub struct Hypothesis {
    pub label: String,
    /// `D(C'(rho) || I/2^n)` in bits; exact or an upper bound, per the flag.
    pub divergence: f64,
    /// True when the divergence is the purity surrogate `n + log2(Tr rho^2)`
    /// rather than an exact dense value.
    pub surrogate: bool,
}

/// A discrimination ensemble: basis states `|x><x|` for `x < basis_count`
/// plus the maximally mixed state, each pushed through the noisy circuit.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisEnsemble {
    pub n: usize,
    pub basis_count: u64,
    pub circuit_digest: String,
    pub noise_kind: String,
    pub hypotheses: Vec<Hypothesis>,
}

impl HypothesisEnsemble {
    /// Largest divergence over the ensemble.
    pub fn max_divergence(&self) -> f64 {
        self.hypotheses
            .iter()
            .map(|h| h.divergence)
            .fold(0.0, f64::max)
    }
}

/// Builds the discrimination ensemble for `basis_count` basis states under
/// the given circuit and noise.
///
/// Registers within the dense limit get exact divergences; larger
/// Pauli-noise registers (up to the exact-path limit) get the entropy-bound
/// surrogate, which is computed once because Pauli channels commute with
/// the basis-relabelling conjugations that map the hypotheses onto each
/// other. Divergences below `1e-12` are reported as zero.
pub fn build_discrimination_ensemble(
    circuit: &LayeredCircuit,
    noise: &NoiseSpec,
    basis_count: u64,
) -> Result<HypothesisEnsemble> {
    let n = circuit.n;
    if n >= 64 {
        return Err(EmlabError::InvalidParameter(format!(
            "register of {n} qubits exceeds the 63-qubit label range"
        )));
    }
    let dim = 1u64 << n;
    if basis_count == 0 || basis_count > dim {
        return Err(EmlabError::InvalidParameter(format!(
            "basis subset size {basis_count} must lie in 1..=2^{n}"
        )));
    }
    let noisy = attach_noise(circuit, noise)?;
    let mut hypotheses: Vec<Hypothesis> = if n <= DENSE_LIMIT {
        (0..basis_count)
            .into_par_iter()
            .map(|x| {
                let rho = DensityMatrix::basis_state(n, x)?.evolve(&noisy)?;
                let mut d = relative_entropy_to_maximally_mixed(&rho)?;
                if d < DIVERGENCE_FLOOR {
                    d = 0.0;
                }
                Ok(Hypothesis {
                    label: format!("basis-{x}"),
                    divergence: d,
                    surrogate: false,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else if n <= EXACT_PATH_LIMIT {
        let purity = pauli_path_purity(&noisy, 0, PathMode::Exact)?.value;
        let mut bound = n as f64 + purity.log2();
        if bound < DIVERGENCE_FLOOR {
            bound = 0.0;
        }
        (0..basis_count)
            .map(|x| Hypothesis {
                label: format!("basis-{x}"),
                divergence: bound,
                surrogate: true,
            })
            .collect()
    } else {
        return Err(EmlabError::InvalidParameter(format!(
            "register of {n} qubits exceeds both the dense limit {DENSE_LIMIT} \
             and the path limit {EXACT_PATH_LIMIT}"
        )));
    };

    // The maximally mixed hypothesis: exact under the dense oracle, and
    // exactly zero in the surrogate branch because Pauli channels are
    // unital.
    let mixed_divergence = if n <= DENSE_LIMIT {
        let rho = DensityMatrix::maximally_mixed(n)?.evolve(&noisy)?;
        let d = relative_entropy_to_maximally_mixed(&rho)?;
        if d < DIVERGENCE_FLOOR {
            0.0
        } else {
            d
        }
    } else {
        0.0
    };
    hypotheses.push(Hypothesis {
        label: "maximally-mixed".into(),
        divergence: mixed_divergence,
        surrogate: n > DENSE_LIMIT,
    });

    Ok(HypothesisEnsemble {
        n,
        basis_count,
        circuit_digest: noisy.digest(),
        noise_kind: noise.kind_label().into(),
        hypotheses,
    })
}

/// A computed lower bound on the copy count, serializable for reports.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub method: String,
    /// Minimal copies with `N = basis_count` hypotheses; `None` means the
    /// bound is infinite (no finite copy count suffices).
    pub m_min: Option<u64>,
    /// Same bound counting the maximally mixed state as an extra
    /// hypothesis (`N + 1`).
    pub m_min_with_mixed: Option<u64>,
    pub n_hypotheses: u64,
    pub delta: f64,
    pub max_divergence: f64,
}

/// Fano arithmetic: `ceil(((1 - delta) log2(N) - 1) / max_divergence)`,
/// clipped below at 1; zero divergence yields `None` (unbounded).
pub fn fano_m_min(n_hypotheses: u64, delta: f64, max_divergence: f64) -> Result<Option<u64>> {
    if n_hypotheses < 2 {
        return Err(EmlabError::InvalidParameter(format!(
            "fano needs at least 2 hypotheses, got {n_hypotheses}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(EmlabError::InvalidParameter(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(max_divergence >= 0.0 && max_divergence.is_finite()) {
        return Err(EmlabError::InvalidParameter(format!(
            "max divergence must be finite and non-negative, got {max_divergence}"
        )));
    }
    if max_divergence == 0.0 {
        return Ok(None);
    }
    let numerator = (1.0 - delta) * (n_hypotheses as f64).log2() - 1.0;
    let m = (numerator / max_divergence).ceil();
    Ok(Some(if m < 1.0 { 1 } else { m as u64 }))
}

/// Generalized Fano bound for the ensemble: the per-copy divergence is
/// additive against the product reference, so `m` copies can distinguish
/// `N` hypotheses with failure probability `delta` only if
/// `m * max_divergence >= (1 - delta) log2(N) - 1`. Both the `N` and
/// `N + 1` (mixed state counted) hypothesis conventions are reported.
pub fn fano_lower_bound(ensemble: &HypothesisEnsemble, delta: f64) -> Result<LowerBoundReport> {
    let max_divergence = ensemble.max_divergence();
    let m_min = fano_m_min(ensemble.basis_count, delta, max_divergence)?;
    let m_min_with_mixed = fano_m_min(ensemble.basis_count + 1, delta, max_divergence)?;
    Ok(LowerBoundReport {
        method: "fano".into(),
        m_min,
        m_min_with_mixed,
        n_hypotheses: ensemble.basis_count,
        delta,
        max_divergence,
    })
}

/// Le Cam two-point bound: any test distinguishing two distributions at
/// total variation `tv` errs with probability at least `(1 - tv) / 2`.
pub fn le_cam_bound(tv: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tv) {
        return Err(EmlabError::InvalidParameter(format!(
            "total variation must lie in [0,1], got {tv}"
        )));
    }
    Ok((1.0 - tv) / 2.0)
}

/// One row of the predicted mitigation-cost chart.
#[derive(Clone, Debug, Serialize)]
pub struct ChartRow {
    pub n: usize,
    pub depth: usize,
    /// Entropy-bound surrogate divergence used in the denominator.
    pub divergence: f64,
    pub m_min: Option<u64>,
    /// `log2(m_min)`; infinite when the bound is unbounded.
    pub m_min_log2: f64,
    pub method: String,
    pub surrogate: bool,
    /// Seed of the decay row this bound was derived from.
    pub seed: u64,
}

/// Converts a decay sweep into Fano copy-count rows with `N = 2^n`,
/// using each row's entropy bound as the (surrogate) divergence. Because
/// the surrogate over-estimates the divergence, the resulting `m_min`
/// under-estimates the true copy requirement, which keeps it a valid
/// lower bound; rows are flagged accordingly.
pub fn mitigation_cost_chart(decay: &DecayCurve, delta: f64) -> Result<Vec<ChartRow>> {
    if decay.points.is_empty() {
        return Err(EmlabError::InvalidParameter(
            "decay curve has no rows".into(),
        ));
    }
    decay
        .points
        .iter()
        .map(|point| {
            if !point.entropy_bound.is_finite() {
                return Err(EmlabError::Numerical(format!(
                    "row (n={}, depth={}) lacks a finite entropy bound",
                    point.n, point.depth
                )));
            }
            let divergence = point.entropy_bound.max(0.0);
            let m_min = fano_m_min(1u64 << point.n, delta, divergence)?;
            let m_min_log2 = match m_min {
                Some(m) => (m as f64).log2(),
                None => f64::INFINITY,
            };
            Ok(ChartRow {
                n: point.n,
                depth: point.depth,
                divergence,
                m_min,
                m_min_log2,
                method: "fano".into(),
                surrogate: true,
                seed: point.seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_identity_circuit, build_mixing_circuit};
    use crate::purity::{decay_sweep, FamilyKind, PurityEstimator};
    use crate::stats::ols_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn fano_reference_arithmetic() {
        // 16 hypotheses, delta 1/3, 0.01 bits of divergence per copy.
        let m = fano_m_min(16, 1.0 / 3.0, 0.01).unwrap().unwrap();
        assert_eq!(m, 167);
        // Vacuous success requirement clips to one copy.
        assert_eq!(fano_m_min(16, 0.999, 5.0).unwrap().unwrap(), 1);
        // Halving the divergence exactly doubles the requirement when the
        // ratio is integral.
        assert_eq!(fano_m_min(4, 0.25, 0.05).unwrap().unwrap(), 10);
        assert_eq!(fano_m_min(4, 0.25, 0.025).unwrap().unwrap(), 20);
        // Zero divergence: no finite copy count works.
        assert_eq!(fano_m_min(16, 0.25, 0.0).unwrap(), None);
        assert!(fano_m_min(1, 0.25, 0.5).is_err());
        assert!(fano_m_min(4, 0.0, 0.5).is_err());
        assert!(fano_m_min(4, 0.25, f64::NAN).is_err());
    }

    #[test]
    fn fano_monotone_in_divergence_and_hypothesis_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..100 {
            let delta = rng.gen_range(0.05..0.95);
            let d1 = rng.gen_range(1e-3..2.0);
            let d2 = d1 * rng.gen_range(1.0..5.0);
            let n1 = rng.gen_range(2u64..1000);
            let n2 = n1 * rng.gen_range(1u64..8);
            let base = fano_m_min(n1, delta, d1).unwrap().unwrap();
            assert!(fano_m_min(n1, delta, d2).unwrap().unwrap() <= base);
            assert!(fano_m_min(n2, delta, d1).unwrap().unwrap() >= base);
        }
    }

    #[test]
    fn le_cam_reference_values() {
        assert_eq!(le_cam_bound(0.0).unwrap(), 0.5);
        assert_eq!(le_cam_bound(1.0).unwrap(), 0.0);
        assert_eq!(le_cam_bound(0.5).unwrap(), 0.25);
        // Algebraic identity: bound + tv/2 = 1/2.
        for i in 0..=20 {
            let tv = i as f64 / 20.0;
            assert_eq!(le_cam_bound(tv).unwrap() + tv / 2.0, 0.5);
        }
        assert!(le_cam_bound(-0.1).is_err());
        assert!(le_cam_bound(1.1).is_err());
    }

    #[test]
    fn noiseless_ensemble_divergences_equal_n() {
        let circuit = build_mixing_circuit(3, 2, 41);
        let noise = NoiseSpec::DepolarizingLocal { p: 1.0 };
        let ensemble = build_discrimination_ensemble(&circuit, &noise, 8).unwrap();
        assert_eq!(ensemble.hypotheses.len(), 9);
        for h in &ensemble.hypotheses[..8] {
            assert!((h.divergence - 3.0).abs() < 1e-9, "{}: {}", h.label, h.divergence);
            assert!(!h.surrogate);
        }
        assert_eq!(ensemble.hypotheses[8].divergence, 0.0);
        let report = fano_lower_bound(&ensemble, 1.0 / 3.0).unwrap();
        assert_eq!(report.m_min, Some(1));
        assert_eq!(report.method, "fano");
    }

    #[test]
    fn fully_depolarized_ensemble_is_unbounded() {
        let circuit = build_mixing_circuit(2, 3, 43);
        let noise = NoiseSpec::DepolarizingGlobal { p: 0.0 };
        let ensemble = build_discrimination_ensemble(&circuit, &noise, 4).unwrap();
        for h in &ensemble.hypotheses {
            assert_eq!(h.divergence, 0.0, "{}", h.label);
        }
        let report = fano_lower_bound(&ensemble, 0.25).unwrap();
        assert_eq!(report.m_min, None);
        assert_eq!(report.m_min_with_mixed, None);
    }

    #[test]
    fn surrogate_dominates_exact_divergence() {
        // Dense exact divergences against the entropy-bound surrogate on
        // every hypothesis of a 3-qubit mixing circuit.
        let circuit = build_mixing_circuit(3, 2, 47);
        let noise = NoiseSpec::DepolarizingLocal { p: 0.9 };
        let ensemble = build_discrimination_ensemble(&circuit, &noise, 8).unwrap();
        let noisy = attach_noise(&circuit, &noise).unwrap();
        for (x, h) in ensemble.hypotheses[..8].iter().enumerate() {
            let purity = pauli_path_purity(&noisy, x as u64, PathMode::Exact)
                .unwrap()
                .value;
            let surrogate = 3.0 + purity.log2();
            assert!(
                surrogate + 1e-9 >= h.divergence,
                "hypothesis {x}: surrogate {surrogate} < exact {}",
                h.divergence
            );
        }
    }

    #[test]
    fn ensemble_input_validation() {
        let circuit = build_mixing_circuit(2, 1, 53);
        let noise = NoiseSpec::DepolarizingLocal { p: 0.9 };
        assert!(build_discrimination_ensemble(&circuit, &noise, 0).is_err());
        assert!(build_discrimination_ensemble(&circuit, &noise, 5).is_err());
        let ok = build_discrimination_ensemble(&circuit, &noise, 2).unwrap();
        assert_eq!(ok.basis_count, 2);
        assert_eq!(ok.hypotheses.len(), 3);
        assert_eq!(ok.noise_kind, "depolarizing-local");
    }

    #[test]
    fn chart_identity_rows_scale_with_depth_not_register() {
        // Closed-form identity sweep: log2(m_min) grows in D with slope
        // close to 2 log2(1/p), independent of n.
        let noise = NoiseSpec::DepolarizingLocal { p: 0.9 };
        let depths: Vec<usize> = (15..=30).collect();
        let curve = decay_sweep(
            FamilyKind::Identity,
            &[4, 8],
            &depths,
            &noise,
            PurityEstimator::ClosedForm,
            61,
        )
        .unwrap();
        let rows = mitigation_cost_chart(&curve, 1.0 / 3.0).unwrap();
        let target = 2.0 * (1.0f64 / 0.9).log2();
        for n in [4usize, 8] {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.depth as f64)
                .collect();
            let ys: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.m_min_log2)
                .collect();
            let fit = ols_fit(&xs, &ys).unwrap();
            assert!(
                (fit.slope - target).abs() <= 0.02,
                "n={n}: slope {} vs {target}",
                fit.slope
            );
        }
        for row in &rows {
            assert!(row.surrogate);
            assert_eq!(row.method, "fano");
        }
    }

    #[test]
    fn chart_mixing_rows_scale_with_n_times_depth() {
        let noise = NoiseSpec::DepolarizingLocal { p: 0.9 };
        let ns: Vec<usize> = (4..=16).collect();
        let depths: Vec<usize> = (6..=10).collect();
        let curve = decay_sweep(
            FamilyKind::Mixing,
            &ns,
            &depths,
            &noise,
            PurityEstimator::ClosedForm,
            67,
        )
        .unwrap();
        let rows = mitigation_cost_chart(&curve, 1.0 / 3.0).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| (r.n * r.depth) as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.m_min_log2).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        assert!(fit.slope > 0.0, "slope {}", fit.slope);
        assert!(fit.r_squared >= 0.9, "r^2 {}", fit.r_squared);
    }

    #[test]
    fn chart_noiseless_rows_cost_one_copy() {
        let noise = NoiseSpec::DepolarizingLocal { p: 1.0 };
        let curve = decay_sweep(
            FamilyKind::Identity,
            &[4, 8],
            &[1, 2, 3],
            &noise,
            PurityEstimator::ClosedForm,
            71,
        )
        .unwrap();
        let rows = mitigation_cost_chart(&curve, 1.0 / 3.0).unwrap();
        for row in &rows {
            assert_eq!(row.m_min, Some(1));
            assert_eq!(row.m_min_log2, 0.0);
            assert!((row.divergence - row.n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_serialize_to_json() {
        let circuit = build_identity_circuit(2, 1);
        let noise = NoiseSpec::DepolarizingLocal { p: 0.9 };
        let ensemble = build_discrimination_ensemble(&circuit, &noise, 4).unwrap();
        let report = fano_lower_bound(&ensemble, 0.25).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"method\":\"fano\""));
        assert!(text.contains("\"m_min\""));
        let text = serde_json::to_string(&ensemble).unwrap();
        assert!(text.contains("maximally-mixed"));
    }
}
