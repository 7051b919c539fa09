//! Subcommand configuration files.
//!
//! Configs are JSON by default with a TOML front-end selected by file
//! extension. Every config carries an explicit master seed; there are no
//! entropy-source defaults anywhere, so a config fully determines a run.
//! Structural problems (unknown fields, missing seed) surface at parse
//! time, semantic ones through [`Validate::validate`]; the CLI maps both to
//! exit code 2.

use crate::error::{EmlabError, Result};
use crate::mitigate::{ObservableSet, ProtocolKind, WeakMitigationConfig};
use crate::noise::NoiseSpec;
use crate::parity::WeakToStrongOptions;
use crate::purity::{FamilyKind, PurityEstimator};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::path::Path;

/// Semantic validation beyond what serde enforces structurally.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

fn require_non_empty<T>(list: &[T], what: &str) -> Result<()> {
    if list.is_empty() {
        return Err(EmlabError::Config(format!("{what} must be non-empty")));
    }
    Ok(())
}

/// Purity decay sweep over an `(n, depth)` grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub family: FamilyKind,
    pub ns: Vec<usize>,
    pub depths: Vec<usize>,
    pub noise: NoiseSpec,
    pub estimator: PurityEstimator,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

impl Validate for DecayConfig {
    fn validate(&self) -> Result<()> {
        require_non_empty(&self.ns, "ns")?;
        require_non_empty(&self.depths, "depths")?;
        let n_cap = match self.estimator {
            PurityEstimator::Dense => crate::dense::DENSE_LIMIT,
            PurityEstimator::ExactPath => crate::purity::EXACT_PATH_LIMIT,
            PurityEstimator::MonteCarloPath { .. } | PurityEstimator::ClosedForm => 63,
        };
        for &n in &self.ns {
            if n == 0 || n > n_cap {
                return Err(EmlabError::Config(format!(
                    "register size {n} outside 1..={n_cap} for estimator {}",
                    self.estimator.label()
                )));
            }
            self.noise
                .validate(n)
                .map_err(|e| EmlabError::Config(e.to_string()))?;
        }
        if let PurityEstimator::MonteCarloPath { paths } = self.estimator {
            if paths == 0 {
                return Err(EmlabError::Config("paths must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Non-unital (amplitude damping) decay experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonunitalConfig {
    pub ns: Vec<usize>,
    pub depths: Vec<usize>,
    pub gamma: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

impl Validate for NonunitalConfig {
    fn validate(&self) -> Result<()> {
        require_non_empty(&self.ns, "ns")?;
        require_non_empty(&self.depths, "depths")?;
        for &n in &self.ns {
            if n == 0 || n > crate::purity::NONUNITAL_DENSE_LIMIT {
                return Err(EmlabError::Config(format!(
                    "register size {n} outside 1..={}",
                    crate::purity::NONUNITAL_DENSE_LIMIT
                )));
            }
        }
        if !self.depths.windows(2).all(|w| w[0] < w[1]) || self.depths[0] == 0 {
            return Err(EmlabError::Config(
                "depths must be strictly increasing and positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(EmlabError::Config(format!(
                "gamma must lie in [0,1], got {}",
                self.gamma
            )));
        }
        if self.trials == 0 {
            return Err(EmlabError::Config("trials must be positive".into()));
        }
        Ok(())
    }
}

/// One mitigation protocol to run: accuracy targets plus protocol knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: String,
    pub epsilon: f64,
    pub delta: f64,
    pub shot_cap: u64,
    /// ZNE noise-scaling exponents (noise strength `p` maps to `p^lambda`).
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    /// Richardson polynomial order; must equal `scales.len() - 1` when set.
    #[serde(default)]
    pub order: Option<usize>,
}

impl ProtocolConfig {
    /// Resolves the protocol selector, checking ZNE node consistency.
    pub fn to_kind(&self) -> Result<ProtocolKind> {
        match self.protocol.as_str() {
            "pec" => Ok(ProtocolKind::Pec),
            "vd" => Ok(ProtocolKind::Vd),
            "zne" => {
                let scales = self.scales.clone().ok_or_else(|| {
                    EmlabError::Config("zne requires a non-empty scales list".into())
                })?;
                require_non_empty(&scales, "scales")?;
                for &s in &scales {
                    if !s.is_finite() || s < 1.0 {
                        return Err(EmlabError::Config(format!(
                            "zne scales must be finite and >= 1, got {s}"
                        )));
                    }
                }
                if let Some(order) = self.order {
                    if order + 1 != scales.len() {
                        return Err(EmlabError::Config(format!(
                            "order {order} inconsistent with {} scales",
                            scales.len()
                        )));
                    }
                }
                Ok(ProtocolKind::Zne { lambdas: scales })
            }
            other => Err(EmlabError::Config(format!("unknown protocol '{other}'"))),
        }
    }

    pub fn targets(&self) -> WeakMitigationConfig {
        WeakMitigationConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            shot_cap: self.shot_cap,
        }
    }
}

/// Weak-mitigation run: one circuit, a list of observables, a list of
/// protocols.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigateConfig {
    pub family: FamilyKind,
    pub n: usize,
    pub depth: usize,
    /// Per-layer local depolarizing strength.
    pub p: f64,
    /// Pauli-sum observables in text form, e.g. `"0.5*ZI + 0.5*IZ"`.
    pub observables: Vec<String>,
    pub protocols: Vec<ProtocolConfig>,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

impl MitigateConfig {
    /// Parses the observable list against the configured register size.
    pub fn observable_set(&self) -> Result<ObservableSet> {
        let entries = self
            .observables
            .iter()
            .map(|text| {
                let obs = crate::dense::Observable::parse(text)?;
                if obs.num_qubits() != self.n {
                    return Err(EmlabError::Config(format!(
                        "observable '{text}' acts on {} qubits, expected {}",
                        obs.num_qubits(),
                        self.n
                    )));
                }
                Ok((text.clone(), obs))
            })
            .collect::<Result<Vec<_>>>()?;
        ObservableSet::new(entries)
    }
}

impl Validate for MitigateConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > crate::dense::DENSE_LIMIT {
            return Err(EmlabError::Config(format!(
                "register size {} outside 1..={}",
                self.n,
                crate::dense::DENSE_LIMIT
            )));
        }
        if self.depth == 0 {
            return Err(EmlabError::Config("depth must be positive".into()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(EmlabError::Config(format!(
                "p must lie in (0,1], got {}",
                self.p
            )));
        }
        require_non_empty(&self.observables, "observables")?;
        require_non_empty(&self.protocols, "protocols")?;
        self.observable_set()
            .map_err(|e| EmlabError::Config(e.to_string()))?;
        for proto in &self.protocols {
            proto.to_kind()?;
            if !(proto.epsilon > 0.0 && proto.epsilon < 1.0)
                || !(proto.delta > 0.0 && proto.delta < 1.0)
            {
                return Err(EmlabError::Config(format!(
                    "epsilon/delta must lie in (0,1), got ({}, {})",
                    proto.epsilon, proto.delta
                )));
            }
            if proto.shot_cap == 0 {
                return Err(EmlabError::Config("shot_cap must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Mitigation-cost chart: a decay sweep feeding the Fano calculator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub family: FamilyKind,
    pub ns: Vec<usize>,
    pub depths: Vec<usize>,
    pub noise: NoiseSpec,
    pub estimator: PurityEstimator,
    /// Allowed discrimination failure probability in the Fano bound.
    pub delta: f64,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

impl Validate for BoundsConfig {
    fn validate(&self) -> Result<()> {
        let decay = DecayConfig {
            family: self.family,
            ns: self.ns.clone(),
            depths: self.depths.clone(),
            noise: self.noise.clone(),
            estimator: self.estimator,
            seed: self.seed,
            out: None,
        };
        decay.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(EmlabError::Config(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Sampling-vs-statistical-query parity contrast.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityConfig {
    pub n: usize,
    pub tau: f64,
    pub query_budget: u64,
    pub sampling_trials: u64,
    pub sq_trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

impl ParityConfig {
    pub fn to_options(&self) -> WeakToStrongOptions {
        WeakToStrongOptions {
            n: self.n,
            tau: self.tau,
            query_budget: self.query_budget,
            sampling_trials: self.sampling_trials,
            sq_trials: self.sq_trials,
            seed: self.seed,
        }
    }
}

impl Validate for ParityConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > crate::parity::PARITY_ENUM_LIMIT {
            return Err(EmlabError::Config(format!(
                "register size {} outside 1..={}",
                self.n,
                crate::parity::PARITY_ENUM_LIMIT
            )));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(EmlabError::Config(format!(
                "tau must be a finite non-negative number, got {}",
                self.tau
            )));
        }
        if self.query_budget == 0 || self.query_budget > 1u64 << self.n {
            return Err(EmlabError::Config(format!(
                "query_budget must lie in 1..=2^{}, got {}",
                self.n, self.query_budget
            )));
        }
        if self.sampling_trials == 0 || self.sq_trials == 0 {
            return Err(EmlabError::Config("trial counts must be positive".into()));
        }
        Ok(())
    }
}

/// Oracle-equivalence suite; the seed drives its randomized spot checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

impl Validate for ValidateConfig {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// Loads a config from JSON, or TOML when the path ends in `.toml`;
/// parse failures are reported as config errors.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EmlabError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path
        .extension()
        .map(|ext| ext.eq_ignore_ascii_case("toml"))
        .unwrap_or(false);
    if is_toml {
        toml::from_str(&text).map_err(|e| EmlabError::Config(format!("toml: {e}")))
    } else {
        serde_json::from_str(&text).map_err(|e| EmlabError::Config(format!("json: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_config_parses_from_json_and_toml() {
        let dir = tempfile::tempdir().expect("tempdir");
        let json_path = dir.path().join("decay.json");
        std::fs::write(
            &json_path,
            r#"{
  "family": "mixing",
  "ns": [2, 3],
  "depths": [1, 2],
  "noise": {"kind": "depolarizing-local", "p": 0.9},
  "estimator": {"kind": "monte-carlo-path", "paths": 500},
  "seed": 7
}"#,
        )
        .expect("write");
        let cfg: DecayConfig = load_config(&json_path).expect("parse json");
        cfg.validate().expect("valid");
        assert_eq!(cfg.family, FamilyKind::Mixing);
        assert_eq!(cfg.seed, 7);

        let toml_path = dir.path().join("decay.toml");
        std::fs::write(
            &toml_path,
            r#"
family = "mixing"
ns = [2, 3]
depths = [1, 2]
seed = 7

[noise]
kind = "depolarizing-local"
p = 0.9

[estimator]
kind = "monte-carlo-path"
paths = 500
"#,
        )
        .expect("write");
        let from_toml: DecayConfig = load_config(&toml_path).expect("parse toml");
        assert_eq!(
            serde_json::to_string(&from_toml).expect("json"),
            serde_json::to_string(&cfg).expect("json")
        );
    }

    #[test]
    fn missing_seed_or_unknown_field_is_a_config_error() {
        let dir = tempfile::tempdir().expect("tempdir");
        let no_seed = dir.path().join("a.json");
        std::fs::write(
            &no_seed,
            r#"{"ns": [2], "depths": [1], "gamma": 0.2, "trials": 5}"#,
        )
        .expect("write");
        let err = load_config::<NonunitalConfig>(&no_seed).expect_err("must fail");
        assert!(matches!(err, EmlabError::Config(_)), "{err}");

        let extra = dir.path().join("b.json");
        std::fs::write(
            &extra,
            r#"{"ns": [2], "depths": [1], "gamma": 0.2, "trials": 5, "seed": 1, "typo": 3}"#,
        )
        .expect("write");
        assert!(load_config::<NonunitalConfig>(&extra).is_err());

        let missing = dir.path().join("nope.json");
        assert!(load_config::<NonunitalConfig>(&missing).is_err());
    }

    #[test]
    fn semantic_validation_catches_bad_grids_and_domains() {
        let empty_grid = DecayConfig {
            family: FamilyKind::Identity,
            ns: vec![],
            depths: vec![1],
            noise: NoiseSpec::DepolarizingLocal { p: 0.9 },
            estimator: PurityEstimator::ClosedForm,
            seed: 1,
            out: None,
        };
        assert!(empty_grid.validate().is_err());

        let bad_noise = DecayConfig {
            ns: vec![2],
            noise: NoiseSpec::DepolarizingLocal { p: 1.5 },
            ..empty_grid.clone()
        };
        assert!(bad_noise.validate().is_err());

        let bad_gamma = NonunitalConfig {
            ns: vec![2],
            depths: vec![1],
            gamma: 1.2,
            trials: 5,
            seed: 1,
            out: None,
        };
        assert!(bad_gamma.validate().is_err());

        let parity = ParityConfig {
            n: 6,
            tau: 0.1,
            query_budget: 16,
            sampling_trials: 4,
            sq_trials: 4,
            seed: 2,
            out: None,
        };
        parity.validate().expect("valid");
        let bad_tau = ParityConfig {
            tau: -0.5,
            ..parity.clone()
        };
        assert!(bad_tau.validate().is_err());
    }

    #[test]
    fn protocol_selectors_resolve_and_reject() {
        let zne = ProtocolConfig {
            protocol: "zne".into(),
            epsilon: 0.1,
            delta: 0.1,
            shot_cap: 1000,
            scales: Some(vec![1.0, 2.0, 3.0]),
            order: Some(2),
        };
        match zne.to_kind().expect("zne") {
            ProtocolKind::Zne { lambdas } => assert_eq!(lambdas, vec![1.0, 2.0, 3.0]),
            other => panic!("expected zne, got {other:?}"),
        }

        let bad_order = ProtocolConfig {
            order: Some(3),
            ..zne.clone()
        };
        assert!(bad_order.to_kind().is_err());

        let no_scales = ProtocolConfig {
            protocol: "zne".into(),
            scales: None,
            order: None,
            ..zne.clone()
        };
        assert!(no_scales.to_kind().is_err());

        let unknown = ProtocolConfig {
            protocol: "cdr".into(),
            ..zne.clone()
        };
        assert!(unknown.to_kind().is_err());

        let pec = ProtocolConfig {
            protocol: "pec".into(),
            scales: None,
            order: None,
            ..zne
        };
        assert!(matches!(pec.to_kind().expect("pec"), ProtocolKind::Pec));
        assert_eq!(pec.targets().shot_cap, 1000);
    }

    #[test]
    fn mitigate_config_checks_observables_against_register() {
        let cfg = MitigateConfig {
            family: FamilyKind::Mixing,
            n: 2,
            depth: 1,
            p: 0.9,
            observables: vec!["ZI".into(), "0.5*ZZ + 0.5*XX".into()],
            protocols: vec![ProtocolConfig {
                protocol: "pec".into(),
                epsilon: 0.2,
                delta: 0.2,
                shot_cap: 10_000,
                scales: None,
                order: None,
            }],
            seed: 3,
            out: None,
        };
        cfg.validate().expect("valid");
        assert_eq!(cfg.observable_set().expect("set").len(), 2);

        let wrong_width = MitigateConfig {
            observables: vec!["ZZZ".into()],
            ..cfg.clone()
        };
        assert!(wrong_width.validate().is_err());

        let garbled = MitigateConfig {
            observables: vec!["Z$".into()],
            ..cfg
        };
        assert!(garbled.validate().is_err());
    }
}
