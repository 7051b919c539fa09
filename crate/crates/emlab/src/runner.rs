//! Batch execution behind the CLI: worker-pool setup, subcommand dispatch,
//! artifact emission, and the oracle-equivalence suite.
//!
//! Every run follows the same shape: load and validate a config, run the
//! experiment on a dedicated worker pool, write CSV/JSON artifacts into the
//! output directory, and finish with a manifest whose digests match the
//! emitted files. All work items carry pre-assigned indices with derived
//! seeds, so the pool size never changes the numbers.

use crate::bounds::{fano_m_min, le_cam_bound, mitigation_cost_chart};
use crate::circuit::{
    attach_noise, build_brickwork_circuit, build_identity_circuit, build_mixing_circuit,
    LayeredCircuit,
};
use crate::clifford::CliffordTableau;
use crate::config::{
    load_config, BoundsConfig, DecayConfig, MitigateConfig, NonunitalConfig, ParityConfig,
    Validate, ValidateConfig,
};
use crate::dense::{
    divergences, pauli_to_dense, tableau_to_unitary, DensityMatrix, Observable,
};
use crate::error::{EmlabError, Result};
use crate::mitigate::{
    kappa_to_additive_epsilon, pec_exact_expectation, richardson_weights, weak_mitigate,
    zne_estimate,
};
use crate::noise::NoiseSpec;
use crate::parity::{
    expectation_zb, parity_tv, weak_to_strong_experiment, ParityDistribution, ParitySecret,
};
use crate::purity::{
    decay_sweep, identity_purity_closed_form, nonunital_decay_experiment, pauli_path_purity,
    ExponentKind, FamilyKind, PathMode, Regressor,
};
use crate::records::{
    bounds_csv, decay_records, emit_records, mitigation_csv, mitigation_rows, nonunital_records,
    parity_csv, write_artifact, EmitFormat, ManifestEntry, RunManifest,
};
use crate::stats::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Picks the worker count from the explicit flag, then the EMLAB_WORKERS
/// environment variable, then one worker per available CPU.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    let env = std::env::var("EMLAB_WORKERS").ok();
    workers_from(flag, env.as_deref())
}

fn workers_from(flag: Option<usize>, env: Option<&str>) -> Result<usize> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(EmlabError::Config("--workers must be positive".into()));
        }
        return Ok(w);
    }
    if let Some(text) = env {
        let w: usize = text.trim().parse().map_err(|_| {
            EmlabError::Config(format!(
                "EMLAB_WORKERS must be a positive integer, got '{text}'"
            ))
        })?;
        if w == 0 {
            return Err(EmlabError::Config("EMLAB_WORKERS must be positive".into()));
        }
        return Ok(w);
    }
    Ok(std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1))
}

/// Runs `f` with rayon operations confined to a dedicated pool of
/// `workers` threads.
pub fn with_worker_pool<T: Send>(
    workers: usize,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EmlabError::Config(format!("worker pool: {e}")))?;
    pool.install(f)
}

/// Files written by a run plus console summary lines; `ok` is false only
/// when the validate suite reports a failing check.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub entries: Vec<ManifestEntry>,
    pub lines: Vec<String>,
    pub ok: bool,
}

impl RunArtifacts {
    fn new() -> Self {
        RunArtifacts {
            entries: Vec::new(),
            lines: Vec::new(),
            ok: true,
        }
    }

    fn record(&mut self, out_dir: &Path, name: &str, digest: String) {
        self.lines
            .push(format!("wrote {}", out_dir.join(name).display()));
        self.entries.push(ManifestEntry {
            path: name.into(),
            sha256: digest,
        });
    }
}

/// A parsed, validated subcommand invocation.
#[derive(Clone, Debug)]
pub enum Job {
    Decay(DecayConfig),
    Nonunital(NonunitalConfig),
    Mitigate(MitigateConfig),
    Bounds(BoundsConfig),
    Parity(ParityConfig),
    Validate(ValidateConfig),
}

impl Job {
    /// Loads and validates the config for a subcommand; every error from
    /// here maps to exit code 2.
    pub fn load(subcommand: &str, path: &Path) -> Result<Job> {
        let job = match subcommand {
            "decay" => Job::Decay(load_config(path)?),
            "nonunital" => Job::Nonunital(load_config(path)?),
            "mitigate" => Job::Mitigate(load_config(path)?),
            "bounds" => Job::Bounds(load_config(path)?),
            "parity" => Job::Parity(load_config(path)?),
            "validate" => Job::Validate(load_config(path)?),
            other => {
                return Err(EmlabError::Config(format!("unknown subcommand '{other}'")));
            }
        };
        job.validate()?;
        Ok(job)
    }

    pub fn subcommand(&self) -> &'static str {
        match self {
            Job::Decay(_) => "decay",
            Job::Nonunital(_) => "nonunital",
            Job::Mitigate(_) => "mitigate",
            Job::Bounds(_) => "bounds",
            Job::Parity(_) => "parity",
            Job::Validate(_) => "validate",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Job::Decay(c) => c.validate(),
            Job::Nonunital(c) => c.validate(),
            Job::Mitigate(c) => c.validate(),
            Job::Bounds(c) => c.validate(),
            Job::Parity(c) => c.validate(),
            Job::Validate(c) => c.validate(),
        }
    }

    /// Replaces the config's master seed (the `--seed` flag).
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            Job::Decay(c) => c.seed = seed,
            Job::Nonunital(c) => c.seed = seed,
            Job::Mitigate(c) => c.seed = seed,
            Job::Bounds(c) => c.seed = seed,
            Job::Parity(c) => c.seed = seed,
            Job::Validate(c) => c.seed = seed,
        }
    }

    /// Output directory: the `--out` flag wins, then the config's `out`
    /// field, then the current directory.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(dir) = flag {
            return dir.to_path_buf();
        }
        let configured = match self {
            Job::Decay(c) => c.out.as_deref(),
            Job::Nonunital(c) => c.out.as_deref(),
            Job::Mitigate(c) => c.out.as_deref(),
            Job::Bounds(c) => c.out.as_deref(),
            Job::Parity(c) => c.out.as_deref(),
            Job::Validate(c) => c.out.as_deref(),
        };
        configured.map(PathBuf::from).unwrap_or_else(|| ".".into())
    }

    pub fn config_echo(&self) -> Result<serde_json::Value> {
        Ok(match self {
            Job::Decay(c) => serde_json::to_value(c)?,
            Job::Nonunital(c) => serde_json::to_value(c)?,
            Job::Mitigate(c) => serde_json::to_value(c)?,
            Job::Bounds(c) => serde_json::to_value(c)?,
            Job::Parity(c) => serde_json::to_value(c)?,
            Job::Validate(c) => serde_json::to_value(c)?,
        })
    }

    /// Runs the experiment and writes its artifacts; call inside a worker
    /// pool. Errors from here map to exit code 1.
    pub fn run(&self, out_dir: &Path) -> Result<RunArtifacts> {
        match self {
            Job::Decay(c) => run_decay(c, out_dir),
            Job::Nonunital(c) => run_nonunital(c, out_dir),
            Job::Mitigate(c) => run_mitigate(c, out_dir),
            Job::Bounds(c) => run_bounds(c, out_dir),
            Job::Parity(c) => run_parity(c, out_dir),
            Job::Validate(c) => run_validate(c, out_dir),
        }
    }
}

/// Runs a job and writes `manifest.json` recording the config echo and the
/// digest of every emitted file.
pub fn run_with_manifest(job: &Job, out_dir: &Path) -> Result<RunArtifacts> {
    let mut manifest = RunManifest::new(job.subcommand(), job.config_echo()?);
    let mut artifacts = job.run(out_dir)?;
    for entry in &artifacts.entries {
        manifest.push_output(entry.path.clone(), entry.sha256.clone());
    }
    manifest.finish_and_write(&out_dir.join("manifest.json"))?;
    artifacts
        .lines
        .push(format!("wrote {}", out_dir.join("manifest.json").display()));
    Ok(artifacts)
}

fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_artifact(path, &body)
}

fn run_decay(cfg: &DecayConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let curve = decay_sweep(
        cfg.family,
        &cfg.ns,
        &cfg.depths,
        &cfg.noise,
        cfg.estimator,
        cfg.seed,
    )?;
    let mut artifacts = RunArtifacts::new();
    let digest = emit_records(
        &decay_records(&curve),
        EmitFormat::Csv,
        &out_dir.join("decay.csv"),
    )?;
    artifacts.record(out_dir, "decay.csv", digest);

    let fits = json!({
        "register_vs_n_times_depth": curve
            .fit_exponent(ExponentKind::Register, Regressor::NTimesDepth)
            .ok(),
        "register_vs_depth": curve.fit_exponent(ExponentKind::Register, Regressor::Depth).ok(),
        "per_qubit_vs_depth": curve.fit_exponent(ExponentKind::PerQubit, Regressor::Depth).ok(),
    });
    let summary = json!({ "curve": curve, "fits": fits });
    let digest = emit_json(&summary, &out_dir.join("decay.json"))?;
    artifacts.record(out_dir, "decay.json", digest);
    artifacts
        .lines
        .push(format!("decay: {} grid points", curve.points.len()));
    Ok(artifacts)
}

fn run_nonunital(cfg: &NonunitalConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let curve = nonunital_decay_experiment(&cfg.ns, &cfg.depths, cfg.gamma, cfg.trials, cfg.seed)?;
    let mut artifacts = RunArtifacts::new();
    let digest = emit_records(
        &nonunital_records(&curve),
        EmitFormat::Csv,
        &out_dir.join("nonunital.csv"),
    )?;
    artifacts.record(out_dir, "nonunital.csv", digest);

    let exponents = curve.decay_exponents().ok();
    let trend = curve
        .increasing_decay_trend()
        .ok()
        .map(|(s, p)| json!({"s": s, "p_value": p}));
    let summary = json!({ "curve": curve, "decay_exponents": exponents, "trend": trend });
    let digest = emit_json(&summary, &out_dir.join("nonunital.json"))?;
    artifacts.record(out_dir, "nonunital.json", digest);
    artifacts
        .lines
        .push(format!("nonunital: {} grid points", curve.points.len()));
    Ok(artifacts)
}

/// Builds the configured circuit family; random families draw their layers
/// from a stream derived off the master seed.
fn build_family_circuit(
    family: FamilyKind,
    n: usize,
    depth: usize,
    master_seed: u64,
) -> Result<LayeredCircuit> {
    match family {
        FamilyKind::Identity => Ok(build_identity_circuit(n, depth)),
        FamilyKind::Mixing => Ok(build_mixing_circuit(
            n,
            depth,
            derive_seed(master_seed, 100, 0),
        )),
        FamilyKind::Brickwork => build_brickwork_circuit(n, depth, derive_seed(master_seed, 100, 0)),
    }
}

fn run_mitigate(cfg: &MitigateConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let circuit = build_family_circuit(cfg.family, cfg.n, cfg.depth, cfg.seed)?;
    let observables = cfg.observable_set()?;
    let names: Vec<String> = observables.iter().map(|(name, _)| name.clone()).collect();

    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (i, proto) in cfg.protocols.iter().enumerate() {
        let kind = proto.to_kind()?;
        let run_seed = derive_seed(cfg.seed, 101, i as u64);
        let result = weak_mitigate(
            &kind,
            &circuit,
            cfg.p,
            &observables,
            &proto.targets(),
            run_seed,
        )?;
        rows.extend(mitigation_rows(
            &result,
            &names,
            cfg.family.label(),
            cfg.n,
            cfg.depth,
            "depolarizing-local",
            cfg.p,
            run_seed,
        )?);
        results.push(result);
    }

    let mut artifacts = RunArtifacts::new();
    let digest = write_artifact(&out_dir.join("mitigate.csv"), &mitigation_csv(&rows))?;
    artifacts.record(out_dir, "mitigate.csv", digest);
    let digest = emit_json(&results, &out_dir.join("mitigate.json"))?;
    artifacts.record(out_dir, "mitigate.json", digest);
    for result in &results {
        artifacts.lines.push(format!(
            "mitigate[{}]: shots {} / required {}{}",
            result.protocol,
            result.shots,
            result.required_shots,
            if result.partial { " (partial)" } else { "" }
        ));
    }
    Ok(artifacts)
}

fn run_bounds(cfg: &BoundsConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let curve = decay_sweep(
        cfg.family,
        &cfg.ns,
        &cfg.depths,
        &cfg.noise,
        cfg.estimator,
        cfg.seed,
    )?;
    let chart = mitigation_cost_chart(&curve, cfg.delta)?;
    let mut artifacts = RunArtifacts::new();
    let digest = write_artifact(&out_dir.join("bounds.csv"), &bounds_csv(&chart))?;
    artifacts.record(out_dir, "bounds.csv", digest);
    let summary = json!({ "delta": cfg.delta, "rows": chart });
    let digest = emit_json(&summary, &out_dir.join("bounds.json"))?;
    artifacts.record(out_dir, "bounds.json", digest);
    artifacts
        .lines
        .push(format!("bounds: {} chart rows", chart.len()));
    Ok(artifacts)
}

fn run_parity(cfg: &ParityConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let report = weak_to_strong_experiment(&cfg.to_options())?;
    let mut artifacts = RunArtifacts::new();
    let digest = write_artifact(&out_dir.join("parity.csv"), &parity_csv(&report))?;
    artifacts.record(out_dir, "parity.csv", digest);
    let summary = json!({
        "n": report.n,
        "tau": report.tau,
        "budget": report.query_budget,
        "sampling_success_rate": report.sampling_success_rate,
        "sq_success_rate": report.sq_success_rate,
        "sq_success_exact": report.sq_success_exact,
        "samples_per_trial": report.samples_per_trial,
        "samples_used": report.samples_used,
        "queries_used": report.queries_used,
        "seed": report.seed,
    });
    let digest = emit_json(&summary, &out_dir.join("parity.json"))?;
    artifacts.record(out_dir, "parity.json", digest);
    artifacts.lines.push(format!(
        "parity: sampling rate {:.3}, sq rate {:.3}",
        report.sampling_success_rate, report.sq_success_rate
    ));
    Ok(artifacts)
}

/// One row of the validate table.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, body: impl FnOnce() -> Result<(bool, String)>) -> SuiteCheck {
    let (passed, detail) = match body() {
        Ok(pair) => pair,
        Err(e) => (false, e.to_string()),
    };
    SuiteCheck {
        name: name.into(),
        passed,
        detail,
    }
}

/// Cross-engine equivalence suite: every oracle pair the library relies on,
/// spot-checked at sizes where both sides are exact.
pub fn oracle_equivalence_suite(seed: u64) -> Vec<SuiteCheck> {
    let mut checks = Vec::new();

    checks.push(check("pauli-path-vs-dense-purity", || {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0, 0));
        let mut max_dev: f64 = 0.0;
        for _ in 0..5 {
            let n = rng.gen_range(2..=3);
            let depth = rng.gen_range(1..=3);
            let circuit = build_mixing_circuit(n, depth, rng.gen());
            let noisy = attach_noise(&circuit, &NoiseSpec::DepolarizingLocal { p: 0.9 })?;
            let path = pauli_path_purity(&noisy, 0, PathMode::Exact)?.value;
            let dense = DensityMatrix::basis_state(n, 0)?.evolve(&noisy)?.purity();
            max_dev = max_dev.max((path - dense).abs());
        }
        Ok((max_dev <= 1e-10, format!("max |path - dense| = {max_dev:.3e}")))
    }));

    checks.push(check("identity-closed-form-purity", || {
        let circuit = build_identity_circuit(3, 4);
        let noisy = attach_noise(&circuit, &NoiseSpec::DepolarizingLocal { p: 0.8 })?;
        let path = pauli_path_purity(&noisy, 0, PathMode::Exact)?.value;
        let closed = identity_purity_closed_form(3, 0.8, 4)?;
        let dev = (path - closed).abs();
        Ok((dev <= 1e-12, format!("|path - closed form| = {dev:.3e}")))
    }));

    checks.push(check("tableau-vs-dense-conjugation", || {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0, 1));
        let mut max_dev: f64 = 0.0;
        for _ in 0..5 {
            let n = 3;
            let t = CliffordTableau::sample_uniform(n, &mut rng);
            let u = tableau_to_unitary(&t)?;
            let p = crate::pauli::PauliString::random_nonidentity(n, &mut rng);
            let image = t.conjugate(&p)?;
            let lhs = &u * pauli_to_dense(&p)? * u.adjoint();
            let rhs = pauli_to_dense(&image)?;
            max_dev = max_dev.max((lhs - rhs).norm());
        }
        Ok((
            max_dev <= 1e-10,
            format!("max |U P Udag - image| = {max_dev:.3e}"),
        ))
    }));

    checks.push(check("pec-exact-vs-noiseless", || {
        let circuit = build_mixing_circuit(2, 2, derive_seed(seed, 0, 2));
        let obs = Observable::parse("ZZ")?;
        let ideal = DensityMatrix::basis_state(2, 0)?
            .evolve(&circuit)?
            .expectation(&obs)?;
        let pec = pec_exact_expectation(&circuit, 0.9, &obs)?;
        let dev = (pec - ideal).abs();
        Ok((dev <= 1e-10, format!("|pec - ideal| = {dev:.3e}")))
    }));

    checks.push(check("richardson-weight-references", || {
        let w12 = richardson_weights(&[1.0, 2.0])?;
        let w123 = richardson_weights(&[1.0, 2.0, 3.0])?;
        let dev = (w12[0] - 2.0).abs().max((w12[1] + 1.0).abs()).max(
            (w123[0] - 3.0)
                .abs()
                .max((w123[1] + 3.0).abs())
                .max((w123[2] - 1.0).abs()),
        );
        Ok((dev <= 1e-12, format!("max weight deviation = {dev:.3e}")))
    }));

    checks.push(check("zne-single-node-equals-noisy-value", || {
        let circuit = build_mixing_circuit(2, 2, derive_seed(seed, 0, 3));
        let obs = Observable::parse("ZI")?;
        let zne = zne_estimate(&circuit, 0.9, &obs, &[1.0], None, 0)?;
        let noisy = attach_noise(&circuit, &NoiseSpec::DepolarizingLocal { p: 0.9 })?;
        let truth = DensityMatrix::basis_state(2, 0)?
            .evolve(&noisy)?
            .expectation(&obs)?;
        let dev = (zne.value - truth).abs();
        Ok((dev <= 1e-10, format!("|zne@[1] - noisy| = {dev:.3e}")))
    }));

    checks.push(check("fano-worked-example", || {
        let m = fano_m_min(16, 1.0 / 3.0, 0.01)?;
        Ok((m == Some(167), format!("m_min = {m:?}, expected Some(167)")))
    }));

    checks.push(check("le-cam-half", || {
        let v = le_cam_bound(0.5)?;
        Ok(((v - 0.25).abs() <= 1e-15, format!("le_cam(1/2) = {v}")))
    }));

    checks.push(check("parity-tv-brute-force", || {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0, 4));
        let mut max_dev: f64 = 0.0;
        for _ in 0..20 {
            let n = rng.gen_range(2..=10usize);
            let a = ParitySecret::new(n, rng.gen_range(0..1u64 << n))?;
            let b = ParitySecret::new(n, rng.gen_range(0..1u64 << n))?;
            let closed = parity_tv(&a, &b)?;
            let pa = ParityDistribution::new(a.clone()).distribution_vector()?;
            let pb = ParityDistribution::new(b.clone()).distribution_vector()?;
            let brute = 0.5
                * pa.iter()
                    .zip(pb.iter())
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>();
            max_dev = max_dev.max((closed - brute).abs());
        }
        Ok((max_dev <= 1e-12, format!("max |closed - brute| = {max_dev:.3e}")))
    }));

    checks.push(check("zb-expectation-brute-force", || {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0, 5));
        let n = 5;
        let secret = ParitySecret::new(n, rng.gen_range(0..1u64 << n))?;
        let probs = ParityDistribution::new(secret.clone()).distribution_vector()?;
        let mut max_dev: f64 = 0.0;
        for b in 0..1u64 << (n + 1) {
            let closed = expectation_zb(&secret, b)?;
            let brute: f64 = probs
                .iter()
                .enumerate()
                .map(|(z, &p)| {
                    let sign = ((z as u64) & b).count_ones() % 2;
                    if sign == 0 {
                        p
                    } else {
                        -p
                    }
                })
                .sum();
            max_dev = max_dev.max((closed - brute).abs());
        }
        Ok((max_dev <= 1e-12, format!("max |closed - brute| = {max_dev:.3e}")))
    }));

    checks.push(check("bretagnolle-huber-kappa", || {
        let eps = kappa_to_additive_epsilon(2.0)?;
        let dev = (eps - 0.5f64.sqrt()).abs();
        Ok((dev <= 1e-12, format!("|eps - sqrt(1/2)| = {dev:.3e}")))
    }));

    checks.push(check("divergence-ordering", || {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0, 6));
        let mixed = DensityMatrix::maximally_mixed(3)?;
        let mut ok = true;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..10 {
            let rho = DensityMatrix::random_mixed(3, &mut rng)?;
            let report = divergences(&rho, &mixed, &[2.0])?;
            let d = report.relative_entropy;
            let d2 = report.renyi[0].1;
            let dmax = report.max_relative_entropy;
            let slack = (d - d2).max(d2 - dmax);
            worst = worst.max(slack);
            ok &= slack <= 1e-9;
        }
        Ok((ok, format!("worst ordering slack = {worst:.3e}")))
    }));

    checks
}

fn run_validate(cfg: &ValidateConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let checks = oracle_equivalence_suite(cfg.seed);
    let mut artifacts = RunArtifacts::new();
    let digest = emit_json(&checks, &out_dir.join("validate.json"))?;
    artifacts.record(out_dir, "validate.json", digest);

    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        artifacts.lines.push(format!(
            "{} {:width$} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    artifacts.lines.push(format!(
        "validate: {}/{} checks passed",
        checks.len() - failed,
        checks.len()
    ));
    artifacts.ok = failed == 0;
    Ok(artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::purity::PurityEstimator;

    #[test]
    fn worker_resolution_prefers_flag_then_env() {
        assert_eq!(workers_from(Some(3), Some("7")).expect("flag"), 3);
        assert_eq!(workers_from(None, Some("7")).expect("env"), 7);
        assert!(workers_from(Some(0), None).is_err());
        assert!(workers_from(None, Some("zero")).is_err());
        assert!(workers_from(None, Some("0")).is_err());
        assert!(workers_from(None, None).expect("default") >= 1);
    }

    #[test]
    fn decay_run_writes_artifacts_and_is_deterministic() {
        let cfg = DecayConfig {
            family: FamilyKind::Mixing,
            ns: vec![2, 3],
            depths: vec![1, 2],
            noise: NoiseSpec::DepolarizingLocal { p: 0.9 },
            estimator: PurityEstimator::ExactPath,
            seed: 9,
            out: None,
        };
        let job = Job::Decay(cfg);
        job.validate().expect("valid");

        let dir_a = tempfile::tempdir().expect("tempdir");
        let dir_b = tempfile::tempdir().expect("tempdir");
        let a = with_worker_pool(1, || run_with_manifest(&job, dir_a.path())).expect("run");
        let b = with_worker_pool(3, || run_with_manifest(&job, dir_b.path())).expect("run");
        assert!(a.ok && b.ok);
        assert_eq!(a.entries, b.entries, "digests differ across pool sizes");

        let manifest = RunManifest::load(&dir_a.path().join("manifest.json")).expect("manifest");
        manifest.verify(dir_a.path()).expect("digests match files");
        assert_eq!(manifest.subcommand, "decay");
        assert_eq!(manifest.outputs.len(), 2);
    }

    #[test]
    fn noiseless_decay_grid_yields_unit_purity_column() {
        let cfg = DecayConfig {
            family: FamilyKind::Mixing,
            ns: vec![2],
            depths: vec![1, 3],
            noise: NoiseSpec::DepolarizingLocal { p: 1.0 },
            estimator: PurityEstimator::ExactPath,
            seed: 4,
            out: None,
        };
        let dir = tempfile::tempdir().expect("tempdir");
        with_worker_pool(1, || run_decay(&cfg, dir.path())).expect("run");
        let body = std::fs::read_to_string(dir.path().join("decay.csv")).expect("read");
        let mut rows = 0;
        for line in body.lines().skip(1) {
            let value = line.split(',').nth(6).expect("value column");
            assert_eq!(value, "1.0000000000000000e0", "row: {line}");
            rows += 1;
        }
        assert_eq!(rows, 2);
    }

    #[test]
    fn mitigate_and_bounds_and_parity_runs_produce_expected_files() {
        let dir = tempfile::tempdir().expect("tempdir");
        let mitigate = MitigateConfig {
            family: FamilyKind::Mixing,
            n: 2,
            depth: 1,
            p: 0.9,
            observables: vec!["ZI".into(), "ZZ".into()],
            protocols: vec![
                crate::config::ProtocolConfig {
                    protocol: "pec".into(),
                    epsilon: 0.25,
                    delta: 0.25,
                    shot_cap: 20_000,
                    scales: None,
                    order: None,
                },
                crate::config::ProtocolConfig {
                    protocol: "vd".into(),
                    epsilon: 0.25,
                    delta: 0.25,
                    shot_cap: 20_000,
                    scales: None,
                    order: None,
                },
            ],
            seed: 5,
            out: None,
        };
        mitigate.validate().expect("valid");
        let arts = with_worker_pool(1, || run_mitigate(&mitigate, dir.path())).expect("run");
        assert_eq!(arts.entries.len(), 2);
        let body = std::fs::read_to_string(dir.path().join("mitigate.csv")).expect("read");
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 2, "one row per protocol x observable");
        assert!(lines[1].ends_with(",pec,ZI"));
        assert!(lines[4].ends_with(",vd,ZZ"));

        let bounds = BoundsConfig {
            family: FamilyKind::Identity,
            ns: vec![2],
            depths: vec![1, 2],
            noise: NoiseSpec::DepolarizingLocal { p: 0.9 },
            estimator: PurityEstimator::ClosedForm,
            delta: 1.0 / 3.0,
            seed: 6,
            out: None,
        };
        bounds.validate().expect("valid");
        let arts = with_worker_pool(1, || run_bounds(&bounds, dir.path())).expect("run");
        assert_eq!(arts.entries.len(), 2);
        let body = std::fs::read_to_string(dir.path().join("bounds.csv")).expect("read");
        assert_eq!(body.lines().count(), 3);
        assert!(body.starts_with("n,D,m_min_log2,method,surrogate_flag,seed\n"));

        let parity = ParityConfig {
            n: 5,
            tau: 0.1,
            query_budget: 8,
            sampling_trials: 3,
            sq_trials: 3,
            seed: 7,
            out: None,
        };
        parity.validate().expect("valid");
        let arts = with_worker_pool(2, || run_parity(&parity, dir.path())).expect("run");
        assert_eq!(arts.entries.len(), 2);
        let body = std::fs::read_to_string(dir.path().join("parity.csv")).expect("read");
        assert_eq!(body.lines().count(), 1 + 6, "header plus one row per trial");
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("parity.json")).expect("read"))
                .expect("json");
        assert_eq!(summary["budget"], 8);
        assert_eq!(summary["seed"], 7);
    }

    #[test]
    fn oracle_suite_passes_end_to_end() {
        let cfg = ValidateConfig { seed: 12, out: None };
        let dir = tempfile::tempdir().expect("tempdir");
        let arts = with_worker_pool(1, || run_validate(&cfg, dir.path())).expect("run");
        for line in &arts.lines {
            assert!(!line.starts_with("FAIL"), "failing check: {line}");
        }
        assert!(arts.ok);
        let checks: Vec<serde_json::Value> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("validate.json")).expect("read"))
                .expect("json");
        assert_eq!(checks.len(), 12);
    }

    #[test]
    fn job_load_maps_bad_configs_to_config_errors() {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"ns": [2], "depths": [1], "gamma": 2.0, "trials": 5, "seed": 1}"#)
            .expect("write");
        let err = Job::load("nonunital", &path).expect_err("invalid gamma");
        assert!(matches!(err, EmlabError::Config(_)), "{err}");
        assert!(Job::load("frobnicate", &path).is_err());

        std::fs::write(&path, r#"{"ns": [2], "depths": [1], "gamma": 0.3, "trials": 2, "seed": 1}"#)
            .expect("write");
        let mut job = Job::load("nonunital", &path).expect("valid config");
        job.override_seed(99);
        match &job {
            Job::Nonunital(c) => assert_eq!(c.seed, 99),
            other => panic!("unexpected job {other:?}"),
        }
        assert_eq!(job.out_dir(Some(Path::new("/tmp/x"))), PathBuf::from("/tmp/x"));
        assert_eq!(job.out_dir(None), PathBuf::from("."));
    }
}
