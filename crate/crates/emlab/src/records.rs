//! Experiment records, CSV/JSON emission, digests, and run manifests.
//!
//! Every emitter prints floats with 17 significant digits (`{:.16e}`), uses a
//! fixed column order, and returns the SHA-256 digest of the exact bytes
//! written, so identical inputs produce byte-identical artifacts regardless
//! of worker count. Field values are controlled labels and numbers, never
//! free text, so no CSV quoting is needed.

use crate::bounds::ChartRow;
use crate::error::{EmlabError, Result};
use crate::mitigate::MitigationResult;
use crate::parity::WeakToStrongReport;
use crate::purity::{DecayCurve, NonunitalCurve};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Header of the shared experiment CSV schema.
pub const RECORD_HEADER: &str = "family,n,D,noise_kind,param,estimator,value,stderr,seed";

/// Header of the mitigation CSV: the shared schema plus protocol and
/// observable columns, one row per (protocol, observable) pair.
pub const MITIGATION_HEADER: &str =
    "family,n,D,noise_kind,param,estimator,value,stderr,seed,protocol,observable";

/// Header of the bound-chart CSV.
pub const BOUNDS_HEADER: &str = "n,D,m_min_log2,method,surrogate_flag,seed";

/// Header of the parity-contrast CSV, one row per repetition of either
/// route.
pub const PARITY_HEADER: &str = "route,trial,secret,success,cost,seed";

/// Formats a float with 17 significant digits; infinities print as
/// `inf`/`-inf`, which `f64::from_str` parses back.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row of the shared experiment schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub family: String,
    pub n: usize,
    pub depth: usize,
    pub noise_kind: String,
    pub param: f64,
    pub estimator: String,
    pub value: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl ExperimentRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.family,
            self.n,
            self.depth,
            self.noise_kind,
            format_float(self.param),
            self.estimator,
            format_float(self.value),
            format_float(self.stderr),
            self.seed
        )
    }
}

/// One row of the mitigation CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationRow {
    pub family: String,
    pub n: usize,
    pub depth: usize,
    pub noise_kind: String,
    pub param: f64,
    pub estimator: String,
    pub value: f64,
    pub stderr: f64,
    pub seed: u64,
    pub protocol: String,
    pub observable: String,
}

impl MitigationRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.family,
            self.n,
            self.depth,
            self.noise_kind,
            format_float(self.param),
            self.estimator,
            format_float(self.value),
            format_float(self.stderr),
            self.seed,
            self.protocol,
            self.observable
        )
    }
}

/// Flattens a decay curve into shared-schema rows (value = purity).
pub fn decay_records(curve: &DecayCurve) -> Vec<ExperimentRecord> {
    curve
        .points
        .iter()
        .map(|pt| ExperimentRecord {
            family: curve.family.label().into(),
            n: pt.n,
            depth: pt.depth,
            noise_kind: curve.noise.kind_label().into(),
            param: curve.noise.parameter(),
            estimator: curve.estimator.label().into(),
            value: pt.purity,
            stderr: pt.stderr,
            seed: pt.seed,
        })
        .collect()
}

/// Flattens the non-unital experiment into shared-schema rows
/// (value = mean relative entropy to the maximally mixed state). The layers
/// are sampled uniform Cliffords, hence the mixing family label; full means
/// including purity live in the JSON report.
pub fn nonunital_records(curve: &NonunitalCurve) -> Vec<ExperimentRecord> {
    curve
        .points
        .iter()
        .map(|pt| ExperimentRecord {
            family: "mixing".into(),
            n: pt.n,
            depth: pt.depth,
            noise_kind: "amplitude-damping".into(),
            param: curve.gamma,
            estimator: "dense".into(),
            value: pt.mean_divergence,
            stderr: pt.stderr_divergence,
            seed: curve.master_seed,
        })
        .collect()
}

/// Expands one mitigation run into per-observable rows.
#[allow(clippy::too_many_arguments)]
pub fn mitigation_rows(
    result: &MitigationResult,
    observable_names: &[String],
    family: &str,
    n: usize,
    depth: usize,
    noise_kind: &str,
    param: f64,
    seed: u64,
) -> Result<Vec<MitigationRow>> {
    if observable_names.len() != result.estimates.len() {
        return Err(EmlabError::DimensionMismatch(format!(
            "{} observable names for {} estimates",
            observable_names.len(),
            result.estimates.len()
        )));
    }
    Ok(observable_names
        .iter()
        .zip(result.estimates.iter().zip(result.stderrs.iter()))
        .map(|(name, (&value, &stderr))| MitigationRow {
            family: family.into(),
            n,
            depth,
            noise_kind: noise_kind.into(),
            param,
            estimator: if result.partial {
                "pilot-partial".into()
            } else {
                "median-of-means".into()
            },
            value,
            stderr,
            seed,
            protocol: result.protocol.clone(),
            observable: name.clone(),
        })
        .collect())
}

fn join_lines(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut body = String::with_capacity(256);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(&row);
        body.push('\n');
    }
    body
}

/// Shared-schema CSV body: header plus one line per record.
pub fn records_csv(records: &[ExperimentRecord]) -> String {
    join_lines(RECORD_HEADER, records.iter().map(|r| r.csv_row()))
}

/// Mitigation CSV body.
pub fn mitigation_csv(rows: &[MitigationRow]) -> String {
    join_lines(MITIGATION_HEADER, rows.iter().map(|r| r.csv_row()))
}

/// Bound-chart CSV body.
pub fn bounds_csv(rows: &[ChartRow]) -> String {
    join_lines(
        BOUNDS_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.n,
                r.depth,
                format_float(r.m_min_log2),
                r.method,
                r.surrogate,
                r.seed
            )
        }),
    )
}

/// Parity-contrast CSV body, one row per repetition.
pub fn parity_csv(report: &WeakToStrongReport) -> String {
    join_lines(
        PARITY_HEADER,
        report.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.route, r.trial, r.secret, r.success, r.cost, r.seed
            )
        }),
    )
}

/// Output format for record emission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Json,
}

/// Writes the records to `path` in the chosen format and returns the
/// SHA-256 digest of the bytes written. CSV keeps the fixed column order of
/// [`RECORD_HEADER`]; an empty list yields a header-only file. JSON is a
/// pretty-printed array that parses back into equal records.
pub fn emit_records(records: &[ExperimentRecord], format: EmitFormat, path: &Path) -> Result<String> {
    let body = match format {
        EmitFormat::Csv => records_csv(records),
        EmitFormat::Json => {
            let mut s = serde_json::to_string_pretty(records)?;
            s.push('\n');
            s
        }
    };
    write_artifact(path, &body)
}

/// SHA-256 digest in lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Writes a text artifact, creating parent directories, and returns the
/// SHA-256 digest of its bytes.
pub fn write_artifact(path: &Path, body: &str) -> Result<String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, body.as_bytes())?;
    Ok(sha256_hex(body.as_bytes()))
}

/// One emitted file tracked by a manifest: file name (relative to the
/// output directory) and content digest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

/// Provenance sidecar written after every CLI run: the parsed config, the
/// tool version, wall-clock bounds, and a digest per output file.
/// Timestamps are informational only and excluded from reproducibility
/// comparisons.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub started_utc: String,
    pub finished_utc: String,
    pub config: serde_json::Value,
    pub outputs: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        RunManifest {
            tool: "emlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            started_utc: chrono::Utc::now().to_rfc3339(),
            finished_utc: String::new(),
            config,
            outputs: Vec::new(),
        }
    }

    pub fn push_output(&mut self, name: impl Into<String>, sha256: String) {
        self.outputs.push(ManifestEntry {
            path: name.into(),
            sha256,
        });
    }

    /// Stamps the end time and writes the manifest next to its outputs.
    pub fn finish_and_write(&mut self, path: &Path) -> Result<String> {
        self.finished_utc = chrono::Utc::now().to_rfc3339();
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        write_artifact(path, &body)
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes the digest of every listed output under `dir` and fails
    /// on the first mismatch or missing file.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for entry in &self.outputs {
            let bytes = std::fs::read(dir.join(&entry.path))?;
            let got = sha256_hex(&bytes);
            if got != entry.sha256 {
                return Err(EmlabError::Config(format!(
                    "digest mismatch for {}: manifest {} vs file {}",
                    entry.path, entry.sha256, got
                )));
            }
        }
        Ok(())
    }
}
