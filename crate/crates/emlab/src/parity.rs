//! Parity distributions, statistical-query oracles, Yatracos hypothesis
//! selection, and the weak-versus-strong identification experiment.
//!
//! A parity secret `s` induces the distribution over `(n+1)`-bit strings
//! `x join (x . s)` with `x` uniform (the data bits are the low `n` bits,
//! the parity bit is bit `n`). Any two distinct parity distributions sit at
//! total variation exactly 1/2, yet a tolerance-`tau` statistical-query
//! oracle answering adversarially reveals the secret only on the single
//! query `Z^(s join 1)` — sampling-based selection finds `s` from O(n)
//! draws while the query route degrades to blind search.

use crate::error::{EmlabError, Result};
use crate::stats::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Hypothesis enumeration cap: the experiment materializes all `2^n`
/// parity distributions.
pub const PARITY_ENUM_LIMIT: usize = 14;

/// Yatracos sample-bound constant: the selection guarantee is quoted for
/// `m >= C (ln k + ln(1/delta)) / epsilon^2` samples.
pub const YATRACOS_C: f64 = 8.0;

/// Answers within this distance of 1/2 are treated as the non-informative
/// oracle reply.
const HALF_TOLERANCE: f64 = 1e-12;

/// An `n`-bit parity secret.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParitySecret {
    pub n: usize,
    pub s: u64,
}

impl ParitySecret {
    pub fn new(n: usize, s: u64) -> Result<Self> {
        if n == 0 || n >= 64 {
            return Err(EmlabError::InvalidParameter(format!(
                "secret length {n} must lie in 1..=63"
            )));
        }
        if s >> n != 0 {
            return Err(EmlabError::InvalidParameter(format!(
                "secret {s:#x} does not fit in {n} bits"
            )));
        }
        Ok(Self { n, s })
    }

    fn data_mask(&self) -> u64 {
        (1u64 << self.n) - 1
    }

    /// Parity bit `x . s`.
    pub fn parity_of(&self, x: u64) -> u8 {
        ((x & self.s).count_ones() & 1) as u8
    }
}

/// The distribution `P_s` over `(n+1)`-bit strings: mass `2^-n` on every
/// `x join (x . s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParityDistribution {
    pub secret: ParitySecret,
}

impl ParityDistribution {
    pub fn new(secret: ParitySecret) -> Self {
        Self { secret }
    }

    pub fn num_bits(&self) -> usize {
        self.secret.n + 1
    }

    /// True when the string satisfies the parity constraint.
    pub fn contains(&self, z: u64) -> bool {
        let n = self.secret.n;
        let x = z & self.secret.data_mask();
        let y = ((z >> n) & 1) as u8;
        (z >> (n + 1)) == 0 && self.secret.parity_of(x) == y
    }

    pub fn mass(&self, z: u64) -> f64 {
        if self.contains(z) {
            0.5f64.powi(self.secret.n as i32)
        } else {
            0.0
        }
    }

    /// Full probability vector over `2^(n+1)` outcomes.
    pub fn distribution_vector(&self) -> Result<Vec<f64>> {
        let n = self.secret.n;
        if n > 16 {
            return Err(EmlabError::InvalidParameter(format!(
                "distribution vector materialization capped at 16 bits, got {n}"
            )));
        }
        let mut out = vec![0.0; 1usize << (n + 1)];
        let mass = 0.5f64.powi(n as i32);
        for x in 0..(1u64 << n) {
            let z = x | (u64::from(self.secret.parity_of(x)) << n);
            out[z as usize] = mass;
        }
        Ok(out)
    }
}

/// One draw from `P_s`: uniform data bits with their parity appended.
pub fn parity_sample<R: Rng>(secret: &ParitySecret, rng: &mut R) -> u64 {
    let x = rng.gen::<u64>() & secret.data_mask();
    x | (u64::from(secret.parity_of(x)) << secret.n)
}

/// Exact expectation of `Z^b` on the parity state: 1 when the data bits of
/// `b` equal `parity_bit(b) * s`, else 0. The associated rescaled query
/// value is `(1 + result) / 2`.
pub fn expectation_zb(secret: &ParitySecret, b: u64) -> Result<f64> {
    let n = secret.n;
    if b >> (n + 1) != 0 {
        return Err(EmlabError::InvalidParameter(format!(
            "b = {b:#x} does not fit in {} bits",
            n + 1
        )));
    }
    let bx = b & secret.data_mask();
    let y = (b >> n) & 1;
    let expected = if y == 1 { secret.s } else { 0 };
    Ok(if bx == expected { 1.0 } else { 0.0 })
}

/// Exact total variation between two parity distributions: 0 when the
/// secrets agree, 1/2 otherwise (the supports overlap in exactly half
/// their points).
pub fn parity_tv(a: &ParitySecret, b: &ParitySecret) -> Result<f64> {
    if a.n != b.n {
        return Err(EmlabError::DimensionMismatch(format!(
            "secret lengths {} vs {}",
            a.n, b.n
        )));
    }
    Ok(if a.s == b.s { 0.0 } else { 0.5 })
}

/// The query function of a statistical query.
#[derive(Clone)]
pub enum QueryKind {
    /// Indicator of `b . z = 0 (mod 2)`: the rescaled `Z^b` observable.
    ZParity { b: u64 },
    /// Arbitrary boolean function of (data bits, parity bit).
    Custom(Arc<dyn Fn(u64, u8) -> bool + Send + Sync>),
}

impl fmt::Debug for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryKind::ZParity { b } => write!(f, "ZParity {{ b: {b:#x} }}"),
            QueryKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A statistical query: boolean test plus tolerance.
#[derive(Clone, Debug)]
pub struct StatQuery {
    pub kind: QueryKind,
    pub tau: f64,
}

impl StatQuery {
    pub fn z_parity(b: u64, tau: f64) -> Result<Self> {
        Self::checked(QueryKind::ZParity { b }, tau)
    }

    pub fn custom(f: Arc<dyn Fn(u64, u8) -> bool + Send + Sync>, tau: f64) -> Result<Self> {
        Self::checked(QueryKind::Custom(f), tau)
    }

    fn checked(kind: QueryKind, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(EmlabError::InvalidParameter(format!(
                "tolerance must be finite and non-negative, got {tau}"
            )));
        }
        Ok(Self { kind, tau })
    }
}

/// How the oracle uses its tolerance slack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AnsweringPolicy {
    /// Truth plus uniform(-tau, tau) noise.
    HonestNoisy,
    /// Returns exactly 1/2 whenever the truth is within tau of 1/2, else
    /// moves the truth toward 1/2 by tau: the least-informative legal
    /// answer.
    AdversarialClamp,
}

/// One answered query, kept for replay audits.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AuditRow {
    pub true_value: f64,
    pub answer: f64,
    pub tau: f64,
}

/// Statistical-query oracle over a hidden parity secret.
///
/// The oracle is sequential state (query counter, audit log, noise
/// stream); concurrent experiments run one oracle instance per worker.
pub struct SqOracle {
    secret: ParitySecret,
    policy: AnsweringPolicy,
    rng: ChaCha12Rng,
    audit: Vec<AuditRow>,
}

impl SqOracle {
    pub fn new(secret: ParitySecret, policy: AnsweringPolicy, seed: u64) -> Self {
        Self {
            secret,
            policy,
            rng: ChaCha12Rng::seed_from_u64(seed),
            audit: Vec::new(),
        }
    }

    pub fn queries_answered(&self) -> u64 {
        self.audit.len() as u64
    }

    pub fn audit(&self) -> &[AuditRow] {
        &self.audit
    }

    /// True expectation of the query under `P_s`: closed form for `Z^b`
    /// queries, brute force over the support otherwise.
    pub fn true_expectation(&self, query: &StatQuery) -> Result<f64> {
        match &query.kind {
            QueryKind::ZParity { b } => {
                Ok((1.0 + expectation_zb(&self.secret, *b)?) / 2.0)
            }
            QueryKind::Custom(f) => {
                let n = self.secret.n;
                if n > 24 {
                    return Err(EmlabError::InvalidParameter(format!(
                        "custom-query brute force capped at 24 bits, got {n}"
                    )));
                }
                let mut hits = 0u64;
                for x in 0..(1u64 << n) {
                    if f(x, self.secret.parity_of(x)) {
                        hits += 1;
                    }
                }
                Ok(hits as f64 / (1u64 << n) as f64)
            }
        }
    }

    /// Answers a query within `+-tau` of the truth, per the policy.
    pub fn answer(&mut self, query: &StatQuery) -> Result<f64> {
        let truth = self.true_expectation(query)?;
        let tau = query.tau;
        let answer = match self.policy {
            AnsweringPolicy::HonestNoisy => {
                if tau == 0.0 {
                    truth
                } else {
                    truth + self.rng.gen_range(-tau..tau)
                }
            }
            AnsweringPolicy::AdversarialClamp => {
                if (truth - 0.5).abs() <= tau {
                    0.5
                } else if truth > 0.5 {
                    truth - tau
                } else {
                    truth + tau
                }
            }
        };
        self.audit.push(AuditRow {
            true_value: truth,
            answer,
            tau,
        });
        Ok(answer)
    }
}

/// Outcome of a Yatracos minimum-distance selection.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct YatracosSelection {
    /// Index of the selected hypothesis (always a member of the list).
    pub index: usize,
    /// The achieved minimum deviation over the test-set class.
    pub deviation: f64,
    /// Whether the sample count met the quoted guarantee bound.
    pub sample_bound_met: bool,
    /// The bound `ceil(C (ln k + ln(1/delta)) / epsilon^2)`.
    pub required_samples: u64,
}

fn hypothesis_membership_masks(
    samples: &[u64],
    hypotheses: &[ParityDistribution],
) -> Vec<Vec<u64>> {
    let words = samples.len().div_ceil(64);
    hypotheses
        .iter()
        .map(|h| {
            let mut mask = vec![0u64; words];
            for (t, &z) in samples.iter().enumerate() {
                if h.contains(z) {
                    mask[t / 64] |= 1u64 << (t % 64);
                }
            }
            mask
        })
        .collect()
}

fn pair_count(a: &[u64], b_not: &[u64]) -> u64 {
    a.iter()
        .zip(b_not)
        .map(|(&wa, &wb)| (wa & !wb).count_ones() as u64)
        .sum()
}

/// Minimum-distance hypothesis selection over the Yatracos class
/// `A_jl = {z : q_j(z) > q_l(z)}`.
///
/// For parity hypotheses every candidate mass has a closed form
/// (`q_i(A_jl)` is 1/2 when `i = j`, 0 when `i = l`, 1/4 otherwise), so
/// each candidate's deviation reduces to a row maximum, a column maximum,
/// and the best pair avoiding the candidate; empirical masses come from
/// per-hypothesis sample-membership bitmasks. An inadequate sample count
/// is reported through `sample_bound_met`, not an error, because the
/// guarantee constant is conservative while the selection itself remains
/// well defined.
pub fn yatracos_select(
    samples: &[u64],
    hypotheses: &[ParityDistribution],
    epsilon: f64,
    delta: f64,
) -> Result<YatracosSelection> {
    if hypotheses.is_empty() {
        return Err(EmlabError::InvalidParameter(
            "empty hypothesis list".into(),
        ));
    }
    if samples.is_empty() {
        return Err(EmlabError::InvalidParameter("no samples provided".into()));
    }
    for v in [epsilon, delta] {
        if !(v > 0.0 && v < 1.0) {
            return Err(EmlabError::InvalidParameter(format!(
                "epsilon and delta must lie in (0,1), got {v}"
            )));
        }
    }
    let n = hypotheses[0].secret.n;
    let mut seen = std::collections::HashSet::new();
    for h in hypotheses {
        if h.secret.n != n {
            return Err(EmlabError::DimensionMismatch(format!(
                "hypothesis lengths {} vs {n}",
                h.secret.n
            )));
        }
        if !seen.insert(h.secret.s) {
            return Err(EmlabError::InvalidParameter(format!(
                "duplicate hypothesis secret {:#x}",
                h.secret.s
            )));
        }
    }
    let k = hypotheses.len();
    let m = samples.len() as f64;
    let required =
        (YATRACOS_C * ((k as f64).ln() + (1.0 / delta).ln()) / (epsilon * epsilon)).ceil() as u64;
    let sample_bound_met = samples.len() as u64 >= required;

    if k == 1 {
        return Ok(YatracosSelection {
            index: 0,
            deviation: 0.0,
            sample_bound_met,
            required_samples: required,
        });
    }

    let masks = hypothesis_membership_masks(samples, hypotheses);
    let in_counts: Vec<u64> = masks
        .iter()
        .map(|mask| mask.iter().map(|w| w.count_ones() as u64).sum())
        .collect();

    // Pass 1 over unordered pairs: per-candidate row/column deviations and
    // the single best off-candidate pair.
    let mut row_dev = vec![0.0f64; k];
    let mut col_dev = vec![0.0f64; k];
    let mut best_pair = (0usize, 0usize);
    let mut best_val = f64::NEG_INFINITY;
    let pair_dev = |j: usize, l: usize, masks: &[Vec<u64>]| -> (f64, f64) {
        let inter = in_counts[j] - pair_count(&masks[j], &masks[l]);
        let emp_jl = (in_counts[j] - inter) as f64 / m;
        let emp_lj = (in_counts[l] - inter) as f64 / m;
        (emp_jl, emp_lj)
    };
    for j in 0..k {
        for l in (j + 1)..k {
            let (emp_jl, emp_lj) = pair_dev(j, l, &masks);
            // Row deviations: candidate j against A_jl, candidate l
            // against A_lj (closed-form mass 1/2).
            row_dev[j] = row_dev[j].max((0.5 - emp_jl).abs());
            row_dev[l] = row_dev[l].max((0.5 - emp_lj).abs());
            // Column deviations: candidate l against A_jl, candidate j
            // against A_lj (closed-form mass 0).
            col_dev[l] = col_dev[l].max(emp_jl);
            col_dev[j] = col_dev[j].max(emp_lj);
            // Off-candidate deviations (closed-form mass 1/4), tracked by
            // unordered pair.
            let off = (0.25 - emp_jl).abs().max((0.25 - emp_lj).abs());
            if off > best_val {
                best_val = off;
                best_pair = (j, l);
            }
        }
    }

    // Pass 2: best off-candidate pair avoiding each member of the best
    // pair, so the per-candidate maximum is exact for candidates inside
    // the best pair too.
    let (pa, pb) = best_pair;
    let mut avoid_a = f64::NEG_INFINITY;
    let mut avoid_b = f64::NEG_INFINITY;
    if k >= 3 {
        for j in 0..k {
            for l in (j + 1)..k {
                let (emp_jl, emp_lj) = pair_dev(j, l, &masks);
                let off = (0.25 - emp_jl).abs().max((0.25 - emp_lj).abs());
                if j != pa && l != pa && off > avoid_a {
                    avoid_a = off;
                }
                if j != pb && l != pb && off > avoid_b {
                    avoid_b = off;
                }
            }
        }
    }

    let mut best_index = 0usize;
    let mut best_dev = f64::INFINITY;
    for i in 0..k {
        let mut dev = row_dev[i].max(col_dev[i]);
        if k >= 3 {
            let off = if i != pa && i != pb {
                best_val
            } else if i == pa {
                avoid_a
            } else {
                avoid_b
            };
            dev = dev.max(off);
        }
        if dev < best_dev {
            best_dev = dev;
            best_index = i;
        }
    }

    Ok(YatracosSelection {
        index: best_index,
        deviation: best_dev,
        sample_bound_met,
        required_samples: required,
    })
}

/// Options for the weak-versus-strong identification experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeakToStrongOptions {
    pub n: usize,
    pub tau: f64,
    pub query_budget: u64,
    pub sampling_trials: u64,
    pub sq_trials: u64,
    pub seed: u64,
}

/// One repetition of either route.
#[derive(Clone, Debug, Serialize)]
pub struct WeakToStrongRow {
    pub route: String,
    pub trial: u64,
    pub secret: u64,
    pub success: bool,
    /// Samples drawn or queries spent in this repetition.
    pub cost: u64,
    pub seed: u64,
}

/// Contrast report of the two identification routes.
#[derive(Clone, Debug, Serialize)]
pub struct WeakToStrongReport {
    pub n: usize,
    pub tau: f64,
    pub query_budget: u64,
    pub sampling_trials: u64,
    pub sq_trials: u64,
    pub sampling_success_rate: f64,
    pub sq_success_rate: f64,
    /// Exact per-trial SQ identification probability: only the revealing
    /// query changes the adversarial answer, so hitting it is everything.
    pub sq_success_exact: f64,
    pub samples_per_trial: u64,
    pub samples_used: u64,
    pub queries_used: u64,
    pub seed: u64,
    pub rows: Vec<WeakToStrongRow>,
}

/// Selection accuracy used by the sampling route (drives both the sample
/// count `ceil(n / epsilon^2)` and the Yatracos call).
pub const WEAK_TO_STRONG_EPSILON: f64 = 0.1;
/// Failure-probability target handed to the Yatracos call.
pub const WEAK_TO_STRONG_DELTA: f64 = 0.1;

/// Runs the two identification routes over fresh uniform secrets.
///
/// Sampling route: `ceil(n / epsilon^2)` genuine draws from `P_s`, then
/// Yatracos selection over all `2^n` parity hypotheses; success means the
/// selected secret equals `s`. (At epsilon = 0.1 this is the `100 n`
/// sample budget; it sits below the conservative Yatracos guarantee bound,
/// which the per-selection flag records, yet succeeds because distinct
/// hypotheses are separated by total variation 1/2, not epsilon.)
///
/// SQ route: up to `query_budget` distinct queries `Z^(c join 1)` with `c`
/// uniform without replacement against the adversarial-clamp oracle;
/// success means some answer differs from 1/2. For tau < 1/2 exactly the
/// query `c = s` is revealing, so the per-trial success probability is
/// exactly `budget / 2^n`; for tau >= 1/2 the oracle hides everything and
/// the rate is 0.
pub fn weak_to_strong_experiment(opts: &WeakToStrongOptions) -> Result<WeakToStrongReport> {
    let n = opts.n;
    if n == 0 || n > PARITY_ENUM_LIMIT {
        return Err(EmlabError::InvalidParameter(format!(
            "experiment register {n} must lie in 1..={PARITY_ENUM_LIMIT}"
        )));
    }
    let k = 1u64 << n;
    if opts.query_budget == 0 || opts.query_budget > k {
        return Err(EmlabError::InvalidParameter(format!(
            "query budget {} must lie in 1..=2^{n}",
            opts.query_budget
        )));
    }
    if opts.sampling_trials == 0 || opts.sq_trials == 0 {
        return Err(EmlabError::InvalidParameter(
            "both routes need at least one trial".into(),
        ));
    }
    if !(opts.tau >= 0.0 && opts.tau.is_finite()) {
        return Err(EmlabError::InvalidParameter(format!(
            "tau must be finite and non-negative, got {}",
            opts.tau
        )));
    }

    let hypotheses: Vec<ParityDistribution> = (0..k)
        .map(|s| Ok(ParityDistribution::new(ParitySecret::new(n, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let samples_per_trial =
        (n as f64 / (WEAK_TO_STRONG_EPSILON * WEAK_TO_STRONG_EPSILON)).ceil() as u64;

    let sampling_rows: Vec<WeakToStrongRow> = (0..opts.sampling_trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(opts.seed, 20, t);
            let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
            let secret = ParitySecret::new(n, rng.gen::<u64>() & (k - 1))?;
            let samples: Vec<u64> = (0..samples_per_trial)
                .map(|_| parity_sample(&secret, &mut rng))
                .collect();
            let selection = yatracos_select(
                &samples,
                &hypotheses,
                WEAK_TO_STRONG_EPSILON,
                WEAK_TO_STRONG_DELTA,
            )?;
            Ok(WeakToStrongRow {
                route: "sampling".into(),
                trial: t,
                secret: secret.s,
                success: hypotheses[selection.index].secret.s == secret.s,
                cost: samples_per_trial,
                seed: trial_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let sq_rows: Vec<WeakToStrongRow> = (0..opts.sq_trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(opts.seed, 21, t);
            let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
            let secret = ParitySecret::new(n, rng.gen::<u64>() & (k - 1))?;
            let mut oracle = SqOracle::new(
                secret,
                AnsweringPolicy::AdversarialClamp,
                derive_seed(opts.seed, 22, t),
            );
            // Distinct candidates via partial Fisher-Yates.
            let mut candidates: Vec<u64> = (0..k).collect();
            let mut success = false;
            for i in 0..opts.query_budget as usize {
                let j = rng.gen_range(i..candidates.len());
                candidates.swap(i, j);
                let b = candidates[i] | (1u64 << n);
                let answer = oracle.answer(&StatQuery::z_parity(b, opts.tau)?)?;
                if (answer - 0.5).abs() > HALF_TOLERANCE {
                    success = true;
                    break;
                }
            }
            Ok(WeakToStrongRow {
                route: "sq".into(),
                trial: t,
                secret: secret.s,
                success,
                cost: oracle.queries_answered(),
                seed: trial_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rate = |rows: &[WeakToStrongRow]| {
        rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
    };
    let sampling_success_rate = rate(&sampling_rows);
    let sq_success_rate = rate(&sq_rows);
    let queries_used = sq_rows.iter().map(|r| r.cost).sum();
    let sq_success_exact = if opts.tau < 0.5 {
        opts.query_budget as f64 / k as f64
    } else {
        0.0
    };

    let mut rows = sampling_rows;
    rows.extend(sq_rows);
    Ok(WeakToStrongReport {
        n,
        tau: opts.tau,
        query_budget: opts.query_budget,
        sampling_trials: opts.sampling_trials,
        sq_trials: opts.sq_trials,
        sampling_success_rate,
        sq_success_rate,
        sq_success_exact,
        samples_per_trial,
        samples_used: samples_per_trial * opts.sampling_trials,
        queries_used,
        seed: opts.seed,
        rows,
    })
}
