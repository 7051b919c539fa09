//! Shared statistical utilities: streaming moments, least squares fits,
//! chi-square thresholds, median-of-means, an exact monotone trend test, and
//! deterministic seed derivation.

use crate::error::{EmlabError, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Streaming mean/variance accumulator (Welford's algorithm).
#[derive(Clone, Debug, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Ordinary least squares fit of y against a single regressor.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual-based standard error of the slope (n - 2 degrees of freedom).
    pub slope_stderr: f64,
    /// Two-sided 95% confidence interval for the slope.
    pub slope_ci95: (f64, f64),
    pub points: usize,
}

/// Fits `y = intercept + slope * x` by least squares.
///
/// Requires at least three points so the residual degrees of freedom are
/// positive; a degenerate regressor (all x equal) is rejected.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(EmlabError::DimensionMismatch(format!(
            "ols: {} x values vs {} y values",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(EmlabError::InvalidParameter(format!(
            "ols: need at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let xbar = x.iter().sum::<f64>() / nf;
    let ybar = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - xbar) * (v - xbar)).sum();
    if sxx <= 0.0 {
        return Err(EmlabError::InvalidParameter(
            "ols: regressor is constant".into(),
        ));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - xbar) * (b - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = y.iter().map(|&v| (v - ybar) * (v - ybar)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let dof = (n - 2) as f64;
    let slope_stderr = (ss_res / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| EmlabError::Numerical(format!("t distribution: {e}")))?
        .inverse_cdf(0.975);
    Ok(OlsFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        slope_ci95: (slope - t * slope_stderr, slope + t * slope_stderr),
        points: n,
    })
}

/// Upper critical value of the chi-square distribution: the threshold t with
/// P[X > t] = `alpha` for `dof` degrees of freedom.
pub fn chi_square_critical(dof: usize, alpha: f64) -> Result<f64> {
    if dof == 0 || !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(EmlabError::InvalidParameter(format!(
            "chi-square critical: dof {dof}, alpha {alpha}"
        )));
    }
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| EmlabError::Numerical(format!("chi-square distribution: {e}")))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Pearson chi-square statistic of observed counts against uniform expected
/// counts.
pub fn chi_square_uniform(counts: &[u64], total: u64) -> f64 {
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Median of block means over `values`, taken in order with the given block
/// size. Trailing values that do not fill a block are dropped.
pub fn median_of_means(values: &[f64], block_size: usize) -> Result<f64> {
    if block_size == 0 {
        return Err(EmlabError::InvalidParameter("block size 0".into()));
    }
    let blocks = values.len() / block_size;
    if blocks == 0 {
        return Err(EmlabError::InvalidParameter(format!(
            "median of means: {} values cannot fill a block of {}",
            values.len(),
            block_size
        )));
    }
    let mut means: Vec<f64> = (0..blocks)
        .map(|b| {
            let chunk = &values[b * block_size..(b + 1) * block_size];
            chunk.iter().sum::<f64>() / block_size as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).expect("non-finite block mean"));
    let mid = blocks / 2;
    Ok(if blocks % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    })
}

/// One-sided exact Mann-Kendall trend test for an increasing sequence.
///
/// Returns `(s_statistic, p_value)` where `s` is the number of concordant
/// minus discordant pairs and the p-value is the exact null probability of a
/// statistic at least as large under a uniformly random ordering. Assumes no
/// ties; tied pairs count as discordant, which is conservative for an
/// increasing-trend claim.
pub fn mann_kendall_increasing(values: &[f64]) -> Result<(i64, f64)> {
    let k = values.len();
    if k < 3 {
        return Err(EmlabError::InvalidParameter(format!(
            "mann-kendall: need at least 3 values, got {k}"
        )));
    }
    let mut s: i64 = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            if values[j] > values[i] {
                s += 1;
            } else {
                s -= 1;
            }
        }
    }
    let pairs = (k * (k - 1) / 2) as i64;
    // S = pairs - 2 * inversions for a permutation without ties, so
    // P[S >= s] = P[inversions <= (pairs - s) / 2].
    let max_inv = (pairs - s) / 2;
    let table = mahonian_row(k);
    let total: f64 = (1..=k as u64).map(|v| v as f64).product();
    let cum: f64 = table
        .iter()
        .take((max_inv.max(0) as usize) + 1)
        .map(|&c| c as f64)
        .sum();
    Ok((s, cum / total))
}

/// Number of permutations of `k` elements by inversion count (Mahonian row).
fn mahonian_row(k: usize) -> Vec<u64> {
    let mut row = vec![1u64];
    for m in 2..=k {
        let max_new = row.len() + m - 1;
        let mut next = vec![0u64; max_new];
        for (inv, &count) in row.iter().enumerate() {
            for add in 0..m {
                next[inv + add] += count;
            }
        }
        row = next;
    }
    row
}

/// Derives an independent child seed from a master seed, a stream label, and
/// a per-item index, using SplitMix64 finalization. Distinct inputs give
/// well-separated generator states, and the scheme is stable across worker
/// counts because it depends only on the item's identity.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(stream).wrapping_add(splitmix(index).rotate_left(17)))
}
