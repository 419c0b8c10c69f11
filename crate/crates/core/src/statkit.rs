//! Numeric kernels shared by every feature family.
//!
//! All moments use the population (divide-by-n) convention. Entropy is
//! reported in bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("undefined Cov: mean is zero")]
    UndefinedCov,
}

/// The seven summary statistics computed for every per-user series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistParams {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub skewness: f64,
    pub entropy: f64,
}

impl DistParams {
    /// Column suffixes, in the order returned by [`DistParams::to_array`].
    pub const NAMES: [&'static str; 7] = ["min", "max", "mean", "median", "std", "skew", "entropy"];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.min,
            self.max,
            self.mean,
            self.median,
            self.std,
            self.skewness,
            self.entropy,
        ]
    }
}

/// How samples are grouped into categories before computing entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinPolicy {
    /// One category per distinct value.
    Exact,
    /// `n` equal-width bins spanning `[min, max]`.
    EqualWidth(usize),
}

impl BinPolicy {
    pub const CONTINUOUS_BINS: usize = 20;

    /// Exact categories for integer-valued samples, 20 equal-width bins otherwise.
    pub fn auto(values: &[f64]) -> Self {
        if values.iter().all(|v| v.fract() == 0.0) {
            BinPolicy::Exact
        } else {
            BinPolicy::EqualWidth(Self::CONTINUOUS_BINS)
        }
    }
}

fn check(values: &[f64]) -> Result<(), StatError> {
    if values.is_empty() {
        return Err(StatError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatError::NonFinite);
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> Result<f64, StatError> {
    check(values)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Result<f64, StatError> {
    let m = mean(values)?;
    Ok(central_moment(values, m, 2).sqrt())
}

fn central_moment(values: &[f64], mean: f64, order: i32) -> f64 {
    values.iter().map(|v| (v - mean).powi(order)).sum::<f64>() / values.len() as f64
}

/// Median of an already sorted, nonempty slice.
fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn median(values: &[f64]) -> Result<f64, StatError> {
    check(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_median(&sorted))
}

/// Fisher-Pearson skewness `m3 / m2^1.5`; zero for zero-variance samples.
pub fn skewness(values: &[f64]) -> Result<f64, StatError> {
    let m = mean(values)?;
    Ok(skew_from(values, m))
}

fn skew_from(values: &[f64], mean: f64) -> f64 {
    let m2 = central_moment(values, mean, 2);
    if m2 == 0.0 {
        return 0.0;
    }
    central_moment(values, mean, 3) / m2.powf(1.5)
}

/// Shannon entropy (bits) of a frequency table.
pub fn entropy_of_counts<I>(counts: I) -> f64
where
    I: IntoIterator<Item = u64>,
{
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // a single category gives -1*log2(1) = -0.0
    h.max(0.0)
}

/// Shannon entropy (bits) of the empirical distribution of `values`.
pub fn entropy_of(values: &[f64], binning: BinPolicy) -> Result<f64, StatError> {
    check(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_entropy(&sorted, binning))
}

fn sorted_entropy(sorted: &[f64], binning: BinPolicy) -> f64 {
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if lo == hi {
        return 0.0;
    }
    match binning {
        BinPolicy::Exact => {
            let mut counts = Vec::new();
            let mut run = 1u64;
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                } else {
                    counts.push(run);
                    run = 1;
                }
            }
            counts.push(run);
            entropy_of_counts(counts)
        }
        BinPolicy::EqualWidth(bins) => {
            let bins = bins.max(1);
            let width = (hi - lo) / bins as f64;
            let mut counts = vec![0u64; bins];
            for &v in sorted {
                let idx = (((v - lo) / width) as usize).min(bins - 1);
                counts[idx] += 1;
            }
            entropy_of_counts(counts)
        }
    }
}

/// Min, max, mean, median, population std, skewness and entropy of a sample.
///
/// Entropy uses [`BinPolicy::auto`].
pub fn dist_params(values: &[f64]) -> Result<DistParams, StatError> {
    check(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let m2 = central_moment(values, mean, 2);
    Ok(DistParams {
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        median: sorted_median(&sorted),
        std: m2.sqrt(),
        skewness: skew_from(values, mean),
        entropy: sorted_entropy(&sorted, BinPolicy::auto(values)),
    })
}

/// Population std divided by the mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64, StatError> {
    let m = mean(values)?;
    if m == 0.0 {
        return Err(StatError::UndefinedCov);
    }
    Ok(central_moment(values, m, 2).sqrt() / m)
}
