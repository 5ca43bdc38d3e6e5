//! Correlations, significance and distribution summaries.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("empty series")]
    Empty,
}

/// Correlation strength bands on `|r|`: below .20 very weak, then weak,
/// moderate, strong, and very strong from .80.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strength {
    VeryWeak,
    Weak,
    Moderate,
    Strong,
    VeryStrong,
}

impl Strength {
    pub fn of(r: f64) -> Strength {
        let a = r.abs();
        if a >= 0.80 {
            Strength::VeryStrong
        } else if a >= 0.60 {
            Strength::Strong
        } else if a >= 0.40 {
            Strength::Moderate
        } else if a >= 0.20 {
            Strength::Weak
        } else {
            Strength::VeryWeak
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strength::VeryWeak => "very weak",
            Strength::Weak => "weak",
            Strength::Moderate => "moderate",
            Strength::Strong => "strong",
            Strength::VeryStrong => "very strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    /// Two-tailed.
    pub p: f64,
    pub strength: Strength,
}

impl CorrelationResult {
    fn new(r: f64, n: usize) -> Self {
        let r = r.clamp(-1.0, 1.0);
        Self { r, n, p: correlation_p_value(r, n), strength: Strength::of(r) }
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Two-tailed p for a sample correlation via the t statistic with n - 2
/// degrees of freedom: `P(|T| > |t|) = I_{df/(df+t²)}(df/2, 1/2)`.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return f64::NAN;
    }
    let df = (n - 2) as f64;
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    // df/(df+t²) with t² = r² df / (1 - r²) simplifies to 1 - r².
    beta_reg(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0)
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(CorrelationResult::new(sxy / (sxx.sqrt() * syy.sqrt()), x.len()))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    check_pair(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(x: &[f64]) -> Result<f64, StatsError> {
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&s, 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub histogram: Vec<HistogramBin>,
}

pub const DEFAULT_BINS: usize = 16;

/// Order statistics (type-7) plus a histogram of `DEFAULT_BINS` bins over
/// the data range.
pub fn summarize_distribution(scores: &[f64]) -> Result<DistributionSummary, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    summarize_with_bins(scores, s[0], s[s.len() - 1], DEFAULT_BINS)
}

/// As [`summarize_distribution`] with a fixed histogram range, so traces of
/// different groups share bins. Values outside `[lo, hi]` fall in the edge bins.
pub fn summarize_with_bins(scores: &[f64], lo: f64, hi: f64, bins: usize) -> Result<DistributionSummary, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin { lower: lo + width * i as f64, upper: lo + width * (i + 1) as f64, count: 0 })
        .collect();
    for v in &s {
        let idx = if width > 0.0 { ((v - lo) / width).floor() as isize } else { 0 };
        histogram[idx.clamp(0, bins as isize - 1) as usize].count += 1;
    }
    Ok(DistributionSummary {
        n: s.len(),
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
        mean: mean(&s),
        histogram,
    })
}
