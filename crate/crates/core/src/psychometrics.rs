//! Reliability, construct validity, structural checks and shaping efficacy.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::catalog::{column_label, CriterionMap, Sign};
use crate::domain::Domain;
use crate::prompts::ShapingMode;
use crate::scoring::{ScoreMatrix, ScoringError};
use crate::stats::{self, CorrelationResult, DistributionSummary, StatsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PsychometricError {
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("need at least {needed} respondents, got {got}")]
    TooFewRespondents { needed: usize, got: usize },
    #[error("item {0} has zero variance")]
    ZeroVariance(String),
    #[error("every item has zero variance")]
    AllDropped,
    #[error("rows have unequal lengths")]
    Ragged,
    #[error("singular correlation matrix; linearly dependent items: {0:?}")]
    Singular(Vec<String>),
    #[error("factor fit did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("determinant of the correlation matrix is not positive")]
    NonPositiveDeterminant,
    #[error("no correlation structure")]
    NoCorrelationStructure,
    #[error("no observations at level {0}")]
    EmptyLevel(u8),
    #[error("level {0} not valid for this shaping mode")]
    InvalidLevel(u8),
    #[error("no profiles complete on both instruments")]
    EmptyJoin,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Respondents x items, with item ids as column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMatrix {
    pub item_ids: Vec<String>,
    pub data: DMatrix<f64>,
}

impl ItemMatrix {
    pub fn new(item_ids: Vec<String>, data: DMatrix<f64>) -> Result<Self, PsychometricError> {
        if item_ids.len() != data.ncols() {
            return Err(PsychometricError::Ragged);
        }
        Ok(Self { item_ids, data })
    }

    pub fn from_rows(item_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, PsychometricError> {
        let k = item_ids.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(PsychometricError::Ragged);
        }
        let data = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        Self::new(item_ids, data)
    }

    /// Items labelled `i1..ik`.
    pub fn unlabeled(rows: &[Vec<f64>]) -> Result<Self, PsychometricError> {
        let k = rows.first().map_or(0, Vec::len);
        Self::from_rows((1..=k).map(|i| format!("i{i}")).collect(), rows)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    fn column_variances(&self) -> Vec<f64> {
        (0..self.k()).map(|j| column_variance(&self.data, j)).collect()
    }

    fn total_variance(&self) -> f64 {
        let totals: Vec<f64> = self.data.row_iter().map(|r| r.sum()).collect();
        stats::variance(&totals)
    }

    fn check(&self, min_items: usize) -> Result<(), PsychometricError> {
        if self.k() < min_items {
            return Err(PsychometricError::TooFewItems { needed: min_items, got: self.k() });
        }
        if self.n() < 2 {
            return Err(PsychometricError::TooFewRespondents { needed: 2, got: self.n() });
        }
        for (j, v) in self.column_variances().into_iter().enumerate() {
            if v <= 0.0 {
                return Err(PsychometricError::ZeroVariance(self.item_ids[j].clone()));
            }
        }
        Ok(())
    }
}

fn column_variance(m: &DMatrix<f64>, j: usize) -> f64 {
    let c = m.column(j);
    let n = c.len() as f64;
    let mean = c.sum() / n;
    c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Removes constant columns and reports their ids.
pub fn drop_zero_variance(m: &ItemMatrix) -> Result<(ItemMatrix, Vec<String>), PsychometricError> {
    let vars = m.column_variances();
    let keep: Vec<usize> = (0..m.k()).filter(|&j| vars[j] > 0.0 && vars[j].is_finite()).collect();
    let dropped = (0..m.k()).filter(|j| !keep.contains(j)).map(|j| m.item_ids[j].clone()).collect();
    if keep.is_empty() {
        return Err(PsychometricError::AllDropped);
    }
    let data = m.data.select_columns(&keep);
    Ok((ItemMatrix { item_ids: keep.iter().map(|&j| m.item_ids[j].clone()).collect(), data }, dropped))
}

/// `α = k/(k-1) · (1 - Σσ²_i / σ²_X)`.
pub fn cronbach_alpha(m: &ItemMatrix) -> Result<f64, PsychometricError> {
    m.check(2)?;
    let k = m.k() as f64;
    let item_var: f64 = m.column_variances().iter().sum();
    Ok(k / (k - 1.0) * (1.0 - item_var / m.total_variance()))
}

/// Pearson correlation matrix of the item columns.
pub fn correlation_matrix(m: &ItemMatrix) -> DMatrix<f64> {
    let n = m.n() as f64;
    let k = m.k();
    let mut centered = m.data.clone();
    let mut sd = Vec::with_capacity(k);
    for j in 0..k {
        let mean = centered.column(j).sum() / n;
        centered.column_mut(j).add_scalar_mut(-mean);
        sd.push(centered.column(j).norm());
    }
    let cov = centered.transpose() * &centered;
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { cov[(i, j)] / (sd[i] * sd[j]) })
}

const SINGULAR_TOL: f64 = 1e-10;

/// Inverse of a symmetric positive-definite correlation matrix, or the ids
/// of the items spanning its null space.
fn invert_correlation(r: &DMatrix<f64>, ids: &[String]) -> Result<DMatrix<f64>, PsychometricError> {
    let eig = SymmetricEigen::new(r.clone());
    let k = r.nrows() as f64;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let null: Vec<usize> = (0..r.nrows()).filter(|&i| eig.eigenvalues[i] <= SINGULAR_TOL * k * scale).collect();
    if !null.is_empty() {
        let mut dependent: Vec<String> = (0..r.nrows())
            .filter(|&row| null.iter().any(|&c| eig.eigenvectors[(row, c)].abs() > 1e-6))
            .map(|row| ids[row].clone())
            .collect();
        dependent.dedup();
        return Err(PsychometricError::Singular(dependent));
    }
    r.clone().try_inverse().ok_or_else(|| PsychometricError::Singular(ids.to_vec()))
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its eigendecomposition.
fn pseudo_inverse(r: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(r.clone());
    let k = r.nrows() as f64;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let inv = eig.eigenvalues.map(|v| if v > SINGULAR_TOL * k * scale { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Squared multiple correlation of each item on the rest, `1 - 1/(R⁻¹)_ii`.
pub fn smc(r_inv: &DMatrix<f64>) -> Vec<f64> {
    (0..r_inv.nrows()).map(|i| 1.0 - 1.0 / r_inv[(i, i)]).collect()
}

fn lambda6_from(m: &ItemMatrix, r_inv: &DMatrix<f64>) -> f64 {
    let vars = m.column_variances();
    let error: f64 = vars.iter().zip(smc(r_inv)).map(|(v, s)| v * (1.0 - s)).sum();
    1.0 - error / m.total_variance()
}

/// `λ6 = 1 - Σ e²_i / V_x` with `e²_i = σ²_i (1 - SMC_i)`.
pub fn guttman_lambda6(m: &ItemMatrix) -> Result<f64, PsychometricError> {
    m.check(2)?;
    let r = correlation_matrix(m);
    let inv = invert_correlation(&r, &m.item_ids)?;
    Ok(lambda6_from(m, &inv))
}

/// λ6 that falls back to the pseudo-inverse on a singular correlation
/// matrix; the flag reports the fallback.
pub fn guttman_lambda6_or_degraded(m: &ItemMatrix) -> Result<(f64, bool), PsychometricError> {
    match guttman_lambda6(m) {
        Ok(v) => Ok((v, false)),
        Err(PsychometricError::Singular(_)) => {
            let pinv = pseudo_inverse(&correlation_matrix(m));
            // A zero diagonal in the pseudo-inverse would give SMC = -inf.
            if (0..pinv.nrows()).any(|i| pinv[(i, i)] <= 0.0) {
                return Err(PsychometricError::Singular(m.item_ids.clone()));
            }
            Ok((lambda6_from(m, &pinv).clamp(f64::NEG_INFINITY, 1.0), true))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFit {
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Items whose communality exceeded 1 and was clamped.
    pub heywood: Vec<usize>,
}

pub const FACTOR_MAX_ITER: usize = 10_000;
const FACTOR_TOL: f64 = 1e-12;

/// Single-factor minimum-residual fit of a correlation matrix by iterated
/// principal axes: communalities start at the SMCs and are replaced by the
/// squared loadings of the leading eigenvector of the reduced matrix until
/// they stop changing. The fixed point minimizes the squared off-diagonal
/// residuals.
pub fn fit_single_factor(r: &DMatrix<f64>) -> Result<FactorFit, PsychometricError> {
    let k = r.nrows();
    if k < 3 {
        return Err(PsychometricError::TooFewItems { needed: 3, got: k });
    }
    let mut h2: Vec<f64> = match r.clone().try_inverse() {
        Some(inv) => smc(&inv).into_iter().map(|s| s.clamp(0.0, 1.0)).collect(),
        None => (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| r[(i, j)].abs()).fold(0.0, f64::max)).collect(),
    };
    let mut loadings = vec![0.0; k];
    let mut heywood = Vec::new();
    for iter in 1..=FACTOR_MAX_ITER {
        let mut reduced = r.clone();
        for i in 0..k {
            reduced[(i, i)] = h2[i];
        }
        let eig = SymmetricEigen::new(reduced);
        let (top, &value) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let v = eig.eigenvectors.column(top);
        let s = value.max(0.0).sqrt();
        let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
        heywood.clear();
        let mut delta = 0.0f64;
        for i in 0..k {
            loadings[i] = sign * v[i] * s;
            let mut next = loadings[i] * loadings[i];
            if next > 1.0 {
                next = 1.0;
                loadings[i] = loadings[i].signum();
                heywood.push(i);
            }
            delta = delta.max((next - h2[i]).abs());
            h2[i] = next;
        }
        if delta < FACTOR_TOL {
            return Ok(FactorFit {
                uniquenesses: h2.iter().map(|h| (1.0 - h).max(0.0)).collect(),
                loadings,
                iterations: iter,
                converged: true,
                heywood,
            });
        }
    }
    Err(PsychometricError::NonConvergence(FACTOR_MAX_ITER))
}

/// `ω = (Σλ)² / ((Σλ)² + Σψ)` for a fitted single factor.
pub fn omega_from_fit(fit: &FactorFit) -> f64 {
    let s: f64 = fit.loadings.iter().sum();
    let common = s * s;
    let unique: f64 = fit.uniquenesses.iter().sum();
    if common + unique == 0.0 {
        0.0
    } else {
        (common / (common + unique)).clamp(0.0, 1.0)
    }
}

pub fn omega_from_correlation(r: &DMatrix<f64>) -> Result<(f64, FactorFit), PsychometricError> {
    let fit = fit_single_factor(r)?;
    Ok((omega_from_fit(&fit), fit))
}

pub fn mcdonald_omega(m: &ItemMatrix) -> Result<(f64, FactorFit), PsychometricError> {
    m.check(3)?;
    omega_from_correlation(&correlation_matrix(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReliabilityBand {
    Unacceptable,
    Poor,
    Questionable,
    Acceptable,
    Good,
    Excellent,
}

impl ReliabilityBand {
    pub fn label(self) -> &'static str {
        match self {
            ReliabilityBand::Unacceptable => "unacceptable",
            ReliabilityBand::Poor => "poor",
            ReliabilityBand::Questionable => "questionable",
            ReliabilityBand::Acceptable => "acceptable",
            ReliabilityBand::Good => "good",
            ReliabilityBand::Excellent => "excellent",
        }
    }

    /// Compact summary mark: `++` good or better, `+` acceptable, `-`
    /// questionable or poor, `--` unacceptable.
    pub fn mark(self) -> &'static str {
        match self {
            ReliabilityBand::Excellent | ReliabilityBand::Good => "++",
            ReliabilityBand::Acceptable => "+",
            ReliabilityBand::Questionable | ReliabilityBand::Poor => "-",
            ReliabilityBand::Unacceptable => "--",
        }
    }
}

impl fmt::Display for ReliabilityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Lower bounds are inclusive. NaN is unacceptable.
pub fn interpret_reliability(value: f64) -> ReliabilityBand {
    if value >= 0.90 {
        ReliabilityBand::Excellent
    } else if value >= 0.80 {
        ReliabilityBand::Good
    } else if value >= 0.70 {
        ReliabilityBand::Acceptable
    } else if value >= 0.60 {
        ReliabilityBand::Questionable
    } else if value >= 0.50 {
        ReliabilityBand::Poor
    } else {
        ReliabilityBand::Unacceptable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub subscale_id: String,
    #[serde(with = "nan_as_null")]
    pub alpha: f64,
    #[serde(with = "nan_as_null")]
    pub lambda6: f64,
    /// NaN when the factor fit fails.
    #[serde(with = "nan_as_null")]
    pub omega: f64,
    pub n: usize,
    pub k: usize,
    pub dropped: Vec<String>,
    pub alpha_band: ReliabilityBand,
    pub lambda6_band: ReliabilityBand,
    pub omega_band: ReliabilityBand,
    /// Lowest of the three bands.
    pub overall: ReliabilityBand,
    pub lambda6_degraded: bool,
    pub omega_heywood: bool,
}

/// JSON has no NaN: written as `null`, read back as NaN.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl ReliabilityReport {
    /// All three metrics at least 0.70.
    pub fn acceptable(&self) -> bool {
        self.overall >= ReliabilityBand::Acceptable
    }
}

/// Drops zero-variance items, then computes α, λ6 and ω. ω is NaN (band
/// unacceptable) when fewer than three items remain or the fit fails.
pub fn reliability_report(subscale_id: &str, m: &ItemMatrix) -> Result<ReliabilityReport, PsychometricError> {
    let (m, dropped) = drop_zero_variance(m)?;
    let alpha = cronbach_alpha(&m)?;
    let (lambda6, lambda6_degraded) = guttman_lambda6_or_degraded(&m)?;
    let (omega, omega_heywood) = match mcdonald_omega(&m) {
        Ok((w, fit)) => (w, !fit.heywood.is_empty()),
        Err(_) => (f64::NAN, false),
    };
    let (ab, lb, ob) = (interpret_reliability(alpha), interpret_reliability(lambda6), interpret_reliability(omega));
    Ok(ReliabilityReport {
        subscale_id: subscale_id.into(),
        alpha,
        lambda6,
        omega,
        n: m.n(),
        k: m.k(),
        dropped,
        alpha_band: ab,
        lambda6_band: lb,
        omega_band: ob,
        overall: ab.min(lb).min(ob),
        lambda6_degraded,
        omega_heywood,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mtmm {
    pub row_instrument: String,
    pub column_instrument: String,
    pub n: usize,
    /// `cells[i][j]` correlates row-instrument domain i with column-instrument domain j.
    pub cells: Vec<Vec<CorrelationResult>>,
    pub convergent: Vec<f64>,
    /// Mean absolute discriminant correlation in each domain's row and column.
    pub discriminant: Vec<f64>,
    pub delta: Vec<f64>,
    pub campbell: Vec<bool>,
    pub avg_convergent: f64,
    pub avg_discriminant: f64,
    pub avg_delta: f64,
}

impl Mtmm {
    pub fn all_campbell(&self) -> bool {
        self.campbell.iter().all(|c| *c)
    }
}

/// Correlates the five domain columns of two instruments over profiles
/// scored on both.
pub fn build_mtmm(scores: &ScoreMatrix, row_instrument: &str, column_instrument: &str) -> Result<Mtmm, PsychometricError> {
    let mut labels: Vec<String> = Domain::ALL.iter().map(|d| column_label(row_instrument, d.code())).collect();
    labels.extend(Domain::ALL.iter().map(|d| column_label(column_instrument, d.code())));
    let (ids, series) = scores.complete_rows(&labels)?;
    if ids.is_empty() {
        return Err(PsychometricError::EmptyJoin);
    }
    let mut cells = Vec::with_capacity(5);
    for i in 0..5 {
        let row = (0..5)
            .map(|j| stats::pearson_r(&series[i], &series[5 + j]))
            .collect::<Result<Vec<_>, _>>()?;
        cells.push(row);
    }
    let convergent: Vec<f64> = (0..5).map(|d| cells[d][d].r).collect();
    let mut discriminant = Vec::with_capacity(5);
    let mut campbell = Vec::with_capacity(5);
    for d in 0..5 {
        let others: Vec<f64> = (0..5)
            .filter(|&o| o != d)
            .flat_map(|o| [cells[d][o].r.abs(), cells[o][d].r.abs()])
            .collect();
        discriminant.push(stats::mean(&others));
        campbell.push(others.iter().all(|&o| convergent[d] > o));
    }
    let delta: Vec<f64> = (0..5).map(|d| convergent[d] - discriminant[d]).collect();
    let all_disc: Vec<f64> =
        (0..5).flat_map(|i| (0..5).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| cells[i][j].r.abs()).collect();
    Ok(Mtmm {
        row_instrument: row_instrument.into(),
        column_instrument: column_instrument.into(),
        n: ids.len(),
        avg_convergent: stats::mean(&convergent),
        avg_discriminant: stats::mean(&all_disc),
        avg_delta: stats::mean(&delta),
        cells,
        convergent,
        discriminant,
        delta,
        campbell,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionEntry {
    pub domain: Domain,
    pub criterion: String,
    pub expected: Sign,
    pub baseline: Option<f64>,
    pub result: CorrelationResult,
    pub direction_match: bool,
    /// `|r| ≥ |baseline|` with matching direction, when a baseline is set.
    pub meets_baseline: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub entries: Vec<CriterionEntry>,
}

impl CriterionReport {
    pub fn matches(&self) -> usize {
        self.entries.iter().filter(|e| e.direction_match).count()
    }

    pub fn all_match(&self) -> bool {
        self.matches() == self.entries.len()
    }
}

/// Correlates each primary-instrument domain with its mapped criterion subscales.
pub fn criterion_validity(
    scores: &ScoreMatrix,
    primary_instrument: &str,
    map: &CriterionMap,
) -> Result<CriterionReport, PsychometricError> {
    let mut entries = Vec::with_capacity(map.pairs.len());
    for pair in &map.pairs {
        let labels = [column_label(primary_instrument, pair.domain.code()), pair.column()];
        let (ids, series) = scores.complete_rows(&labels)?;
        if ids.is_empty() {
            return Err(PsychometricError::EmptyJoin);
        }
        let result = stats::pearson_r(&series[0], &series[1])?;
        let direction_match = Sign::of(result.r) == Some(pair.sign);
        entries.push(CriterionEntry {
            domain: pair.domain,
            criterion: pair.column(),
            expected: pair.sign,
            baseline: pair.baseline,
            direction_match,
            meets_baseline: pair.baseline.map(|b| direction_match && result.r.abs() >= b.abs()),
            result,
        });
    }
    Ok(CriterionReport { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bartlett {
    pub chi_square: f64,
    pub dof: f64,
    pub p: f64,
}

/// `χ² = -(n - 1 - (2p + 5)/6) · ln det R` on `p(p-1)/2` degrees of freedom.
pub fn bartlett_sphericity(r: &DMatrix<f64>, n: usize) -> Result<Bartlett, PsychometricError> {
    let p = r.nrows() as f64;
    let det = r.determinant();
    if det.is_nan() || det <= 0.0 {
        return Err(PsychometricError::NonPositiveDeterminant);
    }
    // Adding 0.0 turns a -0.0 from ln(1) into +0.0.
    let chi_square = -(n as f64 - 1.0 - (2.0 * p + 5.0) / 6.0) * det.ln() + 0.0;
    let dof = p * (p - 1.0) / 2.0;
    let p_value = if chi_square <= 0.0 || dof == 0.0 {
        1.0
    } else {
        ChiSquared::new(dof).expect("positive dof").sf(chi_square)
    };
    Ok(Bartlett { chi_square, dof, p: p_value })
}

/// Kaiser-Meyer-Olkin sampling adequacy from zero-order and partial
/// correlations (`q_ij = -P_ij / sqrt(P_ii P_jj)`, `P = R⁻¹`).
pub fn kmo(r: &DMatrix<f64>) -> Result<f64, PsychometricError> {
    let k = r.nrows();
    let ids: Vec<String> = (1..=k).map(|i| format!("i{i}")).collect();
    let inv = invert_correlation(r, &ids)?;
    let (mut r2, mut q2) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                r2 += r[(i, j)] * r[(i, j)];
                let q = -inv[(i, j)] / (inv[(i, i)] * inv[(j, j)]).sqrt();
                q2 += q * q;
            }
        }
    }
    if r2 + q2 < 1e-300 {
        return Err(PsychometricError::NoCorrelationStructure);
    }
    Ok(r2 / (r2 + q2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingEfficacy {
    pub rho: CorrelationResult,
    pub median_low: f64,
    pub median_high: f64,
    /// `median(level 9) - median(level 1)`.
    pub delta: f64,
    pub per_level: BTreeMap<u8, DistributionSummary>,
}

/// Spearman ρ of prompted level against observed score, plus per-level
/// distributions. Histograms share bins over `[bin_lo, bin_hi]`.
pub fn shaping_efficacy(
    levels: &[u8],
    scores: &[f64],
    mode: ShapingMode,
    bin_lo: f64,
    bin_hi: f64,
) -> Result<ShapingEfficacy, PsychometricError> {
    if levels.len() != scores.len() {
        return Err(StatsError::LengthMismatch(levels.len(), scores.len()).into());
    }
    let expected: Vec<u8> = match mode {
        ShapingMode::Single => (1..=9).collect(),
        ShapingMode::Multi => vec![1, 9],
    };
    let mut groups: BTreeMap<u8, Vec<f64>> = expected.iter().map(|&l| (l, Vec::new())).collect();
    for (&l, &s) in levels.iter().zip(scores) {
        groups.get_mut(&l).ok_or(PsychometricError::InvalidLevel(l))?.push(s);
    }
    if let Some((&l, _)) = groups.iter().find(|(_, v)| v.is_empty()) {
        return Err(PsychometricError::EmptyLevel(l));
    }
    let x: Vec<f64> = levels.iter().map(|&l| f64::from(l)).collect();
    let rho = stats::spearman_rho(&x, scores)?;
    let per_level = groups
        .iter()
        .map(|(&l, v)| Ok((l, stats::summarize_with_bins(v, bin_lo, bin_hi, stats::DEFAULT_BINS)?)))
        .collect::<Result<BTreeMap<_, _>, StatsError>>()?;
    let median_low = per_level[&1].median;
    let median_high = per_level[&9].median;
    Ok(ShapingEfficacy { rho, median_low, median_high, delta: median_high - median_low, per_level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_factor(k: usize, l: f64) -> DMatrix<f64> {
        DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { l * l })
    }

    #[test]
    fn parallel_items_alpha_one() {
        let rows: Vec<Vec<f64>> = [1.0, 3.0, 2.0, 5.0, 4.0].iter().map(|v| vec![*v, *v]).collect();
        assert_abs_diff_eq!(cronbach_alpha(&ItemMatrix::unlabeled(&rows).unwrap()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_errors() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 4.0]];
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        assert_eq!(cronbach_alpha(&m), Err(PsychometricError::ZeroVariance("i1".into())));
        let single = ItemMatrix::unlabeled(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(cronbach_alpha(&single), Err(PsychometricError::TooFewItems { .. })));
    }

    #[test]
    fn lambda6_singular_and_independent() {
        let rows: Vec<Vec<f64>> = [1.0, 3.0, 2.0, 5.0].iter().map(|v| vec![*v, 2.0 * v + 1.0]).collect();
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        match guttman_lambda6(&m) {
            Err(PsychometricError::Singular(ids)) => assert_eq!(ids, vec!["i1".to_string(), "i2".to_string()]),
            other => panic!("expected singular, got {other:?}"),
        }
        // Orthogonal contrasts: zero inter-item correlation.
        let rows = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        assert_abs_diff_eq!(guttman_lambda6(&m).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn omega_closed_form() {
        let (w, fit) = omega_from_correlation(&one_factor(4, 0.8)).unwrap();
        assert_abs_diff_eq!(w, 10.24 / 11.68, epsilon = 1e-6);
        assert!(fit.converged);
        for l in &fit.loadings {
            assert_abs_diff_eq!(*l, 0.8, epsilon = 1e-6);
        }
        let (w0, _) = omega_from_correlation(&DMatrix::identity(5, 5)).unwrap();
        assert_abs_diff_eq!(w0, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_variance_drop() {
        let rows = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![2.0, 2.0, 4.0, 4.0, 1.0],
            vec![3.0, 2.0, 1.0, 5.0, 2.0],
        ];
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        let (kept, dropped) = drop_zero_variance(&m).unwrap();
        assert_eq!(kept.k(), 4);
        assert_eq!(dropped, vec!["i2".to_string()]);
        let const_rows = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(drop_zero_variance(&ItemMatrix::unlabeled(&const_rows).unwrap()), Err(PsychometricError::AllDropped));
        let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        assert_eq!(drop_zero_variance(&m).unwrap(), (m.clone(), vec![]));
    }

    #[test]
    fn bands() {
        assert_eq!(interpret_reliability(0.91), ReliabilityBand::Excellent);
        assert_eq!(interpret_reliability(0.70), ReliabilityBand::Acceptable);
        assert_eq!(interpret_reliability(-0.55), ReliabilityBand::Unacceptable);
        assert_eq!(interpret_reliability(f64::NAN), ReliabilityBand::Unacceptable);
        assert_eq!(interpret_reliability(0.5), ReliabilityBand::Poor);
        assert_eq!(interpret_reliability(0.65), ReliabilityBand::Questionable);
        assert_eq!(interpret_reliability(0.85), ReliabilityBand::Good);
    }

    #[test]
    fn bartlett_identity_and_hand_value() {
        let b = bartlett_sphericity(&DMatrix::identity(4, 4), 50).unwrap();
        assert_eq!(b.chi_square, 0.0);
        assert_eq!(b.p, 1.0);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let b = bartlett_sphericity(&r, 100).unwrap();
        assert_abs_diff_eq!(b.chi_square, -(99.0 - 9.0 / 6.0) * 0.75f64.ln(), epsilon = 1e-12);
        assert_eq!(b.dof, 1.0);
    }

    #[test]
    fn kmo_cases() {
        assert_eq!(kmo(&DMatrix::identity(3, 3)), Err(PsychometricError::NoCorrelationStructure));
        assert!(kmo(&one_factor(6, 0.7)).unwrap() > 0.5);
    }

    #[test]
    fn shaping_noiseless() {
        let levels: Vec<u8> = (1..=9).flat_map(|l| [l, l]).collect();
        let scores: Vec<f64> = levels.iter().map(|&l| 1.0 + (f64::from(l) - 1.0) / 2.0).collect();
        let e = shaping_efficacy(&levels, &scores, ShapingMode::Single, 1.0, 5.0).unwrap();
        assert_abs_diff_eq!(e.rho.r, 1.0, epsilon = 1e-12);
        assert_eq!(e.delta, 4.0);
        assert_eq!(e.per_level.len(), 9);
        assert_eq!(
            shaping_efficacy(&levels[2..], &scores[2..], ShapingMode::Single, 1.0, 5.0).unwrap_err(),
            PsychometricError::EmptyLevel(1)
        );
        assert_eq!(
            shaping_efficacy(&[1, 5, 9], &[1.0, 3.0, 5.0], ShapingMode::Multi, 1.0, 5.0).unwrap_err(),
            PsychometricError::InvalidLevel(5)
        );
    }
}
