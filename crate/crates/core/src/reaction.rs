//! Interrupted time-series measurement of reactions around change points.
//!
//! For each change point the short-term reaction is a segmented regression
//! over an 11-day window (7 days before the change, the change day, and 3
//! days after): `y = β₀ + β₁·t + β₂·after + β₃·t·after`, where `after`
//! indicates days at or past the change. β₃ captures the slope change and is
//! the headline short-term effect. The long-term reaction compares a 7-day
//! pre-change baseline against days 12–16 after the change with a two-sample
//! t-test (Welch by default, pooled selectable).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::DailyAffectSeries;
use crate::stats::{mean, sample_variance, two_sided_t_pvalue};

/// Days before the change day included in the regression window.
pub const SHORT_PRE_DAYS: usize = 7;
/// Days after the change day included in the regression window.
pub const SHORT_POST_DAYS: usize = 3;
/// First post-change day of the long-term comparison window.
pub const LONG_POST_START: usize = 12;
/// Last post-change day of the long-term comparison window.
pub const LONG_POST_END: usize = 16;

/// Names of the regression design columns, in order.
pub const DESIGN_COLUMNS: [&str; 4] = ["intercept", "t", "after", "t_after"];

/// Relative threshold below which a residual sum of squares counts as an
/// exact fit, in units of the response's total sum of squares.
const EXACT_FIT_RSS_REL: f64 = 1e-24;
/// Relative threshold below which a coefficient of an exact fit counts as
/// zero when assigning degenerate p-values.
const EXACT_FIT_COEF_REL: f64 = 1e-8;

/// Which two-sample t-test the long-term comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Welch's unequal-variance test with Welch–Satterthwaite degrees of
    /// freedom.
    #[default]
    Welch,
    /// Student's pooled-variance test.
    Pooled,
}

/// Ordinary least squares fit of the four-column segmented design.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// `[intercept, t, after, t_after]`.
    pub coefficients: [f64; 4],
    pub std_errors: [f64; 4],
    pub t_statistics: [f64; 4],
    pub p_values: [f64; 4],
    /// Residual sum of squares.
    pub rss: f64,
    /// Residual degrees of freedom, `n − 4`.
    pub dof: f64,
}

/// Short-term reaction at a change point: the regression fit plus the slope
/// change expressed as a percentage of the window mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortTermChange {
    pub fit: OlsFit,
    /// `100 · β₃ / mean(window)`; `None` when the window mean is zero.
    pub pct_change: Option<f64>,
}

impl ShortTermChange {
    /// Change in daily slope at the break (β₃).
    pub fn slope_change(&self) -> f64 {
        self.fit.coefficients[3]
    }

    /// Two-sided p-value of the slope change.
    pub fn p_value(&self) -> f64 {
        self.fit.p_values[3]
    }
}

/// Long-term reaction: baseline week versus days 12–16 after the change.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermChange {
    pub baseline_mean: f64,
    pub post_mean: f64,
    /// t-statistic of `post − baseline`; infinite when both samples have
    /// zero variance but different means.
    pub t_statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    /// `100 · (post − baseline) / baseline`; `None` when the baseline mean
    /// is zero.
    pub pct_change: Option<f64>,
}

/// Two-sample t-test result for `mean(a) − mean(b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Segmented design row for window position `t`: `(1, t, after, t·after)`.
fn design_row(t: usize, break_at: usize) -> [f64; 4] {
    let tf = t as f64;
    let after = if t >= break_at { 1.0 } else { 0.0 };
    [1.0, tf, after, tf * after]
}

/// Fit the segmented regression to a window of daily values with the break
/// at 0-based position `break_at`.
///
/// Needs at least 5 observations (one residual degree of freedom). A break
/// position that collapses the design — every day on one side — makes the
/// indicator columns linearly dependent and fails with a rank error.
pub fn its_fit(window: &[f64], break_at: usize) -> Result<OlsFit> {
    let n = window.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "regression window needs at least 5 observations, got {n}"
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression window contains non-finite values"));
    }
    let rows: Vec<[f64; 4]> = (0..n).map(|t| design_row(t, break_at)).collect();
    ols(&rows, window)
}

/// Householder-QR least squares with explicit rank checking.
#[allow(clippy::needless_range_loop)] // index loops mirror the matrix algebra
fn ols(rows: &[[f64; 4]], y: &[f64]) -> Result<OlsFit> {
    let n = rows.len();
    debug_assert_eq!(n, y.len());
    let dof = (n - 4) as f64;

    let mut a: Vec<[f64; 4]> = rows.to_vec();
    let mut qty: Vec<f64> = y.to_vec();

    // Column norms of the original design set the rank tolerance scale.
    let mut col_scale = 0.0f64;
    for j in 0..4 {
        let norm: f64 = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        col_scale = col_scale.max(norm);
    }

    for j in 0..4 {
        // Householder reflection clearing column j below the diagonal.
        let norm: f64 = (j..n).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue; // Dead column; caught by the rank check below.
        }
        let alpha = if a[j][j] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let v_sq: f64 = v.iter().map(|x| x * x).sum();
        if v_sq == 0.0 {
            continue;
        }
        for k in j..4 {
            let dot: f64 = (j..n).map(|i| v[i - j] * a[i][k]).sum();
            let f = 2.0 * dot / v_sq;
            for i in j..n {
                a[i][k] -= f * v[i - j];
            }
        }
        let dot: f64 = (j..n).map(|i| v[i - j] * qty[i]).sum();
        let f = 2.0 * dot / v_sq;
        for i in j..n {
            qty[i] -= f * v[i - j];
        }
    }

    let rank_tol = f64::EPSILON * 64.0 * col_scale.max(1.0);
    let deficient: Vec<String> = (0..4)
        .filter(|j| a[*j][*j].abs() <= rank_tol)
        .map(|j| DESIGN_COLUMNS[j].to_string())
        .collect();
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }

    // Back substitution: R β = Qᵀy (top rows).
    let mut beta = [0.0f64; 4];
    for j in (0..4).rev() {
        let mut acc = qty[j];
        for k in j + 1..4 {
            acc -= a[j][k] * beta[k];
        }
        beta[j] = acc / a[j][j];
    }

    // Residuals recomputed directly from the original design.
    let mut rss = 0.0f64;
    let mut y_sq = 0.0f64;
    for (row, &yi) in rows.iter().zip(y.iter()) {
        let fitted: f64 = (0..4).map(|j| row[j] * beta[j]).sum();
        let r = yi - fitted;
        rss += r * r;
        y_sq += yi * yi;
    }

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ via the upper-triangular inverse W = R⁻¹.
    let mut w = [[0.0f64; 4]; 4];
    for j in 0..4 {
        w[j][j] = 1.0 / a[j][j];
        for i in (0..j).rev() {
            let mut acc = 0.0;
            for k in i + 1..=j {
                acc += a[i][k] * w[k][j];
            }
            w[i][j] = -acc / a[i][i];
        }
    }
    let mut cov_diag = [0.0f64; 4];
    for (i, cd) in cov_diag.iter_mut().enumerate() {
        *cd = (i..4).map(|k| w[i][k] * w[i][k]).sum();
    }

    let mut std_errors = [0.0f64; 4];
    let mut t_statistics = [0.0f64; 4];
    let mut p_values = [0.0f64; 4];
    if rss <= EXACT_FIT_RSS_REL * (y_sq + 1.0) {
        // Exact fit: the noise estimate is zero, so classical standard
        // errors degenerate. Nonzero coefficients are unambiguous (p = 0),
        // zero coefficients are pure noise (p = 1).
        let coef_scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        for j in 0..4 {
            p_values[j] = if beta[j].abs() <= EXACT_FIT_COEF_REL * coef_scale {
                1.0
            } else {
                0.0
            };
        }
    } else {
        let sigma_sq = rss / dof;
        for j in 0..4 {
            std_errors[j] = (sigma_sq * cov_diag[j]).sqrt();
            t_statistics[j] = beta[j] / std_errors[j];
            p_values[j] = two_sided_t_pvalue(t_statistics[j], dof);
        }
    }

    Ok(OlsFit {
        coefficients: beta,
        std_errors,
        t_statistics,
        p_values,
        rss,
        dof,
    })
}

/// Index of `date` in the series, or an insufficient-coverage error naming
/// what was being measured.
fn index_or_uncovered(
    series: &DailyAffectSeries,
    date: chrono::NaiveDate,
    what: &str,
) -> Result<usize> {
    series.index_of(date).ok_or_else(|| {
        Error::InsufficientCoverage(format!(
            "{what}: change date {date} outside series span"
        ))
    })
}

/// Measure the short-term reaction of a series at a change date.
///
/// The series should already be imputed; the window must lie fully inside
/// the series span or an insufficient-coverage error is returned.
pub fn short_term_change(
    series: &DailyAffectSeries,
    change_date: chrono::NaiveDate,
) -> Result<ShortTermChange> {
    let idx = index_or_uncovered(series, change_date, "short-term window")?;
    if idx < SHORT_PRE_DAYS || idx + SHORT_POST_DAYS >= series.len() {
        return Err(Error::InsufficientCoverage(format!(
            "short-term window around {change_date} needs {SHORT_PRE_DAYS} days before \
             and {SHORT_POST_DAYS} after within the series"
        )));
    }
    let window = &series.values[idx - SHORT_PRE_DAYS..=idx + SHORT_POST_DAYS];
    let fit = its_fit(window, SHORT_PRE_DAYS)?;
    let window_mean = mean(window);
    let pct_change = if window_mean == 0.0 {
        None
    } else {
        Some(100.0 * fit.coefficients[3] / window_mean)
    };
    Ok(ShortTermChange { fit, pct_change })
}

/// Measure the long-term reaction of a series at a change date: the 7-day
/// baseline before the change versus days 12–16 after it.
pub fn long_term_change(
    series: &DailyAffectSeries,
    change_date: chrono::NaiveDate,
    kind: TTestKind,
) -> Result<LongTermChange> {
    let idx = index_or_uncovered(series, change_date, "long-term window")?;
    if idx < SHORT_PRE_DAYS || idx + LONG_POST_END >= series.len() {
        return Err(Error::InsufficientCoverage(format!(
            "long-term window around {change_date} needs {SHORT_PRE_DAYS} days before \
             and {LONG_POST_END} after within the series"
        )));
    }
    let baseline = &series.values[idx - SHORT_PRE_DAYS..idx];
    let post = &series.values[idx + LONG_POST_START..=idx + LONG_POST_END];
    let test = two_sample_t(post, baseline, kind)?;
    let baseline_mean = mean(baseline);
    let post_mean = mean(post);
    let pct_change = if baseline_mean == 0.0 {
        None
    } else {
        Some(100.0 * (post_mean - baseline_mean) / baseline_mean)
    };
    Ok(LongTermChange {
        baseline_mean,
        post_mean,
        t_statistic: test.t_statistic,
        dof: test.dof,
        p_value: test.p_value,
        pct_change,
    })
}

/// Two-sample t-test for `mean(a) − mean(b)`.
///
/// When both samples have zero variance the statistic degenerates: equal
/// means give `t = 0, p = 1`, different means give an infinite statistic
/// with `p = 0`; degrees of freedom fall back to `n_a + n_b − 2`.
pub fn two_sample_t(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(
            "t-test needs at least 2 observations per sample",
        ));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("t-test samples contain non-finite values"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let diff = ma - mb;

    let (se_sq, dof) = match kind {
        TTestKind::Welch => {
            let se_sq = va / na + vb / nb;
            let dof = if se_sq == 0.0 {
                na + nb - 2.0
            } else {
                se_sq * se_sq
                    / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0))
            };
            (se_sq, dof)
        }
        TTestKind::Pooled => {
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            (pooled * (1.0 / na + 1.0 / nb), na + nb - 2.0)
        }
    };

    let t_statistic = if se_sq == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    } else {
        diff / se_sq.sqrt()
    };
    Ok(TTestResult {
        t_statistic,
        dof,
        p_value: two_sided_t_pvalue(t_statistic, dof),
    })
}
