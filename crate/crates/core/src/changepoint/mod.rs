//! Change-point detection on daily affect series.
//!
//! Two detectors run per category series: an offline CUSUM scan with a
//! permutation bootstrap over sliding windows ([`cusum`]) and a Bayesian
//! online run-length filter ([`bocpd`]). Their detections are merged by
//! [`merge_changepoints`] into one deduplicated list per category.

pub mod bocpd;
pub mod cusum;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::affect::AffectCategory;
use crate::error::{Error, Result};
use crate::series::DailyAffectSeries;

pub use bocpd::{bocpd_confidences, bocpd_detect, bocpd_posteriors, NigPrior};
pub use cusum::{cusum_detect, cusum_window, CusumStat};

/// Which detector produced a change point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMethod {
    Cusum,
    Bocpd,
}

/// Direction of the mean shift at a change point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
}

/// One detected shift in a category's daily series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub category: AffectCategory,
    /// First day attributed to the new regime.
    pub date: NaiveDate,
    pub method: DetectionMethod,
    /// Detector-specific confidence in [0, 1].
    pub confidence: f64,
    pub direction: Direction,
}

/// Knobs for both detectors and the merge step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// CUSUM sliding-window length in days.
    pub window_days: usize,
    /// CUSUM window stride in days.
    pub stride_days: usize,
    /// Minimum confidence for a detection to survive.
    pub confidence_threshold: f64,
    /// Permutations drawn per CUSUM window.
    pub bootstrap_iters: usize,
    /// Constant per-step change-point probability for the online detector.
    pub hazard: f64,
    /// Run-length cutoff: online confidence is P(run length ≤ r_min).
    pub r_min: usize,
    /// Detections of one category at most this many days apart collapse.
    pub merge_window_days: i64,
    /// Normal–Inverse-Gamma prior for the online detector; `None` derives an
    /// empirical prior from each series.
    pub bocpd_prior: Option<NigPrior>,
    /// Base seed for the permutation bootstrap.
    pub rng_seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_days: 28,
            stride_days: 3,
            confidence_threshold: 0.5,
            bootstrap_iters: 1000,
            hazard: 0.01,
            r_min: 2,
            merge_window_days: 2,
            bocpd_prior: None,
            rng_seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride_days == 0 {
            return Err(Error::config("stride_days must be positive"));
        }
        if self.window_days < 2 * self.stride_days {
            return Err(Error::config(format!(
                "window_days ({}) must be at least twice stride_days ({})",
                self.window_days, self.stride_days
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::config(
                "confidence_threshold must be in [0, 1]",
            ));
        }
        if self.bootstrap_iters == 0 {
            return Err(Error::config("bootstrap_iters must be positive"));
        }
        if !(self.hazard > 0.0 && self.hazard < 1.0) {
            return Err(Error::config("hazard must be in (0, 1)"));
        }
        if self.merge_window_days < 0 {
            return Err(Error::config("merge_window_days must be non-negative"));
        }
        if let Some(prior) = &self.bocpd_prior {
            prior.validate()?;
        }
        Ok(())
    }
}

/// Consolidate same-category detections: single-linkage chains of points at
/// most `merge_window_days` apart collapse to one representative — highest
/// confidence, CUSUM over BOCPD on ties, earlier date on remaining ties.
pub(crate) fn consolidate(
    mut points: Vec<ChangePoint>,
    merge_window_days: i64,
) -> Vec<ChangePoint> {
    points.sort_by_key(|p| (p.category.index(), p.date));
    let mut out: Vec<ChangePoint> = Vec::new();
    let mut i = 0usize;
    while i < points.len() {
        let mut best = points[i];
        let mut last_date = points[i].date;
        let mut j = i + 1;
        while j < points.len()
            && points[j].category == best.category
            && (points[j].date - last_date).num_days() <= merge_window_days
        {
            let candidate = points[j];
            if better_representative(&candidate, &best) {
                best = candidate;
            }
            last_date = candidate.date;
            j += 1;
        }
        out.push(best);
        i = j;
    }
    out
}

fn better_representative(candidate: &ChangePoint, current: &ChangePoint) -> bool {
    if candidate.confidence != current.confidence {
        return candidate.confidence > current.confidence;
    }
    let rank = |m: DetectionMethod| match m {
        DetectionMethod::Cusum => 0,
        DetectionMethod::Bocpd => 1,
    };
    if rank(candidate.method) != rank(current.method) {
        return rank(candidate.method) < rank(current.method);
    }
    candidate.date < current.date
}

/// Merge CUSUM and BOCPD detections for one or more categories.
///
/// Detections below the confidence threshold are dropped; within each
/// category, detections at most `merge_window_days` apart collapse to the
/// consolidation representative. The result is sorted by date (category
/// order breaks ties).
pub fn merge_changepoints(
    cusum: &[ChangePoint],
    bocpd: &[ChangePoint],
    config: &DetectorConfig,
) -> Vec<ChangePoint> {
    let surviving: Vec<ChangePoint> = cusum
        .iter()
        .chain(bocpd.iter())
        .filter(|p| p.confidence >= config.confidence_threshold)
        .copied()
        .collect();
    let mut merged = consolidate(surviving, config.merge_window_days);
    merged.sort_by_key(|p| (p.date, p.category.index(), p.confidence as i64));
    merged
}

/// Run both detectors on one series and merge the results.
pub fn detect_series(
    series: &DailyAffectSeries,
    config: &DetectorConfig,
) -> Result<Vec<ChangePoint>> {
    config.validate()?;
    let cusum_points = cusum_detect(series, config)?;
    let bocpd_points = bocpd_detect(series, config)?;
    Ok(merge_changepoints(&cusum_points, &bocpd_points, config))
}
