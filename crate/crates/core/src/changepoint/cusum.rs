//! CUSUM mean-shift scan with a permutation bootstrap.
//!
//! Within a window, the cumulative sum of deviations from the window mean
//! peaks (in absolute value) at the most likely split point. Significance
//! comes from a permutation bootstrap: the fraction of random shuffles whose
//! CUSUM range falls strictly below the observed range. Detection slides
//! this window along the series.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::DailyAffectSeries;
use crate::stats::{derive_seed, mean};

use super::{consolidate, ChangePoint, DetectionMethod, DetectorConfig, Direction};

/// Result of analysing one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumStat {
    /// Number of samples before the estimated shift; the first sample of the
    /// new regime is at 0-based index `split` within the window.
    pub split: usize,
    /// Fraction of bootstrap permutations whose CUSUM range is strictly
    /// below the observed range.
    pub confidence: f64,
    pub direction: Direction,
}

/// Cumulative sums of deviations from the mean: `S_k = Σ_{i<k}(x_i − x̄)`
/// for `k = 1..=n`, together with their range `max(S) − min(S)`.
fn cusum_path(values: &[f64]) -> (Vec<f64>, f64) {
    let m = mean(values);
    let mut path = Vec::with_capacity(values.len());
    let mut acc = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        acc += v - m;
        path.push(acc);
        lo = lo.min(acc);
        hi = hi.max(acc);
    }
    (path, hi - lo)
}

fn range_only(values: &[f64]) -> f64 {
    cusum_path(values).1
}

/// Analyse one window: locate the strongest mean-shift split and score it
/// with `bootstrap_iters` seeded permutations.
///
/// A constant window has range zero and confidence zero. The statistic is
/// invariant to additive shifts and positive scalings of the values.
pub fn cusum_window(
    values: &[f64],
    bootstrap_iters: usize,
    rng_seed: u64,
) -> Result<CusumStat> {
    if values.len() < 2 {
        return Err(Error::invalid(
            "cusum window needs at least 2 observations",
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cusum window contains non-finite values"));
    }
    if bootstrap_iters == 0 {
        return Err(Error::invalid("bootstrap_iters must be positive"));
    }

    let (path, observed_range) = cusum_path(values);
    // argmax of |S_k|, smallest k on ties (k is 1-based).
    let mut split = 1usize;
    let mut best = path[0].abs();
    for (i, s) in path.iter().enumerate().skip(1) {
        if s.abs() > best {
            best = s.abs();
            split = i + 1;
        }
    }

    let direction = if split < values.len() {
        let before = mean(&values[..split]);
        let after = mean(&values[split..]);
        if after < before {
            Direction::Decrease
        } else {
            Direction::Increase
        }
    } else {
        // Degenerate: the terminal sum (≈ 0) won the argmax, which only
        // happens for effectively constant windows; confidence is 0 anyway.
        Direction::Increase
    };

    if observed_range == 0.0 {
        return Ok(CusumStat {
            split,
            confidence: 0.0,
            direction,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut shuffled = values.to_vec();
    let mut below = 0usize;
    for _ in 0..bootstrap_iters {
        shuffled.shuffle(&mut rng);
        if range_only(&shuffled) < observed_range {
            below += 1;
        }
    }

    Ok(CusumStat {
        split,
        confidence: below as f64 / bootstrap_iters as f64,
        direction,
    })
}

/// Slide the CUSUM window along a series and emit consolidated detections.
///
/// Windows start every `stride_days`; each candidate maps the window-local
/// split to a calendar date. Same-category candidates within
/// `merge_window_days` collapse to the highest-confidence one.
pub fn cusum_detect(
    series: &DailyAffectSeries,
    config: &DetectorConfig,
) -> Result<Vec<ChangePoint>> {
    config.validate()?;
    let values = &series.values;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    if values.len() < config.window_days {
        return Err(Error::invalid(format!(
            "series length {} is shorter than window_days {}",
            values.len(),
            config.window_days
        )));
    }

    let mut candidates = Vec::new();
    let last_start = values.len() - config.window_days;
    for start in (0..=last_start).step_by(config.stride_days) {
        let seed = derive_seed(
            config.rng_seed,
            series.category.index() as u64,
            start as u64,
        );
        let window = &values[start..start + config.window_days];
        let stat = cusum_window(window, config.bootstrap_iters, seed)?;
        if stat.confidence >= config.confidence_threshold && stat.split < config.window_days {
            candidates.push(ChangePoint {
                category: series.category,
                date: series.date_at(start + stat.split),
                method: DetectionMethod::Cusum,
                confidence: stat.confidence,
                direction: stat.direction,
            });
        }
    }
    Ok(consolidate(candidates, config.merge_window_days))
}
