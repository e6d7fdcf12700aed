//! Bayesian online change-point detection with a Normal–Inverse-Gamma model.
//!
//! The filter maintains a posterior over the current run length (days since
//! the last change). Each new observation either extends a run — weighted by
//! the run's Student-t posterior predictive — or starts a fresh run, weighted
//! by the hazard rate and the predictive under the prior. Confidence at a day
//! is the posterior mass on short run lengths; detections are local maxima of
//! that confidence above the configured threshold.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::series::DailyAffectSeries;
use crate::stats::{mean, sample_variance};

use super::{ChangePoint, DetectionMethod, DetectorConfig, Direction};

/// Posterior mass below this is zeroed (and the row renormalised) so the
/// number of live run-length cells stays far below the series length.
const TRUNCATION_MASS: f64 = 1e-12;

/// Early steps where run-length mass is trivially concentrated near zero are
/// never reported as detections.
const BURN_IN: usize = 5;

/// Width of the value windows used to orient a detection.
const DIRECTION_SPAN: usize = 3;

/// Normal–Inverse-Gamma prior on the per-run mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NigPrior {
    /// Prior mean.
    pub mu0: f64,
    /// Pseudo-observations behind the prior mean.
    pub kappa0: f64,
    /// Inverse-Gamma shape for the variance.
    pub alpha0: f64,
    /// Inverse-Gamma scale for the variance.
    pub beta0: f64,
}

impl NigPrior {
    pub fn validate(&self) -> Result<()> {
        let finite = self.mu0.is_finite()
            && self.kappa0.is_finite()
            && self.alpha0.is_finite()
            && self.beta0.is_finite();
        if !finite {
            return Err(Error::config("prior parameters must be finite"));
        }
        if self.kappa0 <= 0.0 || self.alpha0 <= 0.0 || self.beta0 <= 0.0 {
            return Err(Error::config(
                "prior kappa0, alpha0 and beta0 must be positive",
            ));
        }
        Ok(())
    }

    /// Weakly informative prior centred on the series itself: mean at the
    /// sample mean, one pseudo-observation, and the sample variance as the
    /// variance scale (floored at 1e-12 so constant series stay valid).
    pub fn empirical(values: &[f64]) -> NigPrior {
        NigPrior {
            mu0: mean(values),
            kappa0: 1.0,
            alpha0: 1.0,
            beta0: sample_variance(values).max(1e-12),
        }
    }
}

/// One run-length hypothesis: posterior mass plus sufficient statistics of
/// the observations assigned to the run.
#[derive(Debug, Clone, Copy)]
struct Cell {
    mass: f64,
    n: usize,
    sum: f64,
    sum_sq: f64,
}

/// Log of the Student-t posterior predictive density of `x` for a run with
/// the given sufficient statistics (`n == 0` is the prior predictive).
fn log_predictive(prior: &NigPrior, n: usize, sum: f64, sum_sq: f64, x: f64) -> f64 {
    let nf = n as f64;
    let kappa_n = prior.kappa0 + nf;
    let mu_n = (prior.kappa0 * prior.mu0 + sum) / kappa_n;
    let alpha_n = prior.alpha0 + nf / 2.0;
    let beta_n = if n == 0 {
        prior.beta0
    } else {
        let sample_mean = sum / nf;
        // Scatter around the run mean; clamp tiny negative rounding.
        let scatter = (sum_sq - nf * sample_mean * sample_mean).max(0.0);
        let shrink = prior.kappa0 * nf * (sample_mean - prior.mu0).powi(2) / (2.0 * kappa_n);
        prior.beta0 + 0.5 * scatter + shrink
    };

    let dof = 2.0 * alpha_n;
    let scale_sq = beta_n * (kappa_n + 1.0) / (alpha_n * kappa_n);
    let z = (x - mu_n).powi(2) / (dof * scale_sq);
    ln_gamma((dof + 1.0) / 2.0)
        - ln_gamma(dof / 2.0)
        - 0.5 * (dof.ln() + std::f64::consts::PI.ln() + scale_sq.ln())
        - (dof + 1.0) / 2.0 * (1.0 + z).ln()
}

/// Advance the run-length posterior by one observation. `cells` holds masses
/// and statistics indexed by run length; masses sum to one on entry and exit.
fn step_cells(cells: &mut Vec<Cell>, prior: &NigPrior, hazard: f64, x: f64) {
    if cells.is_empty() {
        cells.push(Cell {
            mass: 1.0,
            n: 1,
            sum: x,
            sum_sq: x * x,
        });
        return;
    }

    let pred_reset = log_predictive(prior, 0, 0.0, 0.0, x).exp();
    let mut next = Vec::with_capacity(cells.len() + 1);
    // Incoming masses are normalised, so the total change-point mass is
    // hazard · pred_reset; the fresh run starts with `x` as its first datum.
    next.push(Cell {
        mass: hazard * pred_reset,
        n: 1,
        sum: x,
        sum_sq: x * x,
    });
    for cell in cells.iter() {
        let mass = if cell.mass > 0.0 {
            let pred = log_predictive(prior, cell.n, cell.sum, cell.sum_sq, x).exp();
            cell.mass * (1.0 - hazard) * pred
        } else {
            0.0
        };
        next.push(Cell {
            mass,
            n: cell.n + 1,
            sum: cell.sum + x,
            sum_sq: cell.sum_sq + x * x,
        });
    }

    normalise(&mut next);
    let mut truncated = false;
    for cell in next.iter_mut() {
        if cell.mass < TRUNCATION_MASS {
            if cell.mass > 0.0 {
                truncated = true;
            }
            cell.mass = 0.0;
        }
    }
    if truncated {
        normalise(&mut next);
    }
    *cells = next;
}

fn normalise(cells: &mut [Cell]) {
    let total: f64 = cells.iter().map(|c| c.mass).sum();
    if total > 0.0 {
        for cell in cells.iter_mut() {
            cell.mass /= total;
        }
    }
}

fn check_inputs(values: &[f64], prior: &NigPrior, hazard: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("online detector needs at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    if !(hazard > 0.0 && hazard < 1.0) {
        return Err(Error::config("hazard must lie strictly between 0 and 1"));
    }
    prior.validate()
}

/// Full run-length posterior: row `t` holds `P(run length = r | x_0..=x_t)`
/// for `r = 0..=t`. Row 0 is `[1.0]` by convention.
pub fn bocpd_posteriors(
    values: &[f64],
    prior: &NigPrior,
    hazard: f64,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(values, prior, hazard)?;
    let mut cells: Vec<Cell> = Vec::new();
    let mut rows = Vec::with_capacity(values.len());
    for &x in values {
        step_cells(&mut cells, prior, hazard, x);
        rows.push(cells.iter().map(|c| c.mass).collect());
    }
    Ok(rows)
}

/// Per-day change-point confidence: posterior mass on run lengths `<= r_min`.
pub fn bocpd_confidences(
    values: &[f64],
    prior: &NigPrior,
    hazard: f64,
    r_min: usize,
) -> Result<Vec<f64>> {
    check_inputs(values, prior, hazard)?;
    let mut cells: Vec<Cell> = Vec::new();
    let mut confidences = Vec::with_capacity(values.len());
    for &x in values {
        step_cells(&mut cells, prior, hazard, x);
        let short_mass: f64 = cells
            .iter()
            .take(r_min + 1)
            .map(|c| c.mass)
            .sum();
        confidences.push(short_mass.min(1.0));
    }
    Ok(confidences)
}

/// Run the online detector over a series and report local confidence maxima
/// above the threshold, skipping the burn-in prefix.
pub fn bocpd_detect(
    series: &DailyAffectSeries,
    config: &DetectorConfig,
) -> Result<Vec<ChangePoint>> {
    config.validate()?;
    let values = &series.values;
    let prior = config
        .bocpd_prior
        .unwrap_or_else(|| NigPrior::empirical(values));
    let confidences = bocpd_confidences(values, &prior, config.hazard, config.r_min)?;

    let mut points = Vec::new();
    for t in BURN_IN..values.len() {
        let conf = confidences[t];
        if conf < config.confidence_threshold {
            continue;
        }
        let rising = conf > confidences[t - 1];
        // A missing right neighbour counts as non-increasing; equal right
        // neighbours keep only the first day of a plateau.
        let not_followed_higher = match confidences.get(t + 1) {
            Some(next) => conf >= *next,
            None => true,
        };
        if rising && not_followed_higher {
            let before = mean(&values[t.saturating_sub(DIRECTION_SPAN)..t]);
            let after = mean(&values[t..(t + DIRECTION_SPAN).min(values.len())]);
            let direction = if after < before {
                Direction::Decrease
            } else {
                Direction::Increase
            };
            points.push(ChangePoint {
                category: series.category,
                date: series.date_at(t),
                method: DetectionMethod::Bocpd,
                confidence: conf,
                direction,
            });
        }
    }
    Ok(points)
}
