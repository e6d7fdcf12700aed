//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Arithmetic mean. Returns 0.0 for an empty slice; callers guard emptiness
/// where it matters semantically.
///
/// Exact for constant input: summation rounding would otherwise make the
/// mean of a repeated non-dyadic value (for example 0.1) differ from the
/// value itself by an amount that depends on the sample size, which turns
/// downstream comparisons of identical constant samples into noise.
pub fn mean(values: &[f64]) -> f64 {
    match values.split_first() {
        None => 0.0,
        Some((first, rest)) if rest.iter().all(|v| v == first) => *first,
        _ => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Unbiased sample variance (n − 1 denominator). Returns 0.0 for fewer than
/// two values, and exactly 0.0 for constant input (see [`mean`]).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    // Guard against a tiny negative from cancellation.
    (ss / (n - 1) as f64).max(0.0)
}

/// Unbiased sample standard deviation.
pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Two-sided p-value for a t statistic with `dof` degrees of freedom.
///
/// Uses the symmetric lower tail (`2·F(−|t|)`) to avoid cancellation for
/// large statistics. `dof` may be fractional (Welch).
pub fn two_sided_t_pvalue(t: f64, dof: f64) -> f64 {
    debug_assert!(dof > 0.0, "degrees of freedom must be positive");
    let dist = StudentsT::new(0.0, 1.0, dof)
        .expect("valid standard t distribution parameters");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

/// One round of the splitmix64 finalizer, used for deterministic seed
/// derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent RNG seed from a base seed and a task label.
///
/// Used to give each (category, window) task its own stream so results do
/// not depend on scheduling order.
pub fn derive_seed(base: u64, lane: u64, step: u64) -> u64 {
    splitmix64(base ^ splitmix64(lane.wrapping_add(0x517C_C1B7_2722_0A95)) ^ splitmix64(step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_and_variance_basics() {
        assert_eq!(mean(&[]), 0.0);
        assert_eq!(mean(&[2.0]), 2.0);
        assert_abs_diff_eq!(mean(&[1.0, 2.0, 3.0]), 2.0, epsilon = 1e-15);
        assert_eq!(sample_variance(&[5.0]), 0.0);
        // Hand-computed: var([1,2,3]) = ((1)^2 + 0 + 1^2)/2 = 1.
        assert_abs_diff_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_samples_are_exact_regardless_of_length() {
        // 0.1 and 0.3 are not dyadic; naive summation would drift.
        assert_eq!(mean(&[0.1; 3]), 0.1);
        assert_eq!(mean(&[0.3; 7]), 0.3);
        assert_eq!(sample_variance(&[0.1; 3]), 0.0);
        assert_eq!(sample_variance(&[0.3; 7]), 0.0);
    }

    #[test]
    fn t_pvalue_is_symmetric_and_bounded() {
        let p = two_sided_t_pvalue(2.5, 7.0);
        let q = two_sided_t_pvalue(-2.5, 7.0);
        assert_eq!(p, q);
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(two_sided_t_pvalue(0.0, 7.0), 1.0);
    }

    #[test]
    fn derived_seeds_differ_across_lanes_and_steps() {
        let a = derive_seed(42, 0, 0);
        let b = derive_seed(42, 1, 0);
        let c = derive_seed(42, 0, 1);
        let d = derive_seed(43, 0, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        // Same inputs, same seed.
        assert_eq!(a, derive_seed(42, 0, 0));
    }
}
