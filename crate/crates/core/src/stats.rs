//! Small statistical helpers shared by the estimators.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard normal quantile for a confidence level, e.g. 1.96 at 0.95.
pub fn two_sided_z(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = two_sided_z(level);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// `P{|Z| ≤ x}` for standard normal `Z`.
pub fn normal_band_probability(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    libm::erf(x / std::f64::consts::SQRT_2)
}

/// `-log P{|Z| ≤ x}`, accurate in both tails.
pub fn neg_log_band_probability(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let u = x / std::f64::consts::SQRT_2;
    if u > 1.0 {
        // log(1 - erfc) keeps precision when the band probability is near 1.
        -(-libm::erfc(u)).ln_1p()
    } else {
        -libm::erf(u).ln()
    }
}

/// Variance estimate of a sample covariance for jointly Gaussian pairs:
/// `Var(X_i X_j) = Σ_ii Σ_jj + Σ_ij²`.
pub fn gaussian_product_variance(sii: f64, sjj: f64, sij: f64) -> f64 {
    sii * sjj + sij * sij
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_quantile() {
        assert!((two_sided_z(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn wilson_reference_values() {
        // 5 successes in 10 trials at 95%: (0.2366, 0.7634).
        let (lo, hi) = wilson_interval(5, 10, 0.95);
        assert!((lo - 0.236_593).abs() < 1e-5 && (hi - 0.763_407).abs() < 1e-5);
        let (lo, hi) = wilson_interval(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100, 0.95);
        assert!(lo < 1.0 && hi == 1.0);
    }

    #[test]
    fn band_probabilities() {
        let p = normal_band_probability(1.0);
        assert!((p - 0.682_689_492_137_085_9).abs() < 1e-15, "{p}");
        let v = neg_log_band_probability(1.0);
        assert!((v - 0.381_715_146_302_126).abs() < 1e-14);
        let big = neg_log_band_probability(10.0);
        assert!(big > 0.0 && big < 1e-22);
        assert!(neg_log_band_probability(1e-3) > 6.0);
    }
}
