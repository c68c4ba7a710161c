//! Special functions and analytic bounds on the crossing exponent.
//!
//! For Brownian motion the exponent is known exactly: `λ(c) = z⁻¹(c)`, where
//! `z(μ)` is the smallest positive root of `x ↦ M(-μ, 1/2, x²/2)` and `M` is
//! Kummer's confluent hypergeometric function. The remaining bounds hold for
//! any self-similar Gaussian process, some only asymptotically; those are
//! labelled and never enter hard consistency checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, ProcessKind, ProcessSpec};
use crate::passage::{estimate_exponent, McConfig};
use crate::quadrature::{k0_constant, QuadratureConfig};
use crate::sampler::{Schedule, ScheduleFamily};
use crate::stats::neg_log_band_probability;

const KUMMER_TERM_CAP: usize = 10_000;
const KUMMER_Z_LIMIT: f64 = 50.0;
/// Bracket for `z⁻¹` in `μ`.
pub const MU_RANGE: (f64, f64) = (1e-6, 1e3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KummerEval {
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub value: f64,
    pub terms_used: usize,
    /// Bound on the neglected tail of the series; zero when it terminated.
    pub truncation_bound: f64,
    /// Set when the largest term exceeds `|value|` by more than `1e6`.
    pub precision_loss: bool,
}

/// `M(a, b, z) = Σ (a)_n/(b)_n zⁿ/n!` by direct summation with Neumaier
/// compensation.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<KummerEval> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::DivergentParameter(b));
    }
    if !(z.abs() <= KUMMER_Z_LIMIT) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "Kummer series needs finite a, b and |z| <= {KUMMER_Z_LIMIT}, got a = {a}, b = {b}, z = {z}"
        )));
    }
    let mut sum = 1.0f64;
    let mut comp = 0.0f64;
    let mut term = 1.0f64;
    let mut max_term = 1.0f64;
    let mut truncation_bound = f64::INFINITY;
    let mut n = 0usize;
    while n < KUMMER_TERM_CAP {
        let nf = n as f64;
        term *= (a + nf) / (b + nf) * z / (nf + 1.0);
        n += 1;
        if term == 0.0 {
            truncation_bound = 0.0;
            break;
        }
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
        max_term = max_term.max(term.abs());
        // Once past the parameters, later ratios are bounded by this one.
        let k = n as f64;
        if k > a.abs() && k > b.abs() {
            let r = z.abs() / (k + 1.0) * ((a + k) / (b + k)).abs().max(1.0);
            if r < 0.5 {
                truncation_bound = term.abs() * r / (1.0 - r);
                if truncation_bound <= 1e-14 * (sum + comp).abs() {
                    break;
                }
            }
        }
    }
    let value = sum + comp;
    Ok(KummerEval {
        a,
        b,
        z,
        value,
        terms_used: n + 1,
        truncation_bound,
        precision_loss: max_term > 1e6 * value.abs(),
    })
}

fn breiman_shepp(mu: f64, x: f64) -> Result<f64> {
    Ok(kummer_m(-mu, 0.5, 0.5 * x * x)?.value)
}

/// Smallest positive root of `x ↦ M(-μ, 1/2, x²/2)`.
pub fn z_of_mu(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    let limit = (10.0 * (2.0 * mu.ln().abs()).sqrt().max(1.0)).min((2.0 * KUMMER_Z_LIMIT).sqrt());
    let step = 0.02 / mu.sqrt().max(1.0);
    let mut lo = 0.0;
    let mut f_lo: f64 = 1.0;
    let mut hi = None;
    let mut x = step;
    while x <= limit + 1e-12 {
        let f = breiman_shepp(mu, x)?;
        if f == 0.0 {
            return Ok(x);
        }
        if f.signum() != f_lo.signum() {
            hi = Some(x);
            break;
        }
        lo = x;
        f_lo = f;
        x += step;
    }
    let mut hi = hi.ok_or(Error::RootNotBracketed { mu, limit })?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = breiman_shepp(mu, mid)?;
        if f == 0.0 {
            return Ok(mid);
        }
        if f.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The `μ` with `z(μ) = c`: the exact Brownian exponent `λ(c)`.
pub fn z_inverse(c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    let (mu_lo, mu_hi) = MU_RANGE;
    let c_hi = z_of_mu(mu_lo)?;
    let c_lo = z_of_mu(mu_hi)?;
    if c < c_lo || c > c_hi {
        return Err(Error::OutOfRange { c, lo: c_lo, hi: c_hi });
    }
    // z decreases in μ: bisection on log μ, recording the path to verify it.
    let mut a = mu_lo.ln();
    let mut b = mu_hi.ln();
    let mut path = vec![(a, c_hi), (b, c_lo)];
    for _ in 0..200 {
        if b - a <= 1e-15 * a.abs().max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        let zm = z_of_mu(m.exp())?;
        path.push((m, zm));
        if zm > c {
            a = m;
        } else {
            b = m;
        }
    }
    path.sort_by(|x, y| x.0.total_cmp(&y.0));
    if path.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(Error::Invariant("z(mu) is not monotone along the bisection path".into()));
    }
    Ok((0.5 * (a + b)).exp())
}

/// `-log P{|Z| ≤ c / (√ℓ (1-e^{-1})^α)}`, a lower bound on `λ(c)` for
/// processes with SLND constant `ℓ`.
pub fn analytic_lower_bound(spec: &ProcessSpec, c: f64) -> Result<f64> {
    let ell = spec.slnd_constant.ok_or(Error::SlndUnknown)?;
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    let spacing = (-(-1f64).exp_m1()).powf(spec.alpha);
    Ok(neg_log_band_probability(c / (ell.sqrt() * spacing)))
}

/// `-c^{-1/α} log P{|Z| ≤ c / (√ℓ (1-exp(-c^{1/α}))^α)}` for `c ≤ 1`, a
/// lower bound that grows like `c^{-1/α}` as `c → 0`.
pub fn refined_lower_bound_small_c(spec: &ProcessSpec, c: f64) -> Result<f64> {
    let ell = spec.slnd_constant.ok_or(Error::SlndUnknown)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain(format!("the small-c bound needs 0 < c <= 1, got {c}")));
    }
    let alpha = spec.alpha;
    let r = c.powf(1.0 / alpha);
    let spacing = (-(-r).exp_m1()).powf(alpha);
    Ok(neg_log_band_probability(c / (ell.sqrt() * spacing)) / r)
}

/// `exp(-c² / (2 Var X(1)))`, the large-`c` upper envelope. Asymptotic only.
pub fn upper_bound_large_c(c: f64, var_x1: f64) -> Result<f64> {
    if !(var_x1 > 0.0) {
        return Err(Error::Domain(format!("Var X(1) must be positive, got {var_x1}")));
    }
    Ok((-c * c / (2.0 * var_x1)).exp())
}

/// `exp(-c² / (2ℓ))`, the large-`c` lower envelope under SLND. Asymptotic only.
pub fn lower_envelope_large_c(spec: &ProcessSpec, c: f64) -> Result<f64> {
    let ell = spec.slnd_constant.ok_or(Error::SlndUnknown)?;
    Ok((-c * c / (2.0 * ell)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBound {
    pub label: String,
    /// Absent for rate statements whose constant is not available.
    pub value: Option<f64>,
    pub asymptotic: bool,
    pub note: String,
}

impl LabeledBound {
    fn rigorous(label: &str, value: f64, note: &str) -> Self {
        Self {
            label: label.into(),
            value: Some(value),
            asymptotic: false,
            note: note.into(),
        }
    }

    fn asymptotic(label: &str, value: Option<f64>, note: &str) -> Self {
        Self {
            label: label.into(),
            value,
            asymptotic: true,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub c: f64,
    pub spec: ProcessSpec,
    pub lower_bounds: Vec<LabeledBound>,
    pub upper_bounds: Vec<LabeledBound>,
    /// `z⁻¹(c)`, for Brownian motion only.
    pub exact: Option<f64>,
    pub flags: Vec<String>,
    /// Every rigorous lower bound is at most every rigorous upper bound
    /// (and the exact value, when present, lies between them).
    pub consistent: bool,
}

/// Collects every bound available for `spec` at level `c`. `fekete` holds
/// `(u, -log f̂(u)/u)` pairs from a survival run, added as finite-horizon
/// upper bounds.
pub fn bounds_report(spec: &ProcessSpec, c: f64, var_x1: f64, fekete: &[(f64, f64)]) -> Result<BoundsReport> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut flags = Vec::new();
    match spec.slnd_constant {
        Some(_) => {
            lower.push(LabeledBound::rigorous(
                "slnd-one-step",
                analytic_lower_bound(spec, c)?,
                "conditional-variance floor one log-time unit apart",
            ));
            if c <= 1.0 {
                lower.push(LabeledBound::rigorous(
                    "slnd-small-c",
                    refined_lower_bound_small_c(spec, c)?,
                    "spacing c^(1/alpha); grows like c^(-1/alpha) as c -> 0",
                ));
            }
            lower.push(LabeledBound::asymptotic(
                "slnd-large-c-envelope",
                Some(lower_envelope_large_c(spec, c)?),
                "exp(-(c^2 + o(1)) / (2 l)) as c -> infinity",
            ));
        }
        None => flags.push("slnd-unknown: no lower bounds available".to_string()),
    }
    upper.push(LabeledBound::asymptotic(
        "large-c-envelope",
        Some(upper_bound_large_c(c, var_x1)?),
        "exp(-(c^2 + o(1)) / (2 Var X(1))) as c -> infinity",
    ));
    upper.push(LabeledBound::asymptotic(
        "small-c-rate",
        None,
        "lambda(c) = O(c^(-1/delta)) as c -> 0 under an increment bound of order 2 delta",
    ));
    for &(u, v) in fekete {
        upper.push(LabeledBound::rigorous(
            &format!("finite-horizon-u={u}"),
            v,
            "-log f(u) / u from simulated survival",
        ));
    }
    let exact = if spec.is_brownian() {
        match z_inverse(c) {
            Ok(v) => Some(v),
            Err(Error::OutOfRange { .. }) => {
                flags.push("exact value out of the invertible range".to_string());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let max_lower = lower
        .iter()
        .filter(|b| !b.asymptotic)
        .filter_map(|b| b.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_upper = upper
        .iter()
        .filter(|b| !b.asymptotic)
        .filter_map(|b| b.value)
        .fold(f64::INFINITY, f64::min);
    let consistent = max_lower <= min_upper
        && exact.is_none_or(|e| max_lower <= e * (1.0 + 1e-12) && e <= min_upper);
    Ok(BoundsReport {
        c,
        spec: spec.clone(),
        lower_bounds: lower,
        upper_bounds: upper,
        exact,
        flags,
        consistent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub m_index: usize,
    pub n_index: usize,
    /// Level of the continuous-survival term.
    pub shifted_level: f64,
    /// `t_n / t_m`, the horizon of the continuous-survival term.
    pub horizon_ratio: f64,
    pub log_horizon: f64,
    /// `K Σ_{j=m}^{n} exp(-(ε²/K) (t_j/(t_{j+1}-t_j))^{2α})`.
    pub correction: f64,
    /// Set when the schedule's gaps are not small relative to its times.
    pub flagged: bool,
    pub note: String,
}

/// Splits survival on a discrete schedule into a continuous-survival term
/// at level `c + ε` over `[1, t_n/t_m]` and a correction for excursions
/// between consecutive schedule points. `K` is a user constant; the report
/// compares schedules rather than certifying an absolute bound.
///
/// Indices are one-based; `n` is the second-to-last schedule point.
pub fn discretization_budget(
    schedule: &Schedule,
    alpha: f64,
    c: f64,
    epsilon: f64,
    m_index: usize,
    k: f64,
) -> Result<BudgetReport> {
    let n = schedule.times.len() - 1;
    if !(m_index > 1 && m_index < n) {
        return Err(Error::InvalidArgument(format!("need 1 < m < n = {n}, got m = {m_index}")));
    }
    if !(k > 1.0 && epsilon > 0.0 && alpha > 0.0 && c > 0.0) {
        return Err(Error::InvalidArgument("need K > 1 and positive epsilon, alpha, c".into()));
    }
    let scale = epsilon * epsilon / k;
    let correction = k * schedule.ratios[m_index - 1..n]
        .iter()
        .map(|r| (-scale * r.powf(2.0 * alpha)).exp())
        .sum::<f64>();
    let log_horizon = schedule.log_times[n - 1] - schedule.log_times[m_index - 1];
    let flagged = matches!(schedule.family, ScheduleFamily::Geometric);
    let note = if flagged {
        "gap ratio t_j/(t_{j+1}-t_j) is the constant 1/(e-1); the correction does not vanish and equivalence with the continuous exponent is open".to_string()
    } else {
        String::new()
    };
    Ok(BudgetReport {
        m_index,
        n_index: n,
        shifted_level: c + epsilon,
        horizon_ratio: log_horizon.exp(),
        log_horizon,
        correction,
        flagged,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBound {
    pub k0: f64,
    pub k0_error: f64,
    /// `c / K₀`.
    pub argument: f64,
    /// Index `(1 - β/γ)/2` of the comparison fractional Brownian motion.
    pub fbm_alpha: f64,
    /// Upper bound on `λ_X(c)`: `λ_B(c/K₀)`.
    pub value: f64,
    pub std_err: Option<f64>,
    pub exact: bool,
    pub label: String,
}

/// `λ_X(c) ≤ λ_B(c/K₀)` for white-in-time noise, with `B` a fractional
/// Brownian motion of the same index. The right side is exact when that
/// index is 1/2 and a Monte Carlo estimate otherwise.
pub fn comparison_bound(
    spec: &ProcessSpec,
    c: f64,
    horizons: &[f64],
    window: (f64, f64),
    mc: &McConfig,
    qcfg: &QuadratureConfig,
) -> Result<ComparisonBound> {
    let p = match &spec.kind {
        ProcessKind::SpdeTrace(p) => *p,
        _ => return Err(Error::InvalidArgument("the comparison bound applies to SPDE traces".into())),
    };
    if p.nu != 1.0 {
        return Err(Error::NuNotOne(p.nu));
    }
    let k0 = k0_constant(p.d, p.gamma, p.beta, qcfg)?;
    let argument = c / k0.value;
    let fbm_alpha = (1.0 - p.beta / p.gamma) / 2.0;
    let label = "upper-bound-on-lambda_X".to_string();
    if fbm_alpha == 0.5 {
        return Ok(ComparisonBound {
            k0: k0.value,
            k0_error: k0.error,
            argument,
            fbm_alpha,
            value: z_inverse(argument)?,
            std_err: None,
            exact: true,
            label,
        });
    }
    let kernel = CovarianceKernel::fbm(fbm_alpha)?;
    let run = estimate_exponent(&kernel, argument, horizons, window, mc)?;
    Ok(ComparisonBound {
        k0: k0.value,
        k0_error: k0.error,
        argument,
        fbm_alpha,
        value: run.estimate.lambda_hat,
        std_err: Some(run.estimate.std_err),
        exact: false,
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::make_schedule;

    #[test]
    fn kummer_terminating_series() {
        for z in [-3.0, 0.0, 2.5, 40.0] {
            let m = kummer_m(0.0, 0.5, z).unwrap();
            assert_eq!(m.value, 1.0);
            assert_eq!(m.truncation_bound, 0.0);
        }
        for x in [0.3, 1.0, 2.0] {
            let m = kummer_m(-1.0, 0.5, x * x / 2.0).unwrap();
            assert!((m.value - (1.0 - x * x)).abs() < 1e-15);
        }
        assert!(matches!(kummer_m(1.0, -2.0, 1.0), Err(Error::DivergentParameter(_))));
        assert!(kummer_m(1.0, 0.5, 51.0).is_err());
    }

    #[test]
    fn kummer_against_exponential() {
        // M(a, a, z) = e^z.
        for z in [-5.0, -1.0, 0.5, 10.0, 45.0] {
            let m = kummer_m(1.3, 1.3, z).unwrap();
            assert!((m.value - f64::exp(z)).abs() < 1e-12 * f64::exp(z).max(1e-6), "z = {z}");
        }
        assert!(kummer_m(1.3, 1.3, -40.0).unwrap().precision_loss);
    }

    #[test]
    fn z_roots() {
        assert!((z_of_mu(1.0).unwrap() - 1.0).abs() < 1e-10);
        let z2 = (3.0 - 6f64.sqrt()).sqrt();
        assert!((z_of_mu(2.0).unwrap() - z2).abs() < 1e-10);
        // Reference root from a 30-digit evaluation.
        assert!((z_of_mu(100.0).unwrap() - 0.110_933_604_378_383_7).abs() < 1e-10);
    }

    #[test]
    fn z_inverse_values() {
        assert!((z_inverse(1.0).unwrap() - 1.0).abs() < 1e-9);
        let z2 = (3.0 - 6f64.sqrt()).sqrt();
        assert!((z_inverse(z2).unwrap() - 2.0).abs() < 1e-8);
        let v = z_inverse(0.05).unwrap();
        assert!((v - 493.230_260_895_394_1).abs() < 1e-6, "{v}");
        assert!(matches!(z_inverse(1e-3), Err(Error::OutOfRange { .. })));
        assert!(matches!(z_inverse(20.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn lower_bound_examples() {
        let bm = ProcessSpec::brownian();
        let v = analytic_lower_bound(&bm, 1.0).unwrap();
        assert!((v - 0.2337).abs() < 5e-4, "{v}");
        assert!(v <= 1.0);
        assert!(analytic_lower_bound(&bm, 1e-9).unwrap() > 15.0);
        let small = refined_lower_bound_small_c(&bm, 0.05).unwrap();
        let large = refined_lower_bound_small_c(&bm, 0.1).unwrap();
        assert!(small > large);
        assert!(refined_lower_bound_small_c(&bm, 1.5).is_err());
    }

    #[test]
    fn large_c_envelope() {
        let v = upper_bound_large_c(3.0, 1.0).unwrap();
        assert!((v - (-4.5f64).exp()).abs() < 1e-16);
        assert!(upper_bound_large_c(4.0, 1.0).unwrap() < v);
        assert!(z_inverse(3.0).unwrap() <= 10.0 * v);
    }

    #[test]
    fn arithmetic_budget_matches_geometric_sum() {
        let s = make_schedule(ScheduleFamily::Arithmetic, 0.5, 10_001).unwrap();
        let m = 100;
        let rep = discretization_budget(&s, 0.5, 1.0, 0.1, m, 10.0).unwrap();
        // Σ_{j=m}^{n} q^j with q = e^{-1e-3}.
        let q = (-1e-3f64).exp();
        let n = 10_000;
        let oracle = 10.0 * (q.powi(m as i32) - q.powi(n + 1)) / (1.0 - q);
        assert!((rep.correction - oracle).abs() < 1e-9 * oracle);
        assert!(!rep.flagged);
        assert!((rep.horizon_ratio - 100.0).abs() < 1e-9);
    }

    #[test]
    fn geometric_budget_is_flagged() {
        let s = make_schedule(ScheduleFamily::Geometric, 0.5, 50).unwrap();
        let rep = discretization_budget(&s, 0.5, 1.0, 0.1, 10, 10.0).unwrap();
        assert!(rep.flagged);
        assert!(rep.correction > 10.0 * 30.0 * 0.99);
    }

    #[test]
    fn bm_report_has_exact_value() {
        let r = bounds_report(&ProcessSpec::brownian(), 1.0, 1.0, &[]).unwrap();
        assert!((r.exact.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.consistent);
    }
}
