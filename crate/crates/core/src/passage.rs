//! Passage times, survival curves and exponent estimation.
//!
//! All Monte Carlo work happens in the Lamperti frame: with
//! `Y(u) = e^{-αu} X(e^u)`, the event `|X(t)| ≤ c t^β` for `t ∈ [1, e^u]`
//! becomes `|Y(r)| ≤ c e^{(β-α)r}` for `r ∈ [0, u]`. In the critical regime
//! the band is constant and the survival probability `f(u)` decays
//! exponentially in `u` at the rate `λ(c)`.
//!
//! Each path contributes a single statistic, the first grid index where it
//! leaves the band. Per-horizon survivor counts follow from a histogram of
//! that index, and histograms from different workers merge by integer
//! addition, so results are independent of the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, LampertiKernel};
use crate::rng::SeedLineage;
use crate::sampler::{Frame, PathSample, StationarySampler};
use crate::stats::{two_sided_z, wilson_interval};

/// Default confidence level for survival intervals.
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Fewest survivors a horizon needs before its log-survival is used.
pub const SURVIVOR_FLOOR: u64 = 10;
/// Default Lamperti-frame grid step.
pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    fn name(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

/// Boundary `c t^β` for a process of index `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageConfig {
    pub c: f64,
    pub beta: f64,
    pub alpha: f64,
    pub regime: Regime,
}

impl PassageConfig {
    pub fn new(c: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("boundary level c must be positive, got {c}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("boundary exponent must be positive, got {beta}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        let regime = if (beta - alpha).abs() <= 1e-12 * alpha {
            Regime::Critical
        } else if beta < alpha {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        };
        Ok(Self {
            c,
            beta,
            alpha,
            regime,
        })
    }

    pub fn require(&self, expected: Regime) -> Result<()> {
        if self.regime != expected {
            return Err(Error::RegimeMismatch {
                expected: expected.name(),
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        Ok(())
    }

    /// Band half-width at log time `u` in the Lamperti frame.
    pub fn y_boundary(&self, u: f64) -> f64 {
        match self.regime {
            Regime::Critical => self.c,
            _ => self.c * ((self.beta - self.alpha) * u).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Passage {
    Crossed(f64),
    Survived { horizon: f64 },
}

/// First grid time `t ≥ 1` with `|X(t)| > c t^β`.
pub fn first_passage(path: &PathSample, c: f64, beta: f64) -> Result<Passage> {
    if path.frame != Frame::X {
        return Err(Error::InvalidArgument("first_passage needs an original-time path".into()));
    }
    let mut last = None;
    for (&t, &x) in path.grid.iter().zip(&path.values) {
        if t < 1.0 {
            continue;
        }
        if x.abs() > c * t.powf(beta) {
            return Ok(Passage::Crossed(t));
        }
        last = Some(t);
    }
    last.map(|horizon| Passage::Survived { horizon }).ok_or(Error::EmptyGrid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Log-time horizons `u_k`, strictly increasing.
    pub horizons: Vec<f64>,
    pub survivors: Vec<u64>,
    pub trials: u64,
    pub f_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub level: f64,
}

impl SurvivalCurve {
    pub fn from_counts(horizons: Vec<f64>, survivors: Vec<u64>, trials: u64, level: f64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidArgument("a survival curve needs at least one trial".into()));
        }
        if horizons.len() != survivors.len() || horizons.is_empty() {
            return Err(Error::InvalidArgument("horizons and survivor counts must be non-empty and aligned".into()));
        }
        if horizons.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("horizons must be strictly increasing".into()));
        }
        if survivors.windows(2).any(|w| w[1] > w[0]) || survivors[0] > trials {
            return Err(Error::Invariant("survivor counts must be non-increasing and at most the trial count".into()));
        }
        let n = trials as f64;
        let f_hat = survivors.iter().map(|&s| s as f64 / n).collect();
        let (ci_lo, ci_hi) = survivors.iter().map(|&s| wilson_interval(s, trials, level)).unzip();
        Ok(Self {
            horizons,
            survivors,
            trials,
            f_hat,
            ci_lo,
            ci_hi,
            level,
        })
    }

    /// Delta-method covariance of `log f̂` at horizons `j` and `k`:
    /// `(1 - f_a)/(n f_a)` with `a` the earlier of the two.
    pub fn log_cov(&self, j: usize, k: usize) -> f64 {
        let a = j.min(k);
        let f = self.f_hat[a];
        if f <= 0.0 {
            return f64::INFINITY;
        }
        // Floor keeps weights finite when nothing has crossed yet.
        ((1.0 - f) / (self.trials as f64 * f)).max(0.25 / (self.trials as f64).powi(2))
    }

    /// Writes `u,survivors,trials,f_hat,ci_lo,ci_hi` rows.
    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = header_comment {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str("u,survivors,trials,f_hat,ci_lo,ci_hi\n");
        for k in 0..self.horizons.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.horizons[k], self.survivors[k], self.trials, self.f_hat[k], self.ci_lo[k], self.ci_hi[k]
            ));
        }
        out
    }
}

/// Monte Carlo settings shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: u64,
    pub step: f64,
    pub seed: u64,
    pub level: f64,
}

impl McConfig {
    pub fn new(n_paths: u64, step: f64, seed: u64) -> Self {
        Self {
            n_paths,
            step,
            seed,
            level: DEFAULT_LEVEL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("need at least one path".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {}", self.step)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("confidence level must be in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

/// Grid index of log time `u` on a grid of step `step`.
pub fn horizon_index(u: f64, step: f64) -> usize {
    (u / step + 1e-9).floor() as usize
}

fn check_horizons(horizons: &[f64]) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::InvalidArgument("need at least one horizon".into()));
    }
    if horizons.iter().any(|u| !(*u >= 0.0 && u.is_finite())) || horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("horizons must be finite, nonnegative and strictly increasing".into()));
    }
    Ok(())
}

/// Histogram of first-exit indices over `n_paths` paths: entry `i < n` counts
/// paths whose first point outside `[-b_i, b_i]` is `i`, entry `n` counts
/// paths that never leave.
pub fn exit_histogram(sampler: &StationarySampler, boundary: &[f64], n_paths: u64, seed: u64) -> Vec<u64> {
    let n = sampler.len();
    debug_assert_eq!(boundary.len(), n);
    (0..n_paths)
        .into_par_iter()
        .fold(
            || (sampler.workspace(), vec![0.0; n], vec![0u64; n + 1]),
            |(mut ws, mut buf, mut hist), path| {
                let mut rng = SeedLineage::new(seed, path).rng();
                sampler.sample_into(&mut rng, &mut ws, &mut buf);
                let exit = buf
                    .iter()
                    .zip(boundary)
                    .position(|(y, b)| y.abs() > *b)
                    .unwrap_or(n);
                hist[exit] += 1;
                (ws, buf, hist)
            },
        )
        .map(|(_, _, hist)| hist)
        .reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

fn curve_from_histogram(hist: &[u64], horizons: &[f64], step: f64, trials: u64, level: f64) -> Result<SurvivalCurve> {
    // survivors(u) = #{paths with exit index > index(u)}
    let mut tail = vec![0u64; hist.len() + 1];
    for i in (0..hist.len()).rev() {
        tail[i] = tail[i + 1] + hist[i];
    }
    let survivors = horizons.iter().map(|&u| tail[horizon_index(u, step) + 1]).collect();
    SurvivalCurve::from_counts(horizons.to_vec(), survivors, trials, level)
}

fn banded_curve(
    kernel: &CovarianceKernel,
    cfg: &PassageConfig,
    horizons: &[f64],
    mc: &McConfig,
) -> Result<SurvivalCurve> {
    check_horizons(horizons)?;
    mc.validate()?;
    let rho = LampertiKernel::new(kernel.clone())?;
    let last = *horizons.last().expect("non-empty");
    let n_points = horizon_index(last, mc.step) + 1;
    let sampler = StationarySampler::from_lamperti(&rho, mc.step, n_points)?;
    let boundary: Vec<f64> = (0..n_points).map(|i| cfg.y_boundary(i as f64 * mc.step)).collect();
    let hist = exit_histogram(&sampler, &boundary, mc.n_paths, mc.seed);
    curve_from_histogram(&hist, horizons, mc.step, mc.n_paths, mc.level)
}

/// `f̂(u) = P̂{max_{r ≤ u} |Y(r)| ≤ c}` at each horizon on a grid of step `mc.step`.
pub fn survival_estimate(kernel: &CovarianceKernel, c: f64, horizons: &[f64], mc: &McConfig) -> Result<SurvivalCurve> {
    let cfg = PassageConfig::new(c, kernel.alpha(), kernel.alpha())?;
    banded_curve(kernel, &cfg, horizons, mc)
}

/// One member of the finite-horizon upper-bound family `-log f̂(u)/u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeketeValue {
    pub u: f64,
    pub survivors: u64,
    /// `-log f̂(u)/u`; absent when no path survived.
    pub value: Option<f64>,
    /// Same with `f̂` replaced by its upper Wilson limit.
    pub wilson_value: Option<f64>,
    pub zero_survivors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub lambda_hat: f64,
    pub std_err: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub used_horizons: Vec<f64>,
    pub upper_bound_family: Vec<FeketeValue>,
    /// Quadratic coefficient of an unweighted quadratic fit of `-log f̂`
    /// on `u` over the window; near zero when the decay is exponential.
    pub curvature: f64,
    /// `λ̂ ≤ min family over used horizons + 2·std_err`.
    pub fekete_consistent: bool,
}

pub fn fekete_family(curve: &SurvivalCurve) -> Vec<FeketeValue> {
    curve
        .horizons
        .iter()
        .enumerate()
        .filter(|(_, u)| **u > 0.0)
        .map(|(k, &u)| {
            let s = curve.survivors[k];
            let zero = s == 0;
            FeketeValue {
                u,
                survivors: s,
                value: (!zero).then(|| -curve.f_hat[k].ln() / u),
                wilson_value: (curve.ci_hi[k] > 0.0).then(|| -curve.ci_hi[k].ln() / u),
                zero_survivors: zero,
            }
        })
        .collect()
}

fn solve_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < f64::MIN_POSITIVE {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ])
}

/// Coefficient of `u²` in the least-squares quadratic through the points.
fn quadratic_coefficient(u: &[f64], y: &[f64]) -> f64 {
    let m = nalgebra::DMatrix::from_fn(u.len(), 3, |i, j| u[i].powi(j as i32));
    let rhs = nalgebra::DVector::from_column_slice(y);
    match m.svd(true, true).solve(&rhs, 1e-12) {
        Ok(beta) => beta[2],
        Err(_) => f64::NAN,
    }
}

/// Weighted least squares of `-log f̂(u)` on `u` over the window.
///
/// Weights are the inverse delta-method variances; the standard error is
/// the sandwich form that accounts for the nested (hence correlated)
/// survival events across horizons.
pub fn exponent_fit(curve: &SurvivalCurve, window: (f64, f64)) -> Result<ExponentEstimate> {
    let idx: Vec<usize> = (0..curve.horizons.len())
        .filter(|&k| curve.horizons[k] >= window.0 && curve.horizons[k] <= window.1)
        .collect();
    if idx.len() < 3 {
        return Err(Error::WindowTooSmall { points: idx.len() });
    }
    if let Some(&k) = idx.iter().find(|&&k| curve.survivors[k] < SURVIVOR_FLOOR) {
        return Err(Error::InsufficientSurvivors {
            horizon: curve.horizons[k],
            survivors: curve.survivors[k],
            floor: SURVIVOR_FLOOR,
        });
    }
    let u: Vec<f64> = idx.iter().map(|&k| curve.horizons[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| -curve.f_hat[k].ln()).collect();
    let w: Vec<f64> = idx.iter().map(|&k| 1.0 / curve.log_cov(k, k)).collect();

    let mut xtwx = [[0.0; 2]; 2];
    let mut xtwy = [0.0; 2];
    for i in 0..u.len() {
        xtwx[0][0] += w[i];
        xtwx[0][1] += w[i] * u[i];
        xtwx[1][1] += w[i] * u[i] * u[i];
        xtwy[0] += w[i] * y[i];
        xtwy[1] += w[i] * u[i] * y[i];
    }
    xtwx[1][0] = xtwx[0][1];
    let coef = solve_2x2(xtwx, xtwy).ok_or(Error::WindowTooSmall { points: u.len() })?;
    // Row of (XᵀWX)⁻¹XᵀW giving the slope as a linear functional of y.
    let det = xtwx[0][0] * xtwx[1][1] - xtwx[0][1] * xtwx[1][0];
    let g: Vec<f64> = (0..u.len())
        .map(|i| w[i] * (xtwx[0][0] * u[i] - xtwx[0][1]) / det)
        .collect();
    let mut var = 0.0;
    for a in 0..idx.len() {
        for b in 0..idx.len() {
            var += g[a] * g[b] * curve.log_cov(idx[a], idx[b]);
        }
    }
    let std_err = var.max(0.0).sqrt();
    let lambda_hat = coef[1];
    let family = fekete_family(curve);
    let min_used = family
        .iter()
        .filter(|f| u.contains(&f.u))
        .filter_map(|f| f.value)
        .fold(f64::INFINITY, f64::min);
    Ok(ExponentEstimate {
        lambda_hat,
        std_err,
        intercept: coef[0],
        fit_window: window,
        used_horizons: u.clone(),
        upper_bound_family: family,
        curvature: quadratic_coefficient(&u, &y),
        fekete_consistent: lambda_hat <= min_used + 2.0 * std_err,
    })
}

/// Survival curve plus fit, the usual end-to-end estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRun {
    pub curve: SurvivalCurve,
    pub estimate: ExponentEstimate,
}

pub fn estimate_exponent(
    kernel: &CovarianceKernel,
    c: f64,
    horizons: &[f64],
    window: (f64, f64),
    mc: &McConfig,
) -> Result<ExponentRun> {
    let curve = survival_estimate(kernel, c, horizons, mc)?;
    let estimate = exponent_fit(&curve, window)?;
    Ok(ExponentRun { curve, estimate })
}

/// Sensitivity of `λ̂` to halving the grid step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingDiagnostic {
    pub coarse: ExponentEstimate,
    pub fine: ExponentEstimate,
    pub shift: f64,
    /// Width of the coarse run's two-sided interval for `λ`.
    pub ci_width: f64,
}

pub fn halving_diagnostic(
    kernel: &CovarianceKernel,
    c: f64,
    horizons: &[f64],
    window: (f64, f64),
    mc: &McConfig,
) -> Result<HalvingDiagnostic> {
    let coarse = estimate_exponent(kernel, c, horizons, window, mc)?.estimate;
    let fine_mc = McConfig {
        step: mc.step / 2.0,
        ..*mc
    };
    let fine = estimate_exponent(kernel, c, horizons, window, &fine_mc)?.estimate;
    let z = two_sided_z(mc.level);
    Ok(HalvingDiagnostic {
        shift: (fine.lambda_hat - coarse.lambda_hat).abs(),
        ci_width: 2.0 * z * coarse.std_err,
        coarse,
        fine,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub curve: SurvivalCurve,
    /// `f̂` at the second-to-last horizon minus `f̂` at the last.
    pub difference: f64,
    /// Wilson interval for the fraction of paths first crossing between them.
    pub difference_ci: (f64, f64),
    pub final_ci: (f64, f64),
    pub difference_ci_contains_zero: bool,
    pub final_strictly_inside: bool,
}

/// Survival against a boundary growing faster than the process,
/// `c t^β` with `β > α`: it should level off strictly inside `(0, 1)`.
pub fn supercritical_plateau(
    kernel: &CovarianceKernel,
    c: f64,
    beta: f64,
    horizons: &[f64],
    mc: &McConfig,
) -> Result<PlateauReport> {
    let cfg = PassageConfig::new(c, beta, kernel.alpha())?;
    cfg.require(Regime::Supercritical)?;
    if horizons.len() < 2 {
        return Err(Error::InvalidArgument("the plateau check needs at least two horizons".into()));
    }
    let curve = banded_curve(kernel, &cfg, horizons, mc)?;
    let k = curve.horizons.len() - 1;
    let crossed = curve.survivors[k - 1] - curve.survivors[k];
    let difference_ci = wilson_interval(crossed, curve.trials, curve.level);
    let final_ci = (curve.ci_lo[k], curve.ci_hi[k]);
    Ok(PlateauReport {
        difference: curve.f_hat[k - 1] - curve.f_hat[k],
        difference_ci_contains_zero: difference_ci.0 <= 0.0,
        final_strictly_inside: final_ci.0 > 0.0 && final_ci.1 < 1.0,
        difference_ci,
        final_ci,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub curve: SurvivalCurve,
    /// `(α-β)/(4β²)`, the coefficient of `-(log t)²` in the envelope.
    pub envelope_coefficient: f64,
    /// Smallest `C` with `log f̂ ≤ -A u² + C u` at every horizon with survivors.
    pub fitted_c: f64,
    /// `log f̂(u)` per horizon, absent when nobody survived.
    pub log_survival: Vec<Option<f64>>,
    /// Horizons used for the three-point curvature statistic.
    pub curvature_horizons: [f64; 3],
    pub curvature: f64,
    pub curvature_ci: (f64, f64),
    pub negative_curvature: bool,
}

/// Survival against a boundary growing slower than the process. The
/// log-survival should bend downwards in `log t`, consistent with the
/// `exp(-A (log t)² + O(log t))` envelope.
pub fn subcritical_tail_check(
    kernel: &CovarianceKernel,
    c: f64,
    beta: f64,
    horizons: &[f64],
    mc: &McConfig,
) -> Result<TailReport> {
    let alpha = kernel.alpha();
    let cfg = PassageConfig::new(c, beta, alpha)?;
    cfg.require(Regime::Subcritical)?;
    if kernel.spec().slnd_constant.is_none() {
        return Err(Error::SlndUnknown);
    }
    let curve = banded_curve(kernel, &cfg, horizons, mc)?;
    let a = (alpha - beta) / (4.0 * beta * beta);
    let log_survival: Vec<Option<f64>> = curve
        .f_hat
        .iter()
        .map(|&f| (f > 0.0).then(|| f.ln()))
        .collect();
    let fitted_c = curve
        .horizons
        .iter()
        .zip(&log_survival)
        .filter(|(u, l)| **u > 0.0 && l.is_some())
        .map(|(u, l)| (l.expect("filtered") + a * u * u) / u)
        .fold(f64::NEG_INFINITY, f64::max);

    let usable: Vec<usize> = (0..curve.horizons.len())
        .filter(|&k| curve.survivors[k] >= SURVIVOR_FLOOR)
        .collect();
    if usable.len() < 3 {
        return Err(Error::WindowTooSmall { points: usable.len() });
    }
    let pick = [usable[usable.len() - 3], usable[usable.len() - 2], usable[usable.len() - 1]];
    let u: Vec<f64> = pick.iter().map(|&k| curve.horizons[k]).collect();
    let y: Vec<f64> = pick.iter().map(|&k| curve.f_hat[k].ln()).collect();
    // Second divided difference: a = Σ g_i y_i.
    let g = [
        1.0 / ((u[1] - u[0]) * (u[2] - u[0])),
        -1.0 / ((u[1] - u[0]) * (u[2] - u[1])),
        1.0 / ((u[2] - u[1]) * (u[2] - u[0])),
    ];
    let curvature: f64 = g.iter().zip(&y).map(|(g, y)| g * y).sum();
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += g[i] * g[j] * curve.log_cov(pick[i], pick[j]);
        }
    }
    let half = two_sided_z(curve.level) * var.sqrt();
    let curvature_ci = (curvature - half, curvature + half);
    Ok(TailReport {
        envelope_coefficient: a,
        fitted_c,
        log_survival,
        curvature_horizons: [u[0], u[1], u[2]],
        curvature,
        negative_curvature: curvature_ci.1 < 0.0,
        curvature_ci,
        curve,
    })
}

/// Exponent of survival observed only at `t = e^n`, `n = 1, …, n_max`.
pub fn lambda_star_estimate(
    kernel: &CovarianceKernel,
    c: f64,
    n_max: usize,
    window: Option<(f64, f64)>,
    n_paths: u64,
    seed: u64,
) -> Result<ExponentRun> {
    if n_max < 3 {
        return Err(Error::WindowTooSmall { points: n_max });
    }
    let mc = McConfig::new(n_paths, 1.0, seed);
    mc.validate()?;
    let rho = LampertiKernel::new(kernel.clone())?;
    // Stationarity lets the points u = 1..n_max sit at indices 0..n_max-1.
    let sampler = StationarySampler::from_lamperti(&rho, 1.0, n_max)?;
    let boundary = vec![c; n_max];
    let hist = exit_histogram(&sampler, &boundary, n_paths, seed);
    let horizons: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let mut tail = vec![0u64; n_max + 2];
    for i in (0..hist.len()).rev() {
        tail[i] = tail[i + 1] + hist[i];
    }
    let survivors = (0..n_max).map(|i| tail[i + 1]).collect();
    let curve = SurvivalCurve::from_counts(horizons, survivors, n_paths, mc.level)?;
    let window = window.unwrap_or((1.0, n_max as f64));
    let estimate = exponent_fit(&curve, window)?;
    Ok(ExponentRun { curve, estimate })
}

/// Counts of pathwise monotonicity violations under common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub paths: u64,
    pub comparisons: u64,
    pub violations_in_c: u64,
    pub violations_in_horizon: u64,
    pub violations_in_schedule: u64,
}

impl CouplingReport {
    pub fn total_violations(&self) -> u64 {
        self.violations_in_c + self.violations_in_horizon + self.violations_in_schedule
    }
}

/// Checks on each path that survival is non-decreasing in `c`,
/// non-increasing in the horizon, and can only improve when the grid is
/// coarsened to every `coarsen`-th point.
pub fn coupling_check(
    kernel: &CovarianceKernel,
    levels: &[f64],
    horizons: &[f64],
    coarsen: usize,
    mc: &McConfig,
) -> Result<CouplingReport> {
    check_horizons(horizons)?;
    mc.validate()?;
    if coarsen == 0 {
        return Err(Error::InvalidArgument("coarsening factor must be positive".into()));
    }
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    let rho = LampertiKernel::new(kernel.clone())?;
    let n_points = horizon_index(*horizons.last().expect("non-empty"), mc.step) + 1;
    let sampler = StationarySampler::from_lamperti(&rho, mc.step, n_points)?;
    let ends: Vec<usize> = horizons.iter().map(|&u| horizon_index(u, mc.step)).collect();

    let survived = |y: &[f64], c: f64, end: usize, stride: usize| -> bool {
        y[..=end].iter().step_by(stride).all(|v| v.abs() <= c)
    };
    let totals = (0..mc.n_paths)
        .into_par_iter()
        .map(|path| {
            let y = sampler.sample(SeedLineage::new(mc.seed, path));
            let mut counts = [0u64; 4];
            let fine: Vec<Vec<bool>> = levels
                .iter()
                .map(|&c| ends.iter().map(|&e| survived(&y, c, e, 1)).collect())
                .collect();
            for (ci, &c) in levels.iter().enumerate() {
                for (k, &e) in ends.iter().enumerate() {
                    counts[0] += 1;
                    if ci > 0 && fine[ci - 1][k] && !fine[ci][k] {
                        counts[1] += 1;
                    }
                    if k > 0 && fine[ci][k] && !fine[ci][k - 1] {
                        counts[2] += 1;
                    }
                    if fine[ci][k] && !survived(&y, c, e, coarsen) {
                        counts[3] += 1;
                    }
                }
            }
            counts
        })
        .reduce(|| [0u64; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    Ok(CouplingReport {
        paths: mc.n_paths,
        comparisons: totals[0],
        violations_in_c: totals[1],
        violations_in_horizon: totals[2],
        violations_in_schedule: totals[3],
    })
}
