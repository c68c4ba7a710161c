//! Process specifications, covariance kernels and the Lamperti transform.
//!
//! Kernels live on `[0, ∞)` with `X(0) = 0`, so `eval(0, t) = 0` for every
//! kind. The Lamperti transform `Y(u) = e^{-αu} X(e^u)` turns each
//! `α`-self-similar kernel into a stationary one, `rho`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureConfig};

/// Parameters `(d, γ, β, ν)` of the trace of the fractional heat equation
/// driven by noise that is `|t-s|^{-ν}`-correlated in time (white when
/// `ν = 1`) and Riesz-correlated in space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeParams {
    pub d: u32,
    pub gamma: f64,
    pub beta: f64,
    pub nu: f64,
}

impl SpdeParams {
    pub fn new(d: u32, gamma: f64, beta: f64, nu: f64) -> Result<Self> {
        let p = Self { d, gamma, beta, nu };
        p.validate()?;
        Ok(p)
    }

    /// Well-posedness threshold `β/(2-ν)`; `γ` must strictly exceed it.
    pub fn gamma_threshold(&self) -> f64 {
        self.beta / (2.0 - self.nu)
    }

    pub fn validate(&self) -> Result<()> {
        let df = self.d as f64;
        if self.d == 0 {
            return Err(Error::Domain("spatial dimension must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.beta > 0.0 && self.beta <= df) {
            return Err(Error::Domain(format!(
                "beta must lie in (0, d] = (0, {df}], got {}",
                self.beta
            )));
        }
        if self.beta == df && self.d != 1 {
            return Err(Error::Domain(format!(
                "beta = d is only allowed when d = 1, got d = {}",
                self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::Domain(format!("nu must lie in [0, 1], got {}", self.nu)));
        }
        let threshold = self.gamma_threshold();
        if self.gamma <= threshold {
            return Err(Error::IllPosed {
                gamma: self.gamma,
                threshold,
            });
        }
        Ok(())
    }

    /// Self-similarity index `1 - (ν + β/γ)/2`.
    pub fn alpha(&self) -> f64 {
        1.0 - (self.nu + self.beta / self.gamma) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProcessKind {
    #[serde(rename = "fbm")]
    FBm { hurst: f64 },
    BrownianMotion,
    SpdeTrace(SpdeParams),
    /// A user-supplied kernel; only its name and declared index are recorded.
    Custom { name: String, alpha: f64 },
}

/// A self-similar Gaussian process together with its derived index and,
/// when known, its strong local non-determinism constant `ℓ`:
/// `Var(X(t) | X(r), r ≤ s) ≥ ℓ (t-s)^{2α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub alpha: f64,
    pub slnd_constant: Option<f64>,
}

/// `α` for a process kind.
pub fn derive_alpha(kind: &ProcessKind) -> Result<f64> {
    let alpha = match kind {
        ProcessKind::FBm { hurst } => {
            check_hurst(*hurst)?;
            *hurst
        }
        ProcessKind::BrownianMotion => 0.5,
        ProcessKind::SpdeTrace(p) => {
            p.validate()?;
            p.alpha()
        }
        ProcessKind::Custom { alpha, .. } => *alpha,
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("self-similarity index must be positive, got {alpha}")));
    }
    Ok(alpha)
}

fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("Hurst index must lie in (0, 1), got {h}")));
    }
    Ok(())
}

impl ProcessSpec {
    /// Fractional Brownian motion with unit SLND constant by default. Only
    /// `H = 1/2` makes `ℓ = 1` exact; for other `H` the constant is a
    /// configurable normalisation and lower bounds scale with it.
    pub fn fbm(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self {
            kind: ProcessKind::FBm { hurst },
            alpha: hurst,
            slnd_constant: Some(1.0),
        })
    }

    pub fn brownian() -> Self {
        Self {
            kind: ProcessKind::BrownianMotion,
            alpha: 0.5,
            slnd_constant: Some(1.0),
        }
    }

    /// The SPDE trace. No SLND constant is attached by default; one may be
    /// supplied with [`ProcessSpec::with_slnd`] except when `ν = 0`, where
    /// SLND itself is unresolved.
    pub fn spde(params: SpdeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            kind: ProcessKind::SpdeTrace(params),
            alpha: params.alpha(),
            slnd_constant: None,
        })
    }

    pub fn custom(name: impl Into<String>, alpha: f64) -> Result<Self> {
        let kind = ProcessKind::Custom {
            name: name.into(),
            alpha,
        };
        let alpha = derive_alpha(&kind)?;
        Ok(Self {
            kind,
            alpha,
            slnd_constant: None,
        })
    }

    pub fn with_slnd(mut self, ell: f64) -> Result<Self> {
        if !(ell >= 0.0 && ell.is_finite()) {
            return Err(Error::Domain(format!("SLND constant must be nonnegative, got {ell}")));
        }
        if let ProcessKind::SpdeTrace(p) = &self.kind {
            if p.nu == 0.0 {
                return Err(Error::SlndUnknown);
            }
        }
        self.slnd_constant = Some(ell);
        Ok(self)
    }

    pub fn is_brownian(&self) -> bool {
        match self.kind {
            ProcessKind::BrownianMotion => true,
            ProcessKind::FBm { hurst } => hurst == 0.5,
            _ => false,
        }
    }
}

/// `ℓ (1 - e^{-1})^{2α}`, the floor on the conditional variance of the
/// stationary process one unit of log time ahead.
pub fn slnd_bound_constant(spec: &ProcessSpec) -> Result<f64> {
    let ell = spec.slnd_constant.ok_or(Error::SlndUnknown)?;
    Ok(ell * (-(-1f64).exp_m1()).powf(2.0 * spec.alpha))
}

/// `½[t^{2H} + s^{2H} - |t-s|^{2H}]`.
pub fn fbm_cov(hurst: f64, s: f64, t: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("times must be nonnegative, got s = {s}, t = {t}")));
    }
    Ok(fbm_cov_unchecked(hurst, s, t))
}

fn fbm_cov_unchecked(hurst: f64, s: f64, t: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let (a, b) = if s <= t { (s, t) } else { (t, s) };
    if a == 0.0 {
        return 0.0;
    }
    0.5 * (a.powf(two_h) + b.powf(two_h) - (b - a).powf(two_h))
}

pub type CovFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum KernelSource {
    Fbm(f64),
    Brownian,
    Spde {
        params: SpdeParams,
        cfg: QuadratureConfig,
    },
    Custom(CovFn),
}

/// An evaluable covariance `R(s, t)` with its process metadata.
///
/// `tolerance` is zero for closed forms and the relative quadrature
/// tolerance for numerically evaluated kernels.
#[derive(Clone)]
pub struct CovarianceKernel {
    spec: ProcessSpec,
    source: KernelSource,
    tolerance: f64,
}

impl fmt::Debug for CovarianceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovarianceKernel")
            .field("spec", &self.spec)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

const SCALING_FACTORS: [f64; 3] = [0.5, 2.0, 10.0];

impl CovarianceKernel {
    pub fn new(spec: ProcessSpec) -> Result<Self> {
        Self::with_quadrature(spec, QuadratureConfig::default())
    }

    /// Builds the kernel for a registered process kind; SPDE kernels evaluate
    /// their covariance integrals under `cfg`.
    pub fn with_quadrature(spec: ProcessSpec, cfg: QuadratureConfig) -> Result<Self> {
        let (source, tolerance) = match &spec.kind {
            ProcessKind::FBm { hurst } => (KernelSource::Fbm(*hurst), 0.0),
            ProcessKind::BrownianMotion => (KernelSource::Brownian, 0.0),
            ProcessKind::SpdeTrace(p) => {
                cfg.validate()?;
                let tol = if p.nu == 1.0 { 0.0 } else { cfg.rel_tol };
                (KernelSource::Spde { params: *p, cfg }, tol)
            }
            ProcessKind::Custom { .. } => {
                return Err(Error::InvalidArgument(
                    "custom kernels are built with CovarianceKernel::custom".into(),
                ))
            }
        };
        Ok(Self {
            spec,
            source,
            tolerance,
        })
    }

    pub fn fbm(hurst: f64) -> Result<Self> {
        Self::new(ProcessSpec::fbm(hurst)?)
    }

    pub fn brownian() -> Self {
        Self::new(ProcessSpec::brownian()).expect("closed-form kernel")
    }

    pub fn spde(params: SpdeParams) -> Result<Self> {
        Self::new(ProcessSpec::spde(params)?)
    }

    /// Wraps a user covariance. The declared `α` is not trusted: the scaling
    /// law is checked on a grid and the kernel rejected if it fails.
    pub fn custom(spec: ProcessSpec, cov: CovFn, tolerance: f64) -> Result<Self> {
        if !matches!(spec.kind, ProcessKind::Custom { .. }) {
            return Err(Error::InvalidArgument("custom kernels need a Custom process kind".into()));
        }
        if !(tolerance >= 0.0) {
            return Err(Error::Domain("tolerance must be nonnegative".into()));
        }
        let kernel = Self {
            spec,
            source: KernelSource::Custom(cov),
            tolerance,
        };
        let worst = kernel.scaling_defect()?;
        if worst > 1.0 {
            return Err(Error::Domain(format!(
                "custom kernel violates the declared scaling law with alpha = {} (defect ratio {worst:.3e})",
                kernel.alpha()
            )));
        }
        Ok(kernel)
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn is_closed_form(&self) -> bool {
        self.tolerance == 0.0 && !matches!(self.source, KernelSource::Custom(_))
    }

    /// `R(s, t)`. Arguments are ordered before evaluation, so the result is
    /// exactly symmetric.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= 0.0) || !(s.is_finite() && t.is_finite()) {
            return Err(Error::Domain(format!("times must be finite and nonnegative, got s = {s}, t = {t}")));
        }
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        if a == 0.0 {
            return Ok(0.0);
        }
        match &self.source {
            KernelSource::Fbm(h) => Ok(fbm_cov_unchecked(*h, a, b)),
            KernelSource::Brownian => Ok(a),
            KernelSource::Spde { params, cfg } => {
                Ok(quadrature::spde_trace_cov(params, a, b - a, cfg)?.value)
            }
            KernelSource::Custom(f) => {
                let v = f(a, b);
                if !v.is_finite() {
                    return Err(Error::Domain(format!("custom kernel returned {v} at ({a}, {b})")));
                }
                Ok(v)
            }
        }
    }

    pub fn variance(&self, t: f64) -> Result<f64> {
        self.eval(t, t)
    }

    /// Gram matrix `[R(t_i, t_j)]`, filled from the upper triangle.
    pub fn gram(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let n = times.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(times[i], times[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Largest ratio of the scaling-law defect to its allowance over a
    /// 20-point grid and `c ∈ {0.5, 2, 10}`; at most 1 means the law holds.
    pub fn scaling_defect(&self) -> Result<f64> {
        let two_alpha = 2.0 * self.alpha();
        let grid: Vec<f64> = (0..20).map(|i| 0.1 * 100f64.powf(i as f64 / 19.0)).collect();
        let mut worst: f64 = 0.0;
        for &c in &SCALING_FACTORS {
            let factor = c.powf(two_alpha);
            for (i, &s) in grid.iter().enumerate() {
                for &t in &grid[i..] {
                    let base = self.eval(s, t)?;
                    let scaled = self.eval(c * s, c * t)?;
                    let diff = (scaled - factor * base).abs();
                    // Relative tolerance for numerical kernels, plus rounding
                    // slack for the power evaluations of closed forms.
                    let allowance = self.tolerance * factor.max(1.0) * base.abs().max(scaled.abs())
                        + 64.0 * f64::EPSILON * scaled.abs().max(factor * base.abs())
                        + f64::MIN_POSITIVE;
                    worst = worst.max(diff / allowance);
                }
            }
        }
        Ok(worst)
    }
}

/// The stationary covariance of `Y(u) = e^{-αu} X(e^u)`.
#[derive(Debug, Clone)]
pub struct LampertiKernel {
    base: CovarianceKernel,
}

impl LampertiKernel {
    pub fn new(base: CovarianceKernel) -> Result<Self> {
        let v = base.eval(1.0, 1.0)?;
        if !(v > 0.0) {
            return Err(Error::Domain(format!("degenerate process: Var X(1) = {v}")));
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> &CovarianceKernel {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.base.alpha()
    }

    /// `ρ(h) = e^{-αh} R(e^h, 1)`; symmetric in `h`.
    pub fn rho(&self, h: f64) -> Result<f64> {
        let h = h.abs();
        if !h.is_finite() {
            return Err(Error::Domain("log-time lag must be finite".into()));
        }
        match self.base.source {
            KernelSource::Brownian => Ok((-0.5 * h).exp()),
            KernelSource::Fbm(hurst) => {
                // ½[e^{Hh}(1 - (1-e^{-h})^{2H}) + e^{-Hh}], free of cancellation.
                let lead = if h > 40.0 {
                    // 1 - (1-x)^{2H} = 2Hx(1 + O(x)) with x below 1e-17.
                    2.0 * hurst * ((hurst - 1.0) * h).exp()
                } else {
                    let head = -(2.0 * hurst * (-(-h).exp()).ln_1p()).exp_m1();
                    (hurst * h).exp() * head
                };
                Ok(0.5 * (lead + (-hurst * h).exp()))
            }
            _ => {
                let t = h.exp();
                if !t.is_finite() {
                    return Ok(0.0);
                }
                Ok((-self.alpha() * h).exp() * self.base.eval(t, 1.0)?)
            }
        }
    }

    pub fn variance(&self) -> Result<f64> {
        self.rho(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbm_examples() {
        assert_eq!(fbm_cov(0.5, 1.0, 2.0).unwrap(), 1.0);
        for h in [0.1, 0.3, 0.75, 0.99] {
            assert!((fbm_cov(h, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        let v = fbm_cov(0.75, 1.0, 3.0).unwrap();
        let oracle = 0.5 * (3f64.powf(1.5) + 1.0 - 2f64.powf(1.5));
        assert!((v - oracle).abs() < 1e-14);
        assert!(fbm_cov(1.0, 1.0, 1.0).is_err());
        assert!(fbm_cov(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn alpha_examples() {
        let p = SpdeParams::new(1, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(derive_alpha(&ProcessKind::SpdeTrace(p)).unwrap(), 0.25);
        assert_eq!(derive_alpha(&ProcessKind::FBm { hurst: 0.3 }).unwrap(), 0.3);
        let p = SpdeParams::new(2, 3.0, 1.5, 0.5).unwrap();
        assert_eq!(p.alpha(), 0.5);
        assert!(matches!(SpdeParams::new(1, 1.0, 1.0, 1.0), Err(Error::IllPosed { .. })));
        assert!(SpdeParams::new(2, 5.0, 2.0, 1.0).is_err());
        assert!(SpdeParams::new(1, 5.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn lamperti_examples() {
        let bm = LampertiKernel::new(CovarianceKernel::brownian()).unwrap();
        assert_eq!(bm.rho(0.0).unwrap(), 1.0);
        assert!((bm.rho(2.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let f = LampertiKernel::new(CovarianceKernel::fbm(0.75).unwrap()).unwrap();
        let e = 1f64.exp();
        let oracle = (-0.75f64).exp() * fbm_cov(0.75, e, 1.0).unwrap();
        assert!((f.rho(1.0).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn lamperti_fast_path_matches_generic_route() {
        for hurst in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let k = CovarianceKernel::fbm(hurst).unwrap();
            let l = LampertiKernel::new(k.clone()).unwrap();
            for h in [0.0, 1e-6, 0.01, 0.5, 3.0] {
                let direct = (-hurst * h).exp() * k.eval(h.exp(), 1.0).unwrap();
                let fast = l.rho(h).unwrap();
                assert!((fast - direct).abs() < 1e-12 * direct.abs().max(1e-3), "H={hurst} h={h}");
            }
            // The direct route cancels catastrophically for large lags; use
            // the leading terms of the binomial expansion instead.
            let h = 30.0;
            let series = 0.5 * (2.0 * hurst * ((hurst - 1.0) * h).exp() + (-hurst * h).exp());
            assert!((l.rho(h).unwrap() - series).abs() < 1e-10 * series, "H={hurst}");
            assert!(l.rho(800.0).unwrap().is_finite());
        }
    }

    #[test]
    fn slnd_constants() {
        let v = slnd_bound_constant(&ProcessSpec::brownian()).unwrap();
        assert!((v - 0.632_120_558_828_557_7).abs() < 1e-15);
        let v = slnd_bound_constant(&ProcessSpec::fbm(0.3).unwrap()).unwrap();
        assert!((v - (1.0 - (-1f64).exp()).powf(0.6)).abs() < 1e-15);
        let p = SpdeParams::new(1, 2.0, 1.0, 0.0).unwrap();
        let spec = ProcessSpec::spde(p).unwrap();
        assert!(matches!(slnd_bound_constant(&spec), Err(Error::SlndUnknown)));
        assert!(matches!(spec.with_slnd(1.0), Err(Error::SlndUnknown)));
    }

    #[test]
    fn zero_time_is_zero() {
        let k = CovarianceKernel::spde(SpdeParams::new(1, 2.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(k.eval(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(CovarianceKernel::brownian().eval(2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn custom_kernel_scaling_is_verified() {
        let bm_like: CovFn = Arc::new(|s: f64, t: f64| s.min(t));
        let spec = ProcessSpec::custom("min", 0.5).unwrap();
        assert!(CovarianceKernel::custom(spec, bm_like.clone(), 0.0).is_ok());
        let wrong = ProcessSpec::custom("min", 0.3).unwrap();
        assert!(CovarianceKernel::custom(wrong, bm_like, 0.0).is_err());
    }
}
