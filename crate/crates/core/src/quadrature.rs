//! Spectral integrals for the SPDE-trace process.
//!
//! Every quantity here is an isotropic, nonnegative integral over `R^d`,
//! so it reduces to a radial integral on `[0, ∞)` via the surface area of
//! the unit sphere. Two independent one-dimensional schemes are provided
//! (adaptive Gauss–Kronrod and a tanh-sinh double-exponential rule) so
//! callers can cross-check any value by switching `QuadratureConfig::scheme`.
//!
//! Fourier convention: `ĝ(ξ) = ∫ g(x) e^{-i x·ξ} dx`, with inverse carrying
//! `(2π)^{-d}`. Under it the Riesz kernel `|x|^{-β}` transforms to
//! `c(d,β) |ξ|^{β-d}`; [`planch_check`] validates the constant end to end.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::SpdeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    /// Choose the cutoff so the analytic tail bound is below `abs_tol / 10`
    /// and add closed-form power-law tails.
    AnalyticTail,
    /// Truncate at the given radius; the discarded tail is charged to the
    /// error estimate.
    HardCutoff(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Globally adaptive 21-point Gauss–Kronrod with interval bisection.
    Adaptive,
    /// Tanh-sinh (double exponential) rule refined by step halving.
    DoubleExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailPolicy,
    pub scheme: Scheme,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 4000,
            tail: TailPolicy::AnalyticTail,
            scheme: Scheme::Adaptive,
        }
    }
}

impl QuadratureConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidArgument("max_subdivisions must be positive".into()));
        }
        if let TailPolicy::HardCutoff(r) = self.tail {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument("hard cutoff radius must be positive".into()));
            }
        }
        Ok(())
    }

    fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// A quadrature result with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error: self.error * factor.abs(),
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
// Tables keep the published digits.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Estimate { value: result, error: err }
}

struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let first = gauss_kronrod_21(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, est: first });
    let mut total = first;
    loop {
        if !total.value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                achieved: f64::INFINITY,
                requested: cfg.abs_tol,
            });
        }
        let tol = cfg.tolerance_for(total.value);
        if total.error <= tol {
            return Ok(total);
        }
        if heap.len() >= cfg.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                achieved: total.error,
                requested: tol,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval exhausted at machine precision.
            return Err(Error::QuadratureNonConvergence {
                achieved: total.error,
                requested: tol,
            });
        }
        let left = gauss_kronrod_21(f, worst.a, mid);
        let right = gauss_kronrod_21(f, mid, worst.b);
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Segment { a: worst.a, b: mid, est: left });
        heap.push(Segment { a: mid, b: worst.b, est: right });
        // Recompute occasionally to shed accumulated rounding in the running sums.
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(Estimate::exact(0.0), |acc, s| acc + s.est);
        }
    }
}

fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    const MAX_LEVEL: u32 = 12;
    const T_MAX: f64 = 6.0;
    let half = 0.5 * (b - a);
    // Contribution of the node pair at ±t (t > 0), or None once the node
    // distance underflows.
    let pair = |t: f64| -> Option<f64> {
        let u = 0.5 * PI * t.sinh();
        let e = (-2.0 * u).exp();
        let delta = half * 2.0 * e / (1.0 + e);
        if delta <= f64::MIN_POSITIVE * 1e3 || !(a + delta > a || a == 0.0) {
            return None;
        }
        let w = half * 0.5 * PI * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let s = w * (f(a + delta) + f(b - delta));
        s.is_finite().then_some(s)
    };

    let h0 = 0.5;
    let centre = half * 0.5 * PI * f(0.5 * (a + b));
    let mut sum = centre;
    let mut t_max = T_MAX;
    let mut k = 1;
    loop {
        let t = k as f64 * h0;
        if t > T_MAX {
            break;
        }
        match pair(t) {
            Some(s) => {
                sum += s;
                if s.abs() < 1e-18 * sum.abs() && t > 2.0 {
                    t_max = t;
                    break;
                }
            }
            None => {
                t_max = t - h0;
                break;
            }
        }
        k += 1;
    }
    let mut integral = h0 * sum;
    let mut last_diff = f64::INFINITY;
    let mut h = h0;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut extra = 0.0;
        let mut k = 1usize;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            if let Some(s) = pair(t) {
                extra += s;
            }
            k += 2;
        }
        let next = 0.5 * integral + h * extra;
        let diff = (next - integral).abs();
        integral = next;
        if !integral.is_finite() {
            break;
        }
        let tol = cfg.tolerance_for(integral);
        if level >= 2 && diff <= tol && last_diff <= tol.sqrt().max(100.0 * tol) {
            return Ok(Estimate {
                value: integral,
                error: diff,
            });
        }
        last_diff = diff;
    }
    Err(Error::QuadratureNonConvergence {
        achieved: last_diff,
        requested: cfg.tolerance_for(integral),
    })
}

/// Integrates `f` over the finite interval `[a, b]` with the configured scheme.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a > b {
        return integrate(f, b, a, cfg).map(|e| e.scale(-1.0));
    }
    match cfg.scheme {
        Scheme::Adaptive => adaptive(&f, a, b, cfg),
        Scheme::DoubleExponential => tanh_sinh(&f, a, b, cfg),
    }
}

/// `∫_0^a f(r) dr` for `f(r) ~ r^p` near zero (`p > -1`), after the change of
/// variables `r = a·y^{1/(p+1)}` that flattens the endpoint behaviour.
pub fn integrate_power_endpoint<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    small_power: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if small_power <= -1.0 {
        return Err(Error::Divergent(format!(
            "integrand behaves like r^{small_power} at the origin"
        )));
    }
    let k = 1.0 / (small_power + 1.0);
    integrate(
        |y: f64| {
            let r = a * y.powf(k);
            f(r) * a * k * y.powf(k - 1.0)
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Description of a half-line integral `∫_0^∞ f(r) dr`.
///
/// Beyond any radius `R` the remaining mass is `tail_closed(R)` up to an
/// error of at most `tail_bound(R)`; both must decrease in `R`.
pub(crate) struct HalfLine<F, T, B> {
    pub f: F,
    pub small_power: f64,
    pub breakpoints: Vec<f64>,
    pub tail_closed: T,
    pub tail_bound: B,
}

impl<F, T, B> HalfLine<F, T, B>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    pub fn integrate(&self, cfg: &QuadratureConfig) -> Result<Estimate> {
        let mut points: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|p| p.is_finite() && *p > 0.0)
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        if points.is_empty() {
            points.push(1.0);
        }
        let last = *points.last().expect("non-empty");
        let (cutoff, tail) = match cfg.tail {
            TailPolicy::AnalyticTail => {
                let mut r = 2.0 * last;
                let mut doublings = 0;
                while (self.tail_bound)(r) > cfg.abs_tol / 10.0 {
                    r *= 2.0;
                    doublings += 1;
                    if doublings > 200 || !r.is_finite() {
                        return Err(Error::QuadratureNonConvergence {
                            achieved: (self.tail_bound)(r),
                            requested: cfg.abs_tol / 10.0,
                        });
                    }
                }
                (r, Estimate { value: (self.tail_closed)(r), error: (self.tail_bound)(r) })
            }
            TailPolicy::HardCutoff(r) => {
                let dropped = (self.tail_closed)(r).abs() + (self.tail_bound)(r);
                (r, Estimate { value: 0.0, error: dropped })
            }
        };
        points.retain(|p| *p < cutoff);
        points.push(cutoff);

        let mut total = integrate_power_endpoint(&self.f, points[0], self.small_power, cfg)?;
        for w in points.windows(2) {
            total = total + integrate(&self.f, w[0], w[1], cfg)?;
        }
        let total = total + tail;
        let tol = cfg.tolerance_for(total.value) * (points.len() as f64 + 1.0);
        if total.error > tol {
            return Err(Error::QuadratureNonConvergence {
                achieved: total.error,
                requested: tol,
            });
        }
        Ok(total)
    }
}

/// Surface area `2π^{d/2}/Γ(d/2)` of the unit sphere in `R^d`.
pub fn surface_area(d: u32) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Reduction of an isotropic integral over `R^d` to a radial one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialReduction {
    pub d: u32,
    pub surface_area: f64,
}

impl RadialReduction {
    pub fn new(d: u32) -> Self {
        Self {
            d,
            surface_area: surface_area(d),
        }
    }

    /// Weight `ω_d r^{d-1}` multiplying a radial profile.
    pub fn jacobian(&self, r: f64) -> f64 {
        self.surface_area * r.powi(self.d as i32 - 1)
    }
}

/// The Riesz constant `c(d,β) = 2^{d-β} π^{d/2} Γ((d-β)/2) / Γ(β/2)`.
pub fn riesz_constant(d: u32, beta: f64) -> Result<f64> {
    let df = d as f64;
    if d == 0 || !(beta > 0.0 && beta < df) {
        return Err(Error::Domain(format!(
            "Riesz constant needs 0 < beta < d, got d = {d}, beta = {beta}"
        )));
    }
    Ok(2f64.powf(df - beta) * PI.powf(df / 2.0) * gamma((df - beta) / 2.0) / gamma(beta / 2.0))
}

/// Spatial prefactor `c(d,β)/(2π)^d` of the Parseval-type identity.
///
/// For `β = d = 1` the spatial covariance is `δ_0` and the prefactor is the
/// plain Fourier-inversion factor `1/(2π)`.
pub fn spatial_prefactor(d: u32, beta: f64) -> Result<f64> {
    if d == 1 && beta == 1.0 {
        return Ok(1.0 / (2.0 * PI));
    }
    Ok(riesz_constant(d, beta)? / (2.0 * PI).powi(d as i32))
}

/// A centered isotropic Gaussian density on `R^d` with the given per-axis variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub variance: f64,
}

impl GaussianBump {
    pub fn unit() -> Self {
        Self { variance: 1.0 }
    }

    /// Fourier transform `exp(-σ²|ξ|²/2)`.
    pub fn fourier(&self, xi: f64) -> f64 {
        (-0.5 * self.variance * xi * xi).exp()
    }
}

/// Both sides of the Parseval-type identity and their relative discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanchReport {
    pub spatial_side: Estimate,
    pub spectral_side: Estimate,
    pub discrepancy: f64,
}

/// `∫_R^∞ r^p e^{-r²/(2s²)} dr`, bounded for `R² > p s²`.
fn gaussian_tail_bound(r: f64, power: f64, s: f64) -> f64 {
    let s2 = s * s;
    let denom = r - power.max(0.0) * s2 / r;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    r.powf(power) * (-r * r / (2.0 * s2)).exp() * s2 / denom
}

/// Evaluates both sides of
/// `∫∫ ψ(x)φ(y)|x-y|^{-β} dx dy = c(d,β)(2π)^{-d} ∫ ψ̂ φ̂ |ξ|^{β-d} dξ`
/// for Gaussian `ψ, φ` and returns `|LHS - RHS| / |LHS|`.
///
/// The left side uses that `X - Y` is Gaussian with the summed variance, so
/// it collapses to one radial integral of `|z|^{-β}` against that density.
pub fn planch_check(
    psi: GaussianBump,
    phi: GaussianBump,
    d: u32,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<PlanchReport> {
    cfg.validate()?;
    let c = riesz_constant(d, beta)?;
    if !(psi.variance > 0.0 && phi.variance > 0.0) {
        return Err(Error::Domain("Gaussian bump variances must be positive".into()));
    }
    let radial = RadialReduction::new(d);
    let df = d as f64;
    let s2 = psi.variance + phi.variance;
    let s = s2.sqrt();
    let density_norm = (2.0 * PI * s2).powf(-df / 2.0);

    let spatial_power = df - 1.0 - beta;
    let spatial = HalfLine {
        f: |r: f64| radial.surface_area * density_norm * r.powf(spatial_power) * (-r * r / (2.0 * s2)).exp(),
        small_power: spatial_power,
        breakpoints: vec![s, 4.0 * s],
        tail_closed: |_| 0.0,
        tail_bound: |r: f64| {
            radial.surface_area * density_norm * gaussian_tail_bound(r, spatial_power, s)
        },
    }
    .integrate(cfg)?;

    let prefactor = c / (2.0 * PI).powi(d as i32);
    let spectral_power = beta - 1.0;
    let inv_s = 1.0 / s;
    let spectral = HalfLine {
        f: |r: f64| {
            // ψ̂φ̂|ξ|^{β-d} times the radial Jacobian r^{d-1}.
            prefactor * psi.fourier(r) * phi.fourier(r) * r.powf(beta - df) * radial.jacobian(r)
        },
        small_power: spectral_power,
        breakpoints: vec![inv_s, 4.0 * inv_s],
        tail_closed: |_| 0.0,
        tail_bound: |r: f64| {
            prefactor * radial.surface_area * gaussian_tail_bound(r, spectral_power, inv_s)
        },
    }
    .integrate(cfg)?;

    let discrepancy = (spatial.value - spectral.value).abs() / spatial.value.abs();
    Ok(PlanchReport {
        spatial_side: spatial,
        spectral_side: spectral,
        discrepancy,
    })
}

/// Constant in front of the time integrals of the trace covariance:
/// `c(d,β)(2π)^{-d} · ω_d · Γ(β/γ)/γ`, from
/// `∫ e^{-u|ξ|^γ} |ξ|^{β-d} dξ = ω_d Γ(β/γ) / (γ u^{β/γ})`.
pub fn trace_time_constant(params: &SpdeParams) -> Result<f64> {
    let b = params.beta / params.gamma;
    Ok(spatial_prefactor(params.d, params.beta)? * surface_area(params.d) * gamma(b) / params.gamma)
}

/// `sign(x)|x|^{1-ν}/(1-ν)`, an antiderivative of `|x|^{-ν}`.
fn signed_power_primitive(x: f64, nu: f64) -> f64 {
    let e = 1.0 - nu;
    x.signum() * x.abs().powf(e) / e
}

/// `Cov[X(t+h), X(t)]` for the trace `X(t) = U(t,0)` of the fractional heat
/// equation.
///
/// For `ν = 1` the time integral `∫_0^t (2s+h)^{-β/γ} ds` is evaluated in
/// closed form. For `ν < 1` the double time integral
/// `∫_0^{t+h}∫_0^t |h+v-u|^{-ν}(u+v)^{-β/γ} dv du` is rotated to
/// `σ = u+v, δ = u-v-h`; the `|δ|^{-ν}` singularity is then integrated
/// exactly, leaving a one-dimensional integral in `σ` whose kinks at
/// `σ ∈ {h, t, t+h}` are used as breakpoints.
pub fn spde_trace_cov(params: &SpdeParams, t: f64, h: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    if !(t >= 0.0 && h >= 0.0) || !(t.is_finite() && h.is_finite()) {
        return Err(Error::Domain(format!("need t, h >= 0, got t = {t}, h = {h}")));
    }
    if t == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let constant = trace_time_constant(params)?;
    let b = params.beta / params.gamma;
    let nu = params.nu;

    if nu == 1.0 {
        // (2t+h)^{1-b} - h^{1-b}, written to survive h >> t.
        let e = 1.0 - b;
        let integral = if h == 0.0 {
            (2.0 * t).powf(e) / (2.0 * e)
        } else {
            h.powf(e) * (e * (2.0 * t / h).ln_1p()).exp_m1() / (2.0 * e)
        };
        return Ok(Estimate::exact(constant * integral));
    }

    let upper = 2.0 * t + h;
    let profile = |sigma: f64| -> f64 {
        let hi = (sigma - h).min(upper - sigma);
        let lo = (sigma - h - 2.0 * t).max(-sigma - h);
        let width = signed_power_primitive(hi, nu) - signed_power_primitive(lo, nu);
        0.5 * sigma.powf(-b) * width.max(0.0)
    };
    let mut points: Vec<f64> = [h, t, t + h]
        .into_iter()
        .filter(|p| *p > 0.0 && *p < upper)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.push(upper);
    let small_power = if h > 0.0 { 1.0 - b } else { 1.0 - nu - b };
    let mut total = integrate_power_endpoint(profile, points[0], small_power, cfg)?;
    for w in points.windows(2) {
        total = total + integrate(profile, w[0], w[1], cfg)?;
    }
    Ok(total.scale(constant))
}

fn check_smooth_part_params(d: u32, gamma_: f64, beta: f64) -> Result<()> {
    if d == 0 || !(gamma_ > 0.0) {
        return Err(Error::Domain(format!("need d >= 1 and gamma > 0, got d = {d}, gamma = {gamma_}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Divergent(format!("beta = {beta} <= 0: integral blows up at 0")));
    }
    if beta >= gamma_ {
        return Err(Error::Divergent(format!(
            "beta = {beta} >= gamma = {gamma_}: integral blows up at infinity"
        )));
    }
    let df = d as f64;
    if beta > df || (beta == df && d != 1) {
        return Err(Error::Domain(format!("need 0 < beta < d or beta = d = 1, got d = {d}, beta = {beta}")));
    }
    Ok(())
}

/// Tail bound `M e^{-κR^γ} R^{β-γ}/(γ-β)` for integrands
/// `|A(r) - A_∞| r^{β-γ-1}` with `|A(r) - A_∞| ≤ M e^{-κ r^γ}`.
fn exp_power_tail(r: f64, m: f64, kappa: f64, gamma_: f64, beta: f64) -> f64 {
    m * (-kappa * r.powf(gamma_)).exp() * r.powf(beta - gamma_) / (gamma_ - beta)
}

/// The normalising constant `K₀` that turns `X + S` into a fractional
/// Brownian motion when the noise is white in time.
pub fn k0_constant(d: u32, gamma_: f64, beta: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    check_smooth_part_params(d, gamma_, beta)?;
    let prefactor = 0.5 * spatial_prefactor(d, beta)? * surface_area(d);
    let power = beta - gamma_ - 1.0;
    let squared = HalfLine {
        f: |r: f64| {
            let x = r.powf(gamma_);
            let one = -(-x).exp_m1();
            let two = -(-2.0 * x).exp_m1();
            (one * one + two) * r.powf(power)
        },
        // bracket ~ 3 r^γ near the origin
        small_power: beta - 1.0,
        breakpoints: vec![1.0],
        // bracket -> 2 with deviation exactly -2 e^{-r^γ}
        tail_closed: |r: f64| 2.0 * r.powf(beta - gamma_) / (gamma_ - beta),
        tail_bound: |r: f64| exp_power_tail(r, 2.0, 1.0, gamma_, beta),
    }
    .integrate(cfg)?
    .scale(prefactor);
    let value = squared.value.sqrt();
    Ok(Estimate {
        value,
        error: squared.error / (2.0 * value),
    })
}

/// `E|S(t+h) - S(t)|²` for the smooth spectral process `S`; at `t = 0` this
/// is `Var S(h)`.
pub fn s_process_var(d: u32, gamma_: f64, beta: f64, t: f64, h: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    check_smooth_part_params(d, gamma_, beta)?;
    if !(t >= 0.0 && h >= 0.0) {
        return Err(Error::Domain(format!("need t, h >= 0, got t = {t}, h = {h}")));
    }
    if h == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let prefactor = 0.5 * spatial_prefactor(d, beta)? * surface_area(d);
    let power = beta - gamma_ - 1.0;
    let f = |r: f64| {
        let x = r.powf(gamma_);
        let inc = -(-h * x).exp_m1();
        (-2.0 * t * x).exp() * inc * inc * r.powf(power)
    };
    let mut breakpoints = vec![h.powf(-1.0 / gamma_)];
    if t > 0.0 {
        breakpoints.push((2.0 * t).powf(-1.0 / gamma_));
    }
    let small_power = beta + gamma_ - 1.0;
    let est = if t > 0.0 {
        HalfLine {
            f,
            small_power,
            breakpoints,
            tail_closed: |_| 0.0,
            tail_bound: |r: f64| exp_power_tail(r, 1.0, 2.0 * t, gamma_, beta),
        }
        .integrate(cfg)?
    } else {
        HalfLine {
            f,
            small_power,
            breakpoints,
            // (1 - e^{-hx})² -> 1, deviation bounded by 2 e^{-h r^γ}
            tail_closed: |r: f64| r.powf(beta - gamma_) / (gamma_ - beta),
            tail_bound: |r: f64| exp_power_tail(r, 2.0, h, gamma_, beta),
        }
        .integrate(cfg)?
    };
    Ok(est.scale(prefactor))
}

/// Increment variance `E|X(t+h) - X(t)|²` of the trace process.
pub fn spde_increment_var(params: &SpdeParams, t: f64, h: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let a = spde_trace_cov(params, t + h, 0.0, cfg)?;
    let b = spde_trace_cov(params, t, 0.0, cfg)?;
    let c = spde_trace_cov(params, t, h, cfg)?;
    Ok(Estimate {
        value: a.value + b.value - 2.0 * c.value,
        error: a.error + b.error + 2.0 * c.error,
    })
}

/// Empirical constant in `E|X(t+h) - X(t)|² ≤ K h^{2α}`: the largest ratio
/// over the supplied `(t, h)` grid.
pub fn increment_bound_constant(
    params: &SpdeParams,
    grid: &[(f64, f64)],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let two_alpha = 2.0 * params.alpha();
    let mut k: f64 = 0.0;
    for &(t, h) in grid {
        if h <= 0.0 {
            continue;
        }
        let inc = spde_increment_var(params, t, h, cfg)?;
        k = k.max(inc.value / h.powf(two_alpha));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn kronrod_rule_is_exact_for_high_degree_polynomials() {
        // 21-point Kronrod integrates degree 31 exactly; 10-point Gauss degree 19.
        for deg in [0, 5, 19, 31] {
            let est = gauss_kronrod_21(&|x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((est.value - exact).abs() < 1e-14, "degree {deg}: {}", est.value);
        }
        let g = |x: f64| x.powi(19);
        let centre = 0.5;
        let half = 0.5;
        let mut res_g = 0.0;
        for j in 0..5 {
            let dx = half * XGK[2 * j + 1];
            res_g += WG[j] * (g(centre - dx) + g(centre + dx));
        }
        assert!((res_g * half - 0.05).abs() < 1e-14);
    }

    #[test]
    fn both_schemes_handle_smooth_and_singular_integrands() {
        for scheme in [Scheme::Adaptive, Scheme::DoubleExponential] {
            let c = cfg().with_scheme(scheme);
            let e = integrate(|x: f64| x.exp(), 0.0, 1.0, &c).unwrap();
            assert!((e.value - (1f64.exp() - 1.0)).abs() < 1e-12);
            let s = integrate_power_endpoint(|x: f64| x.powf(-0.7), 1.0, -0.7, &c).unwrap();
            assert!((s.value - 1.0 / 0.3).abs() < 1e-9, "{scheme:?}: {}", s.value);
        }
    }

    #[test]
    fn surface_areas() {
        assert!((surface_area(1) - 2.0).abs() < 1e-14);
        assert!((surface_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((surface_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn riesz_constant_examples() {
        let c = riesz_constant(1, 0.5).unwrap();
        assert!((c - (2.0 * PI).sqrt()).abs() < 1e-13);
        let c = riesz_constant(3, 2.0).unwrap();
        assert!((c - 2.0 * PI * PI).abs() < 1e-12);
        assert!(riesz_constant(1, 1.0).is_err());
        assert!(riesz_constant(2, 0.0).is_err());
        // Growing without bound as beta -> d from below.
        assert!(riesz_constant(1, 1.0 - 1e-8).unwrap() > 1e7);
    }

    #[test]
    fn planch_discrepancy_is_small_and_sides_positive() {
        for (d, beta) in [(1, 0.5), (2, 1.0), (3, 2.4)] {
            let rep = planch_check(GaussianBump::unit(), GaussianBump::unit(), d, beta, &cfg()).unwrap();
            assert!(rep.discrepancy < 1e-6, "d={d} beta={beta}: {rep:?}");
            assert!(rep.spatial_side.value > 0.0 && rep.spectral_side.value > 0.0);
        }
        let rep = planch_check(
            GaussianBump { variance: 0.3 },
            GaussianBump { variance: 2.0 },
            2,
            0.7,
            &cfg(),
        )
        .unwrap();
        assert!(rep.discrepancy < 1e-6);
    }

    #[test]
    fn planch_detects_a_wrong_convention() {
        // Spatial side against the closed form E|Z|^{-β} s^{-β}; a missing
        // (2π)^d would show up as a constant factor on the spectral side.
        let d = 2;
        let beta = 1.0;
        let rep = planch_check(GaussianBump::unit(), GaussianBump::unit(), d, beta, &cfg()).unwrap();
        let s = 2f64.sqrt();
        let closed = s.powf(-beta) * 2f64.powf(-beta / 2.0) * gamma((d as f64 - beta) / 2.0) / gamma(d as f64 / 2.0);
        assert!((rep.spatial_side.value - closed).abs() < 1e-9 * closed);
        assert!((rep.spectral_side.value * (2.0 * PI).powi(2) / rep.spatial_side.value - (2.0 * PI).powi(2)).abs() < 1e-5);
    }

    #[test]
    fn nu_one_trace_cov_examples() {
        let p = SpdeParams::new(1, 2.0, 1.0, 1.0).unwrap();
        let l2 = trace_time_constant(&p).unwrap();
        assert!((l2 - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-14);
        let v = spde_trace_cov(&p, 1.0, 0.0, &cfg()).unwrap();
        assert!((v.value - l2 * 2f64.sqrt()).abs() < 1e-14);
        // Oracle: adaptive quadrature of the time integral.
        for (t, h) in [(1.0, 0.0), (0.7, 0.3), (2.0, 5.0), (1e-3, 10.0)] {
            let quad = integrate_power_endpoint(
                |s: f64| (2.0 * s + h).powf(-0.5),
                t,
                if h == 0.0 { -0.5 } else { 0.0 },
                &cfg(),
            )
            .unwrap();
            let v = spde_trace_cov(&p, t, h, &cfg()).unwrap();
            assert!((v.value - l2 * quad.value).abs() < 1e-10 * v.value.abs(), "t={t} h={h}");
        }
        assert_eq!(spde_trace_cov(&p, 0.0, 1.0, &cfg()).unwrap().value, 0.0);
        assert!(spde_trace_cov(&p, 1e-12, 1.0, &cfg()).unwrap().value < 1e-11);
    }

    /// Direct nested quadrature of the double time integral, splitting the
    /// inner integral at the singular line `v = u - h`.
    fn nested_time_integral(t: f64, h: f64, nu: f64, b: f64) -> f64 {
        let c = QuadratureConfig {
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            ..cfg()
        };
        let inner = |u: f64| -> f64 {
            let g = |v: f64| (h + v - u).abs().powf(-nu) * (u + v).powf(-b);
            let s = u - h;
            let mut total = 0.0;
            if s > 0.0 && s < t {
                total += integrate(|y: f64| g(s - y), 0.0, s, &c.with_scheme(Scheme::DoubleExponential)).unwrap().value;
                total += integrate(|y: f64| g(s + y), 0.0, t - s, &c.with_scheme(Scheme::DoubleExponential)).unwrap().value;
            } else {
                total += integrate(g, 0.0, t, &c.with_scheme(Scheme::DoubleExponential)).unwrap().value;
            }
            total
        };
        // For h = 0 the inner integral grows like log(1/u); the neglected
        // piece below 1e-14 is far under the comparison tolerance.
        let mut pts = vec![1e-14, h.max(1e-14), t + h];
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.windows(2)
            .map(|w| integrate(inner, w[0], w[1], &c.with_scheme(Scheme::DoubleExponential)).unwrap().value)
            .sum()
    }

    #[test]
    fn rotated_time_integral_matches_nested_oracle() {
        let p = SpdeParams::new(1, 2.0, 1.0, 0.5).unwrap();
        let l1 = trace_time_constant(&p).unwrap();
        for (t, h) in [(1.0, 0.5), (0.5, 2.0), (1.0, 0.0)] {
            let v = spde_trace_cov(&p, t, h, &cfg()).unwrap().value / l1;
            let oracle = nested_time_integral(t, h, 0.5, 0.5);
            assert!((v - oracle).abs() < 1e-6 * oracle, "t={t} h={h}: {v} vs {oracle}");
        }
    }

    #[test]
    fn trace_cov_scaling_for_nu_below_one() {
        for (d, g, b, nu) in [(1, 2.0, 1.0, 0.0), (2, 3.0, 1.5, 0.5), (1, 1.5, 0.4, 0.3)] {
            let p = SpdeParams::new(d, g, b, nu).unwrap();
            let two_alpha = 2.0 * p.alpha();
            for (t, h) in [(1.0, 0.0), (0.5, 0.25), (1.0, 2.0)] {
                let small = spde_trace_cov(&p, t, h, &cfg()).unwrap().value;
                let big = spde_trace_cov(&p, 4.0 * t, 4.0 * h, &cfg()).unwrap().value;
                assert!((big - 4f64.powf(two_alpha) * small).abs() < 1e-7 * big.abs(), "{p:?} t={t} h={h}");
            }
        }
    }

    #[test]
    fn two_schemes_agree_on_every_quadrature_op() {
        let a = cfg();
        let b = cfg().with_scheme(Scheme::DoubleExponential);
        let tol = 10.0 * a.rel_tol;
        let k_a = k0_constant(1, 2.0, 1.0, &a).unwrap();
        let k_b = k0_constant(1, 2.0, 1.0, &b).unwrap();
        assert!((k_a.value - k_b.value).abs() < tol * k_a.value);
        let k_a = k0_constant(2, 1.5, 0.6, &a).unwrap();
        let k_b = k0_constant(2, 1.5, 0.6, &b).unwrap();
        assert!((k_a.value - k_b.value).abs() < tol * k_a.value);
        for (t, h) in [(0.0, 1.0), (1.0, 0.5), (3.0, 0.1)] {
            let s_a = s_process_var(1, 2.0, 1.0, t, h, &a).unwrap();
            let s_b = s_process_var(1, 2.0, 1.0, t, h, &b).unwrap();
            assert!((s_a.value - s_b.value).abs() < tol * s_a.value, "t={t} h={h}");
            assert!(s_a.error <= a.tolerance_for(s_a.value) * 8.0);
        }
        let p = SpdeParams::new(1, 2.0, 1.0, 0.5).unwrap();
        let c_a = spde_trace_cov(&p, 1.0, 0.5, &a).unwrap();
        let c_b = spde_trace_cov(&p, 1.0, 0.5, &b).unwrap();
        assert!((c_a.value - c_b.value).abs() < tol * c_a.value);
    }

    #[test]
    fn k0_matches_gamma_closed_form() {
        // (1-e^{-x})² + (1-e^{-2x}) = 2(1-e^{-x}), whose Mellin transform
        // against x^{b-2} is Γ(b)/(1-b); independent of the radial quadrature.
        for (d, g, b) in [(1u32, 2.0, 1.0), (1, 2.0, 0.5), (2, 1.5, 0.6), (3, 2.5, 2.0)] {
            let p = SpdeParams::new(d, g, b, 1.0).unwrap();
            let closed = (trace_time_constant(&p).unwrap() / (1.0 - b / g)).sqrt();
            let k0 = k0_constant(d, g, b, &cfg()).unwrap();
            assert!((k0.value - closed).abs() < 1e-9 * closed, "d={d} g={g} b={b}: {} vs {closed}", k0.value);
        }
    }

    #[test]
    fn k0_divergence_flags() {
        assert!(matches!(k0_constant(1, 1.0, 1.0, &cfg()), Err(Error::Divergent(_))));
        assert!(matches!(k0_constant(2, 1.0, 0.0, &cfg()), Err(Error::Divergent(_))));
        assert!(matches!(s_process_var(2, 1.0, 1.5, 1.0, 1.0, &cfg()), Err(Error::Divergent(_))));
    }

    #[test]
    fn s_process_variance_scaling_and_zero_lag() {
        assert_eq!(s_process_var(1, 2.0, 1.0, 1.0, 0.0, &cfg()).unwrap().value, 0.0);
        let two_alpha = 1.0 - 0.5;
        let base = s_process_var(1, 2.0, 1.0, 0.0, 1.0, &cfg()).unwrap().value;
        for t in [2.0, 4.0] {
            let v = s_process_var(1, 2.0, 1.0, 0.0, t, &cfg()).unwrap().value;
            assert!((v / t.powf(two_alpha) - base).abs() < 1e-9 * base);
        }
    }

    #[test]
    fn s_process_increments_are_holder() {
        // sup_{t >= h} E|S(t+h)-S(t)|² / h^{2α} stays bounded on a grid.
        let two_alpha = 0.5;
        let mut worst: f64 = 0.0;
        for h in [1e-3, 1e-2, 0.1, 1.0] {
            for mult in [1.0, 3.0, 10.0] {
                let v = s_process_var(1, 2.0, 1.0, mult * h, h, &cfg()).unwrap().value;
                worst = worst.max(v / h.powf(two_alpha));
            }
        }
        let k0 = k0_constant(1, 2.0, 1.0, &cfg()).unwrap().value;
        assert!(worst.is_finite() && worst <= k0 * k0);
    }

    #[test]
    fn hard_cutoff_charges_the_tail() {
        let mut c = cfg();
        c.tail = TailPolicy::HardCutoff(3.0);
        assert!(matches!(k0_constant(1, 2.0, 1.0, &c), Err(Error::QuadratureNonConvergence { .. })));
        c.tail = TailPolicy::HardCutoff(1e12);
        c.rel_tol = 1e-4;
        assert!(k0_constant(1, 2.0, 1.0, &c).is_ok());
    }
}
