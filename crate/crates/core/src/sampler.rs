//! Exact Gaussian path samplers and sampling schedules.
//!
//! Stationary sequences are drawn by circulant embedding. When the
//! embedding has more negative eigenvalue mass than the clipping threshold
//! at every tried padding, the sampler falls back to a Cholesky factor of
//! the Toeplitz covariance. Arbitrary grids use a Cholesky factor of the
//! Gram matrix, computed once and reused for every path.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, LampertiKernel};
use crate::rng::{fill_normals, SeedLineage};

/// Largest time a schedule will materialise.
pub const TIME_CAP: f64 = 1e300;

/// Default ceiling on clipped negative eigenvalue mass relative to the trace.
pub const DEFAULT_CLIP_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScheduleFamily {
    /// `t_n = n`.
    Arithmetic,
    /// `t_n = e^n`.
    Geometric,
    /// `t_n = exp(n^q)`.
    PowerExp { q: f64 },
    /// `t_n = exp(|log n|^q)`, `q > 1`.
    LogPower { q: f64 },
}

impl ScheduleFamily {
    fn log_time(&self, n: usize) -> f64 {
        let x = n as f64;
        match *self {
            ScheduleFamily::Arithmetic => x.ln(),
            ScheduleFamily::Geometric => x,
            ScheduleFamily::PowerExp { q } => x.powf(q),
            ScheduleFamily::LogPower { q } => x.ln().abs().powf(q),
        }
    }
}

/// Whether sampling on a schedule recovers the continuous-time exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    ProvedEquivalent,
    UpperBoundOnly,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub family: ScheduleFamily,
    pub n_max: usize,
    pub times: Vec<f64>,
    pub log_times: Vec<f64>,
    pub validity: Validity,
    /// Set when points beyond [`TIME_CAP`] were dropped.
    pub truncated: bool,
    /// `t_j / (t_{j+1} - t_j)` for consecutive points.
    pub ratios: Vec<f64>,
}

/// Materialises `t_1 < … < t_{n_max}` and classifies the family for index `alpha`.
pub fn make_schedule(family: ScheduleFamily, alpha: f64, n_max: usize) -> Result<Schedule> {
    if n_max < 2 {
        return Err(Error::InvalidArgument(format!("a schedule needs n_max >= 2, got {n_max}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let validity = match family {
        ScheduleFamily::Arithmetic => Validity::ProvedEquivalent,
        ScheduleFamily::Geometric => Validity::Unknown,
        ScheduleFamily::PowerExp { q } => {
            if !(q > 0.0) {
                return Err(Error::InvalidArgument(format!("PowerExp needs q > 0, got {q}")));
            }
            if q < 2.0 * alpha / (1.0 + 2.0 * alpha) {
                Validity::ProvedEquivalent
            } else {
                Validity::UpperBoundOnly
            }
        }
        ScheduleFamily::LogPower { q } => {
            if !(q > 1.0) {
                return Err(Error::InvalidArgument(format!("LogPower needs q > 1, got {q}")));
            }
            Validity::ProvedEquivalent
        }
    };
    let log_cap = TIME_CAP.ln();
    let mut log_times = Vec::with_capacity(n_max);
    let mut truncated = false;
    for n in 1..=n_max {
        let l = family.log_time(n);
        if l > log_cap {
            truncated = true;
            break;
        }
        log_times.push(l);
    }
    if log_times.len() < 2 {
        return Err(Error::InvalidArgument("schedule overflows before its second point".into()));
    }
    let times: Vec<f64> = log_times.iter().map(|l| l.exp()).collect();
    let ratios = log_times.windows(2).map(|w| 1.0 / (w[1] - w[0]).exp_m1()).collect();
    Ok(Schedule {
        family,
        n_max,
        times,
        log_times,
        validity,
        truncated,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// Original time.
    X,
    /// Log time, after the Lamperti transform.
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub frame: Frame,
    pub lineage: SeedLineage,
}

impl PathSample {
    /// Maps a log-time path to original time: `X(e^u) = e^{αu} Y(u)`.
    pub fn to_x_frame(&self, alpha: f64) -> PathSample {
        match self.frame {
            Frame::X => self.clone(),
            Frame::Y => PathSample {
                grid: self.grid.iter().map(|u| u.exp()).collect(),
                values: self
                    .grid
                    .iter()
                    .zip(&self.values)
                    .map(|(u, y)| (alpha * u).exp() * y)
                    .collect(),
                frame: Frame::X,
                lineage: self.lineage,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMethod {
    Circulant,
    ToeplitzCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub method: EmbeddingMethod,
    pub min_eigenvalue: f64,
    pub clipped_mass: f64,
    /// Circulant length, or the Toeplitz dimension on fallback.
    pub size: usize,
    /// Diagonal jitter added by the Cholesky fallback.
    pub jitter: f64,
}

/// Cholesky factor of `m`, adding diagonal jitter from `1e-12` up to
/// `1e-8` times the largest diagonal entry when needed.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok((ch.l(), 0.0));
    }
    let max_diag = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut rel = 1e-12;
    while rel <= 1e-8 * (1.0 + 1e-9) {
        let jitter = rel * max_diag;
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = shifted.cholesky() {
            return Ok((ch.l(), jitter));
        }
        rel *= 10.0;
    }
    Err(Error::NonPsd {
        jitter: 1e-8 * max_diag,
    })
}

#[derive(Clone)]
enum StationaryInner {
    Single(f64),
    Circulant {
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky(DMatrix<f64>),
}

/// Sampler for a stationary Gaussian sequence `(Y_0, …, Y_{n-1})` with
/// autocovariance `r(k)`.
#[derive(Clone)]
pub struct StationarySampler {
    n: usize,
    inner: StationaryInner,
    report: EmbeddingReport,
}

impl std::fmt::Debug for StationarySampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationarySampler")
            .field("n", &self.n)
            .field("report", &self.report)
            .finish()
    }
}

impl StationarySampler {
    pub fn new<F>(acov: F, n: usize, clip_threshold: f64) -> Result<Self>
    where
        F: Fn(usize) -> Result<f64>,
    {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one grid point".into()));
        }
        let r0 = acov(0)?;
        if !(r0 > 0.0) {
            return Err(Error::Domain(format!("stationary variance must be positive, got {r0}")));
        }
        if n == 1 {
            return Ok(Self {
                n,
                inner: StationaryInner::Single(r0.sqrt()),
                report: EmbeddingReport {
                    method: EmbeddingMethod::Circulant,
                    min_eigenvalue: r0,
                    clipped_mass: 0.0,
                    size: 1,
                    jitter: 0.0,
                },
            });
        }
        let base = 2 * (n - 1);
        let mut lags: Vec<f64> = vec![r0];
        let mut planner = FftPlanner::new();
        let mut last_report = None;
        for pad in [1usize, 2, 4] {
            let m = base.checked_mul(pad).ok_or(Error::FftOverflow { points: n })?;
            if m > (1usize << 31) {
                return Err(Error::FftOverflow { points: n });
            }
            let half = m / 2;
            while lags.len() <= half {
                lags.push(acov(lags.len())?);
            }
            let mut row: Vec<Complex<f64>> = (0..m)
                .map(|k| Complex::new(lags[if k <= half { k } else { m - k }], 0.0))
                .collect();
            let fft = planner.plan_fft_forward(m);
            fft.process(&mut row);
            let eig: Vec<f64> = row.iter().map(|c| c.re).collect();
            let trace: f64 = eig.iter().sum();
            let negative: f64 = eig.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
            let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let clipped_mass = negative / trace;
            let report = EmbeddingReport {
                method: EmbeddingMethod::Circulant,
                min_eigenvalue,
                clipped_mass,
                size: m,
                jitter: 0.0,
            };
            if clipped_mass <= clip_threshold {
                let scale = eig.iter().map(|v| (v.max(0.0) / m as f64).sqrt()).collect();
                return Ok(Self {
                    n,
                    inner: StationaryInner::Circulant { scale, fft },
                    report,
                });
            }
            last_report = Some(report);
        }
        let toeplitz = DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]);
        let (lower, jitter) = cholesky_with_jitter(&toeplitz)?;
        let prev = last_report.expect("at least one padding attempted");
        Ok(Self {
            n,
            inner: StationaryInner::Cholesky(lower),
            report: EmbeddingReport {
                method: EmbeddingMethod::ToeplitzCholesky,
                min_eigenvalue: prev.min_eigenvalue,
                clipped_mass: prev.clipped_mass,
                size: n,
                jitter,
            },
        })
    }

    /// Sampler for the Lamperti process on the grid `u_i = i·step`.
    pub fn from_lamperti(rho: &LampertiKernel, step: f64, n_points: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {step}")));
        }
        Self::new(|k| rho.rho(k as f64 * step), n_points, DEFAULT_CLIP_THRESHOLD)
    }

    /// Forces the Toeplitz Cholesky route, for cross-checking the embedding.
    pub fn cholesky_only<F>(acov: F, n: usize) -> Result<Self>
    where
        F: Fn(usize) -> Result<f64>,
    {
        let lags = (0..n).map(&acov).collect::<Result<Vec<f64>>>()?;
        let toeplitz = DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]);
        let (lower, jitter) = cholesky_with_jitter(&toeplitz)?;
        Ok(Self {
            n,
            inner: StationaryInner::Cholesky(lower),
            report: EmbeddingReport {
                method: EmbeddingMethod::ToeplitzCholesky,
                min_eigenvalue: f64::NAN,
                clipped_mass: 0.0,
                size: n,
                jitter,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn report(&self) -> &EmbeddingReport {
        &self.report
    }

    pub fn workspace(&self) -> StationaryWorkspace {
        let m = match &self.inner {
            StationaryInner::Circulant { scale, .. } => scale.len(),
            StationaryInner::Cholesky(_) => self.n,
            StationaryInner::Single(_) => 1,
        };
        StationaryWorkspace {
            buffer: vec![Complex::new(0.0, 0.0); m],
            normals: vec![0.0; 2 * m],
        }
    }

    /// Draws one sequence into `out` (length `len()`).
    pub fn sample_into(&self, rng: &mut ChaCha8Rng, ws: &mut StationaryWorkspace, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        match &self.inner {
            StationaryInner::Single(sd) => {
                fill_normals(rng, &mut ws.normals[..1]);
                out[0] = sd * ws.normals[0];
            }
            StationaryInner::Circulant { scale, fft } => {
                let m = scale.len();
                fill_normals(rng, &mut ws.normals[..2 * m]);
                for ((b, s), z) in ws.buffer.iter_mut().zip(scale).zip(ws.normals.chunks_exact(2)) {
                    *b = Complex::new(s * z[0], s * z[1]);
                }
                fft.process(&mut ws.buffer);
                for (o, c) in out.iter_mut().zip(&ws.buffer) {
                    *o = c.re;
                }
            }
            StationaryInner::Cholesky(l) => {
                let n = self.n;
                fill_normals(rng, &mut ws.normals[..n]);
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * ws.normals[j];
                    }
                    out[i] = acc;
                }
            }
        }
    }

    pub fn sample(&self, lineage: SeedLineage) -> Vec<f64> {
        let mut ws = self.workspace();
        let mut out = vec![0.0; self.n];
        self.sample_into(&mut lineage.rng(), &mut ws, &mut out);
        out
    }
}

/// Reusable buffers for [`StationarySampler::sample_into`].
pub struct StationaryWorkspace {
    buffer: Vec<Complex<f64>>,
    normals: Vec<f64>,
}

/// One Lamperti-frame path on `u_i = i·step`, `i < n_points`.
pub fn sample_stationary(
    rho: &LampertiKernel,
    step: f64,
    n_points: usize,
    lineage: SeedLineage,
) -> Result<(PathSample, EmbeddingReport)> {
    let sampler = StationarySampler::from_lamperti(rho, step, n_points)?;
    let values = sampler.sample(lineage);
    let grid = (0..n_points).map(|i| i as f64 * step).collect();
    Ok((
        PathSample {
            grid,
            values,
            frame: Frame::Y,
            lineage,
        },
        *sampler.report(),
    ))
}

/// Joint Gaussian sampler on a fixed time grid via a cached Cholesky factor.
/// Points at time zero are pinned to zero.
#[derive(Debug, Clone)]
pub struct GaussianVectorSampler {
    grid: Vec<f64>,
    positive: Vec<usize>,
    lower: DMatrix<f64>,
    jitter: f64,
}

impl GaussianVectorSampler {
    pub fn new(kernel: &CovarianceKernel, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let positive: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] > 0.0).collect();
        let times: Vec<f64> = positive.iter().map(|&i| grid[i]).collect();
        let gram = kernel.gram(&times)?;
        let (lower, jitter) = cholesky_with_jitter(&gram)?;
        Ok(Self {
            grid: grid.to_vec(),
            positive,
            lower,
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample_values(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = self.positive.len();
        let mut z = vec![0.0; k];
        fill_normals(rng, &mut z);
        let x = &self.lower * DVector::from_vec(z);
        let mut values = vec![0.0; self.grid.len()];
        for (slot, &i) in self.positive.iter().enumerate() {
            values[i] = x[slot];
        }
        values
    }

    pub fn sample(&self, lineage: SeedLineage) -> PathSample {
        PathSample {
            grid: self.grid.clone(),
            values: self.sample_values(&mut lineage.rng()),
            frame: Frame::X,
            lineage,
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if !(grid[0] >= 0.0) {
        return Err(Error::Domain(format!("grid must start at a nonnegative time, got {}", grid[0])));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Fractional Gaussian noise autocovariance at unit spacing.
fn fgn_acov(hurst: f64, k: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

#[derive(Debug, Clone)]
enum FbmRoute {
    /// Circulant fGn then cumulative sums; `leading_zero` when the grid starts at 0.
    Increments {
        noise: StationarySampler,
        scale: f64,
        leading_zero: bool,
    },
    Dense(GaussianVectorSampler),
}

/// Fractional Brownian motion sampler on a fixed grid.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: Vec<f64>,
    route: FbmRoute,
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: &[f64]) -> Result<Self> {
        let kernel = CovarianceKernel::fbm(hurst)?;
        check_grid(grid)?;
        let route = match uniform_spacing(grid) {
            Some((spacing, leading_zero)) => {
                let increments = if leading_zero { grid.len() - 1 } else { grid.len() };
                if increments == 0 {
                    FbmRoute::Dense(GaussianVectorSampler::new(&kernel, grid)?)
                } else {
                    FbmRoute::Increments {
                        noise: StationarySampler::new(|k| Ok(fgn_acov(hurst, k)), increments, DEFAULT_CLIP_THRESHOLD)?,
                        scale: spacing.powf(hurst),
                        leading_zero,
                    }
                }
            }
            None => FbmRoute::Dense(GaussianVectorSampler::new(&kernel, grid)?),
        };
        Ok(Self {
            grid: grid.to_vec(),
            route,
        })
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.route, FbmRoute::Increments { .. })
    }

    pub fn sample(&self, lineage: SeedLineage) -> PathSample {
        let values = match &self.route {
            FbmRoute::Dense(g) => g.sample_values(&mut lineage.rng()),
            FbmRoute::Increments {
                noise,
                scale,
                leading_zero,
            } => {
                let inc = noise.sample(lineage);
                let mut values = Vec::with_capacity(self.grid.len());
                if *leading_zero {
                    values.push(0.0);
                }
                let mut acc = 0.0;
                for v in inc {
                    acc += scale * v;
                    values.push(acc);
                }
                values
            }
        };
        PathSample {
            grid: self.grid.clone(),
            values,
            frame: Frame::X,
            lineage,
        }
    }
}

/// `Some((spacing, starts_at_zero))` when the grid is `{0 or Δ}, +Δ, …`.
fn uniform_spacing(grid: &[f64]) -> Option<(f64, bool)> {
    if grid.len() < 2 {
        return None;
    }
    let spacing = grid[1] - grid[0];
    let tol = 1e-9 * spacing;
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - spacing).abs() <= tol);
    if !uniform {
        return None;
    }
    if grid[0] == 0.0 {
        Some((spacing, true))
    } else if (grid[0] - spacing).abs() <= tol {
        Some((spacing, false))
    } else {
        None
    }
}

/// One fractional Brownian motion path on `grid`.
pub fn sample_fbm(hurst: f64, grid: &[f64], lineage: SeedLineage) -> Result<PathSample> {
    Ok(FbmSampler::new(hurst, grid)?.sample(lineage))
}

/// One joint sample of `kernel` at the schedule's times.
pub fn sample_on_schedule(
    kernel: &CovarianceKernel,
    schedule: &Schedule,
    lineage: SeedLineage,
) -> Result<PathSample> {
    Ok(GaussianVectorSampler::new(kernel, &schedule.times)?.sample(lineage))
}

#[derive(Serialize)]
struct PathSidecar<'a> {
    lineages: Vec<SeedLineage>,
    frame: Option<Frame>,
    embedding: Option<&'a EmbeddingReport>,
}

/// Writes `<stem>.csv` with columns `path_index,grid_point,value` and a
/// `<stem>.json` sidecar with seed lineages and the embedding report.
pub fn dump_paths(
    dir: &Path,
    stem: &str,
    paths: &[PathSample],
    embedding: Option<&EmbeddingReport>,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "path_index,grid_point,value")?;
    for p in paths {
        for (t, v) in p.grid.iter().zip(&p.values) {
            writeln!(w, "{},{},{}", p.lineage.path, t, v)?;
        }
    }
    w.flush()?;
    let sidecar = PathSidecar {
        lineages: paths.iter().map(|p| p.lineage).collect(),
        frame: paths.first().map(|p| p.frame),
        embedding,
    };
    std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok((csv_path, json_path))
}
