//! The `passage-lab` command line.
//!
//! Exit codes: 0 success, 1 configuration or domain error, 2 invariant
//! violation, 3 numerical failure.
//!
//! # Kernel strings
//!
//! `bm`, `fbm:H=0.3`, `spde:d=1,gamma=2,beta=1,nu=1`. Any kernel accepts an
//! extra `slnd=<value>` entry to set its SLND constant.
//!
//! # Config files
//!
//! `--config FILE` reads flat `key = value` lines; `#` starts a comment.
//! Keys: `kernel`, `c`, `beta`, `delta`, `horizons`, `window`, `paths`,
//! `seed`, `rel_tol`, `out_dir`. Lists are comma separated. Command-line
//! flags take precedence over the file, and `PASSAGE_LAB_SEED` takes
//! precedence over both for the seed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{self, bounds_report, discretization_budget, kummer_m, z_inverse, z_of_mu};
use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, ProcessSpec, SpdeParams};
use crate::passage::{estimate_exponent, McConfig, PassageConfig, Regime, DEFAULT_STEP};
use crate::quadrature::{self, QuadratureConfig};
use crate::sampler::{make_schedule, ScheduleFamily, Validity};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const SEED_ENV: &str = "PASSAGE_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "passage-lab", version, about = "Boundary-crossing exponents of self-similar Gaussian processes")]
struct Cli {
    /// Worker threads (defaults to available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the critical exponent by simulation and write run artifacts.
    Estimate(EstimateArgs),
    /// Analytic bounds on the exponent at level c.
    Bounds(BoundsArgs),
    /// Queries about the SPDE-trace process.
    Spde(SpdeArgs),
    /// Build a sampling schedule and optionally its discretization budget.
    Schedule(ScheduleArgs),
    /// Kummer's function M(a, b, z).
    Kummer {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
    },
    /// Smallest positive root z(mu) of M(-mu, 1/2, x^2/2).
    Z {
        #[arg(long)]
        mu: f64,
    },
    /// Exact Brownian exponent z^{-1}(c).
    Zinv {
        #[arg(long)]
        c: f64,
    },
    /// Covariance R(s, t) of a kernel.
    Cov {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Normalising constant K0 for white-in-time noise.
    K0 {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
}

#[derive(Debug, Args, Default)]
struct EstimateArgs {
    /// Rerun the inputs recorded in an earlier manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    /// Boundary exponent; defaults to the kernel's index (critical regime).
    #[arg(long)]
    beta: Option<f64>,
    /// Log-time grid step.
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated log-time horizons.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    /// Fit window `lo,hi` in log time; defaults to all horizons.
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpdeQuery {
    Alpha,
    WellPosed,
    Cov,
    K0,
    Comparison,
}

#[derive(Debug, Args)]
struct SpdeArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    nu: f64,
    /// Queries to answer, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    query: Vec<SpdeQuery>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    delta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 3.0, 4.0, 5.0])]
    horizons: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Arithmetic,
    Geometric,
    PowerExp,
    LogPower,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    n_max: usize,
    /// One-based index m for the discretization budget.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Constant K > 1 of the budget; a relative, not certified, scale.
    #[arg(long, default_value_t = 10.0)]
    k: f64,
}

/// Parses a kernel string such as `fbm:H=0.3,slnd=0.8`.
pub fn parse_kernel(text: &str) -> Result<ProcessSpec> {
    let text = text.trim();
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut pairs = Vec::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("kernel entry `{item}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("kernel entry `{item}` has a non-numeric value")))?;
        pairs.push((k.trim().to_ascii_lowercase(), v));
    }
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
    let need = |key: &str| get(key).ok_or_else(|| Error::InvalidArgument(format!("kernel `{name}` needs `{key}`")));
    let allowed: &[&str] = match name.to_ascii_lowercase().as_str() {
        "bm" | "brownian" => &["slnd"],
        "fbm" => &["h", "slnd"],
        "spde" => &["d", "gamma", "beta", "nu", "slnd"],
        other => return Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
    };
    if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("kernel `{name}` has no parameter `{k}`")));
    }
    let spec = match name.to_ascii_lowercase().as_str() {
        "bm" | "brownian" => ProcessSpec::brownian(),
        "fbm" => ProcessSpec::fbm(need("h")?)?,
        _ => {
            let d = need("d")?;
            if d < 1.0 || d.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!("spde dimension must be a positive integer, got {d}")));
            }
            ProcessSpec::spde(SpdeParams::new(d as u32, need("gamma")?, need("beta")?, need("nu")?)?)?
        }
    };
    match get("slnd") {
        Some(ell) => spec.with_slnd(ell),
        None => Ok(spec),
    }
}

/// Values read from a flat key = value config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub kernel: Option<String>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub horizons: Option<Vec<f64>>,
    pub window: Option<Vec<f64>>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub rel_tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<FileConfig> {
    let mut cfg = FileConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config {
            line: line_no,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("`{key}` needs a number, got `{v}`")));
        let int = |v: &str| v.parse::<u64>().map_err(|_| err(format!("`{key}` needs a nonnegative integer, got `{v}`")));
        let list = |v: &str| v.split(',').map(|x| num(x.trim())).collect::<Result<Vec<f64>>>();
        match key {
            "kernel" => cfg.kernel = Some(value.to_string()),
            "c" => cfg.c = Some(num(value)?),
            "beta" => cfg.beta = Some(num(value)?),
            "delta" => cfg.delta = Some(num(value)?),
            "horizons" => cfg.horizons = Some(list(value)?),
            "window" => cfg.window = Some(list(value)?),
            "paths" => cfg.paths = Some(int(value)?),
            "seed" => cfg.seed = Some(int(value)?),
            "rel_tol" => cfg.rel_tol = Some(num(value)?),
            "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(cfg)
}

/// The inputs of an estimate run; hashing them identifies the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateInputs {
    pub kernel: String,
    pub process: ProcessSpec,
    pub c: f64,
    pub beta: f64,
    pub delta: f64,
    pub horizons: Vec<f64>,
    pub window: (f64, f64),
    pub n_paths: u64,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl EstimateInputs {
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub inputs: EstimateInputs,
    pub manifest_hash: String,
    pub outputs: Vec<String>,
    pub code_version: String,
    pub wall_time: f64,
}

fn quad_config(rel_tol: Option<f64>) -> Result<QuadratureConfig> {
    let mut cfg = QuadratureConfig::default();
    if let Some(r) = rel_tol {
        cfg.rel_tol = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV} must be a nonnegative integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn resolve_estimate(args: &EstimateArgs) -> Result<(EstimateInputs, PathBuf)> {
    if let Some(path) = &args.manifest {
        let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported manifest schema version {}",
                manifest.schema_version
            )));
        }
        let out = args.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        return Ok((manifest.inputs, out));
    }
    let file = match &args.config {
        Some(p) => parse_config(&std::fs::read_to_string(p)?)?,
        None => FileConfig::default(),
    };
    let kernel = args
        .kernel
        .clone()
        .or(file.kernel)
        .ok_or_else(|| Error::InvalidArgument("--kernel is required".into()))?;
    let process = parse_kernel(&kernel)?;
    let c = args.c.or(file.c).ok_or_else(|| Error::InvalidArgument("--c is required".into()))?;
    let beta = args.beta.or(file.beta).unwrap_or(process.alpha);
    let horizons = args
        .horizons
        .clone()
        .or(file.horizons)
        .unwrap_or_else(|| vec![3.0, 4.0, 5.0, 6.0]);
    let window = match args.window.clone().or(file.window) {
        Some(w) if w.len() == 2 => (w[0], w[1]),
        Some(_) => return Err(Error::InvalidArgument("--window takes exactly two values".into())),
        None => (
            horizons.first().copied().unwrap_or(0.0),
            horizons.last().copied().unwrap_or(0.0),
        ),
    };
    let seed = match env_seed()? {
        Some(s) => s,
        None => args.seed.or(file.seed).unwrap_or(1),
    };
    let inputs = EstimateInputs {
        kernel,
        process,
        c,
        beta,
        delta: args.delta.or(file.delta).unwrap_or(DEFAULT_STEP),
        horizons,
        window,
        n_paths: args.paths.or(file.paths).unwrap_or(200_000),
        seed,
        quadrature: quad_config(args.rel_tol.or(file.rel_tol))?,
    };
    let out = args
        .out_dir
        .clone()
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((inputs, out))
}

/// Runs an estimate and writes `survival.csv`, `exponent.json`,
/// `bounds.json` and `manifest.json` into `out_dir`.
pub fn run_estimate(inputs: &EstimateInputs, out_dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let kernel = CovarianceKernel::with_quadrature(inputs.process.clone(), inputs.quadrature)?;
    PassageConfig::new(inputs.c, inputs.beta, kernel.alpha())?.require(Regime::Critical)?;
    let hash = inputs.hash()?;
    let mc = McConfig::new(inputs.n_paths, inputs.delta, inputs.seed);
    let run = estimate_exponent(&kernel, inputs.c, &inputs.horizons, inputs.window, &mc)?;

    std::fs::create_dir_all(out_dir)?;
    let survival = run.curve.to_csv(Some(&format!("manifest_hash={hash}")));
    std::fs::write(out_dir.join("survival.csv"), survival)?;
    let exponent = json!({ "manifest_hash": hash, "estimate": run.estimate });
    std::fs::write(out_dir.join("exponent.json"), serde_json::to_string_pretty(&exponent)? + "\n")?;

    let fekete: Vec<(f64, f64)> = run
        .estimate
        .upper_bound_family
        .iter()
        .filter_map(|f| f.wilson_value.map(|v| (f.u, v)))
        .collect();
    let var_x1 = kernel.variance(1.0)?;
    let report = bounds_report(kernel.spec(), inputs.c, var_x1, &fekete)?;
    let bounds_json = json!({ "manifest_hash": hash, "report": report });
    std::fs::write(out_dir.join("bounds.json"), serde_json::to_string_pretty(&bounds_json)? + "\n")?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        command: "estimate".into(),
        inputs: inputs.clone(),
        manifest_hash: hash,
        outputs: ["survival.csv", "exponent.json", "bounds.json", "manifest.json"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let est = &run.estimate;
    if !est.fekete_consistent {
        return Err(Error::Invariant(format!(
            "estimate {:.4} exceeds a finite-horizon upper bound beyond statistical slack",
            est.lambda_hat
        )));
    }
    let slack = est.lambda_hat + 2.0 * est.std_err;
    if let Some(b) = report
        .lower_bounds
        .iter()
        .filter(|b| !b.asymptotic)
        .find(|b| b.value.is_some_and(|v| v > slack))
    {
        return Err(Error::Invariant(format!(
            "estimate {:.4} lies below the `{}` lower bound {:.4} beyond statistical slack",
            est.lambda_hat,
            b.label,
            b.value.unwrap_or_default()
        )));
    }
    Ok(manifest)
}

fn labeled(inputs: Value, value: Value, error_estimate: Value, label: &str) -> Value {
    json!({ "inputs": inputs, "value": value, "error_estimate": error_estimate, "label": label })
}

fn cmd_bounds(args: &BoundsArgs) -> Result<Value> {
    let spec = parse_kernel(&args.kernel)?;
    let kernel = CovarianceKernel::with_quadrature(spec.clone(), quad_config(args.rel_tol)?)?;
    let report = bounds_report(&spec, args.c, kernel.variance(1.0)?, &[])?;
    Ok(labeled(
        json!({ "kernel": args.kernel, "c": args.c }),
        serde_json::to_value(&report)?,
        Value::Null,
        "bounds",
    ))
}

fn cmd_spde(args: &SpdeArgs) -> Result<Value> {
    let raw = SpdeParams {
        d: args.d,
        gamma: args.gamma,
        beta: args.beta,
        nu: args.nu,
    };
    let qcfg = quad_config(args.rel_tol)?;
    let mut out = serde_json::Map::new();
    out.insert("inputs".into(), serde_json::to_value(raw)?);
    for q in &args.query {
        match q {
            SpdeQuery::WellPosed => {
                let check = raw.validate();
                out.insert(
                    "well_posed".into(),
                    json!({
                        "value": check.is_ok(),
                        "threshold": raw.gamma_threshold(),
                        "reason": check.err().map(|e| e.to_string()),
                    }),
                );
            }
            SpdeQuery::Alpha => {
                raw.validate()?;
                out.insert("alpha".into(), json!(raw.alpha()));
            }
            SpdeQuery::Cov => {
                raw.validate()?;
                let t = args.t.ok_or_else(|| Error::InvalidArgument("cov needs --t".into()))?;
                let h = args.h.unwrap_or(0.0);
                let est = quadrature::spde_trace_cov(&raw, t, h, &qcfg)?;
                out.insert("cov".into(), json!({ "t": t, "h": h, "value": est.value, "error_estimate": est.error }));
            }
            SpdeQuery::K0 => {
                raw.validate()?;
                let est = quadrature::k0_constant(raw.d, raw.gamma, raw.beta, &qcfg)?;
                out.insert("k0".into(), json!({ "value": est.value, "error_estimate": est.error }));
            }
            SpdeQuery::Comparison => {
                let spec = ProcessSpec::spde(raw)?;
                let c = args.c.ok_or_else(|| Error::InvalidArgument("comparison needs --c".into()))?;
                let seed = env_seed()?.unwrap_or(args.seed);
                let mc = McConfig::new(args.paths, args.delta, seed);
                let window = (
                    args.horizons.first().copied().unwrap_or(0.0),
                    args.horizons.last().copied().unwrap_or(0.0),
                );
                let b = bounds::comparison_bound(&spec, c, &args.horizons, window, &mc, &qcfg)?;
                out.insert("comparison".into(), serde_json::to_value(b)?);
            }
        }
    }
    Ok(Value::Object(out))
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<Value> {
    let q = || args.q.ok_or_else(|| Error::InvalidArgument("this family needs --q".into()));
    let family = match args.family {
        FamilyArg::Arithmetic => ScheduleFamily::Arithmetic,
        FamilyArg::Geometric => ScheduleFamily::Geometric,
        FamilyArg::PowerExp => ScheduleFamily::PowerExp { q: q()? },
        FamilyArg::LogPower => ScheduleFamily::LogPower { q: q()? },
    };
    let schedule = make_schedule(family, args.alpha, args.n_max)?;
    let note = match schedule.validity {
        Validity::Unknown => "open problem: whether survival sampled at t = e^n decays at the continuous-time exponent",
        Validity::UpperBoundOnly => "q is not below 2 alpha / (1 + 2 alpha); only the one-sided comparison holds",
        Validity::ProvedEquivalent => "discrete and continuous exponents coincide",
    };
    let budget = match args.m {
        Some(m) => Some(discretization_budget(&schedule, args.alpha, args.c, args.epsilon, m, args.k)?),
        None => None,
    };
    Ok(json!({ "schedule": schedule, "note": note, "budget": budget }))
}

fn cmd_cov(kernel: &str, s: f64, t: f64, rel_tol: Option<f64>) -> Result<Value> {
    let spec = parse_kernel(kernel)?;
    let k = CovarianceKernel::with_quadrature(spec, quad_config(rel_tol)?)?;
    let v = k.eval(s, t)?;
    let err = k.tolerance() * v.abs();
    Ok(labeled(json!({ "kernel": kernel, "s": s, "t": t }), json!(v), json!(err), "covariance"))
}

fn dispatch(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Estimate(args) => {
            let (inputs, out_dir) = resolve_estimate(&args)?;
            let manifest = run_estimate(&inputs, &out_dir)?;
            Ok(serde_json::to_value(manifest)?)
        }
        Command::Bounds(args) => cmd_bounds(&args),
        Command::Spde(args) => cmd_spde(&args),
        Command::Schedule(args) => cmd_schedule(&args),
        Command::Kummer { a, b, z } => {
            let m = kummer_m(a, b, z)?;
            Ok(json!({
                "inputs": { "a": a, "b": b, "z": z },
                "value": m.value,
                "error_estimate": m.truncation_bound,
                "label": "kummer-m",
                "terms_used": m.terms_used,
                "precision_loss": m.precision_loss,
            }))
        }
        Command::Z { mu } => Ok(labeled(json!({ "mu": mu }), json!(z_of_mu(mu)?), json!(1e-13), "z-of-mu")),
        Command::Zinv { c } => Ok(labeled(
            json!({ "c": c }),
            json!(z_inverse(c)?),
            Value::Null,
            "brownian-exponent",
        )),
        Command::Cov { kernel, s, t, rel_tol } => cmd_cov(&kernel, s, t, rel_tol),
        Command::K0 { d, gamma, beta, rel_tol } => {
            let est = quadrature::k0_constant(d, gamma, beta, &quad_config(rel_tol)?)?;
            Ok(labeled(
                json!({ "d": d, "gamma": gamma, "beta": beta }),
                json!(est.value),
                json!(est.error),
                "k0",
            ))
        }
    }
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.workers {
        // A global pool can only be set once per process; later calls keep the first.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_strings() {
        assert!(parse_kernel("bm").unwrap().is_brownian());
        assert_eq!(parse_kernel("fbm:H=0.3").unwrap().alpha, 0.3);
        let s = parse_kernel("spde:d=1,gamma=2,beta=1,nu=1").unwrap();
        assert_eq!(s.alpha, 0.25);
        assert_eq!(s.slnd_constant, None);
        let s = parse_kernel("spde:d=1,gamma=2,beta=1,nu=1,slnd=0.2").unwrap();
        assert_eq!(s.slnd_constant, Some(0.2));
        assert!(parse_kernel("fbm:H=1.2").is_err());
        assert!(parse_kernel("fbm:H=0.3,d=2").is_err());
        assert!(parse_kernel("spde:d=1,gamma=1,beta=1,nu=1").is_err());
        assert!(parse_kernel("ou").is_err());
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let ok = parse_config("# run\nkernel = bm\nc = 1\nhorizons = 3, 4,5\n").unwrap();
        assert_eq!(ok.horizons, Some(vec![3.0, 4.0, 5.0]));
        match parse_config("kernel = bm\n\nc = one\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("kernel = bm\nspeed = 3\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
