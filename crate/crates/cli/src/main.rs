use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use uamo_core::cocycle::{
    acceleration, dominated_splitting_check, lyapunov, lyapunov_profile, AccelerationConfig, CocycleKind, DsConfig,
    DsReport, DsVerdict, LyapunovConfig, LyapunovProfile, SpectralParameter,
};
use uamo_core::duality::duality_check;
use uamo_core::output::{to_json_with_provenance, Provenance};
use uamo_core::spectral::{butterfly, measure_estimate, rational_spectrum, Measure, SpectrumEstimate, ThetaSampling};
use uamo_core::torus::cf_approximants;
use uamo_core::verify::{self, CheckOutcome, Suite};
use uamo_core::{Frequency, TorusPoint};

#[derive(Parser, Serialize)]
#[command(name = "uamo", version, about = "Spectra, cocycles and duality checks for the quasi-periodic quantum walk")]
struct Cli {
    /// Cap on worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Hofstadter-type raster of Σ_{p/q} over all p/q with q ≤ q_max.
    Butterfly(ButterflyArgs),
    /// Profile ε ↦ L(β, z; ε) as CSV.
    Lyapunov(LyapunovArgs),
    /// Acceleration of ε ↦ L(β, z; ε) at one ε.
    Acceleration(AccelerationArgs),
    /// Arc estimate of Σ_{p/q} for rational β (or its last convergent).
    Spectrum(SpectrumArgs),
    /// Dominated-splitting verdicts on a grid of unimodular z.
    DsScan(DsScanArgs),
    /// Dual residuals for the eigenvectors of one decoupled truncation.
    Duality(DualityArgs),
    /// Runs an acceptance suite, or `all`.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct ButterflyArgs {
    #[arg(long, default_value_t = 8)]
    q_max: i64,
    /// Angle bins per row.
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// θ samples per row.
    #[arg(long, default_value_t = 32)]
    samples: usize,
    /// Output stem; writes `<out>.pgm` and `<out>.json`.
    #[arg(long, default_value = "butterfly")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum KindArg {
    N,
    M,
}

#[derive(Args, Serialize)]
struct LyapunovArgs {
    #[arg(long, default_value = "golden")]
    beta: String,
    /// Angle in turns (`0.25`) or a complex number `re,im`.
    #[arg(long)]
    z: String,
    #[arg(long, default_value_t = 0.0)]
    eps_min: f64,
    #[arg(long, default_value_t = 1.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 11)]
    eps_steps: usize,
    #[arg(long, value_enum, default_value = "n")]
    kind: KindArg,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// CSV path; a `.json` provenance sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AccelerationArgs {
    #[arg(long, default_value = "golden")]
    beta: String,
    #[arg(long)]
    z: String,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SpectrumArgs {
    #[arg(long)]
    beta: String,
    /// Fixed phase; without it Σ is the union over θ.
    #[arg(long)]
    theta: Option<f64>,
    /// Largest denominator when β is irrational.
    #[arg(long, default_value_t = 34)]
    q_max: i64,
    /// θ samples over one period.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DsScanArgs {
    #[arg(long)]
    beta: String,
    /// Number of z points `e^{2πi(j+½)/grid}`.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Phases on the torus grid.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Largest iterate inspected.
    #[arg(long, default_value_t = 256)]
    iters: usize,
    /// Denominator bound for the Floquet comparison when β is irrational.
    #[arg(long, default_value_t = 34)]
    q_max: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DualityArgs {
    #[arg(long, default_value = "golden")]
    beta: String,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Half-size L; the truncation has dimension 2L.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// Suite name or `all`.
    suite: String,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Check,
    Run(uamo_core::Error),
}

impl From<uamo_core::Error> for Failure {
    fn from(e: uamo_core::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Config(msg.into()))
}

fn parse_beta(s: &str) -> CliResult<Frequency> {
    let parsed = match s {
        "golden" => Ok(Frequency::golden()),
        "silver" => Ok(Frequency::silver()),
        _ => match s.split_once('/') {
            Some((p, q)) => match (p.trim().parse(), q.trim().parse()) {
                (Ok(p), Ok(q)) => Frequency::rational(p, q),
                _ => return config_err(format!("cannot parse β = {s:?}")),
            },
            None => match s.parse::<f64>() {
                Ok(x) => cf_approximants(x, 40),
                Err(_) => return config_err(format!("cannot parse β = {s:?}")),
            },
        },
    };
    parsed.or_else(|e| config_err(format!("β = {s:?}: {e}")))
}

fn parse_z(s: &str) -> CliResult<Complex64> {
    let z = match s.split_once(',') {
        Some((re, im)) => match (re.trim().parse::<f64>(), im.trim().parse::<f64>()) {
            (Ok(re), Ok(im)) => Complex64::new(re, im),
            _ => return config_err(format!("cannot parse z = {s:?}")),
        },
        None => match s.parse::<f64>() {
            Ok(t) => Complex64::from_polar(1.0, std::f64::consts::TAU * t),
            Err(_) => return config_err(format!("cannot parse z = {s:?}")),
        },
    };
    if !(z.re.is_finite() && z.im.is_finite()) || z == Complex64::new(0.0, 0.0) {
        return config_err(format!("z = {s:?} must be finite and nonzero"));
    }
    Ok(z)
}

fn parse_theta(x: f64) -> CliResult<TorusPoint> {
    TorusPoint::new(x).or_else(|_| config_err(format!("θ = {x} is not finite")))
}

fn positive(name: &str, v: usize) -> CliResult<()> {
    if v == 0 {
        return config_err(format!("--{name} must be positive"));
    }
    Ok(())
}

/// `p/q` to compute a spectrum for: β itself when rational, otherwise its
/// last convergent with `q ≤ q_max`.
fn spectral_fraction(beta: &Frequency, q_max: i64) -> CliResult<(i64, i64)> {
    if let Some(c) = beta.exact() {
        return Ok((c.p, c.q));
    }
    match beta.convergents().iter().rev().find(|c| c.q <= q_max) {
        Some(c) => Ok((c.p, c.q)),
        None => config_err(format!("no convergent with q ≤ {q_max}")),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        positive("threads", n)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .or_else(|e| config_err(format!("thread pool: {e}")))?;
    }
    let prov = Provenance::new("uamo", cli)?;
    match &cli.command {
        Command::Butterfly(a) => cmd_butterfly(a, &prov),
        Command::Lyapunov(a) => cmd_lyapunov(a, &prov),
        Command::Acceleration(a) => cmd_acceleration(a, &prov),
        Command::Spectrum(a) => cmd_spectrum(a, &prov),
        Command::DsScan(a) => cmd_ds_scan(a, &prov),
        Command::Duality(a) => cmd_duality(a, &prov),
        Command::Verify(a) => cmd_verify(a, &prov),
    }
}

fn cmd_butterfly(a: &ButterflyArgs, prov: &Provenance) -> CliResult<()> {
    if !(2..=64).contains(&a.q_max) {
        return config_err("--q-max must be in 2..=64");
    }
    positive("grid", a.grid)?;
    positive("samples", a.samples)?;
    let raster = butterfly(a.q_max, a.samples, 2, a.grid)?;
    let pgm = a.out.with_extension("pgm");
    raster.write_pgm(io::BufWriter::new(fs::File::create(&pgm)?))?;
    fs::write(a.out.with_extension("json"), to_json_with_provenance(&raster, prov)?)?;
    Ok(())
}

fn cmd_lyapunov(a: &LyapunovArgs, prov: &Provenance) -> CliResult<()> {
    let beta = parse_beta(&a.beta)?;
    let z = parse_z(&a.z)?;
    if !(a.eps_min.is_finite() && a.eps_max.is_finite()) || a.eps_min > a.eps_max {
        return config_err("need finite --eps-min <= --eps-max");
    }
    positive("eps-steps", a.eps_steps)?;
    positive("samples", a.samples)?;
    if a.eps_steps > 1 && a.eps_min == a.eps_max {
        return config_err("several --eps-steps need --eps-min < --eps-max");
    }
    let grid: Vec<f64> = if a.eps_steps == 1 {
        vec![a.eps_min]
    } else {
        (0..a.eps_steps).map(|i| a.eps_min + (a.eps_max - a.eps_min) * i as f64 / (a.eps_steps - 1) as f64).collect()
    };
    let cfg = LyapunovConfig { samples: a.samples, iterations: a.iters, seed: a.seed, ..LyapunovConfig::default() };
    let profile = match a.kind {
        KindArg::N => lyapunov_profile(&beta, z, &grid, &cfg)?,
        KindArg::M => {
            let mut l_values = Vec::with_capacity(grid.len());
            let mut errors = Vec::with_capacity(grid.len());
            let mut n_iters = 0;
            for &eps in &grid {
                let est = lyapunov(CocycleKind::M, &beta, SpectralParameter::new(z, eps)?, &cfg)?;
                l_values.push(est.value);
                errors.push(est.error);
                n_iters = est.iterations;
            }
            // slopes are only meaningful for the N exponent
            LyapunovProfile { slopes: vec![f64::NAN; grid.len()], eps_grid: grid, l_values, errors, n_iters, theta_samples: a.samples }
        }
    };
    match &a.out {
        Some(path) => {
            profile.write_csv(fs::File::create(path)?)?;
            fs::write(sidecar(path), to_json_with_provenance(&serde_json::json!({ "csv": path }), prov)?)?;
        }
        None => profile.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_acceleration(a: &AccelerationArgs, prov: &Provenance) -> CliResult<()> {
    let beta = parse_beta(&a.beta)?;
    let z = parse_z(&a.z)?;
    if !a.eps.is_finite() || !(a.step > 0.0) {
        return config_err("need finite --eps and positive --step");
    }
    positive("samples", a.samples)?;
    let cfg = AccelerationConfig {
        h: a.step,
        lyapunov: LyapunovConfig { samples: a.samples, iterations: a.iters, seed: a.seed, ..LyapunovConfig::default() },
        ..AccelerationConfig::default()
    };
    let est = acceleration(&beta, SpectralParameter::new(z, a.eps)?, &cfg)?;
    emit(a.out.as_deref(), &to_json_with_provenance(&est, prov)?)
}

#[derive(Serialize)]
struct SpectrumOutput<'a> {
    #[serde(flatten)]
    estimate: &'a SpectrumEstimate,
    measure: Measure,
}

fn cmd_spectrum(a: &SpectrumArgs, prov: &Provenance) -> CliResult<()> {
    let beta = parse_beta(&a.beta)?;
    positive("samples", a.samples)?;
    let (p, q) = spectral_fraction(&beta, a.q_max)?;
    let sampling = match a.theta {
        Some(t) => ThetaSampling::Fixed(vec![parse_theta(t)?.value()]),
        None => ThetaSampling::Period(a.samples),
    };
    let est = rational_spectrum(p, q, &sampling, 4)?;
    let out = SpectrumOutput { measure: measure_estimate(&est), estimate: &est };
    emit(a.out.as_deref(), &to_json_with_provenance(&out, prov)?)
}

#[derive(Serialize)]
struct DsPoint {
    angle: f64,
    in_floquet_spectrum: bool,
    #[serde(flatten)]
    report: DsReport,
}

#[derive(Serialize)]
struct DsScanOutput {
    oracle_p: i64,
    oracle_q: i64,
    consistency: f64,
    undecided_fraction: f64,
    points: Vec<DsPoint>,
}

fn cmd_ds_scan(a: &DsScanArgs, prov: &Provenance) -> CliResult<()> {
    let beta = parse_beta(&a.beta)?;
    positive("grid", a.grid)?;
    positive("samples", a.samples)?;
    positive("iters", a.iters)?;
    let (p, q) = spectral_fraction(&beta, a.q_max)?;
    let oracle = rational_spectrum(p, q, &ThetaSampling::Period(64), 4)?;
    let cfg = DsConfig { grid: a.samples, n_max: a.iters, ..DsConfig::default() };
    let mut points = Vec::with_capacity(a.grid);
    let (mut agree, mut undecided) = (0usize, 0usize);
    for j in 0..a.grid {
        let angle = (j as f64 + 0.5) / a.grid as f64;
        let report = dominated_splitting_check(&beta, SpectralParameter::on_circle(angle, 0.0)?, &cfg)?;
        let inside = oracle.contains(angle);
        match (report.verdict, inside) {
            (DsVerdict::Ds, false) | (DsVerdict::NotDs, true) => agree += 1,
            (DsVerdict::Undecided, _) => undecided += 1,
            _ => {}
        }
        points.push(DsPoint { angle, in_floquet_spectrum: inside, report });
    }
    let n = a.grid as f64;
    let out = DsScanOutput {
        oracle_p: p,
        oracle_q: q,
        consistency: agree as f64 / n,
        undecided_fraction: undecided as f64 / n,
        points,
    };
    emit(a.out.as_deref(), &to_json_with_provenance(&out, prov)?)
}

fn cmd_duality(a: &DualityArgs, prov: &Provenance) -> CliResult<()> {
    let beta = parse_beta(&a.beta)?;
    let theta = parse_theta(a.theta)?;
    if a.grid < 2 || !a.grid.is_multiple_of(2) {
        return config_err("--grid (half-size L) must be even and >= 2");
    }
    let report = duality_check(&beta, theta, a.grid)?;
    emit(a.out.as_deref(), &to_json_with_provenance(&report, prov)?)
}

fn cmd_verify(a: &VerifyArgs, prov: &Provenance) -> CliResult<()> {
    let suites: Vec<Suite> = if a.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        match Suite::from_name(&a.suite) {
            Some(s) => vec![s],
            None => {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                return config_err(format!("unknown suite {:?}; expected one of {} or all", a.suite, names.join(", ")));
            }
        }
    };
    let mut outcomes: Vec<CheckOutcome> = Vec::with_capacity(suites.len());
    for s in suites {
        let o = verify::run(s, a.seed)?;
        eprintln!("{} {} ({:.1}s)", if o.passed { "PASS" } else { "FAIL" }, s.name(), o.elapsed_secs);
        for f in &o.failures {
            eprintln!("    {f}");
        }
        outcomes.push(o);
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    emit(a.out.as_deref(), &to_json_with_provenance(&serde_json::json!({ "outcomes": outcomes }), prov)?)?;
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        // reader closed the pipe (`| head`)
        Err(Failure::Run(uamo_core::Error::Io(e))) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
