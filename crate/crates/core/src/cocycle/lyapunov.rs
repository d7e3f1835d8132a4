use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval, CocycleKind, CocycleProduct, SpectralParameter, RENORM_INTERVAL};
use crate::error::{Error, Result};
use crate::torus::Frequency;

/// Estimator parameters shared by every Lyapunov computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Number of phases θ on the shifted lattice `(i + u)/S`.
    pub samples: usize,
    /// Orbit length; `None` picks [`default_iterations`].
    pub iterations: Option<usize>,
    pub seed: u64,
    pub bootstrap: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig { samples: 256, iterations: None, seed: 0x5eed, bootstrap: 200 }
    }
}

/// `10·q` for the largest stored convergent denominator `q ≤ 1000`.
pub fn default_iterations(beta: &Frequency) -> usize {
    let q = beta.largest_denominator_at_most(1000).unwrap_or(100);
    10 * q as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Nats per iterate.
    pub value: f64,
    /// Bootstrap standard error of the θ-average.
    pub error: f64,
    pub samples: usize,
    pub iterations: usize,
    /// Phases that had to be redrawn because the orbit hit a pole.
    pub resampled: usize,
}

const MAX_POLE_ATTEMPTS: usize = 8;

fn growth(kind: CocycleKind, beta: &Frequency, p: SpectralParameter, theta: f64, n: usize) -> Result<f64> {
    let mut prod = CocycleProduct::identity();
    for j in 0..n {
        let a = eval(kind, p, beta.phase(j as i64, theta))?;
        prod.push(a, (j + 1) % RENORM_INTERVAL == 0);
    }
    Ok(prod.log_norm() / n as f64)
}

/// `(1/n)·log‖A_n(θ)‖` averaged over a randomly shifted lattice of phases.
///
/// For kind `M` on the real torus a phase whose orbit meets a pole is
/// redrawn; repeated failure is reported as [`Error::PersistentPole`].
pub fn lyapunov(kind: CocycleKind, beta: &Frequency, p: SpectralParameter, cfg: &LyapunovConfig) -> Result<LyapunovEstimate> {
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("need at least one phase sample".into()));
    }
    let n = cfg.iterations.unwrap_or_else(|| default_iterations(beta));
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one iteration".into()));
    }
    let offset: f64 = ChaCha8Rng::seed_from_u64(cfg.seed).random();
    let s = cfg.samples;
    let per_sample: Vec<Result<(f64, usize)>> = (0..s)
        .into_par_iter()
        .map(|i| {
            let mut theta = (i as f64 + offset) / s as f64;
            for attempt in 0..MAX_POLE_ATTEMPTS {
                match growth(kind, beta, p, theta, n) {
                    Ok(v) => return Ok((v, attempt)),
                    Err(Error::Pole { .. }) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                        rng.set_stream((i * MAX_POLE_ATTEMPTS + attempt + 1) as u64);
                        theta = (i as f64 + rng.random::<f64>()) / s as f64;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::PersistentPole { attempts: MAX_POLE_ATTEMPTS })
        })
        .collect();
    let mut values = Vec::with_capacity(s);
    let mut resampled = 0;
    for r in per_sample {
        let (v, attempts) = r?;
        values.push(v);
        resampled += attempts.min(1);
    }
    let value = values.iter().sum::<f64>() / s as f64;
    let error = bootstrap_error(&values, cfg.bootstrap, cfg.seed);
    Ok(LyapunovEstimate { value, error, samples: s, iterations: n, resampled })
}

fn bootstrap_error(values: &[f64], resamples: usize, seed: u64) -> f64 {
    if resamples < 2 || values.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let n = values.len();
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / resamples as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    var.sqrt()
}

/// `ε ↦ L(β, z; ε)` (kind `N`) on a grid, with slopes in units of 2π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovProfile {
    pub eps_grid: Vec<f64>,
    pub l_values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Forward differences `ΔL / (2π Δε)`; the last entry repeats the
    /// backward difference.
    pub slopes: Vec<f64>,
    pub n_iters: usize,
    pub theta_samples: usize,
}

impl LyapunovProfile {
    /// Writes columns `eps, L, err, slope`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps", "L", "err", "slope"])?;
        for i in 0..self.eps_grid.len() {
            w.write_record([
                crate::output::fmt_f64(self.eps_grid[i]),
                crate::output::fmt_f64(self.l_values[i]),
                crate::output::fmt_f64(self.errors[i]),
                crate::output::fmt_f64(self.slopes[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Profile of the complexified exponent of `N^z` over `eps_grid` (sorted).
/// The same phase lattice is reused at every ε so differences are smooth.
pub fn lyapunov_profile(beta: &Frequency, z: num_complex::Complex64, eps_grid: &[f64], cfg: &LyapunovConfig) -> Result<LyapunovProfile> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidArgument("empty ε grid".into()));
    }
    if eps_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("ε grid must be strictly increasing".into()));
    }
    let mut l_values = Vec::with_capacity(eps_grid.len());
    let mut errors = Vec::with_capacity(eps_grid.len());
    let mut n_iters = 0;
    for &eps in eps_grid {
        let est = lyapunov(CocycleKind::N, beta, SpectralParameter::new(z, eps)?, cfg)?;
        l_values.push(est.value);
        errors.push(est.error);
        n_iters = est.iterations;
    }
    let m = eps_grid.len();
    let mut slopes = Vec::with_capacity(m);
    for i in 0..m {
        let slope = if m == 1 {
            f64::NAN
        } else {
            let j = if i + 1 < m { i } else { i - 1 };
            (l_values[j + 1] - l_values[j]) / (TAU * (eps_grid[j + 1] - eps_grid[j]))
        };
        slopes.push(slope);
    }
    Ok(LyapunovProfile { eps_grid: eps_grid.to_vec(), l_values, errors, slopes, n_iters, theta_samples: cfg.samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelerationConfig {
    pub h: f64,
    /// Disagreement between one-sided slopes that counts as a kink.
    pub kink_tolerance: f64,
    pub lyapunov: LyapunovConfig,
}

impl Default for AccelerationConfig {
    fn default() -> Self {
        AccelerationConfig { h: 0.05, kink_tolerance: 0.05, lyapunov: LyapunovConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelerationEstimate {
    pub omega: f64,
    pub omega_rounded: i64,
    /// `|ω − round(ω)| ≤ 0.25`.
    pub resolved: bool,
    /// The two probed slopes disagree by more than the kink tolerance.
    pub kink_detected: bool,
    /// Slope over `[ε₀ − h, ε₀]`; at ε₀ = 0 the slope over `[0, h/2]`.
    pub left_slope: f64,
    /// Slope over `[ε₀, ε₀ + h]`.
    pub right_slope: f64,
    pub l_at_eps0: f64,
    pub l_error: f64,
}

/// Slope of `ε ↦ L(β, z; ε)/2π` at `p.eps`, from the exponent of `N^z`.
///
/// At ε₀ = 0, where L is even, the slope is one-sided,
/// `[L(h) − L(0)]/(2πh)`, and the kink probe compares it with the slope over
/// `[0, h/2]`. Elsewhere both one-sided slopes are computed; the central
/// difference is reported when they agree and the right slope otherwise.
pub fn acceleration(beta: &Frequency, p: SpectralParameter, cfg: &AccelerationConfig) -> Result<AccelerationEstimate> {
    if !(cfg.h > 0.0) {
        return Err(Error::InvalidArgument("acceleration step must be positive".into()));
    }
    let l = |eps: f64| lyapunov(CocycleKind::N, beta, p.with_eps(eps), &cfg.lyapunov);
    let (eps0, h) = (p.eps, cfg.h);
    let base = l(eps0)?;
    let (omega, left, right) = if eps0 == 0.0 {
        let full = (l(h)?.value - base.value) / (TAU * h);
        let half = (l(h / 2.0)?.value - base.value) / (TAU * h / 2.0);
        (full, half, full)
    } else {
        let lp = l(eps0 + h)?.value;
        let lm = l(eps0 - h)?.value;
        let right = (lp - base.value) / (TAU * h);
        let left = (base.value - lm) / (TAU * h);
        let omega = if (right - left).abs() <= cfg.kink_tolerance { (lp - lm) / (2.0 * TAU * h) } else { right };
        (omega, left, right)
    };
    let rounded = omega.round();
    Ok(AccelerationEstimate {
        omega,
        omega_rounded: rounded as i64,
        resolved: (omega - rounded).abs() <= 0.25,
        kink_detected: (right - left).abs() > cfg.kink_tolerance,
        left_slope: left,
        right_slope: right,
        l_at_eps0: base.value,
        l_error: base.error,
    })
}
