use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_n, CocycleProduct, SpectralParameter, RENORM_INTERVAL};
use crate::error::{Error, Result};
use crate::mat2::{norm2, Mat2};
use crate::torus::Frequency;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DsVerdict {
    Ds,
    NotDs,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsConfig {
    /// Number of phases; the grid is `(i + ½)/grid`.
    pub grid: usize,
    /// Largest iterate inspected; checkpoints are 1, 2, 4, … up to this.
    pub n_max: usize,
    pub gap_threshold: f64,
    /// Falling back below this ratio late in the checkpoints means NOT_DS.
    pub no_gap_threshold: f64,
    /// Radians between the pushed-forward and the recomputed top direction.
    pub cone_angle: f64,
}

impl Default for DsConfig {
    fn default() -> Self {
        DsConfig { grid: 512, n_max: 256, gap_threshold: 10.0, no_gap_threshold: 2.0, cone_angle: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsWitness {
    /// Checkpoint the verdict was read at.
    pub n: usize,
    /// First checkpoint from which the gap threshold held through `n_max`.
    pub onset: Option<usize>,
    /// `min_θ σ1/σ2` of `N_n` over the grid (may be `inf`).
    pub min_ratio: f64,
    pub grid_step: f64,
    /// Largest angle between `N(θ+nβ)·u_n(θ)` and `u_n(θ+β)`, when checked.
    pub max_cone_angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsReport {
    pub verdict: DsVerdict,
    pub witness: DsWitness,
    /// `(n, min ratio)` at each checkpoint.
    pub checkpoints: Vec<(usize, f64)>,
}

fn checkpoints(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 1;
    while n < n_max {
        out.push(n);
        n *= 2;
    }
    out.push(n_max);
    out
}

/// `log(σ1/σ2)` of `N_n(θ)` at every checkpoint, using
/// `σ1σ2 = |det N_n| = ∏ 4|cos 2π(θ + jβ + iε)|²`.
fn log_ratios(beta: &Frequency, p: SpectralParameter, theta: f64, marks: &[usize]) -> Vec<f64> {
    let mut prod = CocycleProduct::identity();
    let mut log_det = 0.0;
    let mut out = Vec::with_capacity(marks.len());
    let mut next = 0;
    let n_max = *marks.last().unwrap();
    for j in 0..n_max {
        let x = beta.phase(j as i64, theta);
        let c = Complex64::new(TAU * x, TAU * p.eps).cos();
        log_det += (4.0 * c.norm_sqr()).ln();
        prod.push(eval_n(p, x), (j + 1) % RENORM_INTERVAL == 0);
        while next < marks.len() && marks[next] == j + 1 {
            let log_s1 = prod.log_norm();
            let r = 2.0 * log_s1 - log_det;
            out.push(if r.is_nan() { f64::INFINITY } else { r });
            next += 1;
        }
    }
    out
}

fn top_direction(beta: &Frequency, p: SpectralParameter, theta: f64, n: usize) -> [Complex64; 2] {
    let mut prod = CocycleProduct::identity();
    for j in 0..n {
        prod.push(eval_n(p, beta.phase(j as i64, theta)), (j + 1) % RENORM_INTERVAL == 0);
    }
    prod.matrix.top_left_singular_vector()
}

/// Angle between the complex lines spanned by `a` and `b`.
fn line_angle(a: [Complex64; 2], b: [Complex64; 2]) -> f64 {
    let dot = a[0].conj() * b[0] + a[1].conj() * b[1];
    let c = (dot.norm() / (norm2(a) * norm2(b))).min(1.0);
    c.acos()
}

/// Numerical test for a dominated splitting of `(β, N^z)` on the torus.
///
/// DS when `min_θ σ1/σ2(N_n(θ)) ≥ gap_threshold` from some checkpoint on
/// through `n_max`, and the top singular direction field of `N_{n_max}` is
/// carried into itself by one step of the cocycle (cone criterion, angle
/// below `cone_angle` everywhere on the grid). NOT_DS when the minimal ratio
/// keeps falling back below `no_gap_threshold` in the tail of the
/// checkpoints, i.e. no uniform gap develops. Otherwise UNDECIDED. A grid
/// phase where `N` is singular contributes an infinite ratio.
pub fn dominated_splitting_check(beta: &Frequency, p: SpectralParameter, cfg: &DsConfig) -> Result<DsReport> {
    if cfg.grid == 0 || cfg.n_max == 0 {
        return Err(Error::InvalidArgument("ds check needs a non-empty grid and n_max >= 1".into()));
    }
    let marks = checkpoints(cfg.n_max);
    let grid_step = 1.0 / cfg.grid as f64;
    let thetas: Vec<f64> = (0..cfg.grid).map(|i| (i as f64 + 0.5) * grid_step).collect();
    let per_theta: Vec<Vec<f64>> = thetas.par_iter().map(|&t| log_ratios(beta, p, t, &marks)).collect();
    let min_log: Vec<f64> = (0..marks.len())
        .map(|k| per_theta.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let ratios: Vec<(usize, f64)> = marks.iter().zip(&min_log).map(|(&n, &l)| (n, l.exp())).collect();

    let last = marks.len() - 1;
    let log_gap = cfg.gap_threshold.ln();
    let onset = (0..=last).find(|&k| min_log[k..].iter().all(|&l| l >= log_gap));
    if let Some(k0) = onset {
        let angle = cone_defect(beta, p, &thetas, cfg.n_max);
        let witness = DsWitness {
            n: cfg.n_max,
            onset: Some(marks[k0]),
            min_ratio: ratios[last].1,
            grid_step,
            max_cone_angle: Some(angle),
        };
        let verdict = if angle < cfg.cone_angle { DsVerdict::Ds } else { DsVerdict::Undecided };
        return Ok(DsReport { verdict, witness, checkpoints: ratios });
    }
    // tail: the last quarter of the doubling range, at least three checkpoints
    let tail_start = last.saturating_sub((marks.len() / 4).max(2));
    let (k_min, _) = (tail_start..=last)
        .map(|k| (k, min_log[k]))
        .fold((last, f64::INFINITY), |acc, (k, l)| if l < acc.1 { (k, l) } else { acc });
    let verdict = if min_log[k_min] < cfg.no_gap_threshold.ln() { DsVerdict::NotDs } else { DsVerdict::Undecided };
    let witness = DsWitness { n: marks[k_min], onset: None, min_ratio: ratios[k_min].1, grid_step, max_cone_angle: None };
    Ok(DsReport { verdict, witness, checkpoints: ratios })
}

/// Largest angle on the grid between `N(θ+nβ)·u_n(θ)` and `u_n(θ+β)`.
fn cone_defect(beta: &Frequency, p: SpectralParameter, thetas: &[f64], n: usize) -> f64 {
    thetas
        .par_iter()
        .map(|&t| {
            let u = top_direction(beta, p, t, n);
            let step: Mat2 = eval_n(p, beta.phase(n as i64, t));
            let pushed = step.apply(u);
            if norm2(pushed) < 1e-12 {
                // u lies in the kernel of a singular fibre; nothing to compare
                return 0.0;
            }
            let target = top_direction(beta, p, beta.phase(1, t), n);
            line_angle(pushed, target)
        })
        .reduce(|| 0.0, f64::max)
}
