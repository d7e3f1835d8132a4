//! Fourier duality between walk eigenvectors and the transfer cocycle.
//!
//! For finitely supported `ψ`, `ψ̌(x) = Σ_n ψ_n e^{2πinx}` is a trigonometric
//! polynomial and the mixed fields `w↑ = ψ̌↑ + iψ̌↓`, `w↓ = iψ̌↑ + ψ̌↓` can
//! be evaluated exactly at any shift of the grid by modulating the
//! coefficients before the FFT; no interpolation is involved.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cocycle::{eval_m, SpectralParameter};
use crate::error::{Error, Result};
use crate::mat2::norm2;
use crate::operators::{apply_update, decoupled_truncation, OperatorKind, WalkState};
use crate::spectral::diagonalize;
use crate::torus::{Frequency, TorusPoint};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The mixed dual fields of a finitely supported walk state on a uniform
/// grid `x_j = j/G`.
#[derive(Clone, Debug)]
pub struct DualPair {
    pub grid_size: usize,
    pub w_up: Vec<Complex64>,
    pub w_down: Vec<Complex64>,
    source: WalkState,
}

/// `ψ̌↑, ψ̌↓` on the grid `j/G + offset`.
fn synthesize(state: &WalkState, grid: usize, offset: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut up = vec![Complex64::new(0.0, 0.0); grid];
    let mut down = up.clone();
    for (j, a) in state.amps.iter().enumerate() {
        let n = state.first_site + j as i64;
        let slot = n.rem_euclid(grid as i64) as usize;
        let phase = Complex64::from_polar(1.0, TAU * n as f64 * offset);
        up[slot] += a[0] * phase;
        down[slot] += a[1] * phase;
    }
    let fft = FftPlanner::new().plan_fft_inverse(grid);
    fft.process(&mut up);
    fft.process(&mut down);
    (up, down)
}

fn mix(up: &[Complex64], down: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let wu = up.iter().zip(down).map(|(&u, &d)| u + I * d).collect();
    let wd = up.iter().zip(down).map(|(&u, &d)| I * u + d).collect();
    (wu, wd)
}

impl DualPair {
    /// Mixed fields at `x_j + offset` for every grid point.
    pub fn sample(&self, offset: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        if offset == 0.0 {
            return (self.w_up.clone(), self.w_down.clone());
        }
        let (u, d) = synthesize(&self.source, self.grid_size, offset);
        mix(&u, &d)
    }

    /// Normalised grid norm `((1/G) Σ |w↑|² + |w↓|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.w_up.iter().chain(&self.w_down).map(|z| z.norm_sqr()).sum();
        (s / self.grid_size as f64).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.w_up.iter().zip(&self.w_down).map(|(&u, &d)| norm2([u, d])).fold(0.0, f64::max)
    }

    /// Writes `x, re_w_up, im_w_up, re_w_down, im_w_down`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        use crate::output::fmt_f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re_w_up", "im_w_up", "re_w_down", "im_w_down"])?;
        for j in 0..self.grid_size {
            let (u, d) = (self.w_up[j], self.w_down[j]);
            w.write_record([
                fmt_f64(j as f64 / self.grid_size as f64),
                fmt_f64(u.re),
                fmt_f64(u.im),
                fmt_f64(d.re),
                fmt_f64(d.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fourier synthesis of `ψ` on a grid of `grid_size` points, which must be a
/// power of two at least twice the number of sites in the support.
pub fn transform(psi: &WalkState, grid_size: usize) -> Result<DualPair> {
    let support = psi.amps.len();
    if !grid_size.is_power_of_two() || grid_size < 2 * support {
        return Err(Error::GridTooSmall { grid: grid_size, support });
    }
    if psi.amps.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("walk state"));
    }
    let (u, d) = synthesize(psi, grid_size, 0.0);
    let (w_up, w_down) = mix(&u, &d);
    Ok(DualPair { grid_size, w_up, w_down, source: psi.clone() })
}

/// Pointwise residuals of the dual equations at one `x`:
///
/// `R↑ = z w↑(x) − cos(2πx)e^{2πiθ}w↑(x+β) − sin(2πx)e^{−2πiθ}w↓(x−β)`
/// `R↓ = z w↓(x) + sin(2πx)e^{2πiθ}w↑(x+β) − cos(2πx)e^{−2πiθ}w↓(x−β)`.
fn dual_residuals_at(z: Complex64, theta: f64, x: f64, w: [Complex64; 2], w_plus_up: Complex64, w_minus_down: Complex64) -> (Complex64, Complex64) {
    let (s, c) = (TAU * x).sin_cos();
    let a = Complex64::from_polar(1.0, TAU * theta);
    let fwd = a * w_plus_up;
    let back = a.conj() * w_minus_down;
    (z * w[0] - c * fwd - s * back, z * w[1] + s * fwd - c * back)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualResidual {
    pub residual_up: f64,
    pub residual_down: f64,
    /// β-shifts are exact coefficient modulations, so this is always 0.
    pub interpolation_error: f64,
}

/// Relative grid-ℓ² residuals of the two dual equations.
pub fn dual_residual(pair: &DualPair, beta: &Frequency, theta: TorusPoint, z: Complex64) -> Result<DualResidual> {
    let norm = pair.norm();
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    let b = beta.value();
    let (plus_up, _) = pair.sample(b);
    let (_, minus_down) = pair.sample(-b);
    let g = pair.grid_size;
    let (mut ru, mut rd) = (0.0, 0.0);
    for j in 0..g {
        let x = j as f64 / g as f64;
        let (u, d) = dual_residuals_at(z, theta.value(), x, [pair.w_up[j], pair.w_down[j]], plus_up[j], minus_down[j]);
        ru += u.norm_sqr();
        rd += d.norm_sqr();
    }
    let scale = (g as f64).sqrt() * norm;
    Ok(DualResidual { residual_up: ru.sqrt() / scale, residual_down: rd.sqrt() / scale, interpolation_error: 0.0 })
}

/// Defect of `M^z(x)(e^{−2πiθ}w↓(x−β), w↑(x))ᵀ = (w↓(x), e^{2πiθ}w↑(x+β))ᵀ`
/// at one point, given the field values it involves. Errors at a pole of
/// `M^z`.
pub fn semi_conjugacy_defect_at(
    z: Complex64,
    theta: f64,
    x: f64,
    w: [Complex64; 2],
    w_plus_up: Complex64,
    w_minus_down: Complex64,
) -> Result<f64> {
    let a = Complex64::from_polar(1.0, TAU * theta);
    let m = eval_m(SpectralParameter::new(z, 0.0)?, x)?;
    let lhs = m.apply([a.conj() * w_minus_down, w[0]]);
    let rhs = [w[1], a * w_plus_up];
    Ok(norm2([lhs[0] - rhs[0], lhs[1] - rhs[1]]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiConjugacyReport {
    /// `max_j |defect(x_j)| / ‖w‖_∞` over the offset grid.
    pub max_defect: f64,
    /// `max_j |sec 2πx_j|(2|R↑(x_j)| + |R↓(x_j)|) / ‖w‖_∞`, which the defect
    /// can never exceed.
    pub algebraic_bound: f64,
    pub max_sec: f64,
    /// Offset grid points closer than 1e−6 turns to a pole of `M^z`.
    pub pole_warnings: usize,
}

/// Checks the semi-conjugacy on the grid `x_j = (j + ½)/G`, which avoids the
/// poles of `M^z` at `1/4, 3/4` when `G` is a power of two.
pub fn semi_conjugacy_check(pair: &DualPair, beta: &Frequency, theta: TorusPoint, z: Complex64) -> Result<SemiConjugacyReport> {
    let sup = pair.sup_norm();
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let g = pair.grid_size;
    let off = 0.5 / g as f64;
    let b = beta.value();
    let (w_up, w_down) = pair.sample(off);
    let (plus_up, _) = pair.sample(off + b);
    let (_, minus_down) = pair.sample(off - b);
    let mut report = SemiConjugacyReport { max_defect: 0.0, algebraic_bound: 0.0, max_sec: 0.0, pole_warnings: 0 };
    for j in 0..g {
        let x = (j as f64 + 0.5) / g as f64;
        let w = [w_up[j], w_down[j]];
        let d = semi_conjugacy_defect_at(z, theta.value(), x, w, plus_up[j], minus_down[j])?;
        let (ru, rd) = dual_residuals_at(z, theta.value(), x, w, plus_up[j], minus_down[j]);
        let sec = 1.0 / (TAU * x).cos().abs();
        if (x - 0.25).abs() < 1e-6 || (x - 0.75).abs() < 1e-6 {
            report.pole_warnings += 1;
        }
        report.max_defect = report.max_defect.max(d / sup);
        report.algebraic_bound = report.algebraic_bound.max(sec * (2.0 * ru.norm() + rd.norm()) / sup);
        report.max_sec = report.max_sec.max(sec);
    }
    Ok(report)
}

/// One eigenpair of a truncation pushed through the transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorDuality {
    pub eigenvalue: Complex64,
    pub residual_up: f64,
    pub residual_down: f64,
    /// `‖(U − z)ψ‖/‖ψ‖` for the full-line walk: the part of the residual
    /// caused by the two cut sites.
    pub boundary_defect: f64,
    pub semi_conjugacy: SemiConjugacyReport,
}

/// Full check on one decoupled truncation, over all of its eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// Medians over the eigenvectors.
    pub residual_up: f64,
    pub residual_down: f64,
    pub boundary_defect: f64,
    pub interpolation_error: f64,
    /// Matrix dimension `2L`.
    pub truncation_size: usize,
    pub grid_size: usize,
    /// Eigenvectors whose semi-conjugacy defect exceeded the algebraic bound.
    pub bound_violations: usize,
    /// Largest `max_defect / algebraic_bound` over the eigenvectors.
    pub worst_bound_ratio: f64,
    /// The eigenvector with the median `residual_up`.
    pub median: EigenvectorDuality,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) }
}

/// Checks one eigenpair of the full-line walk restricted to a finite window.
pub fn eigenvector_duality(beta: &Frequency, theta: TorusPoint, psi: &WalkState, z: Complex64) -> Result<EigenvectorDuality> {
    let image = apply_update(beta, theta, psi)?;
    let mut err = 0.0;
    for n in image.first_site..=image.last_site() {
        let (u, v) = (image.at(n), psi.at(n));
        err += (u[0] - z * v[0]).norm_sqr() + (u[1] - z * v[1]).norm_sqr();
    }
    let grid_size = (2 * psi.amps.len()).next_power_of_two();
    let pair = transform(psi, grid_size)?;
    let res = dual_residual(&pair, beta, theta, z)?;
    Ok(EigenvectorDuality {
        eigenvalue: z,
        residual_up: res.residual_up,
        residual_down: res.residual_down,
        boundary_defect: err.sqrt() / psi.norm(),
        semi_conjugacy: semi_conjugacy_check(&pair, beta, theta, z)?,
    })
}

/// Builds the decoupled truncation on sites `[−L/2, L/2]` and measures how
/// well the dual fields of each of its eigenvectors satisfy the dual
/// equations.
pub fn duality_check(beta: &Frequency, theta: TorusPoint, half_size: usize) -> Result<DualityReport> {
    if half_size < 2 || !half_size.is_multiple_of(2) {
        return Err(Error::InvalidArgument("duality truncation needs an even L >= 2".into()));
    }
    let l = half_size as i64;
    let op = decoupled_truncation(beta, theta, -l / 2, l / 2)?;
    let offset = match op.descriptor.kind {
        OperatorKind::DecoupledTruncation { basis_offset, .. } => basis_offset,
        _ => unreachable!("decoupled_truncation returns a truncation"),
    };
    let eig = diagonalize(&op, true)?;
    let vecs = eig.vectors.expect("vectors requested");
    let dim = op.dimension();

    // local index i is global basis index offset + i
    let first_site = offset.div_euclid(2);
    let last_site = (offset + dim as i64 - 1).div_euclid(2);
    let state = |col: usize| {
        let mut amps = vec![[Complex64::new(0.0, 0.0); 2]; (last_site - first_site + 1) as usize];
        for i in 0..dim {
            let g = offset + i as i64;
            amps[(g.div_euclid(2) - first_site) as usize][g.rem_euclid(2) as usize] = vecs[(i, col)];
        }
        WalkState { first_site, amps }
    };
    let per_vector = (0..dim)
        .into_par_iter()
        .map(|c| eigenvector_duality(beta, theta, &state(c), eig.values[c]))
        .collect::<Result<Vec<_>>>()?;

    let mut up: Vec<f64> = per_vector.iter().map(|e| e.residual_up).collect();
    let mut down: Vec<f64> = per_vector.iter().map(|e| e.residual_down).collect();
    let mut boundary: Vec<f64> = per_vector.iter().map(|e| e.boundary_defect).collect();
    let residual_up = median(&mut up);
    let ratio = |e: &EigenvectorDuality| {
        let s = e.semi_conjugacy;
        if s.algebraic_bound > 0.0 { s.max_defect / s.algebraic_bound } else if s.max_defect > 0.0 { f64::INFINITY } else { 0.0 }
    };
    let median_vector = *per_vector
        .iter()
        .min_by(|a, b| (a.residual_up - residual_up).abs().total_cmp(&(b.residual_up - residual_up).abs()))
        .expect("non-empty spectrum");
    Ok(DualityReport {
        residual_up,
        residual_down: median(&mut down),
        boundary_defect: median(&mut boundary),
        interpolation_error: 0.0,
        truncation_size: dim,
        grid_size: (2 * (last_site - first_site + 1) as usize).next_power_of_two(),
        bound_violations: per_vector.iter().filter(|e| e.semi_conjugacy.max_defect > e.semi_conjugacy.algebraic_bound).count(),
        worst_bound_ratio: per_vector.iter().map(ratio).fold(0.0, f64::max),
        median: median_vector,
    })
}

/// Closed-form Bloch solution of `U_{0,θ}ψ = zψ`: `ψ_n = e^{2πikn}v`. Its
/// dual field is concentrated at `x₀ = −k`; returns `(x₀, z, w(x₀))`.
pub fn bloch_dual_point(theta: f64, k: f64) -> Result<(f64, Complex64, [Complex64; 2])> {
    let beta = Frequency::rational(0, 1)?;
    let op = crate::operators::floquet_block(&beta, TorusPoint::new(theta)?, k)?;
    let eig = diagonalize(&op, true)?;
    let v = eig.vectors.expect("vectors requested");
    let (a, b) = (v[(0, 0)], v[(1, 0)]);
    let w = [a + I * b, I * a + b];
    Ok((crate::torus::wrap(-k), eig.values[0], w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_up_transforms_to_constants() {
        let psi = WalkState::localized(0, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let pair = transform(&psi, 8).unwrap();
        for j in 0..8 {
            assert!((pair.w_up[j] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            assert!((pair.w_down[j] - I).norm() < 1e-15);
        }
        assert!((pair.norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_grid_rejected() {
        let psi = WalkState { first_site: 0, amps: vec![[Complex64::new(1.0, 0.0); 2]; 5] };
        assert!(matches!(transform(&psi, 8), Err(Error::GridTooSmall { .. })));
        assert!(matches!(transform(&psi, 12), Err(Error::GridTooSmall { .. })));
        assert!(transform(&psi, 16).is_ok());
    }

    #[test]
    fn bloch_point_satisfies_semi_conjugacy() {
        for (theta, k) in [(0.1, 0.13), (0.37, 0.4), (0.05, 0.9)] {
            let (x0, z, w) = bloch_dual_point(theta, k).unwrap();
            // β = 0: every shift is the identity
            let d = semi_conjugacy_defect_at(z, theta, x0, w, w[0], w[1]).unwrap();
            assert!(d < 1e-10, "theta={theta} k={k}: {d}");
        }
    }
}
