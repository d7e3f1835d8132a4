//! Transfer cocycles of the walk over the rotation `θ ↦ θ + β`.
//!
//! Three evaluations of the same object are provided: the unimodular `M^z`
//! (with poles where `cos 2πx = 0`), the entire renormalisation
//! `N^z = −2i cos(2πx)·M^z`, and the Gesztesy–Zinchenko factors whose
//! product is `A^z = N^z / (−2i)`. The torus variable may be complexified,
//! `x ↦ x + iε`.

mod ds;
mod lyapunov;

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::operators::{CoinFieldPair, WalkCoinPair};
use crate::torus::Frequency;

pub use ds::{dominated_splitting_check, DsConfig, DsReport, DsVerdict, DsWitness};
pub use lyapunov::{
    acceleration, default_iterations, lyapunov, lyapunov_profile, AccelerationConfig, AccelerationEstimate,
    LyapunovConfig, LyapunovEstimate, LyapunovProfile,
};

/// `(z, ε)`: the spectral parameter and the imaginary shift of the torus
/// variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    pub z: Complex64,
    pub eps: f64,
}

impl SpectralParameter {
    pub fn new(z: Complex64, eps: f64) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() || !eps.is_finite() {
            return Err(Error::NonFinite("spectral parameter"));
        }
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument("z must be nonzero".into()));
        }
        Ok(SpectralParameter { z, eps })
    }

    /// `z = e^{2πit}` at real offset `eps`.
    pub fn on_circle(t: f64, eps: f64) -> Result<Self> {
        Self::new(Complex64::from_polar(1.0, TAU * t), eps)
    }

    pub fn is_unimodular(&self) -> bool {
        (self.z.norm() - 1.0).abs() < 1e-12
    }

    pub fn with_eps(self, eps: f64) -> Self {
        SpectralParameter { eps, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CocycleKind {
    M,
    N,
    GzF,
    GzG,
    GzProduct,
}

/// Below this `|cos 2π(x+iε)|` the sec factor of `M^z` is treated as a pole.
pub const POLE_GUARD: f64 = 1e-13;

fn sin_cos(x: f64, eps: f64) -> (Complex64, Complex64) {
    let w = Complex64::new(TAU * x, TAU * eps);
    (w.sin(), w.cos())
}

/// `A^z(x) = [[z⁻¹, −sin], [−sin, z]]` at `x + iε`.
fn walk_a(p: SpectralParameter, sin: Complex64) -> Mat2 {
    Mat2::new(p.z.inv(), -sin, -sin, p.z)
}

/// `M^z(x + iε) = sec·[[z⁻¹, −sin], [−sin, z]]`.
pub fn eval_m(p: SpectralParameter, x: f64) -> Result<Mat2> {
    let (s, c) = sin_cos(x, p.eps);
    if c.norm() < POLE_GUARD {
        return Err(Error::Pole { x });
    }
    Ok(walk_a(p, s).scale(c.inv()))
}

/// `N^z(x + iε) = [[−2iz⁻¹, 2i sin], [2i sin, −2iz]]`.
pub fn eval_n(p: SpectralParameter, x: f64) -> Mat2 {
    let (s, _) = sin_cos(x, p.eps);
    walk_a(p, s).scale(Complex64::new(0.0, -2.0))
}

/// Which GZ matrix to return from [`eval_gz`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GzFactor {
    F,
    G,
    Product,
}

/// `A_f = [[−α_f, 1], [1, −ᾱ_f]]` and `A_g = [[−ᾱ_g, z], [z⁻¹, −α_g]]` for
/// a coin pair whose coefficients continue analytically to `x + iε`.
pub fn gz_factors<P: CoinFieldPair + ?Sized>(pair: &P, p: SpectralParameter, x: f64) -> Result<(Mat2, Mat2)> {
    let a = pair
        .analytic(Complex64::new(x, p.eps))
        .ok_or_else(|| Error::InvalidArgument("coin pair has no analytic continuation".into()))?;
    let one = Complex64::new(1.0, 0.0);
    let af = Mat2::new(-a.alpha_f, one, one, -a.alpha_f_star);
    let ag = Mat2::new(-a.alpha_g_star, p.z, p.z.inv(), -a.alpha_g);
    Ok((af, ag))
}

/// GZ matrices of the walk pair.
pub fn eval_gz(p: SpectralParameter, x: f64, which: GzFactor) -> Mat2 {
    let (af, ag) = gz_factors(&WalkCoinPair, p, x).expect("walk pair is entire");
    match which {
        GzFactor::F => af,
        GzFactor::G => ag,
        GzFactor::Product => af * ag,
    }
}

/// One fibre map of the given kind.
pub fn eval(kind: CocycleKind, p: SpectralParameter, x: f64) -> Result<Mat2> {
    Ok(match kind {
        CocycleKind::M => eval_m(p, x)?,
        CocycleKind::N => eval_n(p, x),
        CocycleKind::GzF => eval_gz(p, x, GzFactor::F),
        CocycleKind::GzG => eval_gz(p, x, GzFactor::G),
        CocycleKind::GzProduct => eval_gz(p, x, GzFactor::Product),
    })
}

/// `A_n(x₀) = A(x₀ + (n−1)β)···A(x₀)` stored as `exp(log_scale)·matrix`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocycleProduct {
    pub matrix: Mat2,
    pub log_scale: f64,
}

impl CocycleProduct {
    pub fn identity() -> Self {
        CocycleProduct { matrix: Mat2::IDENTITY, log_scale: 0.0 }
    }

    /// `log ‖A_n‖` (operator norm).
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.matrix.singular_values().0.ln()
    }

    /// `log σ1 − log σ2` of the product.
    pub fn log_singular_gap(&self) -> f64 {
        let (s1, s2) = self.matrix.singular_values();
        s1.ln() - s2.ln()
    }

    /// The product with the scale folded back in (may overflow).
    pub fn to_matrix(&self) -> Mat2 {
        self.matrix.scale_real(self.log_scale.exp())
    }

    /// Left-multiply by one more fibre map, renormalising when `renorm`.
    pub fn push(&mut self, a: Mat2, renorm: bool) {
        self.matrix = a * self.matrix;
        if renorm {
            let s = self.matrix.max_abs();
            if s > 0.0 && s.is_finite() {
                self.matrix = self.matrix.scale_real(1.0 / s);
                self.log_scale += s.ln();
            }
        }
    }
}

/// Steps between renormalisations of a running product.
pub const RENORM_INTERVAL: usize = 16;

/// The ordered product `A_n(x₀)` along the orbit of `x₀` under β.
pub fn iterate(kind: CocycleKind, beta: &Frequency, p: SpectralParameter, x0: f64, n: usize) -> Result<CocycleProduct> {
    let mut prod = CocycleProduct::identity();
    for j in 0..n {
        let a = eval(kind, p, beta.phase(j as i64, x0))?;
        prod.push(a, (j + 1) % RENORM_INTERVAL == 0);
    }
    if !prod.matrix.is_finite() {
        return Err(Error::NonFinite("cocycle product"));
    }
    Ok(prod)
}
