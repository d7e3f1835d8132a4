//! Fixed-size 2×2 complex matrices for the transfer-matrix kernels.

use std::ops::{Mul, Sub};

use num_complex::Complex64;

/// Row-major 2×2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Mat2 {
        Mat2([[a, b], [c, d]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: Complex64) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_real(&self, s: f64) -> Mat2 {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn adjoint(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Largest absolute entry; cheap stand-in for a norm when rescaling.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Singular values `(σ1, σ2)` with `σ1 ≥ σ2`.
    ///
    /// `σ1² + σ2² = ‖A‖_F²` and `σ1σ2 = |det A|`; σ2 is recovered from the
    /// determinant to avoid cancellation when the matrix is nearly singular.
    pub fn singular_values(&self) -> (f64, f64) {
        let f2 = self.frobenius_sq();
        let d = self.det().norm();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
        let s1 = ((f2 + disc) / 2.0).sqrt();
        let s2 = if s1 > 0.0 { d / s1 } else { 0.0 };
        (s1, s2)
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Unit left singular vector for σ1, i.e. the top eigenvector of `AA*`.
    pub fn top_left_singular_vector(&self) -> [Complex64; 2] {
        let h = *self * self.adjoint();
        // Hermitian [[a, b], [b̄, c]]
        let a = h.0[0][0].re;
        let b = h.0[0][1];
        let c = h.0[1][1].re;
        let lambda = 0.5 * (a + c) + (0.25 * (a - c).powi(2) + b.norm_sqr()).sqrt();
        // Two candidate eigenvectors; keep the better-conditioned one.
        let v1 = [b, Complex64::new(lambda - a, 0.0)];
        let v2 = [Complex64::new(lambda - c, 0.0), b.conj()];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        if n == 0.0 {
            // A multiple of a unitary (or zero): every direction is top.
            return [ONE, ZERO];
        }
        let n = n.sqrt();
        [v[0] / n, v[1] / n]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

/// Euclidean norm of a complex 2-vector.
pub fn norm2(v: [Complex64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}
