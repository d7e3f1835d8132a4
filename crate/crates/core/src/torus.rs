//! Arithmetic on the circle 𝕋 = ℝ/ℤ, continued fractions, rotation coins and
//! the elementary analytic quantities every other module consumes.
//!
//! Angles are measured in full turns throughout: a [`TorusPoint`] of `0.25`
//! is a quarter turn, and the coin at site `n` rotates by `2π(nβ + θ)`.

use std::f64::consts::{LN_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of 𝕋 stored as its representative in `[0, 1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint(f64);

impl TorusPoint {
    pub const ZERO: TorusPoint = TorusPoint(0.0);

    /// Reduces `x` modulo 1. Non-finite input is rejected.
    pub fn new(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite("torus coordinate"));
        }
        Ok(TorusPoint(wrap(x)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `self + t` reduced mod 1.
    pub fn shift(self, t: f64) -> TorusPoint {
        TorusPoint(wrap(self.0 + t))
    }

    /// Signed distance to the nearest integer translate, in `[-1/2, 1/2)`.
    pub fn signed_offset(self, other: TorusPoint) -> f64 {
        let d = self.0 - other.0;
        d - (d + 0.5).floor()
    }
}

/// `x mod 1` in `[0, 1)` for finite `x`.
pub(crate) fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduce a real number to the circle. See [`TorusPoint::new`].
pub fn reduce(x: f64) -> Result<TorusPoint> {
    TorusPoint::new(x)
}

/// A single convergent `p/q` of a continued fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergent {
    pub p: i64,
    pub q: i64,
}

impl Convergent {
    pub fn value(self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

/// A rotation frequency β together with its continued-fraction data.
///
/// When β is known exactly as a reduced fraction (built with
/// [`Frequency::rational`], or a CF expansion that terminated), orbit phases
/// `nβ + θ` are computed with integer arithmetic so that period-`q` coin
/// sequences repeat bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    value: f64,
    cf_terms: Vec<u64>,
    convergents: Vec<Convergent>,
    exact: Option<Convergent>,
}

/// Residual below which the Gauss map is considered to have hit a rational.
const CF_RESIDUAL_GUARD: f64 = 1e-13;
/// Partial quotients above this are float noise from a rational input.
const CF_QUOTIENT_GUARD: f64 = 1e12;
/// Denominators beyond this exceed what an f64 value of β can resolve.
const CF_DENOMINATOR_LIMIT: i64 = 100_000_000;

impl Frequency {
    /// The golden mean `(√5 − 1)/2 = [0; 1, 1, 1, …]`.
    pub fn golden() -> Frequency {
        cf_approximants((5f64.sqrt() - 1.0) / 2.0, 40).expect("golden mean is in (0,1)")
    }

    /// The silver mean `√2 − 1 = [0; 2, 2, 2, …]`.
    pub fn silver() -> Frequency {
        cf_approximants(2f64.sqrt() - 1.0, 30).expect("silver mean is in (0,1)")
    }

    /// The exact rational `p/q`, which must be in lowest terms with `q ≥ 1`
    /// and `0 ≤ p ≤ q`. Both `0/1` and `1/1` are accepted (they describe the
    /// same rotation).
    pub fn rational(p: i64, q: i64) -> Result<Frequency> {
        if q < 1 || p < 0 || p > q {
            return Err(Error::InvalidArgument(format!("rational frequency {p}/{q} must satisfy 0 <= p <= q, q >= 1")));
        }
        if gcd(p, q) != 1 {
            return Err(Error::NotCoprime { p, q });
        }
        let (cf_terms, convergents) = rational_cf(p, q);
        Ok(Frequency {
            value: p as f64 / q as f64,
            cf_terms,
            convergents,
            exact: Some(Convergent { p, q }),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn cf_terms(&self) -> &[u64] {
        &self.cf_terms
    }

    pub fn convergents(&self) -> &[Convergent] {
        &self.convergents
    }

    /// `Some(p/q)` when β is an exactly known rational.
    pub fn exact(&self) -> Option<Convergent> {
        self.exact
    }

    pub fn is_rational(&self) -> bool {
        self.exact.is_some()
    }

    /// The convergent with the given denominator, if it was stored.
    pub fn convergent_with_denominator(&self, q: i64) -> Option<Convergent> {
        self.convergents.iter().copied().find(|c| c.q == q)
    }

    /// Largest stored convergent denominator not exceeding `bound`.
    pub fn largest_denominator_at_most(&self, bound: i64) -> Option<i64> {
        self.convergents.iter().map(|c| c.q).filter(|&q| q <= bound).max()
    }

    /// The orbit point `nβ + θ` reduced mod 1.
    pub fn phase(&self, n: i64, theta: f64) -> f64 {
        match self.exact {
            Some(Convergent { p, q }) => {
                let k = (n as i128 * p as i128).rem_euclid(q as i128) as f64;
                wrap(k / q as f64 + theta)
            }
            None => wrap(n as f64 * self.value + theta),
        }
    }

    /// Human-readable label, `p/q` for exact rationals.
    pub fn label(&self) -> String {
        match self.exact {
            Some(c) => format!("{}/{}", c.p, c.q),
            None => format!("{:.15}", self.value),
        }
    }
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn rational_cf(p: i64, q: i64) -> (Vec<u64>, Vec<Convergent>) {
    // β = p/q = [0; a1, a2, …]; convergents start at p1/q1.
    let mut terms = Vec::new();
    let (mut num, mut den) = (p, q);
    if num == 0 || num == den {
        return (terms, vec![Convergent { p, q }]);
    }
    // skip the integer part (zero for p < q)
    num %= den;
    while num != 0 {
        let a = den / num;
        terms.push(a as u64);
        (num, den) = (den - a * num, num);
    }
    let convergents = convergents_from_terms(&terms);
    (terms, convergents)
}

fn convergents_from_terms(terms: &[u64]) -> Vec<Convergent> {
    // p_{-1}=1, q_{-1}=0; p_0=0, q_0=1 for β in (0,1)
    let (mut p_prev, mut q_prev) = (1i64, 0i64);
    let (mut p, mut q) = (0i64, 1i64);
    let mut out = Vec::with_capacity(terms.len());
    for &a in terms {
        let a = a as i64;
        let (pn, qn) = (a * p + p_prev, a * q + q_prev);
        (p_prev, q_prev, p, q) = (p, q, pn, qn);
        out.push(Convergent { p, q });
    }
    out
}

/// Continued-fraction expansion of `beta ∈ (0,1)` by the floating-point Gauss
/// map, returning at least `count` convergents unless the expansion
/// terminates (β rational to working precision) or the denominators outgrow
/// what an `f64` can resolve.
pub fn cf_approximants(beta: f64, count: usize) -> Result<Frequency> {
    if !beta.is_finite() {
        return Err(Error::NonFinite("frequency"));
    }
    if beta <= 0.0 || beta >= 1.0 {
        return Err(Error::FrequencyOutOfRange(beta));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut terms = Vec::new();
    let mut x = beta;
    let mut terminated = false;
    let (mut q_prev, mut q) = (0i64, 1i64);
    while terms.len() < count {
        let inv = 1.0 / x;
        let mut a = inv.floor();
        let mut residual = inv - a;
        if residual > 1.0 - CF_RESIDUAL_GUARD {
            a += 1.0;
            residual = 0.0;
        }
        if a > CF_QUOTIENT_GUARD {
            terminated = true;
            break;
        }
        let next_q = a as i64 * q + q_prev;
        if next_q > CF_DENOMINATOR_LIMIT {
            break;
        }
        terms.push(a as u64);
        (q_prev, q) = (q, next_q);
        if residual < CF_RESIDUAL_GUARD {
            terminated = true;
            break;
        }
        x = residual;
    }
    let convergents = convergents_from_terms(&terms);
    let exact = if terminated { convergents.last().copied() } else { None };
    Ok(Frequency { value: beta, cf_terms: terms, convergents, exact })
}

/// A real rotation coin `R_{2π·angle}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coin {
    pub angle: TorusPoint,
    /// Row-major `[[cos, −sin], [sin, cos]]`.
    pub matrix: [[f64; 2]; 2],
}

impl Coin {
    pub fn rotation(angle: TorusPoint) -> Coin {
        let (s, c) = (TAU * angle.value()).sin_cos();
        Coin { angle, matrix: [[c, -s], [s, c]] }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Frobenius norm of `CᵀC − I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let dot = m[0][i] * m[0][j] + m[1][i] * m[1][j];
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (dot - target).powi(2);
            }
        }
        acc.sqrt()
    }
}

/// The coin `R_{2π(nβ+θ)}` at site `n`.
pub fn coin(beta: &Frequency, theta: TorusPoint, n: i64) -> Coin {
    Coin::rotation(TorusPoint(beta.phase(n, theta.value())))
}

/// `∫_𝕋 log|cos 2π(θ + iε)| dθ`, computed by quadrature.
///
/// `|cos 2π(θ+iε)|² = cos² 2πθ + sinh² 2πε`. Folding the integrand onto a
/// quarter period puts the only (logarithmic, when ε = 0) singularity at the
/// origin, where the model term `log(4π²u² + sinh² 2πε)` is integrated in
/// closed form and the smooth remainder by composite Gauss–Legendre.
pub fn logcos_integral(eps: f64) -> Result<f64> {
    if !eps.is_finite() {
        return Err(Error::NonFinite("complexification offset"));
    }
    let s = (TAU * eps).sinh();
    let coarse = logcos_quarter(s, 32);
    let fine = logcos_quarter(s, 64);
    if (coarse - fine).abs() > 1e-11 * fine.abs().max(1.0) {
        return Err(Error::Quadrature { coarse, fine });
    }
    Ok(fine)
}

fn logcos_quarter(s: f64, panels: usize) -> f64 {
    // ∫_0^1 ½ log(cos² 2πθ + s²) dθ = 4 ∫_0^{1/4} ½ log(sin² 2πu + s²) du
    let c = TAU;
    let s2 = s * s;
    let a = 0.25;
    let model = |u: f64| -> f64 {
        // antiderivative of log(c²u² + s²)
        let base = u * (c * c * u * u + s2).ln() - 2.0 * u;
        if s == 0.0 {
            base
        } else {
            base + 2.0 * s.abs() / c * (c * u / s.abs()).atan()
        }
    };
    let model_integral = if s == 0.0 {
        // u log(c²u²) − 2u, the log term vanishing at u = 0
        a * (c * c * a * a).ln() - 2.0 * a
    } else {
        model(a) - model(0.0)
    };
    let remainder = |u: f64| -> f64 {
        let num = (c * u).sin().powi(2) + s2;
        let den = c * c * u * u + s2;
        if den == 0.0 {
            0.0
        } else {
            (num / den).ln()
        }
    };
    let (nodes, weights) = gauss_legendre(12);
    let h = a / panels as f64;
    let mut smooth = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            smooth += w * remainder(mid + 0.5 * h * x);
        }
    }
    smooth *= 0.5 * h;
    2.0 * (model_integral + smooth)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Result of [`cos_product`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosProduct {
    pub value: f64,
    /// Natural log of `value` (`-inf` when degenerate).
    pub log_value: f64,
    /// Some factor was exactly zero (θ + jβ ∈ {1/4, 3/4}).
    pub degenerate: bool,
}

/// `2^k ∏_{j<k} |cos 2π(θ + jβ)|`, accumulated in log space.
pub fn cos_product(beta: &Frequency, theta: TorusPoint, k: u64) -> Result<CosProduct> {
    if k == 0 {
        return Err(Error::InvalidArgument("cos_product needs k >= 1".into()));
    }
    let mut log_sum = 0.0;
    for j in 0..k as i64 {
        let x = beta.phase(j, theta.value());
        if x == 0.25 || x == 0.75 {
            return Ok(CosProduct { value: 0.0, log_value: f64::NEG_INFINITY, degenerate: true });
        }
        log_sum += (2.0 * (TAU * x).cos().abs()).ln();
    }
    Ok(CosProduct { value: log_sum.exp(), log_value: log_sum, degenerate: false })
}

/// Closed form of [`logcos_integral`]: `2π|ε| − log 2`.
pub fn logcos_closed_form(eps: f64) -> f64 {
    TAU * eps.abs() - LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce(1.25).unwrap().value(), 0.25);
        assert_eq!(reduce(-0.25).unwrap().value(), 0.75);
        assert_eq!(reduce(0.0).unwrap().value(), 0.0);
        assert!(reduce(f64::NAN).is_err());
        assert!(reduce(f64::INFINITY).is_err());
        // just below an integer must not produce 1.0
        let x = reduce(-1e-300).unwrap().value();
        assert!((0.0..1.0).contains(&x));
    }

    #[test]
    fn golden_denominators_are_fibonacci() {
        let f = cf_approximants((5f64.sqrt() - 1.0) / 2.0, 6).unwrap();
        let qs: Vec<i64> = f.convergents().iter().map(|c| c.q).take(6).collect();
        assert_eq!(qs, vec![1, 2, 3, 5, 8, 13]);
        assert!(!f.is_rational());
    }

    #[test]
    fn silver_denominators() {
        // [0; 2, 2, 2, …]: q = 2, 2·2+1 = 5, 2·5+2 = 12, 2·12+5 = 29
        let f = cf_approximants(2f64.sqrt() - 1.0, 4).unwrap();
        let qs: Vec<i64> = f.convergents().iter().map(|c| c.q).collect();
        assert_eq!(qs, vec![2, 5, 12, 29]);
        assert!(f.cf_terms().iter().all(|&a| a == 2));
    }

    #[test]
    fn rational_terminates() {
        let f = cf_approximants(1.0 / 3.0, 3).unwrap();
        assert!(f.is_rational());
        assert_eq!(f.convergents().last().copied(), Some(Convergent { p: 1, q: 3 }));
        assert_eq!(f.cf_terms(), &[3]);
    }

    #[test]
    fn cf_rejects_out_of_range() {
        assert!(matches!(cf_approximants(0.0, 3), Err(Error::FrequencyOutOfRange(_))));
        assert!(matches!(cf_approximants(1.5, 3), Err(Error::FrequencyOutOfRange(_))));
        assert!(cf_approximants(0.3, 0).is_err());
    }

    #[test]
    fn convergent_invariants() {
        for f in [Frequency::golden(), Frequency::silver(), cf_approximants(0.1234567, 12).unwrap()] {
            let cs = f.convergents();
            let terms = f.cf_terms();
            for n in 0..cs.len() {
                assert_eq!(gcd(cs[n].p, cs[n].q), 1);
                if n >= 2 {
                    let a = terms[n] as i64;
                    assert_eq!(cs[n].p, a * cs[n - 1].p + cs[n - 2].p);
                    assert_eq!(cs[n].q, a * cs[n - 1].q + cs[n - 2].q);
                }
                if n + 1 < cs.len() && cs[n + 1].q < 10_000_000 {
                    let err = (f.value() - cs[n].value()).abs();
                    assert!(err < 1.0 / (cs[n].q as f64 * cs[n + 1].q as f64));
                }
                if n >= 1 && cs[n].q < 10_000_000 {
                    let s0 = (cs[n - 1].value() - f.value()).signum();
                    let s1 = (cs[n].value() - f.value()).signum();
                    assert_eq!(s0, -s1, "convergents alternate around beta");
                }
            }
        }
    }

    #[test]
    fn rational_constructor() {
        let f = Frequency::rational(3, 5).unwrap();
        assert_eq!(f.exact(), Some(Convergent { p: 3, q: 5 }));
        assert_eq!(f.convergents().last().unwrap().q, 5);
        assert!(matches!(Frequency::rational(2, 4), Err(Error::NotCoprime { .. })));
        assert!(Frequency::rational(0, 1).is_ok());
        assert!(Frequency::rational(1, 1).is_ok());
        // phases of an exact rational repeat with period q
        for n in -20..20 {
            assert_eq!(f.phase(n, 0.1), f.phase(n + 5, 0.1));
        }
    }

    #[test]
    fn coin_examples() {
        let g = Frequency::golden();
        let c = coin(&g, TorusPoint::ZERO, 0);
        assert_eq!(c.matrix, [[1.0, 0.0], [0.0, 1.0]]);

        let c = coin(&g, reduce(0.25).unwrap(), 0);
        let expect = [[0.0, -1.0], [1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.matrix[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }

        let b = Frequency::rational(1, 8).unwrap();
        let c = coin(&b, TorusPoint::ZERO, 2);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.matrix[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn logcos_matches_closed_form() {
        for eps in [0.0, 0.1, -0.1, 0.5, -0.5, 2.0, -2.0] {
            let v = logcos_integral(eps).unwrap();
            assert!((v - logcos_closed_form(eps)).abs() < 1e-6, "eps={eps}: {v}");
        }
        assert!((logcos_integral(0.0).unwrap() + LN_2).abs() < 1e-10);
        assert!((logcos_integral(0.5).unwrap() - (PI - LN_2)).abs() < 1e-10);
        assert_eq!(logcos_integral(0.5).unwrap(), logcos_integral(-0.5).unwrap());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        // exact up to degree 11
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((integral - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn cos_product_examples() {
        let g = Frequency::golden();
        let p = cos_product(&g, TorusPoint::ZERO, 1).unwrap();
        assert!((p.value - 2.0).abs() < 1e-15 && !p.degenerate);
        let p = cos_product(&g, reduce(0.25).unwrap(), 1).unwrap();
        assert_eq!(p.value, 0.0);
        assert!(p.degenerate);
        assert!(cos_product(&g, TorusPoint::ZERO, 0).is_err());
    }
}
