//! The split-step walk and the finite matrices built from it.
//!
//! Basis convention for every finite matrix: the state at site `m` with spin
//! up is index `2m`, spin down is `2m + 1`, offset so that the first basis
//! vector of the block is index 0.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::torus::{coin, wrap, Convergent, Frequency, TorusPoint};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A finitely supported walk state: `amps[j]` holds `(ψ↑, ψ↓)` at site
/// `first_site + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    pub first_site: i64,
    pub amps: Vec<[Complex64; 2]>,
}

impl WalkState {
    pub fn localized(site: i64, up: Complex64, down: Complex64) -> WalkState {
        WalkState { first_site: site, amps: vec![[up, down]] }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a[0].norm_sqr() + a[1].norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn last_site(&self) -> i64 {
        self.first_site + self.amps.len() as i64 - 1
    }

    /// `(ψ↑, ψ↓)` at site `n`, zero outside the stored window.
    pub fn at(&self, n: i64) -> [Complex64; 2] {
        let j = n - self.first_site;
        if j < 0 || j >= self.amps.len() as i64 {
            [ZERO, ZERO]
        } else {
            self.amps[j as usize]
        }
    }
}

/// One step of the walk with coins supplied by `coin_at(n)` (row-major).
///
/// `[Uψ]↑(n) = c¹¹(n−1)ψ↑(n−1) + c¹²(n−1)ψ↓(n−1)` and
/// `[Uψ]↓(n) = c²¹(n+1)ψ↑(n+1) + c²²(n+1)ψ↓(n+1)`.
pub fn apply_update_with<F>(coin_at: F, state: &WalkState) -> WalkState
where
    F: Fn(i64) -> [[f64; 2]; 2],
{
    let first = state.first_site - 1;
    let mut out = vec![[ZERO, ZERO]; state.amps.len() + 2];
    for (j, a) in state.amps.iter().enumerate() {
        let n = state.first_site + j as i64;
        let c = coin_at(n);
        let moved_right = a[0] * c[0][0] + a[1] * c[0][1];
        let moved_left = a[0] * c[1][0] + a[1] * c[1][1];
        out[(n + 1 - first) as usize][0] += moved_right;
        out[(n - 1 - first) as usize][1] += moved_left;
    }
    WalkState { first_site: first, amps: out }
}

/// One step of the walk `U_{β,θ}` on a finitely supported state.
pub fn apply_update(beta: &Frequency, theta: TorusPoint, state: &WalkState) -> Result<WalkState> {
    if state.amps.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("walk state"));
    }
    Ok(apply_update_with(|n| coin(beta, theta, n).matrix, state))
}

/// The sign coin `[[0, −s], [s, 0]]`, `s = sgn sin 2π(nβ + θ)`.
fn decoupling_coin(sign: f64) -> [[f64; 2]; 2] {
    [[0.0, -sign], [sign, 0.0]]
}

/// Below this `|sin 2π(nβ+θ)|` the sign at a decoupling site is ambiguous.
const SIGN_GUARD: f64 = 1e-12;

/// What a finite matrix represents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// Compression of the walk to the block between two decoupling sites.
    DecoupledTruncation {
        requested_sites: (i64, i64),
        /// Decoupling sites actually used after any outward shift.
        sites: (i64, i64),
        signs: (f64, f64),
        /// Global basis index of local index 0, i.e. `2a + 1`.
        basis_offset: i64,
    },
    /// Bloch-reduced walk for rational β = p/q at quasi-momentum k.
    Floquet { p: i64, q: i64, k: f64 },
    /// Periodic generalized CMV product `L·M` at rational β.
    CmvPeriodic { p: i64, q: i64, k: f64, x: f64 },
}

/// JSON descriptor written next to the matrix blob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDescriptor {
    pub format_version: u32,
    #[serde(flatten)]
    pub kind: OperatorKind,
    pub dimension: usize,
    pub beta: f64,
    pub beta_exact: Option<Convergent>,
    pub theta: f64,
    /// Largest entry of `U*U − I`.
    pub unitarity_defect: f64,
    pub notes: Vec<String>,
    /// File name of the column-major little-endian complex f64 blob.
    pub blob: Option<String>,
}

pub const OPERATOR_FORMAT_VERSION: u32 = 1;

/// A dense finite operator together with its description.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub descriptor: OperatorDescriptor,
    pub matrix: Mat<Complex64>,
}

impl OperatorSpec {
    fn new(kind: OperatorKind, beta: &Frequency, theta: f64, matrix: Mat<Complex64>, notes: Vec<String>) -> Self {
        let unitarity_defect = unitarity_defect(&matrix);
        OperatorSpec {
            descriptor: OperatorDescriptor {
                format_version: OPERATOR_FORMAT_VERSION,
                kind,
                dimension: matrix.nrows(),
                beta: beta.value(),
                beta_exact: beta.exact(),
                theta,
                unitarity_defect,
                notes,
                blob: None,
            },
            matrix,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Writes `<stem>.json` and `<stem>.bin` into `dir`, returning the JSON
    /// path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let blob_name = format!("{stem}.bin");
        let mut descriptor = self.descriptor.clone();
        descriptor.blob = Some(blob_name.clone());
        let n = self.dimension();
        let mut bytes = Vec::with_capacity(16 * n * n);
        for c in 0..n {
            for r in 0..n {
                let z = self.matrix[(r, c)];
                bytes.extend_from_slice(&z.re.to_le_bytes());
                bytes.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        fs::write(dir.join(&blob_name), bytes)?;
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&json_path, serde_json::to_vec_pretty(&descriptor)?)?;
        Ok(json_path)
    }

    /// Reads a descriptor and its blob (resolved relative to the descriptor).
    pub fn read(json_path: &Path) -> Result<OperatorSpec> {
        let descriptor: OperatorDescriptor = serde_json::from_slice(&fs::read(json_path)?)?;
        let blob = descriptor
            .blob
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("descriptor has no blob".into()))?;
        let blob_path = json_path.parent().unwrap_or(Path::new(".")).join(blob);
        let bytes = fs::read(blob_path)?;
        let n = descriptor.dimension;
        if bytes.len() != 16 * n * n {
            return Err(Error::InvalidArgument(format!(
                "blob holds {} bytes, expected {} for dimension {n}",
                bytes.len(),
                16 * n * n
            )));
        }
        let values: Vec<Complex64> = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        let matrix = Mat::from_fn(n, n, |r, c| values[c * n + r]);
        Ok(OperatorSpec { descriptor, matrix })
    }
}

/// Largest entry modulus of `U*U − I`.
pub fn unitarity_defect(m: &Mat<Complex64>) -> f64 {
    let n = m.nrows();
    let g = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Restriction of the walk to the invariant block cut out by replacing the
/// coins at sites `n1 < n2` with sign coins.
///
/// The block spans `n1↓, (n1+1)↑, (n1+1)↓, …, (n2−1)↓, n2↑`, dimension
/// `2(n2 − n1)`. If `sin 2π(nβ+θ)` vanishes at a requested site the cut is
/// moved one site outward (repeatedly if needed) and a note is recorded.
pub fn decoupled_truncation(beta: &Frequency, theta: TorusPoint, n1: i64, n2: i64) -> Result<OperatorSpec> {
    if n1 >= n2 {
        return Err(Error::InvalidArgument(format!("decoupling sites must satisfy n1 < n2, got {n1}, {n2}")));
    }
    let sine = |n: i64| (TAU * beta.phase(n, theta.value())).sin();
    let mut notes = Vec::new();
    let mut a = n1;
    while sine(a).abs() < SIGN_GUARD {
        notes.push(format!("sin vanishes at site {a}; decoupling moved to {}", a - 1));
        a -= 1;
    }
    let mut b = n2;
    while sine(b).abs() < SIGN_GUARD {
        notes.push(format!("sin vanishes at site {b}; decoupling moved to {}", b + 1));
        b += 1;
    }
    let (sa, sb) = (sine(a).signum(), sine(b).signum());
    let coins = |n: i64| {
        if n == a {
            decoupling_coin(sa)
        } else if n == b {
            decoupling_coin(sb)
        } else {
            coin(beta, theta, n).matrix
        }
    };
    let offset = 2 * a + 1;
    let dim = (2 * (b - a)) as usize;
    let mut m = Mat::zeros(dim, dim);
    for col in 0..dim {
        let g = offset + col as i64;
        let (site, spin) = (g.div_euclid(2), g.rem_euclid(2) as usize);
        let mut amp = [ZERO, ZERO];
        amp[spin] = Complex64::new(1.0, 0.0);
        let image = apply_update_with(coins, &WalkState::localized(site, amp[0], amp[1]));
        for (j, pair) in image.amps.iter().enumerate() {
            let n = image.first_site + j as i64;
            for (s, &v) in pair.iter().enumerate() {
                if v == ZERO {
                    continue;
                }
                let row = 2 * n + s as i64 - offset;
                if row < 0 || row >= dim as i64 {
                    // cannot happen with sign coins at both ends
                    return Err(Error::InvalidArgument(format!("block leaks at site {n}")));
                }
                m[(row as usize, col)] = v;
            }
        }
    }
    let kind = OperatorKind::DecoupledTruncation {
        requested_sites: (n1, n2),
        sites: (a, b),
        signs: (sa, sb),
        basis_offset: offset,
    };
    Ok(OperatorSpec::new(kind, beta, theta.value(), m, notes))
}

fn rational_parts(beta: &Frequency) -> Result<(i64, i64)> {
    let c = beta
        .exact()
        .ok_or_else(|| Error::InvalidArgument("periodic operators need an exact rational frequency".into()))?;
    Ok((c.p, c.q))
}

/// The `2q × 2q` Bloch block of the walk for β = p/q under
/// `ψ(n + q) = e^{2πik} ψ(n)`.
pub fn floquet_block(beta: &Frequency, theta: TorusPoint, k: f64) -> Result<OperatorSpec> {
    let (p, q) = rational_parts(beta)?;
    if !k.is_finite() {
        return Err(Error::NonFinite("quasi-momentum"));
    }
    let dim = 2 * q as usize;
    let forward = Complex64::from_polar(1.0, TAU * k);
    let mut m = Mat::zeros(dim, dim);
    for site in 0..q {
        let c = coin(beta, theta, site).matrix;
        // up moves to site+1, wrapping q -> 0 picks up e^{-2πik}
        let (right, right_phase) = if site + 1 == q { (0, forward.conj()) } else { (site + 1, Complex64::new(1.0, 0.0)) };
        let (left, left_phase) = if site == 0 { (q - 1, forward) } else { (site - 1, Complex64::new(1.0, 0.0)) };
        for spin in 0..2 {
            let col = (2 * site) as usize + spin;
            m[(2 * right as usize, col)] += right_phase * c[0][spin];
            m[(2 * left as usize + 1, col)] += left_phase * c[1][spin];
        }
    }
    Ok(OperatorSpec::new(OperatorKind::Floquet { p, q, k }, beta, theta.value(), m, Vec::new()))
}

/// Coefficients of a coin pair continued to complex `x`, as needed by the
/// transfer matrices off the real torus. `*_star` is `x ↦ conj(α(conj x))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticCoefficients {
    pub alpha_f: Complex64,
    pub alpha_f_star: Complex64,
    pub alpha_g: Complex64,
    pub alpha_g_star: Complex64,
}

/// The two coin fields `f, g : 𝕋 → U(2)` of a generalized CMV operator, each
/// of the form `[[ᾱ, ρ], [ρ̄, −α]]`.
pub trait CoinFieldPair: Sync {
    fn f(&self, x: f64) -> Mat2;
    fn g(&self, x: f64) -> Mat2;

    /// Analytic continuation of the α coefficients, when the fields extend.
    fn analytic(&self, _x: Complex64) -> Option<AnalyticCoefficients> {
        None
    }
}

/// The pair that turns the generalized CMV form into the walk:
/// `f = [[0, 1], [1, 0]]`, `g(x) = [[sin 2πx, cos 2πx], [cos 2πx, −sin 2πx]]`,
/// with `U_{β,θ} = E_{θ−β}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct WalkCoinPair;

impl CoinFieldPair for WalkCoinPair {
    fn f(&self, _x: f64) -> Mat2 {
        let (o, l) = (ZERO, Complex64::new(1.0, 0.0));
        Mat2::new(o, l, l, o)
    }

    fn g(&self, x: f64) -> Mat2 {
        let (s, c) = (TAU * x).sin_cos();
        let (s, c) = (Complex64::new(s, 0.0), Complex64::new(c, 0.0));
        Mat2::new(s, c, c, -s)
    }

    fn analytic(&self, x: Complex64) -> Option<AnalyticCoefficients> {
        let s = (x * TAU).sin();
        Some(AnalyticCoefficients { alpha_f: ZERO, alpha_f_star: ZERO, alpha_g: s, alpha_g_star: s })
    }
}

/// Periodic factors `(L, M)` of the generalized CMV operator `E_x = L·M` for
/// β = p/q with Bloch phase `e^{2πik}` per period. `M` carries `g(x + jβ)` on
/// indices `(2j−2, 2j−1)`, `L` carries `f(x + jβ)` on `(2j−1, 2j)`, with
/// index `2q` identified with index 0.
pub fn cmv_factors<P: CoinFieldPair + ?Sized>(
    pair: &P,
    beta: &Frequency,
    x: f64,
    k: f64,
) -> Result<(Mat<Complex64>, Mat<Complex64>)> {
    let (_, q) = rational_parts(beta)?;
    let dim = 2 * q as usize;
    let mut l = Mat::zeros(dim, dim);
    let mut m = Mat::zeros(dim, dim);
    let forward = Complex64::from_polar(1.0, TAU * k);
    for j in 1..=q {
        let phase = beta.phase(j, x);
        let g = pair.g(phase).0;
        let lo = (2 * j - 2) as usize;
        for r in 0..2 {
            for c in 0..2 {
                m[(lo + r, lo + c)] = g[r][c];
            }
        }
        let f = pair.f(phase).0;
        let lo = (2 * j - 1) as usize;
        if j < q {
            for r in 0..2 {
                for c in 0..2 {
                    l[(lo + r, lo + c)] = f[r][c];
                }
            }
        } else {
            // index 2q is e^{2πik} times index 0
            let last = dim - 1;
            l[(last, last)] = f[0][0];
            l[(last, 0)] = f[0][1] * forward;
            l[(0, last)] = f[1][0] * forward.conj();
            l[(0, 0)] = f[1][1];
        }
    }
    Ok((l, m))
}

/// `E_x = L·M` as an [`OperatorSpec`].
pub fn cmv_periodic<P: CoinFieldPair + ?Sized>(pair: &P, beta: &Frequency, x: f64, k: f64) -> Result<OperatorSpec> {
    let (p, q) = rational_parts(beta)?;
    let (l, m) = cmv_factors(pair, beta, x, k)?;
    Ok(OperatorSpec::new(OperatorKind::CmvPeriodic { p, q, k, x: wrap(x) }, beta, wrap(x), &l * &m, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::reduce;

    #[test]
    fn update_preserves_norm() {
        let g = Frequency::golden();
        let mut s = WalkState {
            first_site: -2,
            amps: vec![
                [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)],
                [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, -0.7), Complex64::new(0.4, 0.4)],
            ],
        };
        let n0 = s.norm();
        for _ in 0..50 {
            s = apply_update(&g, reduce(0.17).unwrap(), &s).unwrap();
        }
        assert!((s.norm() - n0).abs() < 1e-12);
        assert_eq!(s.first_site, -52);
    }

    #[test]
    fn single_site_block() {
        let g = Frequency::golden();
        let theta = reduce(0.1).unwrap();
        let op = decoupled_truncation(&g, theta, 0, 1).unwrap();
        assert_eq!(op.dimension(), 2);
        let s0 = (TAU * 0.1).sin().signum();
        let s1 = (TAU * g.phase(1, 0.1)).sin().signum();
        // [[0, s1], [−s0, 0]]
        assert_eq!(op.matrix[(0, 0)], ZERO);
        assert_eq!(op.matrix[(1, 1)], ZERO);
        assert_eq!(op.matrix[(0, 1)].re, s1);
        assert_eq!(op.matrix[(1, 0)].re, -s0);
    }

    #[test]
    fn truncation_is_unitary() {
        let g = Frequency::golden();
        let op = decoupled_truncation(&g, reduce(0.3).unwrap(), -10, 15).unwrap();
        assert_eq!(op.dimension(), 50);
        assert!(op.descriptor.unitarity_defect < 1e-13);
    }

    #[test]
    fn zero_sine_shifts_outward() {
        let b = Frequency::rational(1, 4).unwrap();
        // θ = 0 makes sin vanish at site 0 and site 2
        let op = decoupled_truncation(&b, TorusPoint::ZERO, 0, 2).unwrap();
        match op.descriptor.kind {
            OperatorKind::DecoupledTruncation { sites, .. } => assert_eq!(sites, (-1, 3)),
            _ => unreachable!(),
        }
        assert_eq!(op.descriptor.notes.len(), 2);
    }

    #[test]
    fn cmv_matches_walk_floquet() {
        let b = Frequency::rational(3, 7).unwrap();
        let theta = 0.123;
        for k in [0.0, 0.2, 0.5] {
            let u = floquet_block(&b, reduce(theta).unwrap(), k).unwrap();
            let e = cmv_periodic(&WalkCoinPair, &b, theta - 3.0 / 7.0, k).unwrap();
            let n = u.dimension();
            let diff = (0..n)
                .flat_map(|r| (0..n).map(move |c| (r, c)))
                .map(|(r, c)| (u.matrix[(r, c)] - e.matrix[(r, c)]).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-14, "k={k}: {diff}");
        }
    }

    #[test]
    fn floquet_q1_trace() {
        let b = Frequency::rational(0, 1).unwrap();
        let theta = 0.07;
        for k in [0.0, 0.13, 0.5] {
            let u = floquet_block(&b, reduce(theta).unwrap(), k).unwrap();
            let tr = u.matrix[(0, 0)] + u.matrix[(1, 1)];
            assert!((tr.re - 2.0 * (TAU * theta).cos() * (TAU * k).cos()).abs() < 1e-14);
        }
    }
}
