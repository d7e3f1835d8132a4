//! Spectra of the finite operators: eigen-decomposition, arc estimates of
//! the rational spectra `Σ_{p/q}`, their measure, and the butterfly raster.
//!
//! Angles on the unit circle are in turns, `z = e^{2πi·angle}`.

use std::f64::consts::TAU;
use std::io::Write;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{floquet_block, OperatorSpec};
use crate::torus::{gcd, wrap, Frequency, TorusPoint};

/// Eigenvalues (and optionally eigenvectors, as columns) of a unitary.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<Complex64>,
    pub vectors: Option<Mat<Complex64>>,
    /// Largest `‖(U − λ)v‖` over all pairs.
    pub max_residual: f64,
}

/// Residual bound every reported eigenpair must meet.
pub const RESIDUAL_CONTRACT: f64 = 1e-8;

/// Diagonalises a unitary matrix with a dense general eigensolver and
/// checks the residual of every pair.
pub fn diagonalize(op: &OperatorSpec, want_vectors: bool) -> Result<Eigenpairs> {
    diagonalize_matrix(&op.matrix, want_vectors)
}

pub fn diagonalize_matrix(m: &Mat<Complex64>, want_vectors: bool) -> Result<Eigenpairs> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidArgument("diagonalize needs a non-empty square matrix".into()));
    }
    for c in 0..n {
        for r in 0..n {
            let z = m[(r, c)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite("operator matrix"));
            }
        }
    }
    let defect = crate::operators::unitarity_defect(m);
    if defect > 1e-10 {
        return Err(Error::Eigensolver { dim: n, reason: format!("input not unitary (defect {defect:.3e})") });
    }
    let eig = m.eigen().map_err(|e| Error::Eigensolver { dim: n, reason: format!("{e:?}") })?;
    let (s, u) = (eig.S(), eig.U());
    let values: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    // (U − λ)v column by column, relative to ‖v‖
    let mu = m * u;
    let mut max_residual = 0.0f64;
    for j in 0..n {
        let (mut r2, mut v2) = (0.0, 0.0);
        for i in 0..n {
            r2 += (mu[(i, j)] - values[j] * u[(i, j)]).norm_sqr();
            v2 += u[(i, j)].norm_sqr();
        }
        max_residual = max_residual.max((r2 / v2).sqrt());
    }
    if max_residual >= RESIDUAL_CONTRACT {
        let worst_modulus = values.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
        return Err(Error::Eigensolver {
            dim: n,
            reason: format!("residual {max_residual:.3e} exceeds contract; largest ||lambda|-1| = {worst_modulus:.3e}"),
        });
    }
    let vectors = want_vectors.then(|| {
        Mat::from_fn(n, n, |i, j| {
            let norm = (0..n).map(|r| u[(r, j)].norm_sqr()).sum::<f64>().sqrt();
            u[(i, j)] / norm
        })
    });
    Ok(Eigenpairs { values, vectors, max_residual })
}

/// `arg z / 2π` in `[0, 1)`.
pub fn angle_of(z: Complex64) -> f64 {
    wrap(z.arg() / TAU)
}

/// Zero-width bands are widened to this many turns so arcs stay positive.
pub const MIN_ARC: f64 = 1e-12;

/// Where a spectrum estimate came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSource {
    pub operator: String,
    pub p: i64,
    pub q: i64,
    pub theta_samples: usize,
    /// Whether consecutive θ samples were bridged (uniform period grid).
    pub theta_bridged: bool,
    pub k_samples: usize,
}

/// Closed arcs of the unit circle, sorted and disjoint, `0 ≤ s < e ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub arcs: Vec<(f64, f64)>,
    /// Angular uncertainty of arc endpoints, in turns.
    pub resolution: f64,
    pub source: SpectrumSource,
    /// Diagnostics; empty when the sweep looked healthy.
    pub flags: Vec<String>,
}

impl SpectrumEstimate {
    /// Builds an estimate from arbitrary arcs `(start, length)` (wrapping
    /// allowed), merging overlaps.
    pub fn from_arcs(raw: impl IntoIterator<Item = (f64, f64)>, resolution: f64, source: SpectrumSource) -> Self {
        SpectrumEstimate { arcs: normalize_arcs(raw), resolution, source, flags: Vec::new() }
    }

    pub fn contains(&self, angle: f64) -> bool {
        let a = wrap(angle);
        self.arcs.iter().any(|&(s, e)| s <= a && a <= e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Merge `(start, length)` arcs into sorted disjoint `(s, e)` pairs.
fn normalize_arcs(raw: impl IntoIterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut pieces = Vec::new();
    for (start, len) in raw {
        if len >= 1.0 {
            return vec![(0.0, 1.0)];
        }
        let s = wrap(start);
        let len = len.max(MIN_ARC);
        let e = s + len;
        if e <= 1.0 {
            pieces.push((s, e));
        } else {
            pieces.push((s, 1.0));
            pieces.push((0.0, e - 1.0));
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for (s, e) in pieces {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Counter-clockwise distance from `a` to `b`, in `[0, 1)`.
fn ccw(a: f64, b: f64) -> f64 {
    wrap(b - a)
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = ccw(a, b);
    d.min(1.0 - d)
}

/// A band centre this close to an edge marks a collapsed band.
const FLAT_BAND_TOL: f64 = 1e-9;

/// A band as `(start, length)`.
type Band = (f64, f64);

fn eigen_angles(beta: &Frequency, theta: f64, k: f64) -> Result<Vec<f64>> {
    let op = floquet_block(beta, TorusPoint::new(theta)?, k)?;
    let eig = diagonalize(&op, false)?;
    let mut a: Vec<f64> = eig.values.iter().map(|&z| angle_of(z)).collect();
    a.sort_by(f64::total_cmp);
    Ok(a)
}

/// Bands of `∪_k σ(U_{θ,k})` at one θ.
///
/// The band edges are the eigenvalues at `k = 0` and `k = 1/2`; each band
/// contains exactly one eigenvalue at `k = 1/4`, which locates it between
/// two consecutive edges.
fn bands_at(beta: &Frequency, theta: f64, k_checks: &[f64], flags: &mut Vec<String>) -> Result<Vec<Band>> {
    let mut edges = eigen_angles(beta, theta, 0.0)?;
    edges.extend(eigen_angles(beta, theta, 0.5)?);
    edges.sort_by(f64::total_cmp);
    let centres = eigen_angles(beta, theta, 0.25)?;
    let mut bands = Vec::with_capacity(centres.len());
    let mut used = vec![false; edges.len()];
    for &c in &centres {
        // A coin with cos = 0 on the orbit cuts the chain and the bands
        // collapse to points: centres then sit on edges.
        if edges.iter().any(|&e| circ_dist(e, c) < FLAT_BAND_TOL) {
            bands.push((c, 0.0));
            continue;
        }
        // last edge at or before c, cyclically
        let i = match edges.iter().rposition(|&e| e <= c) {
            Some(i) => i,
            None => edges.len() - 1,
        };
        let j = (i + 1) % edges.len();
        if used[i] {
            flags.push(format!("theta={theta}: two band centres share edge interval"));
        }
        used[i] = true;
        bands.push((edges[i], ccw(edges[i], edges[j])));
    }
    for &k in k_checks {
        for a in eigen_angles(beta, theta, k)? {
            let inside = bands.iter().any(|&(s, l)| ccw(s, a) <= l + 1e-9 || circ_dist(s, a) < 1e-9);
            if !inside {
                flags.push(format!("theta={theta}: eigenvalue at k={k} outside band reconstruction"));
                break;
            }
        }
    }
    Ok(bands)
}

/// Sampling of the phase θ for [`rational_spectrum`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ThetaSampling {
    /// `n` equispaced phases over one period `[0, 1/q)`; consecutive
    /// samples are bridged band by band.
    Period(usize),
    /// Exactly these phases, unioned without bridging.
    Fixed(Vec<f64>),
}

/// Estimate of `Σ_{p/q} = ∪_θ ∪_k σ(U_{p/q,θ,k})`.
///
/// `k_checks` extra quasi-momenta are diagonalised only to validate the band
/// reconstruction. The resolution is half the largest Hausdorff distance
/// between the spectra at consecutive θ samples.
pub fn rational_spectrum(p: i64, q: i64, theta: &ThetaSampling, k_checks: usize) -> Result<SpectrumEstimate> {
    if q < 1 || p < 0 || p > q {
        return Err(Error::InvalidArgument(format!("bad rational {p}/{q}")));
    }
    if gcd(p, q) != 1 {
        return Err(Error::NotCoprime { p, q });
    }
    let beta = Frequency::rational(p, q)?;
    let (thetas, bridged) = match theta {
        ThetaSampling::Period(n) => {
            if *n == 0 {
                return Err(Error::InvalidArgument("need at least one θ sample".into()));
            }
            ((0..*n).map(|i| i as f64 / (*n as f64 * q as f64)).collect::<Vec<_>>(), *n > 1)
        }
        ThetaSampling::Fixed(v) => {
            if v.is_empty() {
                return Err(Error::InvalidArgument("need at least one θ sample".into()));
            }
            (v.clone(), false)
        }
    };
    let k_grid: Vec<f64> = (1..=k_checks).map(|i| 0.5 * i as f64 / (k_checks + 1) as f64).collect();
    let per_theta: Vec<Result<(Vec<Band>, Vec<String>)>> = thetas
        .par_iter()
        .map(|&t| {
            let mut flags = Vec::new();
            let bands = bands_at(&beta, t, &k_grid, &mut flags)?;
            Ok((bands, flags))
        })
        .collect();
    let mut all_bands = Vec::with_capacity(thetas.len());
    let mut flags = Vec::new();
    for r in per_theta {
        let (b, f) = r?;
        all_bands.push(b);
        flags.extend(f);
    }

    let mut raw: Vec<Band> = all_bands.iter().flatten().copied().collect();
    let mut resolution = 0.0f64;
    let m = all_bands.len();
    if m > 1 {
        let pairs = if bridged { m } else { m - 1 };
        for i in 0..pairs {
            let (a, b) = (&all_bands[i], &all_bands[(i + 1) % m]);
            resolution = resolution.max(0.5 * band_hausdorff(a, b));
            if bridged {
                raw.extend(bridge(a, b));
            }
        }
    }
    let source = SpectrumSource {
        operator: "floquet".into(),
        p,
        q,
        theta_samples: thetas.len(),
        theta_bridged: bridged,
        k_samples: k_checks,
    };
    let mut est = SpectrumEstimate::from_arcs(raw, resolution, source);
    if bridged && resolution > coarse_threshold(q) {
        flags.push(format!("theta grid coarse: resolution {resolution:.3e} exceeds {:.3e}", coarse_threshold(q)));
    }
    est.flags = flags;
    Ok(est)
}

/// Resolution above which a period-grid sweep is flagged as too coarse.
fn coarse_threshold(q: i64) -> f64 {
    0.01 / q as f64
}

/// Hausdorff distance between two finite band families (as point sets).
fn band_hausdorff(a: &[Band], b: &[Band]) -> f64 {
    let arcs_a = normalize_arcs(a.iter().copied());
    let arcs_b = normalize_arcs(b.iter().copied());
    arcs_hausdorff(&arcs_a, &arcs_b)
}

/// For each band of `a`, the smallest arc covering it and the band of `b`
/// it moves to, matched by the cyclic relabelling that minimises total
/// centre displacement.
fn bridge(a: &[Band], b: &[Band]) -> Vec<Band> {
    if a.len() != b.len() || a.is_empty() {
        return Vec::new();
    }
    let n = a.len();
    let centre = |&(s, l): &Band| wrap(s + l / 2.0);
    let mut ca: Vec<(f64, usize)> = a.iter().map(centre).zip(0..).collect();
    let mut cb: Vec<(f64, usize)> = b.iter().map(centre).zip(0..).collect();
    ca.sort_by(|x, y| x.0.total_cmp(&y.0));
    cb.sort_by(|x, y| x.0.total_cmp(&y.0));
    let shift = (0..n)
        .min_by(|&s1, &s2| {
            let cost = |s: usize| (0..n).map(|j| circ_dist(ca[j].0, cb[(j + s) % n].0)).sum::<f64>();
            cost(s1).total_cmp(&cost(s2))
        })
        .unwrap_or(0);
    (0..n)
        .map(|j| {
            let ba = a[ca[j].1];
            let bb = b[cb[(j + shift) % n].1];
            hull(ba, bb)
        })
        .collect()
}

/// Smallest arc containing both bands (assumes they are less than half a
/// turn apart).
fn hull(x: Band, y: Band) -> Band {
    // try starting at either start; keep the shorter cover
    let cover = |first: Band, second: Band| -> f64 {
        let end_first = first.1;
        let end_second = ccw(first.0, second.0) + second.1;
        end_first.max(end_second)
    };
    let c1 = cover(x, y);
    let c2 = cover(y, x);
    if c1 <= c2 {
        (x.0, c1)
    } else {
        (y.0, c2)
    }
}

/// Intersection of two sorted, disjoint arc sets (as stored in a
/// [`SpectrumEstimate`]).
pub fn intersect_arcs(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let s = a[i].0.max(b[j].0);
        let e = a[i].1.min(b[j].1);
        if s < e {
            out.push((s, e));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Hausdorff distance between two arc sets, in turns.
pub fn arcs_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn point_to_arcs(x: f64, arcs: &[(f64, f64)]) -> f64 {
    arcs.iter()
        .map(|&(s, e)| if s <= x && x <= e { 0.0 } else { circ_dist(x, s).min(circ_dist(x, e)) })
        .fold(f64::INFINITY, f64::min)
}

fn directed_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    // sup over a is attained at an endpoint of a or at the midpoint of a gap
    // of b lying inside a
    let mut candidates: Vec<f64> = a.iter().flat_map(|&(s, e)| [s, e]).collect();
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for i in 0..b.len() {
        let end = b[i].1;
        let next = b[(i + 1) % b.len()].0;
        gaps.push((end, ccw(end, next)));
    }
    for (s, len) in gaps {
        let mid = wrap(s + len / 2.0);
        if point_to_arcs(mid, a) == 0.0 {
            candidates.push(mid);
        }
    }
    candidates.into_iter().map(|x| point_to_arcs(x, b)).fold(0.0, f64::max)
}

/// Image of an arc set under `angle ↦ f(angle)` for an isometry `f` of the
/// circle given as reflection flag and rotation.
fn transform_arcs(arcs: &[(f64, f64)], reflect: bool, rotate: f64) -> Vec<(f64, f64)> {
    normalize_arcs(arcs.iter().map(|&(s, e)| {
        if reflect {
            (wrap(rotate - e), e - s)
        } else {
            (wrap(s + rotate), e - s)
        }
    }))
}

/// Hausdorff defects of the estimate under `z ↦ z̄` and `z ↦ −z`.
pub fn symmetry_defects(est: &SpectrumEstimate) -> (f64, f64) {
    let conj = transform_arcs(&est.arcs, true, 0.0);
    let neg = transform_arcs(&est.arcs, false, 0.5);
    (arcs_hausdorff(&est.arcs, &conj), arcs_hausdorff(&est.arcs, &neg))
}

/// Angular distance in turns from `angle` to the nearest arc; 0 inside.
pub fn distance_to_spectrum(est: &SpectrumEstimate, angle: f64) -> Result<f64> {
    if est.arcs.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    Ok(point_to_arcs(wrap(angle), &est.arcs))
}

/// [`distance_to_spectrum`] for a unimodular `z`.
pub fn distance_to_spectrum_z(est: &SpectrumEstimate, z: Complex64) -> Result<f64> {
    distance_to_spectrum(est, angle_of(z))
}

/// Gaps between consecutive arcs as `(start, length)`, longest first.
pub fn gaps(est: &SpectrumEstimate) -> Vec<(f64, f64)> {
    let a = &est.arcs;
    if a.is_empty() {
        return vec![(0.0, 1.0)];
    }
    let mut out = Vec::new();
    for i in 0..a.len() {
        let end = a[i].1;
        let next = a[(i + 1) % a.len()].0;
        let len = ccw(end, next);
        if len > 0.0 && !(i + 1 == a.len() && end >= 1.0 && next <= 0.0) {
            out.push((end, len));
        }
    }
    out.sort_by(|x, y| y.1.total_cmp(&x.1));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub value: f64,
    pub uncertainty: f64,
}

/// Total arc length with uncertainty `(number of arcs)·resolution`.
pub fn measure_estimate(est: &SpectrumEstimate) -> Measure {
    let value: f64 = est.arcs.iter().map(|&(s, e)| e - s).sum();
    Measure { value: value.min(1.0), uncertainty: est.arcs.len() as f64 * est.resolution }
}

/// Writes `p, q, measure, uncertainty` rows.
pub fn write_measure_csv<W: Write>(rows: &[(i64, i64, Measure)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "q", "measure", "uncertainty"])?;
    for (p, q, m) in rows {
        w.write_record([
            p.to_string(),
            q.to_string(),
            crate::output::fmt_f64(m.value),
            crate::output::fmt_f64(m.uncertainty),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// All reduced fractions `p/q ∈ [0, 1]` with `q ≤ q_max`, ascending.
pub fn farey(q_max: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for q in 1..=q_max {
        for p in 0..=q {
            if gcd(p, q) == 1 {
                out.push((p, q));
            }
        }
    }
    out.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    out
}

/// Membership raster of `Σ_{p/q}` over Farey fractions (rows) and angle
/// bins (columns), one bit per cell, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButterflyRaster {
    pub beta_axis: Vec<(i64, i64)>,
    pub angle_bins: usize,
    #[serde(skip)]
    pub bits: Vec<u8>,
    pub row_resolution: Vec<f64>,
    pub row_flags: Vec<Vec<String>>,
}

impl ButterflyRaster {
    fn row_bytes(&self) -> usize {
        self.angle_bins.div_ceil(8)
    }

    pub fn get(&self, row: usize, bin: usize) -> bool {
        let byte = self.bits[row * self.row_bytes() + bin / 8];
        byte & (0x80 >> (bin % 8)) != 0
    }

    fn set(&mut self, row: usize, bin: usize) {
        let rb = self.row_bytes();
        self.bits[row * rb + bin / 8] |= 0x80 >> (bin % 8);
    }

    pub fn row_index(&self, p: i64, q: i64) -> Option<usize> {
        self.beta_axis.iter().position(|&r| r == (p, q))
    }

    /// Runs of set bins of a row, as arcs.
    pub fn row_arcs(&self, row: usize) -> Vec<(f64, f64)> {
        let n = self.angle_bins;
        let mut out = Vec::new();
        let mut b = 0;
        while b < n {
            if self.get(row, b) {
                let start = b;
                while b < n && self.get(row, b) {
                    b += 1;
                }
                out.push((start as f64 / n as f64, (b - start) as f64 / n as f64));
            } else {
                b += 1;
            }
        }
        normalize_arcs(out)
    }

    /// Binary PGM (P5): one row per β, 0 = in the spectrum (dark), 255 = gap.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.angle_bins, self.beta_axis.len())?;
        let mut line = vec![0u8; self.angle_bins];
        for r in 0..self.beta_axis.len() {
            for (b, px) in line.iter_mut().enumerate() {
                *px = if self.get(r, b) { 0 } else { 255 };
            }
            out.write_all(&line)?;
        }
        Ok(())
    }
}

/// Rasterises one estimate into `bins` membership cells: a cell is set when
/// its closed angular interval meets an arc.
pub fn rasterize(est: &SpectrumEstimate, bins: usize) -> Vec<bool> {
    let mut row = vec![false; bins];
    for &(s, e) in &est.arcs {
        let first = ((s * bins as f64).floor() as usize).min(bins - 1);
        let last = ((e * bins as f64).ceil() as usize).clamp(first + 1, bins);
        for cell in row.iter_mut().take(last).skip(first) {
            *cell = true;
        }
    }
    row
}

/// The butterfly over all Farey `p/q` with `q ≤ q_max`.
pub fn butterfly(q_max: i64, theta_samples: usize, k_checks: usize, angle_bins: usize) -> Result<ButterflyRaster> {
    if q_max < 2 {
        return Err(Error::InvalidArgument("butterfly needs q_max >= 2".into()));
    }
    if angle_bins == 0 {
        return Err(Error::InvalidArgument("butterfly needs at least one angle bin".into()));
    }
    let axis = farey(q_max);
    let rows: Vec<Result<SpectrumEstimate>> = axis
        .par_iter()
        .map(|&(p, q)| rational_spectrum(p, q, &ThetaSampling::Period(theta_samples), k_checks))
        .collect();
    let mut raster = ButterflyRaster {
        beta_axis: axis.clone(),
        angle_bins,
        bits: vec![0; axis.len() * angle_bins.div_ceil(8)],
        row_resolution: Vec::with_capacity(axis.len()),
        row_flags: Vec::with_capacity(axis.len()),
    };
    for (r, est) in rows.into_iter().enumerate() {
        let est = est?;
        for (b, on) in rasterize(&est, angle_bins).into_iter().enumerate() {
            if on {
                raster.set(r, b);
            }
        }
        raster.row_resolution.push(est.resolution);
        raster.row_flags.push(est.flags);
    }
    Ok(raster)
}
