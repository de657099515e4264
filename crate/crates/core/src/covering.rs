//! Regions and numerical certificates that f(Σ) contains a closed annulus.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexfn::FunctionSpec;
use crate::error::{CoverError, MetricsError};
use crate::geom::{seg_dist, Polygon, SegmentTree};
use crate::hp::wrap_pi;
use crate::metrics::{
    bcover_floor, c_eps, choose_eta, harmonic_measure_wos, lambda_threshold_log, mcover_threshold_from_kernel,
    poisson_kernel, EtaReport, HarmonicEstimate,
};
use crate::tract::{has_zeros, max_modulus_on_tract, TractRegion};

/// Edge tags used by the region builders.
pub mod tag {
    pub const INNER_ARC: u32 = 0;
    pub const OUTER_ARC: u32 = 1;
    /// Radial side or half-plane cut.
    pub const SIDE: u32 = 2;
    /// The tract boundary curve bounding the sector from above.
    pub const TRACT: u32 = 3;
    /// Other pieces of the tract boundary (holes, lower side).
    pub const TRACT_OTHER: u32 = 4;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionKind {
    AnnulusSector { r_in: f64, r_out: f64, theta_lo: f64, theta_hi: f64 },
    Quadrilateral,
    AnnulusTract { r_in: f64, r_out: f64, upper_half: bool },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Region {
    #[serde(flatten)]
    pub kind: RegionKind,
    pub boundary: Polygon,
    pub tract_label: Option<u64>,
    /// Function and level bounding the tract part of the boundary.
    #[serde(rename = "fn", default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
}

fn arc_points(r: f64, t0: f64, t1: f64, n: usize) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(r, t0 + (t1 - t0) * k as f64 / n as f64)).collect()
}

impl Region {
    /// Closed sector {r_in <= |z| <= r_out, theta_lo <= arg z <= theta_hi}.
    pub fn annulus_sector(r_in: f64, r_out: f64, theta_lo: f64, theta_hi: f64, arc_samples: usize) -> Result<Self, CoverError> {
        if !(r_in > 0.0 && r_out > r_in && theta_hi > theta_lo && theta_hi - theta_lo < 2.0 * PI) {
            return Err(CoverError::Region(format!("bad sector ({r_in},{r_out},{theta_lo},{theta_hi})")));
        }
        let n = arc_samples.max(4);
        let mut v = Vec::new();
        let mut t = Vec::new();
        for p in arc_points(r_out, theta_lo, theta_hi, n) {
            v.push(p);
            t.push(tag::OUTER_ARC);
        }
        let side = 8;
        for k in 0..side {
            let r = r_out + (r_in - r_out) * k as f64 / side as f64;
            v.push(Complex64::from_polar(r, theta_hi));
            t.push(tag::SIDE);
        }
        for p in arc_points(r_in, theta_hi, theta_lo, n) {
            v.push(p);
            t.push(tag::INNER_ARC);
        }
        for k in 0..side {
            let r = r_in + (r_out - r_in) * k as f64 / side as f64;
            v.push(Complex64::from_polar(r, theta_lo));
            t.push(tag::SIDE);
        }
        let boundary = Polygon::with_tags(v, t)?;
        Ok(Self { kind: RegionKind::AnnulusSector { r_in, r_out, theta_lo, theta_hi }, boundary, tract_label: None, function: None })
    }

    /// Arbitrary simple polygon (oriented counterclockwise on construction).
    pub fn quadrilateral(mut boundary: Polygon) -> Result<Self, CoverError> {
        if boundary.len() < 3 {
            return Err(CoverError::Region("fewer than 3 vertices".into()));
        }
        boundary.make_ccw();
        Ok(Self { kind: RegionKind::Quadrilateral, boundary, tract_label: None, function: None })
    }

    /// A(r_in, r_out) ∩ D (∩ upper half-plane), assuming each circle meets the
    /// relevant part of D in one arc; the arc carrying the largest |f| is taken.
    pub fn annulus_tract(
        tract: Arc<TractRegion>,
        r_in: f64,
        r_out: f64,
        upper_half: bool,
        radial_samples: usize,
        arc_samples: usize,
    ) -> Result<Self, CoverError> {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(CoverError::Region(format!("bad radii ({r_in},{r_out})")));
        }
        let nr = radial_samples.max(4);
        let radii: Vec<f64> = (0..=nr).map(|k| r_in + (r_out - r_in) * k as f64 / nr as f64).collect();
        let spans: Vec<ArcSpan> = radii
            .par_iter()
            .map(|&r| tract_arc(&tract, r, upper_half))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| CoverError::Region("a circle misses the tract".into()))?;
        let mut v = Vec::new();
        let mut t = Vec::new();
        let na = arc_samples.max(8);
        // outer arc, counterclockwise
        let so = spans[nr];
        for p in arc_points(r_out, so.lo, so.hi, na) {
            v.push(p);
            t.push(tag::OUTER_ARC);
        }
        // upper side, r_out -> r_in
        for k in (1..=nr).rev() {
            let s = spans[k];
            let next = spans[k - 1];
            v.push(Complex64::from_polar(radii[k], s.hi));
            t.push(if s.hi_on_level && next.hi_on_level { tag::TRACT } else { tag::SIDE });
        }
        let si = spans[0];
        for p in arc_points(r_in, si.hi, si.lo, na) {
            v.push(p);
            t.push(tag::INNER_ARC);
        }
        // lower side, r_in -> r_out
        for k in 0..nr {
            let s = spans[k];
            let next = spans[k + 1];
            v.push(Complex64::from_polar(radii[k], s.lo));
            t.push(if s.lo_on_level && next.lo_on_level { tag::TRACT_OTHER } else { tag::SIDE });
        }
        let mut boundary = Polygon::with_tags(v, t)?;
        boundary.dedup(1e-12 * r_out);
        boundary.make_ccw();
        Ok(Self {
            kind: RegionKind::AnnulusTract { r_in, r_out, upper_half },
            boundary,
            tract_label: Some(tract.label),
            function: Some(tract.function.clone()),
        })
    }

    pub fn r_out(&self) -> f64 {
        match self.kind {
            RegionKind::AnnulusSector { r_out, .. } | RegionKind::AnnulusTract { r_out, .. } => r_out,
            RegionKind::Quadrilateral => self.boundary.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// Largest modulus over the closed region.
    pub fn max_modulus(&self) -> f64 {
        self.r_out()
    }

    pub fn centroid(&self) -> Complex64 {
        self.boundary.centroid()
    }

    /// Closed-region membership with tolerance `1e-9 * r_out`.
    pub fn contains(&self, z: Complex64) -> bool {
        let scale = self.r_out().max(1.0);
        let tol = 1e-9 * scale;
        match &self.kind {
            RegionKind::AnnulusSector { r_in, r_out, theta_lo, theta_hi } => {
                let r = z.norm();
                if r < r_in - tol || r > r_out + tol {
                    return false;
                }
                let d = (z.arg() - theta_lo).rem_euclid(2.0 * PI);
                let span = theta_hi - theta_lo;
                d <= span + tol / r.max(tol) || d >= 2.0 * PI - tol / r.max(tol)
            }
            RegionKind::Quadrilateral => self.boundary.contains(z) || self.boundary.boundary_dist(z) <= tol,
            RegionKind::AnnulusTract { r_in, r_out, upper_half } => {
                let r = z.norm();
                if r < r_in - tol || r > r_out + tol {
                    return false;
                }
                if *upper_half && z.im < -tol {
                    return false;
                }
                if let Some(f) = &self.function {
                    if f.level_fn(z) < -1e-9 {
                        return false;
                    }
                    // the polygon only selects the component
                    self.boundary.contains(z) || self.boundary.boundary_dist(z) <= 1e-3 * scale
                } else {
                    self.boundary.contains(z) || self.boundary.boundary_dist(z) <= tol
                }
            }
        }
    }

    /// Up to `n` well-separated interior points, the first closest to the centroid.
    pub fn interior_seeds(&self, n: usize) -> Vec<Complex64> {
        let (lo, hi) = self.boundary.bbox();
        let tree = SegmentTree::new(&self.boundary);
        let m = 24;
        let mut cand = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let p = lo + Complex64::new((hi - lo).re * (i as f64 + 0.5) / m as f64, (hi - lo).im * (j as f64 + 0.5) / m as f64);
                if self.boundary.contains(p) && self.contains(p) {
                    let d = tree.nearest(p).map(|x| x.1).unwrap_or(0.0);
                    cand.push((p, d));
                }
            }
        }
        if cand.is_empty() {
            let c = self.centroid();
            return if self.contains(c) { vec![c] } else { Vec::new() };
        }
        let c = self.centroid();
        let dmax = cand.iter().map(|x| x.1).fold(0.0, f64::max);
        let deep: Vec<Complex64> = cand.iter().filter(|x| x.1 >= 0.25 * dmax).map(|x| x.0).collect();
        let first = if self.boundary.contains(c) && self.contains(c) {
            c
        } else {
            *deep.iter().min_by(|a, b| (**a - c).norm().total_cmp(&(**b - c).norm())).expect("nonempty")
        };
        let mut out = vec![first];
        while out.len() < n {
            let next = deep
                .iter()
                .map(|&p| (p, out.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match next {
                Some((p, d)) if d > 0.0 => out.push(p),
                _ => break,
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct ArcSpan {
    lo: f64,
    hi: f64,
    lo_on_level: bool,
    hi_on_level: bool,
}

fn bisect_level(f: &FunctionSpec, r: f64, t_in: f64, t_out: f64) -> f64 {
    let (mut a, mut b) = (t_in, t_out);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if f.level_fn(Complex64::from_polar(r, m)) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// The arc of {|z| = r} ∩ D (∩ H) containing the largest sampled |f|.
fn tract_arc(tract: &TractRegion, r: f64, upper_half: bool) -> Option<ArcSpan> {
    let f = &tract.function;
    let (t0, t1) = if upper_half { (0.0, PI) } else { (-PI, PI) };
    let n = 2048;
    let th: Vec<f64> = (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
    let ins: Vec<bool> = th.iter().map(|&t| tract.contains(Complex64::from_polar(r, t))).collect();
    let u: Vec<f64> = th.iter().map(|&t| f.level_fn(Complex64::from_polar(r, t))).collect();
    let best = (0..=n).filter(|&k| ins[k]).max_by(|&a, &b| u[a].total_cmp(&u[b]))?;
    let mut lo = best;
    while lo > 0 && ins[lo - 1] {
        lo -= 1;
    }
    let mut hi = best;
    while hi < n && ins[hi + 1] {
        hi += 1;
    }
    let full = !upper_half && lo == 0 && hi == n;
    if full {
        return None;
    }
    let (tlo, lo_lvl) = if lo == 0 { (t0, false) } else { (bisect_level(f, r, th[lo], th[lo - 1]), true) };
    let (thi, hi_lvl) = if hi == n { (t1, false) } else { (bisect_level(f, r, th[hi], th[hi + 1]), true) };
    Some(ArcSpan { lo: tlo, hi: thi, lo_on_level: lo_lvl, hi_on_level: hi_lvl })
}

/// Closed annulus exp(log_in) <= |w| <= exp(log_out), in log-scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogAnnulus {
    pub log_in: f64,
    pub log_out: f64,
}

impl LogAnnulus {
    pub fn new(log_in: f64, log_out: f64) -> Self {
        Self { log_in, log_out }
    }

    pub fn contains(&self, other: &LogAnnulus) -> bool {
        self.log_in <= other.log_in && other.log_out <= self.log_out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub radii: usize,
    pub angles: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self { radii: 32, angles: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverStatus {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Ok,
    /// f(∂Σ) passes within tolerance of the probe.
    BoundaryHitsProbe,
    /// Boundary refinement could not resolve the argument increments.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub log_r: f64,
    pub phi: f64,
    pub winding: Option<i64>,
    pub margin: f64,
    pub status: ProbeStatus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub region: Region,
    pub annulus: LogAnnulus,
    pub probe_grid: ProbeGrid,
    pub probes: Vec<Probe>,
    /// min over probes of the log-plane distance from f(∂Σ) to the probe
    pub boundary_margin: f64,
    /// log-scale distance from f(∂Σ) to the annulus (0 if they meet)
    pub annulus_clearance: f64,
    pub annulus_clear_of_boundary_image: bool,
    pub boundary_samples: usize,
    pub precision: u32,
    pub status: CoverStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertOptions {
    pub probes: ProbeGrid,
    pub precision: u32,
    /// Initial boundary samples per unit of perimeter fraction (total).
    pub base_samples: usize,
}

impl Default for CertOptions {
    fn default() -> Self {
        Self { probes: ProbeGrid::default(), precision: 53, base_samples: 4096 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    z: Complex64,
    ell: Complex64,
}

fn log_at(f: &FunctionSpec, z: Complex64, precision: u32) -> Result<(Complex64, Complex64), CoverError> {
    let lv = f.eval_log(z, precision)?;
    Ok((Complex64::new(lv.logmod, lv.arg), f.logderiv_f64(z)))
}

/// Samples the closed boundary so that successive args differ by < pi/2,
/// with log f unwrapped to a continuous branch.
fn sample_boundary(f: &FunctionSpec, poly: &Polygon, base: usize, precision: u32) -> Result<Vec<Sample>, CoverError> {
    let n = poly.len();
    let perim: f64 = (0..n).map(|i| (poly.edge(i).1 - poly.edge(i).0).norm()).sum();
    let h = perim / base.max(16) as f64;
    let mut zs = Vec::new();
    for i in 0..n {
        let (a, b) = poly.edge(i);
        let m = ((b - a).norm() / h).ceil().max(1.0) as usize;
        for k in 0..m {
            zs.push(a + (b - a) * (k as f64 / m as f64));
        }
    }
    let evals: Vec<(Complex64, Complex64)> = zs
        .par_iter()
        .map(|&z| log_at(f, z, precision))
        .collect::<Result<_, _>>()?;
    let mut pts: Vec<(Complex64, Complex64, Complex64)> = zs.iter().zip(evals).map(|(&z, (l, q))| (z, l, q)).collect();
    // refine until every gap is resolved
    for _ in 0..40 {
        let m = pts.len();
        let bad: Vec<usize> = (0..m)
            .into_par_iter()
            .filter(|&i| {
                let (z0, l0, q0) = pts[i];
                let (z1, l1, q1) = pts[(i + 1) % m];
                let dz = z1 - z0;
                let pred = (q0 * dz).norm().max((q1 * dz).norm());
                let da = wrap_pi(l1.im - l0.im).abs();
                let dm = (l1.re - l0.re).abs();
                (pred >= PI / 4.0 || da >= PI / 4.0 || dm >= 0.5) && dz.norm() > 1e-13 * (1.0 + z0.norm())
            })
            .collect();
        if bad.is_empty() {
            break;
        }
        let mids: Vec<(usize, (Complex64, Complex64, Complex64))> = bad
            .par_iter()
            .map(|&i| {
                let z = 0.5 * (pts[i].0 + pts[(i + 1) % m].0);
                log_at(f, z, precision).map(|(l, q)| (i, (z, l, q)))
            })
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(m + mids.len());
        let mut it = mids.into_iter().peekable();
        for i in 0..m {
            out.push(pts[i]);
            if let Some(&(j, p)) = it.peek() {
                if j == i {
                    out.push(p);
                    it.next();
                }
            }
        }
        pts = out;
    }
    let mut samples = Vec::with_capacity(pts.len());
    let mut prev_im = pts[0].1.im;
    for (k, &(z, l, _)) in pts.iter().enumerate() {
        let im = if k == 0 { l.im } else { prev_im + wrap_pi(l.im - prev_im) };
        prev_im = im;
        samples.push(Sample { z, ell: Complex64::new(l.re, im) });
    }
    Ok(samples)
}

/// arg(f - w) for f = exp(ell), w = exp(big_l), principal.
fn arg_diff(ell: Complex64, big_l: Complex64) -> f64 {
    let d = big_l - ell;
    if d.re < -40.0 {
        // |w| << |f|: arg f with correction below |w|/|f|
        wrap_pi(ell.im)
    } else if d.re > 40.0 {
        wrap_pi(big_l.im + PI)
    } else {
        let v = Complex64::new(1.0, 0.0) - d.exp();
        wrap_pi(ell.im + v.arg())
    }
}

/// Log-plane distance from L to a segment [a,b] taken modulo 2 pi i, for
/// segments shorter than pi in Im; returns None when it cannot beat `best`.
fn log_seg_dist(big_l: Complex64, a: Complex64, b: Complex64, best: f64) -> Option<f64> {
    let mid = 0.5 * (a.im + b.im);
    let k = ((mid - big_l.im) / (2.0 * PI)).round();
    let p = big_l + Complex64::new(0.0, 2.0 * PI * k);
    let half = 0.5 * (a.im - b.im).abs();
    if (p.im - mid).abs() - half >= best {
        return None;
    }
    Some(seg_dist(p, a, b).0)
}

fn probe_winding(f: &FunctionSpec, samples: &[Sample], big_l: Complex64, precision: u32) -> (Option<i64>, f64, ProbeStatus) {
    let m = samples.len();
    let mut margin = f64::INFINITY;
    for i in 0..m {
        let a = samples[i].ell;
        let b = samples[(i + 1) % m].ell;
        // the closing segment carries the accumulated 2 pi k branch offset
        let gap = (a.re.min(b.re) - big_l.re).max(big_l.re - a.re.max(b.re));
        if gap >= margin {
            continue;
        }
        let b = if i + 1 == m { Complex64::new(b.re, a.im + wrap_pi(b.im - a.im)) } else { b };
        if let Some(d) = log_seg_dist(big_l, a, b, margin) {
            margin = margin.min(d);
        }
    }
    let tol = 1e-9 * (1.0 + big_l.norm());
    if margin <= tol {
        return (None, margin, ProbeStatus::BoundaryHitsProbe);
    }
    // Where |f| and |w| stay apart by a factor e^(1/2), arg(f - w) is Im log f
    // (or arg(-w)) plus a principal arg of 1 - e^(+-d) in the right half-plane,
    // so the increment over a run telescopes.
    let side = |i: usize| {
        let d = big_l.re - samples[i].ell.re;
        if d < -0.5 {
            -1
        } else if d > 0.5 {
            1
        } else {
            0
        }
    };
    let corr = |i: usize, s: i32| {
        let d = big_l - samples[i].ell;
        let e = if s < 0 { d.exp() } else { (-d).exp() };
        (Complex64::new(1.0, 0.0) - e).arg()
    };
    let mut total = 0.0;
    let mut run: Option<(i32, f64)> = None;
    let mut cached: Option<(usize, f64)> = None;
    for i in 0..m {
        let j = (i + 1) % m;
        let (si, sj) = (side(i), side(j));
        let kind = if si == sj && si != 0 { si } else { 0 };
        if let Some((s, a0)) = run {
            if s != kind {
                total += corr(i, s) - a0;
                run = None;
            }
        }
        if kind != 0 {
            if run.is_none() {
                run = Some((kind, corr(i, kind)));
            }
            if kind < 0 {
                total += if j == 0 {
                    wrap_pi(samples[0].ell.im - samples[i].ell.im)
                } else {
                    samples[j].ell.im - samples[i].ell.im
                };
            }
            continue;
        }
        let ai = match cached {
            Some((k, a)) if k == i => a,
            _ => arg_diff(samples[i].ell, big_l),
        };
        let aj = arg_diff(samples[j].ell, big_l);
        cached = Some((j, aj));
        match resolve_increment(f, samples[i], ai, samples[j], aj, big_l, precision, 0) {
            Some(d) => total += d,
            None => return (None, margin, ProbeStatus::Unresolved),
        }
    }
    if let Some((s, a0)) = run {
        total += corr(0, s) - a0;
    }
    let w = total / (2.0 * PI);
    let wr = w.round();
    if (w - wr).abs() > 1e-6 {
        return (None, margin, ProbeStatus::Unresolved);
    }
    (Some(wr as i64), margin, ProbeStatus::Ok)
}

#[allow(clippy::too_many_arguments)]
fn resolve_increment(
    f: &FunctionSpec,
    s0: Sample,
    a0: f64,
    s1: Sample,
    a1: f64,
    big_l: Complex64,
    precision: u32,
    depth: usize,
) -> Option<f64> {
    let d = wrap_pi(a1 - a0);
    if d.abs() < PI / 2.0 {
        return Some(d);
    }
    if depth >= 30 {
        return None;
    }
    let z = 0.5 * (s0.z + s1.z);
    let (l, _) = log_at(f, z, precision).ok()?;
    let ell = Complex64::new(l.re, s0.ell.im + wrap_pi(l.im - s0.ell.im));
    let mid = Sample { z, ell };
    let am = arg_diff(ell, big_l);
    Some(
        resolve_increment(f, s0, a0, mid, am, big_l, precision, depth + 1)?
            + resolve_increment(f, mid, am, s1, a1, big_l, precision, depth + 1)?,
    )
}

/// Winding numbers of f(∂Σ) around a log-polar probe grid of the annulus.
pub fn image_annulus_certificate(
    f: &FunctionSpec,
    region: &Region,
    annulus: LogAnnulus,
    opts: CertOptions,
) -> Result<CoverCertificate, CoverError> {
    if !(annulus.log_in <= annulus.log_out) || !annulus.log_in.is_finite() || !annulus.log_out.is_finite() {
        return Err(CoverError::InvalidAnnulus(format!("{annulus:?}")));
    }
    let samples = sample_boundary(f, &region.boundary, opts.base_samples, opts.precision)?;
    let nr = opts.probes.radii.max(1);
    let na = opts.probes.angles.max(1);
    let mut grid = Vec::with_capacity(nr * na);
    for i in 0..nr {
        let lr = if nr == 1 { 0.5 * (annulus.log_in + annulus.log_out) } else {
            annulus.log_in + (annulus.log_out - annulus.log_in) * i as f64 / (nr - 1) as f64
        };
        for j in 0..na {
            grid.push((lr, 2.0 * PI * (j as f64 + 0.5) / na as f64 - PI));
        }
    }
    let probes: Vec<Probe> = grid
        .par_iter()
        .map(|&(lr, phi)| {
            let (winding, margin, status) = probe_winding(f, &samples, Complex64::new(lr, phi), opts.precision);
            Probe { log_r: lr, phi, winding, margin, status }
        })
        .collect();
    let boundary_margin = probes.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let m = samples.len();
    let mut clearance = f64::INFINITY;
    for i in 0..m {
        let a = samples[i].ell.re;
        let b = samples[(i + 1) % m].ell.re;
        let (lo, hi) = (a.min(b), a.max(b));
        let d = if hi < annulus.log_in {
            annulus.log_in - hi
        } else if lo > annulus.log_out {
            lo - annulus.log_out
        } else {
            0.0
        };
        clearance = clearance.min(d);
    }
    let status = if probes.iter().any(|p| p.winding == Some(0)) {
        CoverStatus::Refuted
    } else if boundary_margin > 0.0 && probes.iter().all(|p| p.winding.map(|w| w >= 1).unwrap_or(false)) {
        CoverStatus::Certified
    } else {
        CoverStatus::Inconclusive
    };
    Ok(CoverCertificate {
        region: region.clone(),
        annulus,
        probe_grid: opts.probes,
        probes,
        boundary_margin,
        annulus_clearance: clearance,
        annulus_clear_of_boundary_image: clearance > 0.0,
        boundary_samples: m,
        precision: opts.precision,
        status,
    })
}

/// Winding number of f(∂Σ) around 0 (zeros of f in the region).
pub fn zero_count(f: &FunctionSpec, poly: &Polygon, precision: u32) -> Result<i64, CoverError> {
    if !has_zeros(f) {
        return Ok(0);
    }
    let s = sample_boundary(f, poly, 1024, precision)?;
    let first = s[0].ell.im;
    let last = s[s.len() - 1].ell.im;
    let closing = wrap_pi(first - last);
    Ok(((last + closing - first) / (2.0 * PI)).round() as i64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BCoverPrediction {
    pub r0: f64,
    pub c: f64,
    pub floor: f64,
    pub log_md: f64,
    pub uncertainty: f64,
    pub annulus: LogAnnulus,
    pub window: crate::geom::Window,
    pub certificate: Option<CoverCertificate>,
}

/// Predicted annulus (8 pi^2 c/(c-1), log M_D(r0)) with an optional
/// certificate over A(r0, c r0) ∩ D.
pub fn bcover_predict(
    f: &FunctionSpec,
    tract: &Arc<TractRegion>,
    r0: f64,
    c: f64,
    certify: Option<CertOptions>,
) -> Result<BCoverPrediction, CoverError> {
    if !(c > 1.0) {
        return Err(CoverError::InvalidAnnulus(format!("c = {c} must exceed 1")));
    }
    let floor = bcover_floor(c);
    let md = max_modulus_on_tract(f, tract, r0)?;
    if !(md.log_md - md.uncertainty > floor) {
        return Err(CoverError::PreconditionFails { lhs: md.log_md, rhs: floor, uncertainty: md.uncertainty });
    }
    let annulus = LogAnnulus::new(floor, md.log_md);
    let certificate = match certify {
        Some(opts) => {
            let region = Region::annulus_tract(tract.clone(), r0, c * r0, false, 64, 256)?;
            Some(image_annulus_certificate(f, &region, annulus, opts)?)
        }
        None => None,
    };
    Ok(BCoverPrediction { r0, c, floor, log_md: md.log_md, uncertainty: md.uncertainty, annulus, window: tract.window, certificate })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathBound {
    pub vertices: Vec<Complex64>,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypCoverResult {
    pub z1: Complex64,
    pub z2: Complex64,
    pub log_k: f64,
    pub lambda: f64,
    pub rho_upper: f64,
    pub paths: Vec<PathBound>,
    pub annulus: LogAnnulus,
    pub seed: u64,
    pub certificate: Option<CoverCertificate>,
}

/// Upper bound of the integral of 1/dist(z, ∂Ω) along [a,b]; None if the
/// segment leaves the region.
fn segment_density_bound(poly: &Polygon, tree: &SegmentTree, a: Complex64, b: Complex64, floor_len: f64) -> Option<f64> {
    let len = (b - a).norm();
    if len == 0.0 {
        return Some(0.0);
    }
    let m = 0.5 * (a + b);
    let d = tree.nearest(m)?.1;
    if !poly.contains(m) {
        return None;
    }
    if d > 0.5 * len && len <= d / 8.0 {
        // dist is 1-Lipschitz along the segment
        return Some(len / (d - 0.5 * len));
    }
    if len < floor_len {
        return None;
    }
    Some(segment_density_bound(poly, tree, a, m, floor_len)? + segment_density_bound(poly, tree, m, b, floor_len)?)
}

fn path_bound(poly: &Polygon, tree: &SegmentTree, pts: &[Complex64]) -> Option<f64> {
    let floor = 1e-12 * poly.diameter();
    let mut s = 0.0;
    for w in pts.windows(2) {
        s += segment_density_bound(poly, tree, w[0], w[1], floor)?;
    }
    Some(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypOptions {
    pub precision: u32,
    pub seed: u64,
    pub certify: Option<CertOptions>,
}

impl Default for HypOptions {
    fn default() -> Self {
        Self { precision: 53, seed: 0, certify: None }
    }
}

/// Lemma check: rho_Σ(z1,z2) < lambda(|f(z2)|/|f(z1)|) implies the covering.
pub fn hypcover_check(
    f: &FunctionSpec,
    region: &Region,
    z1: Complex64,
    z2: Complex64,
    opts: HypOptions,
) -> Result<HypCoverResult, CoverError> {
    let poly = &region.boundary;
    let tree = SegmentTree::new(poly);
    for z in [z1, z2] {
        if !poly.contains(z) || tree.nearest(z).map(|x| x.1).unwrap_or(0.0) <= 0.0 {
            return Err(MetricsError::PointNotInterior { z: [z.re, z.im] }.into());
        }
    }
    let winding = zero_count(f, poly, opts.precision)?;
    if winding != 0 {
        return Err(CoverError::VanishingF { winding });
    }
    let l1 = f.eval_log_adaptive(z1, opts.precision)?.logmod;
    let l2 = f.eval_log_adaptive(z2, opts.precision)?.logmod;
    let log_k = l2 - l1;
    let lambda = lambda_threshold_log(log_k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut candidates = vec![vec![z1, z2]];
    let span = z2 - z1;
    let normal = Complex64::new(-span.im, span.re);
    for _ in 0..8 {
        let s: f64 = rng.random::<f64>() - 0.5;
        let t: f64 = 0.25 + 0.5 * rng.random::<f64>();
        let m = z1 + span * t + normal * s;
        candidates.push(vec![z1, m, z2]);
    }
    let paths: Vec<PathBound> = candidates
        .into_iter()
        .map(|v| {
            let bound = path_bound(poly, &tree, &v);
            PathBound { vertices: v, bound }
        })
        .collect();
    let rho_upper = paths.iter().filter_map(|p| p.bound).fold(f64::INFINITY, f64::min);
    if !(rho_upper < lambda) {
        return Err(CoverError::BudgetExceeded { rho_upper, lambda });
    }
    let annulus = LogAnnulus::new(l1, l2);
    let certificate = match opts.certify {
        Some(c) => Some(image_annulus_certificate(f, region, annulus, c)?),
        None => None,
    };
    Ok(HypCoverResult { z1, z2, log_k, lambda, rho_upper, paths, annulus, seed: opts.seed, certificate })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WosParams {
    pub walks: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MCoverResult {
    pub z: Complex64,
    pub log_fz: f64,
    pub epsilon: f64,
    pub harmonic: HarmonicEstimate,
    /// pi (omega - ci95): certified lower bound for the angle.
    pub theta_lower: f64,
    pub eta: EtaReport,
    /// Poisson kernel at (eps, eta), a rigorous bound since theta' >= eps.
    pub kernel_at_eps: f64,
    /// The substitute bound C(eps)/log|f(z)|.
    pub kernel_substitute: f64,
    pub kernel_used: f64,
    pub threshold: f64,
    pub c_eps: f64,
    /// (P log|f(z)|, log|f(z)|): inner radius capped below C(eps).
    pub annulus: LogAnnulus,
    pub certificate: Option<CoverCertificate>,
}

#[allow(clippy::too_many_arguments)]
pub fn mcover_check(
    f: &FunctionSpec,
    region: &Region,
    z: Complex64,
    arc: &[u32],
    eps: f64,
    wos: WosParams,
    precision: u32,
    certify: Option<CertOptions>,
) -> Result<MCoverResult, CoverError> {
    let poly = &region.boundary;
    let arc_edges: Vec<usize> = (0..poly.len()).filter(|&i| arc.contains(&poly.edge_tags[i])).collect();
    if arc_edges.is_empty() {
        return Err(CoverError::LevelArcMismatch("empty arc".into()));
    }
    // vertices are traced onto the level curve; a chord midpoint may sit a
    // sagitta away, at most |f'/f| len / 8 for curvature below 1/len
    let worst = arc_edges
        .iter()
        .map(|&i| {
            let (a, b) = poly.edge(i);
            let m = 0.5 * (a + b);
            let mid_tol = f.logderiv_f64(m).norm() * (b - a).norm() / 8.0;
            let excess = (f.level_fn(m).abs() - mid_tol).max(0.0);
            f.level_fn(a).abs().max(excess)
        })
        .fold(0.0, f64::max);
    if worst > 1e-6 {
        return Err(CoverError::LevelArcMismatch(format!("|log|f| - log R| up to {worst:e} on the arc")));
    }
    if !poly.contains(z) {
        return Err(MetricsError::PointNotInterior { z: [z.re, z.im] }.into());
    }
    let log_fz = f.eval_log_adaptive(z, precision)?.logmod;
    let (eta, eta_report) = choose_eta(log_fz, eps)?;
    let harmonic = harmonic_measure_wos(poly, z, arc, wos.walks, wos.seed)?.with_epsilon(eps);
    let theta_lower = PI * (harmonic.omega - harmonic.ci95);
    if eps > theta_lower {
        return Err(CoverError::EpsilonNotSupported { eps, theta_lower });
    }
    let ce = c_eps(eps);
    let kernel_at_eps = poisson_kernel(eps, eta)?;
    let kernel_substitute = ce / log_fz;
    let kernel_used = kernel_at_eps.min(kernel_substitute);
    let threshold = mcover_threshold_from_kernel(kernel_used, eta)?;
    if !(log_fz > threshold) {
        return Err(CoverError::PreconditionFails { lhs: log_fz, rhs: threshold, uncertainty: 0.0 });
    }
    let mut harmonic = harmonic;
    harmonic.eta = Some(eta);
    let annulus = LogAnnulus::new(kernel_used * log_fz, log_fz);
    let certificate = match certify {
        Some(c) => Some(image_annulus_certificate(f, region, annulus, c)?),
        None => None,
    };
    Ok(MCoverResult {
        z,
        log_fz,
        epsilon: eps,
        harmonic,
        theta_lower,
        eta: eta_report,
        kernel_at_eps,
        kernel_substitute,
        kernel_used,
        threshold,
        c_eps: ce,
        annulus,
        certificate,
    })
}
