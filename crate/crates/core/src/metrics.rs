//! Hyperbolic bounds, Poisson-kernel arithmetic, covering thresholds and
//! harmonic-measure estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::geom::{cross, Polygon, SegmentTree};

const PUNCTURE_TOL: f64 = 1e-12;

/// Hyperbolic distance in the unit disk for the density 1/(1-|z|^2).
pub fn hyperbolic_distance_disk(z1: Complex64, z2: Complex64) -> Result<f64, MetricsError> {
    for z in [z1, z2] {
        if !(z.norm() < 1.0) {
            return Err(MetricsError::OutsideDisk { z: [z.re, z.im] });
        }
    }
    let t = (z1 - z2).norm() / (Complex64::new(1.0, 0.0) - z1.conj() * z2).norm();
    Ok(t.atanh())
}

/// Lower bound 1/(2|w|(|log|w|| + 10 pi)) for the density of C \ {0,1}.
pub fn punctured_plane_density_floor(w: Complex64) -> Result<f64, MetricsError> {
    if w.norm() < PUNCTURE_TOL || (w - 1.0).norm() < PUNCTURE_TOL {
        return Err(MetricsError::AtPuncture { w: [w.re, w.im] });
    }
    let a = w.norm();
    Ok(1.0 / (2.0 * a * (a.ln().abs() + 10.0 * PI)))
}

/// lambda(K) = (1/2) log(1 + log K / (10 pi)), given log K.
pub fn lambda_threshold_log(log_k: f64) -> Result<f64, MetricsError> {
    if !(log_k > 0.0) {
        return Err(MetricsError::KNotAboveOne { log_k });
    }
    Ok(0.5 * (log_k / (10.0 * PI)).ln_1p())
}

pub fn lambda_threshold(k: f64) -> Result<f64, MetricsError> {
    lambda_threshold_log(k.ln())
}

pub fn poisson_kernel(theta: f64, eta: f64) -> Result<f64, MetricsError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(MetricsError::EtaOutOfRange { eta });
    }
    let d = 1.0 - 2.0 * eta * theta.cos() + eta * eta;
    Ok((1.0 - eta * eta) / d)
}

/// 20 pi eta / ((1 - P) (1 - eta)) for a given kernel value P.
pub fn mcover_threshold_from_kernel(p: f64, eta: f64) -> Result<f64, MetricsError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(MetricsError::EtaOutOfRange { eta });
    }
    if !(p < 1.0) {
        return Err(MetricsError::KernelAtLeastOne { p });
    }
    Ok(20.0 * PI * eta / ((1.0 - p) * (1.0 - eta)))
}

pub fn mcover_threshold(theta_prime: f64, eta: f64) -> Result<f64, MetricsError> {
    let p = poisson_kernel(theta_prime, eta)?;
    mcover_threshold_from_kernel(p, eta)
}

/// C(eps) = 160 pi / sin^2 eps.
pub fn c_eps(eps: f64) -> f64 {
    160.0 * PI / eps.sin().powi(2)
}

/// Smallest log|f(z)| for which the eta choice is admissible.
pub fn log_fz_floor(eps: f64) -> f64 {
    40.0 * PI / (1.0 - eps.cos())
}

pub fn bcover_floor(c: f64) -> f64 {
    8.0 * PI * PI * c / (c - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta: f64,
    pub log_fz: f64,
    pub epsilon: f64,
    /// (1 - eta) log|f(z)|, equal to 40 pi by construction.
    pub lower: f64,
    /// (1/2) C(eps) sin^2 eps.
    pub upper: f64,
    pub c_eps: f64,
    pub holds: bool,
}

/// eta = 1 - 40 pi / log|f(z)| with the sandwich check.
pub fn choose_eta(log_fz: f64, eps: f64) -> Result<(f64, EtaReport), MetricsError> {
    let required = log_fz_floor(eps);
    if !(log_fz >= required) {
        return Err(MetricsError::LogTooSmall { log_fz, required });
    }
    // 1 - eta kept separately: recovering it from eta cancels for large log|f(z)|
    let gap = 40.0 * PI / log_fz;
    let eta = 1.0 - gap;
    let lower = gap * log_fz;
    let ce = c_eps(eps);
    let upper = 0.5 * ce * eps.sin().powi(2);
    let holds = 40.0 * PI <= lower * (1.0 + 1e-12) && lower <= upper;
    Ok((eta, EtaReport { eta, log_fz, epsilon: eps, lower, upper, c_eps: ce, holds }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverThresholds {
    pub log_k: f64,
    pub lambda: f64,
    pub c: f64,
    pub r0: f64,
    pub bcover_floor: f64,
}

impl CoverThresholds {
    pub fn new(log_k: f64, c: f64, r0: f64) -> Result<Self, MetricsError> {
        if !(c > 1.0) {
            return Err(MetricsError::KNotAboveOne { log_k: c.ln() });
        }
        Ok(Self { log_k, lambda: lambda_threshold_log(log_k)?, c, r0, bcover_floor: bcover_floor(c) })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    pub region: Polygon,
    pub z: Complex64,
    pub arc: Vec<u32>,
    pub omega: f64,
    pub ci95: f64,
    pub walks: u64,
    pub seed: u64,
    pub eps_stop: f64,
    pub mean_steps: f64,
    pub epsilon_geom: Option<f64>,
    pub theta_prime: Option<f64>,
    pub eta: Option<f64>,
    pub c_eps: Option<f64>,
}

impl HarmonicEstimate {
    /// Records the eps-based quantities used by the covering lemmas.
    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon_geom = Some(eps);
        self.c_eps = Some(c_eps(eps));
        self.theta_prime = Some(PI * self.omega);
        self
    }
}

pub const DEFAULT_WALKS: u64 = 100_000;
const MAX_STEPS: usize = 100_000;

fn check_region(region: &Polygon, z: Complex64, arc: &[u32]) -> Result<(), MetricsError> {
    if region.len() < 3 {
        return Err(MetricsError::InvalidPolygon("fewer than 3 vertices".into()));
    }
    if !region.edge_tags.iter().any(|t| arc.contains(t)) {
        return Err(MetricsError::ArcEmpty);
    }
    if !region.contains(z) {
        return Err(MetricsError::PointNotInterior { z: [z.re, z.im] });
    }
    Ok(())
}

/// Walk-on-spheres estimate of the harmonic measure of the edges tagged `arc`.
pub fn harmonic_measure_wos(
    region: &Polygon,
    z: Complex64,
    arc: &[u32],
    walks: u64,
    seed: u64,
) -> Result<HarmonicEstimate, MetricsError> {
    check_region(region, z, arc)?;
    let tree = SegmentTree::new(region);
    let eps_stop = 1e-6 * region.diameter();
    if tree.nearest(z).map(|n| n.1).unwrap_or(0.0) <= eps_stop {
        return Err(MetricsError::PointNotInterior { z: [z.re, z.im] });
    }
    let tags = &region.edge_tags;
    let (hits, steps): (u64, u64) = (0..walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut p = z;
            let mut n = 0u64;
            loop {
                let (e, d) = tree.nearest(p).expect("nonempty polygon");
                if d <= eps_stop || n as usize >= MAX_STEPS {
                    return (arc.contains(&tags[e]) as u64, n);
                }
                let t: f64 = rng.random::<f64>() * 2.0 * PI;
                p += Complex64::from_polar(d, t);
                n += 1;
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let omega = hits as f64 / walks as f64;
    let half = 1.96 * (omega * (1.0 - omega) / walks as f64).sqrt();
    let ci95 = half.min(omega).min(1.0 - omega);
    Ok(HarmonicEstimate {
        region: region.clone(),
        z,
        arc: arc.to_vec(),
        omega,
        ci95,
        walks,
        seed,
        eps_stop,
        mean_steps: steps as f64 / walks as f64,
        epsilon_geom: None,
        theta_prime: None,
        eta: None,
        c_eps: None,
    })
}

/// First crossing of the segment p -> p + d with the polygon boundary,
/// as (fraction along the segment, edge index).
fn first_hit(tree: &SegmentTree, poly: &Polygon, p: Complex64, d: Complex64) -> Option<(f64, usize)> {
    let q = p + d;
    let mut best: Option<(f64, usize)> = None;
    tree.visit_overlapping(p, q, &mut |e| {
        let (a, b) = poly.edge(e);
        let s = b - a;
        let den = cross(d, s);
        if den == 0.0 {
            return;
        }
        let t = cross(a - p, s) / den;
        let u = cross(a - p, d) / den;
        if (0.0..=1.0).contains(&u) && t > 0.0 && t <= 1.0 && best.map(|b| t < b.0).unwrap_or(true) {
            best = Some((t, e));
        }
    });
    best
}

/// Harmonic measure from a second-order finite-difference solve of the
/// Dirichlet problem (Shortley-Weller stencil, SOR iteration) on a grid of
/// roughly `n` nodes across the region, with z placed on a node.
pub fn harmonic_measure_laplace(region: &Polygon, z: Complex64, arc: &[u32], n: usize) -> Result<f64, MetricsError> {
    check_region(region, z, arc)?;
    let tree = SegmentTree::new(region);
    let (lo, hi) = region.bbox();
    let h = (hi - lo).re.max((hi - lo).im) / n as f64;
    let i0 = ((lo.re - z.re) / h).floor() as i64 - 1;
    let i1 = ((hi.re - z.re) / h).ceil() as i64 + 1;
    let j0 = ((lo.im - z.im) / h).floor() as i64 - 1;
    let j1 = ((hi.im - z.im) / h).ceil() as i64 + 1;
    let w = (i1 - i0 + 1) as usize;
    let hgt = (j1 - j0 + 1) as usize;
    let node = |i: usize, j: usize| z + Complex64::new((i as i64 + i0) as f64 * h, (j as i64 + j0) as f64 * h);
    let mut index = vec![usize::MAX; w * hgt];
    let mut pts = Vec::new();
    for j in 0..hgt {
        for i in 0..w {
            let p = node(i, j);
            if region.contains(p) && tree.nearest(p).map(|x| x.1).unwrap_or(0.0) > 1e-9 * h {
                index[j * w + i] = pts.len();
                pts.push((i, j));
            }
        }
    }
    // per node: neighbor (index or boundary value) with stencil weight
    struct Row {
        nb: [(usize, f64); 4],
        rhs: f64,
    }
    let dirs = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
    let rows: Vec<Row> = pts
        .par_iter()
        .map(|&(i, j)| {
            let p = node(i, j);
            let mut a = [1.0f64; 4];
            let mut nbv: [Option<usize>; 4] = [None; 4];
            let mut bval = [0.0f64; 4];
            for (k, &(di, dj)) in dirs.iter().enumerate() {
                let d = Complex64::new(di as f64 * h, dj as f64 * h);
                if let Some((t, e)) = first_hit(&tree, region, p, d) {
                    a[k] = t.max(1e-4);
                    bval[k] = arc.contains(&region.edge_tags[e]) as u8 as f64;
                } else {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    let m = index[jj as usize * w + ii as usize];
                    if m == usize::MAX {
                        // neighbor excluded for sitting on the boundary
                        let (e, _) = tree.nearest(p + d).expect("nonempty");
                        bval[k] = arc.contains(&region.edge_tags[e]) as u8 as f64;
                    } else {
                        nbv[k] = Some(m);
                    }
                }
            }
            let (ae, aw, an, as_) = (a[0], a[1], a[2], a[3]);
            let coef = [2.0 / (ae * (ae + aw)), 2.0 / (aw * (ae + aw)), 2.0 / (an * (an + as_)), 2.0 / (as_ * (an + as_))];
            let diag = 2.0 / (ae * aw) + 2.0 / (an * as_);
            let mut nb = [(usize::MAX, 0.0); 4];
            let mut rhs = 0.0;
            for k in 0..4 {
                match nbv[k] {
                    Some(m) => nb[k] = (m, coef[k] / diag),
                    None => rhs += coef[k] * bval[k] / diag,
                }
            }
            Row { nb, rhs }
        })
        .collect();
    let mut u = vec![0.0f64; pts.len()];
    let span = w.max(hgt) as f64;
    let omega = 2.0 / (1.0 + (PI / span).sin());
    for _ in 0..200_000 {
        let mut change = 0.0f64;
        for (k, r) in rows.iter().enumerate() {
            let mut v = r.rhs;
            for &(m, c) in &r.nb {
                if m != usize::MAX {
                    v += c * u[m];
                }
            }
            let dv = omega * (v - u[k]);
            u[k] += dv;
            change = change.max(dv.abs());
        }
        if change < 1e-12 {
            break;
        }
    }
    let k0 = index[(-j0) as usize * w + (-i0) as usize];
    if k0 == usize::MAX {
        return Err(MetricsError::PointNotInterior { z: [z.re, z.im] });
    }
    Ok(u[k0])
}
