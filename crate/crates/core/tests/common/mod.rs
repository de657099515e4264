#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tractoria::covering::{image_annulus_certificate, CertOptions, CoverCertificate, CoverStatus, LogAnnulus, Region};
use tractoria::{FunctionSpec, Polygon};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn wrap(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI { PI } else { t }
}

/// A small covering instance: polynomial, closed region, log-scale annulus.
#[derive(Clone, Debug)]
pub struct Instance {
    pub roots: Vec<Complex64>,
    pub lead: Complex64,
    pub region: Polygon,
    pub annulus: LogAnnulus,
}

impl Instance {
    pub fn coeffs(&self) -> Vec<Complex64> {
        let mut c = vec![self.lead];
        for &r in &self.roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        c
    }

    pub fn spec(&self) -> FunctionSpec {
        FunctionSpec::poly(&self.coeffs())
    }

    /// p(z) and p'(z)/p(z) from the factored form.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let p = self.roots.iter().fold(self.lead, |acc, &r| acc * (z - r));
        let q = self.roots.iter().map(|&r| 1.0 / (z - r)).sum();
        (p, q)
    }
}

fn random_region(rng: &mut ChaCha8Rng, k: usize) -> Polygon {
    let c0 = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    if k % 2 == 0 {
        let (w, h) = (rng.random_range(0.8..2.0), rng.random_range(0.8..2.0));
        Polygon::rect(c0.re - w / 2.0, c0.re + w / 2.0, c0.im - h / 2.0, c0.im + h / 2.0)
    } else {
        Polygon::regular(c0, rng.random_range(0.5..1.2), 48)
    }
}

/// Twenty instances: even-indexed pairs with all zeros inside the region,
/// the rest zero-free on it; annuli inside, above and straddling the
/// boundary-modulus range.
pub fn soundness_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 0..count {
        let region = random_region(&mut rng, k);
        let (lo, hi) = region.bbox();
        let inside = k % 4 < 2;
        let deg = rng.random_range(1..=3);
        let mut roots = Vec::new();
        while roots.len() < deg {
            let z = if inside {
                c(rng.random_range(lo.re..hi.re), rng.random_range(lo.im..hi.im))
            } else {
                c(rng.random_range(lo.re - 1.5..hi.re + 1.5), rng.random_range(lo.im - 1.5..hi.im + 1.5))
            };
            let ok = if inside {
                region.contains(z) && region.boundary_dist(z) >= 0.15
            } else {
                !region.contains(z) && region.boundary_dist(z) >= 0.3
            };
            if ok {
                roots.push(z);
            }
        }
        let lead = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-PI..PI));
        let mut inst = Instance { roots, lead, region, annulus: LogAnnulus::new(0.0, 0.0) };
        let (bmin, bmax) = boundary_log_range(&inst);
        let span = (bmax - bmin).max(0.2);
        inst.annulus = match k % 3 {
            0 if inside => {
                let hi = bmin - rng.random_range(0.05..0.3);
                LogAnnulus::new(hi - rng.random_range(0.5..1.5), hi)
            }
            0 => {
                let lo = bmin + span * rng.random_range(0.1..0.4);
                LogAnnulus::new(lo, lo + span * rng.random_range(0.1..0.4))
            }
            1 => {
                let lo = bmax + rng.random_range(0.1..0.5);
                LogAnnulus::new(lo, lo + rng.random_range(0.1..0.5))
            }
            _ => LogAnnulus::new(bmin + 0.3 * span, bmax + 0.3),
        };
        out.push(inst);
    }
    out
}

pub fn boundary_log_range(inst: &Instance) -> (f64, f64) {
    let poly = &inst.region;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..poly.len() {
        let (a, b) = poly.edge(i);
        for k in 0..512 {
            let l = inst.eval(a + (b - a) * (k as f64 / 512.0)).0.norm().ln();
            lo = lo.min(l);
            hi = hi.max(l);
        }
    }
    (lo, hi)
}

/// Log-polar image of an n x n grid over the closed region, binned for
/// neighbourhood queries.
pub struct ImageGrid {
    delta: f64,
    nphi: usize,
    bins: HashMap<(i64, usize), Vec<(f64, f64)>>,
}

impl ImageGrid {
    pub fn new(inst: &Instance, n: usize, annulus: LogAnnulus) -> Self {
        let poly = &inst.region;
        let (lo, hi) = poly.bbox();
        let h = (hi - lo).re.max((hi - lo).im) / (n - 1) as f64;
        let mut pts = Vec::new();
        let mut qmax: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let z = lo + c(i as f64 * h, j as f64 * h);
                if !(poly.contains(z) || poly.boundary_dist(z) < 1e-12) {
                    continue;
                }
                let (p, q) = inst.eval(z);
                let l = p.norm().ln();
                if l >= annulus.log_in - 1.0 && l <= annulus.log_out + 1.0 {
                    qmax = qmax.max(q.norm());
                    pts.push((l, p.arg()));
                }
            }
        }
        // worst image spacing of neighbouring grid nodes in the log plane
        let delta = (2f64.sqrt() * h * qmax).max(1e-9);
        let nphi = ((2.0 * PI / delta).floor() as usize).max(1);
        let mut bins: HashMap<(i64, usize), Vec<(f64, f64)>> = HashMap::new();
        for (l, p) in pts {
            bins.entry(Self::key(delta, nphi, l, p)).or_default().push((l, p));
        }
        Self { delta, nphi, bins }
    }

    fn key(delta: f64, nphi: usize, l: f64, p: f64) -> (i64, usize) {
        let j = (((p + PI) / (2.0 * PI)) * nphi as f64).floor() as i64;
        ((l / delta).floor() as i64, j.rem_euclid(nphi as i64) as usize)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when some image node lies within delta of (l, phi).
    pub fn hits(&self, l: f64, phi: f64) -> bool {
        let (i, j) = Self::key(self.delta, self.nphi, l, phi);
        for di in -1..=1 {
            for dj in -1i64..=1 {
                let jj = (j as i64 + dj).rem_euclid(self.nphi as i64) as usize;
                if let Some(v) = self.bins.get(&(i + di, jj)) {
                    if v.iter().any(|&(a, b)| (a - l).abs() <= self.delta && wrap(b - phi).abs() <= self.delta) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

#[derive(Debug, Default)]
pub struct SoundnessTally {
    pub certified: usize,
    pub refuted: usize,
    pub inconclusive: usize,
    pub disagreements: Vec<String>,
}

pub fn certify(inst: &Instance, opts: CertOptions) -> CoverCertificate {
    let region = Region::quadrilateral(inst.region.clone()).unwrap();
    image_annulus_certificate(&inst.spec(), &region, inst.annulus, opts).unwrap()
}

/// Checks one certificate against the 512 x 512 image grid.
pub fn check_against_grid(k: usize, inst: &Instance, cert: &CoverCertificate, tally: &mut SoundnessTally) {
    match cert.status {
        CoverStatus::Inconclusive => tally.inconclusive += 1,
        CoverStatus::Certified => {
            tally.certified += 1;
            let grid = ImageGrid::new(inst, 512, inst.annulus);
            if let Some(p) = cert.probes.iter().find(|p| !grid.hits(p.log_r, p.phi)) {
                tally.disagreements.push(format!("#{k}: certified but probe ({}, {}) missed by the grid", p.log_r, p.phi));
            }
        }
        CoverStatus::Refuted => {
            tally.refuted += 1;
            let grid = ImageGrid::new(inst, 512, inst.annulus);
            let missed = cert.probes.iter().any(|p| p.winding == Some(0) && !grid.hits(p.log_r, p.phi));
            if !missed {
                tally.disagreements.push(format!("#{k}: refuted but every winding-0 probe is hit by the grid"));
            }
        }
    }
}

pub fn soundness_suite(seed: u64) -> SoundnessTally {
    let mut tally = SoundnessTally::default();
    for (k, inst) in soundness_instances(seed, 20).iter().enumerate() {
        let cert = certify(inst, CertOptions::default());
        check_against_grid(k, inst, &cert, &mut tally);
    }
    tally
}
