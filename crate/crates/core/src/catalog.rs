//! Regions and sample points for the featured functions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;

use crate::complexfn::{series_g, FunctionSpec};
use crate::covering::Region;
use crate::error::{CoverError, TractError};
use crate::geom::Window;
use crate::tract::{locate_tract, TractRegion};

/// Right tract of e^{z^2} cos z inside [-r_max, r_max]^2.
pub fn expz2cos_right_tract(r_max: f64, resolution: f64) -> Result<TractRegion, TractError> {
    let w = Window::new(-r_max, r_max, -r_max, r_max);
    locate_tract(&FunctionSpec::expz2cos(), Complex64::new(5.0, 0.0), 1.0, w, resolution)
}

/// Right tract of e^z inside [-r_max, r_max]^2.
pub fn exp_tract(r_max: f64, resolution: f64) -> Result<TractRegion, TractError> {
    let w = Window::new(-r_max, r_max, -r_max, r_max);
    locate_tract(&FunctionSpec::exp(), Complex64::new(1.0, 0.0), 1.0, w, resolution)
}

/// Inner and outer radius of the n-th upper-half quadrilateral: (2n+1)pi/2, (2n+3)pi/2.
pub fn expz2cos_radii(n: usize) -> (f64, f64) {
    ((2 * n + 1) as f64 * FRAC_PI_2, (2 * n + 3) as f64 * FRAC_PI_2)
}

/// A((2n+1)pi/2, (2n+3)pi/2) ∩ D ∩ H.
pub fn expz2cos_sigma(tract: Arc<TractRegion>, n: usize) -> Result<Region, CoverError> {
    let (a, b) = expz2cos_radii(n);
    Region::annulus_tract(tract, a, b, true, 96, 384)
}

/// z_n = (2n+2)(pi/2) e^{i pi/8}.
pub fn expz2cos_zn(n: usize) -> Complex64 {
    Complex64::from_polar((2 * n + 2) as f64 * FRAC_PI_2, PI / 8.0)
}

/// r_n = (1+eps) 2^{n+1} and r'_n = (1-2 eps) 2^{n+2}.
pub fn g_radii(n: u32, eps: f64) -> (f64, f64) {
    ((1.0 + eps) * 2f64.powi(n as i32 + 1), (1.0 - 2.0 * eps) * 2f64.powi(n as i32 + 2))
}

/// Angle of the ray A_{j,n}.
pub fn g_a_angle(j: u64, n: u32) -> f64 {
    2.0 * PI * j as f64 / 2f64.powi(n as i32)
}

/// Angle of the segment B_{j,n}.
pub fn g_b_angle(j: u64, n: u32) -> f64 {
    PI / 2f64.powi(n as i32) + g_a_angle(j, n)
}

/// Sample points on A_{j,n} for r in [r_n, r_max].
pub fn g_a_samples(j: u64, n: u32, eps: f64, r_max: f64, count: usize) -> Vec<Complex64> {
    let (rn, _) = g_radii(n, eps);
    let t = g_a_angle(j, n);
    (0..count).map(|k| Complex64::from_polar(rn + (r_max - rn) * k as f64 / (count - 1).max(1) as f64, t)).collect()
}

/// Sample points on B_{j,n}.
pub fn g_b_samples(j: u64, n: u32, eps: f64, count: usize) -> Vec<Complex64> {
    let (rn, rp) = g_radii(n, eps);
    let t = g_b_angle(j, n);
    (0..count).map(|k| Complex64::from_polar(rn + (rp - rn) * k as f64 / (count - 1).max(1) as f64, t)).collect()
}

/// The annular sector between A_{j,n} and A_{j+1,n}, r_n <= |z| <= r'_n.
pub fn g_sector(j: u64, n: u32, eps: f64) -> Result<Region, CoverError> {
    let (rn, rp) = g_radii(n, eps);
    Region::annulus_sector(rn, rp, g_a_angle(j, n), g_a_angle(j + 1, n), 256)
}

/// The two interior points used for the hyperbolic covering check.
pub fn g_pair(j: u64, n: u32, eps: f64) -> (Complex64, Complex64) {
    let (rn, rp) = g_radii(n, eps);
    let m = 0.5 * (rn + rp);
    let t = g_a_angle(j, n);
    (
        Complex64::from_polar(m, PI / 2f64.powi(n as i32 + 2) + t),
        Complex64::from_polar(m, g_b_angle(j, n)),
    )
}

/// g(z) in double precision.
pub fn g_value(z: Complex64) -> Complex64 {
    series_g(&z).0
}
