use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tractoria::catalog::{expz2cos_right_tract, expz2cos_sigma, expz2cos_zn, expz2cos_radii};
use tractoria::covering::tag;
use tractoria::metrics::*;
use tractoria::{MetricsError, Polygon};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Adaptive Simpson on [a, b].
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        let t = (tol / 2.0).max(1e-15);
        rec(f, a, m, fa, flm, fm, left, t, depth - 1) + rec(f, m, b, fm, frm, fb, right, t, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 24)
}

#[test]
fn disk_distance_examples() {
    assert_eq!(hyperbolic_distance_disk(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
    let d = hyperbolic_distance_disk(c(0.0, 0.0), c(0.5, 0.0)).unwrap();
    assert!(close(d, 0.5 * 3f64.ln(), 1e-15));
    assert!((d - 0.5493).abs() < 1e-4);

    // transport z1 to 0 by the disk automorphism, then measure along a radius
    let (z1, z2) = (c(0.3, 0.0), c(0.0, 0.3));
    let w = (z2 - z1) / (c(1.0, 0.0) - z1.conj() * z2);
    let t = w.norm();
    let oracle = 0.5 * ((1.0 + t) / (1.0 - t)).ln();
    assert!(close(hyperbolic_distance_disk(z1, z2).unwrap(), oracle, 1e-14));

    assert!(matches!(hyperbolic_distance_disk(c(1.0, 0.0), c(0.0, 0.0)), Err(MetricsError::OutsideDisk { .. })));
}

#[test]
fn density_floor_examples() {
    let e = std::f64::consts::E;
    let v = punctured_plane_density_floor(c(e, 0.0)).unwrap();
    assert!(close(v, 1.0 / (2.0 * e * (1.0 + 10.0 * PI)), 1e-15));
    let v = punctured_plane_density_floor(Complex64::from_polar(1.0, 2.0)).unwrap();
    assert!(close(v, 1.0 / (20.0 * PI), 1e-14));
    let v = punctured_plane_density_floor(c(0.1, 0.0)).unwrap();
    assert!(close(v, 1.0 / (0.2 * (10f64.ln() + 10.0 * PI)), 1e-14));
    for w in [c(0.0, 0.0), c(1.0, 0.0), c(1.0 + 1e-14, 0.0)] {
        assert!(matches!(punctured_plane_density_floor(w), Err(MetricsError::AtPuncture { .. })));
    }
}

#[test]
fn lambda_examples() {
    assert!(lambda_threshold_log(1e-12).unwrap() < 1e-13);
    assert!(close(lambda_threshold_log(10.0 * PI).unwrap(), 0.5 * 2f64.ln(), 1e-15));
    assert!((lambda_threshold_log(10.0 * PI).unwrap() - 0.34657).abs() < 1e-5);
    assert!(matches!(lambda_threshold(1.0), Err(MetricsError::KNotAboveOne { .. })));
    assert!(matches!(lambda_threshold(0.5), Err(MetricsError::KNotAboveOne { .. })));

    // log K = 20 pi (2 eta / (1 - eta)) gives lambda = (1/2) log((1 + 3 eta)/(1 - eta))
    let eta = 0.9;
    let lam = lambda_threshold_log(20.0 * PI * 2.0 * eta / (1.0 - eta)).unwrap();
    let rho = hyperbolic_distance_disk(c(0.0, 0.0), c(eta, 0.0)).unwrap();
    assert!(close(rho, 0.5 * 19f64.ln(), 1e-14));
    assert!(close(lam, 0.5 * 37f64.ln(), 1e-14));
    assert!(lam > rho);
}

#[test]
fn poisson_examples() {
    for t in [-3.0, 0.0, 0.4, PI] {
        assert_eq!(poisson_kernel(t, 0.0).unwrap(), 1.0);
    }
    for eta in [0.1, 0.5, 0.9] {
        assert!(close(poisson_kernel(PI, eta).unwrap(), (1.0 - eta) / (1.0 + eta), 1e-15));
    }
    assert!(close(poisson_kernel(FRAC_PI_2, 0.8).unwrap(), 0.36 / 1.64, 1e-14));
    assert!(matches!(poisson_kernel(0.0, 1.0), Err(MetricsError::EtaOutOfRange { .. })));
    assert!(matches!(poisson_kernel(0.0, -0.1), Err(MetricsError::EtaOutOfRange { .. })));
    // decreasing in |theta| on (0, pi]
    for eta in [0.3, 0.9] {
        let v: Vec<f64> = (1..=100).map(|k| poisson_kernel(PI * k as f64 / 100.0, eta).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn poisson_integrates_to_one() {
    for eta in [0.0, 0.5, 0.9, 0.99] {
        let f = |t: f64| poisson_kernel(t, eta).unwrap();
        let mean = simpson(&f, 0.0, 2.0 * PI, 1e-12) / (2.0 * PI);
        assert!((mean - 1.0).abs() < 1e-8, "eta {eta}: {mean}");
    }
}

#[test]
fn mcover_threshold_examples() {
    assert!(close(mcover_threshold(PI, 0.5).unwrap(), 30.0 * PI, 1e-14));
    let p = 0.36 / 1.64;
    assert!(close(mcover_threshold(FRAC_PI_2, 0.8).unwrap(), 16.0 * PI / ((1.0 - p) * 0.2), 1e-13));
    assert!(matches!(mcover_threshold_from_kernel(1.0, 0.5), Err(MetricsError::KernelAtLeastOne { .. })));
    // eta below cos theta' puts the kernel above 1
    assert!(matches!(mcover_threshold(0.3, 0.9), Err(MetricsError::KernelAtLeastOne { .. })));
}

/// With eta = 1 - 40pi/u and P = C(eps)/u the threshold is eta u / (2(1 - P)),
/// which is below u exactly when u > 2C(eps) - 40pi.
#[test]
fn mcover_consistency_sweep() {
    for eps in [0.2, 0.5, 1.0, 1.4] {
        let ce = c_eps(eps);
        let floor = log_fz_floor(eps);
        assert!(floor <= ce);
        let boundary = 2.0 * ce - 40.0 * PI;
        for k in 1..=200 {
            let u = boundary * (1.0 + 0.05 * k as f64);
            let eta = 1.0 - 40.0 * PI / u;
            let th = mcover_threshold_from_kernel(ce / u, eta).unwrap();
            assert!(th < u, "eps {eps}, u {u}: threshold {th}");
        }
        // the floor alone does not suffice when P is this large
        let u = floor.max(ce * 1.001);
        if u < boundary {
            let eta = 1.0 - 40.0 * PI / u;
            let th = mcover_threshold_from_kernel(ce / u, eta).unwrap();
            assert!(th >= u);
        }
    }
}

#[test]
fn choose_eta_examples() {
    // 40pi / (1 - cos eps) <= 80pi iff cos eps <= 1/2
    let (eta, rep) = choose_eta(80.0 * PI, 1.2).unwrap();
    assert!(close(eta, 0.5, 1e-15));
    assert!(close(rep.lower, 40.0 * PI, 1e-15));
    assert!(close(rep.upper, 80.0 * PI, 1e-14));
    assert!(rep.holds);
    assert!(close(rep.c_eps, 160.0 * PI / 1.2f64.sin().powi(2), 1e-15));
    for u in [200.0, 1e3, 1e6] {
        let (_, r) = choose_eta(u, 1.2).unwrap();
        assert!(close(r.lower, 40.0 * PI, 1e-12) && r.holds);
    }
    assert!(matches!(choose_eta(80.0 * PI, 0.5), Err(MetricsError::LogTooSmall { .. })));
}

#[test]
fn cover_thresholds_fields() {
    let t = CoverThresholds::new(3.0, 2.0, 5.0).unwrap();
    assert!(close(t.lambda, 0.5 * (3.0 / (10.0 * PI)).ln_1p(), 1e-15));
    assert!(close(t.bcover_floor, 16.0 * PI * PI, 1e-15));
    assert!(t.lambda > 0.0 && t.bcover_floor > 0.0);
    assert!(CoverThresholds::new(3.0, 1.0, 5.0).is_err());
}

#[test]
fn wos_square_sides() {
    let sq = Polygon::rect(0.0, 1.0, 0.0, 1.0);
    let z = c(0.5, 0.5);
    let mut total = 0.0;
    let mut ci = 0.0;
    for side in 0..4 {
        let e = harmonic_measure_wos(&sq, z, &[side], 100_000, 17).unwrap();
        assert!((e.omega - 0.25).abs() <= e.ci95.max(1e-3) * 1.5, "side {side}: {} ± {}", e.omega, e.ci95);
        assert!(e.omega - e.ci95 >= 0.0 && e.omega + e.ci95 <= 1.0);
        assert!((e.eps_stop - 1e-6 * 2f64.sqrt()).abs() < 1e-15);
        total += e.omega;
        ci += e.ci95;
    }
    // the same seed gives the same walks, so the four sides partition them exactly
    assert!((total - 1.0).abs() <= 3.0 * ci, "{total}");
    let a = harmonic_measure_wos(&sq, z, &[0], 20_000, 3).unwrap();
    let b = harmonic_measure_wos(&sq, z, &[0], 20_000, 3).unwrap();
    assert_eq!(a.omega, b.omega);
}

#[test]
fn wos_disk_upper_half() {
    let n = 256;
    let verts: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
    let tags: Vec<u32> = (0..n).map(|k| (k < n / 2) as u32).collect();
    let poly = Polygon::with_tags(verts, tags).unwrap();
    let e = harmonic_measure_wos(&poly, c(0.0, 0.0), &[1], 100_000, 9).unwrap();
    assert!((e.omega - 0.5).abs() <= 1.5 * e.ci95, "{} ± {}", e.omega, e.ci95);
}

#[test]
fn wos_errors() {
    let sq = Polygon::rect(0.0, 1.0, 0.0, 1.0);
    assert!(matches!(harmonic_measure_wos(&sq, c(2.0, 0.5), &[0], 10, 0), Err(MetricsError::PointNotInterior { .. })));
    assert!(matches!(harmonic_measure_wos(&sq, c(0.5, 0.5), &[], 10, 0), Err(MetricsError::ArcEmpty)));
}

#[test]
fn wos_matches_laplace_on_random_convex_polygons() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..10 {
        let n = rng.random_range(3..9);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let verts: Vec<Complex64> = angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        let ids: Vec<u32> = (0..n as u32).collect();
        let poly = Polygon::with_tags(verts, ids).unwrap();
        let z = poly.centroid();
        if poly.boundary_dist(z) < 0.05 {
            continue;
        }
        let arc = [0u32, 1];
        let e = harmonic_measure_wos(&poly, z, &arc, 100_000, trial).unwrap();
        let oracle = harmonic_measure_laplace(&poly, z, &arc, 400).unwrap();
        assert!((e.omega - oracle).abs() <= e.ci95.max(0.01), "trial {trial}: wos {} ± {} vs {oracle}", e.omega, e.ci95);
    }
}

/// The largest piece of the tract boundary seen from z_1 keeps a definite share.
#[test]
fn expz2cos_sigma_one_measure() {
    let (_, b) = expz2cos_radii(1);
    let r = (b + 1.0).ceil();
    let t = expz2cos_right_tract(r, 2.0 * r / 512.0).unwrap();
    let sigma = expz2cos_sigma(Arc::new(t), 1).unwrap();
    let z1 = expz2cos_zn(1);
    let best = [tag::TRACT, tag::TRACT_OTHER]
        .iter()
        .filter(|&&k| sigma.boundary.edge_tags.contains(&k))
        .map(|&k| harmonic_measure_wos(&sigma.boundary, z1, &[k], 100_000, 1).unwrap())
        .max_by(|a, b| a.omega.total_cmp(&b.omega))
        .unwrap();
    let oracle = harmonic_measure_laplace(&sigma.boundary, z1, &best.arc, 400).unwrap();
    assert!((best.omega - oracle).abs() <= best.ci95.max(0.01), "{} vs {oracle}", best.omega);
    assert!(best.omega >= 0.05, "{}", best.omega);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lambda_increasing_and_subadditive(a in 1e-6f64..500.0, b in 1e-6f64..500.0) {
        let (la, lb, lab) = (lambda_threshold_log(a).unwrap(), lambda_threshold_log(b).unwrap(), lambda_threshold_log(a + b).unwrap());
        prop_assert!(lab > la && lab > lb);
        prop_assert!(lab <= la + lb + 1e-15);
    }

    #[test]
    fn mcover_threshold_grows_toward_one(theta in 0.1f64..PI) {
        let lo = theta.cos().max(0.0);
        let etas: Vec<f64> = (1..200).map(|k| lo + (1.0 - lo) * k as f64 / 200.0).collect();
        let v: Vec<f64> = etas.iter().map(|&e| mcover_threshold(theta, e).unwrap()).collect();
        // blows up at both ends of (cos theta', 1): falls, then rises for good
        let m = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert!(v[..=m].windows(2).all(|w| w[1] < w[0]));
        prop_assert!(v[m..].windows(2).all(|w| w[1] > w[0]));
        prop_assert!(mcover_threshold(theta, 1.0 - 1e-9).unwrap() > 1e9);
    }

    #[test]
    fn poisson_decreasing_in_angle(eta in 0.01f64..0.99, t1 in 0.0f64..PI, t2 in 0.0f64..PI) {
        let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        prop_assume!(b - a > 1e-9);
        prop_assert!(poisson_kernel(a, eta).unwrap() > poisson_kernel(b, eta).unwrap());
    }
}
