mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{c, certify, check_against_grid, soundness_instances, ImageGrid, SoundnessTally};
use tractoria::catalog::{exp_tract, g_pair, g_sector, g_value};
use tractoria::covering::*;
use tractoria::metrics::{lambda_threshold_log, log_fz_floor};
use tractoria::{CoverError, FunctionSpec, MetricsError, Polygon};

#[test]
fn square_map_covers_inner_annulus_twice() {
    let f = FunctionSpec::poly(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let region = Region::quadrilateral(Polygon::regular(c(0.0, 0.0), 1.0, 256)).unwrap();
    let cert = image_annulus_certificate(&f, &region, LogAnnulus::new(0.1f64.ln(), 0.9f64.ln()), CertOptions::default()).unwrap();
    assert_eq!(cert.status, CoverStatus::Certified);
    assert!(cert.boundary_margin > 0.0);
    assert!(cert.probes.iter().all(|p| p.winding == Some(2)));
    assert_eq!(cert.probes.len(), 32 * 64);
}

#[test]
fn exp_rectangle_certified_and_refuted() {
    let f = FunctionSpec::exp();
    let region = Region::quadrilateral(Polygon::rect(1.0, 2.0, 0.0, 2.0 * PI)).unwrap();
    let cert = image_annulus_certificate(&f, &region, LogAnnulus::new(1.2, 1.8), CertOptions::default()).unwrap();
    assert_eq!(cert.status, CoverStatus::Certified);
    assert!(cert.probes.iter().all(|p| p.winding == Some(1)));

    let cert = image_annulus_certificate(&f, &region, LogAnnulus::new(2.5, 3.0), CertOptions::default()).unwrap();
    assert_eq!(cert.status, CoverStatus::Refuted);
    assert!(cert.probes.iter().all(|p| p.winding == Some(0) && p.margin > 0.0));
}

#[test]
fn certificate_json_round_trip() {
    let f = FunctionSpec::exp();
    let region = Region::quadrilateral(Polygon::rect(1.0, 2.0, 0.0, 2.0 * PI)).unwrap();
    let opts = CertOptions { probes: ProbeGrid { radii: 4, angles: 8 }, ..CertOptions::default() };
    let cert = image_annulus_certificate(&f, &region, LogAnnulus::new(1.2, 1.8), opts).unwrap();
    let js = serde_json::to_string(&cert).unwrap();
    let back: CoverCertificate = serde_json::from_str(&js).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), js);
    let again = image_annulus_certificate(&f, &back.region, back.annulus, opts).unwrap();
    assert_eq!(serde_json::to_string(&again).unwrap(), js);
}

#[test]
fn soundness_against_image_grid() {
    let mut tally = SoundnessTally::default();
    let insts = soundness_instances(2024, 20);
    for (k, inst) in insts.iter().enumerate() {
        let cert = certify(inst, CertOptions::default());
        check_against_grid(k, inst, &cert, &mut tally);
    }
    assert!(tally.disagreements.is_empty(), "{:#?}", tally.disagreements);
    assert!(tally.certified >= 3 && tally.refuted >= 3, "{tally:?}");
}

#[test]
fn winding_stable_under_doubled_sampling() {
    for inst in soundness_instances(77, 8) {
        let a = certify(&inst, CertOptions::default());
        if a.status == CoverStatus::Inconclusive {
            continue;
        }
        let b = certify(&inst, CertOptions { base_samples: 2 * CertOptions::default().base_samples, ..CertOptions::default() });
        assert_eq!(a.status, b.status);
        for (p, q) in a.probes.iter().zip(&b.probes) {
            if p.winding.is_some() && q.winding.is_some() {
                assert_eq!(p.winding, q.winding, "probe ({}, {})", p.log_r, p.phi);
            }
        }
    }
}

#[test]
fn zero_count_matches_roots() {
    for inst in soundness_instances(5, 8) {
        let inside = inst.roots.iter().filter(|&&r| inst.region.contains(r)).count() as i64;
        assert_eq!(zero_count(&inst.spec(), &inst.region, 53).unwrap(), inside);
    }
}

#[test]
fn bcover_examples() {
    let tract = Arc::new(exp_tract(420.0, 420.0 / 64.0).unwrap());
    let f = FunctionSpec::exp();
    let pred = bcover_predict(&f, &tract, 200.0, 2.0, Some(CertOptions { probes: ProbeGrid { radii: 8, angles: 16 }, ..CertOptions::default() })).unwrap();
    assert!((pred.floor - 16.0 * PI * PI).abs() < 1e-12 * pred.floor);
    assert!((pred.log_md - 200.0).abs() <= pred.uncertainty.max(1e-9));
    assert_eq!(pred.annulus, LogAnnulus::new(pred.floor, pred.log_md));
    let cert = pred.certificate.unwrap();
    assert_eq!(cert.status, CoverStatus::Certified);
    // log-scale oracle: w = e^L has the preimage L + 2 pi i k in A(200, 400) ∩ {Re z > 0}
    for p in &cert.probes {
        let hit = (-100..100).any(|k: i32| {
            let z = c(p.log_r, p.phi + 2.0 * PI * k as f64);
            z.norm() > 200.0 && z.norm() < 400.0
        });
        assert!(hit);
    }

    // rejected iff log M_D(r0) <= 8 pi^2 c/(c-1)
    match bcover_predict(&f, &tract, 150.0, 2.0, None) {
        Err(CoverError::PreconditionFails { lhs, rhs, .. }) => assert!(lhs <= rhs),
        r => panic!("{r:?}"),
    }
    assert!(bcover_predict(&f, &tract, 160.0, 2.0, None).is_ok());
    assert!(bcover_floor_values_decrease());
}

fn bcover_floor_values_decrease() -> bool {
    let v: Vec<f64> = [1.01, 1.5, 2.0, 4.0, 100.0, 1e6].iter().map(|&c| tractoria::metrics::bcover_floor(c)).collect();
    v.windows(2).all(|w| w[1] < w[0]) && (v[5] - 8.0 * PI * PI).abs() < 1e-4
}

#[test]
fn hypcover_degenerate_and_strict() {
    let f = FunctionSpec::exp();
    let region = Region::quadrilateral(Polygon::rect(9.0, 11.0, -1.0, 1.0)).unwrap();
    match hypcover_check(&f, &region, c(10.0, 0.0), c(10.0, 0.0), HypOptions::default()) {
        Err(CoverError::Metrics(MetricsError::KNotAboveOne { .. })) => {}
        r => panic!("{r:?}"),
    }
    match hypcover_check(&f, &region, c(9.5, 0.0), c(10.5, 0.0), HypOptions::default()) {
        Err(CoverError::BudgetExceeded { rho_upper, lambda }) => {
            assert!((lambda - 0.5 * (1.0 / (10.0 * PI)).ln_1p()).abs() < 1e-12);
            assert!((lambda - 0.0157).abs() < 1e-4);
            // density 1/dist >= 1 along the whole unit segment
            assert!(rho_upper >= 1.0);
        }
        r => panic!("{r:?}"),
    }
    let zeroed = FunctionSpec::poly(&[c(-10.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(hypcover_check(&zeroed, &region, c(9.5, 0.0), c(10.5, 0.0), HypOptions::default()), Err(CoverError::VanishingF { winding: 1 })));
}

#[test]
fn hypcover_example_one() {
    let f = FunctionSpec::recip_exp_g();
    for n in 4..=6u32 {
        let region = g_sector(0, n, 0.05).unwrap();
        let (z1, z2) = g_pair(0, n, 0.05);
        let res = hypcover_check(&f, &region, z1, z2, HypOptions::default()).unwrap();
        // log|exp(-g)| = -Re g, by direct summation
        let log_k = g_value(z1).re - g_value(z2).re;
        assert!((res.log_k - log_k).abs() <= 1e-9 * log_k.abs(), "n = {n}");
        assert!((res.lambda - lambda_threshold_log(log_k).unwrap()).abs() < 1e-12);
        assert!(res.rho_upper < res.lambda);
        assert!(res.rho_upper < 10.0, "n = {n}: {}", res.rho_upper);
    }
}

/// Accepted pairs must have the whole predicted annulus in the grid image.
fn hypcover_against_grid(inst: &common::Instance, rng: &mut ChaCha8Rng, pairs: usize, spread: f64) -> usize {
    let region = Region::quadrilateral(inst.region.clone()).unwrap();
    let (lo, hi) = inst.region.bbox();
    let mut accepted = 0;
    for _ in 0..pairs {
        let pick = |rng: &mut ChaCha8Rng, near: Option<Complex64>| loop {
            let z = match near {
                Some(w) => w + Complex64::from_polar(rng.random_range(0.0..spread), rng.random_range(-PI..PI)),
                None => c(rng.random_range(lo.re..hi.re), rng.random_range(lo.im..hi.im)),
            };
            if inst.region.contains(z) && inst.region.boundary_dist(z) > 1e-3 {
                return z;
            }
        };
        let mut z1 = pick(rng, None);
        let mut z2 = pick(rng, Some(z1));
        if inst.eval(z1).0.norm() > inst.eval(z2).0.norm() {
            std::mem::swap(&mut z1, &mut z2);
        }
        let Ok(res) = hypcover_check(&inst.spec(), &region, z1, z2, HypOptions::default()) else { continue };
        accepted += 1;
        let grid = ImageGrid::new(inst, 512, res.annulus);
        let probes = ProbeGrid::default();
        for i in 0..probes.radii {
            let l = res.annulus.log_in + (res.annulus.log_out - res.annulus.log_in) * i as f64 / (probes.radii - 1) as f64;
            for j in 0..probes.angles {
                let phi = 2.0 * PI * (j as f64 + 0.5) / probes.angles as f64 - PI;
                assert!(grid.hits(l, phi), "accepted ({z1}, {z2}) but ({l}, {phi}) missed");
            }
        }
    }
    accepted
}

#[test]
fn hypcover_never_certifies_missed_annulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for inst in soundness_instances(2024, 20).into_iter().filter(|i| !i.region.contains(i.roots[0])) {
        hypcover_against_grid(&inst, &mut rng, 4, 1.0);
    }
    // z^400 away from 0 has K large enough for the lemma to apply
    let mut accepted = 0;
    for k in 0..3 {
        let x0 = 1.5 + 0.5 * k as f64;
        let inst = common::Instance {
            roots: vec![c(0.0, 0.0); 400],
            lead: c(1.0, 0.0),
            region: Polygon::rect(x0, x0 + 3.0, -1.5, 1.5),
            annulus: LogAnnulus::new(0.0, 0.0),
        };
        accepted += hypcover_against_grid(&inst, &mut rng, 6, 0.3);
    }
    assert!(accepted >= 3, "only {accepted} pairs accepted");
}

#[test]
fn mcover_examples() {
    let f = FunctionSpec::with_level(tractoria::FnKind::Exp, 500f64.exp());
    let region = Region::quadrilateral(Polygon::rect(500.0, 501.0, 0.0, 1.0)).unwrap();
    let wos = WosParams { walks: 20_000, seed: 3 };
    // the left side (tag 3) lies on |f| = e^500
    let z = c(500.3, 0.5);
    let res = mcover_check(&f, &region, z, &[3], 1.2, wos, 53, None).unwrap();
    assert!((res.log_fz - 500.3).abs() < 1e-9);
    assert!((res.eta.eta - (1.0 - 40.0 * PI / 500.3)).abs() < 1e-12);
    assert!(res.eta.holds);
    assert!(res.threshold < res.log_fz);
    assert!(res.theta_lower >= 1.2);
    assert_eq!(res.annulus.log_out, res.log_fz);

    // the precondition boundary
    let eps = 0.05;
    let need = log_fz_floor(eps);
    let g = FunctionSpec::with_level(tractoria::FnKind::Exp, 1.0);
    let tall = Region::quadrilateral(Polygon::rect(0.0, need + 10.0, -1.0, 1.0)).unwrap();
    match mcover_check(&g, &tall, c(need - 1.0, 0.0), &[3], eps, wos, 53, None) {
        Err(CoverError::Metrics(MetricsError::LogTooSmall { log_fz, required })) => {
            assert!((required - need).abs() < 1e-9 * need);
            assert!((log_fz - (need - 1.0)).abs() < 1e-6);
        }
        r => panic!("{r:?}"),
    }
    assert!(matches!(mcover_check(&g, &tall, c(1.0, 0.0), &[], eps, wos, 53, None), Err(CoverError::LevelArcMismatch(_))));
    // the right side is not on the level curve
    assert!(matches!(mcover_check(&g, &tall, c(1.0, 0.0), &[1], eps, wos, 53, None), Err(CoverError::LevelArcMismatch(_))));
}

/// The EXPZ2COS point z_1 has log|f| far below 40pi/(1 - cos 0.05).
#[test]
fn mcover_expz2cos_sigma_one_below_floor() {
    let z1 = 4.0 * (PI / 2.0) * Complex64::from_polar(1.0, PI / 8.0);
    let log_fz = (z1 * z1).re + z1.cos().norm().ln();
    assert!(log_fz < log_fz_floor(0.05));
    let f = FunctionSpec::expz2cos();
    let t = Arc::new(tractoria::catalog::expz2cos_right_tract(6.0, 12.0 / 256.0).unwrap());
    let sigma = tractoria::catalog::expz2cos_sigma(t, 1).unwrap();
    let wos = WosParams { walks: 2_000, seed: 1 };
    match mcover_check(&f, &sigma, z1, &[tag::TRACT], 0.05, wos, 53, None) {
        Err(CoverError::Metrics(MetricsError::LogTooSmall { log_fz: l, .. })) => assert!((l - log_fz).abs() < 1e-9),
        r => panic!("{r:?}"),
    }
}
