use std::f64::consts::PI;

use num_complex::Complex64;
use tractoria::render::{svg, tract_mask, Overlay, BLACK, WHITE};
use tractoria::{FunctionSpec, Polygon, Window};

#[test]
fn exp_mask_is_right_half_plane() {
    let m = tract_mask(&FunctionSpec::exp(), Window::square(4.0), 64, 48);
    for j in 0..48 {
        for i in 0..64 {
            let want = if m.pixel_center(i, j).re > 0.0 { WHITE } else { BLACK };
            assert_eq!(m.get(i, j), want);
        }
    }
    assert_eq!(m.white_fraction(), 0.5);
    let pgm = m.to_pgm();
    assert!(pgm.starts_with(b"P5\n64 48\n255\n"));
    assert_eq!(pgm.len(), 13 + 64 * 48);
}

#[test]
fn pixel_lookup_inverts_centres() {
    let m = tract_mask(&FunctionSpec::exp(), Window::new(-1.0, 3.0, 0.0, 2.0), 40, 20);
    for (i, j) in [(0, 0), (39, 19), (17, 5)] {
        assert_eq!(m.pixel_of(m.pixel_center(i, j)), Some((i, j)));
    }
    // row 0 is the top edge
    assert!(m.pixel_center(0, 0).im > m.pixel_center(0, 19).im);
    assert_eq!(m.pixel_of(Complex64::new(5.0, 1.0)), None);
}

#[test]
fn expz2cos_oval_holes() {
    let m = tract_mask(&FunctionSpec::expz2cos(), Window::square(8.0), 512, 512);
    for x in [-1.5 * PI, -0.5 * PI, 0.5 * PI, 1.5 * PI] {
        let (i, j) = m.pixel_of(Complex64::new(x, 0.0)).unwrap();
        assert_eq!(m.get(i, j), BLACK, "hole at {x}");
        // the hole is ringed by the tract along the real axis
        for dx in [-0.4, 0.4] {
            let (i, j) = m.pixel_of(Complex64::new(x + dx, 0.0)).unwrap();
            assert_eq!(m.get(i, j), WHITE, "ring at {}", x + dx);
        }
    }
    // the two lobes are separated along the imaginary axis
    for y in [-6.0, -3.0, 3.0, 6.0] {
        let (i, j) = m.pixel_of(Complex64::new(0.0, y)).unwrap();
        assert_eq!(m.get(i, j), BLACK);
    }
    for x in [-7.0, 7.0] {
        let (i, j) = m.pixel_of(Complex64::new(x, 0.3)).unwrap();
        assert_eq!(m.get(i, j), WHITE);
    }
}

#[test]
fn doubled_resolution_agrees() {
    // disagreement sits on boundary pixels, so it falls like the pixel size;
    // EXPZ2COS has enough boundary on [-8, 8]^2 to need 1024 pixels per side
    for f in [FunctionSpec::exp(), FunctionSpec::expz2cos(), FunctionSpec::recip_exp_g()] {
        let w = Window::square(8.0);
        let coarse = tract_mask(&f, w, 1024, 1024);
        let fine = tract_mask(&f, w, 2048, 2048);
        let a = coarse.agreement_with_double(&fine);
        assert!(a >= 0.999, "{}: {a}", f.name());
    }
}

#[test]
fn svg_overlay_document() {
    let ov = Overlay {
        curves: vec![],
        polygons: vec![Polygon::rect(0.0, 1.0, 0.0, 1.0)],
        circles: vec![2.0],
        points: vec![Complex64::new(1.0, 1.0)],
        orbit: vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 2.0)],
    };
    let s = svg(Window::square(4.0), 200, 200, &ov);
    assert!(s.starts_with("<?xml") || s.starts_with("<svg"));
    assert!(s.contains("version=\"1.1\""));
    assert!(s.trim_end().ends_with("</svg>"));
    assert!(s.contains("<circle"));
    assert!(s.contains("<polygon") || s.contains("<polyline") || s.contains("<path"));
}
