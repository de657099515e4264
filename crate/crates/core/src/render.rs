//! Raster masks of {|f| > R} and SVG overlays.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::complexfn::FunctionSpec;
use crate::geom::{Polygon, Window};
use crate::tract::{cell_zero_count, has_zeros, LevelCurve};

pub const WHITE: u8 = 255;
pub const BLACK: u8 = 0;

/// Row-major mask; row 0 is the top of the window (largest Im z).
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub window: Window,
    pub pixels: Vec<u8>,
}

impl Mask {
    pub fn pixel_center(&self, i: usize, j: usize) -> Complex64 {
        let w = &self.window;
        Complex64::new(
            w.x0 + (i as f64 + 0.5) * w.width() / self.width as f64,
            w.y1 - (j as f64 + 0.5) * w.height() / self.height as f64,
        )
    }

    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let w = &self.window;
        if !w.contains(z) {
            return None;
        }
        let i = (((z.re - w.x0) / w.width() * self.width as f64) as usize).min(self.width - 1);
        let j = (((w.y1 - z.im) / w.height() * self.height as f64) as usize).min(self.height - 1);
        Some((i, j))
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.pixels[j * self.width + i]
    }

    pub fn white_fraction(&self) -> f64 {
        self.pixels.iter().filter(|&&p| p == WHITE).count() as f64 / self.pixels.len() as f64
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Fraction of pixels of `fine` (twice the resolution) equal to their parent pixel here.
    pub fn agreement_with_double(&self, fine: &Mask) -> f64 {
        assert_eq!(fine.width, 2 * self.width);
        assert_eq!(fine.height, 2 * self.height);
        let mut same = 0usize;
        for j in 0..fine.height {
            for i in 0..fine.width {
                if fine.get(i, j) == self.get(i / 2, j / 2) {
                    same += 1;
                }
            }
        }
        same as f64 / fine.pixels.len() as f64
    }
}

/// White iff |f| > R at the pixel center and the pixel contains no zero.
pub fn tract_mask(f: &FunctionSpec, window: Window, width: usize, height: usize) -> Mask {
    let hx = 0.5 * window.width() / width as f64;
    let hy = 0.5 * window.height() / height as f64;
    let zeros = has_zeros(f);
    let mut mask = Mask { width, height, window, pixels: vec![BLACK; width * height] };
    let rows: Vec<Vec<u8>> = (0..height)
        .into_par_iter()
        .map(|j| {
            (0..width)
                .map(|i| {
                    let c = mask.pixel_center(i, j);
                    if !(f.level_fn(c) > 0.0) {
                        return BLACK;
                    }
                    if zeros && cell_zero_count(f, c, hx, hy) != 0 {
                        BLACK
                    } else {
                        WHITE
                    }
                })
                .collect()
        })
        .collect();
    mask.pixels = rows.concat();
    mask
}

/// Overlay primitives drawn on top of the traced curves.
#[derive(Clone, Debug, Default)]
pub struct Overlay {
    pub curves: Vec<LevelCurve>,
    pub polygons: Vec<Polygon>,
    /// Circles |z| = r.
    pub circles: Vec<f64>,
    pub points: Vec<Complex64>,
    /// Polyline through successive orbit points.
    pub orbit: Vec<Complex64>,
}

/// SVG 1.1 document in window coordinates (y flipped).
pub fn svg(window: Window, width: usize, height: usize, overlay: &Overlay) -> String {
    let sx = width as f64 / window.width();
    let sy = height as f64 / window.height();
    let map = |z: Complex64| ((z.re - window.x0) * sx, (window.y1 - z.im) * sy);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="black"/>"#);
    let path = |pts: &[Complex64], closed: bool| {
        let mut d = String::new();
        for (k, p) in pts.iter().enumerate() {
            let (x, y) = map(*p);
            let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, x, y);
        }
        if closed {
            d.push('Z');
        }
        d
    };
    for c in &overlay.curves {
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="white" stroke-width="1"/>"#, path(&c.vertices, c.closed));
    }
    for p in &overlay.polygons {
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="orange" stroke-width="1"/>"#, path(&p.vertices, true));
    }
    for &r in &overlay.circles {
        let (cx, cy) = map(Complex64::new(0.0, 0.0));
        let _ = writeln!(
            s,
            r#"<ellipse cx="{cx:.3}" cy="{cy:.3}" rx="{:.3}" ry="{:.3}" fill="none" stroke="deepskyblue" stroke-width="1"/>"#,
            r * sx,
            r * sy
        );
    }
    if overlay.orbit.len() > 1 {
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="red" stroke-width="1"/>"#, path(&overlay.orbit, false));
    }
    for p in overlay.points.iter().chain(&overlay.orbit) {
        let (x, y) = map(*p);
        let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2" fill="red"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exp_mask_is_right_half() {
        let m = tract_mask(&FunctionSpec::exp(), Window::square(2.0), 64, 64);
        for j in 0..64 {
            for i in 0..64 {
                let want = if i >= 32 { WHITE } else { BLACK };
                assert_eq!(m.get(i, j), want, "pixel {i},{j}");
            }
        }
        let pgm = m.to_pgm();
        assert!(pgm.starts_with(b"P5\n64 64\n255\n"));
        assert_eq!(pgm.len(), 13 + 64 * 64);
    }

    #[test]
    fn tiny_oval_detected_by_winding() {
        let f = FunctionSpec::expz2cos();
        let w = Window::new(4.0, 5.5, -0.75, 0.75);
        let m = tract_mask(&f, w, 32, 32);
        let (i, j) = m.pixel_of(Complex64::new(1.5 * PI, 0.0)).unwrap();
        assert_eq!(m.get(i, j), BLACK);
        assert_eq!(m.get(i, j.saturating_sub(3)), WHITE);
    }
}
