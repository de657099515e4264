//! Planar geometry: viewports, polygons and nearest-segment queries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn square(h: f64) -> Self {
        Self::new(-h, h, -h, h)
    }

    /// Parses `x0,x1,y0,y1`.
    pub fn parse(s: &str) -> Option<Self> {
        let v: Vec<f64> = s.split(',').map(|t| t.trim().parse().ok()).collect::<Option<_>>()?;
        if v.len() != 4 {
            return None;
        }
        let w = Self::new(v[0], v[1], v[2], v[3]);
        w.is_valid().then_some(w)
    }

    pub fn is_valid(&self) -> bool {
        [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite()) && self.x1 > self.x0 && self.y1 > self.y0
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x0 && z.re <= self.x1 && z.im >= self.y0 && z.im <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn union(&self, o: &Window) -> Window {
        Window::new(self.x0.min(o.x0), self.x1.max(o.x1), self.y0.min(o.y0), self.y1.max(o.y1))
    }

    /// Largest r such that the disk |z| <= r fits in the window.
    pub fn inscribed_radius(&self) -> f64 {
        (-self.x0).min(self.x1).min(-self.y0).min(self.y1)
    }

    /// Largest |z| over the window.
    pub fn max_modulus(&self) -> f64 {
        let xs = self.x0.abs().max(self.x1.abs());
        let ys = self.y0.abs().max(self.y1.abs());
        xs.hypot(ys)
    }
}

pub fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

pub fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Distance from p to segment [a,b] and the segment parameter of the foot.
pub fn seg_dist(p: Complex64, a: Complex64, b: Complex64) -> (f64, f64) {
    let d = b - a;
    let l2 = d.norm_sqr();
    let t = if l2 > 0.0 { (dot(p - a, d) / l2).clamp(0.0, 1.0) } else { 0.0 };
    ((p - (a + d * t)).norm(), t)
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let o = |p: Complex64, q: Complex64, r: Complex64| cross(q - p, r - p);
    let d1 = o(c, d, a);
    let d2 = o(c, d, b);
    let d3 = o(a, b, c);
    let d4 = o(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64, v: f64| {
        v == 0.0 && r.re >= p.re.min(q.re) && r.re <= p.re.max(q.re) && r.im >= p.im.min(q.im) && r.im <= p.im.max(q.im)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// Closed polygon with one integer tag per edge (edge i joins v_i to v_{i+1}).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Complex64>,
    pub edge_tags: Vec<u32>,
}

impl Polygon {
    pub fn new(vertices: Vec<Complex64>) -> Self {
        let n = vertices.len();
        Self { vertices, edge_tags: vec![0; n] }
    }

    pub fn with_tags(vertices: Vec<Complex64>, edge_tags: Vec<u32>) -> Result<Self, MetricsError> {
        if vertices.len() != edge_tags.len() {
            return Err(MetricsError::InvalidPolygon("one tag per edge required".into()));
        }
        Ok(Self { vertices, edge_tags })
    }

    /// Regular n-gon inscribed in the circle |z - c| = r.
    pub fn regular(c: Complex64, r: f64, n: usize) -> Self {
        let v = (0..n)
            .map(|k| c + Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        Self::new(v)
    }

    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let v = vec![
            Complex64::new(x0, y0),
            Complex64::new(x1, y0),
            Complex64::new(x1, y1),
            Complex64::new(x0, y1),
        ];
        Self { vertices: v, edge_tags: vec![0, 1, 2, 3] }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Complex64, Complex64) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n).map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n])).sum::<f64>() / 2.0
    }

    /// Reverses orientation if needed so that the signed area is positive.
    pub fn make_ccw(&mut self) {
        if self.signed_area() < 0.0 {
            let n = self.vertices.len();
            self.vertices.reverse();
            // edge i of the reversed polygon is old edge n-2-i
            let old = self.edge_tags.clone();
            for i in 0..n {
                self.edge_tags[i] = old[(2 * n - 2 - i) % n];
            }
        }
    }

    pub fn centroid(&self) -> Complex64 {
        let n = self.vertices.len();
        let a = self.signed_area();
        if a.abs() < 1e-300 {
            return self.vertices.iter().sum::<Complex64>() / n as f64;
        }
        let mut c = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let (p, q) = self.edge(i);
            c += (p + q) * cross(p, q);
        }
        c / (6.0 * a)
    }

    pub fn bbox(&self) -> (Complex64, Complex64) {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.re = lo.re.min(v.re);
            lo.im = lo.im.min(v.im);
            hi.re = hi.re.max(v.re);
            hi.im = hi.im.max(v.im);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Winding number of the boundary around p (0 outside for simple polygons).
    pub fn winding(&self, p: Complex64) -> i32 {
        let n = self.vertices.len();
        let mut w = 0;
        for i in 0..n {
            let (a, b) = self.edge(i);
            if a.im <= p.im {
                if b.im > p.im && cross(b - a, p - a) > 0.0 {
                    w += 1;
                }
            } else if b.im <= p.im && cross(b - a, p - a) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, p: Complex64) -> bool {
        self.winding(p) != 0
    }

    pub fn boundary_dist(&self, p: Complex64) -> f64 {
        (0..self.vertices.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                seg_dist(p, a, b).0
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Brute-force simplicity test (non-adjacent edges must not meet).
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let tree = SegmentTree::new(self);
        for i in 0..n {
            let (a, b) = self.edge(i);
            let mut bad = false;
            tree.visit_overlapping(a, b, &mut |j| {
                if j == i || j == (i + 1) % n || (j + 1) % n == i {
                    return;
                }
                let (c, d) = self.edge(j);
                if segments_intersect(a, b, c, d) {
                    bad = true;
                }
            });
            if bad {
                return false;
            }
        }
        true
    }

    /// Drops consecutive duplicate vertices.
    pub fn dedup(&mut self, tol: f64) {
        let mut v = Vec::with_capacity(self.vertices.len());
        let mut t = Vec::with_capacity(self.vertices.len());
        for i in 0..self.vertices.len() {
            let p = self.vertices[i];
            if v.last().map(|q: &Complex64| (p - q).norm() <= tol).unwrap_or(false) {
                continue;
            }
            v.push(p);
            t.push(self.edge_tags[i]);
        }
        while v.len() > 1 && (v[0] - v[v.len() - 1]).norm() <= tol {
            v.pop();
            t.pop();
        }
        self.vertices = v;
        self.edge_tags = t;
    }
}

#[derive(Clone, Debug)]
struct Node {
    lo: Complex64,
    hi: Complex64,
    // leaf: start..end into `order`; inner: children
    left: usize,
    right: usize,
    start: usize,
    end: usize,
}

/// Bounding-volume hierarchy over polygon edges for nearest-edge queries.
#[derive(Clone, Debug)]
pub struct SegmentTree {
    segs: Vec<(Complex64, Complex64)>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF: usize = 4;

fn box_dist(p: Complex64, lo: Complex64, hi: Complex64) -> f64 {
    let dx = (lo.re - p.re).max(0.0).max(p.re - hi.re);
    let dy = (lo.im - p.im).max(0.0).max(p.im - hi.im);
    dx.hypot(dy)
}

impl SegmentTree {
    pub fn new(poly: &Polygon) -> Self {
        let segs: Vec<_> = (0..poly.len()).map(|i| poly.edge(i)).collect();
        Self::from_segments(segs)
    }

    pub fn from_segments(segs: Vec<(Complex64, Complex64)>) -> Self {
        let mut t = Self { order: (0..segs.len()).collect(), segs, nodes: Vec::new() };
        if !t.segs.is_empty() {
            let n = t.segs.len();
            t.build(0, n);
        }
        t
    }

    fn bounds(&self, start: usize, end: usize) -> (Complex64, Complex64) {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            let (a, b) = self.segs[i];
            lo.re = lo.re.min(a.re).min(b.re);
            lo.im = lo.im.min(a.im).min(b.im);
            hi.re = hi.re.max(a.re).max(b.re);
            hi.im = hi.im.max(a.im).max(b.im);
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, left: usize::MAX, right: usize::MAX, start, end });
        if end - start > LEAF {
            let wide = hi.re - lo.re >= hi.im - lo.im;
            let segs = &self.segs;
            let key = |i: &usize| {
                let (a, b) = segs[*i];
                if wide {
                    a.re + b.re
                } else {
                    a.im + b.im
                }
            };
            let mid = (start + end) / 2;
            self.order[start..end].select_nth_unstable_by(mid - start, |x, y| key(x).total_cmp(&key(y)));
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id].left = l;
            self.nodes[id].right = r;
        }
        id
    }

    /// Nearest segment index and distance.
    pub fn nearest(&self, p: Complex64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let nd = &self.nodes[id];
            if box_dist(p, nd.lo, nd.hi) >= best.1 {
                continue;
            }
            if nd.left == usize::MAX {
                for &i in &self.order[nd.start..nd.end] {
                    let (a, b) = self.segs[i];
                    let d = seg_dist(p, a, b).0;
                    if d < best.1 || (d == best.1 && i < best.0) {
                        best = (i, d);
                    }
                }
            } else {
                let (l, r) = (nd.left, nd.right);
                let dl = box_dist(p, self.nodes[l].lo, self.nodes[l].hi);
                let dr = box_dist(p, self.nodes[r].lo, self.nodes[r].hi);
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        Some(best)
    }

    /// Calls `f` on every segment whose box overlaps the box of [a,b].
    pub fn visit_overlapping(&self, a: Complex64, b: Complex64, f: &mut dyn FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let lo = Complex64::new(a.re.min(b.re), a.im.min(b.im));
        let hi = Complex64::new(a.re.max(b.re), a.im.max(b.im));
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let nd = &self.nodes[id];
            if nd.lo.re > hi.re || nd.hi.re < lo.re || nd.lo.im > hi.im || nd.hi.im < lo.im {
                continue;
            }
            if nd.left == usize::MAX {
                for &i in &self.order[nd.start..nd.end] {
                    f(i);
                }
            } else {
                stack.push(nd.left);
                stack.push(nd.right);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_basics() {
        let p = Polygon::rect(0.0, 1.0, 0.0, 1.0);
        assert_eq!(p.signed_area(), 1.0);
        assert!(p.contains(Complex64::new(0.5, 0.5)));
        assert!(!p.contains(Complex64::new(1.5, 0.5)));
        assert!((p.centroid() - Complex64::new(0.5, 0.5)).norm() < 1e-15);
        assert!(p.is_simple());
    }

    #[test]
    fn ccw_keeps_tags_on_edges() {
        let mut p = Polygon::rect(0.0, 1.0, 0.0, 1.0);
        let bottom_mid = Complex64::new(0.5, 0.0);
        p.vertices.reverse();
        p.edge_tags = vec![2, 1, 0, 3];
        assert!(p.signed_area() < 0.0);
        p.make_ccw();
        let t = SegmentTree::new(&p);
        let (i, _) = t.nearest(bottom_mid).unwrap();
        assert_eq!(p.edge_tags[i], 0);
    }

    #[test]
    fn tree_matches_brute_force() {
        let p = Polygon::regular(Complex64::new(0.3, -0.2), 2.0, 97);
        let t = SegmentTree::new(&p);
        for k in 0..200 {
            let z = Complex64::from_polar(0.01 * k as f64, k as f64);
            let (_, d) = t.nearest(z).unwrap();
            assert!((d - p.boundary_dist(z)).abs() < 1e-14);
        }
    }

    #[test]
    fn bowtie_not_simple() {
        let p = Polygon::new(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ]);
        assert!(!p.is_simple());
    }
}
