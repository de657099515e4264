//! Level-set tracing, tract components and the tract maximum modulus.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexfn::{FnKind, FunctionSpec, Magnitude};
use crate::hp::wrap_pi;
use crate::error::TractError;
use crate::geom::Window;

/// Level tolerance for refined boundary vertices.
pub const TOL_LEVEL: f64 = 1e-10;
const NEWTON_STEPS: usize = 50;
/// Initial samples per circle in arc maximization.
pub const ARC_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    pub vertices: Vec<Complex64>,
    pub closed: bool,
    pub level: f64,
    /// Vertices left unrefined because |f'/f| vanished or Newton failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<usize>,
    #[serde(skip)]
    inside_node: Option<usize>,
}

/// Samples of u = ln|f| - ln R on a regular grid.
#[derive(Clone, Debug)]
pub struct TraceGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub u: Vec<f64>,
}

impl TraceGrid {
    pub fn compute(f: &FunctionSpec, window: Window, step: f64) -> Result<Self, TractError> {
        if !window.is_valid() {
            return Err(TractError::InvalidWindow(format!("{window:?}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(TractError::InvalidWindow(format!("step {step}")));
        }
        let nx = ((window.width() / step).ceil() as usize).max(1) + 1;
        let ny = ((window.height() / step).ceil() as usize).max(1) + 1;
        if nx.saturating_mul(ny) > 64_000_000 {
            return Err(TractError::InvalidWindow(format!("grid {nx}x{ny} too large")));
        }
        let hx = window.width() / (nx - 1) as f64;
        let hy = window.height() / (ny - 1) as f64;
        let mut u = vec![0.0; nx * ny];
        u.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            let y = window.y0 + j as f64 * hy;
            for (i, v) in row.iter_mut().enumerate() {
                let x = window.x0 + i as f64 * hx;
                let w = f.level_fn(Complex64::new(x, y));
                *v = if w.is_nan() { f64::NEG_INFINITY } else { w };
            }
        });
        Ok(Self { window, nx, ny, hx, hy, u })
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.window.x0 + i as f64 * self.hx, self.window.y0 + j as f64 * self.hy)
    }

    fn inside(&self, k: usize) -> bool {
        self.u[k] > 0.0
    }

    /// Cell containing z (clamped), as lower-left node indices.
    pub fn cell_of(&self, z: Complex64) -> (usize, usize) {
        let i = ((z.re - self.window.x0) / self.hx).floor().clamp(0.0, (self.nx - 2) as f64) as usize;
        let j = ((z.im - self.window.y0) / self.hy).floor().clamp(0.0, (self.ny - 2) as f64) as usize;
        (i, j)
    }

    /// Saddle cells whose center lies inside join their two inside corners.
    fn saddle_center_inside(&self, f: &FunctionSpec, i: usize, j: usize) -> bool {
        let c = self.node(i, j) + Complex64::new(0.5 * self.hx, 0.5 * self.hy);
        f.level_fn(c) > 0.0
    }
}

// Edge ids: horizontal (i,j)-(i+1,j) -> 2k, vertical (i,j)-(i,j+1) -> 2k+1.
fn h_edge(g: &TraceGrid, i: usize, j: usize) -> usize {
    2 * (j * g.nx + i)
}
fn v_edge(g: &TraceGrid, i: usize, j: usize) -> usize {
    2 * (j * g.nx + i) + 1
}

fn edge_nodes(g: &TraceGrid, e: usize) -> (usize, usize) {
    let k = e / 2;
    if e % 2 == 0 {
        (k, k + 1)
    } else {
        (k, k + g.nx)
    }
}

fn newton_onto_level(f: &FunctionSpec, z0: Complex64, max_move: f64) -> (Complex64, bool) {
    let mut z = z0;
    for _ in 0..NEWTON_STEPS {
        let u = f.level_fn(z);
        if u.abs() <= TOL_LEVEL {
            return (z, true);
        }
        let q = f.logderiv_f64(z);
        if !(q.norm() > 1e-12) || !u.is_finite() {
            return (z0, false);
        }
        // along the gradient conj(q) of u = Re log f
        let zn = z - u / q;
        if (zn - z0).norm() > max_move || !zn.re.is_finite() {
            return (z0, false);
        }
        z = zn;
    }
    let ok = f.level_fn(z).abs() <= TOL_LEVEL;
    (if ok { z } else { z0 }, ok)
}

/// False when f has no zeros at all.
pub(crate) fn has_zeros(f: &FunctionSpec) -> bool {
    match &f.kind {
        FnKind::Exp | FnKind::RecipExpG => false,
        FnKind::Compose { outer, .. } => !matches!(**outer, FnKind::Exp | FnKind::RecipExpG),
        _ => true,
    }
}

/// (arg h(z), |h'/h|) for a factor h of f carrying all of its zeros.
fn carrier(f: &FunctionSpec, z: Complex64) -> (f64, f64) {
    match &f.kind {
        // e^{z^2} never vanishes
        FnKind::ExpZ2Cos => (z.cos().arg(), z.tan().norm()),
        _ => (f.log_f64(z).im, f.logderiv_f64(z).norm()),
    }
}

/// Zeros of f (with multiplicity) inside the axis-parallel box centered at c.
pub(crate) fn cell_zero_count(f: &FunctionSpec, c: Complex64, hx: f64, hy: f64) -> i64 {
    let corners = [
        c + Complex64::new(-hx, -hy),
        c + Complex64::new(hx, -hy),
        c + Complex64::new(hx, hy),
        c + Complex64::new(-hx, hy),
    ];
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let len = (b - a).norm();
        let mut n = 4usize;
        'refine: loop {
            let mut sum = 0.0;
            let (mut prev, mut prev_q) = carrier(f, a);
            let step = len / n as f64;
            for k in 1..=n {
                let (cur, q) = carrier(f, a + (b - a) * (k as f64 / n as f64));
                let d = wrap_pi(cur - prev);
                if (d.abs() > PI / 4.0 || prev_q.max(q) * step > PI / 4.0) && n < 1 << 14 {
                    n *= 4;
                    continue 'refine;
                }
                sum += d;
                prev = cur;
                prev_q = q;
            }
            total += sum;
            break;
        }
    }
    (total / (2.0 * PI)).round() as i64
}

const OVAL_RAYS: usize = 32;

/// Oval of {|f| < R} around a zero too small for the grid to see.
fn hidden_oval(f: &FunctionSpec, c: Complex64, half: f64) -> Option<(Complex64, Vec<Complex64>, Vec<usize>)> {
    let mut z = c;
    for _ in 0..100 {
        let q = f.logderiv_f64(z);
        if !q.is_finite() || q.norm() == 0.0 {
            break;
        }
        let dz = 1.0 / q;
        z -= dz;
        if (z - c).norm() > 2.0 * half {
            return None;
        }
        if dz.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    let mut verts = Vec::with_capacity(OVAL_RAYS);
    let mut degenerate = Vec::new();
    for k in 0..OVAL_RAYS {
        let dir = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / OVAL_RAYS as f64);
        let (mut lo, mut hi) = (0.0, half);
        if !(f.level_fn(z + dir * hi) > 0.0) {
            return None;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f.level_fn(z + dir * mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if hi < 64.0 * f64::EPSILON * (1.0 + z.norm()) {
            // the oval is below f64 resolution at this modulus
            return Some((z, vec![z], vec![0]));
        }
        let v = z + dir * hi;
        // near a tiny oval f64 positions cannot resolve the level to TOL_LEVEL
        if f.level_fn(v).abs() > TOL_LEVEL {
            degenerate.push(k);
        }
        verts.push(v);
    }
    Some((z, verts, degenerate))
}

/// Ovals inside cells whose four corners all lie in {|f| > R}.
fn hidden_ovals(f: &FunctionSpec, g: &TraceGrid) -> Vec<LevelCurve> {
    if !has_zeros(f) {
        return Vec::new();
    }
    let nx = g.nx;
    let found: Vec<(Complex64, LevelCurve)> = (0..g.ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut out = Vec::new();
            for i in 0..nx - 1 {
                let ks = [j * nx + i, j * nx + i + 1, (j + 1) * nx + i + 1, (j + 1) * nx + i];
                if !ks.iter().all(|&k| g.inside(k)) {
                    continue;
                }
                let c = g.node(i, j) + Complex64::new(0.5 * g.hx, 0.5 * g.hy);
                if cell_zero_count(f, c, 0.5 * g.hx, 0.5 * g.hy) == 0 {
                    continue;
                }
                if let Some((z0, vertices, degenerate)) = hidden_oval(f, c, 0.5 * g.hx.min(g.hy)) {
                    out.push((z0, LevelCurve { vertices, closed: true, level: f.level, degenerate, inside_node: Some(ks[0]) }));
                }
            }
            out
        })
        .collect();
    // a zero on a grid line is seen from both neighbouring cells
    let mut kept: Vec<(Complex64, LevelCurve)> = Vec::new();
    for (z0, c) in found {
        if !kept.iter().any(|(w, _)| (w - z0).norm() <= 1e-9 * (1.0 + z0.norm())) {
            kept.push((z0, c));
        }
    }
    kept.into_iter().map(|k| k.1).collect()
}

struct Traced {
    curves: Vec<LevelCurve>,
}

fn trace_grid(f: &FunctionSpec, g: &TraceGrid) -> Traced {
    let (nx, ny) = (g.nx, g.ny);
    // segments between crossing edges, one or two per cell
    let cells: Vec<Vec<(usize, usize)>> = (0..ny - 1)
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::new();
            for i in 0..nx - 1 {
                let a = g.inside(j * nx + i);
                let b = g.inside(j * nx + i + 1);
                let c = g.inside((j + 1) * nx + i + 1);
                let d = g.inside((j + 1) * nx + i);
                let bottom = h_edge(g, i, j);
                let right = v_edge(g, i + 1, j);
                let top = h_edge(g, i, j + 1);
                let left = v_edge(g, i, j);
                let mut xs = Vec::with_capacity(4);
                if a != b {
                    xs.push(bottom);
                }
                if b != c {
                    xs.push(right);
                }
                if c != d {
                    xs.push(top);
                }
                if d != a {
                    xs.push(left);
                }
                match xs.len() {
                    2 => out.push((xs[0], xs[1])),
                    4 => {
                        // cut off the corners whose state differs from the center
                        let center = g.saddle_center_inside(f, i, j);
                        if a != center {
                            out.push((left, bottom));
                            out.push((right, top));
                        } else {
                            out.push((bottom, right));
                            out.push((top, left));
                        }
                    }
                    _ => {}
                }
            }
            out
        })
        .collect();
    let segs: Vec<(usize, usize)> = cells.into_iter().flatten().collect();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::with_capacity(segs.len() * 2);
    for (s, &(e1, e2)) in segs.iter().enumerate() {
        adj.entry(e1).or_default().push(s);
        adj.entry(e2).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut chains: Vec<(Vec<usize>, bool)> = Vec::new();
    let walk = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut edges = vec![start_edge];
        let mut seg = start_seg;
        let mut cur = start_edge;
        loop {
            used[seg] = true;
            let (e1, e2) = segs[seg];
            let next = if e1 == cur { e2 } else { e1 };
            if next == start_edge {
                return (edges, true);
            }
            edges.push(next);
            cur = next;
            match adj[&next].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => return (edges, false),
            }
        }
    };
    // open chains start at edges with a single segment
    let mut starts: Vec<usize> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(&e, _)| e).collect();
    starts.sort_unstable();
    for e in starts {
        let s = adj[&e][0];
        if !used[s] {
            chains.push(walk(s, e, &mut used));
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            chains.push(walk(s, segs[s].0, &mut used));
        }
    }
    let max_move = 2.0 * g.hx.max(g.hy);
    let level = f.level;
    let curves = chains
        .into_par_iter()
        .map(|(edges, closed)| {
            let mut vertices = Vec::with_capacity(edges.len());
            let mut degenerate = Vec::new();
            let mut inside_node = None;
            for (idx, &e) in edges.iter().enumerate() {
                let (p, q) = edge_nodes(g, e);
                let (up, uq) = (g.u[p], g.u[q]);
                let t = if up.is_finite() && uq.is_finite() { up / (up - uq) } else if up.is_finite() { 0.0 } else { 1.0 };
                let z0 = g.node(p % nx, p / nx) + (g.node(q % nx, q / nx) - g.node(p % nx, p / nx)) * t.clamp(0.0, 1.0);
                let (z, ok) = newton_onto_level(f, z0, max_move);
                if !ok {
                    degenerate.push(idx);
                }
                if inside_node.is_none() {
                    inside_node = Some(if g.inside(p) { p } else { q });
                }
                vertices.push(z);
            }
            LevelCurve { vertices, closed, level, degenerate, inside_node }
        })
        .collect::<Vec<_>>();
    let mut curves = curves;
    curves.extend(hidden_ovals(f, g));
    Traced { curves }
}

/// Traces {|f| = level} in the window with grid spacing `step`.
pub fn trace_level_set(f: &FunctionSpec, level: f64, window: Window, step: f64) -> Result<Vec<LevelCurve>, TractError> {
    if !(level > 0.0) {
        return Err(TractError::Fn(crate::error::FnError::InvalidParam(format!("level {level}"))));
    }
    let g = FunctionSpec::with_level(f.kind.clone(), level);
    let grid = TraceGrid::compute(&g, window, step)?;
    Ok(trace_grid(&g, &grid).curves)
}

#[derive(Debug)]
struct ComponentGrid {
    grid: TraceGrid,
    member: Vec<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TractRegion {
    #[serde(rename = "fn")]
    pub function: FunctionSpec,
    pub level: f64,
    pub seed: Complex64,
    pub boundary: Vec<LevelCurve>,
    pub window: Window,
    pub resolution: f64,
    pub label: u64,
    /// Component reaches the window edge.
    pub truncated: bool,
    #[serde(skip)]
    comp: OnceLock<Arc<ComponentGrid>>,
}

fn segment_positive(f: &FunctionSpec, a: Complex64, b: Complex64) -> bool {
    (0..=8).all(|k| f.level_fn(a + (b - a) * (k as f64 / 8.0)) > 0.0)
}

fn flood(f: &FunctionSpec, g: &TraceGrid, start: usize) -> Vec<bool> {
    let (nx, ny) = (g.nx, g.ny);
    let mut member = vec![false; nx * ny];
    let mut q = VecDeque::new();
    member[start] = true;
    q.push_back(start);
    while let Some(k) = q.pop_front() {
        let (i, j) = (k % nx, k / nx);
        let mut push = |m: usize, member: &mut Vec<bool>| {
            if !member[m] && g.inside(m) {
                member[m] = true;
                q.push_back(m);
            }
        };
        if i > 0 {
            push(k - 1, &mut member);
        }
        if i + 1 < nx {
            push(k + 1, &mut member);
        }
        if j > 0 {
            push(k - nx, &mut member);
        }
        if j + 1 < ny {
            push(k + nx, &mut member);
        }
        // diagonal links through saddle cells with inside centers
        for (di, dj) in [(-1i64, -1i64), (1, -1), (1, 1), (-1, 1)] {
            let (ii, jj) = (i as i64 + di, j as i64 + dj);
            if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                continue;
            }
            let m = jj as usize * nx + ii as usize;
            if member[m] || !g.inside(m) {
                continue;
            }
            let side1 = j * nx + ii as usize;
            let side2 = jj as usize * nx + i;
            if g.inside(side1) || g.inside(side2) {
                continue;
            }
            let (ci, cj) = (i.min(ii as usize), j.min(jj as usize));
            if g.saddle_center_inside(f, ci, cj) {
                member[m] = true;
                q.push_back(m);
            }
        }
    }
    member
}

fn start_node(f: &FunctionSpec, g: &TraceGrid, seed: Complex64) -> Option<usize> {
    let (ci, cj) = g.cell_of(seed);
    let mut best: Option<(f64, usize)> = None;
    let lo_i = ci.saturating_sub(1);
    let lo_j = cj.saturating_sub(1);
    for j in lo_j..=(cj + 2).min(g.ny - 1) {
        for i in lo_i..=(ci + 2).min(g.nx - 1) {
            let k = j * g.nx + i;
            if !g.inside(k) {
                continue;
            }
            let p = g.node(i, j);
            let d = (p - seed).norm();
            if best.map(|b| d < b.0).unwrap_or(true) && segment_positive(f, seed, p) {
                best = Some((d, k));
            }
        }
    }
    best.map(|b| b.1)
}

impl TractRegion {
    fn build_component(&self) -> Arc<ComponentGrid> {
        let grid = TraceGrid::compute(&self.function, self.window, self.resolution).expect("validated window");
        let start = start_node(&self.function, &grid, self.seed).expect("validated seed");
        let member = flood(&self.function, &grid, start);
        Arc::new(ComponentGrid { grid, member })
    }

    fn comp(&self) -> &ComponentGrid {
        self.comp.get_or_init(|| self.build_component())
    }

    /// Membership in the traced component (false outside the window).
    pub fn contains(&self, z: Complex64) -> bool {
        if !self.window.contains(z) || !(self.function.level_fn(z) > 0.0) {
            return false;
        }
        let c = self.comp();
        let g = &c.grid;
        let (i, j) = g.cell_of(z);
        let mut corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        corners.sort_by(|a, b| {
            (g.node(a.0, a.1) - z).norm().total_cmp(&(g.node(b.0, b.1) - z).norm())
        });
        corners
            .iter()
            .any(|&(a, b)| c.member[b * g.nx + a] && segment_positive(&self.function, z, g.node(a, b)))
    }

    /// u(z) >= -tol and z connects to the component within one cell.
    pub fn contains_closed(&self, z: Complex64, tol: f64) -> bool {
        if self.contains(z) {
            return true;
        }
        if !self.window.contains(z) || self.function.level_fn(z) < -tol {
            return false;
        }
        // step slightly along the gradient into the tract
        let q = self.function.logderiv_f64(z);
        if q.norm() == 0.0 {
            return false;
        }
        let dir = q.conj() / q.norm();
        let h = 1e-7 * (1.0 + z.norm());
        self.contains(z + dir * h)
    }

    pub fn same_component(&self, other: &TractRegion) -> bool {
        self.contains(other.seed) && other.contains(self.seed)
    }

    /// Member grid nodes (for plotting and sampling).
    pub fn member_nodes(&self) -> Vec<Complex64> {
        let c = self.comp();
        let g = &c.grid;
        (0..g.nx * g.ny).filter(|&k| c.member[k]).map(|k| g.node(k % g.nx, k / g.nx)).collect()
    }

    pub fn max_boundary_level_error(&self) -> f64 {
        let mut m = 0.0f64;
        for c in &self.boundary {
            for (k, v) in c.vertices.iter().enumerate() {
                if c.degenerate.contains(&k) {
                    continue;
                }
                m = m.max(self.function.level_fn(*v).abs());
            }
        }
        m
    }
}

/// Traced component of {|f| > level} containing the seed.
pub fn locate_tract(
    f: &FunctionSpec,
    seed: Complex64,
    level: f64,
    window: Window,
    resolution: f64,
) -> Result<TractRegion, TractError> {
    let g = FunctionSpec::with_level(f.kind.clone(), level);
    g.validate()?;
    if !window.contains(seed) {
        return Err(TractError::InvalidWindow("seed outside window".into()));
    }
    let margin = g.level_fn(seed);
    if margin.abs() <= TOL_LEVEL {
        return Err(TractError::SeedOnBoundary { margin });
    }
    if !(margin > 0.0) {
        return Err(TractError::SeedBelowLevel { margin });
    }
    let grid = TraceGrid::compute(&g, window, resolution)?;
    let start = start_node(&g, &grid, seed)
        .ok_or_else(|| TractError::InvalidWindow("resolution too coarse to connect the seed".into()))?;
    let member = flood(&g, &grid, start);
    let label = member.iter().position(|&m| m).unwrap_or(0) as u64;
    let (nx, ny) = (grid.nx, grid.ny);
    let truncated = (0..nx).any(|i| member[i] || member[(ny - 1) * nx + i])
        || (0..ny).any(|j| member[j * nx] || member[j * nx + nx - 1]);
    let traced = trace_grid(&g, &grid);
    let boundary = traced
        .curves
        .into_iter()
        .filter(|c| c.inside_node.map(|k| member[k]).unwrap_or(false))
        .collect();
    let comp = OnceLock::new();
    let _ = comp.set(Arc::new(ComponentGrid { grid, member }));
    Ok(TractRegion {
        function: g,
        level,
        seed,
        boundary,
        window,
        resolution,
        label,
        truncated,
        comp,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcMax {
    pub r: f64,
    pub log_md: f64,
    pub theta: f64,
    pub uncertainty: f64,
    /// Part of the circle lies outside the window.
    pub window_truncated: bool,
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = g(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// log M_D(r): maximum of ln|f| over {|z| = r} ∩ D.
pub fn max_modulus_on_tract(f: &FunctionSpec, tract: &TractRegion, r: f64) -> Result<ArcMax, TractError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(TractError::CircleMissesTract { r });
    }
    let n = ARC_SAMPLES;
    let th = |i: usize| 2.0 * PI * i as f64 / n as f64;
    let pts: Vec<(bool, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z = Complex64::from_polar(r, th(i));
            if tract.contains(z) {
                (true, f.log_f64(z).re)
            } else {
                (false, f64::NEG_INFINITY)
            }
        })
        .collect();
    let window_truncated = (0..n).any(|i| !tract.window.contains(Complex64::from_polar(r, th(i))));
    if !pts.iter().any(|p| p.0) {
        return Err(TractError::CircleMissesTract { r });
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut gain = 0.0f64;
    for i in 0..n {
        let (ins, u) = pts[i];
        if !ins {
            continue;
        }
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        if u < prev.1 || u < next.1 {
            continue;
        }
        let val = |t: f64| {
            let z = Complex64::from_polar(r, t);
            if tract.contains(z) {
                f.log_f64(z).re
            } else {
                f64::NEG_INFINITY
            }
        };
        let (t, v) = golden_max(val, th(i) - 2.0 * PI / n as f64, th(i) + 2.0 * PI / n as f64, 40);
        let (t, v) = if v >= u { (t, v) } else { (th(i), u) };
        gain = gain.max(v - u);
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(ArcMax { r, log_md: best.0, theta: best.1, uncertainty: gain, window_truncated })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MdIterate {
    pub k: usize,
    pub log_md: Magnitude,
    pub extrapolated: bool,
}

/// ln M_D^k(rho) for k = 1..=n.
pub fn iterate_md(f: &FunctionSpec, tract: &TractRegion, rho: f64, n: usize) -> Result<Vec<MdIterate>, TractError> {
    let first = max_modulus_on_tract(f, tract, rho)?;
    if first.log_md <= rho.ln() {
        return Err(TractError::NotExpanding { log_md: first.log_md, log_rho: rho.ln() });
    }
    let certified = tract.window.inscribed_radius();
    let mut out = Vec::with_capacity(n);
    let mut ln_r = Magnitude::from_ln(rho.ln());
    for k in 1..=n {
        let r = ln_r.ln.exp();
        let direct = if ln_r.ln.is_finite() && r <= certified {
            max_modulus_on_tract(f, tract, r).ok().map(|m| Magnitude::from_ln(m.log_md))
        } else {
            None
        };
        let (m, ex) = match direct {
            Some(m) => (m, false),
            None => match f.asymptotic_log_md(ln_r) {
                Some(m) => (m, true),
                None => {
                    let m = max_modulus_on_tract(f, tract, r).map_err(|_| TractError::NotRepresentable { k })?;
                    (Magnitude::from_ln(m.log_md), m.window_truncated)
                }
            },
        };
        out.push(MdIterate { k, log_md: m, extrapolated: ex });
        // the next radius is M_D^k(rho) itself
        ln_r = m;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub r: f64,
    pub c: f64,
    pub log_md_r: f64,
    pub log_md_rc: f64,
    pub margin: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Tests log M_D(r^c) >= c log M_D(r).
pub fn check_md_convexity(f: &FunctionSpec, tract: &TractRegion, r: f64, c: f64) -> Result<ConvexityReport, TractError> {
    if !(c > 1.0) {
        return Err(TractError::Fn(crate::error::FnError::InvalidParam(format!("c = {c} must exceed 1"))));
    }
    let a = max_modulus_on_tract(f, tract, r)?;
    let b = max_modulus_on_tract(f, tract, r.powf(c))?;
    let margin = b.log_md - c * a.log_md;
    let tol = b.uncertainty + c * a.uncertainty + 1e-9 * b.log_md.abs().max(1.0);
    Ok(ConvexityReport { r, c, log_md_r: a.log_md, log_md_rc: b.log_md, margin, tol, pass: margin >= -tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_max() {
        let (t, v) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 60);
        assert!((t - 0.3).abs() < 1e-8);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn exp_level_line() {
        let curves = trace_level_set(&FunctionSpec::exp(), 1.0, Window::square(2.0), 0.1).unwrap();
        assert_eq!(curves.len(), 1);
        assert!(!curves[0].closed);
        assert!(curves[0].vertices.iter().all(|v| v.re.abs() < 1e-10));
    }
}
