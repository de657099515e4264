use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tractoria::catalog;
use tractoria::complexfn::check_expansion_estimate;
use tractoria::covering::{image_annulus_certificate, mcover_check, CertOptions, CoverStatus, LogAnnulus, ProbeGrid, Region, WosParams};
use tractoria::metrics::{harmonic_measure_laplace, harmonic_measure_wos};
use tractoria::orbit::{classify_escape, slow_orbit_pipeline, OrbitWitness, PipelineMode, PullbackOptions, SlowOrbitReport, SlowTarget};
use tractoria::render::{svg, tract_mask, Overlay};
use tractoria::tract::{check_md_convexity, locate_tract, trace_level_set};
use tractoria::{FunctionSpec, Polygon, TractRegion, Window};

use crate::config::{parse_floats, parse_function, parse_point, parse_probes, parse_window, usage, Command, ModeArg, Opts, RunConfig, Verdict};

/// Serialized report plus whether every check in it passed.
pub struct Outcome {
    pub json: String,
    pub pass: bool,
    /// Extra files written (plot-tract).
    pub files: Vec<PathBuf>,
}

fn outcome<T: Serialize>(report: &T, pass: bool) -> Result<Outcome> {
    Ok(Outcome { json: serde_json::to_string_pretty(report)? + "\n", pass, files: Vec::new() })
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let o = &cfg.opts;
    if o.res == 0 {
        return usage("--res must be positive");
    }
    let f = parse_function(&o.function)?;
    match cfg.command {
        Command::PlotTract => plot_tract(&f, o),
        Command::Trace => trace(&f, o),
        Command::VerifyExpansion => verify_expansion(&f, o),
        Command::VerifyConvexity => verify_convexity(&f, o),
        Command::Cover => cover(&f, o),
        Command::Harmonic => harmonic(&f, o),
        Command::SlowOrbit => slow_orbit(&f, o),
        Command::Classify => classify(&f, o),
    }
}

fn window_or(o: &Opts, default: Window) -> Result<Window> {
    match &o.window {
        Some(s) => parse_window(s),
        None => Ok(default),
    }
}

fn step(w: &Window, res: usize) -> f64 {
    w.width().max(w.height()) / res as f64
}

/// First point with |f| > R along the positive real axis, else the grid maximum of u.
fn default_tract_seed(f: &FunctionSpec, w: &Window) -> Option<Complex64> {
    let cy = if w.y0 <= 0.0 && 0.0 <= w.y1 { 0.0 } else { 0.5 * (w.y0 + w.y1) };
    for k in (1..=16).rev() {
        let z = Complex64::new(w.x0 + (w.x1 - w.x0) * (k as f64 / 16.0) * 0.95, cy);
        if z.re > 0.0 && f.level_fn(z) > 1e-6 {
            return Some(z);
        }
    }
    let n = 64;
    let mut best: Option<(f64, Complex64)> = None;
    for j in 0..n {
        for i in 0..n {
            let z = Complex64::new(
                w.x0 + (i as f64 + 0.5) * w.width() / n as f64,
                w.y0 + (j as f64 + 0.5) * w.height() / n as f64,
            );
            let u = f.level_fn(z);
            if u.is_finite() && u > 1e-6 && best.map(|b| u > b.0).unwrap_or(true) {
                best = Some((u, z));
            }
        }
    }
    best.map(|b| b.1)
}

fn tract(f: &FunctionSpec, o: &Opts, w: Window) -> Result<TractRegion> {
    let seed = match &o.tract_seed {
        Some(s) => parse_point(s, "tract seed")?,
        None => match default_tract_seed(f, &w) {
            Some(z) => z,
            None => return usage("no point with |f| > R in the window; pass --tract-seed"),
        },
    };
    Ok(locate_tract(f, seed, f.level, w, step(&w, o.res))?)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct PlotReport {
    #[serde(rename = "fn")]
    function: FunctionSpec,
    window: Window,
    res: usize,
    white_fraction: f64,
    curves: usize,
    pgm: PathBuf,
    svg: PathBuf,
}

fn plot_tract(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let w = window_or(o, Window::square(8.0))?;
    let (width, height) = aspect(&w, o.res);
    let mask = tract_mask(f, w, width, height);
    let curves = trace_level_set(f, f.level, w, step(&w, o.res))?;
    let mut overlay = Overlay { curves, circles: o.overlay_radii.clone(), ..Default::default() };
    if let Some(spec) = &o.region {
        overlay.polygons.push(parse_region(f, spec, o)?.boundary);
    }
    if let Some(p) = &o.witness {
        overlay.orbit = load_witness(p)?.orbit.iter().map(|s| Complex64::new(s.z[0], s.z[1])).collect();
    }
    let prefix = o.out.clone().unwrap_or_else(|| PathBuf::from("tract"));
    let pgm = prefix.with_extension("pgm");
    let svg_path = prefix.with_extension("svg");
    write(&pgm, &mask.to_pgm())?;
    write(&svg_path, svg(w, width, height, &overlay).as_bytes())?;
    let rep = PlotReport {
        function: f.clone(),
        window: w,
        res: o.res,
        white_fraction: mask.white_fraction(),
        curves: overlay.curves.len(),
        pgm: pgm.clone(),
        svg: svg_path.clone(),
    };
    let mut out = outcome(&rep, true)?;
    out.files = vec![pgm, svg_path];
    Ok(out)
}

/// res pixels along the longer side.
fn aspect(w: &Window, res: usize) -> (usize, usize) {
    if w.width() >= w.height() {
        (res, ((res as f64 * w.height() / w.width()).round() as usize).max(1))
    } else {
        (((res as f64 * w.width() / w.height()).round() as usize).max(1), res)
    }
}

#[derive(Serialize)]
struct TraceReport {
    #[serde(rename = "fn")]
    function: FunctionSpec,
    window: Window,
    step: f64,
    curves: Vec<tractoria::LevelCurve>,
}

fn trace(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let w = window_or(o, Window::square(8.0))?;
    let h = step(&w, o.res);
    let curves = trace_level_set(f, f.level, w, h)?;
    outcome(&TraceReport { function: f.clone(), window: w, step: h, curves }, true)
}

#[derive(Serialize)]
struct ExpansionSummary {
    seed: u64,
    samples: usize,
    violations: usize,
    min_margin: f64,
    report: tractoria::complexfn::ExpansionReport,
}

/// Uniform samples from window ∩ tract by rejection; deterministic in the seed.
pub fn sample_tract(t: &TractRegion, n: usize, seed: u64) -> Result<Vec<Complex64>> {
    let w = t.window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > 1000 * n.max(1) {
            return usage("tract occupies too little of the window to sample");
        }
        let z = Complex64::new(rng.random_range(w.x0..w.x1), rng.random_range(w.y0..w.y1));
        if t.contains(z) {
            out.push(z);
        }
    }
    Ok(out)
}

fn verify_expansion(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let w = window_or(o, Window::square(8.0))?;
    let t = tract(f, o, w)?;
    let pts = sample_tract(&t, o.samples, o.seed)?;
    let report = check_expansion_estimate(f, &t, &pts)?;
    let min_margin = report.samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let pass = report.violations == 0;
    outcome(&ExpansionSummary { seed: o.seed, samples: pts.len(), violations: report.violations, min_margin, report }, pass)
}

#[derive(Serialize)]
struct ConvexitySummary {
    #[serde(rename = "fn")]
    function: FunctionSpec,
    window: Window,
    all_pass: bool,
    checks: Vec<tractoria::tract::ConvexityReport>,
}

fn verify_convexity(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    if o.radii.is_empty() || o.cs.is_empty() {
        return usage("--radii and --cs must be nonempty");
    }
    let reach = o.radii.iter().flat_map(|r| o.cs.iter().map(move |c| r.powf(*c))).fold(0.0, f64::max);
    let w = window_or(o, Window::square((1.05 * reach).ceil()))?;
    let t = tract(f, o, w)?;
    let mut checks = Vec::new();
    for &r in &o.radii {
        for &c in &o.cs {
            checks.push(check_md_convexity(f, &t, r, c)?);
        }
    }
    let all_pass = checks.iter().all(|c| c.pass);
    outcome(&ConvexitySummary { function: f.clone(), window: w, all_pass, checks }, all_pass)
}

/// Region from a command-line spec.
pub fn parse_region(f: &FunctionSpec, spec: &str, o: &Opts) -> Result<Region> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let region = match kind {
        "sector" => {
            let v = parse_floats(rest, 4, "sector")?;
            Region::annulus_sector(v[0], v[1], v[2], v[3], 256)?
        }
        "rect" => {
            let v = parse_floats(rest, 4, "rect")?;
            Region::quadrilateral(Polygon::rect(v[0], v[1], v[2], v[3]))?
        }
        "poly" => {
            let pts = rest.split(';').map(|p| parse_point(p, "polygon vertex")).collect::<Result<Vec<_>>>()?;
            let tags = (0..pts.len() as u32).collect();
            Region::quadrilateral(Polygon::with_tags(pts, tags)?)?
        }
        "expz2cos-sigma" => {
            let n: usize = match rest.trim().parse() {
                Ok(n) => n,
                Err(_) => return usage(format!("invalid index in '{spec}'")),
            };
            let (_, b) = catalog::expz2cos_radii(n);
            let r = (b + 1.0).ceil();
            let t = catalog::expz2cos_right_tract(r, step(&Window::square(r), o.res))?;
            catalog::expz2cos_sigma(Arc::new(t), n)?
        }
        "g-sector" => {
            let v: Vec<&str> = rest.split(',').collect();
            let j = v.first().and_then(|s| s.trim().parse::<u64>().ok());
            let n = v.get(1).and_then(|s| s.trim().parse::<u32>().ok());
            let eps = match v.get(2) {
                Some(s) => s.trim().parse::<f64>().ok(),
                None => Some(0.05),
            };
            match (j, n, eps) {
                (Some(j), Some(n), Some(eps)) if v.len() <= 3 => catalog::g_sector(j, n, eps)?,
                _ => return usage(format!("invalid g-sector spec '{spec}' (want j,n[,eps])")),
            }
        }
        _ if spec.starts_with('@') => {
            let text = std::fs::read_to_string(&spec[1..]).with_context(|| format!("reading {}", &spec[1..]))?;
            let mut r: Region = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => return usage(format!("invalid region file: {e}")),
            };
            if r.function.is_none() {
                r.function = Some(f.clone());
            }
            r
        }
        _ => return usage(format!("unknown region spec '{spec}'")),
    };
    Ok(region)
}

fn cert_options(o: &Opts) -> Result<CertOptions> {
    let (radii, angles) = parse_probes(&o.probes)?;
    Ok(CertOptions { probes: ProbeGrid { radii, angles }, precision: o.precision.unwrap_or(53), ..CertOptions::default() })
}

fn cover(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let Some(spec) = &o.region else { return usage("cover needs --region") };
    let Some(ann) = &o.annulus else { return usage("cover needs --annulus lo,hi") };
    let region = parse_region(f, spec, o)?;
    let v = parse_floats(ann, 2, "annulus")?;
    let cert = image_annulus_certificate(f, &region, LogAnnulus::new(v[0], v[1]), cert_options(o)?)?;
    let pass = cert.status == CoverStatus::Certified;
    outcome(&cert, pass)
}

#[derive(Serialize)]
struct HarmonicReport {
    estimate: tractoria::metrics::HarmonicEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    laplace: Option<f64>,
}

fn harmonic(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let Some(spec) = &o.region else { return usage("harmonic needs --region") };
    let region = parse_region(f, spec, o)?;
    let z = match &o.z {
        Some(s) => parse_point(s, "z")?,
        None => region.centroid(),
    };
    if let Some(eps) = o.eps {
        let wos = WosParams { walks: o.walks, seed: o.seed };
        let res = mcover_check(f, &region, z, &o.arc, eps, wos, o.precision.unwrap_or(53), Some(cert_options(o)?))?;
        let pass = res.certificate.as_ref().map(|c| c.status == CoverStatus::Certified).unwrap_or(false);
        return outcome(&res, pass);
    }
    let estimate = harmonic_measure_wos(&region.boundary, z, &o.arc, o.walks, o.seed)?;
    let laplace = match o.laplace {
        Some(n) => Some(harmonic_measure_laplace(&region.boundary, z, &o.arc, n)?),
        None => None,
    };
    outcome(&HarmonicReport { estimate, laplace }, true)
}

#[derive(Serialize)]
struct SlowOrbitSummary<'a> {
    all_inside: bool,
    all_bounds_pass: bool,
    report: &'a SlowOrbitReport,
}

fn slow_orbit(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let Some(src) = &o.target else { return usage("slow-orbit needs --target") };
    let mut target = match SlowTarget::parse(src) {
        Ok(t) => t,
        Err(e) => return usage(format!("invalid --target: {e}")),
    };
    if o.growth_cap > 0.0 {
        target = target.with_growth_cap(o.growth_cap);
    }
    let mode = match o.mode {
        ModeArg::Theorem1 => PipelineMode::Theorem1,
        ModeArg::Theorem2 => PipelineMode::Theorem2,
        ModeArg::Bgrhm => PipelineMode::Bgrhm,
    };
    let w = match mode {
        PipelineMode::Bgrhm => {
            let (_, b) = catalog::expz2cos_radii(o.depth);
            window_or(o, Window::square((b + 1.0).ceil()))?
        }
        _ => window_or(o, Window::square(20.0))?,
    };
    let t = Arc::new(tract(f, o, w)?);
    let pull = PullbackOptions { precision: o.precision.unwrap_or(256), ..PullbackOptions::default() };
    let rep = slow_orbit_pipeline(f, &t, &target, mode, o.depth, CertOptions::default(), pull)?;
    let (all_inside, all_bounds_pass) = (rep.witness.all_inside(), rep.witness.all_bounds_pass());
    outcome(&SlowOrbitSummary { all_inside, all_bounds_pass, report: &rep }, all_inside && all_bounds_pass)
}

/// Witness from a SlowOrbitReport (bare or wrapped in the CLI summary) or a bare OrbitWitness.
pub fn load_witness(path: &Path) -> Result<OrbitWitness> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return usage(format!("invalid witness file: {e}")),
    };
    let node = v.get("report").and_then(|r| r.get("witness")).or_else(|| v.get("witness")).unwrap_or(&v);
    match serde_json::from_value(node.clone()) {
        Ok(w) => Ok(w),
        Err(e) => usage(format!("invalid witness file: {e}")),
    }
}

fn classify(f: &FunctionSpec, o: &Opts) -> Result<Outcome> {
    let Some(p) = &o.witness else { return usage("classify needs --witness") };
    let wit = load_witness(p)?;
    let w = window_or(o, Window::square(20.0))?;
    let t = tract(&wit.function, o, w)?;
    if wit.function != *f && o.function != "EXP" {
        return usage("--fn does not match the witness function");
    }
    let cl = classify_escape(&wit.function, &t, &wit, o.rho)?;
    let pass = match o.expect {
        Some(Verdict::Slow) => cl.verdict == "slow",
        Some(Verdict::FastConsistent) => cl.verdict == "fast-consistent",
        None => true,
    };
    outcome(&cl, pass)
}
