use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tractoria::{FunctionSpec, Window};

/// Invalid flag values detected after clap parsing; mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Parser, Debug)]
#[command(name = "tractoria", version, about = "Direct tracts: plots, covering certificates, harmonic measure and slow-escape witnesses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Render {|f| > R} as a PGM mask plus an SVG of the traced boundary.
    PlotTract(Opts),
    /// Trace the level curves |f| = R and emit them as JSON.
    Trace(Opts),
    /// Sample the expansion estimate |z f'/f| >= log|f| / 4pi in the tract.
    VerifyExpansion(Opts),
    /// Check log M_D(r^c) >= c log M_D(r) over --radii x --cs.
    VerifyConvexity(Opts),
    /// Winding-number certificate that f(region) covers an annulus.
    Cover(Opts),
    /// Walk-on-spheres harmonic measure of a tagged boundary arc.
    Harmonic(Opts),
    /// Build chain, schedule and pulled-back orbit for a target a_n.
    SlowOrbit(Opts),
    /// Compare a witness orbit with iterates of M_D.
    Classify(Opts),
    /// Execute a JSON RunConfig.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PlotTract,
    Trace,
    VerifyExpansion,
    VerifyConvexity,
    Cover,
    Harmonic,
    SlowOrbit,
    Classify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Theorem1,
    Theorem2,
    Bgrhm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Slow,
    FastConsistent,
}

/// Shared flags; every field has a default so a RunConfig may omit it.
#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    /// Catalog name (EXP, EXPZ2COS, RECIP_EXP_G), inline JSON, or @file.json.
    #[arg(long = "fn", default_value = "EXP")]
    #[serde(rename = "fn")]
    pub function: String,
    /// x0,x1,y0,y1 (default: -8,8,-8,8; slow-orbit and classify -20,20,-20,20;
    /// verify-convexity the square holding the largest r^c).
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Pixels per side for plots, grid cells per side for tract tracing.
    #[arg(long, default_value_t = 512)]
    pub res: usize,
    /// Working precision in bits (certificates: 53; pullback: 256).
    #[arg(long)]
    pub precision: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path (plot-tract: output prefix for .pgm/.svg/.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rate expression a_n, e.g. "10 + 2*log(1+n)".
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Theorem2)]
    pub mode: ModeArg,

    /// Point inside the tract to trace from (default: searched in the window).
    #[arg(long, allow_hyphen_values = true)]
    pub tract_seed: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub radii: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1.5,2")]
    pub cs: Vec<f64>,
    /// sector:r_in,r_out,t0,t1 | rect:x0,x1,y0,y1 (edges tagged 0..3 from the bottom, CCW) |
    /// poly:x,y;x,y;... (edge i tagged i) |
    /// expz2cos-sigma:n | g-sector:j,n[,eps] | @region.json
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// log-scale annulus lo,hi.
    #[arg(long, allow_hyphen_values = true)]
    pub annulus: Option<String>,
    /// Probe grid RADIIxANGLES.
    #[arg(long, default_value = "32x64")]
    pub probes: String,
    /// Start point x,y for harmonic measure.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Edge tags forming the arc.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub arc: Vec<u32>,
    #[arg(long, default_value_t = 100_000)]
    pub walks: u64,
    /// Also solve the discrete Dirichlet problem on an N-node grid.
    #[arg(long)]
    pub laplace: Option<usize>,
    /// Run the full covering check with this angle epsilon.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Growth cap K: a_(n+1) <= K M_D(a_n).
    #[arg(long, default_value_t = 0.1)]
    pub growth_cap: f64,
    #[arg(long, default_value_t = 2.0)]
    pub rho: f64,
    /// SlowOrbitReport or OrbitWitness JSON.
    #[arg(long)]
    pub witness: Option<PathBuf>,
    /// Exit 3 unless classify returns this verdict.
    #[arg(long, value_enum)]
    pub expect: Option<Verdict>,
    /// Circle radii to overlay.
    #[arg(long, value_delimiter = ',')]
    pub overlay_radii: Vec<f64>,
}

impl Default for Opts {
    fn default() -> Self {
        #[derive(Parser)]
        struct Wrap {
            #[command(flatten)]
            o: Opts,
        }
        Wrap::try_parse_from(["tractoria"]).expect("defaults parse").o
    }
}

/// A complete command invocation, loadable from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(flatten)]
    pub opts: Opts,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).or_else(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    /// `flatten` would silently accept unknown keys, so split out `command` by hand.
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        use serde::de::Error;
        let mut map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let cmd = map.remove("command").ok_or_else(|| serde_json::Error::missing_field("command"))?;
        Ok(Self { command: serde_json::from_value(cmd)?, opts: serde_json::from_value(map.into())? })
    }
}

pub fn parse_function(s: &str) -> Result<FunctionSpec> {
    let f = match s.trim() {
        "EXP" => FunctionSpec::exp(),
        "EXPZ2COS" => FunctionSpec::expz2cos(),
        "RECIP_EXP_G" => FunctionSpec::recip_exp_g(),
        t if t.starts_with('@') => {
            let text = std::fs::read_to_string(&t[1..]).with_context(|| format!("reading {}", &t[1..]))?;
            match FunctionSpec::from_json(&text) {
                Ok(f) => f,
                Err(e) => return usage(format!("invalid function file: {e}")),
            }
        }
        t if t.starts_with('{') => match FunctionSpec::from_json(t) {
            Ok(f) => f,
            Err(e) => return usage(format!("invalid function JSON: {e}")),
        },
        t => return usage(format!("unknown function '{t}'")),
    };
    Ok(f)
}

pub fn parse_window(s: &str) -> Result<Window> {
    match Window::parse(s) {
        Some(w) => Ok(w),
        None => usage(format!("invalid window '{s}' (want x0,x1,y0,y1 with x0<x1, y0<y1)")),
    }
}

pub fn parse_floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Option<Vec<f64>> = s.split(',').map(|t| t.trim().parse().ok()).collect();
    match v {
        Some(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => usage(format!("invalid {what} '{s}' (want {n} comma-separated numbers)")),
    }
}

pub fn parse_point(s: &str, what: &str) -> Result<Complex64> {
    let v = parse_floats(s, 2, what)?;
    Ok(Complex64::new(v[0], v[1]))
}

pub fn parse_probes(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() == 2 {
        if let (Ok(a), Ok(b)) = (parts[0].parse(), parts[1].parse()) {
            if a > 0 && b > 0 {
                return Ok((a, b));
            }
        }
    }
    usage(format!("invalid probe grid '{s}' (want RxA)"))
}
