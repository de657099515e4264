use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FnError {
    #[error("value out of representable range; use eval_log")]
    RangeOverflow,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("f(z) indistinguishable from 0 at z = {z:?}")]
    NearZero { z: [f64; 2] },
    #[error("sample {z:?} lies outside the tract")]
    SampleOutsideTract { z: [f64; 2] },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TractError {
    #[error(transparent)]
    Fn(#[from] FnError),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("seed lies on the level curve (log margin {margin:e})")]
    SeedOnBoundary { margin: f64 },
    #[error("seed lies in {{|f| < R}} (log margin {margin})")]
    SeedBelowLevel { margin: f64 },
    #[error("circle |z| = {r} misses the tract inside the window")]
    CircleMissesTract { r: f64 },
    #[error("M_D(rho) <= rho: log M_D = {log_md}, log rho = {log_rho}")]
    NotExpanding { log_md: f64, log_rho: f64 },
    #[error("iterate {k} is not representable and has no asymptotic model")]
    NotRepresentable { k: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("point {z:?} outside the unit disk")]
    OutsideDisk { z: [f64; 2] },
    #[error("w = {w:?} is at a puncture of C \\ {{0,1}}")]
    AtPuncture { w: [f64; 2] },
    #[error("K = exp({log_k}) is not above 1")]
    KNotAboveOne { log_k: f64 },
    #[error("eta = {eta} outside [0,1)")]
    EtaOutOfRange { eta: f64 },
    #[error("Poisson kernel {p} >= 1")]
    KernelAtLeastOne { p: f64 },
    #[error("log|f(z)| = {log_fz} below required {required}")]
    LogTooSmall { log_fz: f64, required: f64 },
    #[error("point {z:?} is not interior to the region")]
    PointNotInterior { z: [f64; 2] },
    #[error("marked arc is empty")]
    ArcEmpty,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error(transparent)]
    Fn(#[from] FnError),
    #[error(transparent)]
    Tract(#[from] TractError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("precondition fails: lhs {lhs} <= rhs {rhs} (uncertainty {uncertainty})")]
    PreconditionFails { lhs: f64, rhs: f64, uncertainty: f64 },
    #[error("f vanishes on the region (winding around 0 = {winding})")]
    VanishingF { winding: i64 },
    #[error("hyperbolic distance bound {rho_upper} >= budget {lambda}")]
    BudgetExceeded { rho_upper: f64, lambda: f64 },
    #[error("marked arc does not lie on the level curve: {0}")]
    LevelArcMismatch(String),
    #[error("epsilon {eps} exceeds the certified angle lower bound {theta_lower}")]
    EpsilonNotSupported { eps: f64, theta_lower: f64 },
    #[error("invalid annulus: {0}")]
    InvalidAnnulus(String),
    #[error("region construction failed: {0}")]
    Region(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error(transparent)]
    Fn(#[from] FnError),
    #[error(transparent)]
    Tract(#[from] TractError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error("invalid target sequence: {0}")]
    TargetInvalid(String),
    #[error("chain precondition fails at r = {r}: {detail}")]
    PreconditionFails { r: f64, detail: String },
    #[error("chain broken at link {link}: {reason}")]
    ChainBroken { link: usize, reason: String },
    #[error("conditions never met for n <= {n_max}")]
    ConditionNeverMet { n_max: usize },
    #[error("annulus for n = {n} misses the tract")]
    AnnulusMissesTract { n: usize },
    #[error("two-sided mode requires a growth cap K")]
    MissingGrowthCap,
    #[error("growth cap violated at n = {n}: log a_(n+1) = {lhs} > {rhs}")]
    GrowthCapViolated { n: usize, lhs: f64, rhs: f64 },
    #[error("target never reaches {value} within n <= {n_max}")]
    TargetNeverReaches { value: f64, n_max: u64 },
    #[error("q_{j} = {required} exceeds cap {cap}")]
    UnboundedRepeat { j: usize, required: u64, cap: u64, partial: Box<crate::orbit::BlockSchedule> },
    #[error("no in-set preimage at link {link} (best residual {best_residual:e})")]
    NewtonStall { link: usize, target: [f64; 2], seeds_tried: usize, best_residual: f64 },
    #[error("forward verification still fails at the precision cap {bits}")]
    PrecisionCap { bits: u32 },
    #[error("invalid schedule: {0}")]
    Schedule(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}
