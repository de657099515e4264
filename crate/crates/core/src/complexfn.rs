//! Catalog of entire functions with exact derivatives and log-scale evaluation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::FnError;
use crate::hp::{wrap_pi, BigComplex};
use crate::tract::TractRegion;

/// Catalog tag plus parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn")]
pub enum FnKind {
    #[serde(rename = "EXP")]
    Exp,
    #[serde(rename = "EXPZ2COS")]
    ExpZ2Cos,
    /// exp(-g) with g(z) = sum_{k>=1} (z/2^k)^(2^k).
    #[serde(rename = "RECIP_EXP_G")]
    RecipExpG,
    /// Polynomial with coefficients `[re, im]`, lowest degree first.
    #[serde(rename = "POLY")]
    Poly { coeffs: Vec<[f64; 2]> },
    /// outer(inner(z)).
    #[serde(rename = "COMPOSE")]
    Compose { outer: Box<FnKind>, inner: Box<FnKind> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    #[serde(flatten)]
    pub kind: FnKind,
    /// Boundary level R.
    #[serde(rename = "R", default = "one")]
    pub level: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub logmod: f64,
    pub arg: f64,
    pub err: f64,
}

/// A positive magnitude `exp(ln)`, with `lnln = ln(ln)` kept for values whose
/// log does not fit in an f64.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Magnitude {
    pub ln: f64,
    pub lnln: Option<f64>,
}

impl Magnitude {
    pub fn from_ln(ln: f64) -> Self {
        let lnln = if ln > 0.0 { Some(ln.ln()) } else { None };
        Self { ln, lnln }
    }

    pub fn from_lnln(lnln: f64) -> Self {
        Self { ln: lnln.exp(), lnln: Some(lnln) }
    }

    /// Total order on magnitudes, using `lnln` when `ln` overflowed.
    pub fn cmp_key(&self) -> (f64, f64) {
        if self.ln.is_finite() {
            (0.0, self.ln)
        } else {
            (1.0, self.lnln.unwrap_or(f64::INFINITY))
        }
    }

    pub fn ge(&self, other: &Magnitude) -> bool {
        match (self.ln.is_finite(), other.ln.is_finite()) {
            (true, true) => self.ln >= other.ln,
            (false, true) => true,
            (true, false) => false,
            (false, false) => self.lnln >= other.lnln,
        }
    }
}

impl FunctionSpec {
    pub fn new(kind: FnKind) -> Self {
        Self { kind, level: 1.0 }
    }

    pub fn with_level(kind: FnKind, level: f64) -> Self {
        Self { kind, level }
    }

    pub fn exp() -> Self {
        Self::new(FnKind::Exp)
    }

    pub fn expz2cos() -> Self {
        Self::new(FnKind::ExpZ2Cos)
    }

    pub fn recip_exp_g() -> Self {
        Self::new(FnKind::RecipExpG)
    }

    pub fn poly(coeffs: &[Complex64]) -> Self {
        Self::new(FnKind::Poly { coeffs: coeffs.iter().map(|c| [c.re, c.im]).collect() })
    }

    pub fn from_json(s: &str) -> Result<Self, FnError> {
        let spec: FunctionSpec =
            serde_json::from_str(s).map_err(|e| FnError::InvalidParam(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FnError> {
        if !(self.level > 0.0 && self.level.is_finite()) {
            return Err(FnError::InvalidParam(format!("level R must be positive, got {}", self.level)));
        }
        validate_kind(&self.kind)
    }

    pub fn name(&self) -> String {
        kind_name(&self.kind)
    }

    pub fn eval_f64(&self, z: Complex64) -> Complex64 {
        value(&self.kind, &z)
    }

    pub fn derivative_f64(&self, z: Complex64) -> Complex64 {
        deriv(&self.kind, &z)
    }

    /// log f(z) in double precision on some branch.
    pub fn log_f64(&self, z: Complex64) -> Complex64 {
        logf(&self.kind, &z)
    }

    /// f'(z)/f(z) in double precision.
    pub fn logderiv_f64(&self, z: Complex64) -> Complex64 {
        logderiv(&self.kind, &z)
    }

    /// ln|f(z)| - ln R, the level function whose zero set is the tract boundary.
    pub fn level_fn(&self, z: Complex64) -> f64 {
        self.log_f64(z).re - self.level.ln()
    }

    pub fn eval(&self, z: Complex64, precision: u32) -> Result<BigComplex, FnError> {
        self.eval_big(&BigComplex::from_c64(precision.max(53), z), precision)
    }

    pub fn eval_big(&self, z: &BigComplex, precision: u32) -> Result<BigComplex, FnError> {
        if precision < 53 {
            return Err(FnError::InvalidParam(format!("precision {precision} < 53")));
        }
        let guard = self.guard_bits(z.to_c64());
        let w = z.with_prec(precision + guard);
        let v = value(&self.kind, &w);
        self.check_range(z.to_c64(), &v)?;
        Ok(v.with_prec(precision))
    }

    pub fn derivative(&self, z: Complex64, precision: u32) -> Result<BigComplex, FnError> {
        self.derivative_big(&BigComplex::from_c64(precision.max(53), z), precision)
    }

    pub fn derivative_big(&self, z: &BigComplex, precision: u32) -> Result<BigComplex, FnError> {
        if precision < 53 {
            return Err(FnError::InvalidParam(format!("precision {precision} < 53")));
        }
        let guard = self.guard_bits(z.to_c64());
        let w = z.with_prec(precision + guard);
        let v = deriv(&self.kind, &w);
        if !v.is_finite() {
            return Err(FnError::RangeOverflow);
        }
        Ok(v.with_prec(precision))
    }

    /// log f(z) at the working precision of `z` (natural branch of the formula).
    pub fn log_big(&self, z: &BigComplex) -> BigComplex {
        logf(&self.kind, z)
    }

    pub fn logderiv_big(&self, z: &BigComplex) -> BigComplex {
        logderiv(&self.kind, z)
    }

    /// Principal log of f(z) with a guaranteed error bound.
    pub fn eval_log(&self, z: Complex64, precision: u32) -> Result<LogValue, FnError> {
        if precision < 53 {
            return Err(FnError::InvalidParam(format!("precision {precision} < 53")));
        }
        let (l, q, scale) = if precision == 53 {
            (self.log_f64(z), self.logderiv_f64(z), series_scale(&self.kind, z))
        } else {
            let guard = self.guard_bits(z);
            let w = BigComplex::from_c64(precision + guard, z);
            let l = logf(&self.kind, &w);
            let q = logderiv(&self.kind, &w);
            let lr = Complex64::new(l.re.to_f64(), crate::hp::wrap_pi_big(&l.im).to_f64());
            (lr, q.to_c64(), series_scale(&self.kind, z))
        };
        let zq = z.norm().max(1.0) * q.norm();
        if l.re == f64::NEG_INFINITY || !zq.is_finite() || zq > 2f64.powi(precision as i32 - 4) {
            return Err(FnError::NearZero { z: [z.re, z.im] });
        }
        if !l.re.is_finite() || !l.im.is_finite() {
            return Err(FnError::RangeOverflow);
        }
        let rel = 2f64.powi(4 - precision as i32);
        let mut err = rel * (1.0 + l.norm() + zq + scale) + series_tail(&self.kind, z, precision);
        if precision > 53 {
            err = err.max(f64::EPSILON * (1.0 + l.norm()));
        }
        Ok(LogValue { logmod: l.re, arg: wrap_pi(l.im), err })
    }

    /// eval_log with the precision raised until the conditioning |z f'/f| is resolved.
    pub fn eval_log_adaptive(&self, z: Complex64, precision: u32) -> Result<LogValue, FnError> {
        match self.eval_log(z, precision) {
            Err(FnError::NearZero { .. }) if self.log_f64(z).re.is_finite() => {
                let zq = z.norm().max(1.0) * self.logderiv_f64(z).norm();
                if !zq.is_finite() {
                    return Err(FnError::NearZero { z: [z.re, z.im] });
                }
                let need = (zq.log2().ceil() as u32 + 24).max(precision);
                self.eval_log(z, need)
            }
            r => r,
        }
    }

    /// Asymptotic log M_D(r) for the catalog's principal tract, given ln r.
    pub fn asymptotic_log_md(&self, ln_r: Magnitude) -> Option<Magnitude> {
        match &self.kind {
            // log M = r
            FnKind::Exp if !ln_r.ln.is_finite() => None,
            FnKind::Exp => Some(if ln_r.ln < 700.0 {
                Magnitude::from_ln(ln_r.ln.exp())
            } else {
                Magnitude::from_lnln(ln_r.ln)
            }),
            // log M ~ r^2
            FnKind::ExpZ2Cos => {
                let ll = 2.0 * ln_r.ln;
                if !ll.is_finite() {
                    return None;
                }
                Some(if ll < 700.0 { Magnitude::from_ln(ll.exp()) } else { Magnitude::from_lnln(ll) })
            }
            FnKind::Poly { coeffs } => {
                let d = coeffs.iter().rposition(|c| c[0] != 0.0 || c[1] != 0.0)?;
                let ad = Complex64::new(coeffs[d][0], coeffs[d][1]).norm();
                let ln = d as f64 * ln_r.ln + ad.ln();
                ln.is_finite().then(|| Magnitude::from_ln(ln))
            }
            _ => None,
        }
    }

    fn guard_bits(&self, z: Complex64) -> u32 {
        let l = self.log_f64(z).norm();
        let l = if l.is_finite() { l } else { 1e300 };
        let s = 2.0 + z.norm_sqr() + l;
        16 + s.log2().ceil().clamp(0.0, 4096.0) as u32
    }

    fn check_range(&self, z: Complex64, v: &BigComplex) -> Result<(), FnError> {
        if !v.is_finite() {
            return Err(FnError::RangeOverflow);
        }
        let l = self.log_f64(z).re;
        if l.is_finite() && l > -7e8 && v.re.is_zero() && v.im.is_zero() {
            return Err(FnError::RangeOverflow);
        }
        Ok(())
    }
}

fn validate_kind(kind: &FnKind) -> Result<(), FnError> {
    match kind {
        FnKind::Poly { coeffs } => {
            if coeffs.is_empty() || coeffs.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
                return Err(FnError::InvalidParam("POLY needs a nonzero coefficient".into()));
            }
            if coeffs.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
                return Err(FnError::InvalidParam("POLY coefficients must be finite".into()));
            }
            Ok(())
        }
        FnKind::Compose { outer, inner } => {
            validate_kind(outer)?;
            validate_kind(inner)
        }
        _ => Ok(()),
    }
}

fn kind_name(kind: &FnKind) -> String {
    match kind {
        FnKind::Exp => "EXP".into(),
        FnKind::ExpZ2Cos => "EXPZ2COS".into(),
        FnKind::RecipExpG => "RECIP_EXP_G".into(),
        FnKind::Poly { coeffs } => format!("POLY[{}]", coeffs.len().saturating_sub(1)),
        FnKind::Compose { outer, inner } => format!("{}∘{}", kind_name(outer), kind_name(inner)),
    }
}

/// Minimal scalar interface shared by f64 and MPFR complex numbers.
pub trait Scalar: Clone {
    fn bits(&self) -> u32;
    fn lift(&self, z: Complex64) -> Self;
    fn approx(&self) -> Complex64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul_i(&self) -> Self;
    fn scale(&self, k: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn cos(&self) -> Self;
    fn sin(&self) -> Self;
    fn sqr(&self) -> Self {
        self.mul(self)
    }
}

impl Scalar for Complex64 {
    fn bits(&self) -> u32 {
        53
    }
    fn lift(&self, z: Complex64) -> Self {
        z
    }
    fn approx(&self) -> Complex64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        // Smith's scaling: |o|^2 overflows long before the quotient does
        let (a, b, c, d) = (self.re, self.im, o.re, o.im);
        if c.abs() >= d.abs() {
            let r = d / c;
            let t = c + d * r;
            Complex64::new((a + b * r) / t, (b - a * r) / t)
        } else {
            let r = c / d;
            let t = c * r + d;
            Complex64::new((a * r + b) / t, (b * r - a) / t)
        }
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul_i(&self) -> Self {
        Complex64::new(-self.im, self.re)
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
}

impl Scalar for BigComplex {
    fn bits(&self) -> u32 {
        self.prec()
    }
    fn lift(&self, z: Complex64) -> Self {
        BigComplex::from_c64(self.prec(), z)
    }
    fn approx(&self) -> Complex64 {
        self.to_c64()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul_i(&self) -> Self {
        BigComplex::new(-self.im.clone(), self.re.clone())
    }
    fn scale(&self, k: f64) -> Self {
        BigComplex::scale(self, k)
    }
    fn exp(&self) -> Self {
        BigComplex::exp(self)
    }
    fn ln(&self) -> Self {
        BigComplex::ln(self)
    }
    fn cos(&self) -> Self {
        BigComplex::cos(self)
    }
    fn sin(&self) -> Self {
        BigComplex::sin(self)
    }
}

/// Number of series terms needed so that the tail of g stays below
/// `2^-(bits+8)` relative to the largest kept term, and at least the smallest
/// K with `2^K >= 2|z|`.
pub fn g_truncation(z_abs: f64, bits: u32) -> usize {
    let mut k0 = 1usize;
    while (2f64).powi(k0 as i32) < 2.0 * z_abs {
        k0 += 1;
    }
    if z_abs == 0.0 {
        return k0;
    }
    let lz = z_abs.log2();
    let log2_t = |k: usize| 2f64.powi(k as i32) * (lz - k as f64);
    let peak = (1..=k0).map(log2_t).fold(0.0f64, f64::max);
    let mut k = k0;
    while 1.0 + log2_t(k + 1) > peak - (bits as f64 + 8.0) {
        k += 1;
    }
    k
}

/// Bound on the discarded tail `sum_{k>K} |z/2^k|^(2^k)`.
pub fn g_tail_bound(z_abs: f64, k: usize) -> f64 {
    if z_abs == 0.0 {
        return 0.0;
    }
    let x = z_abs / 2f64.powi(k as i32 + 1);
    // terms beyond K+1 are at most the square of the previous one, and x <= 1/2
    2.0 * x.powf(2f64.powi(k as i32 + 1))
}

/// Partial sum of g with K terms, plus the derivative partial sum.
fn g_terms<S: Scalar>(z: &S, k_max: usize) -> (S, S) {
    let zero = z.lift(Complex64::new(0.0, 0.0));
    let mut g = zero.clone();
    let mut dg = zero.clone();
    let is_zero = z.approx() == Complex64::new(0.0, 0.0);
    for k in 1..=k_max {
        let w = z.scale(0.5f64.powi(k as i32));
        let mut p = w.clone();
        for _ in 0..k {
            p = p.sqr();
        }
        g = g.add(&p);
        if !is_zero {
            dg = dg.add(&p.div(&w));
        }
    }
    (g, dg)
}

/// g(z) truncated per [`g_truncation`] at the scalar's precision; returns the
/// partial sum and the tail bound.
pub fn series_g<S: Scalar>(z: &S) -> (S, f64) {
    let a = z.approx().norm();
    let k = g_truncation(a, z.bits());
    (g_terms(z, k).0, g_tail_bound(a, k))
}

fn g_and_dg<S: Scalar>(z: &S) -> (S, S) {
    let k = g_truncation(z.approx().norm(), z.bits());
    g_terms(z, k)
}

fn ln_cos<S: Scalar>(z: &S) -> S {
    let y = z.approx().im;
    if y.abs() < 20.0 {
        z.cos().ln()
    } else if y > 0.0 {
        // cos z = e^{-iz} (1 + e^{2iz}) / 2
        let iz = z.mul_i();
        let one = z.lift(Complex64::new(1.0, 0.0));
        iz.neg().add(&one.add(&iz.scale(2.0).exp()).scale(0.5).ln())
    } else {
        let iz = z.mul_i();
        let one = z.lift(Complex64::new(1.0, 0.0));
        iz.add(&one.add(&iz.scale(-2.0).exp()).scale(0.5).ln())
    }
}

fn tan<S: Scalar>(z: &S) -> S {
    z.sin().div(&z.cos())
}

fn poly_eval<S: Scalar>(coeffs: &[[f64; 2]], z: &S) -> (S, S) {
    let mut p = z.lift(Complex64::new(0.0, 0.0));
    let mut dp = p.clone();
    for c in coeffs.iter().rev() {
        dp = dp.mul(z).add(&p);
        p = p.mul(z).add(&z.lift(Complex64::new(c[0], c[1])));
    }
    (p, dp)
}

pub fn value<S: Scalar>(kind: &FnKind, z: &S) -> S {
    match kind {
        FnKind::Exp => z.exp(),
        FnKind::ExpZ2Cos => z.sqr().exp().mul(&z.cos()),
        FnKind::RecipExpG => g_and_dg(z).0.neg().exp(),
        FnKind::Poly { coeffs } => poly_eval(coeffs, z).0,
        FnKind::Compose { outer, inner } => value(outer, &value(inner, z)),
    }
}

pub fn deriv<S: Scalar>(kind: &FnKind, z: &S) -> S {
    match kind {
        FnKind::Exp => z.exp(),
        FnKind::ExpZ2Cos => {
            let e = z.sqr().exp();
            e.mul(&z.scale(2.0).mul(&z.cos()).sub(&z.sin()))
        }
        FnKind::RecipExpG => {
            let (g, dg) = g_and_dg(z);
            dg.neg().mul(&g.neg().exp())
        }
        FnKind::Poly { coeffs } => poly_eval(coeffs, z).1,
        FnKind::Compose { outer, inner } => deriv(outer, &value(inner, z)).mul(&deriv(inner, z)),
    }
}

pub fn logf<S: Scalar>(kind: &FnKind, z: &S) -> S {
    match kind {
        FnKind::Exp => z.clone(),
        FnKind::ExpZ2Cos => z.sqr().add(&ln_cos(z)),
        FnKind::RecipExpG => g_and_dg(z).0.neg(),
        FnKind::Poly { coeffs } => poly_eval(coeffs, z).0.ln(),
        FnKind::Compose { outer, inner } => logf(outer, &value(inner, z)),
    }
}

pub fn logderiv<S: Scalar>(kind: &FnKind, z: &S) -> S {
    match kind {
        FnKind::Exp => z.lift(Complex64::new(1.0, 0.0)),
        FnKind::ExpZ2Cos => z.scale(2.0).sub(&tan(z)),
        FnKind::RecipExpG => g_and_dg(z).1.neg(),
        FnKind::Poly { coeffs } => {
            let (p, dp) = poly_eval(coeffs, z);
            dp.div(&p)
        }
        FnKind::Compose { outer, inner } => {
            let w = value(inner, z);
            logderiv(outer, &w).mul(&deriv(inner, z))
        }
    }
}

/// Magnitude of intermediate terms that cancel in the log (series functions).
fn series_scale(kind: &FnKind, z: Complex64) -> f64 {
    match kind {
        FnKind::RecipExpG => {
            let a = z.norm();
            let k = g_truncation(a, 53);
            (1..=k).map(|k| (a / 2f64.powi(k as i32)).powf(2f64.powi(k as i32))).sum()
        }
        FnKind::ExpZ2Cos => z.norm_sqr(),
        FnKind::Compose { outer, inner } => series_scale(outer, value(inner, &z)) + series_scale(inner, z),
        _ => 0.0,
    }
}

fn series_tail(kind: &FnKind, z: Complex64, bits: u32) -> f64 {
    match kind {
        FnKind::RecipExpG => {
            let a = z.norm();
            g_tail_bound(a, g_truncation(a, bits))
        }
        _ => 0.0,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionSample {
    pub z: [f64; 2],
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub function: String,
    pub samples: Vec<ExpansionSample>,
    pub violations: usize,
    pub window: crate::geom::Window,
}

/// Tests |z f'(z)/f(z)| >= log|f(z)| / (4 pi) at each sample.
pub fn check_expansion_estimate(
    f: &FunctionSpec,
    tract: &TractRegion,
    samples: &[Complex64],
) -> Result<ExpansionReport, FnError> {
    let mut out = Vec::with_capacity(samples.len());
    for &z in samples {
        if !tract.contains(z) {
            return Err(FnError::SampleOutsideTract { z: [z.re, z.im] });
        }
        let lhs = z.norm() * f.logderiv_f64(z).norm();
        let rhs = f.log_f64(z).re / (4.0 * PI);
        let margin = lhs - rhs;
        out.push(ExpansionSample { z: [z.re, z.im], lhs, rhs, margin, pass: margin >= 0.0 });
    }
    let violations = out.iter().filter(|s| !s.pass).count();
    Ok(ExpansionReport { function: f.name(), samples: out, violations, window: tract.window })
}

/// ln|x| of an MPFR complex as an f64 (finite for any MPFR value in range).
pub fn ln_abs_big(z: &BigComplex) -> f64 {
    let a: Float = z.abs();
    a.ln().to_f64()
}
