//! Covering chains, block-repetition schedules and finite-depth slowly
//! escaping witnesses built by backward pullback.

use std::sync::Arc;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::complexfn::{FunctionSpec, Magnitude};
use crate::covering::{image_annulus_certificate, CertOptions, CoverCertificate, CoverStatus, LogAnnulus, Region};
use crate::error::{OrbitError, TractError};
use crate::hp::{wrap_pi_big, BigComplex};
use crate::metrics::bcover_floor;
use crate::rate::RateExpr;
use crate::tract::{iterate_md, max_modulus_on_tract, TractRegion};

/// Target rate a_n, given as an expression in n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowTarget {
    pub a: RateExpr,
    pub monotone: bool,
    /// K with a_(n+1) <= K M_D(a_n).
    pub growth_cap: Option<f64>,
}

impl SlowTarget {
    pub fn parse(src: &str) -> Result<Self, OrbitError> {
        let a = RateExpr::parse(src).map_err(|e| OrbitError::TargetInvalid(e.to_string()))?;
        Ok(Self { a, monotone: true, growth_cap: None })
    }

    pub fn with_growth_cap(mut self, k: f64) -> Self {
        self.growth_cap = Some(k);
        self
    }

    pub fn at(&self, n: u64) -> f64 {
        self.a.eval(n as f64)
    }

    /// The sequence a_n / s, used to place two-sided sets below a_n.
    pub fn scaled(&self, s: f64) -> Result<Self, OrbitError> {
        let a = RateExpr::parse(&format!("({})/{:?}", self.a.source(), s)).map_err(|e| OrbitError::TargetInvalid(e.to_string()))?;
        Ok(Self { a, monotone: self.monotone, growth_cap: self.growth_cap })
    }

    /// Positive, finite and (if monotone) nondecreasing on [0, n_max], with
    /// a_(n_max) > a_0 as the unboundedness surrogate.
    pub fn validate(&self, n_max: u64) -> Result<(), OrbitError> {
        let mut prev = f64::NEG_INFINITY;
        for n in 0..=n_max {
            let v = self.at(n);
            if !(v.is_finite() && v > 0.0) {
                return Err(OrbitError::TargetInvalid(format!("a_{n} = {v}")));
            }
            if self.monotone && v < prev {
                return Err(OrbitError::TargetInvalid(format!("a_{n} = {v} < a_{} = {prev}", n - 1)));
            }
            prev = v;
        }
        if n_max > 0 && !(self.at(n_max) > self.at(0)) {
            return Err(OrbitError::TargetInvalid(format!("a is constant on [0, {n_max}]")));
        }
        Ok(())
    }

    /// Checks ln a_(n+1) <= ln K + ln M_D(a_n) for n < n_max.
    pub fn validate_growth_cap(&self, f: &FunctionSpec, tract: &TractRegion, n_max: u64) -> Result<(), OrbitError> {
        let k = self.growth_cap.ok_or(OrbitError::MissingGrowthCap)?;
        for n in 0..n_max {
            let lhs = self.at(n + 1).ln();
            let md = log_md(f, tract, self.at(n))?;
            if !md.ln.is_finite() {
                continue;
            }
            let rhs = k.ln() + md.ln;
            if lhs > rhs {
                return Err(OrbitError::GrowthCapViolated { n: n as usize, lhs, rhs });
            }
        }
        Ok(())
    }
}

/// ln M_D(r): traced when the circle fits the tract window, otherwise the
/// asymptotic model.
pub fn log_md(f: &FunctionSpec, tract: &TractRegion, r: f64) -> Result<Magnitude, TractError> {
    if r <= tract.window.inscribed_radius() {
        return Ok(Magnitude::from_ln(max_modulus_on_tract(f, tract, r)?.log_md));
    }
    match f.asymptotic_log_md(Magnitude::from_ln(r.ln())) {
        Some(m) => Ok(m),
        None => Ok(Magnitude::from_ln(max_modulus_on_tract(f, tract, r)?.log_md)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    /// Links certified directly at small radii.
    Demo,
    /// Links justified by the covering lemma's hypotheses in log-scale.
    Literal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmaSet {
    pub index: usize,
    pub r_in: f64,
    pub r_out: f64,
    pub region: Option<Region>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkEvidence {
    Certificate { certificate: Box<CoverCertificate> },
    Lemma { floor: f64, log_md: f64, holds: bool },
}

/// f(Σ̄_from) ⊇ Ā(needed), which contains every set in `covers`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainLink {
    pub from: usize,
    pub covers: Vec<usize>,
    pub needed: LogAnnulus,
    pub evidence: LinkEvidence,
}

impl ChainLink {
    pub fn holds(&self) -> bool {
        match &self.evidence {
            LinkEvidence::Certificate { certificate } => certificate.status == CoverStatus::Certified,
            LinkEvidence::Lemma { holds, .. } => *holds,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionRow {
    pub n: u64,
    pub ln_a: f64,
    pub floor: f64,
    pub first: bool,
    pub second_lhs: f64,
    pub second_rhs: f64,
    pub third_lhs: f64,
    pub third_rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShrinkLevel {
    pub j: usize,
    pub big_c: f64,
    pub c: f64,
    pub start: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub big_n: u64,
    pub first_waived: bool,
    pub rows: Vec<ConditionRow>,
    pub levels: Vec<ShrinkLevel>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chain {
    pub function: FunctionSpec,
    pub mode: ChainMode,
    pub construction: String,
    pub sets: Vec<SigmaSet>,
    pub links: Vec<ChainLink>,
    pub conditions: Option<ConditionReport>,
}

impl Chain {
    pub fn sigma_maxmod(&self) -> Vec<f64> {
        self.sets.iter().map(|s| s.r_out).collect()
    }

    /// Regions usable for pullback (demo chains only).
    pub fn regions(&self) -> Result<Vec<Arc<Region>>, OrbitError> {
        self.sets
            .iter()
            .map(|s| s.region.clone().map(Arc::new).ok_or_else(|| OrbitError::Schedule(format!("set {} has no region", s.index))))
            .collect()
    }
}

fn sigma_region(tract: &Arc<TractRegion>, r_in: f64, r_out: f64) -> Result<Region, OrbitError> {
    Ok(Region::annulus_tract(tract.clone(), r_in, r_out, false, 64, 256)?)
}

fn certify_link(f: &FunctionSpec, region: &Region, needed: LogAnnulus, cert: CertOptions) -> Result<LinkEvidence, OrbitError> {
    let c = image_annulus_certificate(f, region, needed, cert)?;
    Ok(LinkEvidence::Certificate { certificate: Box::new(c) })
}

/// Sets A(r_n, 2 r_n) ∩ D with f(Σ̄_n) ⊇ Σ̄_n ∪ Σ̄_(n+1) and r_(n+1) >= 2 r_n.
pub fn build_chain_theorem1(
    f: &FunctionSpec,
    tract: &Arc<TractRegion>,
    r0: f64,
    depth: usize,
    mode: ChainMode,
    cert: CertOptions,
) -> Result<Chain, OrbitError> {
    // M_D(r) >= 4r on a grid r0 2^(k/4)
    for k in 0..=4 * (depth + 1) {
        let r = r0 * 2f64.powf(k as f64 / 4.0);
        let m = log_md(f, tract, r)?;
        if !m.ge(&Magnitude::from_ln((4.0 * r).ln())) {
            return Err(OrbitError::PreconditionFails { r, detail: format!("log M_D(r) = {} < log 4r = {}", m.ln, (4.0 * r).ln()) });
        }
    }
    let floor = bcover_floor(2.0);
    if mode == ChainMode::Literal && !(r0.ln() > floor) {
        return Err(OrbitError::PreconditionFails { r: r0, detail: format!("log r0 = {} <= 16 pi^2 = {floor}", r0.ln()) });
    }
    let mut sets = Vec::new();
    let mut links = Vec::new();
    let mut r = r0;
    for n in 0..=depth {
        let region = match mode {
            ChainMode::Demo => Some(sigma_region(tract, r, 2.0 * r)?),
            ChainMode::Literal => None,
        };
        let last = n == depth;
        let mut accepted = None;
        let mut reasons = Vec::new();
        for attempt in 0..4 {
            let next = if last { r } else { 2.0 * r * 1.25f64.powi(attempt) };
            let needed = LogAnnulus::new(r.ln(), (2.0 * next).ln());
            let evidence = match (&region, mode) {
                (Some(reg), ChainMode::Demo) => certify_link(f, reg, needed, cert)?,
                _ => {
                    let md = log_md(f, tract, r)?;
                    let holds = floor <= needed.log_in && md.ge(&Magnitude::from_ln(needed.log_out));
                    LinkEvidence::Lemma { floor, log_md: md.ln, holds }
                }
            };
            let link = ChainLink { from: n, covers: if last { vec![n] } else { vec![n, n + 1] }, needed, evidence };
            if link.holds() {
                accepted = Some((next, link));
                break;
            }
            reasons.push(format!("r_next = {next}: not certified"));
            if last {
                break;
            }
        }
        let (next, link) = accepted.ok_or_else(|| OrbitError::ChainBroken { link: n, reason: reasons.join("; ") })?;
        sets.push(SigmaSet { index: n, r_in: r, r_out: 2.0 * r, region });
        links.push(link);
        r = next;
    }
    Ok(Chain { function: f.clone(), mode, construction: "theorem1".into(), sets, links, conditions: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Params {
    pub big_c: f64,
    pub c: f64,
    pub depth: usize,
    pub mode: ChainMode,
    /// Step C_j = 1 + (C-1)/2^j, c_j = sqrt(C_j) along the chain.
    pub shrink: bool,
    /// Largest index searched for the conditions.
    pub n_max: u64,
}

fn condition_row(
    f: &FunctionSpec,
    tract: &TractRegion,
    a: &SlowTarget,
    n: u64,
    big_c: f64,
    c: f64,
    k: f64,
    waive_first: bool,
) -> Result<ConditionRow, OrbitError> {
    let an = a.at(n);
    let floor = bcover_floor(c);
    let first = an.ln() > floor;
    let m1 = log_md(f, tract, big_c / c * an)?;
    let m0 = log_md(f, tract, an)?;
    let second_rhs = (big_c * an).ln();
    let third_rhs = (big_c * k).ln();
    let (second_lhs, third_lhs) = (m1.ln, m1.ln - m0.ln);
    let second = m1.ge(&Magnitude::from_ln(second_rhs)) && second_lhs != second_rhs;
    // ratio of two towers: only decidable when both logs are finite
    let third = if m1.ln.is_finite() && m0.ln.is_finite() { third_lhs > third_rhs } else { m1.ge(&m0) && !m0.ln.is_finite() };
    let pass = (first || waive_first) && second && third;
    Ok(ConditionRow { n, ln_a: an.ln(), floor, first, second_lhs, second_rhs, third_lhs, third_rhs, pass })
}

/// Sets Σ_n = A((C/c) a_max(n,N), C a_max(n,N)) ∩ D with the least N meeting
/// the three growth conditions on [N, N + depth].
pub fn build_chain_theorem2(
    f: &FunctionSpec,
    tract: &Arc<TractRegion>,
    a: &SlowTarget,
    p: Theorem2Params,
    cert: CertOptions,
) -> Result<Chain, OrbitError> {
    if !(p.big_c > 1.0 && p.c > 1.0 && p.c < p.big_c) {
        return Err(OrbitError::TargetInvalid(format!("need 1 < c < C, got c = {}, C = {}", p.c, p.big_c)));
    }
    let k = a.growth_cap.ok_or(OrbitError::MissingGrowthCap)?;
    let span = p.depth as u64 + 1;
    a.validate(p.n_max + span)?;
    a.validate_growth_cap(f, tract, p.n_max + span)?;
    let waive = p.mode == ChainMode::Demo;
    let levels_wanted = if p.shrink { 8 } else { 1 };
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    let mut start = 0u64;
    for j in 0..levels_wanted {
        let (bc, c) = if p.shrink {
            let cj = 1.0 + (p.big_c - 1.0) / 2f64.powi(j as i32);
            (cj, if j == 0 { p.c } else { cj.sqrt() })
        } else {
            (p.big_c, p.c)
        };
        let mut found = None;
        let mut n = start;
        'search: while n <= p.n_max {
            let end = if p.shrink && j > 0 { n } else { n + span - 1 };
            let mut batch = Vec::new();
            for m in n..=end {
                let row = condition_row(f, tract, a, m, bc, c, k, waive)?;
                let ok = row.pass;
                batch.push(row);
                if !ok {
                    n = m + 1;
                    continue 'search;
                }
            }
            rows.extend(batch);
            found = Some(n);
            break;
        }
        match found {
            Some(n0) => {
                levels.push(ShrinkLevel { j, big_c: bc, c, start: n0 });
                start = n0 + 1;
            }
            None if j == 0 => return Err(OrbitError::ConditionNeverMet { n_max: p.n_max as usize }),
            None => break,
        }
    }
    let big_n = levels[0].start;
    let level_for = |n: u64| -> &ShrinkLevel {
        levels.iter().rev().find(|l| l.start <= n.max(big_n)).expect("level 0 covers all n")
    };
    let mut sets = Vec::new();
    for n in 0..=p.depth as u64 {
        let lv = level_for(n);
        let b = a.at(n.max(big_n));
        let (r_in, r_out) = (lv.big_c / lv.c * b, lv.big_c * b);
        if p.mode == ChainMode::Demo {
            let probe = (r_in * r_out).sqrt();
            if max_modulus_on_tract(f, tract, probe).is_err() {
                return Err(OrbitError::AnnulusMissesTract { n: n as usize });
            }
        }
        let region = match p.mode {
            ChainMode::Demo => Some(sigma_region(tract, r_in, r_out)?),
            ChainMode::Literal => None,
        };
        sets.push(SigmaSet { index: n as usize, r_in, r_out, region });
    }
    let mut links = Vec::new();
    for n in 0..=p.depth {
        let next = level_for(n as u64 + 1);
        let b_next = a.at((n as u64 + 1).max(big_n));
        let needed = LogAnnulus::new(sets[n].r_in.ln(), (next.big_c * b_next).ln().max(sets[n].r_out.ln()));
        let evidence = match p.mode {
            ChainMode::Demo => certify_link(f, sets[n].region.as_ref().expect("demo region"), needed, cert)?,
            ChainMode::Literal => {
                let lv = level_for(n as u64);
                let floor = bcover_floor(lv.c);
                let md = log_md(f, tract, sets[n].r_in)?;
                let holds = floor <= needed.log_in && md.ge(&Magnitude::from_ln(needed.log_out));
                LinkEvidence::Lemma { floor, log_md: md.ln, holds }
            }
        };
        let covers = if n < p.depth { vec![n, n + 1] } else { vec![n] };
        let link = ChainLink { from: n, covers, needed, evidence };
        if !link.holds() {
            return Err(OrbitError::ChainBroken { link: n, reason: format!("annulus {needed:?} not covered") });
        }
        links.push(link);
    }
    Ok(Chain {
        function: f.clone(),
        mode: p.mode,
        construction: "theorem2".into(),
        sets,
        links,
        conditions: Some(ConditionReport { big_n, first_waived: waive, rows, levels }),
    })
}

/// Sets given directly as regions, each link certified on Ā(r_in(n), r_out(n+1)).
pub fn build_chain_regions(
    f: &FunctionSpec,
    regions: Vec<(f64, f64, Region)>,
    cert: CertOptions,
    construction: &str,
) -> Result<Chain, OrbitError> {
    let depth = regions.len().checked_sub(1).ok_or_else(|| OrbitError::Schedule("no regions".into()))?;
    let mut links = Vec::new();
    for n in 0..=depth {
        let hi = if n < depth { regions[n + 1].1 } else { regions[n].1 };
        let needed = LogAnnulus::new(regions[n].0.ln(), hi.ln().max(regions[n].1.ln()));
        let evidence = certify_link(f, &regions[n].2, needed, cert)?;
        let covers = if n < depth { vec![n, n + 1] } else { vec![n] };
        let link = ChainLink { from: n, covers, needed, evidence };
        if !link.holds() {
            return Err(OrbitError::ChainBroken { link: n, reason: format!("annulus {needed:?} not covered") });
        }
        links.push(link);
    }
    let sets = regions
        .into_iter()
        .enumerate()
        .map(|(i, (r_in, r_out, region))| SigmaSet { index: i, r_in, r_out, region: Some(region) })
        .collect();
    Ok(Chain { function: f.clone(), mode: ChainMode::Demo, construction: construction.into(), sets, links, conditions: None })
}

/// Block-repetition schedule; index 0 carries n_0 only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub target: String,
    pub n: Vec<u64>,
    pub m: Vec<u64>,
    pub p: Vec<u64>,
    pub q: Vec<u64>,
    pub big_q: Vec<u64>,
    pub big_n: Vec<u64>,
    pub sigma_maxmod: Vec<f64>,
    pub q_cap: u64,
    /// Least j from which n_(j-1) + Q_(j-1) >= N_j holds up to the last block.
    pub threshold_j: Option<usize>,
}

pub const DEFAULT_Q_CAP: u64 = 1_000_000;

/// Least N with a_N >= v, by doubling then bisection.
pub fn least_index_reaching(a: &SlowTarget, v: f64) -> Result<u64, OrbitError> {
    if a.at(0) >= v {
        return Ok(0);
    }
    let cap = 1u64 << 62;
    let mut hi = 1u64;
    while a.at(hi) < v {
        if hi >= cap {
            return Err(OrbitError::TargetNeverReaches { value: v, n_max: cap });
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if a.at(mid) >= v {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Diagonal schedule n_j = m_j = j for j = 0..=depth.
pub fn build_schedule(a: &SlowTarget, sigma_maxmod: &[f64], depth: usize) -> Result<BlockSchedule, OrbitError> {
    let idx: Vec<u64> = (0..=depth as u64).collect();
    build_schedule_general(a, sigma_maxmod, &idx, &idx, DEFAULT_Q_CAP)
}

pub fn build_schedule_general(
    a: &SlowTarget,
    sigma_maxmod: &[f64],
    n_seq: &[u64],
    m_seq: &[u64],
    q_cap: u64,
) -> Result<BlockSchedule, OrbitError> {
    let depth = n_seq.len().checked_sub(1).ok_or_else(|| OrbitError::Schedule("empty index sequence".into()))?;
    if m_seq.len() != n_seq.len() {
        return Err(OrbitError::Schedule("n and m differ in length".into()));
    }
    for j in 0..=depth {
        if m_seq[j] > n_seq[j] || (j > 0 && (n_seq[j] <= n_seq[j - 1] || m_seq[j] < m_seq[j - 1])) {
            return Err(OrbitError::Schedule(format!("need 0 <= m_j <= n_j with increasing sequences (j = {j})")));
        }
    }
    let top = n_seq[depth] as usize;
    if sigma_maxmod.len() <= top || sigma_maxmod[..=top].iter().any(|s| !s.is_finite()) {
        return Err(OrbitError::Schedule(format!("sigma_maxmod must be finite on [0, {top}]")));
    }
    let mut big_n = Vec::with_capacity(depth + 1);
    let mut running = f64::NEG_INFINITY;
    let mut upto = 0usize;
    for j in 0..=depth {
        while upto <= n_seq[j] as usize {
            running = running.max(sigma_maxmod[upto]);
            upto += 1;
        }
        big_n.push(least_index_reaching(a, running)?);
    }
    let mut s = BlockSchedule {
        target: a.a.source().to_string(),
        n: n_seq.to_vec(),
        m: m_seq.to_vec(),
        p: vec![0],
        q: vec![0],
        big_q: vec![0],
        big_n: big_n.clone(),
        sigma_maxmod: sigma_maxmod[..=top].to_vec(),
        q_cap,
        threshold_j: None,
    };
    for j in 1..=depth {
        let p = n_seq[j] - m_seq[j] + 1;
        let prev = s.big_q[j - 1];
        let q = if j < depth {
            let need = big_n[j + 1].saturating_sub(n_seq[j] + prev);
            need.div_ceil(p).max(1)
        } else {
            1
        };
        if q > q_cap {
            s.threshold_j = threshold(&s);
            return Err(OrbitError::UnboundedRepeat { j, required: q, cap: q_cap, partial: Box::new(s) });
        }
        s.p.push(p);
        s.q.push(q);
        s.big_q.push(prev + q * p);
    }
    s.threshold_j = threshold(&s);
    Ok(s)
}

fn threshold(s: &BlockSchedule) -> Option<usize> {
    let last = s.big_q.len() - 1;
    let mut t = None;
    for j in (1..=last).rev() {
        if s.n[j - 1] + s.big_q[j - 1] >= s.big_n[j] {
            t = Some(j);
        } else {
            break;
        }
    }
    t
}

impl BlockSchedule {
    pub fn blocks(&self) -> usize {
        self.big_q.len() - 1
    }

    /// Largest k covered by the index map.
    pub fn last_index(&self) -> u64 {
        let j = self.blocks();
        self.n[j] + self.big_q[j]
    }

    /// Σ index assigned to position k by the piecewise index map.
    pub fn set_index(&self, k: u64) -> Option<u64> {
        if k <= self.n[0] {
            return Some(k);
        }
        if k > self.last_index() {
            return None;
        }
        let jmax = self.blocks();
        if k == self.last_index() {
            return Some(self.n[jmax]);
        }
        // largest j >= 1 with n_(j-1) + Q_(j-1) <= k
        let (mut lo, mut hi) = (1usize, jmax);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.n[mid - 1] + self.big_q[mid - 1] <= k {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let j = lo;
        let base = self.n[j] + self.big_q[j - 1];
        if k <= base {
            Some(k - self.big_q[j - 1])
        } else {
            Some(self.m[j] + (k - (base + 1)) % self.p[j])
        }
    }

    pub fn expand(&self, k_max: u64) -> Result<Vec<u64>, OrbitError> {
        (0..=k_max)
            .map(|k| self.set_index(k).ok_or_else(|| OrbitError::Schedule(format!("k = {k} beyond schedule end {}", self.last_index()))))
            .collect()
    }

    /// First position of the hold-up range: n_(j*-1) + Q_(j*-1).
    pub fn n_start(&self) -> Option<u64> {
        self.threshold_j.map(|j| self.n[j - 1] + self.big_q[j - 1])
    }

    pub fn check_invariants(&self, a: &SlowTarget) -> ScheduleInvariants {
        let q_increasing = self.big_q.windows(2).all(|w| w[1] > w[0]);
        let p_positive = self.p.iter().skip(1).all(|&p| p >= 1);
        let mut maxmod_ok = true;
        for j in 0..self.n.len().min(self.big_n.len()) {
            let s = self.sigma_maxmod[..=self.n[j] as usize].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if s > a.at(self.big_n[j]) {
                maxmod_ok = false;
            }
        }
        let holdup: Vec<bool> = (1..=self.blocks()).map(|j| self.n[j - 1] + self.big_q[j - 1] >= self.big_n[j]).collect();
        ScheduleInvariants { q_increasing, p_positive, maxmod_ok, holdup, threshold_j: self.threshold_j }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInvariants {
    pub q_increasing: bool,
    pub p_positive: bool,
    pub maxmod_ok: bool,
    /// n_(j-1) + Q_(j-1) >= N_j for j = 1..
    pub holdup: Vec<bool>,
    pub threshold_j: Option<usize>,
}

/// Exact hexadecimal parts of a high-precision point plus an f64 view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactPoint {
    pub re: String,
    pub im: String,
    pub precision: u32,
    pub approx: [f64; 2],
}

impl ExactPoint {
    pub fn from_big(z: &BigComplex) -> Self {
        let (re, im) = z.to_exact_strings();
        let a = z.to_c64();
        Self { re, im, precision: z.prec(), approx: [a.re, a.im] }
    }

    pub fn to_big(&self) -> Option<BigComplex> {
        BigComplex::from_exact_strings(self.precision, &self.re, &self.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitStep {
    pub k: usize,
    pub set: u64,
    pub log_mod: f64,
    pub z: [f64; 2],
    pub inside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub k: usize,
    pub log_mod: f64,
    pub log_bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitWitness {
    #[serde(rename = "fn")]
    pub function: FunctionSpec,
    pub zeta: ExactPoint,
    pub depth: usize,
    pub orbit: Vec<OrbitStep>,
    pub bound_checks: Vec<BoundCheck>,
    pub n_start: usize,
    pub precision_used: u32,
    /// Flags recomputed at twice the precision agree.
    pub stable_at_double_precision: bool,
}

impl OrbitWitness {
    pub fn all_inside(&self) -> bool {
        self.orbit.iter().all(|s| s.inside)
    }

    pub fn all_bounds_pass(&self) -> bool {
        self.bound_checks.iter().all(|b| b.pass)
    }

    /// Attaches |f^k(ζ)| <= bound(k) checks for n_start <= k <= depth.
    pub fn attach_bounds(&mut self, n_start: usize, bound: impl Fn(usize) -> f64) {
        self.n_start = n_start;
        self.bound_checks = self
            .orbit
            .iter()
            .filter(|s| s.k >= n_start)
            .map(|s| {
                let lb = bound(s.k).ln();
                BoundCheck { k: s.k, log_mod: s.log_mod, log_bound: lb, pass: s.log_mod <= lb }
            })
            .collect();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackOptions {
    pub precision: u32,
    pub precision_cap: u32,
    pub newton_iters: usize,
    pub seeds: usize,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self { precision: 256, precision_cap: 4096, newton_iters: 200, seeds: 8 }
    }
}

/// A finite-depth orbit ζ, f(ζ), ... through the sets E_0..E_N.
#[derive(Clone, Debug)]
pub struct SetSequence {
    pub labels: Vec<u64>,
    pub sets: Vec<Arc<Region>>,
}

impl SetSequence {
    pub fn from_schedule(schedule: &BlockSchedule, regions: &[Arc<Region>], depth: usize) -> Result<Self, OrbitError> {
        let labels = schedule.expand(depth as u64)?;
        let sets = labels
            .iter()
            .map(|&l| regions.get(l as usize).cloned().ok_or_else(|| OrbitError::Schedule(format!("no region for Σ_{l}"))))
            .collect::<Result<_, _>>()?;
        Ok(Self { labels, sets })
    }
}

fn big_abs(z: &BigComplex) -> f64 {
    z.abs().to_f64()
}

fn newton_preimage(
    f: &FunctionSpec,
    target_log: &BigComplex,
    seed: Complex64,
    set: &Region,
    opts: &PullbackOptions,
    prec: u32,
) -> (Option<BigComplex>, f64) {
    let tol = 2f64.powi(-(prec as i32) + 24) * (1.0 + target_log.to_c64().norm());
    let (lo, hi) = set.boundary.bbox();
    let max_step = 0.5 * (hi - lo).norm().max(1e-300);
    let mut w = BigComplex::from_c64(prec, seed);
    let mut best = f64::INFINITY;
    for _ in 0..opts.newton_iters {
        let l = f.log_big(&w);
        let mut d = &l - target_log;
        d.im = wrap_pi_big(&d.im);
        let res = big_abs(&d);
        best = best.min(res);
        if !res.is_finite() {
            return (None, best);
        }
        if res <= tol {
            return (Some(w), res);
        }
        let q = f.logderiv_big(&w);
        let mut step = &d / &q;
        let s = big_abs(&step);
        if !s.is_finite() {
            return (None, best);
        }
        if s > max_step {
            step = step.scale(max_step / s);
        }
        w = &w - &step;
    }
    (None, best)
}

fn pullback_at(f: &FunctionSpec, seq: &SetSequence, opts: &PullbackOptions, prec: u32) -> Result<BigComplex, OrbitError> {
    let n = seq.sets.len() - 1;
    let start = seq.sets[n]
        .interior_seeds(1)
        .first()
        .copied()
        .ok_or_else(|| OrbitError::Schedule(format!("E_{n} has no interior point")))?;
    let mut t = BigComplex::from_c64(prec, start);
    for k in (0..n).rev() {
        let set = &seq.sets[k];
        let target_log = t.ln();
        let seeds = set.interior_seeds(opts.seeds + 1);
        let mut best_res = f64::INFINITY;
        let mut found: Option<BigComplex> = None;
        for (i, &s) in seeds.iter().enumerate() {
            let (w, res) = newton_preimage(f, &target_log, s, set, opts, prec);
            best_res = best_res.min(res);
            if let Some(w) = w {
                if set.contains(w.to_c64()) {
                    let better = found.as_ref().map(|b| big_abs(&w) < big_abs(b)).unwrap_or(true);
                    if better {
                        found = Some(w);
                    }
                    if i == 0 {
                        break;
                    }
                }
            }
        }
        t = found.ok_or(OrbitError::NewtonStall {
            link: k,
            target: {
                let c = t.to_c64();
                [c.re, c.im]
            },
            seeds_tried: seeds.len(),
            best_residual: best_res,
        })?;
    }
    Ok(t)
}

/// Forward orbit of ζ with membership flags.
pub fn forward_orbit(f: &FunctionSpec, zeta: &BigComplex, seq: &SetSequence, prec: u32) -> Result<Vec<OrbitStep>, OrbitError> {
    let mut z = zeta.with_prec(prec);
    let mut out = Vec::with_capacity(seq.sets.len());
    for k in 0..seq.sets.len() {
        let c = z.to_c64();
        let log_mod = ln_abs(&z);
        out.push(OrbitStep { k, set: seq.labels[k], log_mod, z: [c.re, c.im], inside: seq.sets[k].contains(c) });
        if k + 1 < seq.sets.len() {
            z = f.eval_big(&z, prec)?;
        }
    }
    Ok(out)
}

/// Backward pullback from a point of E_N, then forward verification; the
/// precision doubles until the forward orbit reproduces every membership.
pub fn pullback_orbit(f: &FunctionSpec, seq: &SetSequence, opts: PullbackOptions) -> Result<OrbitWitness, OrbitError> {
    if seq.sets.is_empty() {
        return Err(OrbitError::Schedule("empty set sequence".into()));
    }
    let mut prec = opts.precision;
    loop {
        let zeta = pullback_at(f, seq, &opts, prec)?;
        let orbit = forward_orbit(f, &zeta, seq, prec)?;
        if orbit.iter().all(|s| s.inside) {
            let check = forward_orbit(f, &zeta, seq, 2 * prec)?;
            let stable = check.iter().zip(&orbit).all(|(a, b)| a.inside == b.inside);
            return Ok(OrbitWitness {
                function: f.clone(),
                zeta: ExactPoint::from_big(&zeta),
                depth: seq.sets.len() - 1,
                orbit,
                bound_checks: Vec::new(),
                n_start: 0,
                precision_used: prec,
                stable_at_double_precision: stable,
            });
        }
        if prec * 2 > opts.precision_cap {
            return Err(OrbitError::PrecisionCap { bits: prec });
        }
        prec *= 2;
    }
}

/// Recomputes the forward orbit of a deserialized witness.
pub fn replay_witness(w: &OrbitWitness, seq: &SetSequence) -> Result<Vec<OrbitStep>, OrbitError> {
    let z = w.zeta.to_big().ok_or_else(|| OrbitError::Schedule("bad exact point".into()))?;
    forward_orbit(&w.function, &z, seq, w.precision_used)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub shift: usize,
    pub pass: bool,
    /// min over n of ln|f^(n+L)(ζ)| - ln M_D^n(rho); None when below f64 range.
    pub min_margin: Option<f64>,
    pub worst_n: Option<usize>,
    pub first_failure: Option<usize>,
    /// ln M_D^n(rho) - ln|f^(n+L)(ζ)| at the first failure; positive.
    pub deficit: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub rho: f64,
    pub depth: usize,
    pub l_max: usize,
    pub log_md_iterates: Vec<Magnitude>,
    pub shifts: Vec<ShiftCheck>,
    /// "slow" or "fast-consistent"
    pub verdict: String,
}

/// Tests |f^(n+L)(ζ)| >= M_D^n(rho) for 1 <= n <= depth - L, L <= depth/2.
pub fn classify_escape(f: &FunctionSpec, tract: &TractRegion, witness: &OrbitWitness, rho: f64) -> Result<Classification, OrbitError> {
    let depth = witness.orbit.len().saturating_sub(1);
    let l_max = depth / 2;
    let iter = match iterate_md(f, tract, rho, depth) {
        _ if depth == 0 => Vec::new(),
        Err(TractError::NotRepresentable { k }) if k > 1 => iterate_md(f, tract, rho, k - 1)?,
        r => r?,
    };
    let mut mags: Vec<Magnitude> = iter.iter().map(|m| m.log_md).collect();
    // towers past ln ln range dominate every representable orbit point
    mags.resize(depth, Magnitude { ln: f64::INFINITY, lnln: Some(f64::INFINITY) });
    let mut shifts = Vec::new();
    for l in 0..=l_max {
        let mut worst_val = f64::INFINITY;
        let mut worst = None;
        let mut pass = true;
        let mut first_failure = None;
        let mut deficit = None;
        for n in 1..=depth - l {
            let lm = witness.orbit[n + l].log_mod;
            let md = &mags[n - 1];
            if !Magnitude::from_ln(lm).ge(md) {
                pass = false;
                if first_failure.is_none() {
                    first_failure = Some(n);
                    deficit = md.ln.is_finite().then_some(md.ln - lm);
                }
            }
            let margin = if md.ln.is_finite() { lm - md.ln } else { f64::NEG_INFINITY };
            if margin < worst_val {
                worst_val = margin;
                worst = Some(n);
            }
        }
        let min_margin = worst.and_then(|_| worst_val.is_finite().then_some(worst_val));
        shifts.push(ShiftCheck { shift: l, pass, min_margin, worst_n: worst, first_failure, deficit });
    }
    let verdict = if shifts.iter().any(|s| s.pass) { "fast-consistent" } else { "slow" };
    Ok(Classification { rho, depth, l_max, log_md_iterates: mags, shifts, verdict: verdict.into() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlowOrbitReport {
    pub target: SlowTarget,
    pub chain: Chain,
    pub schedule: BlockSchedule,
    pub witness: OrbitWitness,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    Theorem1,
    Theorem2,
    Bgrhm,
}

/// Chain, schedule, pullback and bound checks |f^k(ζ)| <= a_k.
///
/// In `Theorem2` mode the chain is built for a_n / C, so that its sets lie
/// in moduli at most a_n.
pub fn slow_orbit_pipeline(
    f: &FunctionSpec,
    tract: &Arc<TractRegion>,
    target: &SlowTarget,
    mode: PipelineMode,
    depth: usize,
    cert: CertOptions,
    pull: PullbackOptions,
) -> Result<SlowOrbitReport, OrbitError> {
    let chain = match mode {
        PipelineMode::Theorem1 => build_chain_theorem1(f, tract, 8.0, depth, ChainMode::Demo, cert)?,
        PipelineMode::Theorem2 => {
            let big_c = 2.0;
            let b = target.scaled(big_c)?;
            let p = Theorem2Params { big_c, c: 1.9, depth, mode: ChainMode::Demo, shrink: false, n_max: 1000 };
            build_chain_theorem2(f, tract, &b, p, cert)?
        }
        PipelineMode::Bgrhm => {
            let regions = (0..=depth)
                .map(|n| {
                    let (a, b) = crate::catalog::expz2cos_radii(n);
                    crate::catalog::expz2cos_sigma(tract.clone(), n).map(|r| (a, b, r))
                })
                .collect::<Result<Vec<_>, _>>()?;
            build_chain_regions(f, regions, cert, "bgrhm")?
        }
    };
    let schedule = build_schedule(target, &chain.sigma_maxmod(), chain.sets.len() - 1)?;
    let regions = chain.regions()?;
    let k_max = (depth as u64).min(schedule.last_index());
    let seq = SetSequence::from_schedule(&schedule, &regions, k_max as usize)?;
    let mut witness = pullback_orbit(f, &seq, pull)?;
    let n_start = schedule.n_start().map(|s| s as usize).unwrap_or(witness.orbit.len());
    witness.attach_bounds(n_start, |k| target.at(k as u64));
    Ok(SlowOrbitReport { target: target.clone(), chain, schedule, witness })
}

/// Log-scale modulus helper for callers holding MPFR values.
pub fn ln_abs(z: &BigComplex) -> f64 {
    let a: Float = z.abs();
    a.ln().to_f64()
}
