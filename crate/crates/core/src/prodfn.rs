//! Incentive-augmented production functions and numerical audits of the
//! classical production-theory assumptions A#1..A#8.
//!
//! Every check samples the domain box with a shifted Halton sequence. A
//! "holds" verdict means no counterexample was found among the samples, not a
//! proof. Thresholds are stated in [`AssumptionReport::criteria`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `A * prod x_i^a_i * (1 + beta * x_inc)`
    CobbDouglasIncentive,
    /// `A * (sum d_i x_i^rho)^(nu/rho) * (1 + beta * x_inc)`
    CesIncentive,
    /// Cobb-Douglas base whose incentive term switches on at the vesting
    /// threshold.
    PiecewiseVesting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub scale: f64,
    /// Exponents (Cobb-Douglas) or share weights (CES) of the non-incentive
    /// factors.
    pub weights: Vec<f64>,
    /// Incentive coefficient; may be negative.
    pub incentive: f64,
    /// CES substitution parameter.
    #[serde(default)]
    pub rho: Option<f64>,
    /// CES degree of homogeneity.
    #[serde(default = "one")]
    pub returns: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionSpec {
    pub family: Family,
    pub params: FamilyParams,
    /// Total factor count; the last factor is the incentive factor.
    pub n_factors: usize,
    pub domain_box: Vec<[f64; 2]>,
    #[serde(default)]
    pub vesting_threshold: Option<f64>,
}

const MAX_FACTORS: usize = 16;

impl ProductionSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.n_factors;
        if !(2..=MAX_FACTORS).contains(&m) {
            return Err(Error::Config(format!("n_factors must lie in 2..={MAX_FACTORS}, got {m}")));
        }
        if self.domain_box.len() != m {
            return Err(Error::LengthMismatch {
                what: "domain_box",
                expected: m,
                found: self.domain_box.len(),
            });
        }
        if self.params.weights.len() != m - 1 {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: m - 1,
                found: self.params.weights.len(),
            });
        }
        for (i, &[lo, hi]) in self.domain_box.iter().enumerate() {
            ensure_finite("domain_box lo", lo)?;
            ensure_finite("domain_box hi", hi)?;
            if hi <= lo {
                return Err(Error::Domain(format!("domain_box[{i}]: hi must exceed lo")));
            }
            if i < m - 1 && lo < 0.0 {
                return Err(Error::Domain(format!(
                    "domain_box[{i}]: only the incentive factor may go below 0"
                )));
            }
        }
        let p = &self.params;
        ensure_finite("scale", p.scale)?;
        if p.scale <= 0.0 {
            return Err(Error::Domain("scale must be > 0".into()));
        }
        ensure_finite("incentive", p.incentive)?;
        ensure_finite("returns", p.returns)?;
        for &w in &p.weights {
            ensure_finite("weight", w)?;
            if w < 0.0 {
                return Err(Error::Domain("weights must be >= 0".into()));
            }
        }
        match self.family {
            Family::CobbDouglasIncentive | Family::PiecewiseVesting => {
                if p.rho.is_some() {
                    return Err(Error::Config("rho only applies to ces-incentive".into()));
                }
            }
            Family::CesIncentive => {
                let rho = p.rho.ok_or_else(|| Error::Config("ces-incentive needs rho".into()))?;
                ensure_finite("rho", rho)?;
                if rho == 0.0 || rho > 1.0 {
                    return Err(Error::Domain("rho must be nonzero and <= 1".into()));
                }
                if p.returns <= 0.0 {
                    return Err(Error::Domain("returns must be > 0".into()));
                }
                if p.weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::Domain("ces weights must not all be 0".into()));
                }
            }
        }
        if let Some(t) = self.vesting_threshold {
            ensure_finite("vesting_threshold", t)?;
        } else if self.family == Family::PiecewiseVesting {
            return Err(Error::Config("piecewise-vesting needs vesting_threshold".into()));
        }
        Ok(())
    }

    pub fn incentive_index(&self) -> usize {
        self.n_factors - 1
    }

    /// Family formula without the box check. Used for finite differences
    /// that step just outside the box and for extrapolation.
    pub fn formula(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        let m = self.n_factors;
        let base = match self.family {
            Family::CobbDouglasIncentive | Family::PiecewiseVesting => {
                p.scale * x[..m - 1].iter().zip(&p.weights).map(|(xi, a)| xi.powf(*a)).product::<f64>()
            }
            Family::CesIncentive => {
                let rho = p.rho.unwrap_or(1.0);
                let inner: f64 = x[..m - 1].iter().zip(&p.weights).map(|(xi, d)| d * xi.powf(rho)).sum();
                p.scale * inner.powf(p.returns / rho)
            }
        };
        let x_inc = x[m - 1];
        let active = self.vesting_threshold.is_none_or(|t| x_inc >= t);
        let incentive = if active { p.incentive * x_inc } else { 0.0 };
        base * (1.0 + incentive)
    }

    /// Output at `x`, which must lie in the domain box.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_factors {
            return Err(Error::LengthMismatch {
                what: "factor vector",
                expected: self.n_factors,
                found: x.len(),
            });
        }
        for (i, (&xi, &[lo, hi])) in x.iter().zip(&self.domain_box).enumerate() {
            if !(lo..=hi).contains(&xi) {
                return Err(Error::Domain(format!("factor {i} = {xi} outside [{lo}, {hi}]")));
            }
        }
        Ok(self.formula(x))
    }

    pub fn scaled(&self, c: f64) -> ProductionSpec {
        let mut s = self.clone();
        s.params.scale *= c;
        s
    }
}

/// Central finite differences `(f_i, f_ii)` along factor `i`.
pub fn marginals_fd(spec: &ProductionSpec, x: &[f64], i: usize, h: f64) -> (f64, f64) {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[i] += h;
    down[i] -= h;
    let (fu, f0, fd) = (spec.formula(&up), spec.formula(x), spec.formula(&down));
    ((fu - fd) / (2.0 * h), (fu - 2.0 * f0 + fd) / (h * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

/// Marginal-productivity regime of the incentive factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Diminishing,
    /// `|f_ii| <= tol` on more than 90% of samples.
    Flat,
    /// `f_ii > tol` on more than 10% of samples.
    Increasing,
    Mixed,
}

/// Evidence for a violated verdict. Each variant can be re-checked with
/// [`recheck_witness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// A negative factor value whose clamping to 0 changes output.
    NegativeFactor {
        x: Vec<f64>,
        clamped: Vec<f64>,
        f_x: f64,
        f_clamped: f64,
    },
    Marginal {
        x: Vec<f64>,
        factor: usize,
        f_i: f64,
        f_ii: f64,
        step: f64,
    },
    BadValue { x: Vec<f64>, value: f64 },
    ZeroInput { value: f64 },
    /// `hi >= lo` componentwise but `f(hi) < f(lo)`.
    Decrease {
        hi: Vec<f64>,
        lo: Vec<f64>,
        f_hi: f64,
        f_lo: f64,
    },
    /// First and second differences growing as the step shrinks.
    Blowup {
        x: Vec<f64>,
        factor: usize,
        steps: Vec<f64>,
        first: Vec<f64>,
        second: Vec<f64>,
    },
    Midpoint {
        a: Vec<f64>,
        b: Vec<f64>,
        y: f64,
        f_mid: f64,
    },
    /// Output grows faster than linearly along the ray `t * x`.
    RayGrowth { x: Vec<f64>, t: Vec<f64>, values: Vec<f64> },
    /// No sampled point reaches the output level.
    EmptyLevel { y: f64, best: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub assumption: u8,
    pub name: String,
    pub verdict: Verdict,
    pub evidence: Vec<Witness>,
    pub measurements: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<CheckResult>,
    pub sample_count: usize,
    pub tolerance: f64,
    pub fd_step: f64,
    pub seed: u64,
    /// Violation criterion of each check, in check order.
    pub criteria: Vec<String>,
}

impl AssumptionReport {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.checks.iter().map(|c| c.verdict).collect()
    }

    pub fn verdict(&self, assumption: u8) -> Verdict {
        self.checks[assumption as usize - 1].verdict
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub n_samples: usize,
    pub tol: f64,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            n_samples: 400,
            tol: 1e-6,
            fd_step: 1e-4,
            seed: 7,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::Config("n_samples must be >= 100".into()));
        }
        ensure_finite("tol", self.tol)?;
        ensure_finite("fd_step", self.fd_step)?;
        if self.tol <= 0.0 || self.fd_step <= 0.0 {
            return Err(Error::Config("tol and fd_step must be > 0".into()));
        }
        Ok(())
    }
}

pub const CRITERIA: [&str; 8] = [
    "A1: a sampled point with a negative factor whose clamping to 0 changes f by more than tol relative",
    "A2: a central-difference f_i < -tol or f_ii > tol at an interior sample that persists at a tenth of the step",
    "A3: a sampled f that is non-finite or below -tol",
    "A4: |f(0)| > tol, with the formula extended to the zero vector",
    "A5: a sampled pair x >= x' with f(x) < f(x') - tol relative",
    "A6: first or second differences growing 50x as the step shrinks from 1e-2 to 1e-4 of the box width",
    "A7: a midpoint of two sampled members of V(y) with f below y - tol relative, y at the 25/50/75% quantiles",
    "A8: V(y) empty in the box for some tested y > 0, or output growing faster than linearly along a ray",
];

const NAMES: [&str; 8] = [
    "nonneg",
    "marginals",
    "finite-single",
    "zero-input",
    "monotone",
    "smooth",
    "vy-convex",
    "vy-closed",
];

const PRIMES: [u32; MAX_FACTORS] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// `n` points of the unit cube in `dim` dimensions: Halton with a seeded
/// random shift modulo 1.
pub fn shifted_halton(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..n)
        .map(|k| {
            (0..dim)
                .map(|d| (radical_inverse(k as u64 + 1, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

fn to_box(spec: &ProductionSpec, u: &[f64], margin: f64) -> Vec<f64> {
    u.iter()
        .zip(&spec.domain_box)
        .map(|(ui, &[lo, hi])| {
            let pad = margin * (hi - lo);
            lo + pad + ui * (hi - lo - 2.0 * pad)
        })
        .collect()
}

fn rel_gap(a: f64, b: f64) -> f64 {
    a.abs().max(b.abs())
}

struct Ctx<'a> {
    spec: &'a ProductionSpec,
    cfg: &'a AuditConfig,
    samples: Vec<Vec<f64>>,
    values: Vec<f64>,
}

fn result(assumption: u8, verdict: Verdict, evidence: Vec<Witness>) -> CheckResult {
    CheckResult {
        assumption,
        name: NAMES[assumption as usize - 1].to_string(),
        verdict,
        evidence,
        measurements: BTreeMap::new(),
        regime: None,
    }
}

fn verdict_from(evidence: &[Witness]) -> Verdict {
    if evidence.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated
    }
}

const MAX_WITNESSES: usize = 3;

/// Runs all eight checks.
pub fn audit(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<AssumptionReport> {
    spec.validate()?;
    cfg.validate()?;
    let ctx = context(spec, cfg);
    let checks = vec![
        a1(&ctx),
        a2(&ctx)?,
        a3(&ctx),
        a4(&ctx),
        a5(&ctx),
        a6(&ctx),
        a7(&ctx),
        a8(&ctx),
    ];
    Ok(AssumptionReport {
        checks,
        sample_count: cfg.n_samples,
        tolerance: cfg.tol,
        fd_step: cfg.fd_step,
        seed: cfg.seed,
        criteria: CRITERIA.iter().map(|s| s.to_string()).collect(),
    })
}

fn context<'a>(spec: &'a ProductionSpec, cfg: &'a AuditConfig) -> Ctx<'a> {
    let samples: Vec<Vec<f64>> = shifted_halton(cfg.n_samples, spec.n_factors, cfg.seed)
        .iter()
        .map(|u| to_box(spec, u, 0.0))
        .collect();
    let values = samples.iter().map(|x| spec.formula(x)).collect();
    Ctx {
        spec,
        cfg,
        samples,
        values,
    }
}

fn aux_rng(cfg: &AuditConfig, check: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(check);
    rng
}

pub fn check_a1_nonneg(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a1(&context(spec, cfg)))
}

fn a1(ctx: &Ctx) -> CheckResult {
    let mut evidence = Vec::new();
    let mut negative_points = 0usize;
    // the box corner that pushes every factor to its lower bound is always tried
    let corner: Vec<f64> = ctx.spec.domain_box.iter().map(|b| b[0]).collect();
    let candidates = std::iter::once(&corner).chain(ctx.samples.iter());
    for x in candidates {
        if x.iter().all(|&v| v >= 0.0) {
            continue;
        }
        negative_points += 1;
        let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let (f_x, f_clamped) = (ctx.spec.formula(x), ctx.spec.formula(&clamped));
        if (f_x - f_clamped).abs() > ctx.cfg.tol * rel_gap(f_x, f_clamped) && evidence.len() < MAX_WITNESSES {
            evidence.push(Witness::NegativeFactor {
                x: x.clone(),
                clamped,
                f_x,
                f_clamped,
            });
        }
    }
    let mut r = result(1, verdict_from(&evidence), evidence);
    r.measurements.insert("negative_points".into(), negative_points as f64);
    r
}

pub fn check_a2_marginals(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    a2(&context(spec, cfg))
}

fn a2(ctx: &Ctx) -> Result<CheckResult> {
    let (spec, cfg) = (ctx.spec, ctx.cfg);
    let h = cfg.fd_step;
    let mut margin = 0.0f64;
    for &[lo, hi] in &spec.domain_box {
        if hi - lo <= 4.0 * h {
            return Err(Error::Config("fd_step too large for the domain box".into()));
        }
        margin = margin.max(2.0 * h / (hi - lo));
    }
    let margin = margin.max(0.01);
    let m = spec.n_factors;
    let inc = spec.incentive_index();
    let mut evidence = Vec::new();
    let mut stats: Vec<[f64; 4]> = vec![[f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]; m];
    let (mut flat, mut rising, mut falling) = (0usize, 0usize, 0usize);
    let mut straddled = 0usize;
    let violates = |f_i: f64, f_ii: f64| !f_i.is_finite() || !f_ii.is_finite() || f_i < -cfg.tol || f_ii > cfg.tol;
    let points = shifted_halton(cfg.n_samples, m, cfg.seed ^ 0xa2);
    for u in &points {
        let x = to_box(spec, u, margin);
        for (i, st) in stats.iter_mut().enumerate() {
            let (f_i, f_ii) = marginals_fd(spec, &x, i, h);
            st[0] = st[0].min(f_i);
            st[1] = st[1].max(f_i);
            st[2] = st[2].min(f_ii);
            st[3] = st[3].max(f_ii);
            if i == inc {
                if f_ii.abs() <= cfg.tol {
                    flat += 1;
                } else if f_ii > cfg.tol {
                    rising += 1;
                } else {
                    falling += 1;
                }
            }
            if !violates(f_i, f_ii) {
                continue;
            }
            // a stencil straddling a jump is not a derivative; keep only
            // violations that persist at a tenth of the step
            let (g_i, g_ii) = marginals_fd(spec, &x, i, h / 10.0);
            if !violates(g_i, g_ii) {
                straddled += 1;
            } else if evidence.len() < MAX_WITNESSES {
                evidence.push(Witness::Marginal {
                    x: x.clone(),
                    factor: i,
                    f_i,
                    f_ii,
                    step: h,
                });
            }
        }
    }
    let n = points.len() as f64;
    let regime = if rising as f64 > 0.1 * n {
        Regime::Increasing
    } else if flat as f64 > 0.9 * n {
        Regime::Flat
    } else if falling as f64 > 0.9 * n {
        Regime::Diminishing
    } else {
        Regime::Mixed
    };
    let mut r = result(2, verdict_from(&evidence), evidence);
    for (i, st) in stats.iter().enumerate() {
        r.measurements.insert(format!("f{i}_min"), st[0]);
        r.measurements.insert(format!("f{i}_max"), st[1]);
        r.measurements.insert(format!("f{i}{i}_min"), st[2]);
        r.measurements.insert(format!("f{i}{i}_max"), st[3]);
    }
    r.measurements.insert("straddled_stencils".into(), straddled as f64);
    r.measurements.insert("incentive_flat_fraction".into(), flat as f64 / n);
    r.measurements.insert("incentive_rising_fraction".into(), rising as f64 / n);
    r.regime = Some(regime);
    Ok(r)
}

pub fn check_a3_finite_single(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a3(&context(spec, cfg)))
}

fn a3(ctx: &Ctx) -> CheckResult {
    let evidence: Vec<Witness> = ctx
        .samples
        .iter()
        .zip(&ctx.values)
        .filter(|(_, &v)| !v.is_finite() || v < -ctx.cfg.tol)
        .take(MAX_WITNESSES)
        .map(|(x, &value)| Witness::BadValue { x: x.clone(), value })
        .collect();
    let mut r = result(3, verdict_from(&evidence), evidence);
    let lowest = ctx.values.iter().copied().fold(f64::INFINITY, f64::min);
    r.measurements.insert("min_value".into(), lowest);
    r
}

pub fn check_a4_zero_input(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a4(&context(spec, cfg)))
}

fn a4(ctx: &Ctx) -> CheckResult {
    let zero = vec![0.0; ctx.spec.n_factors];
    let value = ctx.spec.formula(&zero);
    let in_box = ctx.spec.domain_box.iter().all(|&[lo, hi]| lo <= 0.0 && 0.0 <= hi);
    let mut r = if !value.is_finite() {
        result(4, Verdict::Inconclusive, Vec::new())
    } else if value.abs() > ctx.cfg.tol {
        result(4, Verdict::Violated, vec![Witness::ZeroInput { value }])
    } else {
        result(4, Verdict::Holds, Vec::new())
    };
    r.measurements.insert("f_zero".into(), value);
    r.measurements.insert("zero_in_box".into(), if in_box { 1.0 } else { 0.0 });
    // sign of f at the all-negative corner, when the box has one
    let corner: Vec<f64> = ctx.spec.domain_box.iter().map(|b| b[0]).collect();
    if corner.iter().all(|&c| c < 0.0) {
        r.measurements.insert("f_negative_corner".into(), ctx.spec.formula(&corner));
    }
    r
}

pub fn check_a5_monotone(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a5(&context(spec, cfg)))
}

fn decreases(f_hi: f64, f_lo: f64, tol: f64) -> bool {
    f_hi < f_lo - tol * rel_gap(f_hi, f_lo)
}

fn a5(ctx: &Ctx) -> CheckResult {
    let spec = ctx.spec;
    let mut rng = aux_rng(ctx.cfg, 5);
    let mut evidence = Vec::new();
    let mut pairs = 0usize;
    for (k, (x, &fx)) in ctx.samples.iter().zip(&ctx.values).enumerate() {
        // lower a single factor, then all factors at once
        let i = k % spec.n_factors;
        let mut single = x.clone();
        single[i] = spec.domain_box[i][0] + rng.random::<f64>() * (x[i] - spec.domain_box[i][0]);
        let all: Vec<f64> = x
            .iter()
            .zip(&spec.domain_box)
            .map(|(&xi, &[lo, _])| lo + rng.random::<f64>() * (xi - lo))
            .collect();
        for lower in [single, all] {
            pairs += 1;
            let f_lo = spec.formula(&lower);
            if decreases(fx, f_lo, ctx.cfg.tol) && evidence.len() < MAX_WITNESSES {
                evidence.push(Witness::Decrease {
                    hi: x.clone(),
                    lo: lower,
                    f_hi: fx,
                    f_lo,
                });
            }
        }
    }
    let mut r = result(5, verdict_from(&evidence), evidence);
    r.measurements.insert("pairs".into(), pairs as f64);
    r
}

pub fn check_a6_smooth(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a6(&context(spec, cfg)))
}

/// Relative steps used by the blow-up probe.
const BLOWUP_STEPS: [f64; 4] = [1e-2, 1e-3, 3e-4, 1e-4];
const BLOWUP_FACTOR: f64 = 50.0;

/// First and second difference magnitudes at each step, minus a roundoff
/// allowance.
fn differences(spec: &ProductionSpec, x: &[f64], i: usize, steps: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let f0 = spec.formula(x);
    let mut first = Vec::with_capacity(steps.len());
    let mut second = Vec::with_capacity(steps.len());
    for &h in steps {
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[i] += h;
        down[i] -= h;
        let (fu, fd) = (spec.formula(&up), spec.formula(&down));
        let noise = 64.0 * f64::EPSILON * (f0.abs() + fu.abs() + fd.abs());
        first.push(((fu - fd).abs() - noise).max(0.0) / (2.0 * h));
        second.push(((fu - 2.0 * f0 + fd).abs() - noise).max(0.0) / (h * h));
    }
    (first, second, f0)
}

fn blows_up(first: &[f64], second: &[f64], f0: f64, tol: f64) -> bool {
    let floor = tol * f0.abs().max(f64::MIN_POSITIVE);
    let grows = |d: &[f64]| d[2..].iter().any(|&v| v > BLOWUP_FACTOR * d[0].max(floor));
    grows(first) || grows(second)
}

fn blowup_witness(spec: &ProductionSpec, x: &[f64], i: usize, tol: f64) -> Option<Witness> {
    let width = spec.domain_box[i][1] - spec.domain_box[i][0];
    let steps: Vec<f64> = BLOWUP_STEPS.iter().map(|s| s * width).collect();
    let (first, second, f0) = differences(spec, x, i, &steps);
    blows_up(&first, &second, f0, tol).then(|| Witness::Blowup {
        x: x.to_vec(),
        factor: i,
        steps,
        first,
        second,
    })
}

/// Moves `x` along factor `i` onto the irregular point inside
/// `[x_i - r, x_i + r]` by bisection on second-difference magnitude, so a
/// witness sits on the jump or kink rather than merely near it.
fn localize(spec: &ProductionSpec, x: &[f64], i: usize, r: f64) -> Vec<f64> {
    let at = |t: f64| {
        let mut p = x.to_vec();
        p[i] = t;
        spec.formula(&p)
    };
    let irregularity = |a: f64, b: f64| (at(b) - 2.0 * at(0.5 * (a + b)) + at(a)).abs();
    let (mut lo, mut hi) = (x[i] - r, x[i] + r);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if irregularity(lo, mid) >= irregularity(mid, hi) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut p = x.to_vec();
    p[i] = hi;
    p
}

fn a6(ctx: &Ctx) -> CheckResult {
    let spec = ctx.spec;
    let tol = ctx.cfg.tol;
    let inc = spec.incentive_index();
    let mut evidence = Vec::new();
    let mut probes = 0usize;
    if let Some(t) = spec.vesting_threshold {
        let [lo, hi] = spec.domain_box[inc];
        if lo < t && t < hi {
            let mut x: Vec<f64> = spec.domain_box.iter().map(|&[l, h]| 0.5 * (l + h)).collect();
            x[inc] = t;
            probes += 1;
            evidence.extend(blowup_witness(spec, &x, inc, tol));
        }
    }
    let mut rng = aux_rng(ctx.cfg, 6);
    let slices = ctx.samples.len().min(200);
    let interior = shifted_halton(slices, spec.n_factors, ctx.cfg.seed ^ 0xa6);
    for u in &interior {
        let x = to_box(spec, u, 0.05);
        let i = rng.random_range(0..spec.n_factors);
        probes += 1;
        if evidence.len() < MAX_WITNESSES && blowup_witness(spec, &x, i, tol).is_some() {
            let width = spec.domain_box[i][1] - spec.domain_box[i][0];
            let located = localize(spec, &x, i, BLOWUP_STEPS[0] * width);
            evidence.extend(blowup_witness(spec, &located, i, tol));
        }
    }
    let mut r = result(6, verdict_from(&evidence), evidence);
    r.measurements.insert("probes".into(), probes as f64);
    r
}

pub fn check_a7_vy_convex(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a7(&context(spec, cfg)))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

fn sorted_finite(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn a7(ctx: &Ctx) -> CheckResult {
    let spec = ctx.spec;
    let sorted = sorted_finite(&ctx.values);
    let mut evidence = Vec::new();
    let mut tests = 0usize;
    if !sorted.is_empty() {
        for q in [0.25, 0.5, 0.75] {
            let y = quantile(&sorted, q);
            let members: Vec<&Vec<f64>> = ctx
                .samples
                .iter()
                .zip(&ctx.values)
                .filter(|(_, &v)| v >= y)
                .map(|(x, _)| x)
                .collect();
            let half = members.len() / 2;
            for k in 0..half {
                let (a, b) = (members[k], members[k + half]);
                let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
                let f_mid = spec.formula(&mid);
                tests += 1;
                if f_mid < y - ctx.cfg.tol * y.abs() && evidence.len() < MAX_WITNESSES {
                    evidence.push(Witness::Midpoint {
                        a: a.clone(),
                        b: b.clone(),
                        y,
                        f_mid,
                    });
                }
            }
        }
    }
    let verdict = if tests == 0 {
        Verdict::Inconclusive
    } else {
        verdict_from(&evidence)
    };
    let mut r = result(7, verdict, evidence);
    r.measurements.insert("midpoint_tests".into(), tests as f64);
    r
}

pub fn check_a8_vy_closed(spec: &ProductionSpec, cfg: &AuditConfig) -> Result<CheckResult> {
    spec.validate()?;
    cfg.validate()?;
    Ok(a8(&context(spec, cfg)))
}

const RAY: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Growth exponent of `f(t x)` between the last two ray points.
fn ray_exponent(values: &[f64]) -> f64 {
    let n = values.len();
    (values[n - 1] / values[n - 2]).log2()
}

fn a8(ctx: &Ctx) -> CheckResult {
    let spec = ctx.spec;
    let tol = ctx.cfg.tol;
    let sorted = sorted_finite(&ctx.values);
    let best = sorted.last().copied().unwrap_or(f64::NAN);
    let mut evidence = Vec::new();
    let mut r_measure = BTreeMap::new();
    if !(best > 0.0) {
        // every y > 0 has an empty V(y) inside the box
        evidence.push(Witness::EmptyLevel { y: tol, best });
    }
    // the upper corner of the box scaled outward
    let corner: Vec<f64> = spec.domain_box.iter().map(|b| b[1]).collect();
    let values: Vec<f64> = RAY
        .iter()
        .map(|t| spec.formula(&corner.iter().map(|c| c * t).collect::<Vec<_>>()))
        .collect();
    if values.iter().all(|v| v.is_finite() && *v > 0.0) {
        let exponent = ray_exponent(&values);
        r_measure.insert("ray_exponent".to_string(), exponent);
        let rising = values.windows(2).all(|w| w[1] > w[0]);
        if rising && exponent > 1.0 + tol {
            evidence.push(Witness::RayGrowth {
                x: corner,
                t: RAY.to_vec(),
                values,
            });
        }
    }
    let mut r = result(8, verdict_from(&evidence), evidence);
    r.measurements = r_measure;
    r.measurements.insert("max_value".into(), best);
    r
}

/// Re-checks a witness independently at ten times the precision: tolerance
/// divided by 10 and difference steps shrunk by 10.
pub fn recheck_witness(spec: &ProductionSpec, witness: &Witness, tol: f64) -> bool {
    let tol = tol / 10.0;
    match witness {
        Witness::NegativeFactor { x, .. } => {
            let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            let (a, b) = (spec.formula(x), spec.formula(&clamped));
            x.iter().any(|&v| v < 0.0) && (a - b).abs() > tol * rel_gap(a, b)
        }
        Witness::Marginal { x, factor, step, .. } => {
            let (f_i, f_ii) = marginals_fd(spec, x, *factor, step / 10.0);
            !f_i.is_finite() || !f_ii.is_finite() || f_i < -tol || f_ii > tol
        }
        Witness::BadValue { x, .. } => {
            let v = spec.formula(x);
            !v.is_finite() || v < -tol
        }
        Witness::ZeroInput { .. } => spec.formula(&vec![0.0; spec.n_factors]).abs() > tol,
        Witness::Decrease { hi, lo, .. } => {
            hi.iter().zip(lo).all(|(a, b)| a >= b) && decreases(spec.formula(hi), spec.formula(lo), tol)
        }
        Witness::Blowup { x, factor, steps, .. } => {
            let finer: Vec<f64> = steps.iter().map(|s| s / 10.0).collect();
            let (first, second, f0) = differences(spec, x, *factor, &finer);
            blows_up(&first, &second, f0, tol)
        }
        Witness::Midpoint { a, b, y, .. } => {
            let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
            spec.formula(a) >= *y && spec.formula(b) >= *y && spec.formula(&mid) < y - tol * y.abs()
        }
        Witness::RayGrowth { x, t, .. } => {
            let values: Vec<f64> = t
                .iter()
                .map(|s| spec.formula(&x.iter().map(|c| c * s).collect::<Vec<_>>()))
                .collect();
            values.len() >= 2 && ray_exponent(&values) > 1.0 + tol
        }
        Witness::EmptyLevel { y, .. } => {
            let cfg = AuditConfig {
                n_samples: 1000,
                ..AuditConfig::default()
            };
            let ctx = context(spec, &cfg);
            ctx.values.iter().all(|v| !(*v >= *y))
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn cfg() -> AuditConfig {
        AuditConfig::default()
    }

    #[test]
    fn unit_point() {
        let s = plain_cobb_douglas();
        assert_eq!(s.evaluate(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(s.evaluate(&[1.0, 1.0]).is_err());
        assert!(s.evaluate(&[1.0, 1.0, 5.0]).is_err());
    }

    #[test]
    fn negative_coefficient_lowers_output() {
        let s = demotivation();
        let baseline = s.evaluate(&[1.0, 1.0, 0.0]).unwrap();
        let with = s.evaluate(&[1.0, 1.0, 0.8]).unwrap();
        assert!(with < baseline);
        assert!((with - 0.6).abs() < 1e-15);
    }

    #[test]
    fn below_threshold_equals_zero_incentive() {
        let s = vesting_jump();
        let just_below = 1.0 - 1e-12;
        let a = s.evaluate(&[1.3, 0.7, just_below]).unwrap();
        let b = s.evaluate(&[1.3, 0.7, 0.0]).unwrap();
        assert_eq!(a, b);
        assert!(s.evaluate(&[1.3, 0.7, 1.0]).unwrap() > b);
    }

    #[test]
    fn ces_reduces_to_linear() {
        let s = ProductionSpec {
            family: Family::CesIncentive,
            params: FamilyParams {
                scale: 2.0,
                weights: vec![0.5, 0.5],
                incentive: 0.0,
                rho: Some(1.0),
                returns: 1.0,
            },
            ..plain_cobb_douglas()
        };
        assert!((s.evaluate(&[1.0, 2.0, 1.0]).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn plain_cobb_douglas_holds_everywhere() {
        let r = audit(&plain_cobb_douglas(), &cfg()).unwrap();
        assert_eq!(r.verdicts(), vec![Verdict::Holds; 8], "{r:#?}");
        assert_eq!(r.checks[1].regime, Some(Regime::Flat));
        assert_eq!(r.criteria.len(), 8);
    }

    #[test]
    fn demotivation_violates_a1_and_a5() {
        let s = demotivation();
        let r = audit(&s, &cfg()).unwrap();
        assert_eq!(r.verdict(1), Verdict::Violated);
        assert_eq!(r.verdict(5), Verdict::Violated);
        match &r.checks[0].evidence[0] {
            Witness::NegativeFactor { x, .. } => assert!(x[2] < 0.0),
            w => panic!("unexpected witness {w:?}"),
        }
        for c in &r.checks {
            for w in &c.evidence {
                assert!(recheck_witness(&s, w, r.tolerance), "{w:?}");
            }
        }
    }

    #[test]
    fn vesting_jump_violates_a6_at_threshold() {
        let s = vesting_jump();
        let r = audit(&s, &cfg()).unwrap();
        assert_eq!(r.verdict(6), Verdict::Violated);
        match &r.checks[5].evidence[0] {
            Witness::Blowup { x, factor, steps, .. } => {
                assert_eq!(*factor, 2);
                assert!(x[2] - steps[0] < 1.0 && 1.0 < x[2] + steps[0]);
            }
            w => panic!("unexpected witness {w:?}"),
        }
        assert!(recheck_witness(&s, &r.checks[5].evidence[0], r.tolerance));
    }

    #[test]
    fn kink_at_zero_threshold_is_caught() {
        let mut s = vesting_jump();
        s.domain_box[2] = [-1.0, 1.0];
        s.vesting_threshold = Some(0.0);
        assert_eq!(check_a6_smooth(&s, &cfg()).unwrap().verdict, Verdict::Violated);
    }

    #[test]
    fn identity_marginals() {
        let s = ProductionSpec {
            params: FamilyParams {
                weights: vec![1.0],
                ..plain_cobb_douglas().params
            },
            n_factors: 2,
            domain_box: vec![[0.5, 2.0], [0.0, 1.0]],
            ..plain_cobb_douglas()
        };
        let r = check_a2_marginals(&s, &cfg()).unwrap();
        let tol = 1e-6;
        assert!((r.measurements["f0_min"] - 1.0).abs() <= tol);
        assert!((r.measurements["f0_max"] - 1.0).abs() <= tol);
        assert!(r.measurements["f00_min"].abs() <= tol);
        assert!(r.measurements["f00_max"].abs() <= tol);
    }

    #[test]
    fn fd_matches_closed_form() {
        let s = plain_cobb_douglas();
        let h: f64 = 1e-4;
        let bound = (10.0 * h * h).max(1e-6);
        for u in shifted_halton(100, 3, 11) {
            let x = to_box(&s, &u, 0.05);
            for (i, a) in [0.3f64, 0.5].iter().enumerate() {
                let f = s.formula(&x);
                let exact_i = a * f / x[i];
                let exact_ii = a * (a - 1.0) * f / (x[i] * x[i]);
                let (f_i, f_ii) = marginals_fd(&s, &x, i, h);
                assert!((f_i - exact_i).abs() <= bound);
                assert!((f_ii - exact_ii).abs() <= bound);
            }
        }
    }

    #[test]
    fn increasing_returns_flagged() {
        let mut s = plain_cobb_douglas();
        s.params.incentive = 0.5;
        let r = audit(&s, &cfg()).unwrap();
        // degree 1.8 asymptotically; between t = 8 and 16 it is
        // 0.8 + log2(17 / 9) at the corner with x_inc = 2
        assert_eq!(r.verdict(8), Verdict::Violated);
        let expected = 0.8 + (17.0f64 / 9.0).log2();
        assert!((r.checks[7].measurements["ray_exponent"] - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_output_violates_a3() {
        let mut s = demotivation();
        s.params.incentive = 2.0;
        let r = check_a3_finite_single(&s, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let s = ProductionSpec {
            family: Family::CesIncentive,
            params: FamilyParams {
                scale: 1.0,
                weights: vec![1.0, 1.0],
                incentive: 0.0,
                rho: Some(0.5),
                returns: 1.0,
            },
            ..plain_cobb_douglas()
        };
        assert_eq!(check_a4_zero_input(&s, &cfg()).unwrap().verdict, Verdict::Holds);
        assert_eq!(check_a4_zero_input(&plain_cobb_douglas(), &cfg()).unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = vesting_jump();
        assert_eq!(audit(&s, &cfg()).unwrap(), audit(&s, &cfg()).unwrap());
    }

    #[test]
    fn config_guards() {
        let s = plain_cobb_douglas();
        assert!(audit(&s, &AuditConfig { n_samples: 10, ..cfg() }).is_err());
        assert!(audit(&s, &AuditConfig { tol: 0.0, ..cfg() }).is_err());
        let mut bad = s.clone();
        bad.domain_box[0] = [2.0, 1.0];
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.domain_box[0] = [-1.0, 1.0];
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.family = Family::PiecewiseVesting;
        assert!(bad.validate().is_err());
    }
}
