//! The grant negotiation between a negotiating employee and the shareholders,
//! who act only through bounded re-weighting of the strategy aggregate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_in, ensure_nonneg, Error, Result};
use crate::payoff::{
    spow, stage1_employee_branches, stage1_value_company, CostLedger, EffortPair, HorizonSpec, ModifierSet,
    RoleModifiers, ValuationOptions,
};

pub const N_COMPONENTS: usize = 10;

/// Indices of the strategy components with a dedicated role.
pub mod component {
    pub const STRIKE_ADJUSTMENT: usize = 0;
    pub const VESTING_SHORTENING: usize = 1;
    pub const ANTI_DILUTION: usize = 2;
    pub const REGISTRATION_RIGHTS: usize = 3;
    pub const TAX_MINIMIZATION: usize = 4;
    pub const REPORTING_AMENDMENT: usize = 5;
    pub const DETECTION_MINIMIZATION: usize = 6;
    pub const BENCHMARK_MINIMIZATION: usize = 7;
    pub const REQUIRED_EFFORT_CHANGE: usize = 8;
    pub const DISCLOSURE_CHANGE: usize = 9;
}

/// Intensities of the ten negotiation components, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyComponents(pub [f64; N_COMPONENTS]);

impl StrategyComponents {
    pub const ZERO: StrategyComponents = StrategyComponents([0.0; N_COMPONENTS]);

    pub fn new(a: [f64; N_COMPONENTS]) -> Result<Self> {
        for (i, &x) in a.iter().enumerate() {
            ensure_in(&format!("a[{i}]"), x, 0.0, 1.0)?;
        }
        Ok(StrategyComponents(a))
    }

    pub fn unit(i: usize) -> Self {
        let mut a = [0.0; N_COMPONENTS];
        a[i] = 1.0;
        StrategyComponents(a)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmployeeNegotiationParams {
    /// Share price.
    pub s: f64,
    /// Strike price.
    pub k: f64,
    /// Information value of undetectable collusion with other employees.
    pub i_oe: f64,
    /// Work effort contributed.
    pub c_a: f64,
    /// Employee penalty exposure.
    pub f_e: f64,
    /// Minimum performance benchmark.
    pub b: f64,
}

impl EmployeeNegotiationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("s", self.s),
            ("k", self.k),
            ("i_oe", self.i_oe),
            ("c_a", self.c_a),
            ("f_e", self.f_e),
            ("b", self.b),
        ] {
            ensure_nonneg(name, x)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareholderParams {
    /// Intervention strength.
    pub s_p: f64,
    pub mgmt_own: f64,
    pub inst_own: f64,
    /// Perceived governance efficiency.
    pub gov_score: f64,
    /// Moral-hazard loss.
    pub phi: f64,
    /// Company penalty exposure.
    pub f_c: f64,
    pub q_weights: Vec<f64>,
}

impl Default for ShareholderParams {
    fn default() -> Self {
        ShareholderParams {
            s_p: 1.0,
            mgmt_own: 0.0,
            inst_own: 0.0,
            gov_score: 1.0,
            phi: 0.0,
            f_c: 0.0,
            q_weights: vec![1.0; N_COMPONENTS],
        }
    }
}

impl ShareholderParams {
    pub fn validate(&self) -> Result<()> {
        ensure_in("s_p", self.s_p, 0.0, 1.0)?;
        ensure_in("mgmt_own", self.mgmt_own, 0.0, 1.0)?;
        ensure_in("inst_own", self.inst_own, 0.0, 1.0)?;
        ensure_in("gov_score", self.gov_score, 0.0, 1.0)?;
        if self.mgmt_own + self.inst_own > 1.0 {
            return Err(Error::Domain(format!(
                "mgmt_own + inst_own must be <= 1, got {}",
                self.mgmt_own + self.inst_own
            )));
        }
        ensure_nonneg("phi", self.phi)?;
        ensure_nonneg("f_c", self.f_c)?;
        check_weights(&self.q_weights)
    }

    /// Damping factor of the agency transformation, in `[0, 1]`.
    pub fn agency_factor(&self) -> f64 {
        let g = self.s_p * (1.0 - self.mgmt_own) * (0.5 + 0.5 * self.gov_score + 0.5 * self.inst_own);
        g.clamp(0.0, 1.0)
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.len() != N_COMPONENTS {
        return Err(Error::LengthMismatch {
            what: "q_weights",
            expected: N_COMPONENTS,
            found: w.len(),
        });
    }
    for (i, &x) in w.iter().enumerate() {
        ensure_finite(&format!("q_weights[{i}]"), x)?;
    }
    Ok(())
}

/// Additive aggregate of the strategy components.
pub fn q_value(strategy: &StrategyComponents, q_weights: &[f64]) -> Result<f64> {
    check_weights(q_weights)?;
    Ok(strategy.0.iter().zip(q_weights).map(|(a, w)| a * w).sum())
}

/// Gain branch minus cost branch. Detection minimization damps the penalty
/// exposure; benchmark minimization and required-effort change damp `B` and
/// `C_a`.
pub fn employee_payoff(
    strategy: &StrategyComponents,
    params: &EmployeeNegotiationParams,
    q_weights: &[f64],
) -> Result<f64> {
    use component::*;
    let a = &strategy.0;
    let gain = q_value(strategy, q_weights)? + params.s - params.k + params.i_oe;
    let cost = params.c_a * (1.0 - a[REQUIRED_EFFORT_CHANGE])
        + params.f_e * (1.0 - a[DETECTION_MINIMIZATION])
        + params.b * (1.0 - a[BENCHMARK_MINIMIZATION]);
    Ok(gain - cost)
}

/// The agency transformation: linear, sign-preserving, never amplifying.
pub fn c_transform(x: f64, sh: &ShareholderParams) -> f64 {
    sh.agency_factor() * x
}

pub fn shareholder_payoff(
    strategy: &StrategyComponents,
    sh: &ShareholderParams,
    emp: &EmployeeNegotiationParams,
    mods: &ModifierSet,
) -> Result<f64> {
    mods.validate()?;
    let e = mods.pi * mods.lam * mods.psi;
    let x = q_value(strategy, &sh.q_weights)? + sh.f_c + sh.phi;
    Ok(spow(c_transform(emp.b + emp.c_a, sh), e) - spow(c_transform(x, sh), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegotiationConfig {
    /// Grid points per component.
    pub grid_res: usize,
    pub max_rounds: usize,
    /// Per-component `[lo, hi]` limits on the employee's grid, set by the
    /// board and advisers. `None` means `[0, 1]` everywhere.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for NegotiationConfig {
    fn default() -> Self {
        NegotiationConfig {
            grid_res: 3,
            max_rounds: 20,
            bounds: None,
        }
    }
}

impl NegotiationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_res < 2 {
            return Err(Error::Config(format!("grid_res must be >= 2, got {}", self.grid_res)));
        }
        if self.max_rounds < 1 {
            return Err(Error::Config("max_rounds must be >= 1".into()));
        }
        if let Some(b) = &self.bounds {
            if b.len() != N_COMPONENTS {
                return Err(Error::LengthMismatch {
                    what: "bounds",
                    expected: N_COMPONENTS,
                    found: b.len(),
                });
            }
            for (i, &(lo, hi)) in b.iter().enumerate() {
                ensure_in(&format!("bounds[{i}].lo"), lo, 0.0, 1.0)?;
                ensure_in(&format!("bounds[{i}].hi"), hi, 0.0, 1.0)?;
                if lo > hi {
                    return Err(Error::Config(format!("bounds[{i}] has lo > hi")));
                }
            }
        }
        Ok(())
    }

    /// The grid levels of component `i`, ascending.
    pub fn levels(&self, i: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds.as_ref().map_or((0.0, 1.0), |b| b[i]);
        let r = self.grid_res;
        (0..r).map(|k| lo + (hi - lo) * k as f64 / (r - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractOutcome {
    pub employee_strategy: StrategyComponents,
    /// Q weights the shareholders settled on.
    pub q_weights: Vec<f64>,
    pub employee_payoff: f64,
    pub shareholder_payoff: f64,
    pub is_pure_nash: bool,
    pub rounds: usize,
    pub converged: bool,
}

/// Gains smaller than this (relative) are treated as ties.
const IMPROVEMENT_EPS: f64 = 1e-12;

fn improves(candidate: f64, current: f64) -> bool {
    candidate > current + IMPROVEMENT_EPS * current.abs().max(1.0)
}

/// Employee best response on the grid with lowest-index tie-breaking.
///
/// The payoff is a sum of per-component terms, so the maximizer over the
/// product grid is the per-component maximizer.
pub fn employee_best_response(
    cfg: &NegotiationConfig,
    emp: &EmployeeNegotiationParams,
    q_weights: &[f64],
) -> Result<StrategyComponents> {
    let mut a = [0.0; N_COMPONENTS];
    for (i, slot) in a.iter_mut().enumerate() {
        let mut best_level = f64::NAN;
        let mut best_val = f64::NEG_INFINITY;
        for level in cfg.levels(i) {
            let mut probe = StrategyComponents::ZERO;
            probe.0[i] = level;
            let v = employee_payoff(&probe, emp, q_weights)?;
            if best_level.is_nan() || improves(v, best_val) {
                best_val = v;
                best_level = level;
            }
        }
        *slot = best_level;
    }
    Ok(StrategyComponents(a))
}

/// Shareholder action `mask` flips the sign of every weight whose bit is set.
pub fn flipped_weights(base: &[f64], mask: u32) -> Vec<f64> {
    base.iter()
        .enumerate()
        .map(|(i, &w)| if mask & (1 << i) != 0 { -w } else { w })
        .collect()
}

pub const SHAREHOLDER_ACTIONS: u32 = 1 << N_COMPONENTS;

/// Lowest-mask shareholder best response against `strategy`.
pub fn shareholder_best_response(
    strategy: &StrategyComponents,
    sh: &ShareholderParams,
    emp: &EmployeeNegotiationParams,
    mods: &ModifierSet,
) -> Result<u32> {
    let mut best_mask = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut probe = sh.clone();
    for mask in 0..SHAREHOLDER_ACTIONS {
        probe.q_weights = flipped_weights(&sh.q_weights, mask);
        let v = shareholder_payoff(strategy, &probe, emp, mods)?;
        if mask == 0 || improves(v, best_val) {
            best_val = v;
            best_mask = mask;
        }
    }
    Ok(best_mask)
}

/// Whether any player gains by a unilateral deviation on the grid. The
/// employee side is scanned per component, which covers the whole product
/// grid because the payoff is additive across components.
pub fn has_profitable_deviation(
    cfg: &NegotiationConfig,
    strategy: &StrategyComponents,
    mask: u32,
    emp: &EmployeeNegotiationParams,
    sh: &ShareholderParams,
    mods: &ModifierSet,
) -> Result<bool> {
    let weights = flipped_weights(&sh.q_weights, mask);
    let br = employee_best_response(cfg, emp, &weights)?;
    if improves(
        employee_payoff(&br, emp, &weights)?,
        employee_payoff(strategy, emp, &weights)?,
    ) {
        return Ok(true);
    }
    let current_sh = ShareholderParams {
        q_weights: weights,
        ..sh.clone()
    };
    let current = shareholder_payoff(strategy, &current_sh, emp, mods)?;
    let mut probe = sh.clone();
    for m in 0..SHAREHOLDER_ACTIONS {
        probe.q_weights = flipped_weights(&sh.q_weights, m);
        if improves(shareholder_payoff(strategy, &probe, emp, mods)?, current) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Alternating best responses, employee first, starting from the lowest
/// grid corner and the unflipped weights.
pub fn negotiate(
    cfg: &NegotiationConfig,
    emp: &EmployeeNegotiationParams,
    sh: &ShareholderParams,
    mods: &ModifierSet,
) -> Result<ContractOutcome> {
    cfg.validate()?;
    emp.validate()?;
    sh.validate()?;
    mods.validate()?;

    let mut strategy = StrategyComponents(std::array::from_fn(|i| cfg.levels(i)[0]));
    let mut mask = 0u32;
    let mut converged = false;
    let mut rounds = 0;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let weights = flipped_weights(&sh.q_weights, mask);
        let next_strategy = employee_best_response(cfg, emp, &weights)?;
        let next_mask = shareholder_best_response(&next_strategy, sh, emp, mods)?;
        let unchanged = next_strategy == strategy && next_mask == mask;
        strategy = next_strategy;
        mask = next_mask;
        if unchanged {
            converged = true;
            break;
        }
    }

    let q_weights = flipped_weights(&sh.q_weights, mask);
    let settled = ShareholderParams {
        q_weights: q_weights.clone(),
        ..sh.clone()
    };
    Ok(ContractOutcome {
        employee_strategy: strategy,
        employee_payoff: employee_payoff(&strategy, emp, &q_weights)?,
        shareholder_payoff: shareholder_payoff(&strategy, &settled, emp, mods)?,
        is_pure_nash: !has_profitable_deviation(cfg, &strategy, mask, emp, sh, mods)?,
        q_weights,
        rounds,
        converged,
    })
}

/// Half-widths of the uniform per-employee perturbations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationScales {
    #[serde(default)]
    pub v_e: f64,
    #[serde(default)]
    pub u_e: f64,
    #[serde(default)]
    pub t_e: f64,
}

impl PerturbationScales {
    pub fn validate(&self) -> Result<()> {
        ensure_nonneg("v_e", self.v_e)?;
        ensure_nonneg("u_e", self.u_e)?;
        ensure_nonneg("t_e", self.t_e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_employees: usize,
    pub seed: u64,
    pub ledger: CostLedger,
    pub effort: EffortPair,
    pub mods: RoleModifiers,
    pub horizon: HorizonSpec,
    pub valuation: ValuationOptions,
    pub employee: EmployeeNegotiationParams,
    pub shareholders: ShareholderParams,
    pub negotiation: NegotiationConfig,
    pub perturbation: PerturbationScales,
    /// When set, each employee's collusion value `i_oe` grows by this rate
    /// times the previous employee's contract payoff (floored at 0).
    pub info_leak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub employee: usize,
    pub ledger: CostLedger,
    pub contract: ContractOutcome,
    pub g_company: f64,
    pub g_employee: f64,
}

/// Generator for employee `index`: stream `index` of the master seed, so
/// draws do not depend on evaluation order.
pub fn employee_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn perturb(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    rng.random_range(-scale..=scale)
}

/// Repeats the negotiation once per employee with a perturbed ledger.
pub fn run_cohort(cfg: &CohortConfig) -> Result<Vec<CohortMember>> {
    if cfg.n_employees < 1 {
        return Err(Error::Config("cohort needs at least one employee".into()));
    }
    cfg.ledger.validate()?;
    cfg.perturbation.validate()?;
    let g_company = stage1_value_company(&cfg.ledger, &cfg.effort, &cfg.mods.firm)?;
    let mut out = Vec::with_capacity(cfg.n_employees);
    let mut emp = cfg.employee;
    for i in 0..cfg.n_employees {
        let mut rng = employee_rng(cfg.seed, i);
        let mut ledger = cfg.ledger;
        ledger.v_e += perturb(&mut rng, cfg.perturbation.v_e);
        ledger.u_e += perturb(&mut rng, cfg.perturbation.u_e);
        ledger.t_e = (ledger.t_e + perturb(&mut rng, cfg.perturbation.t_e)).max(0.0);

        let contract = negotiate(&cfg.negotiation, &emp, &cfg.shareholders, &cfg.mods.firm)?;
        let g_employee = stage1_employee_branches(
            &ledger,
            &cfg.effort,
            &cfg.mods.firm,
            &cfg.mods.employee,
            &cfg.horizon,
            &cfg.valuation,
        )?
        .value();
        if let Some(rate) = cfg.info_leak {
            emp.i_oe = (cfg.employee.i_oe + rate * contract.employee_payoff).max(0.0);
        }
        out.push(CohortMember {
            employee: i,
            ledger,
            contract,
            g_company,
            g_employee,
        });
    }
    Ok(out)
}
