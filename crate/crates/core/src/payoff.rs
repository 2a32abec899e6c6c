//! Cost ledger, modifier exponents and the stage-one / stage-two game values.
//!
//! Every bracket of the game-value formulas is affine in the ledger fields.
//! Brackets are raised to modifier products with [`signed_pow`], so negative
//! brackets keep their sign under fractional exponents.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_in, ensure_nonneg, Error, Result};
use crate::quadrature::{trapezoid, trapezoid_2d};

/// `sgn(base) * |base|^exp`.
pub fn signed_pow(base: f64, exp: f64) -> Result<f64> {
    ensure_finite("base", base)?;
    ensure_nonneg("exponent", exp)?;
    Ok(spow(base, exp))
}

/// Unchecked [`signed_pow`] for already validated inputs.
#[inline]
pub(crate) fn spow(base: f64, exp: f64) -> f64 {
    if exp == 1.0 {
        return base;
    }
    if base == 0.0 {
        // sgn(0) = 0, for every exponent
        return 0.0;
    }
    base.signum() * base.abs().powf(exp)
}

/// Monetary quantities for one company-employee pair. Suffix `_c` is the
/// company side, `_e` the employee side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostLedger {
    /// Value of the grant.
    #[serde(default)]
    pub v_c: f64,
    #[serde(default)]
    pub v_e: f64,
    /// Transaction costs.
    #[serde(default)]
    pub t_c: f64,
    #[serde(default)]
    pub t_e: f64,
    /// Monitoring costs.
    #[serde(default)]
    pub m_c: f64,
    #[serde(default)]
    pub m_e: f64,
    /// Regulatory compliance costs.
    #[serde(default)]
    pub c_c: f64,
    #[serde(default)]
    pub c_e: f64,
    /// Present value of tax-related losses.
    #[serde(default)]
    pub l_c: f64,
    #[serde(default)]
    pub l_e: f64,
    /// Dilution losses.
    #[serde(default)]
    pub lam_c: f64,
    #[serde(default)]
    pub lam_e: f64,
    /// Utilities, in currency-equivalent units.
    #[serde(default)]
    pub u_c: f64,
    #[serde(default)]
    pub u_e: f64,
}

impl CostLedger {
    /// Field names paired with values, cost fields first.
    pub fn cost_fields(&self) -> [(&'static str, f64); 10] {
        [
            ("t_c", self.t_c),
            ("t_e", self.t_e),
            ("m_c", self.m_c),
            ("m_e", self.m_e),
            ("c_c", self.c_c),
            ("c_e", self.c_e),
            ("l_c", self.l_c),
            ("l_e", self.l_e),
            ("lam_c", self.lam_c),
            ("lam_e", self.lam_e),
        ]
    }

    pub fn value_fields(&self) -> [(&'static str, f64); 4] {
        [
            ("v_c", self.v_c),
            ("v_e", self.v_e),
            ("u_c", self.u_c),
            ("u_e", self.u_e),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in self.cost_fields() {
            ensure_nonneg(name, x)?;
        }
        for (name, x) in self.value_fields() {
            ensure_finite(name, x)?;
        }
        Ok(())
    }

    /// `self + k * other`, field by field.
    pub fn add_scaled(&self, other: &CostLedger, k: f64) -> CostLedger {
        CostLedger {
            v_c: self.v_c + k * other.v_c,
            v_e: self.v_e + k * other.v_e,
            t_c: self.t_c + k * other.t_c,
            t_e: self.t_e + k * other.t_e,
            m_c: self.m_c + k * other.m_c,
            m_e: self.m_e + k * other.m_e,
            c_c: self.c_c + k * other.c_c,
            c_e: self.c_e + k * other.c_e,
            l_c: self.l_c + k * other.l_c,
            l_e: self.l_e + k * other.l_e,
            lam_c: self.lam_c + k * other.lam_c,
            lam_e: self.lam_e + k * other.lam_e,
            u_c: self.u_c + k * other.u_c,
            u_e: self.u_e + k * other.u_e,
        }
    }
}

/// Scalar modifiers: labour substitution `pi`, effort deviation `psi`,
/// monetization/hedging `lam`, proportional share `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModifierSet {
    pub pi: f64,
    pub psi: f64,
    pub lam: f64,
    pub omega: f64,
}

impl Default for ModifierSet {
    fn default() -> Self {
        ModifierSet::UNIT
    }
}

impl ModifierSet {
    pub const UNIT: ModifierSet = ModifierSet {
        pi: 1.0,
        psi: 1.0,
        lam: 1.0,
        omega: 1.0,
    };

    pub const LAMBDA_MAX: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        ensure_nonneg("pi", self.pi)?;
        ensure_nonneg("psi", self.psi)?;
        ensure_in("lam", self.lam, 0.0, Self::LAMBDA_MAX)?;
        ensure_finite("omega", self.omega)?;
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::Domain(format!(
                "omega must lie in (0, 1], got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// The firm-view and employee-view variants of the modifiers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleModifiers {
    pub firm: ModifierSet,
    pub employee: ModifierSet,
}

impl RoleModifiers {
    pub fn validate(&self) -> Result<()> {
        self.firm.validate()?;
        self.employee.validate()
    }
}

/// Actual effort `e_a` and minimum required effort `e_r`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffortPair {
    pub e_a: f64,
    pub e_r: f64,
}

impl EffortPair {
    pub fn validate(&self) -> Result<()> {
        ensure_nonneg("e_a", self.e_a)?;
        ensure_nonneg("e_r", self.e_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    /// Upper limit of the company-side time integral.
    pub t_c_limit: f64,
    /// Upper limit of the employee-side time integral.
    pub t_e_limit: f64,
    /// Horizon of the stage-two double integrals.
    pub h_limit: f64,
    /// Trapezoid panels per axis.
    pub n_steps: usize,
    /// Number of employees in the programme.
    pub gamma: usize,
}

impl Default for HorizonSpec {
    fn default() -> Self {
        HorizonSpec {
            t_c_limit: 1.0,
            t_e_limit: 1.0,
            h_limit: 1.0,
            n_steps: 10,
            gamma: 1,
        }
    }
}

impl HorizonSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("t_c_limit", self.t_c_limit),
            ("t_e_limit", self.t_e_limit),
            ("h_limit", self.h_limit),
        ] {
            ensure_finite(name, x)?;
            if x <= 0.0 {
                return Err(Error::Domain(format!("{name} must be > 0, got {x}")));
            }
        }
        if self.n_steps < 2 {
            return Err(Error::Config(format!(
                "n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        if self.gamma < 1 {
            return Err(Error::Config("gamma must be >= 1".into()));
        }
        Ok(())
    }
}

/// How the ledger evolves inside the time integrals.
///
/// `Affine` evaluates `base + t * per_t + h * per_h`, where `t` runs along the
/// `T` axis and `h` along the horizon axis (zero in stage one).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    #[default]
    Constant,
    Affine {
        #[serde(default)]
        per_t: CostLedger,
        #[serde(default)]
        per_h: CostLedger,
    },
}

impl TimeProfile {
    pub fn ledger_at(&self, base: &CostLedger, h: f64, t: f64) -> CostLedger {
        match self {
            TimeProfile::Constant => *base,
            TimeProfile::Affine { per_t, per_h } => base.add_scaled(per_t, t).add_scaled(per_h, h),
        }
    }
}

/// Which modifier view supplies `pi` and `omega` in the firm-share branch of
/// the employee value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareView {
    #[default]
    Firm,
    Employee,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationOptions {
    #[serde(default)]
    pub profile: TimeProfile,
    #[serde(default)]
    pub share_view: ShareView,
}

// Brackets. All are affine in the ledger.

/// `U_c + E_r - V_c - C_c - Lam_c - M_c - L_c - T_c`
pub fn company_bracket_stage1(l: &CostLedger, effort: &EffortPair) -> f64 {
    l.u_c + effort.e_r - l.v_c - l.c_c - l.lam_c - l.m_c - l.l_c - l.t_c
}

/// As [`company_bracket_stage1`] with actual effort in place of required.
pub fn company_bracket_stage2(l: &CostLedger, effort: &EffortPair) -> f64 {
    l.u_c + effort.e_a - l.v_c - l.c_c - l.lam_c - l.m_c - l.l_c - l.t_c
}

/// The employee's proxy share of the firm's game:
/// `U_c + E_a + V_c - T_c - Lam_c - M_c - L_c - C_c`
pub fn firm_share_bracket(l: &CostLedger, effort: &EffortPair) -> f64 {
    l.u_c + effort.e_a + l.v_c - l.t_c - l.lam_c - l.m_c - l.l_c - l.c_c
}

/// `U_e + V_e - E_a - T_e - Lam_e - M_e - L_e - C_e`
pub fn employee_net_bracket(l: &CostLedger, effort: &EffortPair) -> f64 {
    l.u_e + l.v_e - effort.e_a - l.t_e - l.lam_e - l.m_e - l.l_e - l.c_e
}

/// `V_c + T_c + M_c + L_c + C_c`
pub fn company_cost_sum(l: &CostLedger) -> f64 {
    l.v_c + l.t_c + l.m_c + l.l_c + l.c_c
}

fn validate_inputs(ledger: &CostLedger, effort: &EffortPair, mods: &[&ModifierSet]) -> Result<()> {
    ledger.validate()?;
    effort.validate()?;
    for m in mods {
        m.validate()?;
    }
    Ok(())
}

/// Stage-one value of the game to the company.
pub fn stage1_value_company(ledger: &CostLedger, effort: &EffortPair, mods: &ModifierSet) -> Result<f64> {
    validate_inputs(ledger, effort, &[mods])?;
    Ok(spow(company_bracket_stage1(ledger, effort), mods.pi * mods.lam))
}

/// Stage-two (per quarter) value of the game to the company.
pub fn stage2_value_company(ledger: &CostLedger, effort: &EffortPair, mods: &ModifierSet) -> Result<f64> {
    validate_inputs(ledger, effort, &[mods])?;
    Ok(spow(
        company_bracket_stage2(ledger, effort),
        mods.pi * mods.psi * mods.lam,
    ))
}

/// The two integrals inside the employee's game value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmployeeBranches {
    /// Integral of the firm-share bracket.
    pub firm_share: f64,
    /// Integral of the employee-net bracket.
    pub employee_net: f64,
}

impl EmployeeBranches {
    /// `max(max(firm_share, 0), employee_net)`
    pub fn value(&self) -> f64 {
        self.firm_share.max(0.0).max(self.employee_net)
    }
}

fn share_mods<'a>(firm: &'a ModifierSet, emp: &'a ModifierSet, view: ShareView) -> &'a ModifierSet {
    match view {
        ShareView::Firm => firm,
        ShareView::Employee => emp,
    }
}

pub fn stage1_employee_branches(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods_firm: &ModifierSet,
    mods_emp: &ModifierSet,
    horizon: &HorizonSpec,
    opts: &ValuationOptions,
) -> Result<EmployeeBranches> {
    validate_inputs(ledger, effort, &[mods_firm, mods_emp])?;
    horizon.validate()?;
    let sm = share_mods(mods_firm, mods_emp, opts.share_view);
    let share_exp = sm.pi * sm.omega;
    let net_exp = mods_emp.pi * mods_emp.lam;
    let profile = &opts.profile;
    let firm_share = trapezoid(
        |t| spow(firm_share_bracket(&profile.ledger_at(ledger, 0.0, t), effort), share_exp),
        0.0,
        horizon.t_c_limit,
        horizon.n_steps,
    )?;
    let employee_net = trapezoid(
        |t| spow(employee_net_bracket(&profile.ledger_at(ledger, 0.0, t), effort), net_exp),
        0.0,
        horizon.t_e_limit,
        horizon.n_steps,
    )?;
    Ok(EmployeeBranches {
        firm_share,
        employee_net,
    })
}

/// Stage-one value of the game to the employee, with a constant ledger and
/// the firm view for the share branch.
pub fn stage1_value_employee(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods_firm: &ModifierSet,
    mods_emp: &ModifierSet,
    horizon: &HorizonSpec,
) -> Result<f64> {
    stage1_employee_branches(ledger, effort, mods_firm, mods_emp, horizon, &ValuationOptions::default())
        .map(|b| b.value())
}

pub fn stage2_employee_branches(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods_firm: &ModifierSet,
    mods_emp: &ModifierSet,
    horizon: &HorizonSpec,
    opts: &ValuationOptions,
) -> Result<EmployeeBranches> {
    validate_inputs(ledger, effort, &[mods_firm, mods_emp])?;
    horizon.validate()?;
    let sm = share_mods(mods_firm, mods_emp, opts.share_view);
    let share_exp = sm.pi * sm.psi * sm.lam * sm.omega;
    let net_exp = mods_emp.pi * mods_emp.psi * mods_emp.lam;
    let profile = &opts.profile;
    let firm_share = trapezoid_2d(
        |h, t| spow(firm_share_bracket(&profile.ledger_at(ledger, h, t), effort), share_exp),
        (0.0, horizon.h_limit),
        (0.0, horizon.t_c_limit),
        horizon.n_steps,
    )?;
    let employee_net = trapezoid_2d(
        |h, t| spow(employee_net_bracket(&profile.ledger_at(ledger, h, t), effort), net_exp),
        (0.0, horizon.h_limit),
        (0.0, horizon.t_e_limit),
        horizon.n_steps,
    )?;
    Ok(EmployeeBranches {
        firm_share,
        employee_net,
    })
}

/// Stage-two (per quarter) value of the game to the employee.
pub fn stage2_value_employee(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods_firm: &ModifierSet,
    mods_emp: &ModifierSet,
    horizon: &HorizonSpec,
) -> Result<f64> {
    stage2_employee_branches(ledger, effort, mods_firm, mods_emp, horizon, &ValuationOptions::default())
        .map(|b| b.value())
}

/// The company's three objectives, unscalarized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompanyObjectives {
    /// Minimize: integrated cost bracket.
    pub cost_integral: f64,
    /// Minimize: `E_r - E_a`.
    pub effort_gap: f64,
    /// Maximize: the company's net bracket.
    pub net_value: f64,
}

impl CompanyObjectives {
    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.cost_integral, self.effort_gap, self.net_value]
    }

    pub const SENSES: [Sense; 3] = [Sense::Min, Sense::Min, Sense::Max];
}

pub fn company_objective_vector(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods: &ModifierSet,
    horizon: &HorizonSpec,
) -> Result<CompanyObjectives> {
    company_objective_vector_with(ledger, effort, mods, horizon, &TimeProfile::Constant)
}

pub fn company_objective_vector_with(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods: &ModifierSet,
    horizon: &HorizonSpec,
    profile: &TimeProfile,
) -> Result<CompanyObjectives> {
    validate_inputs(ledger, effort, &[mods])?;
    horizon.validate()?;
    let cost_integral = trapezoid(
        |t| spow(company_cost_sum(&profile.ledger_at(ledger, 0.0, t)), mods.pi),
        0.0,
        horizon.t_c_limit,
        horizon.n_steps,
    )?;
    Ok(CompanyObjectives {
        cost_integral,
        effort_gap: effort.e_r - effort.e_a,
        net_value: company_bracket_stage1(ledger, effort),
    })
}

/// Stage-two objectives: the cost bracket carries exponent `pi * lam` and is
/// integrated over the horizon as well; the net bracket uses actual effort.
pub fn company_objective_vector_stage2(
    ledger: &CostLedger,
    effort: &EffortPair,
    mods: &ModifierSet,
    horizon: &HorizonSpec,
) -> Result<CompanyObjectives> {
    validate_inputs(ledger, effort, &[mods])?;
    horizon.validate()?;
    let base = company_cost_sum(ledger);
    let cost_integral = trapezoid_2d(
        |_, _| spow(base, mods.pi * mods.lam),
        (0.0, horizon.h_limit),
        (0.0, horizon.t_c_limit),
        horizon.n_steps,
    )?;
    Ok(CompanyObjectives {
        cost_integral,
        effort_gap: effort.e_r - effort.e_a,
        net_value: company_bracket_stage2(ledger, effort),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Min => -1.0,
            Sense::Max => 1.0,
        }
    }
}

/// Weighted sum where max-sense objectives are added and min-sense
/// objectives subtracted.
pub fn scalarize(objectives: &[f64], weights: &[f64], senses: &[Sense]) -> Result<f64> {
    if weights.len() != objectives.len() {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: objectives.len(),
            found: weights.len(),
        });
    }
    if senses.len() != objectives.len() {
        return Err(Error::LengthMismatch {
            what: "senses",
            expected: objectives.len(),
            found: senses.len(),
        });
    }
    let mut total = 0.0;
    for &w in weights {
        ensure_nonneg("weight", w)?;
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::Domain("weights must not all be zero".into()));
    }
    Ok(objectives
        .iter()
        .zip(weights)
        .zip(senses)
        .map(|((v, w), s)| w * s.sign() * v)
        .sum())
}

/// Indices of the points not dominated by any other point.
pub fn pareto_front(points: &[Vec<f64>], senses: &[Sense]) -> Result<Vec<usize>> {
    for p in points {
        if p.len() != senses.len() {
            return Err(Error::LengthMismatch {
                what: "objective vector",
                expected: senses.len(),
                found: p.len(),
            });
        }
    }
    // q dominates p if q is no worse everywhere and better somewhere
    let dominates = |q: &[f64], p: &[f64]| {
        let mut strictly = false;
        for ((qi, pi), s) in q.iter().zip(p).zip(senses) {
            let (qi, pi) = (s.sign() * qi, s.sign() * pi);
            if qi < pi {
                return false;
            }
            if qi > pi {
                strictly = true;
            }
        }
        strictly
    };
    Ok((0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect())
}
