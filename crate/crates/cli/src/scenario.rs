//! Scenario files: a TOML tree with one optional table per module.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ebigame_core::coalition::{CharacteristicFunction, SamplerConfig};
use ebigame_core::equilibrium::NormalFormGame;
use ebigame_core::payoff::{
    CostLedger, EffortPair, HorizonSpec, ModifierSet, RoleModifiers, ValuationOptions,
};
use ebigame_core::prodfn::{AuditConfig, ProductionSpec};
use ebigame_core::stage_one::{
    CohortConfig, EmployeeNegotiationParams, NegotiationConfig, PerturbationScales, ShareholderParams,
};
use ebigame_core::stage_two::{Policy, PriceModel, QuarterState, Stage2Setup};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest player count the core test accepts.
pub const MAX_COALITION_PLAYERS: usize = 6;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Used as the file-name stem of every output.
    pub name: String,
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1: Option<Stage1Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<Stage2Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalition: Option<CoalitionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prodfn: Option<ProdfnBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Block {
    /// Cohort size.
    pub n_employees: usize,
    #[serde(default)]
    pub ledger: CostLedger,
    #[serde(default)]
    pub effort: EffortPair,
    #[serde(default)]
    pub mods: RoleModifiers,
    #[serde(default)]
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub valuation: ValuationOptions,
    #[serde(default)]
    pub employee: EmployeeNegotiationParams,
    #[serde(default)]
    pub shareholders: ShareholderParams,
    #[serde(default)]
    pub negotiation: NegotiationConfig,
    #[serde(default)]
    pub perturbation: PerturbationScales,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_leak: Option<f64>,
}

impl Stage1Block {
    pub fn cohort_config(&self, seed: u64) -> CohortConfig {
        CohortConfig {
            n_employees: self.n_employees,
            seed,
            ledger: self.ledger,
            effort: self.effort,
            mods: self.mods,
            horizon: self.horizon,
            valuation: self.valuation,
            employee: self.employee,
            shareholders: self.shareholders.clone(),
            negotiation: self.negotiation.clone(),
            perturbation: self.perturbation,
            info_leak: self.info_leak,
        }
    }
}

fn myopic() -> Policy {
    Policy::MyopicBestResponse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Block {
    pub share_price: f64,
    pub shares_outstanding: f64,
    pub n_quarters: usize,
    #[serde(default)]
    pub coupling: f64,
    #[serde(default = "myopic")]
    pub policy: Policy,
    pub price: PriceModel,
    pub setup: Stage2Setup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoalitionSource {
    Explicit,
    DeriveFromStage2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionBlock {
    pub source: CoalitionSource,
    /// Player count of an explicit game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Explicit values indexed by coalition bitmask, `values[0] = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Which simulated quarter a derived game is taken from.
    #[serde(default)]
    pub quarter: usize,
    /// Sampler for 5 and 6 players. The seed defaults to the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler_seed: Option<u64>,
}

impl CoalitionBlock {
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            samples: self.sampler_samples.unwrap_or(SamplerConfig::default().samples),
            seed: self.sampler_seed.unwrap_or(seed),
        }
    }
}

fn max_iter() -> usize {
    100
}

fn joint_size() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumBlock {
    #[serde(default)]
    pub games: Vec<GameSpec>,
}

/// A finite game. `payoffs[cell * n + player]`, cells row-major with
/// player 0 most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub name: String,
    pub action_counts: Vec<usize>,
    pub payoffs: Vec<f64>,
    /// Start profile of best-response dynamics, all zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<usize>>,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    /// Largest coalition tried for joint improvements.
    #[serde(default = "joint_size")]
    pub joint_max_size: usize,
}

impl GameSpec {
    pub fn game(&self) -> ebigame_core::Result<NormalFormGame> {
        NormalFormGame::new(self.action_counts.clone(), self.payoffs.clone())
    }

    pub fn start_profile(&self) -> Vec<usize> {
        self.start.clone().unwrap_or_else(|| vec![0; self.action_counts.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProdfnBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    /// Defaults to the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Audited in key order.
    #[serde(default)]
    pub specs: BTreeMap<String, ProductionSpec>,
}

impl ProdfnBlock {
    pub fn audit_config(&self, seed: u64) -> AuditConfig {
        let d = AuditConfig::default();
        AuditConfig {
            n_samples: self.n_samples.unwrap_or(d.n_samples),
            tol: self.tol.unwrap_or(d.tol),
            fd_step: self.fd_step.unwrap_or(d.fd_step),
            seed: self.seed.unwrap_or(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), list(.0))]
    Invalid(Vec<FieldError>),
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text, &path.display().to_string())
}

/// Parses and validates scenario text. `origin` only labels errors.
pub fn parse_str(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let errors = scenario.validate();
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(errors))
    }
}

impl Scenario {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario types always serialize")
    }

    /// Every invariant violation, each with its field path.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut v = Validator::default();
        if self.schema_version != SCHEMA_VERSION {
            v.push(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
            || self.name.starts_with('.')
        {
            v.push("name", "must be non-empty and use only letters, digits, '-', '_' and '.'");
        }
        if i64::try_from(self.seed).is_err() {
            v.push("seed", "must fit in a signed 64-bit integer");
        }
        if let Some(b) = &self.stage1 {
            v.stage1("stage1", b);
        }
        if let Some(b) = &self.stage2 {
            v.stage2("stage2", b);
        }
        if let Some(b) = &self.coalition {
            v.coalition("coalition", b, self.stage2.as_ref());
        }
        if let Some(b) = &self.equilibrium {
            for (k, g) in b.games.iter().enumerate() {
                v.game(&format!("equilibrium.games[{k}]"), g);
            }
        }
        if let Some(b) = &self.prodfn {
            v.prodfn("prodfn", b, self.seed);
        }
        v.errors
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    /// Records the first error of a module-level check under `path`.
    fn check(&mut self, path: &str, r: ebigame_core::Result<()>) {
        if let Err(e) = r {
            self.push(path, e.to_string());
        }
    }

    fn ledger(&mut self, path: &str, l: &CostLedger) {
        for (name, x) in l.cost_fields() {
            if !(x.is_finite() && x >= 0.0) {
                self.push(&format!("{path}.{name}"), format!("cost must be finite and >= 0, got {x}"));
            }
        }
        for (name, x) in l.value_fields() {
            if !x.is_finite() {
                self.push(&format!("{path}.{name}"), format!("must be finite, got {x}"));
            }
        }
    }

    fn mods(&mut self, path: &str, m: &ModifierSet) {
        // one field at a time against unit values, so each error gets its own path
        let unit = ModifierSet::UNIT;
        let probes = [
            ("pi", ModifierSet { pi: m.pi, ..unit }),
            ("psi", ModifierSet { psi: m.psi, ..unit }),
            ("lam", ModifierSet { lam: m.lam, ..unit }),
            ("omega", ModifierSet { omega: m.omega, ..unit }),
        ];
        for (name, probe) in probes {
            self.check(&format!("{path}.{name}"), probe.validate());
        }
    }

    fn roles(&mut self, path: &str, r: &RoleModifiers) {
        self.mods(&format!("{path}.firm"), &r.firm);
        self.mods(&format!("{path}.employee"), &r.employee);
    }

    fn stage1(&mut self, path: &str, b: &Stage1Block) {
        if b.n_employees < 1 {
            self.push(&format!("{path}.n_employees"), "must be >= 1");
        }
        self.ledger(&format!("{path}.ledger"), &b.ledger);
        self.check(&format!("{path}.effort"), b.effort.validate());
        self.roles(&format!("{path}.mods"), &b.mods);
        self.check(&format!("{path}.horizon"), b.horizon.validate());
        self.check(&format!("{path}.employee"), b.employee.validate());
        self.check(&format!("{path}.shareholders"), b.shareholders.validate());
        self.check(&format!("{path}.negotiation"), b.negotiation.validate());
        self.check(&format!("{path}.perturbation"), b.perturbation.validate());
        if let Some(rate) = b.info_leak {
            if !(rate.is_finite() && rate >= 0.0) {
                self.push(&format!("{path}.info_leak"), format!("must be finite and >= 0, got {rate}"));
            }
        }
    }

    fn stage2(&mut self, path: &str, b: &Stage2Block) {
        let before = self.errors.len();
        if !(b.share_price.is_finite() && b.share_price > 0.0) {
            self.push(&format!("{path}.share_price"), format!("must be > 0, got {}", b.share_price));
        }
        if !(b.shares_outstanding.is_finite() && b.shares_outstanding > 0.0) {
            self.push(
                &format!("{path}.shares_outstanding"),
                format!("must be > 0, got {}", b.shares_outstanding),
            );
        }
        if b.n_quarters < 1 {
            self.push(&format!("{path}.n_quarters"), "must be >= 1");
        }
        if !(0.0..1.0).contains(&b.coupling) {
            self.push(&format!("{path}.coupling"), format!("must lie in [0, 1), got {}", b.coupling));
        }
        if let Policy::ThresholdExercise { ratio } = b.policy {
            if !(ratio.is_finite() && ratio >= 0.0) {
                self.push(&format!("{path}.policy.ratio"), format!("must be finite and >= 0, got {ratio}"));
            }
        }
        self.check(&format!("{path}.price"), b.price.validate());

        let s = &b.setup;
        let sp = format!("{path}.setup");
        if s.employees.is_empty() {
            self.push(&format!("{sp}.employees"), "needs at least one employee");
        }
        for (i, seat) in s.employees.iter().enumerate() {
            let ep = format!("{sp}.employees[{i}]");
            self.ledger(&format!("{ep}.ledger"), &seat.ledger);
            self.check(&format!("{ep}.effort"), seat.effort.validate());
            self.roles(&format!("{ep}.mods"), &seat.mods);
            for (name, x) in [("strike", seat.strike), ("grant", seat.grant), ("shares_held", seat.shares_held)] {
                if !(x.is_finite() && x >= 0.0) {
                    self.push(&format!("{ep}.{name}"), format!("must be finite and >= 0, got {x}"));
                }
            }
        }
        self.ledger(&format!("{sp}.firm.ledger"), &s.firm.ledger);
        self.mods(&format!("{sp}.firm.mods"), &s.firm.mods);
        if !(s.firm.e_r.is_finite() && s.firm.e_r >= 0.0) {
            self.push(&format!("{sp}.firm.e_r"), format!("must be finite and >= 0, got {}", s.firm.e_r));
        }
        if !(s.firm.exercise_cap > 0.0 && s.firm.exercise_cap <= 1.0) {
            self.push(
                &format!("{sp}.firm.exercise_cap"),
                format!("must lie in (0, 1], got {}", s.firm.exercise_cap),
            );
        }
        self.check(&format!("{sp}.horizon"), s.horizon.validate());
        if !(0.0..=ModifierSet::LAMBDA_MAX).contains(&s.lambda_max) {
            self.push(
                &format!("{sp}.lambda_max"),
                format!("must lie in [0, {}], got {}", ModifierSet::LAMBDA_MAX, s.lambda_max),
            );
        }
        if !(0.0..=1.0).contains(&s.vest_per_quarter) {
            self.push(
                &format!("{sp}.vest_per_quarter"),
                format!("must lie in [0, 1], got {}", s.vest_per_quarter),
            );
        }
        if s.grid.res < 2 {
            self.push(&format!("{sp}.grid.res"), "must be >= 2");
        }
        if let Some(levels) = &s.grid.effort_levels {
            if levels.is_empty() {
                self.push(&format!("{sp}.grid.effort_levels"), "must not be empty");
            }
            for (k, &e) in levels.iter().enumerate() {
                if !(e.is_finite() && e >= 0.0) {
                    self.push(&format!("{sp}.grid.effort_levels[{k}]"), format!("must be >= 0, got {e}"));
                }
            }
        }
        if self.errors.len() > before {
            return;
        }
        // backstop for anything the field checks above do not cover
        self.check(&sp, s.validate());
        let mut cells = s.firm_menu().len();
        for i in 0..s.employees.len() {
            cells = cells.saturating_mul(s.employee_menu(i).len());
        }
        if cells > s.cell_cap {
            self.push(
                &format!("{sp}.cell_cap"),
                format!("the quarter game has {cells} cells, above the cap {}", s.cell_cap),
            );
        }
        self.check(
            path,
            QuarterState::initial(s, b.share_price, b.shares_outstanding).map(|_| ()),
        );
    }

    fn coalition(&mut self, path: &str, b: &CoalitionBlock, stage2: Option<&Stage2Block>) {
        match b.source {
            CoalitionSource::Explicit => {
                match (b.n, &b.values) {
                    (Some(n), Some(values)) => {
                        if !(1..=MAX_COALITION_PLAYERS).contains(&n) {
                            self.push(&format!("{path}.n"), format!("must lie in 1..={MAX_COALITION_PLAYERS}"));
                        } else {
                            self.check(&format!("{path}.values"), CharacteristicFunction::new(n, values.clone()).map(|_| ()));
                        }
                    }
                    (n, values) => {
                        if n.is_none() {
                            self.push(&format!("{path}.n"), "required for an explicit game");
                        }
                        if values.is_none() {
                            self.push(&format!("{path}.values"), "required for an explicit game");
                        }
                    }
                }
                if b.quarter != 0 {
                    self.push(&format!("{path}.quarter"), "only applies to derive-from-stage2");
                }
            }
            CoalitionSource::DeriveFromStage2 => {
                if b.n.is_some() || b.values.is_some() {
                    self.push(path, "n and values only apply to an explicit game");
                }
                match stage2 {
                    None => self.push(&format!("{path}.source"), "derive-from-stage2 needs a stage2 block"),
                    Some(s2) => {
                        if b.quarter >= s2.n_quarters.max(1) {
                            self.push(
                                &format!("{path}.quarter"),
                                format!("must be below stage2.n_quarters = {}", s2.n_quarters),
                            );
                        }
                        let n = s2.setup.employees.len();
                        if n > MAX_COALITION_PLAYERS {
                            self.push(
                                &format!("{path}.source"),
                                format!("stage2 has {n} employees, the core test takes at most {MAX_COALITION_PLAYERS}"),
                            );
                        }
                    }
                }
            }
        }
        if b.sampler_samples == Some(0) {
            self.push(&format!("{path}.sampler_samples"), "must be >= 1");
        }
    }

    fn game(&mut self, path: &str, g: &GameSpec) {
        if g.name.is_empty() {
            self.push(&format!("{path}.name"), "must not be empty");
        }
        match g.game() {
            Err(e) => self.push(path, e.to_string()),
            Ok(game) => {
                if let Some(start) = &g.start {
                    if start.len() != g.action_counts.len()
                        || start.iter().zip(game.action_counts()).any(|(&a, &c)| a >= c)
                    {
                        self.push(&format!("{path}.start"), "must hold one valid action per player");
                    }
                }
            }
        }
        if g.max_iter < 1 {
            self.push(&format!("{path}.max_iter"), "must be >= 1");
        }
        if g.joint_max_size < 2 {
            self.push(&format!("{path}.joint_max_size"), "must be >= 2");
        }
    }

    fn prodfn(&mut self, path: &str, b: &ProdfnBlock, seed: u64) {
        self.check(path, b.audit_config(seed).validate());
        for (name, spec) in &b.specs {
            if name.is_empty() {
                self.push(&format!("{path}.specs"), "spec names must not be empty");
            }
            self.check(&format!("{path}.specs.{name}"), spec.validate());
        }
    }
}
