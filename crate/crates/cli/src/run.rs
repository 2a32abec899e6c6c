//! Runs the blocks of a scenario in a fixed order and collects the results.

use std::time::{Duration, Instant};

use ebigame_core::coalition::{
    core_is_empty_with, is_superadditive, shapley_value, shapley_value_exact, CharacteristicFunction, Coalition,
    CoreCertificate, CoreMode,
};
use ebigame_core::equilibrium::{
    best_response_dynamics, dominant_strategy_report, joint_improvability, pure_nash, support_enumeration_2p,
    Dynamics, JointImprovement,
};
use ebigame_core::exact::{fmt_rat, to_f64};
use ebigame_core::payoff::{company_objective_vector_with, stage1_value_company, CompanyObjectives};
use ebigame_core::prodfn::{audit, AssumptionReport, ProductionSpec};
use ebigame_core::stage_one::{run_cohort, CohortMember};
use ebigame_core::stage_two::{
    all_players, build_quarter_game, exercise_characteristic_function, simulate_quarters, QuarterState, Trajectory,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{CoalitionBlock, CoalitionSource, EquilibriumBlock, ProdfnBlock, Scenario, Stage1Block, Stage2Block};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
#[error("{block}: {source}")]
pub struct RunError {
    pub block: &'static str,
    #[source]
    pub source: ebigame_core::Error,
}

fn in_block(block: &'static str) -> impl Fn(ebigame_core::Error) -> RunError {
    move |source| RunError { block, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub scenario: Scenario,
    /// Not persisted, so that reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1: Option<Stage1Report>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<Stage2Report>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalition: Option<CoalitionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prodfn: Option<ProdfnReport>,
}

impl RunReport {
    /// Names of the blocks that produced results, in run order.
    pub fn blocks(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.stage1.is_some() {
            out.push("stage1");
        }
        if self.stage2.is_some() {
            out.push("stage2");
        }
        if self.coalition.is_some() {
            out.push("coalition");
        }
        if self.equilibrium.is_some() {
            out.push("equilibrium");
        }
        if self.prodfn.is_some() {
            out.push("prodfn");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    /// Unperturbed company value, shared by the whole cohort.
    pub g_company: f64,
    pub objectives: CompanyObjectives,
    pub members: Vec<CohortMember>,
    pub nash_fraction: f64,
    pub converged_fraction: f64,
    pub mean_employee_payoff: f64,
    pub mean_g_employee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterGameReport {
    pub quarter: usize,
    pub action_counts: Vec<usize>,
    /// Quarter-game payoff tensor, `payoffs[cell * n + player]`.
    pub payoffs: Vec<f64>,
    pub pure_nash: Vec<Vec<usize>>,
    pub pure_nash_exists: bool,
    pub dominant: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Report {
    pub trajectory: Trajectory,
    pub games: Vec<QuarterGameReport>,
    pub quarters_with_pure_nash: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    pub v_s: f64,
    pub v_t: f64,
    pub v_union: f64,
}

/// Exact values are rendered as `p/q` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertificateReport {
    Imputation {
        exact: Vec<String>,
        approx: Vec<f64>,
    },
    Balanced {
        coalitions: Vec<Vec<usize>>,
        weights: Vec<String>,
        weighted_value: String,
        grand_value: String,
    },
    NoPointFound {
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionReport {
    pub source: CoalitionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarter: Option<usize>,
    pub n: usize,
    pub values: Vec<f64>,
    pub superadditive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub core_empty: bool,
    pub core_mode: CoreMode,
    pub certificate: CertificateReport,
    pub certificate_verified: bool,
    pub shapley: Vec<f64>,
    pub shapley_exact: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedReport {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub row_exact: Vec<String>,
    pub col_exact: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashImprovement {
    pub profile: Vec<usize>,
    pub improvement: Option<JointImprovement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub name: String,
    pub action_counts: Vec<usize>,
    pub pure_nash: Vec<Vec<usize>>,
    pub dominant: Vec<Option<usize>>,
    /// Support enumeration, two-player games only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed: Option<Vec<MixedReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<bool>,
    pub dynamics: Dynamics,
    pub joint_improvements: Vec<NashImprovement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub games: Vec<GameReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedAudit {
    pub name: String,
    pub spec: ProductionSpec,
    pub report: AssumptionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProdfnReport {
    pub audits: Vec<NamedAudit>,
}

/// Applies `--seed-override`.
pub fn with_seed(scenario: &Scenario, seed: Option<u64>) -> Scenario {
    let mut s = scenario.clone();
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s
}

/// Runs stage1, stage2, coalition, equilibrium and prodfn, skipping absent
/// blocks. The scenario is assumed validated.
pub fn run(scenario: &Scenario) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let seed = scenario.seed;
    let stage1 = scenario.stage1.as_ref().map(|b| run_stage1(b, seed)).transpose()?;
    let stage2 = scenario.stage2.as_ref().map(|b| run_stage2(b, seed)).transpose()?;
    let coalition = scenario
        .coalition
        .as_ref()
        .map(|b| run_coalition(b, scenario.stage2.as_ref(), stage2.as_ref(), seed))
        .transpose()?;
    let equilibrium = scenario.equilibrium.as_ref().map(run_equilibrium).transpose()?;
    let prodfn = scenario.prodfn.as_ref().map(|b| run_prodfn(b, seed)).transpose()?;
    Ok(RunReport {
        version: VERSION.to_string(),
        scenario: scenario.clone(),
        wall_time: start.elapsed(),
        stage1,
        stage2,
        coalition,
        equilibrium,
        prodfn,
    })
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

pub fn run_stage1(b: &Stage1Block, seed: u64) -> Result<Stage1Report, RunError> {
    let err = in_block("stage1");
    let cfg = b.cohort_config(seed);
    let members = run_cohort(&cfg).map_err(&err)?;
    let g_company = stage1_value_company(&b.ledger, &b.effort, &b.mods.firm).map_err(&err)?;
    let objectives =
        company_objective_vector_with(&b.ledger, &b.effort, &b.mods.firm, &b.horizon, &b.valuation.profile)
            .map_err(&err)?;
    let n = members.len();
    let frac = |f: fn(&CohortMember) -> bool| members.iter().filter(|m| f(m)).count() as f64 / n as f64;
    Ok(Stage1Report {
        g_company,
        objectives,
        nash_fraction: frac(|m| m.contract.is_pure_nash),
        converged_fraction: frac(|m| m.contract.converged),
        mean_employee_payoff: mean(members.iter().map(|m| m.contract.employee_payoff), n),
        mean_g_employee: mean(members.iter().map(|m| m.g_employee), n),
        members,
    })
}

pub fn run_stage2(b: &Stage2Block, seed: u64) -> Result<Stage2Report, RunError> {
    let err = in_block("stage2");
    let initial = QuarterState::initial(&b.setup, b.share_price, b.shares_outstanding).map_err(&err)?;
    let trajectory =
        simulate_quarters(&initial, b.n_quarters, &b.setup, &b.price, b.policy, b.coupling, seed).map_err(&err)?;
    let players = all_players(&b.setup);
    let mut games = Vec::with_capacity(trajectory.quarters.len());
    for q in &trajectory.quarters {
        let qg = build_quarter_game(&q.state, &b.setup, &players).map_err(&err)?;
        let pure = pure_nash(&qg.game).map_err(&err)?;
        games.push(QuarterGameReport {
            quarter: q.quarter,
            action_counts: qg.game.action_counts().to_vec(),
            payoffs: qg.game.payoffs().to_vec(),
            pure_nash_exists: !pure.is_empty(),
            pure_nash: pure,
            dominant: dominant_strategy_report(&qg.game),
        });
    }
    Ok(Stage2Report {
        quarters_with_pure_nash: games.iter().filter(|g| g.pure_nash_exists).count(),
        trajectory,
        games,
    })
}

pub fn run_coalition(
    b: &CoalitionBlock,
    stage2_block: Option<&Stage2Block>,
    stage2: Option<&Stage2Report>,
    seed: u64,
) -> Result<CoalitionReport, RunError> {
    let err = in_block("coalition");
    let (cf, quarter) = match b.source {
        CoalitionSource::Explicit => {
            let n = b.n.unwrap_or(0);
            let values = b.values.clone().unwrap_or_default();
            (CharacteristicFunction::new(n, values).map_err(&err)?, None)
        }
        CoalitionSource::DeriveFromStage2 => {
            let (Some(block), Some(report)) = (stage2_block, stage2) else {
                return Err(err(ebigame_core::Error::Config("derive-from-stage2 needs a stage2 block".into())));
            };
            let record = report.trajectory.quarters.get(b.quarter).ok_or_else(|| {
                err(ebigame_core::Error::Config(format!("quarter {} was not simulated", b.quarter)))
            })?;
            let cf = exercise_characteristic_function(&record.state, &block.setup).map_err(&err)?;
            (cf, Some(b.quarter))
        }
    };
    coalition_report(&cf, b.source, quarter, b, seed)
}

fn coalition_report(
    cf: &CharacteristicFunction,
    source: CoalitionSource,
    quarter: Option<usize>,
    b: &CoalitionBlock,
    seed: u64,
) -> Result<CoalitionReport, RunError> {
    let err = in_block("coalition");
    let sa = is_superadditive(cf);
    let counterexample = sa.counterexample.map(|(s, t): (Coalition, Coalition)| Counterexample {
        s: s.members().collect(),
        t: t.members().collect(),
        v_s: cf.value(s),
        v_t: cf.value(t),
        v_union: cf.value(s.union(t)),
    });
    let verdict = core_is_empty_with(cf, &b.sampler(seed)).map_err(&err)?;
    let certificate = match &verdict.certificate {
        CoreCertificate::Imputation(x) => CertificateReport::Imputation {
            exact: x.iter().map(fmt_rat).collect(),
            approx: x.iter().map(to_f64).collect(),
        },
        CoreCertificate::Balanced {
            collection,
            weighted_value,
            grand_value,
        } => CertificateReport::Balanced {
            coalitions: collection.coalitions.iter().map(|c| c.members().collect()).collect(),
            weights: collection.weights.iter().map(fmt_rat).collect(),
            weighted_value: fmt_rat(weighted_value),
            grand_value: fmt_rat(grand_value),
        },
        CoreCertificate::NoPointFound { samples } => CertificateReport::NoPointFound { samples: *samples },
    };
    Ok(CoalitionReport {
        source,
        quarter,
        n: cf.n(),
        values: cf.values().to_vec(),
        superadditive: sa.superadditive,
        counterexample,
        core_empty: verdict.empty,
        core_mode: verdict.mode,
        certificate,
        certificate_verified: verdict.verify(cf),
        shapley: shapley_value(cf),
        shapley_exact: shapley_value_exact(cf).iter().map(fmt_rat).collect(),
    })
}

pub fn run_equilibrium(b: &EquilibriumBlock) -> Result<EquilibriumReport, RunError> {
    let err = in_block("equilibrium");
    let mut games = Vec::with_capacity(b.games.len());
    for spec in &b.games {
        let game = spec.game().map_err(&err)?;
        let pure = pure_nash(&game).map_err(&err)?;
        let (mixed, degenerate) = if game.n_players() == 2 {
            let se = support_enumeration_2p(&game).map_err(&err)?;
            let mixed = se
                .equilibria
                .iter()
                .map(|m| MixedReport {
                    row: m.row_f64(),
                    col: m.col_f64(),
                    row_exact: m.row.iter().map(fmt_rat).collect(),
                    col_exact: m.col.iter().map(fmt_rat).collect(),
                })
                .collect();
            (Some(mixed), Some(se.degenerate))
        } else {
            (None, None)
        };
        let dynamics = best_response_dynamics(&game, &spec.start_profile(), spec.max_iter).map_err(&err)?;
        let mut joint_improvements = Vec::with_capacity(pure.len());
        for p in &pure {
            joint_improvements.push(NashImprovement {
                profile: p.clone(),
                improvement: joint_improvability(&game, p, spec.joint_max_size).map_err(&err)?,
            });
        }
        games.push(GameReport {
            name: spec.name.clone(),
            action_counts: game.action_counts().to_vec(),
            dominant: dominant_strategy_report(&game),
            pure_nash: pure,
            mixed,
            degenerate,
            dynamics,
            joint_improvements,
        });
    }
    Ok(EquilibriumReport { games })
}

pub fn run_prodfn(b: &ProdfnBlock, seed: u64) -> Result<ProdfnReport, RunError> {
    let err = in_block("prodfn");
    let cfg = b.audit_config(seed);
    let mut audits = Vec::with_capacity(b.specs.len());
    for (name, spec) in &b.specs {
        audits.push(NamedAudit {
            name: name.clone(),
            spec: spec.clone(),
            report: audit(spec, &cfg).map_err(&err)?,
        });
    }
    Ok(ProdfnReport { audits })
}
