//! Repeated quarterly post-grant games.
//!
//! Active players are the employees and the firm. Each quarter an employee
//! chooses how much of the vested, unexercised grant to exercise, how much to
//! hedge, and an effort level; the firm may cap exercise. Payoffs are the
//! stage-two game values evaluated on ledgers that absorb the realized
//! exercise value, dilution losses and the previous quarter's carry-over.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coalition::{CharacteristicFunction, Coalition};
use crate::equilibrium::{pure_nash, NormalFormGame, DEFAULT_CELL_CAP};
use crate::error::{ensure_finite, ensure_in, ensure_nonneg, Error, Result};
use crate::payoff::{
    stage2_employee_branches, stage2_value_company, CostLedger, EffortPair, HorizonSpec, ModifierSet, RoleModifiers,
    ValuationOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayerId {
    Employee(usize),
    Firm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmployeeSeat {
    pub ledger: CostLedger,
    pub effort: EffortPair,
    #[serde(default)]
    pub mods: RoleModifiers,
    pub strike: f64,
    /// Options granted, in units of shares.
    pub grant: f64,
    /// Shares already held at the start.
    #[serde(default)]
    pub shares_held: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmSeat {
    pub ledger: CostLedger,
    #[serde(default)]
    pub mods: ModifierSet,
    /// Required effort summed over the programme.
    #[serde(default)]
    pub e_r: f64,
    /// Largest fraction of available units an employee may exercise in a
    /// quarter when the firm restricts exercise. `1` leaves the firm without
    /// a move.
    #[serde(default = "one")]
    pub exercise_cap: f64,
}

fn one() -> f64 {
    1.0
}

/// Discretization of each employee's action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionGridSpec {
    /// Levels of the exercise fraction (and hedge fraction when enabled).
    pub res: usize,
    #[serde(default)]
    pub hedge: bool,
    /// Effort menu; defaults to the employee's own actual effort.
    #[serde(default)]
    pub effort_levels: Option<Vec<f64>>,
}

impl Default for ActionGridSpec {
    fn default() -> Self {
        ActionGridSpec {
            res: 2,
            hedge: false,
            effort_levels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Setup {
    pub employees: Vec<EmployeeSeat>,
    pub firm: FirmSeat,
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub valuation: ValuationOptions,
    /// `lam` reached at full hedging.
    #[serde(default = "lambda_max")]
    pub lambda_max: f64,
    /// Fraction of the grant vesting at the start of every quarter.
    pub vest_per_quarter: f64,
    #[serde(default)]
    pub grid: ActionGridSpec,
    #[serde(default = "cell_cap")]
    pub cell_cap: usize,
}

fn lambda_max() -> f64 {
    ModifierSet::LAMBDA_MAX
}

fn cell_cap() -> usize {
    DEFAULT_CELL_CAP
}

impl Stage2Setup {
    pub fn validate(&self) -> Result<()> {
        if self.employees.is_empty() {
            return Err(Error::Config("stage two needs at least one employee".into()));
        }
        for seat in &self.employees {
            seat.ledger.validate()?;
            seat.effort.validate()?;
            seat.mods.validate()?;
            ensure_nonneg("strike", seat.strike)?;
            ensure_nonneg("grant", seat.grant)?;
            ensure_nonneg("shares_held", seat.shares_held)?;
        }
        self.firm.ledger.validate()?;
        self.firm.mods.validate()?;
        ensure_nonneg("firm.e_r", self.firm.e_r)?;
        ensure_finite("exercise_cap", self.firm.exercise_cap)?;
        if !(self.firm.exercise_cap > 0.0 && self.firm.exercise_cap <= 1.0) {
            return Err(Error::Domain("exercise_cap must lie in (0, 1]".into()));
        }
        self.horizon.validate()?;
        ensure_in("lambda_max", self.lambda_max, 0.0, ModifierSet::LAMBDA_MAX)?;
        ensure_in("vest_per_quarter", self.vest_per_quarter, 0.0, 1.0)?;
        if self.grid.res < 2 {
            return Err(Error::Config("action grid res must be >= 2".into()));
        }
        if let Some(levels) = &self.grid.effort_levels {
            if levels.is_empty() {
                return Err(Error::Config("effort_levels must not be empty".into()));
            }
            for &e in levels {
                ensure_nonneg("effort level", e)?;
            }
        }
        Ok(())
    }

    fn levels(&self) -> Vec<f64> {
        let r = self.grid.res;
        (0..r).map(|k| k as f64 / (r - 1) as f64).collect()
    }

    /// The action menu of employee `i`, hold first.
    pub fn employee_menu(&self, i: usize) -> Vec<EmployeeAction> {
        let exercise = self.levels();
        let hedge = if self.grid.hedge { self.levels() } else { vec![0.0] };
        let effort = self
            .grid
            .effort_levels
            .clone()
            .unwrap_or_else(|| vec![self.employees[i].effort.e_a]);
        let mut menu = Vec::with_capacity(exercise.len() * hedge.len() * effort.len());
        for &x in &exercise {
            for &h in &hedge {
                for &e in &effort {
                    menu.push(EmployeeAction {
                        exercise_fraction: x,
                        hedge_fraction: h,
                        effort_level: e,
                    });
                }
            }
        }
        menu
    }

    /// Exercise caps the firm may impose, no restriction first.
    pub fn firm_menu(&self) -> Vec<f64> {
        if self.firm.exercise_cap < 1.0 {
            vec![1.0, self.firm.exercise_cap]
        } else {
            vec![1.0]
        }
    }

    pub fn hold_action(&self, i: usize) -> EmployeeAction {
        EmployeeAction {
            exercise_fraction: 0.0,
            hedge_fraction: 0.0,
            effort_level: self.employees[i].effort.e_a,
        }
    }

    fn lambda_for(&self, hedge: f64) -> f64 {
        1.0 + hedge * (self.lambda_max - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterState {
    pub quarter_index: usize,
    pub share_price: f64,
    pub shares_outstanding: f64,
    /// Per employee.
    pub granted: Vec<f64>,
    pub vested_fraction: Vec<f64>,
    pub outstanding_ebi: Vec<f64>,
    pub shares_held: Vec<f64>,
    /// Carried into next quarter's employee utility.
    pub carry_over: Vec<f64>,
    pub firm_carry_over: f64,
}

impl QuarterState {
    pub fn initial(setup: &Stage2Setup, share_price: f64, shares_outstanding: f64) -> Result<Self> {
        ensure_finite("share_price", share_price)?;
        ensure_finite("shares_outstanding", shares_outstanding)?;
        if share_price <= 0.0 || shares_outstanding <= 0.0 {
            return Err(Error::Domain("share price and shares outstanding must be > 0".into()));
        }
        let n = setup.employees.len();
        Ok(QuarterState {
            quarter_index: 0,
            share_price,
            shares_outstanding,
            granted: setup.employees.iter().map(|s| s.grant).collect(),
            vested_fraction: vec![0.0; n],
            outstanding_ebi: setup.employees.iter().map(|s| s.grant).collect(),
            shares_held: setup.employees.iter().map(|s| s.shares_held).collect(),
            carry_over: vec![0.0; n],
            firm_carry_over: 0.0,
        })
    }

    pub fn n_employees(&self) -> usize {
        self.granted.len()
    }

    /// Vested units not yet exercised.
    pub fn available(&self, i: usize) -> f64 {
        let exercised = self.granted[i] - self.outstanding_ebi[i];
        (self.vested_fraction[i] * self.granted[i] - exercised)
            .max(0.0)
            .min(self.outstanding_ebi[i])
    }

    pub fn vest(&mut self, fraction: f64) {
        for v in &mut self.vested_fraction {
            *v = (*v + fraction).min(1.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmployeeAction {
    /// Fraction of available units exercised.
    pub exercise_fraction: f64,
    /// Fraction hedged; sets `lam`.
    pub hedge_fraction: f64,
    /// Actual effort this quarter.
    pub effort_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub employees: Vec<EmployeeAction>,
    /// Exercise cap the firm imposes this quarter (`1` for none).
    pub exercise_cap: f64,
}

impl ActionProfile {
    pub fn validate(&self, state: &QuarterState) -> Result<()> {
        if self.employees.len() != state.n_employees() {
            return Err(Error::LengthMismatch {
                what: "employee actions",
                expected: state.n_employees(),
                found: self.employees.len(),
            });
        }
        for a in &self.employees {
            ensure_in("exercise_fraction", a.exercise_fraction, 0.0, 1.0)?;
            ensure_in("hedge_fraction", a.hedge_fraction, 0.0, 1.0)?;
            ensure_nonneg("effort_level", a.effort_level)?;
        }
        ensure_in("exercise_cap", self.exercise_cap, 0.0, 1.0)
    }
}

/// New shares issued per employee under `actions`.
pub fn issued_units(state: &QuarterState, actions: &ActionProfile) -> Vec<f64> {
    actions
        .employees
        .iter()
        .enumerate()
        .map(|(i, a)| a.exercise_fraction.min(actions.exercise_cap) * state.available(i))
        .collect()
}

/// Dilution loss of `player`: share of post-exercise equity issued to others
/// times the player's pre-exercise equity value. For the firm every exercise
/// counts and the equity is the whole pre-exercise capitalization.
pub fn dilution_loss(state: &QuarterState, actions: &ActionProfile, player: PlayerId) -> Result<f64> {
    if state.shares_outstanding <= 0.0 {
        return Err(Error::Domain("shares_outstanding must be > 0".into()));
    }
    let issued = issued_units(state, actions);
    let total: f64 = issued.iter().sum();
    let post = state.shares_outstanding + total;
    match player {
        PlayerId::Employee(p) => {
            if p >= state.n_employees() {
                return Err(Error::UnknownPlayer(p));
            }
            let by_others: f64 = issued.iter().enumerate().filter(|(j, _)| *j != p).map(|(_, u)| u).sum();
            Ok(by_others / post * state.shares_held[p] * state.share_price)
        }
        PlayerId::Firm => Ok(total / post * state.shares_outstanding * state.share_price),
    }
}

/// Game values of every employee (in order) followed by the firm's.
pub fn quarter_payoffs(state: &QuarterState, setup: &Stage2Setup, actions: &ActionProfile) -> Result<Vec<f64>> {
    actions.validate(state)?;
    let n = state.n_employees();
    if n != setup.employees.len() {
        return Err(Error::LengthMismatch {
            what: "state employees",
            expected: setup.employees.len(),
            found: n,
        });
    }
    let issued = issued_units(state, actions);
    let firm_dilution = dilution_loss(state, actions, PlayerId::Firm)?;
    let mut out = Vec::with_capacity(n + 1);
    for (i, (seat, action)) in setup.employees.iter().zip(&actions.employees).enumerate() {
        let mut ledger = seat.ledger;
        ledger.u_e += state.carry_over[i];
        ledger.v_e += issued[i] * (state.share_price - seat.strike).max(0.0);
        ledger.lam_e += dilution_loss(state, actions, PlayerId::Employee(i))?;
        ledger.lam_c += firm_dilution;
        let effort = EffortPair {
            e_a: action.effort_level,
            e_r: seat.effort.e_r,
        };
        let lam = setup.lambda_for(action.hedge_fraction);
        let firm_view = ModifierSet { lam, ..seat.mods.firm };
        let emp_view = ModifierSet { lam, ..seat.mods.employee };
        let value = stage2_employee_branches(&ledger, &effort, &firm_view, &emp_view, &setup.horizon, &setup.valuation)?
            .value();
        out.push(value);
    }
    let mut ledger = setup.firm.ledger;
    ledger.u_c += state.firm_carry_over;
    ledger.lam_c += firm_dilution;
    let effort = EffortPair {
        e_a: actions.employees.iter().map(|a| a.effort_level).sum(),
        e_r: setup.firm.e_r,
    };
    let mean_hedge = actions.employees.iter().map(|a| a.hedge_fraction).sum::<f64>() / n as f64;
    let mods = ModifierSet {
        lam: setup.lambda_for(mean_hedge),
        ..setup.firm.mods
    };
    out.push(stage2_value_company(&ledger, &effort, &mods)?);
    Ok(out)
}

/// A quarter's finite game together with the action menus behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterGame {
    pub game: NormalFormGame,
    pub players: Vec<PlayerId>,
    /// Per player: employee menus, or an empty list for the firm.
    pub employee_menus: Vec<Vec<EmployeeAction>>,
    pub firm_menu: Vec<f64>,
}

impl QuarterGame {
    /// Concrete actions for a joint action of the game. Employees outside the
    /// game hold.
    pub fn actions_for(&self, setup: &Stage2Setup, profile: &[usize]) -> ActionProfile {
        let mut employees: Vec<EmployeeAction> = (0..setup.employees.len()).map(|i| setup.hold_action(i)).collect();
        let mut exercise_cap = 1.0;
        for (k, (&pid, &a)) in self.players.iter().zip(profile).enumerate() {
            match pid {
                PlayerId::Employee(i) => employees[i] = self.employee_menus[k][a],
                PlayerId::Firm => exercise_cap = self.firm_menu[a],
            }
        }
        ActionProfile {
            employees,
            exercise_cap,
        }
    }
}

/// Payoff tensor of the quarter game among `players`.
pub fn build_quarter_game(state: &QuarterState, setup: &Stage2Setup, players: &[PlayerId]) -> Result<QuarterGame> {
    setup.validate()?;
    if players.len() < 2 {
        return Err(Error::Config("a quarter game needs at least 2 players".into()));
    }
    for (k, p) in players.iter().enumerate() {
        if let PlayerId::Employee(i) = p {
            if *i >= setup.employees.len() {
                return Err(Error::UnknownPlayer(*i));
            }
        }
        if players[..k].contains(p) {
            return Err(Error::Config(format!("player {p:?} listed twice")));
        }
    }
    let firm_menu = setup.firm_menu();
    let employee_menus: Vec<Vec<EmployeeAction>> = players
        .iter()
        .map(|p| match p {
            PlayerId::Employee(i) => setup.employee_menu(*i),
            PlayerId::Firm => Vec::new(),
        })
        .collect();
    let counts: Vec<usize> = players
        .iter()
        .zip(&employee_menus)
        .map(|(p, m)| match p {
            PlayerId::Employee(_) => m.len(),
            PlayerId::Firm => firm_menu.len(),
        })
        .collect();
    let cells = counts.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    if cells > setup.cell_cap {
        return Err(Error::Config(format!(
            "quarter game has {cells} cells, above the cap of {}",
            setup.cell_cap
        )));
    }
    let mut qg = QuarterGame {
        game: NormalFormGame::new(vec![1], vec![0.0])?,
        players: players.to_vec(),
        employee_menus,
        firm_menu,
    };
    let mut failure = None;
    let game = NormalFormGame::from_fn(counts, |profile| {
        let actions = qg.actions_for(setup, profile);
        match quarter_payoffs(state, setup, &actions) {
            Ok(all) => players
                .iter()
                .map(|p| match p {
                    PlayerId::Employee(i) => all[*i],
                    PlayerId::Firm => all[all.len() - 1],
                })
                .collect(),
            Err(e) => {
                failure.get_or_insert(e);
                vec![0.0; players.len()]
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    qg.game = game;
    Ok(qg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceKind {
    Deterministic,
    Lognormal,
}

/// Quarterly share-price law with a linear dilution impact factor
/// `1 + dilution_sensitivity * dilution_percent`. Dilution stays below 100%,
/// so a sensitivity above -0.01 keeps prices positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceModel {
    pub kind: PriceKind,
    pub drift: f64,
    #[serde(default)]
    pub vol: f64,
    #[serde(default)]
    pub dilution_sensitivity: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PriceModel {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("drift", self.drift)?;
        if self.drift <= -1.0 {
            return Err(Error::Domain("drift must be > -1".into()));
        }
        ensure_nonneg("vol", self.vol)?;
        ensure_finite("dilution_sensitivity", self.dilution_sensitivity)?;
        if !(-0.01 < self.dilution_sensitivity && self.dilution_sensitivity <= 0.0) {
            return Err(Error::Domain("dilution_sensitivity must lie in (-0.01, 0]".into()));
        }
        Ok(())
    }

    pub fn next_price(&self, price: f64, dilution_percent: f64, rng: &mut ChaCha8Rng) -> f64 {
        let impact = 1.0 + self.dilution_sensitivity * dilution_percent;
        match self.kind {
            PriceKind::Deterministic => price * (1.0 + self.drift) * impact,
            PriceKind::Lognormal => {
                let z: f64 = StandardNormal.sample(rng);
                price * (self.drift - 0.5 * self.vol * self.vol + self.vol * z).exp() * impact
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    /// Every player best-responds to the others' previous-quarter actions
    /// (hold before the first quarter).
    MyopicBestResponse,
    AlwaysHold,
    /// Exercise everything available once the price reaches `ratio * strike`.
    ThresholdExercise { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerQuarter {
    pub player: PlayerId,
    pub exercise_fraction: f64,
    pub hedge_fraction: f64,
    pub effort_level: f64,
    pub issued: f64,
    pub dilution_loss: f64,
    pub payoff: f64,
    pub vested_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterRecord {
    pub quarter: usize,
    pub share_price: f64,
    pub shares_outstanding_before: f64,
    pub shares_outstanding_after: f64,
    /// Number of pure equilibria of the quarter game.
    pub pure_nash_count: usize,
    /// Employees in setup order, then the firm.
    pub players: Vec<PlayerQuarter>,
    /// The post-vesting state the quarter game was built from.
    pub state: QuarterState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub quarters: Vec<QuarterRecord>,
    pub final_state: QuarterState,
}

pub fn all_players(setup: &Stage2Setup) -> Vec<PlayerId> {
    (0..setup.employees.len())
        .map(PlayerId::Employee)
        .chain(std::iter::once(PlayerId::Firm))
        .collect()
}

/// Runs `n_quarters` quarters. Randomness comes only from the price model,
/// one draw per quarter.
pub fn simulate_quarters(
    initial: &QuarterState,
    n_quarters: usize,
    setup: &Stage2Setup,
    price: &PriceModel,
    policy: Policy,
    coupling: f64,
    default_seed: u64,
) -> Result<Trajectory> {
    setup.validate()?;
    price.validate()?;
    if n_quarters < 1 {
        return Err(Error::Config("n_quarters must be >= 1".into()));
    }
    ensure_finite("coupling", coupling)?;
    if !(0.0..1.0).contains(&coupling) {
        return Err(Error::Domain(format!("coupling must lie in [0, 1), got {coupling}")));
    }
    if let Policy::ThresholdExercise { ratio } = policy {
        ensure_nonneg("threshold ratio", ratio)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(price.seed.unwrap_or(default_seed));
    let mut state = initial.clone();
    let players = all_players(setup);
    let n = setup.employees.len();
    // previous-quarter joint action, as menu indices (0 = hold / no cap)
    let mut previous = vec![0usize; players.len()];
    let mut quarters = Vec::with_capacity(n_quarters);

    for _ in 0..n_quarters {
        state.vest(setup.vest_per_quarter);
        let decision_state = state.clone();
        let qg = build_quarter_game(&state, setup, &players)?;
        let pure_nash_count = pure_nash(&qg.game)?.len();

        let actions = match policy {
            Policy::AlwaysHold => ActionProfile {
                employees: (0..n).map(|i| setup.hold_action(i)).collect(),
                exercise_cap: 1.0,
            },
            Policy::ThresholdExercise { ratio } => ActionProfile {
                employees: (0..n)
                    .map(|i| {
                        let seat = &setup.employees[i];
                        let go = state.share_price >= ratio * seat.strike;
                        EmployeeAction {
                            exercise_fraction: if go { 1.0 } else { 0.0 },
                            ..setup.hold_action(i)
                        }
                    })
                    .collect(),
                exercise_cap: 1.0,
            },
            Policy::MyopicBestResponse => {
                let chosen: Vec<usize> = (0..players.len()).map(|k| qg.game.best_response(k, &previous)).collect();
                previous = chosen.clone();
                qg.actions_for(setup, &chosen)
            }
        };

        let payoffs = quarter_payoffs(&state, setup, &actions)?;
        let issued = issued_units(&state, &actions);
        let mut records = Vec::with_capacity(n + 1);
        for (i, a) in actions.employees.iter().enumerate() {
            records.push(PlayerQuarter {
                player: PlayerId::Employee(i),
                exercise_fraction: a.exercise_fraction.min(actions.exercise_cap),
                hedge_fraction: a.hedge_fraction,
                effort_level: a.effort_level,
                issued: issued[i],
                dilution_loss: dilution_loss(&state, &actions, PlayerId::Employee(i))?,
                payoff: payoffs[i],
                vested_fraction: state.vested_fraction[i],
            });
        }
        records.push(PlayerQuarter {
            player: PlayerId::Firm,
            exercise_fraction: actions.exercise_cap,
            hedge_fraction: 0.0,
            effort_level: actions.employees.iter().map(|a| a.effort_level).sum(),
            issued: issued.iter().sum(),
            dilution_loss: dilution_loss(&state, &actions, PlayerId::Firm)?,
            payoff: payoffs[n],
            vested_fraction: 0.0,
        });

        let before = state.shares_outstanding;
        let total: f64 = issued.iter().sum();
        let after = before + total;
        for i in 0..n {
            state.shares_held[i] += issued[i];
            state.outstanding_ebi[i] -= issued[i];
            state.carry_over[i] = coupling * payoffs[i];
        }
        state.firm_carry_over = coupling * payoffs[n];
        let share_price = state.share_price;
        state.shares_outstanding = after;
        state.share_price = price.next_price(share_price, 100.0 * total / after, &mut rng);
        quarters.push(QuarterRecord {
            quarter: state.quarter_index,
            share_price,
            shares_outstanding_before: before,
            shares_outstanding_after: after,
            pure_nash_count,
            players: records,
            state: decision_state,
        });
        state.quarter_index += 1;
    }
    Ok(Trajectory {
        quarters,
        final_state: state,
    })
}

/// Total stage-two value of `coalition` when exactly its members exercise
/// everything available and all other employees hold.
pub fn exercise_coalition_value(state: &QuarterState, setup: &Stage2Setup, coalition: &[usize]) -> Result<f64> {
    let n = setup.employees.len();
    if let Some(&bad) = coalition.iter().find(|&&i| i >= n) {
        return Err(Error::UnknownPlayer(bad));
    }
    if coalition.is_empty() {
        return Ok(0.0);
    }
    let actions = ActionProfile {
        employees: (0..n)
            .map(|i| EmployeeAction {
                exercise_fraction: if coalition.contains(&i) { 1.0 } else { 0.0 },
                ..setup.hold_action(i)
            })
            .collect(),
        exercise_cap: 1.0,
    };
    let payoffs = quarter_payoffs(state, setup, &actions)?;
    Ok(coalition.iter().map(|&i| payoffs[i]).sum())
}

/// Characteristic function over the employees built from
/// [`exercise_coalition_value`].
pub fn exercise_characteristic_function(state: &QuarterState, setup: &Stage2Setup) -> Result<CharacteristicFunction> {
    let n = setup.employees.len();
    let mut values = vec![0.0; 1usize << n.min(31)];
    for (m, slot) in values.iter_mut().enumerate().skip(1) {
        let members: Vec<usize> = Coalition(m as u32).members().collect();
        *slot = exercise_coalition_value(state, setup, &members)?;
    }
    CharacteristicFunction::new(n, values)
}
