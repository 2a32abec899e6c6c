//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ebigame::emit::{emit, Format};
use ebigame::run::{run, with_seed, RunReport};
use ebigame::scenario::{parse_str, CoalitionSource, Scenario};
use ebigame::DEMO_SCENARIO;
use ebigame_core::coalition::{
    core_is_empty, sample_core_point, shapley_value_exact, CharacteristicFunction, Coalition, CoreCertificate,
    CoreMode, SamplerConfig,
};
use ebigame_core::equilibrium::{
    best_response_dynamics, dominant_strategy_report, joint_improvability, pure_nash, support_enumeration_2p,
    NormalFormGame,
};
use ebigame_core::exact::{rat, rat_int, ratio, Rational};
use ebigame_core::payoff::{
    stage1_employee_branches, stage1_value_company, stage2_employee_branches, stage2_value_company, CostLedger,
    EffortPair, HorizonSpec, ModifierSet, ValuationOptions,
};
use ebigame_core::prodfn::{
    audit, marginals_fd, recheck_witness, AuditConfig, Family, FamilyParams, ProductionSpec, Verdict,
};
use ebigame_core::quadrature::{trapezoid, trapezoid_2d};
use ebigame_core::stage_two::{quarter_payoffs, ActionProfile, EmployeeAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const PAYOFF_REL_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-9;
const FD_TOL_FLOOR: f64 = 1e-6;

type Outcome = Result<String, String>;

struct Criterion {
    id: u8,
    title: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            title: "payoff formulas match a straight-line oracle",
            budget: Duration::from_secs(1),
            check: payoff_formulas,
        },
        Criterion {
            id: 2,
            title: "quadrature matches closed forms",
            budget: Duration::from_secs(1),
            check: quadrature,
        },
        Criterion {
            id: 3,
            title: "core certification",
            budget: Duration::from_secs(10),
            check: core_certification,
        },
        Criterion {
            id: 4,
            title: "Shapley oracle",
            budget: Duration::from_secs(5),
            check: shapley,
        },
        Criterion {
            id: 5,
            title: "equilibrium engine",
            budget: Duration::from_secs(5),
            check: equilibrium,
        },
        Criterion {
            id: 6,
            title: "stage-two claims probe on the demo",
            budget: Duration::from_secs(10),
            check: stage_two_probe,
        },
        Criterion {
            id: 7,
            title: "production-function audit",
            budget: Duration::from_secs(10),
            check: production_audit,
        },
        Criterion {
            id: 8,
            title: "end-to-end determinism",
            budget: Duration::from_secs(30),
            check: determinism,
        },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if took <= c.budget {
                Ok(detail)
            } else {
                Err(format!("took {took:?}, budget {:?}", c.budget))
            }
        });
        let ms = took.as_secs_f64() * 1e3;
        match outcome {
            Ok(detail) => println!("PASS #{} {} [{ms:.0} ms] {detail}", c.id, c.title),
            Err(why) => {
                println!("FAIL #{} {} [{ms:.0} ms] {why}", c.id, c.title);
                failed.push(c.id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}

// 1

fn sp(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

fn random_ledger(rng: &mut ChaCha8Rng) -> CostLedger {
    let mut v = || rng.random_range(-100.0..100.0);
    let (v_c, v_e, u_c, u_e) = (v(), v(), v(), v());
    let mut c = || rng.random_range(0.0..50.0);
    CostLedger {
        v_c,
        v_e,
        u_c,
        u_e,
        t_c: c(),
        t_e: c(),
        m_c: c(),
        m_e: c(),
        c_c: c(),
        c_e: c(),
        l_c: c(),
        l_e: c(),
        lam_c: c(),
        lam_e: c(),
    }
}

fn random_mods(rng: &mut ChaCha8Rng) -> ModifierSet {
    ModifierSet {
        pi: rng.random_range(0.0..2.0),
        psi: rng.random_range(0.0..2.0),
        lam: rng.random_range(0.0..=2.0),
        omega: rng.random_range(0.01..=1.0),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PAYOFF_REL_TOL * b.abs().max(1.0)
}

fn payoff_formulas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let opts = ValuationOptions::default();
    for k in 0..200 {
        let l = random_ledger(&mut rng);
        let ef = EffortPair {
            e_a: rng.random_range(0.0..10.0),
            e_r: rng.random_range(0.0..10.0),
        };
        let (mf, me) = (random_mods(&mut rng), random_mods(&mut rng));
        let hz = HorizonSpec {
            t_c_limit: rng.random_range(0.5..5.0),
            t_e_limit: rng.random_range(0.5..5.0),
            h_limit: rng.random_range(0.5..5.0),
            n_steps: rng.random_range(2..50),
            gamma: 1,
        };
        let company1 = l.u_c + ef.e_r - l.v_c - l.c_c - l.lam_c - l.m_c - l.l_c - l.t_c;
        let company2 = l.u_c + ef.e_a - l.v_c - l.c_c - l.lam_c - l.m_c - l.l_c - l.t_c;
        let share = l.u_c + ef.e_a + l.v_c - l.t_c - l.lam_c - l.m_c - l.l_c - l.c_c;
        let net = l.u_e + l.v_e - ef.e_a - l.t_e - l.lam_e - l.m_e - l.l_e - l.c_e;

        let gc1 = sp(company1, mf.pi * mf.lam);
        let gc2 = sp(company2, mf.pi * mf.psi * mf.lam);
        let ge1 = (hz.t_c_limit * sp(share, mf.pi * mf.omega))
            .max(0.0)
            .max(hz.t_e_limit * sp(net, me.pi * me.lam));
        let ge2 = (hz.h_limit * hz.t_c_limit * sp(share, mf.pi * mf.psi * mf.lam * mf.omega))
            .max(0.0)
            .max(hz.h_limit * hz.t_e_limit * sp(net, me.pi * me.psi * me.lam));

        let got = [
            stage1_value_company(&l, &ef, &mf).map_err(|e| e.to_string())?,
            stage2_value_company(&l, &ef, &mf).map_err(|e| e.to_string())?,
            stage1_employee_branches(&l, &ef, &mf, &me, &hz, &opts).map_err(|e| e.to_string())?.value(),
            stage2_employee_branches(&l, &ef, &mf, &me, &hz, &opts).map_err(|e| e.to_string())?.value(),
        ];
        for (name, g, want) in [("G_c1", got[0], gc1), ("G_c2", got[1], gc2), ("G_e1", got[2], ge1), ("G_e2", got[3], ge2)] {
            ensure(close(g, want), || format!("fixture {k}: {name} = {g}, oracle {want}"))?;
        }

        let unit = ModifierSet::UNIT;
        let c1 = stage1_value_company(&l, &ef, &unit).map_err(|e| e.to_string())?;
        let c2 = stage2_value_company(&l, &ef, &unit).map_err(|e| e.to_string())?;
        ensure(c1 == company1 && c2 == company2, || {
            format!("fixture {k}: unit modifiers give {c1}, {c2}, brackets {company1}, {company2}")
        })?;
        let e1 = stage1_employee_branches(&l, &ef, &unit, &unit, &hz, &opts).map_err(|e| e.to_string())?;
        ensure(
            close(e1.firm_share, hz.t_c_limit * share) && close(e1.employee_net, hz.t_e_limit * net),
            || format!("fixture {k}: unit employee branches {e1:?}"),
        )?;
    }
    Ok(format!("200 fixtures within {PAYOFF_REL_TOL:e} relative"))
}

// 2

fn quadrature() -> Outcome {
    let (lo, hi) = (-0.5, 2.5);
    let (h0, h1) = (0.0, 1.5);
    let mut checks = 0;
    for n in [2, 10, 100] {
        for (a, b) in [(3.25, 0.0), (-1.5, 2.0), (0.0, -4.0)] {
            let got = trapezoid(|t| a + b * t, lo, hi, n).map_err(|e| e.to_string())?;
            let want = a * (hi - lo) + b * (hi * hi - lo * lo) / 2.0;
            ensure((got - want).abs() <= QUAD_TOL, || format!("1-D n={n} a={a} b={b}: {got} vs {want}"))?;

            let c = 0.75;
            let got2 = trapezoid_2d(|h, t| a + b * t + c * h, (h0, h1), (lo, hi), n).map_err(|e| e.to_string())?;
            let (wh, wt) = (h1 - h0, hi - lo);
            let want2 = a * wh * wt + b * wh * (hi * hi - lo * lo) / 2.0 + c * wt * (h1 * h1 - h0 * h0) / 2.0;
            ensure((got2 - want2).abs() <= QUAD_TOL, || format!("2-D n={n} a={a} b={b}: {got2} vs {want2}"))?;
            checks += 2;
        }
    }
    Ok(format!("{checks} integrals within {QUAD_TOL:e}"))
}

// 3

fn int_game(rng: &mut ChaCha8Rng, n: usize) -> CharacteristicFunction {
    let mut values = vec![0.0];
    values.extend((1..1usize << n).map(|_| rng.random_range(-5i32..=12) as f64));
    CharacteristicFunction::new(n, values).expect("valid game")
}

/// Efficiency and coalitional rationality, checked in rationals.
fn in_core(cf: &CharacteristicFunction, x: &[Rational]) -> bool {
    let n = cf.n();
    let total = x.iter().fold(rat_int(0), |acc, v| acc + v);
    if total != rat(cf.grand_value()) {
        return false;
    }
    (1u32..1 << n).all(|m| {
        let s = (0..n).filter(|&i| m & (1 << i) != 0).fold(rat_int(0), |acc, i| acc + &x[i]);
        s >= rat(cf.value(Coalition(m)))
    })
}

fn core_certification() -> Outcome {
    let majority = CharacteristicFunction::from_fn(3, |s| if s.len() >= 2 { 1.0 } else { 0.0 }).unwrap();
    let v = core_is_empty(&majority).map_err(|e| e.to_string())?;
    let CoreCertificate::Balanced { collection, .. } = &v.certificate else {
        return Err("majority game: expected a balanced-collection certificate".into());
    };
    ensure(v.empty && v.mode == CoreMode::Exact && v.verify(&majority), || {
        "majority game: certificate does not verify".into()
    })?;
    // independent check of the certificate
    for i in 0..3 {
        let w = collection
            .coalitions
            .iter()
            .zip(&collection.weights)
            .filter(|(c, _)| c.contains(i))
            .fold(rat_int(0), |acc, (_, w)| acc + w);
        ensure(w == rat_int(1), || format!("majority game: player {i} weight {w}"))?;
    }
    let weighted = collection
        .coalitions
        .iter()
        .zip(&collection.weights)
        .fold(rat_int(0), |acc, (c, w)| acc + w * rat(majority.value(*c)));
    ensure(weighted > rat_int(1), || format!("majority game: weighted value {weighted}"))?;

    let additive = CharacteristicFunction::from_fn(3, |s| s.members().map(|i| [2.0, -1.0, 4.0][i]).sum()).unwrap();
    let unanimity = CharacteristicFunction::from_fn(3, |s| if s.contains(0) && s.contains(1) { 1.0 } else { 0.0 }).unwrap();
    for (name, cf) in [("additive", &additive), ("unanimity", &unanimity)] {
        let v = core_is_empty(cf).map_err(|e| e.to_string())?;
        let CoreCertificate::Imputation(x) = &v.certificate else {
            return Err(format!("{name} game: expected an imputation"));
        };
        ensure(!v.empty && v.verify(cf) && in_core(cf, x), || format!("{name} game: bad imputation"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut empty, mut sampled) = (0, 0);
    for k in 0..100u64 {
        let n = rng.random_range(2..=4);
        let cf = int_game(&mut rng, n);
        let exact = core_is_empty(&cf).map_err(|e| e.to_string())?;
        ensure(exact.verify(&cf), || format!("random game {k}: certificate does not verify"))?;
        if let CoreCertificate::Imputation(x) = &exact.certificate {
            ensure(in_core(&cf, x), || format!("random game {k}: imputation outside the core"))?;
        }
        empty += exact.empty as usize;
        let cfg = SamplerConfig { samples: 2000, seed: k };
        if let Some(x) = sample_core_point(&cf, &cfg) {
            sampled += 1;
            ensure(in_core(&cf, &x) && !exact.empty, || {
                format!("random game {k}: sampler found a core point, exact says empty")
            })?;
        }
    }
    Ok(format!("100 random games: {empty} empty, sampler found points in {sampled}, no contradiction"))
}

// 4

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Average marginal contribution over all orders. Values must be integers.
fn shapley_by_permutations(cf: &CharacteristicFunction) -> Vec<Rational> {
    let n = cf.n();
    let perms = permutations(n);
    let mut sums = vec![0i64; n];
    for p in &perms {
        let mut mask = 0u32;
        for &i in p {
            let before = cf.value(Coalition(mask)) as i64;
            mask |= 1 << i;
            sums[i] += cf.value(Coalition(mask)) as i64 - before;
        }
    }
    sums.iter().map(|&s| ratio(s, perms.len() as i64)).collect()
}

fn shapley() -> Outcome {
    let glove = CharacteristicFunction::from_fn(3, |s| {
        let left = s.contains(0) as u32;
        let right = s.contains(1) as u32 + s.contains(2) as u32;
        left.min(right) as f64
    })
    .unwrap();
    let phi = shapley_value_exact(&glove);
    let want = vec![ratio(2, 3), ratio(1, 6), ratio(1, 6)];
    ensure(phi == want, || format!("glove game: {phi:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..100 {
        let n = rng.random_range(2..=5);
        let cf = int_game(&mut rng, n);
        let phi = shapley_value_exact(&cf);
        ensure(phi == shapley_by_permutations(&cf), || format!("random game {k}: differs from the oracle"))?;
        let total = phi.iter().fold(rat_int(0), |acc, x| acc + x);
        ensure(total == rat(cf.grand_value()), || format!("random game {k}: not efficient"))?;

        let swap = |s: Coalition| {
            let mut m = s.0 & !0b11;
            if s.contains(0) {
                m |= 0b10;
            }
            if s.contains(1) {
                m |= 0b01;
            }
            Coalition(m)
        };
        let sym = CharacteristicFunction::from_fn(n, |s| cf.value(s) + cf.value(swap(s))).unwrap();
        let ps = shapley_value_exact(&sym);
        ensure(ps[0] == ps[1], || format!("random game {k}: symmetry fails"))?;

        let d = n - 1;
        let dummy = CharacteristicFunction::from_fn(n, |s| cf.value(Coalition(s.0 & !(1 << d)))).unwrap();
        ensure(shapley_value_exact(&dummy)[d] == rat_int(0), || format!("random game {k}: dummy gets a share"))?;
    }
    Ok("glove (2/3, 1/6, 1/6) exact, 100 random games agree with the permutation oracle".into())
}

// 5

fn bimatrix(row: [[f64; 2]; 2], col: [[f64; 2]; 2]) -> NormalFormGame {
    let r: Vec<Vec<f64>> = row.iter().map(|r| r.to_vec()).collect();
    let c: Vec<Vec<f64>> = col.iter().map(|r| r.to_vec()).collect();
    NormalFormGame::bimatrix(&r, &c).unwrap()
}

type Verdicts = (Vec<Vec<usize>>, Vec<Option<usize>>, Vec<(Vec<Rational>, Vec<Rational>)>, bool, Vec<Vec<usize>>);

fn verdicts(g: &NormalFormGame) -> Result<Verdicts, String> {
    let se = support_enumeration_2p(g).map_err(|e| e.to_string())?;
    let dynamics = best_response_dynamics(g, &[0, 0], 50).map_err(|e| e.to_string())?;
    Ok((
        pure_nash(g).map_err(|e| e.to_string())?,
        dominant_strategy_report(g),
        se.equilibria.iter().map(|m| (m.row.clone(), m.col.clone())).collect(),
        se.degenerate,
        dynamics.trajectory,
    ))
}

fn equilibrium() -> Outcome {
    let pennies = bimatrix([[1.0, -1.0], [-1.0, 1.0]], [[-1.0, 1.0], [1.0, -1.0]]);
    let se = support_enumeration_2p(&pennies).map_err(|e| e.to_string())?;
    let half = vec![ratio(1, 2), ratio(1, 2)];
    ensure(pure_nash(&pennies).map_err(|e| e.to_string())?.is_empty(), || "pennies: pure equilibrium found".into())?;
    ensure(
        se.equilibria.len() == 1 && se.equilibria[0].row == half && se.equilibria[0].col == half,
        || format!("pennies: mixed equilibria {:?}", se.equilibria),
    )?;

    let pd = bimatrix([[3.0, 0.0], [5.0, 1.0]], [[3.0, 5.0], [0.0, 1.0]]);
    let pure = pure_nash(&pd).map_err(|e| e.to_string())?;
    ensure(pure == vec![vec![1, 1]], || format!("prisoner's dilemma: pure equilibria {pure:?}"))?;
    ensure(dominant_strategy_report(&pd) == vec![Some(1), Some(1)], || "prisoner's dilemma: dominance".into())?;
    let ji = joint_improvability(&pd, &[1, 1], 2).map_err(|e| e.to_string())?;
    let Some(ji) = ji else {
        return Err("prisoner's dilemma: no joint improvement at the equilibrium".into());
    };
    let mut p = vec![1, 1];
    for (&i, &a) in ji.coalition.iter().zip(&ji.deviation) {
        p[i] = a;
    }
    ensure(
        ji.coalition.iter().all(|&i| pd.payoff(&p, i) > pd.payoff(&[1, 1], i)),
        || format!("prisoner's dilemma: improvement {ji:?} is not strict"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..50 {
        let counts = vec![rng.random_range(2..=3), rng.random_range(2..=3)];
        let cells: usize = counts.iter().product();
        let payoffs: Vec<f64> = (0..cells * 2).map(|_| rng.random_range(-5i32..=5) as f64).collect();
        let g = NormalFormGame::new(counts, payoffs).map_err(|e| e.to_string())?;
        // dyadic scales and integer shifts keep the transformed payoffs exact
        let mut t = g.clone();
        for player in 0..2 {
            let a = rng.random_range(1..=8) as f64 / 2.0;
            let b = rng.random_range(-5i32..=5) as f64;
            t = t.affine_transform(player, a, b);
        }
        ensure(verdicts(&g)? == verdicts(&t)?, || format!("random game {k}: verdicts change under a positive affine map"))?;
    }
    Ok("pennies and prisoner's dilemma as expected, 50 affine-transformed games unchanged".into())
}

// 6

fn demo() -> Result<Scenario, String> {
    parse_str(DEMO_SCENARIO, "demo.toml").map_err(|e| e.to_string())
}

fn decode(counts: &[usize], mut cell: usize) -> Vec<usize> {
    let mut p = vec![0; counts.len()];
    for i in (0..counts.len()).rev() {
        p[i] = cell % counts[i];
        cell /= counts[i];
    }
    p
}

fn encode(counts: &[usize], p: &[usize]) -> usize {
    p.iter().zip(counts).fold(0, |acc, (&a, &c)| acc * c + a)
}

/// Pure equilibria by scanning every unilateral deviation in the tensor.
fn tensor_has_pure_nash(counts: &[usize], payoffs: &[f64]) -> bool {
    let n = counts.len();
    let cells: usize = counts.iter().product();
    (0..cells).any(|cell| {
        let p = decode(counts, cell);
        (0..n).all(|i| {
            (0..counts[i]).all(|a| {
                let mut q = p.clone();
                q[i] = a;
                payoffs[encode(counts, &q) * n + i] <= payoffs[cell * n + i]
            })
        })
    })
}

fn stage_two_probe() -> Outcome {
    let scenario = demo()?;
    let s2 = scenario.stage2.as_ref().ok_or("demo has no stage2 block")?;
    ensure(s2.setup.employees.len() == 2, || "demo should have two employees".into())?;
    let report = run(&scenario).map_err(|e| e.to_string())?;
    let stage2 = report.stage2.as_ref().ok_or("no stage2 report")?;
    let coalition = report.coalition.as_ref().ok_or("no coalition report")?;
    ensure(coalition.source == CoalitionSource::DeriveFromStage2, || "coalition game is not derived".into())?;

    // rebuild v(S) from the quarter's payoffs: members exercise fully, others hold
    let q = coalition.quarter.unwrap_or(0);
    let state = &stage2.trajectory.quarters[q].state;
    for (mask, &v) in coalition.values.iter().enumerate().skip(1) {
        let actions = ActionProfile {
            employees: (0..2)
                .map(|i| EmployeeAction {
                    exercise_fraction: if mask & (1 << i) != 0 { 1.0 } else { 0.0 },
                    ..s2.setup.hold_action(i)
                })
                .collect(),
            exercise_cap: 1.0,
        };
        let pay = quarter_payoffs(state, &s2.setup, &actions).map_err(|e| e.to_string())?;
        let want: f64 = (0..2).filter(|i| mask & (1 << i) != 0).map(|i| pay[i]).sum();
        ensure(v == want, || format!("v({mask:b}) = {v}, recomputed {want}"))?;
    }

    let ce = coalition.counterexample.as_ref().ok_or("no super-additivity counterexample")?;
    let value = |members: &[usize]| coalition.values[members.iter().map(|&i| 1usize << i).sum::<usize>()];
    let mut union = ce.s.clone();
    union.extend(&ce.t);
    ensure(!coalition.superadditive && value(&union) < value(&ce.s) + value(&ce.t), || {
        format!("counterexample {ce:?} does not break super-additivity")
    })?;

    ensure(stage2.games.len() == s2.n_quarters, || "one quarter game per quarter expected".into())?;
    let mut flags = Vec::new();
    for g in &stage2.games {
        let brute = tensor_has_pure_nash(&g.action_counts, &g.payoffs);
        ensure(g.pure_nash_exists == brute, || format!("quarter {}: pure-Nash flag disagrees with a scan", g.quarter))?;
        flags.push(if g.pure_nash_exists { 'y' } else { 'n' });
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit(&report, Format::Json, dir.path()).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(dir.path().join("demo.coalition.json")).map_err(|e| e.to_string())?;
    let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(json["counterexample"].is_object(), || "counterexample missing from the emitted report".into())?;
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("demo.summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    ensure(
        summary["stage2"]["pure_nash_exists"].as_array().map(Vec::len) == Some(s2.n_quarters),
        || "summary lacks the per-quarter pure-Nash flags".into(),
    )?;
    Ok(format!(
        "v({{0,1}}) = {:.4} < {:.4} + {:.4}; pure Nash per quarter: {}",
        value(&union),
        value(&ce.s),
        value(&ce.t),
        flags.iter().collect::<String>()
    ))
}

// 7

fn cobb_douglas(incentive: f64, box3: [f64; 2]) -> ProductionSpec {
    ProductionSpec {
        family: Family::CobbDouglasIncentive,
        params: FamilyParams {
            scale: 1.0,
            weights: vec![0.3, 0.5],
            incentive,
            rho: None,
            returns: 1.0,
        },
        n_factors: 3,
        domain_box: vec![[0.5, 2.0], [0.5, 2.0], box3],
        vesting_threshold: None,
    }
}

fn production_audit() -> Outcome {
    let cfg = AuditConfig::default();
    let plain = cobb_douglas(0.0, [0.5, 2.0]);
    let r = audit(&plain, &cfg).map_err(|e| e.to_string())?;
    ensure(r.verdicts().iter().all(|v| *v == Verdict::Holds), || {
        format!("plain Cobb-Douglas verdicts {:?}", r.verdicts())
    })?;

    let demotivation = cobb_douglas(-0.5, [-1.0, 1.0]);
    let r = audit(&demotivation, &cfg).map_err(|e| e.to_string())?;
    for a in [1u8, 5] {
        let check = &r.checks[a as usize - 1];
        ensure(check.verdict == Verdict::Violated && !check.evidence.is_empty(), || {
            format!("negative incentive: A{a} is {:?}", check.verdict)
        })?;
        ensure(check.evidence.iter().all(|w| recheck_witness(&demotivation, w, cfg.tol)), || {
            format!("negative incentive: an A{a} witness does not re-verify")
        })?;
    }

    let vesting = ProductionSpec {
        family: Family::PiecewiseVesting,
        domain_box: vec![[0.5, 2.0], [0.5, 2.0], [0.0, 2.0]],
        vesting_threshold: Some(1.0),
        ..cobb_douglas(0.4, [0.0, 2.0])
    };
    let r = audit(&vesting, &cfg).map_err(|e| e.to_string())?;
    ensure(r.verdict(6) == Verdict::Violated, || format!("vesting jump: A6 is {:?}", r.verdict(6)))?;

    let h = cfg.fd_step;
    let tol = (10.0 * h * h).max(FD_TOL_FLOOR);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x: Vec<f64> = plain.domain_box.iter().map(|&[lo, hi]| rng.random_range(lo..hi)).collect();
        let f = x[0].powf(0.3) * x[1].powf(0.5);
        let closed = [
            (0.3 * f / x[0], 0.3 * (0.3 - 1.0) * f / (x[0] * x[0])),
            (0.5 * f / x[1], 0.5 * (0.5 - 1.0) * f / (x[1] * x[1])),
            (0.0, 0.0),
        ];
        for (i, &(d1, d2)) in closed.iter().enumerate() {
            let (f_i, f_ii) = marginals_fd(&plain, &x, i, h);
            let err = (f_i - d1).abs().max((f_ii - d2).abs());
            worst = worst.max(err);
            ensure(err <= tol, || format!("finite differences at {x:?}, factor {i}: error {err:e} > {tol:e}"))?;
        }
    }
    Ok(format!("fixture verdicts as expected, worst FD error {worst:.2e} <= {tol:e}"))
}

// 8

fn emit_all(report: &RunReport, dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for format in [Format::Json, Format::Csv] {
        for path in emit(report, format, dir).map_err(|e| e.to_string())? {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let scenario = demo()?;
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = emit_all(&run(&scenario).map_err(|e| e.to_string())?, a.path())?;
    let second = emit_all(&run(&scenario).map_err(|e| e.to_string())?, b.path())?;
    ensure(first.keys().eq(second.keys()), || "runs wrote different file sets".into())?;
    for (name, bytes) in &first {
        ensure(second[name] == *bytes, || format!("{name} differs between runs"))?;
    }

    let base = run(&scenario).map_err(|e| e.to_string())?;
    let other = run(&with_seed(&scenario, Some(scenario.seed + 1))).map_err(|e| e.to_string())?;
    let (s1, o1) = (base.stage1.as_ref().unwrap(), other.stage1.as_ref().unwrap());
    ensure(s1.members != o1.members, || "a new seed left the sampled cohort unchanged".into())?;
    ensure(
        base.stage2.as_ref().unwrap().trajectory != other.stage2.as_ref().unwrap().trajectory,
        || "a new seed left the price path unchanged".into(),
    )?;
    ensure(s1.g_company == o1.g_company && s1.objectives == o1.objectives, || {
        "a new seed changed the formula-level company values".into()
    })?;
    ensure(base.equilibrium == other.equilibrium, || "a new seed changed the textbook games".into())?;
    let values = |r: &RunReport| r.coalition.as_ref().map(|c| c.values.clone());
    ensure(values(&base) == values(&other), || "a new seed changed the quarter-0 coalition values".into())?;
    let verdicts = |r: &RunReport| -> Vec<Vec<Verdict>> {
        r.prodfn.iter().flat_map(|p| &p.audits).map(|a| a.report.verdicts()).collect()
    };
    ensure(verdicts(&base) == verdicts(&other), || "a new seed changed the production fixture verdicts".into())?;
    let members = s1.members.len();
    let g_emp_mean = |r: &RunReport| r.stage1.as_ref().map(|s| s.mean_g_employee).unwrap_or(0.0);
    Ok(format!(
        "{} files byte-identical; new seed moves mean G_e of {members} employees {:.4} -> {:.4}",
        first.len(),
        g_emp_mean(&base),
        g_emp_mean(&other),
    ))
}
