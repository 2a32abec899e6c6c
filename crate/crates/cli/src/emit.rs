//! Writes a report as `<scenario>.<block>.<ext>` files plus a summary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ebigame_core::stage_two::PlayerId;
use serde::Serialize;
use serde_json::{json, Value};

use crate::run::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Pretty-printed JSON, one file per block.
    #[value(name = "json-like", alias = "json")]
    Json,
    /// Flat CSV tables with header rows.
    Csv,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-5, 1e12)`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // round first so that 9.9999999999999 lands in the right decade
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn file_name(report: &RunReport, block: &str, format: Format) -> String {
    format!("{}.{block}.{}", report.scenario.name, format.ext())
}

/// Headline findings of every block, plus the scenario echo.
pub fn summary(report: &RunReport) -> Value {
    let mut s = json!({
        "name": report.scenario.name,
        "version": report.version,
        "schema_version": report.scenario.schema_version,
        "seed": report.scenario.seed,
        "blocks": report.blocks(),
        "scenario": report.scenario,
    });
    if let Some(r) = &report.stage1 {
        s["stage1"] = json!({
            "members": r.members.len(),
            "g_company": r.g_company,
            "nash_fraction": r.nash_fraction,
            "converged_fraction": r.converged_fraction,
            "mean_employee_payoff": r.mean_employee_payoff,
            "mean_g_employee": r.mean_g_employee,
        });
    }
    if let Some(r) = &report.stage2 {
        s["stage2"] = json!({
            "quarters": r.trajectory.quarters.len(),
            "quarters_with_pure_nash": r.quarters_with_pure_nash,
            "pure_nash_exists": r.games.iter().map(|g| g.pure_nash_exists).collect::<Vec<_>>(),
            "final_share_price": r.trajectory.final_state.share_price,
            "final_shares_outstanding": r.trajectory.final_state.shares_outstanding,
        });
    }
    if let Some(r) = &report.coalition {
        s["coalition"] = json!({
            "n": r.n,
            "superadditive": r.superadditive,
            "counterexample": r.counterexample,
            "core_empty": r.core_empty,
            "core_mode": r.core_mode,
            "certificate_verified": r.certificate_verified,
            "shapley": r.shapley,
        });
    }
    if let Some(r) = &report.equilibrium {
        let games: serde_json::Map<String, Value> = r
            .games
            .iter()
            .map(|g| {
                (
                    g.name.clone(),
                    json!({
                        "pure_nash": g.pure_nash.len(),
                        "mixed": g.mixed.as_ref().map(Vec::len),
                        "converged": g.dynamics.converged,
                    }),
                )
            })
            .collect();
        s["equilibrium"] = Value::Object(games);
    }
    if let Some(r) = &report.prodfn {
        let audits: serde_json::Map<String, Value> = r
            .audits
            .iter()
            .map(|a| (a.name.clone(), json!(a.report.verdicts())))
            .collect();
        s["prodfn"] = Value::Object(audits);
    }
    s
}

/// Writes the summary and one file per present block. Returns the paths in
/// write order.
pub fn emit(report: &RunReport, format: Format, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |block: &str, write: &dyn Fn(&Path) -> io::Result<()>| -> io::Result<()> {
        let path = out_dir.join(file_name(report, block, format));
        write(&path)?;
        written.push(path);
        Ok(())
    };
    let summary = summary(report);
    match format {
        Format::Json => {
            put("summary", &|p| write_json(p, &summary))?;
            if let Some(r) = &report.stage1 {
                put("stage1", &|p| write_json(p, r))?;
            }
            if let Some(r) = &report.stage2 {
                put("stage2", &|p| write_json(p, r))?;
            }
            if let Some(r) = &report.coalition {
                put("coalition", &|p| write_json(p, r))?;
            }
            if let Some(r) = &report.equilibrium {
                put("equilibrium", &|p| write_json(p, r))?;
            }
            if let Some(r) = &report.prodfn {
                put("prodfn", &|p| write_json(p, r))?;
            }
        }
        Format::Csv => {
            put("summary", &|p| write_csv(p, &summary_table(&summary)))?;
            if report.stage1.is_some() {
                put("stage1", &|p| write_csv(p, &stage1_table(report)))?;
            }
            if report.stage2.is_some() {
                put("stage2", &|p| write_csv(p, &stage2_table(report)))?;
            }
            if report.coalition.is_some() {
                put("coalition", &|p| write_csv(p, &coalition_table(report)))?;
            }
            if report.equilibrium.is_some() {
                put("equilibrium", &|p| write_csv(p, &equilibrium_table(report)))?;
            }
            if report.prodfn.is_some() {
                put("prodfn", &|p| write_csv(p, &prodfn_table(report)))?;
            }
        }
    }
    Ok(written)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn write_csv(path: &Path, table: &Table) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}

fn num(x: f64) -> String {
    fmt_sig(x)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn player_label(p: PlayerId) -> String {
    match p {
        PlayerId::Employee(i) => format!("employee-{i}"),
        PlayerId::Firm => "firm".into(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<Vec<String>>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::Number(n) => {
            let text = if n.is_f64() {
                num(n.as_f64().unwrap_or(f64::NAN))
            } else {
                n.to_string()
            };
            out.push(vec![prefix.to_string(), text]);
        }
        Value::Bool(b) => out.push(vec![prefix.to_string(), b.to_string()]),
        Value::String(s) => out.push(vec![prefix.to_string(), s.clone()]),
        Value::Null => out.push(vec![prefix.to_string(), String::new()]),
    }
}

pub fn summary_table(summary: &Value) -> Table {
    let mut rows = Vec::new();
    flatten("", summary, &mut rows);
    Table {
        header: vec!["key", "value"],
        rows,
    }
}

pub fn stage1_table(report: &RunReport) -> Table {
    let mut header = vec![
        "employee",
        "v_e",
        "u_e",
        "t_e",
        "g_company",
        "g_employee",
        "employee_payoff",
        "shareholder_payoff",
        "is_pure_nash",
        "converged",
        "rounds",
    ];
    header.extend(["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"]);
    let rows = report
        .stage1
        .iter()
        .flat_map(|r| &r.members)
        .map(|m| {
            let c = &m.contract;
            let mut row = vec![
                m.employee.to_string(),
                num(m.ledger.v_e),
                num(m.ledger.u_e),
                num(m.ledger.t_e),
                num(m.g_company),
                num(m.g_employee),
                num(c.employee_payoff),
                num(c.shareholder_payoff),
                c.is_pure_nash.to_string(),
                c.converged.to_string(),
                c.rounds.to_string(),
            ];
            row.extend(c.employee_strategy.0.iter().map(|&a| num(a)));
            row
        })
        .collect();
    Table { header, rows }
}

/// One row per quarter per player.
pub fn stage2_table(report: &RunReport) -> Table {
    let header = vec![
        "quarter",
        "player",
        "share_price",
        "shares_outstanding_before",
        "shares_outstanding_after",
        "pure_nash_count",
        "exercise_fraction",
        "hedge_fraction",
        "effort_level",
        "issued",
        "dilution_loss",
        "payoff",
        "vested_fraction",
    ];
    let mut rows = Vec::new();
    for q in report.stage2.iter().flat_map(|r| &r.trajectory.quarters) {
        for p in &q.players {
            rows.push(vec![
                q.quarter.to_string(),
                player_label(p.player),
                num(q.share_price),
                num(q.shares_outstanding_before),
                num(q.shares_outstanding_after),
                q.pure_nash_count.to_string(),
                num(p.exercise_fraction),
                num(p.hedge_fraction),
                num(p.effort_level),
                num(p.issued),
                num(p.dilution_loss),
                num(p.payoff),
                num(p.vested_fraction),
            ]);
        }
    }
    Table { header, rows }
}

/// Long format: coalition values, Shapley shares and the core certificate.
pub fn coalition_table(report: &RunReport) -> Table {
    use crate::run::CertificateReport;
    let mut rows = Vec::new();
    if let Some(r) = &report.coalition {
        for (mask, &v) in r.values.iter().enumerate().skip(1) {
            let members: Vec<usize> = (0..r.n).filter(|&i| mask & (1 << i) != 0).collect();
            rows.push(vec!["value".into(), join(&members), num(v)]);
        }
        for (i, (&x, exact)) in r.shapley.iter().zip(&r.shapley_exact).enumerate() {
            rows.push(vec!["shapley".into(), i.to_string(), num(x)]);
            rows.push(vec!["shapley-exact".into(), i.to_string(), exact.clone()]);
        }
        rows.push(vec!["superadditive".into(), String::new(), r.superadditive.to_string()]);
        if let Some(c) = &r.counterexample {
            rows.push(vec!["counterexample-s".into(), join(&c.s), num(c.v_s)]);
            rows.push(vec!["counterexample-t".into(), join(&c.t), num(c.v_t)]);
            let mut union = c.s.clone();
            union.extend(&c.t);
            union.sort_unstable();
            rows.push(vec!["counterexample-union".into(), join(&union), num(c.v_union)]);
        }
        rows.push(vec!["core-empty".into(), String::new(), r.core_empty.to_string()]);
        match &r.certificate {
            CertificateReport::Imputation { exact, .. } => {
                for (i, x) in exact.iter().enumerate() {
                    rows.push(vec!["core-point".into(), i.to_string(), x.clone()]);
                }
            }
            CertificateReport::Balanced {
                coalitions, weights, ..
            } => {
                for (c, w) in coalitions.iter().zip(weights) {
                    rows.push(vec!["balancing-weight".into(), join(c), w.clone()]);
                }
            }
            CertificateReport::NoPointFound { samples } => {
                rows.push(vec!["no-point-found".into(), String::new(), samples.to_string()]);
            }
        }
    }
    Table {
        header: vec!["kind", "item", "value"],
        rows,
    }
}

pub fn equilibrium_table(report: &RunReport) -> Table {
    let mut rows = Vec::new();
    for g in report.equilibrium.iter().flat_map(|r| &r.games) {
        let mut push = |kind: &str, item: String, value: String| {
            rows.push(vec![g.name.clone(), kind.to_string(), item, value]);
        };
        for p in &g.pure_nash {
            push("pure-nash", join(p), String::new());
        }
        for (i, d) in g.dominant.iter().enumerate() {
            push("dominant", i.to_string(), d.map_or("none".into(), |a| a.to_string()));
        }
        for (k, m) in g.mixed.iter().flatten().enumerate() {
            for (a, x) in m.row_exact.iter().enumerate() {
                push("mixed-row", format!("{k} {a}"), x.clone());
            }
            for (a, x) in m.col_exact.iter().enumerate() {
                push("mixed-col", format!("{k} {a}"), x.clone());
            }
        }
        if let Some(last) = g.dynamics.trajectory.last() {
            push("dynamics-end", join(last), g.dynamics.converged.to_string());
        }
        for ji in &g.joint_improvements {
            let value = ji
                .improvement
                .as_ref()
                .map_or("none".into(), |j| format!("{} -> {}", join(&j.coalition), join(&j.deviation)));
            push("joint-improvement", join(&ji.profile), value);
        }
    }
    Table {
        header: vec!["game", "kind", "item", "value"],
        rows,
    }
}

pub fn prodfn_table(report: &RunReport) -> Table {
    let mut rows = Vec::new();
    for a in report.prodfn.iter().flat_map(|r| &r.audits) {
        for c in &a.report.checks {
            let verdict = serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(String::from));
            let regime = c
                .regime
                .and_then(|r| serde_json::to_value(r).ok())
                .and_then(|v| v.as_str().map(String::from));
            rows.push(vec![
                a.name.clone(),
                c.assumption.to_string(),
                c.name.clone(),
                verdict.unwrap_or_default(),
                regime.unwrap_or_default(),
                c.evidence.len().to_string(),
            ]);
        }
    }
    Table {
        header: vec!["spec", "assumption", "name", "verdict", "regime", "witnesses"],
        rows,
    }
}
