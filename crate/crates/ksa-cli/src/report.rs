//! Human-readable report rendering. Machine-readable output is plain
//! JSON of the same structures and lives in `main`.
//!
//! Text reports keep the full message or step log only when a verdict
//! failed; passing runs print counts instead, so campaign output stays
//! readable while failures remain replayable from the report alone.

use std::fmt::Write as _;

use ksa_core::checker::oracle::OracleSummary;
use ksa_core::checker::Verdict;
use ksa_core::fuzz::FuzzSummary;
use ksa_core::model::{render_values, Value};
use ksa_core::scenarios::{RunOutcome, Scenario, ScenarioReport};
use ksa_core::shm_engine::{AsyncRunRecord, StepAction};
use ksa_core::sync_engine::{Body, SyncRunRecord};

fn push_verdicts(out: &mut String, verdicts: &[Verdict]) {
    let _ = writeln!(out, "verdicts:");
    for v in verdicts {
        let _ = writeln!(out, "  {}", v);
        if let (false, Some(e)) = (v.pass, &v.evidence) {
            if !e.witnesses.is_empty() {
                let w: Vec<String> = e.witnesses.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(out, "    witnesses: {}", w.join(" "));
            }
            if !e.values.is_empty() {
                let _ = writeln!(out, "    values: {}", render_values(&e.values));
            }
            if let Some(r) = e.round {
                let _ = writeln!(out, "    at: {r}");
            }
        }
    }
}

fn render_body(body: &Body) -> String {
    match body {
        Body::Value(chain) => format!("announce {chain}"),
        Body::Vector(slots) => {
            let rendered: Vec<String> = slots
                .iter()
                .map(|s| s.as_ref().map_or("-".to_string(), |c| c.to_string()))
                .collect();
            format!("echo [{}]", rendered.join(", "))
        }
        Body::Relay { instance, chains } => {
            let rendered: Vec<String> = chains.iter().map(|c| c.to_string()).collect();
            format!("relay({instance}) {}", rendered.join(" "))
        }
    }
}

fn push_sync_log(out: &mut String, record: &SyncRunRecord, full: bool) {
    let messages: usize = record.rounds.iter().map(|r| r.delivered.len()).sum();
    let rejected: usize = record.rounds.iter().map(|r| r.rejected.len()).sum();
    if !full {
        let _ = writeln!(
            out,
            "message log: {messages} delivered, {rejected} rejected over {} rounds (full log shown when a verdict fails)",
            record.rounds_executed
        );
        return;
    }
    let _ = writeln!(out, "message log ({messages} delivered, {rejected} rejected):");
    for round in &record.rounds {
        let _ = writeln!(out, "  round {}:", round.round);
        for m in &round.delivered {
            let _ = writeln!(out, "    {} -> {}: {}", m.from, m.to, render_body(&m.body));
        }
        for r in &round.rejected {
            let _ = writeln!(
                out,
                "    {} -> {}: {} [rejected: unobtainable signature]",
                r.from, r.to, r.chain
            );
        }
    }
}

fn push_async_log(out: &mut String, record: &AsyncRunRecord, full: bool) {
    if !full {
        let _ = writeln!(
            out,
            "step log: {} steps, budget {} (full log shown when a verdict fails)",
            record.steps.len(),
            record.step_budget
        );
        return;
    }
    let _ = writeln!(out, "step log ({} steps, budget {}):", record.steps.len(), record.step_budget);
    for s in &record.steps {
        let line = match &s.action {
            StepAction::Update { value } => format!("write {value}"),
            StepAction::Snapshot { view, decided: Some(v) } => {
                format!("snapshot {view} -> decide {v}")
            }
            StepAction::Snapshot { view, decided: None } => format!("snapshot {view}"),
            StepAction::Crash => "crash".to_string(),
        };
        let _ = writeln!(out, "  step {}: {} {}", s.index, s.pid, line);
    }
}

pub fn render_scenario_text(
    scenario: &Scenario,
    report: &ScenarioReport,
    advisory: Option<&str>,
) -> String {
    let mut out = String::new();
    let cfg = scenario.cfg;
    let _ = writeln!(out, "scenario: {} n={} t={} seed={}", cfg.protocol, cfg.n, cfg.t, scenario.seed);
    let inputs: Vec<String> =
        scenario.initial_values.iter().map(|(p, v)| format!("{p}={v}")).collect();
    let _ = writeln!(out, "inputs: {}", inputs.join(" "));
    if let Some(note) = advisory {
        let _ = writeln!(out, "advisory: {note}");
    }
    let failed = !report.passed();
    match &report.outcome {
        RunOutcome::Sync(record) => {
            if !record.faulty.is_empty() {
                let ids: Vec<String> = record.faulty.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(out, "byzantine: {}", ids.join(" "));
            }
            let _ = writeln!(
                out,
                "rounds executed: {} (budget {})",
                record.rounds_executed, record.round_budget
            );
            let _ = writeln!(out, "decisions:");
            for d in &record.decisions {
                let tag = if d.correct { "" } else { " (byzantine)" };
                let _ = writeln!(out, "  {} -> {} at round {}{}", d.pid, d.decided, d.decided_at, tag);
            }
            for (p, v) in &record.vectors {
                let _ = writeln!(out, "vector {p}: {v}");
            }
            push_sync_log(&mut out, record, failed);
        }
        RunOutcome::Async(record) => {
            if !record.crashed.is_empty() {
                let ids: Vec<String> = record.crashed.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(out, "crashed: {}", ids.join(" "));
            }
            let _ = writeln!(out, "decisions:");
            for d in &record.decisions {
                let _ = writeln!(out, "  {} -> {} at step {}", d.pid, d.decided, d.decided_at);
            }
            for (p, f) in &record.frozen {
                let _ = writeln!(out, "frozen {p}: {} (size {})", f.view, f.size);
            }
            push_async_log(&mut out, record, failed);
        }
    }
    let distinct: Vec<Value> = ksa_core::model::distinct_correct_decisions(report.decisions())
        .into_iter()
        .collect();
    let _ = writeln!(out, "distinct correct decisions: {}", render_values(&distinct));
    push_verdicts(&mut out, &report.verdicts);
    let _ = writeln!(out, "result: {}", if report.passed() { "PASS" } else { "FAIL" });
    out
}

pub fn render_fuzz_text(summary: &FuzzSummary) -> String {
    let mut out = String::new();
    let cfg = summary.cfg;
    let _ = writeln!(
        out,
        "fuzz: {} n={} t={} runs={} master_seed={}",
        cfg.protocol, cfg.n, cfg.t, summary.runs, summary.master_seed
    );
    let _ = writeln!(out, "max distinct correct decisions (bottom included): {}", summary.max_distinct);
    let _ = writeln!(out, "max distinct domain decisions: {}", summary.max_distinct_domain);
    if let Ok(bound) = cfg.k_bound() {
        let _ = writeln!(out, "agreement bound: {bound}");
    }
    let _ = writeln!(out, "violations: {}", summary.violations.len());
    for v in &summary.violations {
        let _ = writeln!(
            out,
            "  run {} (replay with the same config, master seed, and index):",
            v.run_index
        );
        for verdict in &v.failed {
            let _ = writeln!(out, "    {verdict}");
        }
    }
    let _ = writeln!(out, "result: {}", if summary.clean() { "PASS" } else { "FAIL" });
    out
}

pub fn render_oracle_text(summary: &OracleSummary) -> String {
    let mut out = String::new();
    let cfg = summary.cfg;
    let _ = writeln!(out, "oracle: {} n={} t={} space={}", cfg.protocol, cfg.n, cfg.t, summary.space);
    let _ = writeln!(out, "explored: {} leaves", summary.explored);
    let _ = writeln!(out, "max distinct correct decisions (bottom included): {}", summary.max_distinct);
    let _ = writeln!(out, "max distinct domain decisions: {}", summary.max_distinct_domain);
    let _ = writeln!(out, "violations: {}", summary.violations.len());
    for v in &summary.violations {
        let _ = writeln!(out, "  at {}:", v.context);
        for verdict in &v.verdicts {
            let _ = writeln!(out, "    {verdict}");
        }
    }
    let _ = writeln!(out, "result: {}", if summary.violations.is_empty() { "PASS" } else { "FAIL" });
    out
}
