//! Post-hoc property verdicts over run records.
//!
//! Checkers are pure functions of a record: the same record always yields
//! the same verdicts, so any fuzz failure replays exactly. Every failing
//! verdict carries evidence (witness processes, the offending values, the
//! round or step involved) rather than a bare boolean.
//!
//! The agreement checkers distinguish two counts. `check_agreement` counts
//! every decided value including bottom, the bound a client actually
//! observes. `check_domain_agreement` counts only domain values, the bound
//! the delivery-vector and snapshot protocols guarantee.

pub mod oracle;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::authsig::ValidityMode;
use crate::ksa_snapshot::decide_async;
use crate::model::{
    distinct_correct_decisions, distinct_correct_domain_decisions, render_values, DecisionRecord,
    ProcessId, SystemConfig, Value, ViewVector,
};
use crate::shm_engine::{AsyncRunRecord, StepAction};
use crate::sync_engine::{Body, SyncRunRecord};

/// Supporting facts for a failed verdict.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Evidence {
    pub witnesses: Vec<ProcessId>,
    pub values: Vec<Value>,
    /// Round (sync) or step index (async) where the violation surfaced.
    pub round: Option<u64>,
    pub note: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub pass: bool,
    pub evidence: Option<Evidence>,
}

impl Verdict {
    pub fn pass(property: &str) -> Self {
        Verdict { property: property.to_string(), pass: true, evidence: None }
    }

    pub fn fail(property: &str, evidence: Evidence) -> Self {
        Verdict { property: property.to_string(), pass: false, evidence: Some(evidence) }
    }
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.pass {
            write!(f, "{}: pass", self.property)
        } else {
            let note = self.evidence.as_ref().map(|e| e.note.as_str()).unwrap_or("");
            write!(f, "{}: FAIL ({note})", self.property)
        }
    }
}

/// The record fields the generic checkers need, shared by synchronous and
/// asynchronous records.
pub trait RunView {
    fn cfg(&self) -> &SystemConfig;
    fn initial_value(&self, pid: ProcessId) -> Option<Value>;
    fn decisions(&self) -> &[DecisionRecord];
    fn non_terminating(&self) -> bool;
    fn correct(&self, pid: ProcessId) -> bool;
}

impl RunView for SyncRunRecord {
    fn cfg(&self) -> &SystemConfig {
        &self.cfg
    }
    fn initial_value(&self, pid: ProcessId) -> Option<Value> {
        self.initial_values.get(&pid).copied()
    }
    fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }
    fn non_terminating(&self) -> bool {
        self.non_termination
    }
    fn correct(&self, pid: ProcessId) -> bool {
        self.is_correct(pid)
    }
}

impl RunView for AsyncRunRecord {
    fn cfg(&self) -> &SystemConfig {
        &self.cfg
    }
    fn initial_value(&self, pid: ProcessId) -> Option<Value> {
        self.initial_values.get(&pid).copied()
    }
    fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }
    fn non_terminating(&self) -> bool {
        self.non_termination
    }
    fn correct(&self, pid: ProcessId) -> bool {
        self.is_correct(pid)
    }
}

/// If every correct process proposed the same value, every correct process
/// must decide that value. Mixed proposals pass vacuously.
pub fn check_validity(run: &dyn RunView) -> Verdict {
    let correct_inputs: BTreeSet<Value> = crate::model::all_processes(run.cfg().n)
        .filter(|p| run.correct(*p))
        .filter_map(|p| run.initial_value(p))
        .collect();
    let common = match correct_inputs.iter().next() {
        Some(v) if correct_inputs.len() == 1 => *v,
        _ => return Verdict::pass("validity"),
    };
    let offenders: Vec<&DecisionRecord> =
        run.decisions().iter().filter(|d| d.correct && d.decided != common).collect();
    if offenders.is_empty() {
        Verdict::pass("validity")
    } else {
        Verdict::fail(
            "validity",
            Evidence {
                witnesses: offenders.iter().map(|d| d.pid).collect(),
                values: offenders.iter().map(|d| d.decided).collect(),
                round: offenders.first().map(|d| d.decided_at),
                note: format!("all correct proposed {common} but decided differently"),
            },
        )
    }
}

fn agreement_verdict(property: &str, distinct: BTreeSet<Value>, k: u32) -> Verdict {
    if distinct.len() <= k as usize {
        Verdict::pass(property)
    } else {
        Verdict::fail(
            property,
            Evidence {
                witnesses: Vec::new(),
                values: distinct.iter().copied().collect(),
                round: None,
                note: format!(
                    "{} distinct decisions {} exceed k={k}",
                    distinct.len(),
                    render_values(&distinct)
                ),
            },
        )
    }
}

/// At most `k` distinct values decided by correct processes, bottom
/// included in the count.
pub fn check_agreement(run: &dyn RunView, k: u32) -> Verdict {
    agreement_verdict("agreement", distinct_correct_decisions(run.decisions()), k)
}

/// At most `k` distinct domain values decided by correct processes.
pub fn check_domain_agreement(run: &dyn RunView, k: u32) -> Verdict {
    agreement_verdict("domain-agreement", distinct_correct_domain_decisions(run.decisions()), k)
}

/// Every correct process decided and the run did not exhaust its budget.
pub fn check_termination(run: &dyn RunView) -> Verdict {
    let decided: BTreeSet<ProcessId> =
        run.decisions().iter().filter(|d| d.correct).map(|d| d.pid).collect();
    let missing: Vec<ProcessId> = crate::model::all_processes(run.cfg().n)
        .filter(|p| run.correct(*p) && !decided.contains(p))
        .collect();
    if missing.is_empty() && !run.non_terminating() {
        Verdict::pass("termination")
    } else {
        let note = if run.non_terminating() {
            "budget exhausted before all correct processes decided".to_string()
        } else {
            format!("{} correct processes never decided", missing.len())
        };
        Verdict::fail(
            "termination",
            Evidence { witnesses: missing, values: Vec::new(), round: None, note },
        )
    }
}

/// The run took exactly the expected number of rounds.
pub fn check_round_count(record: &SyncRunRecord, expected: u32) -> Verdict {
    if record.rounds_executed == expected {
        Verdict::pass("round-count")
    } else {
        Verdict::fail(
            "round-count",
            Evidence {
                witnesses: Vec::new(),
                values: Vec::new(),
                round: Some(u64::from(record.rounds_executed)),
                note: format!("executed {} rounds, expected {expected}", record.rounds_executed),
            },
        )
    }
}

/// All correct processes ended with the same final vector.
pub fn check_vector_equality(record: &SyncRunRecord) -> Verdict {
    let mut vectors = record
        .correct_processes()
        .filter_map(|p| record.vectors.get(&p).map(|v| (p, v)));
    let first = match vectors.next() {
        Some(f) => f,
        None => return Verdict::pass("vector-equality"),
    };
    if let Some((pid, v)) = vectors.find(|(_, v)| **v != *first.1) {
        Verdict::fail(
            "vector-equality",
            Evidence {
                witnesses: alloc::vec![first.0, pid],
                values: Vec::new(),
                round: None,
                note: format!("{} holds [{}] but {} holds [{}]", first.0, first.1, pid, v),
            },
        )
    } else {
        Verdict::pass("vector-equality")
    }
}

/// Correct processes never split between bottom and domain decisions.
pub fn check_unmixed_decisions(run: &dyn RunView) -> Verdict {
    let distinct = distinct_correct_decisions(run.decisions());
    let has_bottom = distinct.contains(&Value::Bottom);
    let has_domain = distinct.iter().any(|v| v.is_domain());
    if has_bottom && has_domain {
        Verdict::fail(
            "unmixed-decisions",
            Evidence {
                witnesses: Vec::new(),
                values: distinct.into_iter().collect(),
                round: None,
                note: "bottom decided alongside domain values".to_string(),
            },
        )
    } else {
        Verdict::pass("unmixed-decisions")
    }
}

/// The four broadcast properties for one instance of a synchronous record:
/// every correct process delivers (termination), a correct sender's value
/// is what everyone delivers (validity), a delivered domain value reached
/// its deliverer inside a chain originated by the sender (integrity), and
/// all correct processes deliver the same thing (agreement). A process
/// delivers at most once by record construction.
pub fn check_trb(record: &SyncRunRecord, instance: ProcessId) -> Vec<Verdict> {
    let deliveries = record.instance_deliveries(instance);
    let correct: Vec<ProcessId> = record.correct_processes().collect();
    let tag = |p: &str| format!("trb-{p}({instance})");

    let missing: Vec<ProcessId> =
        correct.iter().copied().filter(|p| !deliveries.contains_key(p)).collect();
    let termination = if missing.is_empty() && !record.non_termination {
        Verdict::pass(&tag("termination"))
    } else {
        Verdict::fail(
            &tag("termination"),
            Evidence {
                witnesses: missing,
                values: Vec::new(),
                round: None,
                note: "correct processes without a delivery".to_string(),
            },
        )
    };

    let validity = if record.is_correct(instance) {
        let sent = record.initial_values.get(&instance).copied();
        let offenders: Vec<(ProcessId, Value)> = correct
            .iter()
            .filter_map(|p| deliveries.get(p).map(|v| (*p, *v)))
            .filter(|(_, v)| Some(*v) != sent)
            .collect();
        if offenders.is_empty() {
            Verdict::pass(&tag("validity"))
        } else {
            Verdict::fail(
                &tag("validity"),
                Evidence {
                    witnesses: offenders.iter().map(|(p, _)| *p).collect(),
                    values: offenders.iter().map(|(_, v)| *v).collect(),
                    round: None,
                    note: format!("correct sender sent {:?} yet others delivered", sent),
                },
            )
        }
    } else {
        Verdict::pass(&tag("validity"))
    };

    let mut integrity = Verdict::pass(&tag("integrity"));
    'outer: for p in &correct {
        let delivered = match deliveries.get(p) {
            Some(v) if v.is_domain() => *v,
            _ => continue,
        };
        let supported = record.rounds.iter().flat_map(|log| &log.delivered).any(|msg| {
            msg.to == *p
                && match &msg.body {
                    Body::Relay { instance: i, chains } if *i == instance => chains
                        .iter()
                        .any(|c| c.payload() == delivered && c.origin() == Some(instance)),
                    _ => false,
                }
        });
        if !supported {
            integrity = Verdict::fail(
                &tag("integrity"),
                Evidence {
                    witnesses: alloc::vec![*p],
                    values: alloc::vec![delivered],
                    round: None,
                    note: "delivery without a sender-originated chain in the log".to_string(),
                },
            );
            break 'outer;
        }
    }

    let delivered_set: BTreeSet<Value> =
        correct.iter().filter_map(|p| deliveries.get(p)).copied().collect();
    let agreement = if delivered_set.len() <= 1 {
        Verdict::pass(&tag("agreement"))
    } else {
        Verdict::fail(
            &tag("agreement"),
            Evidence {
                witnesses: correct.clone(),
                values: delivered_set.into_iter().collect(),
                round: None,
                note: "correct processes delivered different values".to_string(),
            },
        )
    };

    alloc::vec![termination, validity, integrity, agreement]
}

/// Replays the shared-memory log sequentially and verifies it is a legal
/// single-writer snapshot history: every logged view equals the replayed
/// register state, crashed processes take no further steps, each snapshot
/// taken after the invoker's write contains the invoker's own value, and
/// all views are inclusion-comparable.
pub fn check_snapshot_history(record: &AsyncRunRecord) -> Verdict {
    let n = record.cfg.n;
    let mut regs = ViewVector::bottoms(n);
    let mut written: BTreeSet<ProcessId> = BTreeSet::new();
    let mut crashed: BTreeSet<ProcessId> = BTreeSet::new();
    let mut views: Vec<(ProcessId, u64, ViewVector)> = Vec::new();
    let fail = |note: String, pid: ProcessId, step: u64| {
        Verdict::fail(
            "snapshot-history",
            Evidence {
                witnesses: alloc::vec![pid],
                values: Vec::new(),
                round: Some(step),
                note,
            },
        )
    };

    for step in &record.steps {
        if step.pid.index() >= n as usize {
            return fail("step by unknown process".to_string(), step.pid, step.index);
        }
        if crashed.contains(&step.pid) {
            return fail("step by crashed process".to_string(), step.pid, step.index);
        }
        match &step.action {
            StepAction::Update { value } => {
                if !written.insert(step.pid) {
                    return fail("second write to a write-once register".to_string(), step.pid, step.index);
                }
                regs.set(step.pid, *value);
            }
            StepAction::Snapshot { view, .. } => {
                if *view != regs {
                    return fail(
                        format!("snapshot [{view}] disagrees with register state [{regs}]"),
                        step.pid,
                        step.index,
                    );
                }
                if written.contains(&step.pid)
                    && Some(view.get(step.pid)) != record.initial_values.get(&step.pid).copied()
                {
                    return fail("view misses the invoker's own value".to_string(), step.pid, step.index);
                }
                views.push((step.pid, step.index, view.clone()));
            }
            StepAction::Crash => {
                crashed.insert(step.pid);
            }
        }
    }
    if crashed != record.crashed {
        return Verdict::fail(
            "snapshot-history",
            Evidence {
                witnesses: record.crashed.symmetric_difference(&crashed).copied().collect(),
                values: Vec::new(),
                round: None,
                note: "crash log disagrees with the recorded crash set".to_string(),
            },
        );
    }
    for (i, (p, si, vi)) in views.iter().enumerate() {
        for (q, sj, vj) in views.iter().skip(i + 1) {
            if !vi.contained_in(vj) && !vj.contained_in(vi) {
                return Verdict::fail(
                    "snapshot-history",
                    Evidence {
                        witnesses: alloc::vec![*p, *q],
                        values: Vec::new(),
                        round: Some(*si.min(sj)),
                        note: format!("views [{vi}] and [{vj}] are inclusion-incomparable"),
                    },
                );
            }
        }
    }
    Verdict::pass("snapshot-history")
}

/// Each decision's frozen view is genuine and the decision follows from it:
/// the view appears as that process's deciding snapshot step, it holds at
/// least n - t values, no earlier snapshot of the process already held that
/// many, and re-running the threshold rule reproduces the decided value.
pub fn check_snapshot_decisions(record: &AsyncRunRecord) -> Verdict {
    let fail = |pid: ProcessId, note: String, round: Option<u64>| {
        Verdict::fail(
            "snapshot-decisions",
            Evidence { witnesses: alloc::vec![pid], values: Vec::new(), round, note },
        )
    };
    let quorum = (record.cfg.n - record.cfg.t) as usize;
    for dec in &record.decisions {
        let frozen = match record.frozen.get(&dec.pid) {
            Some(f) => f,
            None => return fail(dec.pid, "decision without a frozen view".to_string(), None),
        };
        if frozen.view.non_bottom() != frozen.size as usize || (frozen.size as usize) < quorum {
            return fail(
                dec.pid,
                format!("frozen view fill {} is inconsistent or below quorum", frozen.size),
                Some(dec.decided_at),
            );
        }
        let step = record.steps.iter().find(|s| s.index == dec.decided_at && s.pid == dec.pid);
        match step.map(|s| &s.action) {
            Some(StepAction::Snapshot { view, decided: Some(v) })
                if *view == frozen.view && *v == dec.decided => {}
            _ => {
                return fail(
                    dec.pid,
                    "frozen view does not match the deciding snapshot step".to_string(),
                    Some(dec.decided_at),
                )
            }
        }
        let premature = record.steps.iter().any(|s| {
            s.pid == dec.pid
                && s.index < dec.decided_at
                && matches!(&s.action, StepAction::Snapshot { view, .. }
                    if view.non_bottom() >= quorum)
        });
        if premature {
            return fail(
                dec.pid,
                "an earlier snapshot already reached the freeze threshold".to_string(),
                Some(dec.decided_at),
            );
        }
        let own = match record.initial_values.get(&dec.pid) {
            Some(v) => *v,
            None => return fail(dec.pid, "decider has no initial value".to_string(), None),
        };
        let expected = decide_async(&frozen.view, own, frozen.size, record.cfg.t);
        if expected != dec.decided {
            return fail(
                dec.pid,
                format!("threshold rule yields {expected} but record says {}", dec.decided),
                Some(dec.decided_at),
            );
        }
    }
    Verdict::pass("snapshot-decisions")
}

/// Every decided domain value already fills at least x_min - t slots of the
/// smallest frozen view X_min (the one frozen earliest, hence contained in
/// every other frozen view).
pub fn check_snapshot_veto(record: &AsyncRunRecord) -> Verdict {
    let earliest = record
        .decisions
        .iter()
        .min_by_key(|d| d.decided_at)
        .and_then(|d| record.frozen.get(&d.pid));
    let min_view = match earliest {
        Some(f) => f,
        None => return Verdict::pass("snapshot-veto"),
    };
    let threshold = (min_view.size - record.cfg.t) as usize;
    for dec in &record.decisions {
        if !dec.decided.is_domain() {
            continue;
        }
        if min_view.view.count_of(dec.decided) < threshold {
            return Verdict::fail(
                "snapshot-veto",
                Evidence {
                    witnesses: alloc::vec![dec.pid],
                    values: alloc::vec![dec.decided],
                    round: Some(dec.decided_at),
                    note: format!(
                        "{} fills under {threshold} slots of the smallest view [{}]",
                        dec.decided, min_view.view
                    ),
                },
            );
        }
    }
    Verdict::pass("snapshot-veto")
}

/// A process whose frozen view is contained in a domain-decider's frozen
/// view never decides bottom.
pub fn check_bottom_monotonicity(record: &AsyncRunRecord) -> Verdict {
    for winner in &record.decisions {
        if !winner.decided.is_domain() {
            continue;
        }
        let wider = match record.frozen.get(&winner.pid) {
            Some(f) => f,
            None => continue,
        };
        for loser in &record.decisions {
            if loser.decided != Value::Bottom {
                continue;
            }
            if let Some(narrow) = record.frozen.get(&loser.pid) {
                if narrow.view.contained_in(&wider.view) {
                    return Verdict::fail(
                        "bottom-monotonicity",
                        Evidence {
                            witnesses: alloc::vec![winner.pid, loser.pid],
                            values: alloc::vec![winner.decided],
                            round: Some(loser.decided_at),
                            note: format!(
                                "{} decided bottom from a view inside {}'s deciding view",
                                loser.pid, winner.pid
                            ),
                        },
                    );
                }
            }
        }
    }
    Verdict::pass("bottom-monotonicity")
}

/// The standard verdict battery for a record of the given protocol, using
/// the protocol's decision bound.
pub fn standard_verdicts_sync(record: &SyncRunRecord) -> Vec<Verdict> {
    let k = record.cfg.k_bound().unwrap_or(u32::MAX);
    let mut out = alloc::vec![check_termination(record), check_validity(record)];
    match record.kind {
        crate::sync_engine::SyncRunKind::TwoRound => {
            out.push(check_agreement(record, k));
            out.push(check_round_count(record, 2));
        }
        crate::sync_engine::SyncRunKind::TrbOptimal => {
            out.push(check_domain_agreement(record, k));
            out.push(check_vector_equality(record));
            out.push(check_unmixed_decisions(record));
            out.push(check_round_count(record, record.cfg.t + 1));
        }
        crate::sync_engine::SyncRunKind::Broadcast { sender } => {
            out = check_trb(record, sender);
        }
    }
    out
}

/// The standard verdict battery for an asynchronous record.
pub fn standard_verdicts_async(record: &AsyncRunRecord) -> Vec<Verdict> {
    let k = record.cfg.k_bound().unwrap_or(u32::MAX);
    alloc::vec![
        check_termination(record),
        check_validity(record),
        check_domain_agreement(record, k),
        check_snapshot_history(record),
        check_snapshot_decisions(record),
        check_snapshot_veto(record),
        check_bottom_monotonicity(record),
    ]
}

/// True iff every verdict passes.
pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

/// Re-exported mode alias used by oracle callers.
pub type ChainValidityMode = ValidityMode;
