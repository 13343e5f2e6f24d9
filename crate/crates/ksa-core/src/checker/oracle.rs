//! Brute-force enumeration for small instances.
//!
//! Three spaces are supported. `TrbTemplates` drives one broadcast
//! instance through every template adversary: per round, per Byzantine
//! process, per correct recipient, the adversary either stays silent or
//! sends the best legally available chain for one of the candidate values
//! (receiver-valid, preferring chains the recipient has not signed, then
//! shortest). Byzantine processes additionally share all available chains
//! with each other every round, so multi-signature compositions appear at
//! the usual one-hop-per-round pace. Two prunings keep the space honest
//! but small: a value option is dropped when no receiver-valid chain
//! exists (indistinguishable from silence), or when the recipient already
//! received that value (delivery is idempotent).
//!
//! `SyncInputs` sweeps the agreement protocols over every input assignment
//! from a value list, every Byzantine subset within the fault budget, and
//! silent/equivocating behavior per Byzantine process.
//!
//! `AsyncSchedules` enumerates every interleaving of the snapshot protocol
//! for one input assignment, including up to t crash events; snapshots
//! that cannot reach the freeze threshold are skipped as no-ops. Each leaf
//! is re-executed through the real engine as an explicit schedule, so the
//! records checked are genuine engine output.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::authsig::{SignedChain, ValidityMode};
use crate::checker::{check_trb, standard_verdicts_async, standard_verdicts_sync, Verdict};
use crate::ksa_snapshot::{SnapshotAgreementFactory, SnapshotAgreementState};
use crate::ksa_trb::TrbOptimalFactory;
use crate::ksa_two_round::TwoRoundFactory;
use crate::model::{
    distinct_correct_decisions, distinct_correct_domain_decisions, ConfigError, ProcessId,
    Protocol, SystemConfig, Value,
};
use crate::scenarios::AdversarySpec;
use crate::shm_engine::{run_async, AsyncProcess, Schedule, SnapshotObject};
use crate::sync_engine::{
    run_sync, AdversaryCtx, AdversaryStrategy, Body, ProtocolFactory, RoundMessage, SyncEngine,
};
use crate::trb::BroadcastFactory;

/// What to enumerate.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSpace {
    /// Template adversaries against one broadcast instance.
    TrbTemplates { sender: ProcessId, values: Vec<Value>, mode: ValidityMode },
    /// Input assignments x Byzantine subsets x fixed behaviors for the
    /// synchronous agreement protocol named by the config.
    SyncInputs { values: Vec<Value> },
    /// All interleavings and crash patterns for one input assignment.
    AsyncSchedules { initial_values: BTreeMap<ProcessId, Value> },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct OracleViolation {
    /// Which enumerated point failed, precisely enough to replay by hand.
    pub context: String,
    /// The failing verdicts only.
    pub verdicts: Vec<Verdict>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct OracleSummary {
    pub cfg: SystemConfig,
    pub space: String,
    /// Leaves actually executed.
    pub explored: u64,
    /// Worst case distinct decisions among correct processes, bottom included.
    pub max_distinct: u32,
    /// Worst case distinct domain decisions among correct processes.
    pub max_distinct_domain: u32,
    pub violations: Vec<OracleViolation>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OracleError {
    Config(ConfigError),
    /// Synchronous enumeration is only tractable for tiny systems.
    TooManyProcesses { n: u32, max: u32 },
    /// Refusal: the space exceeds the leaf budget. `explored` is the count
    /// reached before refusing, so the space holds more than that.
    SpaceTooLarge { explored: u64, bound: u64 },
    /// The space does not fit the configured protocol.
    Unsupported(String),
}

impl core::fmt::Display for OracleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleError::Config(e) => write!(f, "{e}"),
            OracleError::TooManyProcesses { n, max } => {
                write!(f, "exhaustive enumeration supports n <= {max}, got n={n}")
            }
            OracleError::SpaceTooLarge { explored, bound } => {
                write!(f, "space exceeds the budget: more than {explored} leaves (bound {bound})")
            }
            OracleError::Unsupported(s) => write!(f, "{s}"),
        }
    }
}

impl core::error::Error for OracleError {}

impl From<ConfigError> for OracleError {
    fn from(e: ConfigError) -> Self {
        OracleError::Config(e)
    }
}

const SYNC_ORACLE_MAX_N: u32 = 4;

struct Acc {
    explored: u64,
    bound: u64,
    max_distinct: usize,
    max_distinct_domain: usize,
    violations: Vec<OracleViolation>,
}

impl Acc {
    fn new(bound: u64) -> Self {
        Acc { explored: 0, bound, max_distinct: 0, max_distinct_domain: 0, violations: Vec::new() }
    }

    fn leaf(
        &mut self,
        decisions: &[crate::model::DecisionRecord],
        verdicts: Vec<Verdict>,
        context: impl FnOnce() -> String,
    ) -> Result<(), OracleError> {
        self.explored += 1;
        if self.explored > self.bound {
            return Err(OracleError::SpaceTooLarge { explored: self.explored, bound: self.bound });
        }
        self.max_distinct = self.max_distinct.max(distinct_correct_decisions(decisions).len());
        self.max_distinct_domain =
            self.max_distinct_domain.max(distinct_correct_domain_decisions(decisions).len());
        let failed: Vec<Verdict> = verdicts.into_iter().filter(|v| !v.pass).collect();
        if !failed.is_empty() {
            self.violations.push(OracleViolation { context: context(), verdicts: failed });
        }
        Ok(())
    }

    fn into_summary(self, cfg: SystemConfig, space: String) -> OracleSummary {
        OracleSummary {
            cfg,
            space,
            explored: self.explored,
            max_distinct: self.max_distinct as u32,
            max_distinct_domain: self.max_distinct_domain as u32,
            violations: self.violations,
        }
    }
}

/// Exhaustively explores the space, runs every leaf, applies the relevant
/// checkers, and reports the worst distinct-decision counts plus all
/// violations. Refuses with [`OracleError::SpaceTooLarge`] once more than
/// `bound` leaves would be needed.
pub fn oracle_enumerate(
    cfg: SystemConfig,
    space: OracleSpace,
    bound: u64,
) -> Result<OracleSummary, OracleError> {
    match space {
        OracleSpace::TrbTemplates { sender, values, mode } => {
            trb_template_oracle(cfg, sender, &values, mode, bound)
        }
        OracleSpace::SyncInputs { values } => sync_input_oracle(cfg, &values, bound),
        OracleSpace::AsyncSchedules { initial_values } => {
            async_schedule_oracle(cfg, initial_values, bound)
        }
    }
}

/// Round script: fixed messages per controlled process, gossip included.
struct ScriptedAdversary {
    controlled: BTreeSet<ProcessId>,
    msgs: BTreeMap<ProcessId, Vec<RoundMessage>>,
}

impl AdversaryStrategy for ScriptedAdversary {
    fn controlled(&self) -> BTreeSet<ProcessId> {
        self.controlled.clone()
    }
    fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
        self.msgs.remove(&ctx.byz).unwrap_or_default()
    }
}

fn subsets_up_to(n: u32, t: u32) -> Vec<BTreeSet<ProcessId>> {
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() <= t)
        .map(|mask| {
            (0..n).filter(|i| mask & (1 << i) != 0).map(ProcessId).collect::<BTreeSet<_>>()
        })
        .collect()
}

fn trb_template_oracle(
    cfg: SystemConfig,
    sender: ProcessId,
    values: &[Value],
    mode: ValidityMode,
    bound: u64,
) -> Result<OracleSummary, OracleError> {
    if cfg.n == 0 {
        return Err(OracleError::Config(ConfigError::NoProcesses));
    }
    if cfg.t >= cfg.n {
        return Err(OracleError::Config(ConfigError::FaultBudgetTooLarge { n: cfg.n, t: cfg.t }));
    }
    if cfg.n > SYNC_ORACLE_MAX_N {
        return Err(OracleError::TooManyProcesses { n: cfg.n, max: SYNC_ORACLE_MAX_N });
    }
    if sender.index() >= cfg.n as usize || values.iter().any(|v| !v.is_domain()) {
        return Err(OracleError::Unsupported(
            "template space needs an in-range sender and domain values".to_string(),
        ));
    }

    let mut acc = Acc::new(bound);
    for byz in subsets_up_to(cfg.n, cfg.t) {
        let sender_correct = !byz.contains(&sender);
        let sender_values: &[Value] = if sender_correct { values } else { &values[..1] };
        for &sv in sender_values {
            let initial: BTreeMap<ProcessId, Value> =
                crate::model::all_processes(cfg.n).map(|p| (p, sv)).collect();
            let factory = BroadcastFactory { sender, mode };
            let engine = SyncEngine::new(&factory, byz.clone(), cfg, initial, 0)
                .map_err(|e| OracleError::Unsupported(e.to_string()))?;
            let correct: Vec<ProcessId> =
                crate::model::all_processes(cfg.n).filter(|p| !byz.contains(p)).collect();
            let base = format!(
                "byz={{{}}} sender_value={sv}",
                byz.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
            );
            let mut path = Vec::new();
            dfs_trb(
                engine, &byz, &correct, sender, sender_correct, sv, values, mode, &base,
                &mut path, &mut acc,
            )?;
        }
    }
    Ok(acc.into_summary(cfg, format!("trb-templates(sender={sender}, mode={mode:?})")))
}

/// Values already received by (or initially known to) `c`.
fn known_payloads(
    engine: &SyncEngine,
    c: ProcessId,
    sender: ProcessId,
    sender_correct: bool,
    sender_value: Value,
) -> BTreeSet<Value> {
    let mut known: BTreeSet<Value> =
        engine.knowledge(c).received().map(|chain| chain.payload()).collect();
    if sender_correct && c == sender {
        known.insert(sender_value);
    }
    known
}

#[allow(clippy::too_many_arguments)]
fn dfs_trb(
    engine: SyncEngine,
    byz: &BTreeSet<ProcessId>,
    correct: &[ProcessId],
    sender: ProcessId,
    sender_correct: bool,
    sender_value: Value,
    values: &[Value],
    mode: ValidityMode,
    base: &str,
    path: &mut Vec<String>,
    acc: &mut Acc,
) -> Result<(), OracleError> {
    if engine.finished() {
        let record = engine.finish();
        let verdicts = check_trb(&record, sender);
        return acc.leaf(&record.decisions, verdicts, || format!("{base} [{}]", path.join(" ")));
    }
    let round = engine.current_round();

    // One option list per (byzantine, correct recipient) slot; None is
    // silence. A value option exists only when a receiver-valid chain is
    // available and the recipient does not already have the value.
    let mut slots: Vec<(ProcessId, ProcessId, Vec<Option<SignedChain>>)> = Vec::new();
    for &q in byz {
        for &c in correct {
            let known = known_payloads(&engine, c, sender, sender_correct, sender_value);
            let mut options: Vec<Option<SignedChain>> = alloc::vec![None];
            for &v in values {
                if known.contains(&v) {
                    continue;
                }
                if let Some(chain) =
                    engine.knowledge(q).canonical_injection(q, v, sender, round, c, mode)
                {
                    options.push(Some(chain));
                }
            }
            slots.push((q, c, options));
        }
    }

    // Gossip: every Byzantine process shares every chain it could emit with
    // its peers, so compositions are available one round later.
    let mut gossip: BTreeMap<ProcessId, Vec<RoundMessage>> = BTreeMap::new();
    for &q in byz {
        let mut chains: Vec<SignedChain> =
            values.iter().flat_map(|&v| engine.knowledge(q).emittable(q, v)).collect();
        chains.sort();
        chains.dedup();
        if chains.is_empty() {
            continue;
        }
        for &q2 in byz {
            if q2 != q {
                gossip.entry(q).or_default().push(RoundMessage {
                    from: q,
                    to: q2,
                    round,
                    body: Body::Relay { instance: sender, chains: chains.clone() },
                });
            }
        }
    }

    // Mixed-radix walk over the per-slot choices.
    let mut digits = alloc::vec![0usize; slots.len()];
    loop {
        let mut msgs = gossip.clone();
        let mut label = Vec::new();
        for (slot, digit) in slots.iter().zip(&digits) {
            let (q, c, options) = slot;
            if let Some(chain) = &options[*digit] {
                label.push(format!("{q}>{c}:{}", chain.payload()));
                msgs.entry(*q).or_default().push(RoundMessage {
                    from: *q,
                    to: *c,
                    round,
                    body: Body::Relay { instance: sender, chains: alloc::vec![chain.clone()] },
                });
            }
        }
        let mut script = ScriptedAdversary { controlled: byz.clone(), msgs };
        let mut branch = engine.clone();
        branch.run_round(&mut script);
        path.push(format!("r{round}:{}", if label.is_empty() { "-".to_string() } else { label.join(",") }));
        dfs_trb(
            branch, byz, correct, sender, sender_correct, sender_value, values, mode, base,
            path, acc,
        )?;
        path.pop();

        // Advance the digit counter; stop after the last combination.
        let mut i = 0;
        loop {
            if i == slots.len() {
                return Ok(());
            }
            digits[i] += 1;
            if digits[i] < slots[i].2.len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn sync_input_oracle(
    cfg: SystemConfig,
    values: &[Value],
    bound: u64,
) -> Result<OracleSummary, OracleError> {
    cfg.validate()?;
    if cfg.n > SYNC_ORACLE_MAX_N {
        return Err(OracleError::TooManyProcesses { n: cfg.n, max: SYNC_ORACLE_MAX_N });
    }
    if values.is_empty() || values.iter().any(|v| !v.is_domain()) {
        return Err(OracleError::Unsupported("input sweep needs domain values".to_string()));
    }
    let factory: alloc::boxed::Box<dyn ProtocolFactory> = match cfg.protocol {
        Protocol::TwoRound => alloc::boxed::Box::new(TwoRoundFactory),
        Protocol::TrbOptimal => alloc::boxed::Box::new(TrbOptimalFactory::new()),
        Protocol::AsyncSnapshot => {
            return Err(OracleError::Unsupported(
                "input sweep drives the synchronous protocols".to_string(),
            ))
        }
    };

    let n = cfg.n as usize;
    let mut acc = Acc::new(bound);
    let mut assignment = alloc::vec![0usize; n];
    'assignments: loop {
        let initial: BTreeMap<ProcessId, Value> =
            assignment.iter().enumerate().map(|(i, &v)| (ProcessId(i as u32), values[v])).collect();
        for byz in subsets_up_to(cfg.n, cfg.t) {
            // Per-Byzantine behavior: silent, or equivocate when two
            // values are available.
            let behaviors: Vec<Vec<AdversarySpec>> = byz
                .iter()
                .map(|&q| {
                    let mut b = alloc::vec![AdversarySpec::Silent { ids: alloc::vec![q] }];
                    if values.len() >= 2 {
                        b.push(AdversarySpec::Equivocator {
                            id: q,
                            first: values[0],
                            second: values[1],
                        });
                    }
                    b
                })
                .collect();
            let mut digits = alloc::vec![0usize; behaviors.len()];
            loop {
                let parts: Vec<AdversarySpec> =
                    behaviors.iter().zip(&digits).map(|(b, &d)| b[d].clone()).collect();
                let spec = AdversarySpec::Composite { parts };
                let mut strategy =
                    spec.build().map_err(|e| OracleError::Unsupported(e.to_string()))?;
                let record =
                    run_sync(factory.as_ref(), strategy.as_mut(), cfg, initial.clone(), 0)
                        .map_err(|e| OracleError::Unsupported(e.to_string()))?;
                let verdicts = standard_verdicts_sync(&record);
                acc.leaf(&record.decisions, verdicts, || {
                    format!(
                        "inputs={:?} byz={:?} behaviors={:?}",
                        assignment, byz, digits
                    )
                })?;
                let mut i = 0;
                loop {
                    if i == behaviors.len() {
                        break;
                    }
                    digits[i] += 1;
                    if digits[i] < behaviors[i].len() {
                        break;
                    }
                    digits[i] = 0;
                    i += 1;
                }
                if digits.iter().all(|&d| d == 0) {
                    break;
                }
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                break 'assignments;
            }
            assignment[i] += 1;
            if assignment[i] < values.len() {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
    Ok(acc.into_summary(cfg, format!("sync-inputs({})", crate::model::render_values(values))))
}

struct AsyncNode {
    obj: SnapshotObject,
    states: Vec<SnapshotAgreementState>,
    grants: Vec<ProcessId>,
    plan: BTreeMap<ProcessId, u64>,
    steps_taken: Vec<u64>,
    crashed: BTreeSet<ProcessId>,
}

fn async_schedule_oracle(
    cfg: SystemConfig,
    initial_values: BTreeMap<ProcessId, Value>,
    bound: u64,
) -> Result<OracleSummary, OracleError> {
    cfg.validate()?;
    let ids: BTreeSet<ProcessId> = crate::model::all_processes(cfg.n).collect();
    if initial_values.keys().copied().collect::<BTreeSet<_>>() != ids
        || initial_values.values().any(|v| !v.is_domain())
    {
        return Err(OracleError::Unsupported(
            "schedule enumeration needs one domain value per process".to_string(),
        ));
    }
    let root = AsyncNode {
        obj: SnapshotObject::new(cfg.n),
        states: crate::model::all_processes(cfg.n)
            .map(|p| SnapshotAgreementState::new(p, &cfg, initial_values[&p]))
            .collect(),
        grants: Vec::new(),
        plan: BTreeMap::new(),
        steps_taken: alloc::vec![0; cfg.n as usize],
        crashed: BTreeSet::new(),
    };
    let mut acc = Acc::new(bound);
    dfs_async(root, &cfg, &initial_values, &mut acc)?;
    Ok(acc.into_summary(cfg, "async-schedules".to_string()))
}

fn dfs_async(
    node: AsyncNode,
    cfg: &SystemConfig,
    initial_values: &BTreeMap<ProcessId, Value>,
    acc: &mut Acc,
) -> Result<(), OracleError> {
    let quorum = (cfg.n - cfg.t) as usize;
    let pending: Vec<ProcessId> = crate::model::all_processes(cfg.n)
        .filter(|p| !node.crashed.contains(p) && node.states[p.index()].decision().is_none())
        .collect();

    if pending.is_empty() {
        // Leaf: re-execute through the engine so the checked record is
        // genuine engine output.
        let record = run_async(
            &SnapshotAgreementFactory,
            *cfg,
            initial_values.clone(),
            node.plan.clone(),
            Schedule::Explicit(node.grants.clone()),
            0,
        )
        .map_err(|e| OracleError::Unsupported(e.to_string()))?;
        let verdicts = standard_verdicts_async(&record);
        return acc.leaf(&record.decisions, verdicts, || {
            format!("schedule={:?} crashes={:?}", node.grants, node.plan)
        });
    }

    for &p in &pending {
        let written = node.obj.registers().get(p) != Value::Bottom;
        // A snapshot below the freeze threshold is a pure no-op; skip it.
        let actionable = !written || node.obj.registers().non_bottom() >= quorum;
        if actionable {
            let mut next = AsyncNode {
                obj: node.obj.clone(),
                states: node.states.clone(),
                grants: node.grants.clone(),
                plan: node.plan.clone(),
                steps_taken: node.steps_taken.clone(),
                crashed: node.crashed.clone(),
            };
            next.states[p.index()].step(&mut next.obj);
            next.steps_taken[p.index()] += 1;
            next.grants.push(p);
            dfs_async(next, cfg, initial_values, acc)?;
        }
        if node.plan.len() < cfg.t as usize {
            let mut next = AsyncNode {
                obj: node.obj.clone(),
                states: node.states.clone(),
                grants: node.grants.clone(),
                plan: node.plan.clone(),
                steps_taken: node.steps_taken.clone(),
                crashed: node.crashed.clone(),
            };
            next.plan.insert(p, node.steps_taken[p.index()]);
            next.grants.push(p);
            next.crashed.insert(p);
            dfs_async(next, cfg, initial_values, acc)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Protocol;

    fn p(i: u32) -> ProcessId {
        ProcessId(i)
    }

    fn d(v: u32) -> Value {
        Value::Domain(v)
    }

    fn trb_space(mode: ValidityMode) -> OracleSpace {
        OracleSpace::TrbTemplates { sender: p(0), values: alloc::vec![d(1), d(2)], mode }
    }

    #[test]
    fn trb_templates_are_clean_at_three_processes() {
        let cfg = SystemConfig { n: 3, t: 1, protocol: Protocol::TrbOptimal };
        let summary =
            oracle_enumerate(cfg, trb_space(ValidityMode::Strict), 100_000).unwrap();
        assert!(summary.violations.is_empty(), "{:?}", summary.violations.first());
        assert!(summary.explored > 1);
    }

    #[test]
    fn dropping_the_length_rule_surfaces_a_split() {
        // The receive-round length requirement is what blocks a one-
        // signature value injection in the final round; without it the
        // oracle finds agreement violations.
        let cfg = SystemConfig { n: 3, t: 1, protocol: Protocol::TrbOptimal };
        let summary =
            oracle_enumerate(cfg, trb_space(ValidityMode::NoLengthRule), 100_000).unwrap();
        assert!(
            summary
                .violations
                .iter()
                .any(|v| v.verdicts.iter().any(|x| x.property.starts_with("trb-agreement"))),
            "expected an agreement split, got {:?}",
            summary.violations
        );
    }

    #[test]
    fn refusal_reports_the_bound() {
        let cfg = SystemConfig { n: 4, t: 2, protocol: Protocol::TrbOptimal };
        match oracle_enumerate(cfg, trb_space(ValidityMode::Strict), 5) {
            Err(OracleError::SpaceTooLarge { explored, bound: 5 }) => assert_eq!(explored, 6),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn input_sweep_matches_the_delivery_bound_at_four_processes() {
        let cfg = SystemConfig { n: 4, t: 2, protocol: Protocol::TrbOptimal };
        let summary = oracle_enumerate(
            cfg,
            OracleSpace::SyncInputs { values: alloc::vec![d(1), d(2)] },
            1_000_000,
        )
        .unwrap();
        assert!(summary.violations.is_empty(), "{:?}", summary.violations.first());
        assert_eq!(summary.max_distinct_domain, 2);
    }

    #[test]
    fn schedule_enumeration_matches_the_async_bound() {
        let cfg = SystemConfig { n: 3, t: 1, protocol: Protocol::AsyncSnapshot };
        let initial: BTreeMap<ProcessId, Value> =
            [(p(0), d(1)), (p(1), d(2)), (p(2), d(3))].into();
        let summary = oracle_enumerate(
            cfg,
            OracleSpace::AsyncSchedules { initial_values: initial },
            1_000_000,
        )
        .unwrap();
        assert!(summary.violations.is_empty(), "{:?}", summary.violations.first());
        assert_eq!(summary.max_distinct_domain, 2);
        assert!(summary.explored > 10);
    }
}
