//! Lock-step synchronous round engine over reliable channels.
//!
//! Each round every process (in id order) first produces its outgoing
//! messages, then all messages of the round are delivered and absorbed.
//! Correct processes run their protocol machine directly. For each
//! adversary-controlled process the engine still hosts the honest machine,
//! hands the adversary that machine's would-be output together with the
//! process's last inbox and chain knowledge, and lets it substitute
//! arbitrary messages, subject to two engine rules:
//!
//! * forgery guard: every signature chain in an emitted message must be
//!   derivable from what the emitter received plus its own signature;
//!   offending messages are dropped and logged,
//! * slot uniqueness: at most one body per (from, to, round, slot); the
//!   last one emitted wins.
//!
//! A round budget (default `t + 2`) converts livelock into an explicit
//! non-termination verdict; the engine never hangs. Runs are pure functions
//! of (factory, adversary, config, initial values, seed), so records replay
//! bit-identically.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::authsig::{ChainKnowledge, SignedChain};
use crate::model::{ConfigError, DecisionRecord, ProcessId, SystemConfig, Value, ViewVector};

/// Message payload variants used by the synchronous protocols.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    /// A signed value announcement.
    Value(SignedChain),
    /// An echo vector: slot `j` claims what `p_j` announced (None = nothing).
    Vector(Vec<Option<SignedChain>>),
    /// Relay of broadcast chains for one instance.
    Relay { instance: ProcessId, chains: Vec<SignedChain> },
}

impl Body {
    /// Slot identity for the at-most-one-body-per-slot rule.
    pub fn slot(&self) -> u64 {
        match self {
            Body::Value(_) => 0,
            Body::Vector(_) => 1,
            Body::Relay { instance, .. } => 2 + u64::from(instance.0),
        }
    }

    /// Every chain the body carries, for the forgery guard.
    pub fn chains(&self) -> Vec<&SignedChain> {
        match self {
            Body::Value(c) => alloc::vec![c],
            Body::Vector(slots) => slots.iter().flatten().collect(),
            Body::Relay { chains, .. } => chains.iter().collect(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RoundMessage {
    pub from: ProcessId,
    pub to: ProcessId,
    pub round: u32,
    pub body: Body,
}

/// An adversary emission the forgery guard refused to deliver.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ForgeryRejection {
    pub from: ProcessId,
    pub to: ProcessId,
    pub round: u32,
    pub chain: SignedChain,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: u32,
    pub delivered: Vec<RoundMessage>,
    pub rejected: Vec<ForgeryRejection>,
}

/// What a protocol machine exposes once a run ends.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ProcessReport {
    pub decision: Option<Value>,
    /// Final per-process vector (echo-filter output or delivery vector).
    pub vector: Option<ViewVector>,
    /// Per-instance broadcast deliveries, when the protocol runs any.
    pub deliveries: BTreeMap<ProcessId, Value>,
}

/// A per-process synchronous protocol machine.
pub trait SyncProcess {
    /// Messages to send at the start of `round` (1-based).
    fn emit(&mut self, round: u32) -> Vec<(ProcessId, Body)>;
    /// Consumes the round's inbox after delivery.
    fn absorb(&mut self, round: u32, inbox: &[RoundMessage]);
    /// `Some` once the machine has irrevocably decided.
    fn decision(&self) -> Option<Value>;
    fn report(&self) -> ProcessReport;
    fn clone_box(&self) -> Box<dyn SyncProcess>;
}

impl Clone for Box<dyn SyncProcess> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Which protocol stack a record came from.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncRunKind {
    /// A single broadcast instance with a designated sender.
    Broadcast { sender: ProcessId },
    TwoRound,
    TrbOptimal,
}

impl fmt::Display for SyncRunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyncRunKind::Broadcast { sender } => write!(f, "broadcast(sender={sender})"),
            SyncRunKind::TwoRound => write!(f, "two-round"),
            SyncRunKind::TrbOptimal => write!(f, "trb-optimal"),
        }
    }
}

/// Builds the machine for each process.
pub trait ProtocolFactory {
    fn kind(&self) -> SyncRunKind;
    fn create(&self, me: ProcessId, cfg: &SystemConfig, initial: Value) -> Box<dyn SyncProcess>;
    /// Rounds after which an undecided run is declared non-terminating.
    fn round_budget(&self, cfg: &SystemConfig) -> u32 {
        cfg.t + 2
    }
}

/// Everything an adversary sees when asked for one controlled process's
/// messages of the current round.
pub struct AdversaryCtx<'a> {
    pub byz: ProcessId,
    pub round: u32,
    /// Messages this process received in the previous round.
    pub inbox: &'a [RoundMessage],
    /// What the hosted honest machine would send this round.
    pub honest: Vec<RoundMessage>,
    /// Chains this process may legally emit.
    pub knowledge: &'a ChainKnowledge,
    pub cfg: &'a SystemConfig,
    /// All adversary-controlled processes.
    pub peers: &'a BTreeSet<ProcessId>,
}

/// A strategy for the adversary-controlled processes. Called once per
/// controlled process per round, in process-id order.
pub trait AdversaryStrategy {
    fn controlled(&self) -> BTreeSet<ProcessId>;
    fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage>;
}

/// The empty adversary: every process is correct.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAdversary;

impl AdversaryStrategy for NoAdversary {
    fn controlled(&self) -> BTreeSet<ProcessId> {
        BTreeSet::new()
    }

    fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
        ctx.honest
    }
}

/// Complete, replayable trace of a synchronous run.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SyncRunRecord {
    pub kind: SyncRunKind,
    pub cfg: SystemConfig,
    pub seed: u64,
    pub initial_values: BTreeMap<ProcessId, Value>,
    pub faulty: BTreeSet<ProcessId>,
    pub rounds: Vec<RoundLog>,
    pub rounds_executed: u32,
    pub round_budget: u32,
    pub non_termination: bool,
    /// One entry per decided machine; correct processes all appear unless
    /// the run failed to terminate.
    pub decisions: Vec<DecisionRecord>,
    /// Final per-process vectors (echo output or delivery vector).
    pub vectors: BTreeMap<ProcessId, ViewVector>,
    /// process -> broadcast instance -> delivered value.
    pub deliveries: BTreeMap<ProcessId, BTreeMap<ProcessId, Value>>,
}

impl SyncRunRecord {
    pub fn is_correct(&self, pid: ProcessId) -> bool {
        !self.faulty.contains(&pid)
    }

    pub fn correct_processes(&self) -> impl Iterator<Item = ProcessId> + '_ {
        crate::model::all_processes(self.cfg.n).filter(|p| !self.faulty.contains(p))
    }

    /// Deliveries of one broadcast instance across processes.
    pub fn instance_deliveries(&self, instance: ProcessId) -> BTreeMap<ProcessId, Value> {
        self.deliveries
            .iter()
            .filter_map(|(pid, per)| per.get(&instance).map(|v| (*pid, *v)))
            .collect()
    }

    /// Total rejected emissions across all rounds.
    pub fn forgery_rejections(&self) -> usize {
        self.rounds.iter().map(|r| r.rejected.len()).sum()
    }
}

/// Run rejected before the first round.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EngineError {
    Config(ConfigError),
    /// Initial values must cover exactly the processes `p0..p(n-1)`.
    BadInitialValues,
    /// Initial values must be domain tokens.
    NonDomainInitial(ProcessId),
    /// The adversary controls a process outside the system.
    UnknownControlled(ProcessId),
    /// More controlled processes than the fault budget.
    TooManyControlled { controlled: usize, t: u32 },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Config(e) => write!(f, "{e}"),
            EngineError::BadInitialValues => {
                write!(f, "initial values must cover exactly p0..p(n-1)")
            }
            EngineError::NonDomainInitial(p) => {
                write!(f, "initial value of {p} must be a domain token")
            }
            EngineError::UnknownControlled(p) => write!(f, "controlled process {p} out of range"),
            EngineError::TooManyControlled { controlled, t } => {
                write!(f, "{controlled} controlled processes exceed fault budget t={t}")
            }
        }
    }
}

impl core::error::Error for EngineError {}

impl From<ConfigError> for EngineError {
    fn from(e: ConfigError) -> Self {
        EngineError::Config(e)
    }
}

/// Resumable engine state; the exhaustive oracle clones it at branch points.
#[derive(Clone)]
pub struct SyncEngine {
    cfg: SystemConfig,
    kind: SyncRunKind,
    seed: u64,
    initial_values: BTreeMap<ProcessId, Value>,
    faulty: BTreeSet<ProcessId>,
    processes: Vec<Box<dyn SyncProcess>>,
    knowledge: Vec<ChainKnowledge>,
    prev_inbox: Vec<Vec<RoundMessage>>,
    rounds: Vec<RoundLog>,
    decided_at: Vec<Option<u32>>,
    next_round: u32,
    budget: u32,
    done: bool,
}

impl SyncEngine {
    pub fn new(
        factory: &dyn ProtocolFactory,
        controlled: BTreeSet<ProcessId>,
        cfg: SystemConfig,
        initial_values: BTreeMap<ProcessId, Value>,
        seed: u64,
    ) -> Result<Self, EngineError> {
        if cfg.n == 0 {
            return Err(EngineError::Config(ConfigError::NoProcesses));
        }
        if cfg.t >= cfg.n {
            return Err(EngineError::Config(ConfigError::FaultBudgetTooLarge {
                n: cfg.n,
                t: cfg.t,
            }));
        }
        let ids: BTreeSet<ProcessId> = crate::model::all_processes(cfg.n).collect();
        if initial_values.keys().copied().collect::<BTreeSet<_>>() != ids {
            return Err(EngineError::BadInitialValues);
        }
        if let Some((pid, _)) = initial_values.iter().find(|(_, v)| !v.is_domain()) {
            return Err(EngineError::NonDomainInitial(*pid));
        }
        if let Some(p) = controlled.iter().find(|p| p.index() >= cfg.n as usize) {
            return Err(EngineError::UnknownControlled(*p));
        }
        if controlled.len() > cfg.t as usize {
            return Err(EngineError::TooManyControlled { controlled: controlled.len(), t: cfg.t });
        }
        let processes: Vec<_> = crate::model::all_processes(cfg.n)
            .map(|p| factory.create(p, &cfg, initial_values[&p]))
            .collect();
        let n = cfg.n as usize;
        Ok(SyncEngine {
            budget: factory.round_budget(&cfg),
            kind: factory.kind(),
            cfg,
            seed,
            initial_values,
            faulty: controlled,
            processes,
            knowledge: alloc::vec![ChainKnowledge::new(); n],
            prev_inbox: alloc::vec![Vec::new(); n],
            rounds: Vec::new(),
            decided_at: alloc::vec![None; n],
            next_round: 1,
            done: false,
        })
    }

    pub fn cfg(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn current_round(&self) -> u32 {
        self.next_round
    }

    pub fn knowledge(&self, pid: ProcessId) -> &ChainKnowledge {
        &self.knowledge[pid.index()]
    }

    pub fn faulty(&self) -> &BTreeSet<ProcessId> {
        &self.faulty
    }

    /// True once all correct processes decided or the budget ran out.
    pub fn finished(&self) -> bool {
        self.done || self.next_round > self.budget
    }

    /// Executes one full round. Returns [`Self::finished`] afterwards.
    pub fn run_round(&mut self, adversary: &mut dyn AdversaryStrategy) -> bool {
        debug_assert!(!self.finished());
        let n = self.cfg.n as usize;
        let round = self.next_round;

        let mut slots: BTreeMap<(ProcessId, ProcessId, u64), RoundMessage> = BTreeMap::new();
        let mut rejected = Vec::new();
        for idx in 0..n {
            let pid = ProcessId(idx as u32);
            let honest: Vec<RoundMessage> = self.processes[idx]
                .emit(round)
                .into_iter()
                .map(|(to, body)| RoundMessage { from: pid, to, round, body })
                .collect();
            let emitted = if self.faulty.contains(&pid) {
                adversary.on_round(AdversaryCtx {
                    byz: pid,
                    round,
                    inbox: &self.prev_inbox[idx],
                    honest,
                    knowledge: &self.knowledge[idx],
                    cfg: &self.cfg,
                    peers: &self.faulty,
                })
            } else {
                honest
            };
            for mut msg in emitted {
                msg.from = pid;
                msg.round = round;
                if msg.to.index() >= n {
                    continue;
                }
                if let Some(bad) =
                    msg.body.chains().into_iter().find(|c| !self.knowledge[idx].may_emit(pid, c))
                {
                    rejected.push(ForgeryRejection {
                        from: pid,
                        to: msg.to,
                        round,
                        chain: bad.clone(),
                    });
                    continue;
                }
                slots.insert((msg.from, msg.to, msg.body.slot()), msg);
            }
        }

        let delivered: Vec<RoundMessage> = slots.into_values().collect();
        let mut inbox: Vec<Vec<RoundMessage>> = alloc::vec![Vec::new(); n];
        for msg in &delivered {
            for chain in msg.body.chains() {
                self.knowledge[msg.to.index()].grant(chain);
            }
            inbox[msg.to.index()].push(msg.clone());
        }
        for idx in 0..n {
            self.processes[idx].absorb(round, &inbox[idx]);
            if self.decided_at[idx].is_none() && self.processes[idx].decision().is_some() {
                self.decided_at[idx] = Some(round);
            }
        }

        self.rounds.push(RoundLog { round, delivered, rejected });
        self.prev_inbox = inbox;
        self.next_round += 1;
        self.done = (0..n)
            .all(|i| self.faulty.contains(&ProcessId(i as u32)) || self.decided_at[i].is_some());
        self.finished()
    }

    /// Closes the run and produces its record.
    pub fn finish(self) -> SyncRunRecord {
        let rounds_executed = self.next_round - 1;
        let mut decisions = Vec::new();
        let mut vectors = BTreeMap::new();
        let mut deliveries = BTreeMap::new();
        for (idx, proc) in self.processes.iter().enumerate() {
            let pid = ProcessId(idx as u32);
            let report = proc.report();
            if let (Some(v), Some(at)) = (report.decision, self.decided_at[idx]) {
                decisions.push(DecisionRecord {
                    pid,
                    decided: v,
                    decided_at: u64::from(at),
                    correct: !self.faulty.contains(&pid),
                });
            }
            if let Some(vec) = report.vector {
                vectors.insert(pid, vec);
            }
            if !report.deliveries.is_empty() {
                deliveries.insert(pid, report.deliveries);
            }
        }
        SyncRunRecord {
            kind: self.kind,
            cfg: self.cfg,
            seed: self.seed,
            initial_values: self.initial_values,
            faulty: self.faulty,
            non_termination: !self.done,
            rounds: self.rounds,
            rounds_executed,
            round_budget: self.budget,
            decisions,
            vectors,
            deliveries,
        }
    }
}

/// Runs a full synchronous execution to completion (or budget exhaustion).
pub fn run_sync(
    factory: &dyn ProtocolFactory,
    adversary: &mut dyn AdversaryStrategy,
    cfg: SystemConfig,
    initial_values: BTreeMap<ProcessId, Value>,
    seed: u64,
) -> Result<SyncRunRecord, EngineError> {
    let mut engine = SyncEngine::new(factory, adversary.controlled(), cfg, initial_values, seed)?;
    while !engine.finished() {
        engine.run_round(adversary);
    }
    Ok(engine.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Protocol;

    /// Announces its value each round, never decides.
    #[derive(Clone)]
    struct Staller {
        me: ProcessId,
        value: Value,
    }

    impl SyncProcess for Staller {
        fn emit(&mut self, _round: u32) -> Vec<(ProcessId, Body)> {
            let cap = crate::authsig::SigningCapability::issue(self.me);
            let chain = crate::authsig::sign(&cap, self.value).unwrap();
            alloc::vec![(ProcessId(0), Body::Value(chain))]
        }
        fn absorb(&mut self, _round: u32, _inbox: &[RoundMessage]) {}
        fn decision(&self) -> Option<Value> {
            None
        }
        fn report(&self) -> ProcessReport {
            ProcessReport::default()
        }
        fn clone_box(&self) -> Box<dyn SyncProcess> {
            Box::new(self.clone())
        }
    }

    struct StallFactory;

    impl ProtocolFactory for StallFactory {
        fn kind(&self) -> SyncRunKind {
            SyncRunKind::Broadcast { sender: ProcessId(0) }
        }
        fn create(&self, me: ProcessId, _cfg: &SystemConfig, v: Value) -> Box<dyn SyncProcess> {
            Box::new(Staller { me, value: v })
        }
    }

    fn values(n: u32) -> BTreeMap<ProcessId, Value> {
        crate::model::all_processes(n).map(|p| (p, Value::Domain(p.0 + 1))).collect()
    }

    fn cfg(n: u32, t: u32) -> SystemConfig {
        SystemConfig { n, t, protocol: Protocol::TrbOptimal }
    }

    #[test]
    fn budget_turns_stall_into_non_termination() {
        let record =
            run_sync(&StallFactory, &mut NoAdversary, cfg(3, 1), values(3), 0).unwrap();
        assert!(record.non_termination);
        assert_eq!(record.rounds_executed, 3); // t + 2
        assert!(record.decisions.is_empty());
    }

    #[test]
    fn engine_rejects_bad_setups() {
        let mut vs = values(3);
        assert!(matches!(
            run_sync(&StallFactory, &mut NoAdversary, cfg(3, 3), vs.clone(), 0),
            Err(EngineError::Config(ConfigError::FaultBudgetTooLarge { .. }))
        ));
        vs.insert(ProcessId(1), Value::Bottom);
        assert!(matches!(
            run_sync(&StallFactory, &mut NoAdversary, cfg(3, 1), vs, 0),
            Err(EngineError::NonDomainInitial(ProcessId(1)))
        ));
        assert!(matches!(
            run_sync(&StallFactory, &mut NoAdversary, cfg(3, 1), values(2), 0),
            Err(EngineError::BadInitialValues)
        ));
        struct WideAdversary;
        impl AdversaryStrategy for WideAdversary {
            fn controlled(&self) -> BTreeSet<ProcessId> {
                [ProcessId(0), ProcessId(1)].into_iter().collect()
            }
            fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
                ctx.honest
            }
        }
        assert!(matches!(
            run_sync(&StallFactory, &mut WideAdversary, cfg(3, 1), values(3), 0),
            Err(EngineError::TooManyControlled { controlled: 2, t: 1 })
        ));
    }

    /// Tries to emit a chain carrying a correct process's signature it
    /// never received.
    struct Forger;

    impl AdversaryStrategy for Forger {
        fn controlled(&self) -> BTreeSet<ProcessId> {
            [ProcessId(1)].into_iter().collect()
        }
        fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
            let forged = SignedChain::assemble(
                Value::Domain(9),
                alloc::vec![ProcessId(0), ProcessId(2)],
            );
            alloc::vec![RoundMessage {
                from: ctx.byz,
                to: ProcessId(0),
                round: ctx.round,
                body: Body::Value(forged),
            }]
        }
    }

    #[test]
    fn forgery_guard_drops_unreceivable_signatures() {
        let record = run_sync(&StallFactory, &mut Forger, cfg(3, 1), values(3), 0).unwrap();
        assert!(record.forgery_rejections() > 0);
        // Nothing forged ever reached an inbox.
        for log in &record.rounds {
            for msg in &log.delivered {
                if msg.from == ProcessId(1) {
                    panic!("forged message delivered: {msg:?}");
                }
            }
        }
    }

    /// Sends two bodies into the same slot; only the later one survives.
    struct DoubleSender;

    impl AdversaryStrategy for DoubleSender {
        fn controlled(&self) -> BTreeSet<ProcessId> {
            [ProcessId(1)].into_iter().collect()
        }
        fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
            let cap = crate::authsig::SigningCapability::issue(ctx.byz);
            let first = crate::authsig::sign(&cap, Value::Domain(1)).unwrap();
            let second = crate::authsig::sign(&cap, Value::Domain(2)).unwrap();
            alloc::vec![
                RoundMessage {
                    from: ctx.byz,
                    to: ProcessId(0),
                    round: ctx.round,
                    body: Body::Value(first),
                },
                RoundMessage {
                    from: ctx.byz,
                    to: ProcessId(0),
                    round: ctx.round,
                    body: Body::Value(second),
                },
            ]
        }
    }

    #[test]
    fn slot_uniqueness_keeps_last_body() {
        let record = run_sync(&StallFactory, &mut DoubleSender, cfg(3, 1), values(3), 0).unwrap();
        let from_byz: Vec<_> = record.rounds[0]
            .delivered
            .iter()
            .filter(|m| m.from == ProcessId(1) && m.to == ProcessId(0))
            .collect();
        assert_eq!(from_byz.len(), 1);
        match &from_byz[0].body {
            Body::Value(c) => assert_eq!(c.payload(), Value::Domain(2)),
            other => panic!("unexpected body {other:?}"),
        }
    }

    #[test]
    fn identical_inputs_replay_identically() {
        let a = run_sync(&StallFactory, &mut Forger, cfg(3, 1), values(3), 7).unwrap();
        let b = run_sync(&StallFactory, &mut Forger, cfg(3, 1), values(3), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
