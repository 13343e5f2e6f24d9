//! Asynchronous shared-memory engine around an atomic snapshot object.
//!
//! The object holds one single-writer register per process, initially
//! bottom. A scheduler grants steps; each granted step performs exactly one
//! indivisible operation (update or snapshot), so the operation order in
//! the object's history is a linearization by construction.
//!
//! Schedules come in three shapes: [`Schedule::Seeded`] runs fair
//! round-robin cycles whose per-cycle order is a seeded shuffle,
//! [`Schedule::Explicit`] replays a fixed step list and then completes the
//! run round-robin, and [`Schedule::Exhaustive`] is not a single run at all
//! but a request for enumeration (served by the checker's oracle).
//!
//! Crashes are scheduler events: a plan maps a process to the number of own
//! steps after which it permanently stops. Crash is final; an explicit
//! schedule that grants a step to a crashed process is an error. A step
//! budget converts livelock into a non-termination verdict.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ConfigError, DecisionRecord, ProcessId, SystemConfig, Value, ViewVector};

/// One single-writer register per process plus the operation history.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SnapshotObject {
    registers: ViewVector,
    history: Vec<ShmOp>,
}

/// An operation in the linearization history.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShmOp {
    Update { pid: ProcessId, value: Value },
    Snapshot { pid: ProcessId, view: ViewVector },
}

impl SnapshotObject {
    pub fn new(n: u32) -> Self {
        SnapshotObject { registers: ViewVector::bottoms(n), history: Vec::new() }
    }

    /// Writes `value` into `pid`'s register, one indivisible step.
    pub fn update(&mut self, pid: ProcessId, value: Value) {
        self.registers.set(pid, value);
        self.history.push(ShmOp::Update { pid, value });
    }

    /// Reads all registers at once, one indivisible step.
    pub fn snapshot(&mut self, pid: ProcessId) -> ViewVector {
        let view = self.registers.clone();
        self.history.push(ShmOp::Snapshot { pid, view: view.clone() });
        view
    }

    pub fn registers(&self) -> &ViewVector {
        &self.registers
    }

    pub fn history(&self) -> &[ShmOp] {
        &self.history
    }
}

/// How steps are granted.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Fair round-robin with seeded per-cycle shuffles.
    Seeded(u64),
    /// Fixed step list, then deterministic round-robin completion.
    Explicit(Vec<ProcessId>),
    /// Enumerate every interleaving up to `bound` runs (oracle only).
    Exhaustive { bound: u64 },
}

/// What one scheduler grant did.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Update { value: Value },
    Snapshot { view: ViewVector, decided: Option<Value> },
    Crash,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct StepEvent {
    pub index: u64,
    pub pid: ProcessId,
    pub action: StepAction,
}

/// A process's frozen snapshot at decision time.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FrozenView {
    pub view: ViewVector,
    /// Number of non-bottom entries when frozen.
    pub size: u32,
}

/// Complete, replayable trace of an asynchronous run.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AsyncRunRecord {
    pub cfg: SystemConfig,
    pub seed: u64,
    pub schedule: Schedule,
    pub initial_values: BTreeMap<ProcessId, Value>,
    pub crash_plan: BTreeMap<ProcessId, u64>,
    pub crashed: BTreeSet<ProcessId>,
    pub steps: Vec<StepEvent>,
    pub frozen: BTreeMap<ProcessId, FrozenView>,
    pub decisions: Vec<DecisionRecord>,
    pub step_budget: u64,
    pub non_termination: bool,
}

impl AsyncRunRecord {
    pub fn is_correct(&self, pid: ProcessId) -> bool {
        !self.crashed.contains(&pid)
    }

    pub fn correct_processes(&self) -> impl Iterator<Item = ProcessId> + '_ {
        crate::model::all_processes(self.cfg.n).filter(|p| !self.crashed.contains(p))
    }

    /// Snapshot views in linearization order.
    pub fn snapshot_views(&self) -> impl Iterator<Item = (ProcessId, &ViewVector)> {
        self.steps.iter().filter_map(|s| match &s.action {
            StepAction::Snapshot { view, .. } => Some((s.pid, view)),
            _ => None,
        })
    }
}

/// A per-process asynchronous protocol machine. Each [`Self::step`] call
/// must perform exactly one operation on the object.
pub trait AsyncProcess {
    fn step(&mut self, obj: &mut SnapshotObject) -> Option<Value>;
    fn decision(&self) -> Option<Value>;
    /// The frozen decision-time view, once decided.
    fn frozen(&self) -> Option<FrozenView>;
    fn clone_box(&self) -> Box<dyn AsyncProcess>;
}

impl Clone for Box<dyn AsyncProcess> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub trait AsyncProtocolFactory {
    fn create(&self, me: ProcessId, cfg: &SystemConfig, initial: Value) -> Box<dyn AsyncProcess>;
}

/// Run rejected before the first step, or an illegal explicit schedule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AsyncRunError {
    Config(ConfigError),
    BadInitialValues,
    NonDomainInitial(ProcessId),
    UnknownProcess(ProcessId),
    /// More planned crashes than the fault budget.
    TooManyCrashes { planned: usize, t: u32 },
    /// An explicit schedule granted a step to a crashed process.
    ScheduledCrashed { pid: ProcessId, at: u64 },
    /// Exhaustive schedules are enumeration requests, not single runs.
    ExhaustiveNotRunnable,
}

impl fmt::Display for AsyncRunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsyncRunError::Config(e) => write!(f, "{e}"),
            AsyncRunError::BadInitialValues => {
                write!(f, "initial values must cover exactly p0..p(n-1)")
            }
            AsyncRunError::NonDomainInitial(p) => {
                write!(f, "initial value of {p} must be a domain token")
            }
            AsyncRunError::UnknownProcess(p) => write!(f, "process {p} out of range"),
            AsyncRunError::TooManyCrashes { planned, t } => {
                write!(f, "{planned} planned crashes exceed fault budget t={t}")
            }
            AsyncRunError::ScheduledCrashed { pid, at } => {
                write!(f, "explicit schedule grants step {at} to crashed process {pid}")
            }
            AsyncRunError::ExhaustiveNotRunnable => {
                write!(f, "exhaustive schedules are served by the enumeration oracle")
            }
        }
    }
}

impl core::error::Error for AsyncRunError {}

impl From<ConfigError> for AsyncRunError {
    fn from(e: ConfigError) -> Self {
        AsyncRunError::Config(e)
    }
}

struct AsyncEngine {
    cfg: SystemConfig,
    obj: SnapshotObject,
    states: Vec<Box<dyn AsyncProcess>>,
    steps_taken: Vec<u64>,
    crash_plan: BTreeMap<ProcessId, u64>,
    crashed: BTreeSet<ProcessId>,
    steps: Vec<StepEvent>,
    grants: u64,
    budget: u64,
}

enum Grant {
    Stepped,
    CrashedNow,
    AlreadyDecided,
}

impl AsyncEngine {
    fn decided(&self, pid: ProcessId) -> bool {
        self.states[pid.index()].decision().is_some()
    }

    /// Alive processes that still need steps, in id order.
    fn pending(&self) -> Vec<ProcessId> {
        crate::model::all_processes(self.cfg.n)
            .filter(|p| !self.crashed.contains(p) && !self.decided(*p))
            .collect()
    }

    fn grant(&mut self, pid: ProcessId) -> Result<Grant, AsyncRunError> {
        if pid.index() >= self.cfg.n as usize {
            return Err(AsyncRunError::UnknownProcess(pid));
        }
        if self.crashed.contains(&pid) {
            return Err(AsyncRunError::ScheduledCrashed { pid, at: self.grants });
        }
        if self.decided(pid) {
            return Ok(Grant::AlreadyDecided);
        }
        let index = self.grants;
        self.grants += 1;
        if let Some(&limit) = self.crash_plan.get(&pid) {
            if self.steps_taken[pid.index()] >= limit {
                self.crashed.insert(pid);
                self.steps.push(StepEvent { index, pid, action: StepAction::Crash });
                return Ok(Grant::CrashedNow);
            }
        }
        let before = self.obj.history().len();
        let decided = self.states[pid.index()].step(&mut self.obj);
        debug_assert_eq!(self.obj.history().len(), before + 1, "one op per step");
        self.steps_taken[pid.index()] += 1;
        let action = match self.obj.history().last().expect("op recorded") {
            ShmOp::Update { value, .. } => StepAction::Update { value: *value },
            ShmOp::Snapshot { view, .. } => {
                StepAction::Snapshot { view: view.clone(), decided }
            }
        };
        self.steps.push(StepEvent { index, pid, action });
        Ok(Grant::Stepped)
    }

    fn exhausted(&self) -> bool {
        self.grants >= self.budget
    }
}

/// Runs an asynchronous execution to completion (all non-crashed processes
/// decided), budget exhaustion, or schedule error.
pub fn run_async(
    factory: &dyn AsyncProtocolFactory,
    cfg: SystemConfig,
    initial_values: BTreeMap<ProcessId, Value>,
    crash_plan: BTreeMap<ProcessId, u64>,
    schedule: Schedule,
    seed: u64,
) -> Result<AsyncRunRecord, AsyncRunError> {
    cfg.validate()?;
    let ids: BTreeSet<ProcessId> = crate::model::all_processes(cfg.n).collect();
    if initial_values.keys().copied().collect::<BTreeSet<_>>() != ids {
        return Err(AsyncRunError::BadInitialValues);
    }
    if let Some((pid, _)) = initial_values.iter().find(|(_, v)| !v.is_domain()) {
        return Err(AsyncRunError::NonDomainInitial(*pid));
    }
    if let Some(p) = crash_plan.keys().find(|p| p.index() >= cfg.n as usize) {
        return Err(AsyncRunError::UnknownProcess(*p));
    }
    if crash_plan.len() > cfg.t as usize {
        return Err(AsyncRunError::TooManyCrashes { planned: crash_plan.len(), t: cfg.t });
    }

    let n = cfg.n as usize;
    let budget = 4 * (cfg.n as u64) * (cfg.n as u64) + 16;
    let mut engine = AsyncEngine {
        obj: SnapshotObject::new(cfg.n),
        states: crate::model::all_processes(cfg.n)
            .map(|p| factory.create(p, &cfg, initial_values[&p]))
            .collect(),
        steps_taken: alloc::vec![0; n],
        crash_plan: crash_plan.clone(),
        crashed: BTreeSet::new(),
        steps: Vec::new(),
        grants: 0,
        budget,
        cfg,
    };

    match &schedule {
        Schedule::Exhaustive { .. } => return Err(AsyncRunError::ExhaustiveNotRunnable),
        Schedule::Explicit(list) => {
            for &pid in list {
                if engine.exhausted() {
                    break;
                }
                engine.grant(pid)?;
            }
        }
        Schedule::Seeded(_) => {}
    }

    let mut rng = match &schedule {
        Schedule::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(*s)),
        _ => None,
    };
    loop {
        let mut pending = engine.pending();
        if pending.is_empty() || engine.exhausted() {
            break;
        }
        if let Some(rng) = rng.as_mut() {
            pending.shuffle(rng);
        }
        for pid in pending {
            if engine.exhausted() {
                break;
            }
            if !engine.crashed.contains(&pid) {
                engine.grant(pid)?;
            }
        }
    }

    let non_termination = !engine.pending().is_empty();
    let mut decisions = Vec::new();
    let mut frozen = BTreeMap::new();
    let decided_steps: BTreeMap<ProcessId, u64> = engine
        .steps
        .iter()
        .filter_map(|s| match &s.action {
            StepAction::Snapshot { decided: Some(_), .. } => Some((s.pid, s.index)),
            _ => None,
        })
        .collect();
    for pid in crate::model::all_processes(cfg.n) {
        let state = &engine.states[pid.index()];
        if let Some(v) = state.decision() {
            decisions.push(DecisionRecord {
                pid,
                decided: v,
                decided_at: decided_steps.get(&pid).copied().unwrap_or(0),
                correct: !engine.crashed.contains(&pid),
            });
        }
        if let Some(f) = state.frozen() {
            frozen.insert(pid, f);
        }
    }

    Ok(AsyncRunRecord {
        cfg,
        seed,
        schedule,
        initial_values,
        crash_plan,
        crashed: engine.crashed,
        steps: engine.steps,
        frozen,
        decisions,
        step_budget: budget,
        non_termination,
    })
}
