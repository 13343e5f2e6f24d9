//! Terminating reliable broadcast with signed relay chains.
//!
//! One instance has a designated sender and runs `t + 1` rounds. The sender
//! starts with its value extracted and a fresh self-signed chain queued. In
//! each round a process sends every queued chain (already carrying its own
//! signature) to everyone, then extracts the payload of each valid received
//! chain it has not seen before and queues that chain, extended, for the
//! next round. After round `t + 1` it delivers the unique extracted value,
//! or the sender-faulty marker when there is none or more than one.
//!
//! Tracking stops at two distinct extracted values: a third cannot change
//! the outcome anywhere, because any value extracted by round `t` reaches
//! every correct process one round later, so "two or more" is a stable,
//! uniform verdict. The full extracted set is still kept for diagnostics.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::authsig::{extend, is_valid_with, sign, SignedChain, SigningCapability, ValidityMode};
use crate::model::{ProcessId, SystemConfig, Value};
use crate::sync_engine::{
    Body, ProcessReport, ProtocolFactory, RoundMessage, SyncProcess, SyncRunKind,
};

/// Instance setup rejected.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TrbError {
    /// The sender must start with a domain value.
    SenderNeedsValue,
    /// Only the sender proposes.
    NonSenderHasValue,
}

impl fmt::Display for TrbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrbError::SenderNeedsValue => write!(f, "designated sender needs a domain value"),
            TrbError::NonSenderHasValue => write!(f, "only the designated sender proposes"),
        }
    }
}

impl core::error::Error for TrbError {}

/// Per-process state of one broadcast instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BroadcastState {
    me: ProcessId,
    sender: ProcessId,
    t: u32,
    mode: ValidityMode,
    cap: SigningCapability,
    /// Extraction order, capped at two distinct values.
    extracted: Vec<Value>,
    /// Every extractable payload ever seen, uncapped, for diagnostics.
    extracted_full: BTreeSet<Value>,
    /// Chains to send next round; each already ends with our signature.
    relay: Vec<SignedChain>,
    delivered: Option<Value>,
}

impl BroadcastState {
    pub fn new(
        me: ProcessId,
        sender: ProcessId,
        t: u32,
        initial: Option<Value>,
        mode: ValidityMode,
    ) -> Result<Self, TrbError> {
        let cap = SigningCapability::issue(me);
        let mut state = BroadcastState {
            me,
            sender,
            t,
            mode,
            cap,
            extracted: Vec::new(),
            extracted_full: BTreeSet::new(),
            relay: Vec::new(),
            delivered: None,
        };
        if me == sender {
            let v = initial.filter(|v| v.is_domain()).ok_or(TrbError::SenderNeedsValue)?;
            state.extracted.push(v);
            state.extracted_full.insert(v);
            state.relay.push(sign(&state.cap, v).expect("domain value"));
        } else if initial.is_some() {
            return Err(TrbError::NonSenderHasValue);
        }
        Ok(state)
    }

    pub fn sender(&self) -> ProcessId {
        self.sender
    }

    /// Rounds this instance runs.
    pub fn total_rounds(&self) -> u32 {
        self.t + 1
    }

    /// Drains the chains to broadcast this round.
    pub fn outbox(&mut self) -> Vec<SignedChain> {
        core::mem::take(&mut self.relay)
    }

    /// Processes the chains received in `round`.
    pub fn receive(&mut self, round: u32, chains: &[SignedChain]) {
        for chain in chains {
            if !is_valid_with(self.mode, chain, self.sender, round) {
                continue;
            }
            let payload = chain.payload();
            if self.extracted_full.contains(&payload) {
                continue;
            }
            self.extracted_full.insert(payload);
            if self.extracted.len() < 2 {
                self.extracted.push(payload);
                if !chain.contains_signer(self.me) {
                    self.relay.push(extend(&self.cap, chain));
                }
            }
        }
    }

    /// One full round as seen by this process: send the queue, then absorb.
    pub fn step(&mut self, round: u32, inbox: &[SignedChain]) -> Vec<SignedChain> {
        let out = self.outbox();
        self.receive(round, inbox);
        out
    }

    /// Delivery after round `t + 1`: the unique extracted value, else the
    /// sender-faulty marker.
    pub fn finalize(&mut self) -> Value {
        let v = if self.extracted.len() == 1 { self.extracted[0] } else { Value::SenderFaulty };
        self.delivered = Some(v);
        v
    }

    pub fn delivered(&self) -> Option<Value> {
        self.delivered
    }

    pub fn extracted(&self) -> &[Value] {
        &self.extracted
    }

    pub fn extracted_full(&self) -> &BTreeSet<Value> {
        &self.extracted_full
    }
}

/// Engine adapter running a single broadcast instance; the delivery is the
/// machine's decision.
#[derive(Clone)]
pub struct BroadcastProcess {
    state: BroadcastState,
    n: u32,
}

impl BroadcastProcess {
    fn instance(&self) -> ProcessId {
        self.state.sender
    }
}

impl SyncProcess for BroadcastProcess {
    fn emit(&mut self, round: u32) -> Vec<(ProcessId, Body)> {
        if round > self.state.total_rounds() {
            return Vec::new();
        }
        let chains = self.state.outbox();
        if chains.is_empty() {
            return Vec::new();
        }
        crate::model::all_processes(self.n)
            .map(|to| (to, Body::Relay { instance: self.instance(), chains: chains.clone() }))
            .collect()
    }

    fn absorb(&mut self, round: u32, inbox: &[RoundMessage]) {
        if round > self.state.total_rounds() {
            return;
        }
        let mut chains = Vec::new();
        for msg in inbox {
            if let Body::Relay { instance, chains: cs } = &msg.body {
                if *instance == self.instance() {
                    chains.extend(cs.iter().cloned());
                }
            }
        }
        self.state.receive(round, &chains);
        if round == self.state.total_rounds() {
            self.state.finalize();
        }
    }

    fn decision(&self) -> Option<Value> {
        self.state.delivered()
    }

    fn report(&self) -> ProcessReport {
        let mut deliveries = BTreeMap::new();
        if let Some(v) = self.state.delivered() {
            deliveries.insert(self.instance(), v);
        }
        ProcessReport { decision: self.state.delivered(), vector: None, deliveries }
    }

    fn clone_box(&self) -> Box<dyn SyncProcess> {
        Box::new(self.clone())
    }
}

/// Factory for standalone broadcast runs. Only the designated sender's
/// initial value is used.
pub struct BroadcastFactory {
    pub sender: ProcessId,
    pub mode: ValidityMode,
}

impl BroadcastFactory {
    pub fn new(sender: ProcessId) -> Self {
        BroadcastFactory { sender, mode: ValidityMode::Strict }
    }
}

impl ProtocolFactory for BroadcastFactory {
    fn kind(&self) -> SyncRunKind {
        SyncRunKind::Broadcast { sender: self.sender }
    }

    fn create(&self, me: ProcessId, cfg: &SystemConfig, initial: Value) -> Box<dyn SyncProcess> {
        let value = (me == self.sender).then_some(initial);
        let state = BroadcastState::new(me, self.sender, cfg.t, value, self.mode)
            .expect("factory passes sender value correctly");
        Box::new(BroadcastProcess { state, n: cfg.n })
    }
}
