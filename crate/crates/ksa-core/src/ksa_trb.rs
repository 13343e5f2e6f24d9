//! Broadcast-stack agreement: decide within `floor(n/(n-t))` domain values.
//!
//! Every process is the designated sender of one reliable-broadcast
//! instance carrying its initial value; all `n` instances run in lock step
//! for `t + 1` rounds, messages tagged with their instance. After the last
//! round each process finalizes every instance into a delivery vector.
//! Broadcast agreement makes that vector identical at all correct
//! processes, so decisions reduce to counting inside one shared vector:
//!
//! 1. the own value, if it fills at least `n - t` slots,
//! 2. otherwise the smallest domain value filling at least `n - t` slots,
//! 3. otherwise bottom.
//!
//! The sender-faulty marker is never decidable: it names a misbehaving
//! process, not a proposed value. Since the vector is shared, either some
//! value reaches the threshold for everyone or nobody decides a value, so
//! bottom never mixes with domain decisions.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::authsig::ValidityMode;
use crate::model::{ProcessId, SystemConfig, Value, ViewVector};
use crate::sync_engine::{
    Body, ProcessReport, ProtocolFactory, RoundMessage, SyncProcess, SyncRunKind,
};
use crate::trb::BroadcastState;

/// Decision from a finalized delivery vector.
pub fn decide_from_deliveries(vector: &ViewVector, own: Value, n: u32, t: u32) -> Value {
    let quorum = (n - t) as usize;
    if vector.count_of(own) >= quorum {
        return own;
    }
    for v in vector.domain_values() {
        if vector.count_of(v) >= quorum {
            return v;
        }
    }
    Value::Bottom
}

#[derive(Clone)]
pub struct TrbAgreementProcess {
    n: u32,
    t: u32,
    value: Value,
    /// One broadcast instance per process, indexed by sender id.
    instances: Vec<BroadcastState>,
    vector: Option<ViewVector>,
    decided: Option<Value>,
}

impl TrbAgreementProcess {
    pub fn new(me: ProcessId, n: u32, t: u32, value: Value, mode: ValidityMode) -> Self {
        let instances = crate::model::all_processes(n)
            .map(|sender| {
                let own = (sender == me).then_some(value);
                BroadcastState::new(me, sender, t, own, mode).expect("domain initial value")
            })
            .collect();
        TrbAgreementProcess { n, t, value, instances, vector: None, decided: None }
    }

    fn total_rounds(&self) -> u32 {
        self.t + 1
    }
}

impl SyncProcess for TrbAgreementProcess {
    fn emit(&mut self, round: u32) -> Vec<(ProcessId, Body)> {
        if round > self.total_rounds() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for instance in crate::model::all_processes(self.n) {
            let chains = self.instances[instance.index()].outbox();
            if chains.is_empty() {
                continue;
            }
            for to in crate::model::all_processes(self.n) {
                out.push((to, Body::Relay { instance, chains: chains.clone() }));
            }
        }
        out
    }

    fn absorb(&mut self, round: u32, inbox: &[RoundMessage]) {
        if round > self.total_rounds() {
            return;
        }
        let mut per_instance: Vec<Vec<_>> = alloc::vec![Vec::new(); self.n as usize];
        for msg in inbox {
            if let Body::Relay { instance, chains } = &msg.body {
                if instance.index() < self.n as usize {
                    per_instance[instance.index()].extend(chains.iter().cloned());
                }
            }
        }
        for (idx, chains) in per_instance.iter().enumerate() {
            self.instances[idx].receive(round, chains);
        }
        if round == self.total_rounds() {
            let vector =
                ViewVector(self.instances.iter_mut().map(|st| st.finalize()).collect());
            self.decided = Some(decide_from_deliveries(&vector, self.value, self.n, self.t));
            self.vector = Some(vector);
        }
    }

    fn decision(&self) -> Option<Value> {
        self.decided
    }

    fn report(&self) -> ProcessReport {
        let deliveries: BTreeMap<ProcessId, Value> = self
            .instances
            .iter()
            .filter_map(|st| st.delivered().map(|v| (st.sender(), v)))
            .collect();
        ProcessReport { decision: self.decided, vector: self.vector.clone(), deliveries }
    }

    fn clone_box(&self) -> Box<dyn SyncProcess> {
        Box::new(self.clone())
    }
}

pub struct TrbOptimalFactory {
    pub mode: ValidityMode,
}

impl TrbOptimalFactory {
    pub fn new() -> Self {
        TrbOptimalFactory { mode: ValidityMode::Strict }
    }
}

impl Default for TrbOptimalFactory {
    fn default() -> Self {
        TrbOptimalFactory::new()
    }
}

impl ProtocolFactory for TrbOptimalFactory {
    fn kind(&self) -> SyncRunKind {
        SyncRunKind::TrbOptimal
    }

    fn create(&self, me: ProcessId, cfg: &SystemConfig, initial: Value) -> Box<dyn SyncProcess> {
        Box::new(TrbAgreementProcess::new(me, cfg.n, cfg.t, initial, self.mode))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authsig::{sign, SigningCapability};
    use crate::model::Protocol;
    use crate::sync_engine::{run_sync, AdversaryCtx, AdversaryStrategy, NoAdversary};
    use alloc::collections::BTreeSet;

    fn p(i: u32) -> ProcessId {
        ProcessId(i)
    }

    fn d(v: u32) -> Value {
        Value::Domain(v)
    }

    fn cfg(n: u32, t: u32) -> SystemConfig {
        SystemConfig { n, t, protocol: Protocol::TrbOptimal }
    }

    fn run_plain(n: u32, t: u32, values: &[u32]) -> crate::sync_engine::SyncRunRecord {
        let initial: BTreeMap<_, _> =
            values.iter().enumerate().map(|(i, v)| (p(i as u32), d(*v))).collect();
        run_sync(&TrbOptimalFactory::new(), &mut NoAdversary, cfg(n, t), initial, 0).unwrap()
    }

    #[test]
    fn decide_matches_frozen_examples() {
        // Three slots of value 1 and one sender-faulty, own value absent:
        // rule 2 picks the quorum value.
        let l = ViewVector(alloc::vec![d(1), d(1), d(1), Value::SenderFaulty]);
        assert_eq!(decide_from_deliveries(&l, d(2), 4, 1), d(1));
        // Own value first when it has quorum.
        let l = ViewVector(alloc::vec![d(2), d(2), d(1), d(1)]);
        assert_eq!(decide_from_deliveries(&l, d(2), 4, 2), d(2));
        assert_eq!(decide_from_deliveries(&l, d(1), 4, 2), d(1));
        // Sender-faulty never wins even with quorum.
        let l = ViewVector(alloc::vec![Value::SenderFaulty, Value::SenderFaulty, d(1)]);
        assert_eq!(decide_from_deliveries(&l, d(9), 3, 1), Value::Bottom);
        // No quorum at all: bottom.
        let l = ViewVector(alloc::vec![d(1), d(2), d(3)]);
        assert_eq!(decide_from_deliveries(&l, d(1), 3, 1), Value::Bottom);
    }

    #[test]
    fn honest_run_yields_equal_vectors_and_runs_t_plus_one_rounds() {
        let record = run_plain(4, 2, &[1, 1, 2, 2]);
        assert_eq!(record.rounds_executed, 3);
        let first = &record.vectors[&p(0)];
        assert_eq!(*first, ViewVector(alloc::vec![d(1), d(1), d(2), d(2)]));
        for pid in crate::model::all_processes(4) {
            assert_eq!(&record.vectors[&pid], first);
        }
        let decided: Vec<_> = record.decisions.iter().map(|x| x.decided).collect();
        assert_eq!(decided, alloc::vec![d(1), d(1), d(2), d(2)]);
    }

    #[test]
    fn unanimity_survives_a_silent_fault() {
        struct Silent;
        impl AdversaryStrategy for Silent {
            fn controlled(&self) -> BTreeSet<ProcessId> {
                [p(2)].into_iter().collect()
            }
            fn on_round(&mut self, _ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
                Vec::new()
            }
        }
        let initial: BTreeMap<_, _> = [(p(0), d(4)), (p(1), d(4)), (p(2), d(9))].into();
        let record =
            run_sync(&TrbOptimalFactory::new(), &mut Silent, cfg(3, 1), initial, 0).unwrap();
        // Correct processes see [4, 4, SF] and decide 4.
        for dec in record.decisions.iter().filter(|x| x.correct) {
            assert_eq!(dec.decided, d(4));
        }
        assert_eq!(record.vectors[&p(0)].get(p(2)), Value::SenderFaulty);
    }

    /// Equivocates its own broadcast instance in round 1.
    struct OwnInstanceEquivocator;

    impl AdversaryStrategy for OwnInstanceEquivocator {
        fn controlled(&self) -> BTreeSet<ProcessId> {
            [p(2)].into_iter().collect()
        }
        fn on_round(&mut self, ctx: AdversaryCtx<'_>) -> Vec<RoundMessage> {
            if ctx.round != 1 {
                return ctx.honest;
            }
            let cap = SigningCapability::issue(ctx.byz);
            let mut out = ctx.honest;
            for msg in out.iter_mut() {
                if let Body::Relay { instance, chains } = &mut msg.body {
                    if *instance == ctx.byz {
                        let v = if msg.to.0 % 2 == 0 { d(7) } else { d(8) };
                        *chains = alloc::vec![sign(&cap, v).unwrap()];
                    }
                }
            }
            out
        }
    }

    #[test]
    fn equivocating_instance_converges_to_sender_faulty() {
        let initial: BTreeMap<_, _> = [(p(0), d(1)), (p(1), d(2)), (p(2), d(3))].into();
        let record = run_sync(
            &TrbOptimalFactory::new(),
            &mut OwnInstanceEquivocator,
            cfg(3, 1),
            initial,
            0,
        )
        .unwrap();
        let v0 = &record.vectors[&p(0)];
        let v1 = &record.vectors[&p(1)];
        assert_eq!(v0, v1);
        assert_eq!(v0.get(p(2)), Value::SenderFaulty);
        // No quorum of 2 for any value: both decide bottom, never mixed.
        for dec in record.decisions.iter().filter(|x| x.correct) {
            assert_eq!(dec.decided, Value::Bottom);
        }
    }
}
