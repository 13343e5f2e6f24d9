//! Wait-free set agreement over an atomic snapshot object, tolerating up
//! to t crash failures with n > 2t.
//!
//! Each process writes its input once, then snapshots until the view holds
//! at least n - t non-bottom entries. That view X is frozen along with its
//! fill x = |non-bottom entries of X|, and the decision is computed inside
//! the same snapshot step:
//!
//!   1. own value m if it fills at least x - t slots of X,
//!   2. else the smallest domain value filling at least x - t slots,
//!   3. else bottom.
//!
//! A decided domain value owns at least x - t slots of a frozen view, and
//! views of size >= n - t pairwise intersect in more than t slots when
//! n > 2t, which caps the number of distinct domain decisions at
//! floor((n - t) / (n - 2t)).

use alloc::boxed::Box;

use crate::model::{ProcessId, SystemConfig, Value, ViewVector};
use crate::shm_engine::{AsyncProcess, AsyncProtocolFactory, FrozenView, SnapshotObject};

/// Decision rule applied to a frozen view of fill `x`.
///
/// `own` must be the caller's input; only domain values are decidable and
/// ties go to the caller's own value, then the smallest qualifying value.
pub fn decide_async(view: &ViewVector, own: Value, x: u32, t: u32) -> Value {
    debug_assert!(x > t, "frozen views have more than t entries when n > 2t");
    let threshold = (x - t) as usize;
    if view.count_of(own) >= threshold {
        return own;
    }
    for v in view.domain_values() {
        if view.count_of(v) >= threshold {
            return v;
        }
    }
    Value::Bottom
}

/// One process of the snapshot agreement protocol.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SnapshotAgreementState {
    me: ProcessId,
    n: u32,
    t: u32,
    value: Value,
    written: bool,
    frozen: Option<FrozenView>,
    decided: Option<Value>,
}

impl SnapshotAgreementState {
    pub fn new(me: ProcessId, cfg: &SystemConfig, value: Value) -> Self {
        SnapshotAgreementState {
            me,
            n: cfg.n,
            t: cfg.t,
            value,
            written: false,
            frozen: None,
            decided: None,
        }
    }
}

impl AsyncProcess for SnapshotAgreementState {
    fn step(&mut self, obj: &mut SnapshotObject) -> Option<Value> {
        if !self.written {
            obj.update(self.me, self.value);
            self.written = true;
            return None;
        }
        let view = obj.snapshot(self.me);
        let x = view.non_bottom() as u32;
        if (x as u64) < (self.n - self.t) as u64 {
            return None;
        }
        let decision = decide_async(&view, self.value, x, self.t);
        self.frozen = Some(FrozenView { view, size: x });
        self.decided = Some(decision);
        Some(decision)
    }

    fn decision(&self) -> Option<Value> {
        self.decided
    }

    fn frozen(&self) -> Option<FrozenView> {
        self.frozen.clone()
    }

    fn clone_box(&self) -> Box<dyn AsyncProcess> {
        Box::new(self.clone())
    }
}

pub struct SnapshotAgreementFactory;

impl AsyncProtocolFactory for SnapshotAgreementFactory {
    fn create(&self, me: ProcessId, cfg: &SystemConfig, initial: Value) -> Box<dyn AsyncProcess> {
        Box::new(SnapshotAgreementState::new(me, cfg, initial))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Protocol;
    use crate::shm_engine::{run_async, Schedule, StepAction};
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use alloc::vec::Vec;

    fn p(i: u32) -> ProcessId {
        ProcessId(i)
    }

    fn d(v: u32) -> Value {
        Value::Domain(v)
    }

    fn cfg(n: u32, t: u32) -> SystemConfig {
        SystemConfig { n, t, protocol: Protocol::AsyncSnapshot }
    }

    #[test]
    fn decide_prefers_own_then_smallest_qualifying() {
        // x = 3, t = 2, threshold 1: own value wins even as a minority.
        let view = ViewVector(vec![d(1), d(1), d(2), Value::Bottom, Value::Bottom]);
        assert_eq!(decide_async(&view, d(2), 3, 2), d(2));
        // Writer of value 2 sees a full view: threshold 3, value 1 fills
        // only 2 slots, nothing qualifies.
        let view = ViewVector(vec![d(1), d(1), d(2), d(3), d(4)]);
        assert_eq!(decide_async(&view, d(2), 5, 2), Value::Bottom);
        // Own value misses the bar but the smallest filling value decides.
        let view = ViewVector(vec![d(1), d(1), d(1), d(2), d(3)]);
        assert_eq!(decide_async(&view, d(3), 5, 2), d(1));
    }

    #[test]
    fn early_frozen_view_can_decide_where_a_full_view_cannot() {
        // Same inputs, different freeze points: the writer of value 2
        // freezing at fill 3 decides its own value, a process freezing at
        // fill 5 decides bottom.
        let early = ViewVector(vec![d(1), d(1), d(2), Value::Bottom, Value::Bottom]);
        let full = ViewVector(vec![d(1), d(1), d(2), d(3), d(4)]);
        assert_eq!(decide_async(&early, d(2), 3, 2), d(2));
        assert_eq!(decide_async(&full, d(4), 5, 2), Value::Bottom);
    }

    fn inputs(vals: &[u32]) -> BTreeMap<ProcessId, Value> {
        vals.iter().enumerate().map(|(i, v)| (p(i as u32), d(*v))).collect()
    }

    #[test]
    fn explicit_schedule_reproduces_the_early_freeze() {
        // p0, p1, p2 write and p2 snapshots before p3, p4 move: p2 freezes
        // [1, 1, 2, -, -] at fill 3 and keeps its own value.
        let schedule = Schedule::Explicit(vec![p(0), p(1), p(2), p(2)]);
        let record = run_async(
            &SnapshotAgreementFactory,
            cfg(5, 2),
            inputs(&[1, 1, 2, 3, 4]),
            BTreeMap::new(),
            schedule,
            0,
        )
        .unwrap();
        assert!(!record.non_termination);
        let by_pid: BTreeMap<_, _> =
            record.decisions.iter().map(|r| (r.pid, r.decided)).collect();
        assert_eq!(by_pid[&p(2)], d(2));
        let frozen = &record.frozen[&p(2)];
        assert_eq!(frozen.size, 3);
        assert_eq!(frozen.view, ViewVector(vec![d(1), d(1), d(2), Value::Bottom, Value::Bottom]));
        // Everyone decided and each decision happened inside a snapshot step.
        assert_eq!(record.decisions.len(), 5);
        for dec in &record.decisions {
            let step = record.steps.iter().find(|s| s.index == dec.decided_at).unwrap();
            assert!(matches!(step.action, StepAction::Snapshot { decided: Some(_), .. }));
        }
    }

    #[test]
    fn crashed_minority_does_not_block_termination() {
        let plan: BTreeMap<_, _> = [(p(2), 0u64)].into();
        let record = run_async(
            &SnapshotAgreementFactory,
            cfg(3, 1),
            inputs(&[7, 7, 9]),
            plan,
            Schedule::Seeded(11),
            11,
        )
        .unwrap();
        assert!(!record.non_termination);
        let correct: Vec<_> =
            record.decisions.iter().filter(|r| r.correct).map(|r| r.decided).collect();
        assert_eq!(correct, vec![d(7), d(7)]);
    }

    #[test]
    fn unanimous_inputs_decide_unanimously_across_seeds() {
        for seed in 0..20 {
            let record = run_async(
                &SnapshotAgreementFactory,
                cfg(5, 2),
                inputs(&[4, 4, 4, 4, 4]),
                BTreeMap::new(),
                Schedule::Seeded(seed),
                seed,
            )
            .unwrap();
            assert!(!record.non_termination);
            assert!(record.decisions.iter().all(|r| r.decided == d(4)));
        }
    }
}
