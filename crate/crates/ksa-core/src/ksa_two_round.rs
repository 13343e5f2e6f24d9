//! Two-round matrix agreement: decide within `floor(n/(n-t)) + 1` values.
//!
//! Round 1: everyone announces its signed initial value. Round 2: everyone
//! echoes the full announcement vector it received. Each process then holds
//! an `n x n` matrix (row `j` = what `p_j` claims to have received) and
//! filters its own row column by column: a value it heard first-hand
//! survives only if no other row contradicts it; a slot it never heard
//! stays empty. It decides its own value if at least `n - t` filtered slots
//! still carry it, otherwise bottom.
//!
//! Because echo slots carry the round-1 signature chains, a process cannot
//! misreport what a correct process announced; it can only omit. Lying is
//! thus confined to slots of equivocating processes, and any equivocation
//! visible to two correct processes empties that column everywhere.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::authsig::{sign, SignedChain, SigningCapability};
use crate::model::{ProcessId, SystemConfig, Value, ViewVector};
use crate::sync_engine::{
    Body, ProcessReport, ProtocolFactory, RoundMessage, SyncProcess, SyncRunKind,
};

/// The `n x n` value matrix a process accumulates: row `j` holds what `p_j`
/// claims each process announced. Missing information is bottom.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DecisionMatrix {
    rows: Vec<ViewVector>,
}

impl DecisionMatrix {
    pub fn new(n: u32) -> Self {
        DecisionMatrix { rows: (0..n).map(|_| ViewVector::bottoms(n)).collect() }
    }

    pub fn n(&self) -> u32 {
        self.rows.len() as u32
    }

    pub fn get(&self, row: ProcessId, col: ProcessId) -> Value {
        self.rows[row.index()].get(col)
    }

    pub fn set(&mut self, row: ProcessId, col: ProcessId, v: Value) {
        self.rows[row.index()].set(col, v);
    }

    pub fn row(&self, row: ProcessId) -> &ViewVector {
        &self.rows[row.index()]
    }

    /// Replaces a whole row (a received echo vector).
    pub fn set_row(&mut self, row: ProcessId, values: ViewVector) {
        debug_assert_eq!(values.len(), self.rows.len());
        self.rows[row.index()] = values;
    }

    /// Column filter from `me`'s perspective: keep first-hand value `w` of
    /// column `j` unless unheard or contradicted by any other row; own slot
    /// keeps the own value.
    pub fn filter_columns(&self, me: ProcessId) -> ViewVector {
        let n = self.n();
        let mut filtered = ViewVector::bottoms(n);
        filtered.set(me, self.get(me, me));
        for j in crate::model::all_processes(n) {
            if j == me {
                continue;
            }
            let w = self.get(me, j);
            if w.is_bottom() {
                continue;
            }
            let contradicted = crate::model::all_processes(n)
                .filter(|l| *l != me)
                .any(|l| !self.get(l, j).is_bottom() && self.get(l, j) != w);
            if !contradicted {
                filtered.set(j, w);
            }
        }
        filtered
    }
}

/// Final decision: the own value when enough filtered slots carry it.
pub fn decide_two_round(filtered: &ViewVector, own: Value, n: u32, t: u32) -> Value {
    if filtered.count_of(own) >= (n - t) as usize {
        own
    } else {
        Value::Bottom
    }
}

#[derive(Clone)]
pub struct TwoRoundProcess {
    me: ProcessId,
    n: u32,
    t: u32,
    value: Value,
    /// Round-1 announcement chains, to be echoed verbatim in round 2.
    announcements: Vec<Option<SignedChain>>,
    matrix: DecisionMatrix,
    filtered: Option<ViewVector>,
    decided: Option<Value>,
}

impl TwoRoundProcess {
    pub fn new(me: ProcessId, n: u32, t: u32, value: Value) -> Self {
        let mut proc = TwoRoundProcess {
            me,
            n,
            t,
            value,
            announcements: alloc::vec![None; n as usize],
            matrix: DecisionMatrix::new(n),
            filtered: None,
            decided: None,
        };
        proc.matrix.set(me, me, value);
        proc
    }

    /// A single-signature chain announced by exactly `who`, or nothing.
    fn announced_value(slot: &Option<SignedChain>, who: ProcessId) -> Value {
        match slot {
            Some(chain)
                if chain.signers() == [who] && chain.payload().is_domain() =>
            {
                chain.payload()
            }
            _ => Value::Bottom,
        }
    }
}

impl SyncProcess for TwoRoundProcess {
    fn emit(&mut self, round: u32) -> Vec<(ProcessId, Body)> {
        match round {
            1 => {
                let cap = SigningCapability::issue(self.me);
                let chain = sign(&cap, self.value).expect("initial values are domain tokens");
                crate::model::all_processes(self.n)
                    .map(|to| (to, Body::Value(chain.clone())))
                    .collect()
            }
            2 => {
                let echo = self.announcements.clone();
                crate::model::all_processes(self.n)
                    .map(|to| (to, Body::Vector(echo.clone())))
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    fn absorb(&mut self, round: u32, inbox: &[RoundMessage]) {
        match round {
            1 => {
                for msg in inbox {
                    if let Body::Value(chain) = &msg.body {
                        let v = Self::announced_value(&Some(chain.clone()), msg.from);
                        if v.is_domain() {
                            self.announcements[msg.from.index()] = Some(chain.clone());
                            self.matrix.set(self.me, msg.from, v);
                        }
                    }
                }
                // Own slot stays the own value regardless of loopback.
                self.announcements[self.me.index()] = {
                    let cap = SigningCapability::issue(self.me);
                    Some(sign(&cap, self.value).expect("domain value"))
                };
                self.matrix.set(self.me, self.me, self.value);
            }
            2 => {
                for msg in inbox {
                    if msg.from == self.me {
                        continue;
                    }
                    if let Body::Vector(slots) = &msg.body {
                        if slots.len() != self.n as usize {
                            continue; // wrong arity: treat as not received
                        }
                        let mut row = ViewVector::bottoms(self.n);
                        for k in crate::model::all_processes(self.n) {
                            row.set(k, Self::announced_value(&slots[k.index()], k));
                        }
                        self.matrix.set_row(msg.from, row);
                    }
                }
                let filtered = self.matrix.filter_columns(self.me);
                self.decided = Some(decide_two_round(&filtered, self.value, self.n, self.t));
                self.filtered = Some(filtered);
            }
            _ => {}
        }
    }

    fn decision(&self) -> Option<Value> {
        self.decided
    }

    fn report(&self) -> ProcessReport {
        ProcessReport {
            decision: self.decided,
            vector: self.filtered.clone(),
            deliveries: BTreeMap::new(),
        }
    }

    fn clone_box(&self) -> Box<dyn SyncProcess> {
        Box::new(self.clone())
    }
}

pub struct TwoRoundFactory;

impl ProtocolFactory for TwoRoundFactory {
    fn kind(&self) -> SyncRunKind {
        SyncRunKind::TwoRound
    }

    fn create(&self, me: ProcessId, cfg: &SystemConfig, initial: Value) -> Box<dyn SyncProcess> {
        Box::new(TwoRoundProcess::new(me, cfg.n, cfg.t, initial))
    }
}
