//! Core vocabulary: process identities, the decision value space, system
//! configuration, and the agreement-degree bounds.
//!
//! For `n` processes of which at most `t` may misbehave, the number of
//! distinct values correct processes may decide is bounded by
//!
//! * two-round matrix protocol: `floor(n / (n - t)) + 1` (bottom counts),
//! * broadcast-stack protocol: `floor(n / (n - t))`,
//! * asynchronous snapshot protocol: `floor((n - t) / (n - 2t))`,
//!   which requires `n > 2t`.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Index of a process, `p0 .. p(n-1)`.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Iterator over all process ids of an `n`-process system.
pub fn all_processes(n: u32) -> impl Iterator<Item = ProcessId> {
    (0..n).map(ProcessId)
}

/// A decision-space element.
///
/// `Domain` tokens are the proposable values, totally ordered by token.
/// `Bottom` is "no value"; `SenderFaulty` is the broadcast outcome blaming
/// the sender. Neither of the latter is ever proposable or signable.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Bottom,
    SenderFaulty,
    Domain(u32),
}

impl Value {
    pub fn is_domain(self) -> bool {
        matches!(self, Value::Domain(_))
    }

    pub fn is_bottom(self) -> bool {
        matches!(self, Value::Bottom)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bottom => write!(f, "bottom"),
            Value::SenderFaulty => write!(f, "sender-faulty"),
            Value::Domain(v) => write!(f, "{v}"),
        }
    }
}

/// The three agreement protocols the laboratory runs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Synchronous, always two rounds, echo matrix with column filtering.
    TwoRound,
    /// Synchronous, `t + 1` rounds, one reliable-broadcast instance per process.
    TrbOptimal,
    /// Asynchronous shared-memory collect with occurrence thresholds.
    AsyncSnapshot,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::TwoRound => write!(f, "two-round"),
            Protocol::TrbOptimal => write!(f, "trb-optimal"),
            Protocol::AsyncSnapshot => write!(f, "async-snapshot"),
        }
    }
}

/// System size, fault budget, and protocol selection.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: u32,
    pub t: u32,
    pub protocol: Protocol,
}

/// Rejected configuration, with the constraint that failed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ConfigError {
    /// `n >= 1` required.
    NoProcesses,
    /// `t < n` required.
    FaultBudgetTooLarge { n: u32, t: u32 },
    /// `n > 2t` required for the asynchronous protocol.
    NeedsHonestMajorityMargin { n: u32, t: u32 },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::NoProcesses => write!(f, "n >= 1 required"),
            ConfigError::FaultBudgetTooLarge { n, t } => {
                write!(f, "t < n required (got n={n}, t={t})")
            }
            ConfigError::NeedsHonestMajorityMargin { n, t } => {
                write!(f, "n > 2t required (got n={n}, t={t})")
            }
        }
    }
}

impl core::error::Error for ConfigError {}

impl SystemConfig {
    pub fn new(n: u32, t: u32, protocol: Protocol) -> Result<Self, ConfigError> {
        let cfg = SystemConfig { n, t, protocol };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the protocol's resilience preconditions.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoProcesses);
        }
        if self.t >= self.n {
            return Err(ConfigError::FaultBudgetTooLarge { n: self.n, t: self.t });
        }
        if self.protocol == Protocol::AsyncSnapshot && self.n <= 2 * self.t {
            return Err(ConfigError::NeedsHonestMajorityMargin { n: self.n, t: self.t });
        }
        Ok(())
    }

    /// Largest number of distinct decisions the selected protocol permits.
    ///
    /// For the two-round protocol the bound counts bottom; the other two
    /// bound distinct domain values.
    pub fn k_bound(&self) -> Result<u32, ConfigError> {
        self.validate()?;
        Ok(match self.protocol {
            Protocol::TwoRound => self.n / (self.n - self.t) + 1,
            Protocol::TrbOptimal => self.n / (self.n - self.t),
            Protocol::AsyncSnapshot => (self.n - self.t) / (self.n - 2 * self.t),
        })
    }
}

/// An `n`-slot vector of per-process values: an echo-filter output, a
/// broadcast delivery vector, or a snapshot view.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViewVector(pub Vec<Value>);

impl ViewVector {
    pub fn bottoms(n: u32) -> Self {
        ViewVector(alloc::vec![Value::Bottom; n as usize])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, pid: ProcessId) -> Value {
        self.0[pid.index()]
    }

    pub fn set(&mut self, pid: ProcessId, v: Value) {
        self.0[pid.index()] = v;
    }

    /// Number of slots holding exactly `v`.
    pub fn count_of(&self, v: Value) -> usize {
        self.0.iter().filter(|&&s| s == v).count()
    }

    pub fn non_bottom(&self) -> usize {
        self.0.iter().filter(|s| !s.is_bottom()).count()
    }

    /// Distinct domain values present, in token order.
    pub fn domain_values(&self) -> Vec<Value> {
        let set: BTreeSet<Value> = self.0.iter().copied().filter(|v| v.is_domain()).collect();
        set.into_iter().collect()
    }

    /// Slot-wise containment: every non-bottom slot of `self` appears
    /// identically in `other`.
    pub fn contained_in(&self, other: &ViewVector) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .all(|(a, b)| a.is_bottom() || a == b)
    }
}

impl fmt::Display for ViewVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match v {
                Value::Bottom => write!(f, "-")?,
                other => write!(f, "{other}")?,
            }
        }
        write!(f, "]")
    }
}

/// One process's final word in a run.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub pid: ProcessId,
    pub decided: Value,
    /// Round index (synchronous) or global step index (asynchronous).
    pub decided_at: u64,
    /// False for adversary-controlled or crashed processes; their entries
    /// are diagnostic only.
    pub correct: bool,
}

/// Distinct decisions among correct processes, bottom and sender-faulty
/// included.
pub fn distinct_correct_decisions(decisions: &[DecisionRecord]) -> BTreeSet<Value> {
    decisions.iter().filter(|d| d.correct).map(|d| d.decided).collect()
}

/// Distinct domain values decided by correct processes.
pub fn distinct_correct_domain_decisions(decisions: &[DecisionRecord]) -> BTreeSet<Value> {
    decisions
        .iter()
        .filter(|d| d.correct && d.decided.is_domain())
        .map(|d| d.decided)
        .collect()
}

/// Human-readable list of values, for verdict evidence.
pub fn render_values<'a>(values: impl IntoIterator<Item = &'a Value>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&alloc::format!("{v}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_bound_matches_frozen_examples() {
        let k = |n, t, p| SystemConfig::new(n, t, p).unwrap().k_bound().unwrap();
        assert_eq!(k(4, 2, Protocol::TwoRound), 3);
        assert_eq!(k(4, 2, Protocol::TrbOptimal), 2);
        assert_eq!(k(5, 2, Protocol::AsyncSnapshot), 3);
        assert_eq!(k(3, 1, Protocol::AsyncSnapshot), 2);
        assert_eq!(k(7, 3, Protocol::AsyncSnapshot), 4);
        assert_eq!(k(6, 4, Protocol::TrbOptimal), 3);
        assert_eq!(k(5, 2, Protocol::TrbOptimal), 1);
        assert_eq!(k(7, 5, Protocol::TwoRound), 4);
    }

    #[test]
    fn validation_diagnostics() {
        assert!(matches!(
            SystemConfig::new(0, 0, Protocol::TwoRound),
            Err(ConfigError::NoProcesses)
        ));
        assert!(matches!(
            SystemConfig::new(3, 3, Protocol::TwoRound),
            Err(ConfigError::FaultBudgetTooLarge { .. })
        ));
        assert!(matches!(
            SystemConfig::new(4, 2, Protocol::AsyncSnapshot),
            Err(ConfigError::NeedsHonestMajorityMargin { .. })
        ));
        // Synchronous protocols tolerate n <= 2t.
        assert!(SystemConfig::new(4, 2, Protocol::TwoRound).is_ok());
        assert!(SystemConfig::new(4, 3, Protocol::TrbOptimal).is_ok());
    }

    #[test]
    fn value_ordering_puts_domain_tokens_in_token_order() {
        let mut vs = alloc::vec![Value::Domain(9), Value::Bottom, Value::Domain(2), Value::SenderFaulty];
        vs.sort();
        assert_eq!(
            vs,
            alloc::vec![Value::Bottom, Value::SenderFaulty, Value::Domain(2), Value::Domain(9)]
        );
    }

    #[test]
    fn view_vector_counting_and_containment() {
        let a = ViewVector(alloc::vec![Value::Domain(1), Value::Bottom, Value::Domain(2)]);
        let b = ViewVector(alloc::vec![Value::Domain(1), Value::Domain(3), Value::Domain(2)]);
        assert_eq!(a.count_of(Value::Domain(1)), 1);
        assert_eq!(a.non_bottom(), 2);
        assert!(a.contained_in(&b));
        assert!(!b.contained_in(&a));
        assert_eq!(a.domain_values(), alloc::vec![Value::Domain(1), Value::Domain(2)]);
    }

    proptest::proptest! {
        // More tolerated faults never shrink the permissible decision spread.
        #[test]
        fn k_bound_monotone_in_t(n in 1u32..40, t in 0u32..40, protocol in proptest::sample::select(
            alloc::vec![Protocol::TwoRound, Protocol::TrbOptimal, Protocol::AsyncSnapshot])) {
            let cfg = SystemConfig { n, t, protocol };
            if cfg.validate().is_ok() {
                let k = cfg.k_bound().unwrap();
                proptest::prop_assert!(k >= 1);
                if t > 0 {
                    let smaller = SystemConfig { n, t: t - 1, protocol };
                    if smaller.validate().is_ok() {
                        proptest::prop_assert!(smaller.k_bound().unwrap() <= k);
                    }
                }
            }
        }
    }
}
