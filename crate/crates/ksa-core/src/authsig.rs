//! Structural simulation of unforgeable signature chains.
//!
//! A [`SignedChain`] is payload plus an ordered signer list; appending a
//! signer stands in for signing the whole previous message, so a received
//! chain also yields every prefix of itself. No real cryptography is
//! involved. Unforgeability is enforced by the engines: a process may only
//! emit chains derivable from what it received plus its own signature
//! ([`ChainKnowledge::may_emit`]).
//!
//! Receive-time validity for a broadcast instance is [`is_valid`]: pairwise
//! distinct signers, the instance's designated sender first, and at least
//! `round` signatures. The length requirement is what stops a short chain
//! injected in the last round from splitting deliveries; dropping it is
//! observable through [`ValidityMode::NoLengthRule`], which the exhaustive
//! oracle uses to demonstrate the resulting agreement violations.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ProcessId, Value};

/// Payload plus ordered signer list. Immutable once built; construction
/// goes through [`sign`], [`extend`], or the explicitly adversarial
/// [`SignedChain::assemble`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SignedChain {
    payload: Value,
    signers: Vec<ProcessId>,
}

impl SignedChain {
    /// Builds an arbitrary chain without any capability. This simulates a
    /// forged wire message; engines reject it unless it happens to be
    /// derivable for its emitter.
    pub fn assemble(payload: Value, signers: Vec<ProcessId>) -> Self {
        SignedChain { payload, signers }
    }

    pub fn payload(&self) -> Value {
        self.payload
    }

    pub fn signers(&self) -> &[ProcessId] {
        &self.signers
    }

    pub fn len(&self) -> usize {
        self.signers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signers.is_empty()
    }

    pub fn origin(&self) -> Option<ProcessId> {
        self.signers.first().copied()
    }

    pub fn contains_signer(&self, pid: ProcessId) -> bool {
        self.signers.contains(&pid)
    }

    fn prefix(&self, len: usize) -> SignedChain {
        SignedChain { payload: self.payload, signers: self.signers[..len].to_vec() }
    }
}

impl fmt::Display for SignedChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.payload)?;
        for (i, s) in self.signers.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// The only handle that appends a process's signer entry. A capability is
/// bound to its owner: holding one (or a clone of one) never lets a process
/// append anyone else's id. The engines additionally verify every emitted
/// chain against the emitter's [`ChainKnowledge`], so a hand-assembled
/// capability grants nothing the knowledge check would not allow.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SigningCapability {
    owner: ProcessId,
}

impl SigningCapability {
    pub fn issue(owner: ProcessId) -> Self {
        SigningCapability { owner }
    }

    pub fn owner(&self) -> ProcessId {
        self.owner
    }
}

/// Attempted to sign a non-proposable payload.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SignError(pub Value);

impl fmt::Display for SignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "only domain values are signable, got {}", self.0)
    }
}

impl core::error::Error for SignError {}

/// Fresh single-signer chain over a domain value.
pub fn sign(cap: &SigningCapability, payload: Value) -> Result<SignedChain, SignError> {
    if !payload.is_domain() {
        return Err(SignError(payload));
    }
    Ok(SignedChain { payload, signers: alloc::vec![cap.owner] })
}

/// New chain with the capability owner's signature appended. The input is
/// untouched; duplicate signers are representable and rejected at receipt.
pub fn extend(cap: &SigningCapability, chain: &SignedChain) -> SignedChain {
    let mut signers = chain.signers.clone();
    signers.push(cap.owner);
    SignedChain { payload: chain.payload, signers }
}

/// Whether receive-time validation enforces the minimum-length rule.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityMode {
    Strict,
    /// Diagnostic mode: accept chains shorter than the receive round.
    NoLengthRule,
}

/// Receive-time validity of a chain for a broadcast instance: signers
/// pairwise distinct, `signers[0]` the designated sender, and at least
/// `round` signatures (strict mode).
pub fn is_valid(chain: &SignedChain, sender: ProcessId, round: u32) -> bool {
    is_valid_with(ValidityMode::Strict, chain, sender, round)
}

pub fn is_valid_with(
    mode: ValidityMode,
    chain: &SignedChain,
    sender: ProcessId,
    round: u32,
) -> bool {
    if chain.origin() != Some(sender) {
        return false;
    }
    let mut seen = BTreeSet::new();
    if !chain.signers.iter().all(|s| seen.insert(*s)) {
        return false;
    }
    match mode {
        ValidityMode::Strict => chain.len() >= round as usize,
        ValidityMode::NoLengthRule => true,
    }
}

/// Everything one process may legitimately put on the wire: the prefix
/// closure of chains it received, extended by its own signature and fresh
/// self-signed chains. Engines keep one per process and consult it both to
/// reject forgeries and to enumerate template-adversary options.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ChainKnowledge {
    received: BTreeSet<SignedChain>,
}

impl ChainKnowledge {
    pub fn new() -> Self {
        ChainKnowledge::default()
    }

    /// Records a received chain together with all its prefixes (signing a
    /// chain embeds the chain being signed).
    pub fn grant(&mut self, chain: &SignedChain) {
        for len in 1..=chain.len() {
            self.received.insert(chain.prefix(len));
        }
    }

    /// True when `owner` could have produced `chain` honestly: after
    /// stripping trailing `owner` signatures it is either empty (a fresh
    /// self-signed domain value) or something `owner` received.
    pub fn may_emit(&self, owner: ProcessId, chain: &SignedChain) -> bool {
        if chain.is_empty() || !chain.payload.is_domain() {
            return false;
        }
        let mut len = chain.len();
        while len > 0 && chain.signers[len - 1] == owner {
            len -= 1;
        }
        if len == 0 {
            return true;
        }
        self.received.contains(&chain.prefix(len))
    }

    /// Received chains (prefix-closed), in chain order.
    pub fn received(&self) -> impl Iterator<Item = &SignedChain> {
        self.received.iter()
    }

    /// All chains `owner` may emit with the given payload: received ones
    /// plus single extensions and the fresh self-signed chain.
    pub fn emittable(&self, owner: ProcessId, payload: Value) -> Vec<SignedChain> {
        let mut out = Vec::new();
        if payload.is_domain() {
            out.push(SignedChain { payload, signers: alloc::vec![owner] });
        }
        for c in self.received.iter().filter(|c| c.payload == payload) {
            out.push(c.clone());
            if !c.contains_signer(owner) {
                let mut signers = c.signers.clone();
                signers.push(owner);
                out.push(SignedChain { payload, signers });
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Deterministic pick of the chain a template adversary sends for
    /// `payload` at `round`: the best emittable chain that passes receiver
    /// validation under `mode`, preferring chains the recipient has not
    /// signed, then shorter, then lexicographically smaller signer lists.
    /// `None` when nothing would survive validation.
    pub fn canonical_injection(
        &self,
        owner: ProcessId,
        payload: Value,
        sender: ProcessId,
        round: u32,
        recipient: ProcessId,
        mode: ValidityMode,
    ) -> Option<SignedChain> {
        self.emittable(owner, payload)
            .into_iter()
            .filter(|c| is_valid_with(mode, c, sender, round))
            .min_by_key(|c| (c.contains_signer(recipient), c.len(), c.signers.clone()))
    }
}
