//! Deterministic simulation laboratory for k-set agreement under Byzantine
//! and crash failures.
//!
//! The crate hosts three agreement protocols over two execution models:
//!
//! * a lock-step synchronous message-passing engine ([`sync_engine`]) running
//!   a two-round matrix protocol ([`ksa_two_round`]) and a terminating
//!   reliable broadcast stack ([`trb`], [`ksa_trb`]),
//! * an asynchronous shared-memory engine ([`shm_engine`]) with an atomic
//!   snapshot object running a collect-and-threshold protocol
//!   ([`ksa_snapshot`]).
//!
//! Signatures are simulated structurally ([`authsig`]): a chain records who
//! signed it, and the engines enforce that a process can only emit signer
//! entries it could have produced or observed. Every run is a pure function
//! of its configuration and seed, so failures replay bit-identically.
//!
//! [`checker`] turns run records into property verdicts and hosts the
//! exhaustive oracles; [`scenarios`] builds canonical adversaries and
//! lower-bound witness runs; [`fuzz`] drives seeded randomized campaigns.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the command
//! line live in the companion `ksa-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod authsig;
pub mod checker;
pub mod fuzz;
pub mod ksa_snapshot;
pub mod ksa_trb;
pub mod ksa_two_round;
pub mod model;
pub mod scenarios;
pub mod shm_engine;
pub mod sync_engine;
pub mod trb;

pub use model::{Protocol, ProcessId, SystemConfig, Value};
