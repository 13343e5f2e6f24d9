//! Seeded randomized campaigns over the scenario space.
//!
//! Every run is a pure function of `(cfg, master_seed, run_index)`: the
//! case generator derives a stream cipher state from those three numbers
//! and nothing else, so any run can be regenerated and re-executed
//! byte-for-byte from its coordinates alone. Campaigns aggregate the
//! worst observed decision diversity and every failing verdict.
//!
//! Generated cases attach the protocol's own guarantees as expectations:
//! the matrix exchange must finish in exactly two rounds and keep correct
//! decisions (bottom included) within floor(n/(n-t))+1 distinct values;
//! the broadcast stack takes t+1 rounds and keeps distinct domain
//! decisions within floor(n/(n-t)); the snapshot protocol keeps distinct
//! domain decisions within floor((n-t)/(n-2t)).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checker::Verdict;
use crate::model::{
    distinct_correct_decisions, distinct_correct_domain_decisions, ProcessId, Protocol,
    SystemConfig, Value,
};
use crate::scenarios::{
    execute_scenario, AdversarySpec, Expectation, Scenario, ScenarioError, ScenarioReport,
};
use crate::shm_engine::Schedule;

/// One failing fuzz run: the coordinates plus the verdicts that failed.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FuzzViolation {
    pub run_index: u64,
    pub failed: Vec<Verdict>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub cfg: SystemConfig,
    pub master_seed: u64,
    pub runs: u64,
    /// Worst distinct decisions among correct processes, bottom included.
    pub max_distinct: u32,
    /// Worst distinct domain decisions among correct processes.
    pub max_distinct_domain: u32,
    pub violations: Vec<FuzzViolation>,
}

impl FuzzSummary {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Splitmix-style mixing so neighbouring run indices get unrelated streams.
fn case_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut z = master_seed ^ run_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn random_inputs(rng: &mut ChaCha8Rng, n: u32) -> BTreeMap<ProcessId, Value> {
    // A quarter of the cases are unanimous so the conditional validity
    // check gets regular non-vacuous exercise.
    if rng.gen_ratio(1, 4) {
        let v = Value::Domain(rng.gen_range(1..=n + 2));
        crate::model::all_processes(n).map(|p| (p, v)).collect()
    } else {
        crate::model::all_processes(n)
            .map(|p| (p, Value::Domain(rng.gen_range(1..=n + 2))))
            .collect()
    }
}

fn sample_ids(rng: &mut ChaCha8Rng, n: u32, count: usize) -> Vec<ProcessId> {
    let mut ids: Vec<ProcessId> = crate::model::all_processes(n).collect();
    ids.shuffle(rng);
    ids.truncate(count);
    ids.sort();
    ids
}

/// Deterministically generates the `run_index`-th case of a campaign.
pub fn fuzz_case(cfg: SystemConfig, master_seed: u64, run_index: u64) -> Scenario {
    let mut rng = case_rng(master_seed, run_index);
    let initial_values = random_inputs(&mut rng, cfg.n);
    let seed = rng.gen();
    match cfg.protocol {
        Protocol::TwoRound | Protocol::TrbOptimal => {
            let byz = rng.gen_range(0..=cfg.t) as usize;
            let ids = sample_ids(&mut rng, cfg.n, byz);
            let adversary = if ids.is_empty() {
                AdversarySpec::None
            } else {
                AdversarySpec::RandomByzantine { ids, seed: rng.gen() }
            };
            let expected = match cfg.protocol {
                Protocol::TwoRound => Expectation {
                    max_distinct: cfg.k_bound().ok(),
                    exact_rounds: Some(2),
                    ..Expectation::default()
                },
                _ => Expectation {
                    max_distinct_domain: cfg.k_bound().ok(),
                    exact_rounds: Some(cfg.t + 1),
                    ..Expectation::default()
                },
            };
            Scenario {
                cfg,
                initial_values,
                adversary,
                schedule: None,
                seed,
                expected: Some(expected),
            }
        }
        Protocol::AsyncSnapshot => {
            let crashes = rng.gen_range(0..=cfg.t) as usize;
            let ids = sample_ids(&mut rng, cfg.n, crashes);
            let after: Vec<(ProcessId, u64)> =
                ids.into_iter().map(|p| (p, rng.gen_range(0..=2 * cfg.n as u64))).collect();
            let adversary = if after.is_empty() {
                AdversarySpec::None
            } else {
                AdversarySpec::CrashPlan { after }
            };
            let expected = Expectation {
                max_distinct_domain: cfg.k_bound().ok(),
                ..Expectation::default()
            };
            Scenario {
                cfg,
                initial_values,
                adversary,
                schedule: Some(Schedule::Seeded(rng.gen())),
                seed,
                expected: Some(expected),
            }
        }
    }
}

/// Regenerates and re-executes one run of a campaign.
pub fn replay(
    cfg: SystemConfig,
    master_seed: u64,
    run_index: u64,
) -> Result<(Scenario, ScenarioReport), ScenarioError> {
    let scenario = fuzz_case(cfg, master_seed, run_index);
    let report = execute_scenario(&scenario)?;
    Ok((scenario, report))
}

/// Runs `runs` generated cases and aggregates verdicts and worst-case
/// decision diversity.
pub fn fuzz_campaign(
    cfg: SystemConfig,
    runs: u64,
    master_seed: u64,
) -> Result<FuzzSummary, ScenarioError> {
    cfg.validate()?;
    let mut summary = FuzzSummary {
        cfg,
        master_seed,
        runs,
        max_distinct: 0,
        max_distinct_domain: 0,
        violations: Vec::new(),
    };
    for run_index in 0..runs {
        let scenario = fuzz_case(cfg, master_seed, run_index);
        let report = execute_scenario(&scenario)?;
        let decisions = report.decisions();
        summary.max_distinct =
            summary.max_distinct.max(distinct_correct_decisions(decisions).len() as u32);
        summary.max_distinct_domain = summary
            .max_distinct_domain
            .max(distinct_correct_domain_decisions(decisions).len() as u32);
        let failed: Vec<Verdict> =
            report.verdicts.iter().filter(|v| !v.pass).cloned().collect();
        if !failed.is_empty() {
            summary.violations.push(FuzzViolation { run_index, failed });
        }
    }
    Ok(summary)
}
