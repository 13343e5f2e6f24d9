//! On-disk scenario format.
//!
//! A scenario file is one TOML document with fixed top-level field names:
//! `n`, `t`, `protocol`, `values`, `adversary`, `seed`, `schedule`,
//! `expect`. `values` lists one domain token per process in process-id
//! order; `adversary` is a table tagged by `kind`; `schedule` only applies
//! to the snapshot protocol. Everything except `n`, `t`, `protocol`, and
//! `values` is optional. Unknown fields are rejected so a typo fails the
//! parse instead of silently changing the run.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::Deserialize;

use ksa_core::model::{ProcessId, Protocol, SystemConfig, Value};
use ksa_core::scenarios::{AdversarySpec, Expectation, Scenario};
use ksa_core::shm_engine::Schedule;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: u32,
    pub t: u32,
    pub protocol: Protocol,
    /// One positive domain token per process.
    pub values: Vec<u32>,
    pub adversary: Option<AdversarySpec>,
    pub seed: Option<u64>,
    pub schedule: Option<Schedule>,
    pub expect: Option<Expectation>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.values.len() != self.n as usize {
            bail!(
                "field `values` lists {} entries but n = {}; one value per process is required",
                self.values.len(),
                self.n
            );
        }
        if let Some(v) = self.values.iter().find(|&&v| v == 0) {
            bail!("field `values` contains {v}; domain tokens are positive integers");
        }
        let initial_values: BTreeMap<ProcessId, Value> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| (ProcessId(i as u32), Value::Domain(v)))
            .collect();
        Ok(Scenario {
            cfg: SystemConfig { n: self.n, t: self.t, protocol: self.protocol },
            initial_values,
            adversary: self.adversary.unwrap_or(AdversarySpec::None),
            schedule: self.schedule,
            seed: self.seed.unwrap_or(0),
            expected: self.expect,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_parses() {
        let file: ScenarioFile = toml::from_str(
            r#"
            n = 4
            t = 2
            protocol = "trb-optimal"
            values = [1, 1, 2, 2]
            "#,
        )
        .unwrap();
        let scenario = file.into_scenario().unwrap();
        assert_eq!(scenario.cfg.n, 4);
        assert_eq!(scenario.initial_values[&ProcessId(3)], Value::Domain(2));
        assert_eq!(scenario.adversary, AdversarySpec::None);
        assert_eq!(scenario.seed, 0);
    }

    #[test]
    fn full_file_parses() {
        let file: ScenarioFile = toml::from_str(
            r#"
            n = 4
            t = 1
            protocol = "two-round"
            values = [3, 3, 3, 3]
            seed = 99

            [adversary]
            kind = "equivocator"
            id = 2
            first = { domain = 7 }
            second = { domain = 9 }

            [expect]
            exact_rounds = 2
            max_distinct = 2
            "#,
        )
        .unwrap();
        let scenario = file.into_scenario().unwrap();
        assert!(matches!(scenario.adversary, AdversarySpec::Equivocator { .. }));
        assert_eq!(scenario.expected.unwrap().exact_rounds, Some(2));
        assert_eq!(scenario.seed, 99);
    }

    #[test]
    fn snapshot_file_parses_schedule_and_crash_plan() {
        let file: ScenarioFile = toml::from_str(
            r#"
            n = 3
            t = 1
            protocol = "async-snapshot"
            values = [1, 2, 3]
            schedule = { seeded = 5 }

            [adversary]
            kind = "crash_plan"
            after = [[2, 0]]
            "#,
        )
        .unwrap();
        let scenario = file.into_scenario().unwrap();
        assert_eq!(scenario.schedule, Some(Schedule::Seeded(5)));
        assert!(matches!(scenario.adversary, AdversarySpec::CrashPlan { .. }));
    }

    #[test]
    fn wrong_value_count_is_rejected() {
        let file: ScenarioFile = toml::from_str(
            r#"
            n = 4
            t = 1
            protocol = "two-round"
            values = [1, 2]
            "#,
        )
        .unwrap();
        let err = file.into_scenario().unwrap_err().to_string();
        assert!(err.contains("2 entries but n = 4"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<ScenarioFile>(
            r#"
            n = 3
            t = 1
            protocol = "two-round"
            values = [1, 2, 3]
            rounds = 7
            "#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("rounds"), "{err}");
    }
}
