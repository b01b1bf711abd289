//! Ceremony scripts: who joins, who uploads which signature, and how the
//! room ends. Scripts are plain data, loadable from JSON, and generated
//! deterministically from a seed.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::fixtures;

/// Signature quorum of every fixture set.
pub const FIXTURE_THRESHOLD: usize = 2;
pub const FIXTURE_KEYS: usize = 3;
pub const MAX_GUESTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Coordinator,
    Guest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Join { guest: usize },
    /// `by` uploads the fixture PSBT signed by `signer`.
    Upload { by: Member, signer: char },
    Lock,
    /// A latecomer tries to join and must be turned away.
    JoinRejected,
    Leave { guest: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ending {
    /// Broadcast, then the coordinator closes the room.
    Close,
    /// Everyone goes quiet and the room idles past its TTL.
    Expire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub fixture: String,
    pub n_guests: usize,
    pub m: usize,
    pub n: usize,
    pub schedule: Vec<Step>,
    pub ending: Ending,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("infeasible: quorum needs {m} signatures but the schedule provides {provided}")]
    Infeasible { m: usize, provided: usize },
    #[error("no fixture set named {0:?}")]
    UnknownFixture(String),
    #[error("signer {0:?} is not one of the fixture keys")]
    UnknownSigner(char),
    #[error("step {index}: guest {guest} is not in the room")]
    NotPresent { index: usize, guest: usize },
    #[error("step {index}: guest {guest} joins twice")]
    DuplicateJoin { index: usize, guest: usize },
    #[error("step {index}: a join after the lock")]
    JoinAfterLock { index: usize },
    #[error("step {index}: rejected join without a lock")]
    RejectWithoutLock { index: usize },
}

impl Scenario {
    /// The shape used throughout: two guests each upload one signature.
    pub fn golden(fixture: &str) -> Self {
        Self {
            seed: 0,
            fixture: fixture.into(),
            n_guests: 2,
            m: FIXTURE_THRESHOLD,
            n: FIXTURE_KEYS,
            schedule: vec![
                Step::Join { guest: 0 },
                Step::Join { guest: 1 },
                Step::Upload { by: Member::Guest(0), signer: 'a' },
                Step::Upload { by: Member::Guest(1), signer: 'b' },
            ],
            ending: Ending::Close,
        }
    }

    pub fn random(seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let sets = fixtures::all();
        let fixture = sets[rng.random_range(0..sets.len())].name.to_owned();
        let n_guests = rng.random_range(0..=MAX_GUESTS);

        let mut signers = vec!['a', 'b', 'c'];
        signers.shuffle(&mut rng);
        signers.truncate(rng.random_range(FIXTURE_THRESHOLD..=FIXTURE_KEYS));
        let mut schedule: Vec<Step> = signers
            .iter()
            .map(|&signer| {
                let by = match n_guests {
                    0 => Member::Coordinator,
                    _ if rng.random_bool(0.25) => Member::Coordinator,
                    g => Member::Guest(rng.random_range(0..g)),
                };
                Step::Upload { by, signer }
            })
            .collect();

        for guest in 0..n_guests {
            let first_upload = schedule
                .iter()
                .position(|s| matches!(s, Step::Upload { by: Member::Guest(g), .. } if *g == guest))
                .unwrap_or(schedule.len());
            let at = rng.random_range(0..=first_upload);
            schedule.insert(at, Step::Join { guest });
        }

        if rng.random_bool(0.3) {
            let after_joins = schedule.iter().rposition(|s| matches!(s, Step::Join { .. })).map_or(0, |i| i + 1);
            let at = rng.random_range(after_joins..=schedule.len());
            schedule.insert(at, Step::Lock);
            if rng.random_bool(0.5) {
                schedule.insert(at + 1, Step::JoinRejected);
            }
        }

        if rng.random_bool(0.3) {
            let uploads: Vec<Step> = schedule.iter().copied().filter(|s| matches!(s, Step::Upload { .. })).collect();
            schedule.push(uploads[rng.random_range(0..uploads.len())]);
        }

        if n_guests > 0 && rng.random_bool(0.3) {
            schedule.push(Step::Leave { guest: rng.random_range(0..n_guests) });
        }

        let ending = if rng.random_bool(0.3) { Ending::Expire } else { Ending::Close };
        Self { seed, fixture, n_guests, m: FIXTURE_THRESHOLD, n: FIXTURE_KEYS, schedule, ending }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Distinct signatures the schedule uploads.
    pub fn signatures_provided(&self) -> usize {
        let mut seen: Vec<char> = Vec::new();
        for s in &self.schedule {
            if let Step::Upload { signer, .. } = s {
                if !seen.contains(signer) {
                    seen.push(*signer);
                }
            }
        }
        seen.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        fixtures::by_name(&self.fixture).ok_or_else(|| ScenarioError::UnknownFixture(self.fixture.clone()))?;
        let provided = self.signatures_provided();
        if self.m > provided || self.m > self.n {
            return Err(ScenarioError::Infeasible { m: self.m, provided });
        }
        let mut present = vec![false; self.n_guests];
        let mut joined = vec![false; self.n_guests];
        let mut locked = false;
        for (index, step) in self.schedule.iter().enumerate() {
            let check = |guest: usize, present: &[bool]| {
                if present.get(guest).copied().unwrap_or(false) {
                    Ok(())
                } else {
                    Err(ScenarioError::NotPresent { index, guest })
                }
            };
            match *step {
                Step::Join { guest } => {
                    if locked {
                        return Err(ScenarioError::JoinAfterLock { index });
                    }
                    if guest >= self.n_guests {
                        return Err(ScenarioError::NotPresent { index, guest });
                    }
                    if joined[guest] {
                        return Err(ScenarioError::DuplicateJoin { index, guest });
                    }
                    joined[guest] = true;
                    present[guest] = true;
                }
                Step::Upload { by, signer } => {
                    if !matches!(signer, 'a' | 'b' | 'c') {
                        return Err(ScenarioError::UnknownSigner(signer));
                    }
                    if let Member::Guest(g) = by {
                        check(g, &present)?;
                    }
                }
                Step::Lock => locked = true,
                Step::JoinRejected if !locked => return Err(ScenarioError::RejectWithoutLock { index }),
                Step::JoinRejected => {}
                Step::Leave { guest } => {
                    check(guest, &present)?;
                    present[guest] = false;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_scenarios_are_valid_and_seeded() {
        for seed in 0..500 {
            let s = Scenario::random(seed);
            assert_eq!(s.validate(), Ok(()), "seed {seed}: {s:?}");
            assert_eq!(s, Scenario::random(seed));
        }
        assert_ne!(Scenario::random(1), Scenario::random(2));
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::random(7);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        assert!(Scenario::golden("p2wsh_2of3").to_json().contains("\"step\": \"upload\""));
    }

    #[test]
    fn rejects_infeasible_and_malformed() {
        let mut s = Scenario::golden("p2wsh_2of3");
        s.schedule.pop();
        assert_eq!(s.validate(), Err(ScenarioError::Infeasible { m: 2, provided: 1 }));

        let mut s = Scenario::golden("p2wsh_2of3");
        s.schedule.swap(1, 3);
        assert_eq!(s.validate(), Err(ScenarioError::NotPresent { index: 1, guest: 1 }));

        let mut s = Scenario::golden("p2wsh_2of3");
        s.schedule.insert(1, Step::Lock);
        assert_eq!(s.validate(), Err(ScenarioError::JoinAfterLock { index: 2 }));

        let mut s = Scenario::golden("p2wsh_2of3");
        s.fixture = "nope".into();
        assert_eq!(s.validate(), Err(ScenarioError::UnknownFixture("nope".into())));
    }
}
