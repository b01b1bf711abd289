//! The JSON report of a harness run.

use std::io;

use serde::Serialize;

use crate::audit::{audit_blindness, BlindnessReport, Secrets};
use crate::ceremony::{CeremonyOutcome, HarnessError};
use crate::storage::StorageDelta;
use crate::traffic::{traffic_report, TrafficReport};
use crate::world::World;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub ceremonies: usize,
    pub completed: usize,
    pub broadcast: usize,
    pub expired: usize,
    pub failures: Vec<String>,
    pub blindness: BlindnessReport,
    pub storage: StorageDelta,
    pub traffic: TrafficReport,
    pub rooms_left: usize,
    pub shape_fingerprint: String,
}

impl RunReport {
    pub fn build(world: &World, results: &[Result<CeremonyOutcome, HarnessError>]) -> io::Result<Self> {
        let transcript = world.transcript();
        let outcomes: Vec<&CeremonyOutcome> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let secrets: Vec<Secrets> = outcomes.iter().map(|o| o.secrets.clone()).collect();
        Ok(Self {
            ceremonies: results.len(),
            completed: outcomes.len(),
            broadcast: outcomes.iter().filter(|o| o.txid.is_some()).count(),
            expired: outcomes.iter().filter(|o| o.expired).count(),
            failures: results.iter().filter_map(|r| r.as_ref().err()).map(|e| e.to_string()).collect(),
            blindness: audit_blindness(&transcript, &secrets),
            storage: world.storage_delta()?,
            traffic: traffic_report(&transcript),
            rooms_left: world.relay().room_count(),
            shape_fingerprint: transcript.shape_fingerprint(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
