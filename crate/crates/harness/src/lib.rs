//! Verification harness for blind relay rooms: a multi-client ceremony
//! simulator plus the audits run over what it captured.
//!
//! - [`audit`] scans relay logs, state dumps and metrics for room keys and
//!   plaintext PSBT bytes.
//! - [`storage`] measures what a run left on disk.
//! - [`traffic`] splits requests into cacheable static fetches and live
//!   WebSocket sessions.
//! - [`sabotage`] holds leaky relay taps that the audits must catch.

pub mod audit;
pub mod ceremony;
pub mod fixtures;
pub mod report;
pub mod sabotage;
pub mod scenario;
pub mod storage;
pub mod stub;
pub mod traffic;
pub mod transcript;
pub mod world;

pub use audit::{audit_blindness, client_hygiene, BlindnessReport, Secrets};
pub use ceremony::{run_batch, run_ceremony, run_seeds, CeremonyOutcome, HarnessError, OpenRoom};
pub use report::RunReport;
pub use sabotage::{KeyRegistry, Sabotage};
pub use scenario::{Ending, Member, Scenario, ScenarioError, Step};
pub use storage::{storage_probe, DirSnapshot, StorageDelta};
pub use stub::{StubEndpoint, StubMode};
pub use traffic::{traffic_report, TrafficReport};
pub use transcript::{Collector, Transcript};
pub use world::World;
