use blindroom_client::{verify_receipt, Guest, SessionError, SteppingClock};
use blindroom_core::ErrorCode;
use blindroom_harness::fixtures::{MIXED_2OF3, P2WSH_2OF3};
use blindroom_harness::{
    audit_blindness, client_hygiene, run_ceremony, run_seeds, Ending, HarnessError, Member, OpenRoom, RunReport,
    Sabotage, Scenario, ScenarioError, Secrets, Step, World,
};
use chrono::{TimeZone, Utc};
use std::sync::Arc;

async fn world(dir: &tempfile::TempDir) -> World {
    World::start(dir.path(), None).await.unwrap()
}

#[tokio::test]
async fn golden_ceremony_broadcasts_the_reference_transaction() {
    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    let out = run_ceremony(&w, 0, Scenario::golden("p2wsh_2of3")).await.unwrap();
    assert_eq!(out.final_hex.as_deref(), Some(P2WSH_2OF3.final_hex('a', 'b')));
    assert_eq!(out.txid.as_deref(), Some(P2WSH_2OF3.txid()));
    assert_eq!(w.stub.received(), vec![P2WSH_2OF3.final_hex('a', 'b').to_owned()]);
    assert!(out.converged);
    assert_eq!(out.anomalies, 0);
    let receipt = out.receipt.expect("receipt emitted");
    verify_receipt(&receipt).unwrap();
    assert_eq!(w.relay().room_count(), 0);
}

#[tokio::test]
async fn coordinator_alone_reaches_expiry() {
    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    let s = Scenario {
        seed: 0,
        fixture: "mixed_2of3".into(),
        n_guests: 0,
        m: 2,
        n: 3,
        schedule: vec![
            Step::Upload { by: Member::Coordinator, signer: 'b' },
            Step::Upload { by: Member::Coordinator, signer: 'c' },
        ],
        ending: Ending::Expire,
    };
    let out = run_ceremony(&w, 0, s).await.unwrap();
    assert!(out.expired);
    assert_eq!(out.txid, None);
    assert!(out.receipt.unwrap().contains("\"by\":\"relay\""));
    assert_eq!(w.relay().room_count(), 0);
}

#[tokio::test]
async fn upload_order_does_not_change_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    let mut forward = Scenario::golden("mixed_2of3");
    let a = run_ceremony(&w, 0, forward.clone()).await.unwrap();
    forward.schedule.swap(2, 3);
    let b = run_ceremony(&w, 1, forward).await.unwrap();
    assert_eq!(a.fingerprint, b.fingerprint);
    assert_eq!(a.final_hex, b.final_hex);
    assert_eq!(a.final_hex.as_deref(), Some(MIXED_2OF3.final_hex('b', 'a')));
}

#[tokio::test]
async fn locked_room_turns_latecomers_away() {
    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    let mut s = Scenario::golden("p2wsh_2of3");
    s.schedule.insert(2, Step::Lock);
    s.schedule.insert(3, Step::JoinRejected);
    let out = run_ceremony(&w, 0, s).await.unwrap();
    assert_eq!(out.rejected_join, Some(ErrorCode::RoomLocked));
    assert!(out.txid.is_some());
}

#[tokio::test]
async fn infeasible_scenarios_are_refused_before_any_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    let mut s = Scenario::golden("p2wsh_2of3");
    s.schedule.truncate(3);
    let err = run_ceremony(&w, 0, s).await.unwrap_err();
    assert!(matches!(err, HarnessError::Scenario(ScenarioError::Infeasible { m: 2, provided: 1 })));
    assert!(w.transcript().frames.is_empty());
}

#[tokio::test]
async fn honest_runs_pass_every_audit() {
    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    let results = run_seeds(&w, 0..24, 8).await;
    let report = RunReport::build(&w, &results).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert!(report.blindness.pass(), "{:?}", report.blindness);
    assert!(report.blindness.sources_scanned > 24);
    assert!(report.storage.is_zero());
    assert_eq!(report.rooms_left, 0);
    assert_eq!(report.traffic.cacheable_fraction_static, Some(1.0));
    assert_eq!(report.traffic.cacheable_fraction_ws, Some(0.0));
    let rpv = report.traffic.requests_per_visitor.unwrap();
    assert!((2.0..=6.0).contains(&rpv), "{rpv}");

    let outcomes: Vec<_> = results.into_iter().map(Result::unwrap).collect();
    assert!(outcomes.iter().all(|o| o.converged && o.anomalies == 0));
    assert!(outcomes.iter().any(|o| o.expired) && outcomes.iter().any(|o| o.txid.is_some()));
    let secrets: Vec<Secrets> = outcomes.iter().map(|o| o.secrets.clone()).collect();
    let receipts: Vec<&str> = outcomes.iter().filter_map(|o| o.receipt.as_deref()).collect();
    assert_eq!(receipts.len(), outcomes.len());
    let hygiene = client_hygiene(&w.transcript(), &secrets, receipts);
    assert_eq!(hygiene.key, 0);
    assert_eq!(hygiene.plaintext, 0);
}

#[tokio::test]
async fn same_seeds_give_the_same_transcript_shape() {
    let mut prints = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let w = world(&dir).await;
        let results = run_seeds(&w, 100..112, 6).await;
        assert!(results.iter().all(Result::is_ok));
        prints.push(w.transcript().shape_fingerprint());
    }
    assert_eq!(prints[0], prints[1]);

    let dir = tempfile::tempdir().unwrap();
    let w = world(&dir).await;
    run_seeds(&w, 200..212, 6).await;
    assert_ne!(w.transcript().shape_fingerprint(), prints[0]);
}

async fn sabotaged(kind: Sabotage) -> (RunReport, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let w = World::start(dir.path(), Some(kind)).await.unwrap();
    let results = run_seeds(&w, 0..3, 3).await;
    let report = RunReport::build(&w, &results).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    (report, dir)
}

#[tokio::test]
async fn plaintext_logging_relay_is_caught() {
    let (report, _dir) = sabotaged(Sabotage::LogPlaintext).await;
    assert!(report.blindness.plaintext_occurrences > 0);
    assert_eq!(report.blindness.key_occurrences, 0);
    assert!(!report.blindness.pass());
}

#[tokio::test]
async fn key_logging_relay_is_caught() {
    let (report, _dir) = sabotaged(Sabotage::LogKey).await;
    assert!(report.blindness.key_occurrences > 0);
    assert!(!report.blindness.pass());
}

#[tokio::test]
async fn disk_writing_relay_is_caught() {
    let (report, _dir) = sabotaged(Sabotage::WritePayloads).await;
    assert!(report.storage.persisted_bytes > 0);
    assert!(!report.storage.new_files.is_empty());
    assert!(report.blindness.pass());
}

#[tokio::test]
async fn restart_forgets_every_room() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = world(&dir).await;
    let mut s = Scenario::golden("p2wsh_2of3");
    s.ending = Ending::Expire;
    let room = OpenRoom::open(&w, 0, s).await.unwrap();
    assert_eq!(w.relay().room_count(), 1);
    let link = room.link().clone();
    drop(room);
    w.restart().await.unwrap();
    assert_eq!(w.relay().room_count(), 0);
    let clock = Arc::new(SteppingClock::new(Utc.with_ymd_and_hms(2024, 5, 1, 0, 0, 0).unwrap(), chrono::Duration::seconds(1)));
    let err = Guest::join(&link, clock, None).await.err().expect("join fails");
    assert!(matches!(err, SessionError::Relay { code: ErrorCode::RoomNotFound, .. }), "{err:?}");
    assert!(w.storage_delta().unwrap().is_zero());
}

#[test]
fn audit_flags_planted_secrets() {
    let mut t = blindroom_harness::Transcript::default();
    let secrets = [Secrets { room_key: [9; 32], plaintexts: vec![P2WSH_2OF3.unsigned().serialize()] }];
    assert!(audit_blindness(&t, &secrets).pass());
    t.relay_log.push(format!("{{\"hex\":\"{}\"}}", hex::encode(&P2WSH_2OF3.unsigned().serialize()[40..60])));
    let r = audit_blindness(&t, &secrets);
    assert!(r.plaintext_occurrences > 0 && !r.pass());
    assert_eq!(r.details.len(), 1);
}
