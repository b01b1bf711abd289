//! Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
//! when a check that can run here does not hold.

mod common;

use std::fmt::Display;
use std::future::Future;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use blindroom_client::{
    verify_receipt, Coordinator, CoordinatorSession, CredentialStore, DirSink, Guest, MemorySink, MemoryStore,
    Participant, ReceiptSink, RoomMaterial, SessionError, SteppingClock, WallClock, WsTransport,
};
use blindroom_core::crypto::{aes256gcm_open, aes256gcm_seal, associated_data, encrypt_with_nonce};
use blindroom_core::{
    decode_wire, decrypt, encode_wire, encrypt, AdminAction, AdminSecret, EncryptedEnvelope, ErrorCode, NotifyEvent,
    Purpose, RoomId, RoomKey, SessionId, WireMessage,
};
use blindroom_harness::fixtures::{self, P2WSH_2OF3};
use blindroom_harness::{
    client_hygiene, run_seeds, Ending, OpenRoom, RunReport, Sabotage, Scenario, Secrets, World,
};
use blindroom_psbt::{combine, Psbt};
use blindroom_relay::{Connection, ManualClock, MemoryLog, Outbound, Relay, RelayConfig};
use chrono::{TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tokio::sync::mpsc::UnboundedReceiver;

enum Verdict {
    Pass,
    Fail(String),
    /// Every check that can run passed, but part of the criterion needs
    /// material this build cannot obtain.
    Incomplete(String),
}

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: Display>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

async fn timed<F: Future<Output = Check>>(limit: Duration, f: F) -> Check {
    let started = Instant::now();
    match tokio::time::timeout(limit, f).await {
        Err(_) => Err(format!("did not finish within {limit:?}")),
        Ok(r) => {
            r?;
            let took = started.elapsed();
            ensure!(took < limit, "took {took:?}, limit {limit:?}");
            Ok(())
        }
    }
}

fn wall_clock() -> Arc<dyn WallClock> {
    Arc::new(SteppingClock::new(Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(), chrono::Duration::seconds(1)))
}

fn python_receipt_hash(path: &Path) -> Result<(String, String), String> {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../client/tests/oracles/receipt_hash.py");
    let out = ok(Command::new("python3").arg(script).arg(path).output(), "python3")?;
    ensure!(out.status.success(), "oracle failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).trim().to_owned();
    let (a, b) = text.split_once(' ').ok_or("oracle output malformed")?;
    Ok((a.to_owned(), b.to_owned()))
}

// Criterion 1

async fn end_to_end() -> Check {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let w = ok(World::start(&dir.path().join("relay"), None).await, "relay")?;
    let work = dir.path().join("work");
    ok(std::fs::create_dir_all(&work), "workdir")?;
    let c = common::cli_ceremony(&w.base_url(), &w.stub.url, &work).await;
    ensure!(c.coordinator.code == Some(0), "coordinator exited {:?}: {}", c.coordinator.code, c.coordinator.all());
    for g in &c.guests {
        ensure!(g.code == Some(0), "guest exited {:?}: {}", g.code, g.all());
    }
    ensure!(c.coordinator.stdout.contains("quorum: yes"), "status never showed quorum");
    let golden = P2WSH_2OF3.final_hex('a', 'b');
    ensure!(w.stub.received() == vec![golden.to_owned()], "endpoint saw {:?}", w.stub.received());
    ensure!(c.coordinator.stdout.contains(&format!("txid: {}", P2WSH_2OF3.txid())), "endpoint did not accept the golden txid");
    let receipts = common::dir_entries(&c.receipt_dir);
    ensure!(receipts.len() == 1, "{} receipt files", receipts.len());
    let text = ok(std::fs::read_to_string(&receipts[0]), "receipt")?;
    let hash = ok(verify_receipt(&text), "receipt")?;
    let (recomputed, embedded) = python_receipt_hash(&receipts[0])?;
    ensure!(recomputed == hash && embedded == hash, "receipt hash disagrees with the oracle");
    ensure!(text.contains(P2WSH_2OF3.txid()), "receipt lacks the txid");
    ensure!(w.relay().room_count() == 0, "room survived the close");
    Ok(())
}

// Criteria 2, 3 and 4 share one run.

struct Run {
    report: RunReport,
    hygiene: (usize, usize),
    sabotage: Vec<(Sabotage, RunReport)>,
    restart: Check,
    took: Duration,
}

async fn sabotaged(kind: Sabotage) -> Result<RunReport, String> {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let w = ok(World::start(dir.path(), Some(kind)).await, "relay")?;
    let results = run_seeds(&w, 0..4, 4).await;
    ok(RunReport::build(&w, &results), "report")
}

async fn restart_check() -> Check {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let mut w = ok(World::start(dir.path(), None).await, "relay")?;
    let mut s = Scenario::golden("p2wsh_2of3");
    s.ending = Ending::Expire;
    let room = ok(OpenRoom::open(&w, 0, s).await, "open")?;
    ensure!(w.relay().room_count() == 1, "room not registered");
    let link = room.link().clone();
    drop(room);
    ok(w.restart().await, "restart")?;
    ensure!(w.relay().room_count() == 0, "registry survived a restart");
    ensure!(w.relay().metrics().active_rooms == 0, "metrics show live rooms after restart");
    match Guest::join(&link, wall_clock(), None).await {
        Err(SessionError::Relay { code: ErrorCode::RoomNotFound, .. }) => {}
        other => return Err(format!("join after restart: {:?}", other.err())),
    }
    ensure!(ok(w.storage_delta(), "probe")?.is_zero(), "restart left files");
    Ok(())
}

async fn audit_run() -> Result<Run, String> {
    let started = Instant::now();
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let w = ok(World::start(dir.path(), None).await, "relay")?;
    let results = run_seeds(&w, 0..100, 10).await;
    let report = ok(RunReport::build(&w, &results), "report")?;
    let outcomes: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let secrets: Vec<Secrets> = outcomes.iter().map(|o| o.secrets.clone()).collect();
    let receipts = outcomes.iter().filter_map(|o| o.receipt.as_deref());
    let h = client_hygiene(&w.transcript(), &secrets, receipts);
    let mut sabotage = Vec::new();
    for kind in [Sabotage::LogPlaintext, Sabotage::LogKey, Sabotage::WritePayloads] {
        sabotage.push((kind, sabotaged(kind).await?));
    }
    let restart = restart_check().await;
    Ok(Run { report, hygiene: (h.key, h.plaintext), sabotage, restart, took: started.elapsed() })
}

fn blindness(run: &Run) -> Check {
    let r = &run.report;
    ensure!(r.ceremonies >= 100, "{} ceremonies", r.ceremonies);
    ensure!(r.failures.is_empty(), "failed ceremonies: {:?}", r.failures);
    ensure!(r.blindness.sources_scanned > r.ceremonies, "only {} sources scanned", r.blindness.sources_scanned);
    ensure!(r.blindness.key_occurrences == 0, "key_occurrences = {}", r.blindness.key_occurrences);
    ensure!(r.blindness.plaintext_occurrences == 0, "plaintext_occurrences = {}", r.blindness.plaintext_occurrences);
    ensure!(run.hygiene == (0, 0), "client frames or receipts leak {:?}", run.hygiene);
    for (kind, s) in &run.sabotage {
        ensure!(s.failures.is_empty(), "{kind:?} run failed: {:?}", s.failures);
        let caught = match kind {
            Sabotage::LogPlaintext => s.blindness.plaintext_occurrences > 0,
            Sabotage::LogKey => s.blindness.key_occurrences > 0,
            Sabotage::WritePayloads => s.storage.persisted_bytes > 0 && !s.storage.new_files.is_empty(),
        };
        ensure!(caught, "{kind:?} relay went unnoticed");
    }
    ensure!(run.took < Duration::from_secs(120), "took {:?}", run.took);
    Ok(())
}

fn statelessness(run: &Run) -> Check {
    let r = &run.report;
    ensure!(r.failures.is_empty(), "failed ceremonies: {:?}", r.failures);
    ensure!(r.expired > 0, "no ceremony reached TTL expiry");
    ensure!(r.storage.is_zero(), "storage delta {:?}", r.storage);
    ensure!(r.blindness.persisted_bytes == 0, "relay reports {} persisted bytes", r.blindness.persisted_bytes);
    ensure!(r.rooms_left == 0, "{} rooms left", r.rooms_left);
    run.restart.clone()
}

fn traffic(run: &Run) -> Check {
    let t = &run.report.traffic;
    ensure!(t.visitors > 100, "{} visitors", t.visitors);
    ensure!(t.cacheable_fraction_static == Some(1.0), "cacheable_fraction_static = {:?}", t.cacheable_fraction_static);
    ensure!(t.cacheable_fraction_ws == Some(0.0), "cacheable_fraction_ws = {:?}", t.cacheable_fraction_ws);
    let rpv = t.requests_per_visitor.ok_or("no visitors")?;
    ensure!((2.0..=6.0).contains(&rpv), "requests_per_visitor = {rpv}");
    Ok(())
}

// Criterion 5

fn unhex(s: &str) -> Vec<u8> {
    if s == "-" {
        Vec::new()
    } else {
        hex::decode(s).expect("vector hex")
    }
}

fn crypto_conformance() -> Check {
    let text = include_str!("../../core/tests/data/gcm256_cavs.txt");
    let room: RoomId = "0f8fad5b-d9cb-469f-a165-70867728950e".parse().unwrap();
    let mut vectors = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let key: [u8; 32] = unhex(f[0]).try_into().map_err(|_| "key length")?;
        let iv: [u8; 12] = unhex(f[1]).try_into().map_err(|_| "iv length")?;
        let (pt, aad, ct, tag) = (unhex(f[2]), unhex(f[3]), unhex(f[4]), unhex(f[5]));
        let sealed = aes256gcm_seal(&key, &iv, &aad, &pt);
        ensure!(sealed == [ct.as_slice(), tag.as_slice()].concat(), "vector {vectors} seal mismatch");
        ensure!(aes256gcm_open(&key, &iv, &aad, &sealed).ok() == Some(pt.clone()), "vector {vectors} open");
        let mut bad = sealed.clone();
        let last = bad.len() - 1;
        bad[last] ^= 1;
        ensure!(aes256gcm_open(&key, &iv, &aad, &bad).is_err(), "vector {vectors} accepts a bad tag");
        // The same vector through the envelope, whose AAD is ours.
        let k = RoomKey::from_bytes(key);
        let env = ok(encrypt_with_nonce(&k, &iv, &room, Purpose::Psbt, &pt), "envelope")?;
        let body = aes256gcm_seal(&key, &iv, &associated_data(&room, Purpose::Psbt), &pt);
        ensure!(env.as_bytes() == [&[0x01][..], &iv, &body].concat(), "vector {vectors} envelope layout");
        ensure!(decrypt(&k, &room, Purpose::Psbt, &env).ok() == Some(pt), "vector {vectors} envelope open");
        vectors += 1;
    }
    ensure!(vectors >= 5, "only {vectors} known-answer vectors");

    let mut rng = StdRng::seed_from_u64(0x6c6f636b);
    let mut false_accepts = 0;
    for case in 0..10_000 {
        let key = RoomKey::from_bytes(rng.random());
        let room = RoomId::generate();
        let len = rng.random_range(0..2048);
        let pt: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let env = ok(encrypt(&key, &room, Purpose::Psbt, &pt), "encrypt")?;
        ensure!(decrypt(&key, &room, Purpose::Psbt, &env).ok() == Some(pt), "case {case} round trip");
        let mut bytes = env.into_bytes();
        let bit = rng.random_range(0..bytes.len() * 8);
        bytes[bit / 8] ^= 1 << (bit % 8);
        if decrypt(&key, &room, Purpose::Psbt, &EncryptedEnvelope::from_bytes(bytes)).is_ok() {
            false_accepts += 1;
        }
    }
    ensure!(false_accepts == 0, "{false_accepts} flipped envelopes accepted");
    Ok(())
}

// Criterion 6

fn psbt_conformance() -> Result<Verdict, String> {
    let mut valid = 0;
    let mut invalid = 0;
    for line in include_str!("../../psbt/tests/data/bip_vectors.txt").lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let (name, expected, bytes) = (f[0], f[1], hex::decode(f[2]).map_err(|e| e.to_string())?);
        let text = STANDARD.encode(&bytes);
        if expected == "ok" {
            let p = ok(Psbt::parse(&bytes), name)?;
            ensure!(p.serialize() == bytes, "{name} does not round-trip");
            ensure!(ok(Psbt::parse(text.as_bytes()), name)? == p, "{name} differs as base64");
            valid += name.starts_with("bip174") as usize;
        } else {
            for input in [&bytes[..], text.as_bytes()] {
                match Psbt::parse(input) {
                    Ok(_) => return Err(format!("{name} parsed")),
                    Err(e) => ensure!(e.kind() == expected, "{name}: expected {expected}, got {}", e.kind()),
                }
            }
            invalid += name.starts_with("bip174") as usize;
        }
    }
    ensure!(valid >= 6, "{valid} valid vectors");

    for set in fixtures::all() {
        let merged = ok(combine(&set.signed('a'), &set.signed('b')), "combine")?;
        ensure!(merged == set.combined_ab(), "{} combine differs from the reference combiner", set.name);
    }
    combine_properties(1000)?;

    Ok(Verdict::Incomplete(format!(
        "{valid} BIP-174 valid and {invalid} invalid vectors pass, plus 1000 combine cases; \
         the published combiner vector and the remaining BIP-174 invalid vectors are not available offline"
    )))
}

/// Random subsets of the fixtures' signatures, merged in random orders.
fn combine_properties(cases: usize) -> Check {
    let mut rng = StdRng::seed_from_u64(174);
    for case in 0..cases {
        let set = fixtures::all()[case % 2];
        let mut pool = vec![set.unsigned(), set.extraneous()];
        pool.extend(['a', 'b', 'c'].map(|s| set.signed(s)));
        let pick = |rng: &mut StdRng| -> Result<Psbt, String> {
            let mut p = set.unsigned();
            for candidate in &pool {
                if rng.random_bool(0.5) {
                    p = ok(combine(&p, candidate), "combine")?;
                }
            }
            Ok(p)
        };
        let (a, b, c) = (pick(&mut rng)?, pick(&mut rng)?, pick(&mut rng)?);
        let ab = ok(combine(&a, &b), "combine")?;
        ensure!(ab == ok(combine(&b, &a), "combine")?, "case {case}: not commutative");
        ensure!(ab.fingerprint() == ok(combine(&b, &a), "combine")?.fingerprint(), "case {case}: fingerprints differ");
        let left = ok(combine(&ab, &c), "combine")?;
        let right = ok(combine(&a, &ok(combine(&b, &c), "combine")?), "combine")?;
        ensure!(left == right, "case {case}: not associative");
        ensure!(ok(combine(&a, &a), "combine")? == a, "case {case}: not idempotent");
        ensure!(ok(combine(&ab, &a), "combine")? == ab, "case {case}: absorbing failed");
    }
    Ok(())
}

// Criterion 7

async fn admin_reply(base: &str, room: RoomId, action: AdminAction, token: EncryptedEnvelope) -> Result<WireMessage, String> {
    let mut t = ok(WsTransport::connect(base, None).await, "connect")?;
    ok(t.send(&WireMessage::Join { room_id: room }).await, "send")?;
    ensure!(matches!(ok(t.recv().await, "recv")?, Some(WireMessage::Joined { .. })), "join refused");
    ok(t.send(&WireMessage::Admin { action, presented_token: token }).await, "send")?;
    ok(t.recv().await, "recv")?.ok_or_else(|| "no reply".to_owned())
}

fn unauthorized(msg: &WireMessage) -> bool {
    matches!(msg, WireMessage::Error { code: ErrorCode::Unauthorized, .. })
}

async fn dual_factor() -> Check {
    // (a) The stored blob alone opens to nothing.
    let room = RoomId::generate();
    let key = RoomKey::generate();
    let secret = AdminSecret::generate();
    let mut store = MemoryStore::new();
    ok(store.put(room, &ok(encrypt(&key, &room, Purpose::Token, secret.as_bytes()), "seal")?), "store")?;
    let blob = store.get(room).ok_or("blob missing")?;
    for _ in 0..256 {
        ensure!(decrypt(&RoomKey::generate(), &room, Purpose::Token, &blob).is_err(), "blob opened without its key");
    }
    ensure!(decrypt(&key, &room, Purpose::Token, &blob).ok().as_deref() == Some(secret.as_bytes()), "blob does not open with its key");

    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let w = ok(World::start(dir.path(), None).await, "relay")?;
    let base = w.base_url();
    let open = |base: String| async move {
        Coordinator::create(&base, P2WSH_2OF3.unsigned(), Box::new(MemoryStore::new()), Box::new(MemorySink::new()), wall_clock(), None).await
    };
    let (link_a, coord_a) = ok(open(base.clone()).await, "create")?;
    let (link_b, _coord_b) = ok(open(base.clone()).await, "create")?;
    let comparisons = w.relay().token_comparisons();

    // (b) The key alone mints tokens the relay refuses.
    for _ in 0..8 {
        let forged = ok(encrypt(link_a.key(), &link_a.room_id(), Purpose::Token, AdminSecret::generate().as_bytes()), "seal")?;
        let reply = admin_reply(&base, link_a.room_id(), AdminAction::Close, forged).await?;
        ensure!(unauthorized(&reply), "forged token got {reply:?}");
    }

    // (c) A real token replayed in another room.
    let token_a = coord_a.session().credentials().get(link_a.room_id()).ok_or("token missing")?;
    let reply = admin_reply(&base, link_b.room_id(), AdminAction::Close, token_a.clone()).await?;
    ensure!(unauthorized(&reply), "cross-room replay got {reply:?}");
    ensure!(w.relay().room_count() == 2, "a room was closed");
    let reply = admin_reply(&base, link_a.room_id(), AdminAction::Lock, token_a).await?;
    ensure!(matches!(reply, WireMessage::Notify { event: NotifyEvent::Locked, .. }), "genuine token refused: {reply:?}");

    // (d) Every attempt went through the constant-time comparison, and it is the only one.
    ensure!(w.relay().token_comparisons() == comparisons + 10, "admin checks bypassed the counted comparison");
    constant_time_structure()
}

fn constant_time_structure() -> Check {
    let src = concat!(env!("CARGO_MANIFEST_DIR"), "/../relay/src");
    let admin = ok(std::fs::read_to_string(format!("{src}/admin.rs")), "admin.rs")?;
    ensure!(admin.contains("use subtle::ConstantTimeEq;"), "admin.rs does not import the constant-time trait");
    ensure!(admin.contains(".ct_eq("), "tokens_match does not call ct_eq");
    let mut uses = 0;
    for entry in ok(std::fs::read_dir(src), "relay/src")? {
        let path = ok(entry, "entry")?.path();
        let text = ok(std::fs::read_to_string(&path), "source")?;
        for line in text.lines() {
            if line.contains("encrypted_admin_token") && (line.contains("==") || line.contains("!=") || line.contains(".eq(")) {
                return Err(format!("{} compares the token directly: {}", path.display(), line.trim()));
            }
        }
        uses += text.matches("tokens_match(&room.encrypted_admin_token").count();
    }
    ensure!(uses == 1, "admin path calls tokens_match {uses} times");
    Ok(())
}

// Criterion 8

struct Client {
    conn: Connection,
    rx: UnboundedReceiver<Outbound>,
}

impl Client {
    fn open(relay: &Relay, first: WireMessage) -> Self {
        let (conn, rx) = relay.connect();
        let mut c = Self { conn, rx };
        c.send(&first);
        c
    }

    fn send(&mut self, msg: &WireMessage) {
        self.conn.handle_text(&encode_wire(msg));
    }

    fn drain(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while let Ok(o) = self.rx.try_recv() {
            out.push(match o {
                Outbound::Frame(f) => f.to_string(),
                Outbound::Close => "<close>".to_owned(),
            });
        }
        out
    }
}

fn token() -> EncryptedEnvelope {
    EncryptedEnvelope::from_bytes((0..61).collect())
}

fn code_of(frames: &[String]) -> Option<ErrorCode> {
    frames.iter().find_map(|f| match decode_wire(f) {
        Ok(WireMessage::Error { code, .. }) => Some(code),
        _ => None,
    })
}

fn lifecycle() -> Check {
    let clock = Arc::new(ManualClock::new());
    let ttl = Duration::from_secs(600);
    let relay = Relay::new(RelayConfig { room_ttl: ttl, ..RelayConfig::default() }, clock.clone(), Arc::new(MemoryLog::new()));
    let create = |room| WireMessage::CreateRoom { room_id: room, encrypted_admin_token: token() };
    let join = |room| WireMessage::Join { room_id: room };
    let closing = encode_wire(&WireMessage::Notify { event: NotifyEvent::Closing, session_id: None });

    // TTL expiry on the injected clock.
    let idle = RoomId::generate();
    let mut i = Client::open(&relay, create(idle));
    ensure!(i.drain().iter().any(|f| f.contains("\"ttl_seconds\":600")), "joined lacks ttl_seconds");
    clock.advance(ttl);
    ensure!(relay.sweep().is_empty(), "expired at exactly the ttl");
    clock.advance(Duration::from_secs(1));
    ensure!(relay.sweep() == vec![idle], "idle room did not expire");
    ensure!(i.drain() == vec![closing.clone(), "<close>".to_owned()], "expiry did not notify and disconnect");

    // Lock turns joins away and keeps members.
    let locked = RoomId::generate();
    let mut a = Client::open(&relay, create(locked));
    let mut b = Client::open(&relay, join(locked));
    a.drain();
    b.drain();
    a.send(&WireMessage::Admin { action: AdminAction::Lock, presented_token: token() });
    let locked_notice = encode_wire(&WireMessage::Notify { event: NotifyEvent::Locked, session_id: None });
    ensure!(a.drain() == vec![locked_notice.clone()], "locker not told of the lock");
    ensure!(b.drain() == vec![locked_notice], "members not told of the lock");
    ensure!(code_of(&Client::open(&relay, join(locked)).drain()) == Some(ErrorCode::RoomLocked), "locked room admitted a join");
    b.send(&WireMessage::Relay { payload: EncryptedEnvelope::from_bytes(vec![1; 40]) });
    ensure!(a.drain().len() == 1, "locked room stopped relaying");

    // Close wipes.
    a.send(&WireMessage::Admin { action: AdminAction::Close, presented_token: token() });
    ensure!(b.drain() == vec![closing.clone(), "<close>".to_owned()], "close did not disconnect members");
    ensure!(relay.room_count() == 0, "{} rooms after close", relay.room_count());
    ensure!(!relay.state_dump().contains(&locked.to_string()), "closed room still in the dump");

    // Not found looks the same however the room went away.
    let expired = RoomId::generate();
    let _e = Client::open(&relay, create(expired));
    clock.advance(ttl + Duration::from_secs(1));
    relay.sweep();
    let replies: Vec<Vec<String>> =
        [RoomId::generate(), locked, expired, idle].into_iter().map(|r| Client::open(&relay, join(r)).drain()).collect();
    ensure!(code_of(&replies[0]) == Some(ErrorCode::RoomNotFound), "unknown room: {:?}", replies[0]);
    ensure!(replies.iter().all(|r| r == &replies[0]), "not-found replies differ: {replies:?}");
    let mut stray = Client::open(&relay, join(RoomId::generate()));
    stray.send(&WireMessage::Relay { payload: EncryptedEnvelope::from_bytes(vec![1; 40]) });
    ensure!(code_of(&stray.drain()).is_some(), "relay to no room went unanswered");
    Ok(())
}

// Criterion 9

fn scripted_receipt(seed: u8, sink: Box<dyn ReceiptSink>) -> Result<(CoordinatorSession, RoomMaterial), String> {
    let room: RoomId = format!("{:02x}{:02x}0000-0000-4000-8000-000000000000", seed, seed).parse().map_err(|_| "room id")?;
    let secret = format!("{:02x}000000-0000-4000-8000-0000000000aa", seed);
    let material = || RoomMaterial {
        room_id: room,
        key: RoomKey::from_bytes([seed; 32]),
        admin_secret: AdminSecret::from_bytes(secret.as_bytes()).unwrap(),
    };
    let (_, mut c, _) = ok(
        CoordinatorSession::genesis_with("http://relay.test", P2WSH_2OF3.unsigned(), Box::new(MemoryStore::new()), sink, wall_clock(), material()),
        "genesis",
    )?;
    let sid = |n: u8| -> SessionId { format!("00000000-0000-4000-8000-0000000000{n:02x}").parse().unwrap() };
    let key = RoomKey::from_bytes([seed; 32]);
    let sealed = |p: Psbt| encrypt(&key, &room, Purpose::Psbt, &p.serialize()).unwrap();
    c.on_message(WireMessage::Joined { session_id: sid(1), member_count: 1, locked: false, ttl_seconds: Some(86_400) });
    c.on_message(WireMessage::Notify { event: NotifyEvent::PeerJoined, session_id: Some(sid(2)) });
    c.on_message(WireMessage::Notify { event: NotifyEvent::PeerJoined, session_id: Some(sid(3)) });
    c.on_message(WireMessage::Deliver { sender: sid(2), payload: sealed(P2WSH_2OF3.signed('b')) });
    c.on_message(WireMessage::Deliver { sender: sid(3), payload: sealed(P2WSH_2OF3.signed('c')) });
    ok(c.forced_exit(), "close")?;
    Ok((c, material()))
}

fn receipt_determinism() -> Check {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let mut files = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        ok(std::fs::create_dir_all(&out), "dir")?;
        scripted_receipt(4, Box::new(DirSink::new(&out)))?;
        let written = common::dir_entries(&out);
        ensure!(written.len() == 1, "{} receipts written", written.len());
        files.push(written[0].clone());
    }
    let bytes: Vec<Vec<u8>> = files.iter().map(std::fs::read).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure!(bytes[0] == bytes[1], "identical logs gave different receipts");
    let (other, _) = scripted_receipt(5, Box::new(MemorySink::new()))?;
    let text = String::from_utf8(bytes[0].clone()).map_err(|e| e.to_string())?;
    ensure!(other.emitted_receipt().ok_or("no receipt")?.to_canonical_json() != text, "different logs gave the same receipt");

    let hash = ok(verify_receipt(&text), "embedded hash")?;
    let (recomputed, embedded) = python_receipt_hash(&files[0])?;
    ensure!(recomputed == embedded && embedded == hash, "oracle {recomputed}, embedded {embedded}, ours {hash}");

    let (session, material) = scripted_receipt(4, Box::new(MemorySink::new()))?;
    let key = &material.key;
    for needle in [key.to_fragment(), hex::encode(key.as_bytes()), STANDARD.encode(key.as_bytes()), material.room_id.to_string()] {
        ensure!(!text.contains(&needle), "receipt contains a secret");
    }
    ensure!(!text.contains(std::str::from_utf8(material.admin_secret.as_bytes()).unwrap()), "receipt contains the admin secret");
    for psbt in [session.current_psbt().clone(), P2WSH_2OF3.unsigned()] {
        let plain = psbt.serialize();
        for w in plain.windows(8) {
            ensure!(!text.contains(&hex::encode(w)), "receipt contains plaintext bytes");
        }
        ensure!(!text.contains(&psbt.to_base64()[..16]), "receipt contains base64 plaintext");
    }
    Ok(())
}

fn print(n: u8, name: &str, v: &Verdict) {
    match v {
        Verdict::Pass => println!("criterion {n} {name}: PASS"),
        Verdict::Fail(why) => println!("criterion {n} {name}: FAIL ({why})"),
        Verdict::Incomplete(why) => println!("criterion {n} {name}: FAIL (incomplete: {why})"),
    }
}

fn verdict(r: Check) -> Verdict {
    match r {
        Ok(()) => Verdict::Pass,
        Err(e) => Verdict::Fail(e),
    }
}

#[tokio::main(flavor = "multi_thread")]
async fn main() {
    let mut verdicts = Vec::new();
    verdicts.push((1, "end-to-end ceremony", verdict(timed(Duration::from_secs(10), end_to_end()).await)));
    let (run2, run3, run4) = match audit_run().await {
        Ok(run) => (blindness(&run), statelessness(&run), traffic(&run)),
        Err(e) => (Err(e.clone()), Err(e.clone()), Err(e)),
    };
    verdicts.push((2, "blindness audit", verdict(run2)));
    verdicts.push((3, "statelessness", verdict(run3)));
    verdicts.push((4, "two-mode traffic", verdict(run4)));
    verdicts.push((5, "crypto conformance", verdict(crypto_conformance())));
    verdicts.push((6, "psbt conformance", psbt_conformance().unwrap_or_else(Verdict::Fail)));
    verdicts.push((7, "dual-factor lock", verdict(dual_factor().await)));
    verdicts.push((8, "lifecycle", verdict(lifecycle())));
    verdicts.push((9, "receipt determinism", verdict(receipt_determinism())));

    for (n, name, v) in &verdicts {
        print(*n, name, v);
    }
    if verdicts.iter().any(|(_, _, v)| matches!(v, Verdict::Fail(_))) {
        std::process::exit(1);
    }
}
