//! Scans what the relay exposed for anything it should never have had.

use std::collections::HashSet;

use base64::engine::general_purpose::{STANDARD, STANDARD_NO_PAD, URL_SAFE, URL_SAFE_NO_PAD};
use base64::Engine;
use serde::Serialize;

use crate::transcript::Transcript;

/// Shorter plaintext runs collide with ciphertext by chance too often to mean anything.
pub const PLAINTEXT_WINDOW: usize = 8;

/// What one ceremony must keep from the relay.
#[derive(Debug, Clone)]
pub struct Secrets {
    pub room_key: [u8; 32],
    /// Every PSBT serialization and final transaction that existed client-side.
    pub plaintexts: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Occurrences {
    pub key: usize,
    pub plaintext: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceDetail {
    pub source: String,
    pub key_occurrences: usize,
    pub plaintext_occurrences: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlindnessReport {
    pub key_occurrences: usize,
    pub plaintext_occurrences: usize,
    pub persisted_bytes: u64,
    pub sources_scanned: usize,
    /// Only sources with a finding.
    pub details: Vec<SourceDetail>,
}

impl BlindnessReport {
    pub fn pass(&self) -> bool {
        self.key_occurrences == 0 && self.plaintext_occurrences == 0 && self.persisted_bytes == 0
    }
}

/// Precomputed needles for a set of ceremonies.
pub struct Scanner {
    keys: Vec<[u8; 32]>,
    key_texts: Vec<String>,
    windows: HashSet<[u8; PLAINTEXT_WINDOW]>,
}

impl Scanner {
    pub fn new(secrets: &[Secrets]) -> Self {
        let mut keys = Vec::new();
        let mut key_texts = Vec::new();
        let mut windows = HashSet::new();
        for s in secrets {
            keys.push(s.room_key);
            key_texts.push(URL_SAFE_NO_PAD.encode(s.room_key));
            key_texts.push(STANDARD.encode(s.room_key));
            key_texts.push(hex::encode(s.room_key));
            for p in &s.plaintexts {
                for w in p.windows(PLAINTEXT_WINDOW) {
                    windows.insert(w.try_into().expect("window length"));
                }
            }
        }
        Self { keys, key_texts, windows }
    }

    /// Looks at the text itself and at every base64 or hex token decoded.
    pub fn scan(&self, text: &str) -> Occurrences {
        let mut found = Occurrences::default();
        for t in &self.key_texts {
            found.key += text.matches(t.as_str()).count();
        }
        let mut views = vec![text.as_bytes().to_vec()];
        views.extend(decoded_tokens(text));
        for v in &views {
            for k in &self.keys {
                found.key += v.windows(32).filter(|w| *w == k).count();
            }
            if v.len() >= PLAINTEXT_WINDOW {
                found.plaintext += v.windows(PLAINTEXT_WINDOW).filter(|w| self.windows.contains(*w)).count();
            }
        }
        found
    }
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '+' | '/' | '=' | '-' | '_')
}

/// Byte strings hidden in `text` as base64 (either alphabet) or hex.
fn decoded_tokens(text: &str) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for token in text.split(|c: char| !is_token_char(c)).filter(|t| t.len() >= 12) {
        if token.len() % 2 == 0 && token.bytes().all(|b| b.is_ascii_hexdigit()) {
            if let Ok(b) = hex::decode(token) {
                out.push(b);
            }
        }
        for engine in [&STANDARD, &STANDARD_NO_PAD, &URL_SAFE, &URL_SAFE_NO_PAD] {
            if let Ok(b) = engine.decode(token) {
                out.push(b);
                break;
            }
        }
    }
    out
}

/// Scans relay logs, state dumps and metrics: everything the relay itself
/// held or emitted. Client frames are excluded; they are ciphertext by design
/// and are checked separately by [`client_hygiene`].
pub fn audit_blindness(t: &Transcript, secrets: &[Secrets]) -> BlindnessReport {
    let scanner = Scanner::new(secrets);
    let mut sources: Vec<(String, &str)> = Vec::new();
    for (i, line) in t.relay_log.iter().enumerate() {
        sources.push((format!("log[{i}]"), line));
    }
    for cp in &t.checkpoints {
        sources.push((format!("dump@{}", cp.label), &cp.state_dump));
        sources.push((format!("metrics@{}", cp.label), &cp.metrics_json));
    }
    let mut report = BlindnessReport {
        key_occurrences: 0,
        plaintext_occurrences: 0,
        persisted_bytes: t.checkpoints.iter().map(|c| c.metrics.persisted_bytes).max().unwrap_or(0),
        sources_scanned: sources.len(),
        details: Vec::new(),
    };
    for (name, text) in sources {
        let o = scanner.scan(text);
        report.key_occurrences += o.key;
        report.plaintext_occurrences += o.plaintext;
        if o != Occurrences::default() {
            report.details.push(SourceDetail { source: name, key_occurrences: o.key, plaintext_occurrences: o.plaintext });
        }
    }
    report
}

/// Key occurrences in what clients sent, plus any extra client-side texts
/// (receipts, credential files, CLI output).
pub fn client_hygiene<'a>(t: &'a Transcript, secrets: &[Secrets], extra: impl IntoIterator<Item = &'a str>) -> Occurrences {
    let scanner = Scanner::new(secrets);
    let mut total = Occurrences::default();
    let sent = t.frames.iter().filter(|f| f.direction == crate::transcript::Direction::Sent).map(|f| f.text.as_str());
    for text in sent.chain(extra) {
        let o = scanner.scan(text);
        total.key += o.key;
        total.plaintext += o.plaintext;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secrets() -> Secrets {
        Secrets { room_key: [7; 32], plaintexts: vec![b"psbt\xff\x01\x00plaintext body here".to_vec()] }
    }

    #[test]
    fn finds_key_in_any_encoding() {
        let s = Scanner::new(&[secrets()]);
        assert_eq!(s.scan("nothing here").key, 0);
        assert!(s.scan(&format!("k={}", URL_SAFE_NO_PAD.encode([7; 32]))).key > 0);
        assert!(s.scan(&format!("\"{}\"", STANDARD.encode([7; 32]))).key > 0);
        assert!(s.scan(&hex::encode([7; 32])).key > 0);
        // Embedded in a longer base64 blob at an aligned offset.
        let mut blob = vec![1u8, 2, 3];
        blob.extend([7; 32]);
        assert!(s.scan(&STANDARD.encode(&blob)).key > 0);
    }

    #[test]
    fn finds_plaintext_runs_of_eight_bytes() {
        let s = Scanner::new(&[secrets()]);
        assert!(s.scan("... plaintext b ...").plaintext > 0);
        assert_eq!(s.scan("... plainte ...").plaintext, 0);
        assert!(s.scan(&hex::encode(b"xx body here xx")).plaintext > 0);
        assert!(s.scan(&STANDARD.encode(b"psbt\xff\x01\x00plain")).plaintext > 0);
    }
}
