//! Scrubbing of key fragments from text bound for terminals and logs.

pub const REDACTED_FRAGMENT: &str = "#<redacted>";

const FRAGMENT_LEN: usize = 43;

fn is_b64url(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-' || b == b'_'
}

/// Replaces every `#` followed by a 43-character base64url run with `#<redacted>`.
pub fn redact_fragments(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut copied = 0;
    while i < bytes.len() {
        if bytes[i] == b'#' {
            let run = bytes[i + 1..].iter().take_while(|&&b| is_b64url(b)).count();
            if run >= FRAGMENT_LEN {
                out.push_str(&text[copied..i]);
                out.push_str(REDACTED_FRAGMENT);
                i += 1 + run;
                copied = i;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&text[copied..]);
    out
}
