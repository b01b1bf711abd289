//! The line-oriented session language shared by the prompt and `--script`.
//!
//! One command per line; blank lines and lines starting with `#` are skipped.

use std::path::PathBuf;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Signature progress per input.
    Status,
    /// Merge a signed PSBT file and send it to the room.
    Upload(PathBuf),
    Lock,
    /// Wait until this many other members have joined (coordinator).
    WaitPeers(usize),
    WaitQuorum,
    /// Wait for the room's PSBT to arrive (guest).
    WaitPsbt,
    /// Wait for the room to close or expire.
    WaitClose,
    /// Handle incoming frames for a while.
    Sleep(Duration),
    Broadcast,
    /// Write the receipt, then close the room.
    Close,
    /// Write this session's receipt now.
    Receipt,
    Help,
    Exit,
}

pub const HELP: &str = "\
commands:
  status              signature progress per input
  upload <file>       merge a signed psbt (binary or base64) and send it
  lock                refuse further joins (coordinator)
  wait-peers <n>      wait for n other members (coordinator)
  wait-quorum         wait until every input has enough signatures
  wait-psbt           wait for the room's psbt (guest)
  wait-close          wait for the room to close or expire
  sleep <ms>          handle incoming frames for a while
  broadcast           finalize and post to the broadcast endpoint (coordinator)
  close               write the receipt, then close the room (coordinator)
  receipt             write this session's receipt now
  exit                leave";

pub fn parse_command(line: &str) -> Result<Option<Command>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (word, rest) = match line.split_once(char::is_whitespace) {
        Some((w, r)) => (w, r.trim()),
        None => (line, ""),
    };
    let no_arg = |c: Command| if rest.is_empty() { Ok(Some(c)) } else { Err(format!("{word} takes no argument")) };
    match word {
        "status" => no_arg(Command::Status),
        "lock" => no_arg(Command::Lock),
        "wait-quorum" => no_arg(Command::WaitQuorum),
        "wait-psbt" => no_arg(Command::WaitPsbt),
        "wait-close" => no_arg(Command::WaitClose),
        "broadcast" => no_arg(Command::Broadcast),
        "close" => no_arg(Command::Close),
        "receipt" => no_arg(Command::Receipt),
        "help" => no_arg(Command::Help),
        "exit" | "quit" => no_arg(Command::Exit),
        "upload" if !rest.is_empty() => Ok(Some(Command::Upload(PathBuf::from(rest)))),
        "upload" => Err("upload needs a file".into()),
        "wait-peers" => rest.parse().map(|n| Some(Command::WaitPeers(n))).map_err(|_| "wait-peers needs a count".into()),
        "sleep" => rest
            .parse()
            .map(|ms| Some(Command::Sleep(Duration::from_millis(ms))))
            .map_err(|_| "sleep needs milliseconds".into()),
        other => Err(format!("unknown command {other:?}, try help")),
    }
}
