#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::Duration;

use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::process::{Child, Command};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

pub const PROCESS_LIMIT: Duration = Duration::from_secs(30);

pub fn fixture_path(set: &str, file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../psbt/fixtures").join(set).join(file)
}

pub fn fixture_text(set: &str, file: &str) -> String {
    std::fs::read_to_string(fixture_path(set, file)).unwrap().trim().to_owned()
}

pub struct Output {
    pub code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    pub fn all(&self) -> String {
        format!("{}{}", self.stdout, self.stderr)
    }
}

/// A running `blindroom` process with its stdout delivered line by line.
pub struct CliProc {
    child: Child,
    lines: mpsc::UnboundedReceiver<String>,
    stdout: Vec<String>,
    stderr: JoinHandle<String>,
}

pub fn spawn(args: &[&str], cwd: &Path, stdin: Option<&str>) -> CliProc {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blindroom"));
    cmd.args(args).current_dir(cwd).stdout(Stdio::piped()).stderr(Stdio::piped()).kill_on_drop(true);
    for var in ["RELAY_URL", "BROADCAST_URL", "RECEIPT_DIR", "BLINDROOM_CREDENTIALS_DIR", "LISTEN_ADDR", "ROOM_TTL_SECONDS", "STATIC_DIR"] {
        cmd.env_remove(var);
    }
    cmd.stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() });
    let mut child = cmd.spawn().expect("spawn blindroom");
    if let Some(text) = stdin {
        let mut pipe = child.stdin.take().unwrap();
        let text = text.to_owned();
        tokio::spawn(async move {
            let _ = pipe.write_all(text.as_bytes()).await;
        });
    }
    let (tx, lines) = mpsc::unbounded_channel();
    let mut out = BufReader::new(child.stdout.take().unwrap()).lines();
    tokio::spawn(async move {
        while let Ok(Some(line)) = out.next_line().await {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let mut err = child.stderr.take().unwrap();
    let stderr = tokio::spawn(async move {
        let mut s = String::new();
        let _ = err.read_to_string(&mut s).await;
        s
    });
    CliProc { child, lines, stdout: Vec::new(), stderr }
}

impl CliProc {
    pub fn pid(&self) -> u32 {
        self.child.id().expect("running")
    }

    pub async fn next_line(&mut self) -> Option<String> {
        let line = tokio::time::timeout(PROCESS_LIMIT, self.lines.recv()).await.expect("process output in time")?;
        self.stdout.push(line.clone());
        Some(line)
    }

    pub async fn finish(mut self) -> Output {
        let status = tokio::time::timeout(PROCESS_LIMIT, self.child.wait()).await.expect("process exits in time").unwrap();
        while let Some(line) = self.lines.recv().await {
            self.stdout.push(line);
        }
        let stderr = self.stderr.await.unwrap();
        let mut stdout = self.stdout.join("\n");
        stdout.push('\n');
        Output { code: status.code(), stdout, stderr }
    }
}

pub async fn run(args: &[&str], cwd: &Path, stdin: Option<&str>) -> Output {
    spawn(args, cwd, stdin).finish().await
}

pub fn write_script(dir: &Path, name: &str, lines: &[&str]) -> String {
    let path = dir.join(name);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path.to_str().unwrap().to_owned()
}

pub fn dir_entries(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).map(|r| r.map(|e| e.unwrap().path()).collect()).unwrap_or_default();
    v.sort();
    v
}

/// Outcome of the three-process golden ceremony.
pub struct CliCeremony {
    pub coordinator: Output,
    pub guests: [Output; 2],
    pub link: String,
    pub receipt_dir: PathBuf,
    pub credentials_dir: PathBuf,
}

/// Coordinator and two guests as separate `blindroom` processes. One guest
/// gets the link as an argument, the other at the stdin prompt.
pub async fn cli_ceremony(relay_url: &str, endpoint: &str, work: &Path) -> CliCeremony {
    let set = "p2wsh_2of3";
    let receipt_dir = work.join("receipts");
    let credentials_dir = work.join("credentials");
    std::fs::create_dir_all(&receipt_dir).unwrap();
    let coord_script = write_script(work, "coordinator.txt", &["wait-peers 2", "wait-quorum", "status", "broadcast", "close", "exit"]);
    let unsigned = fixture_path(set, "unsigned.psbt");
    let mut coordinator = spawn(
        &[
            "create",
            unsigned.to_str().unwrap(),
            "--relay",
            relay_url,
            "--endpoint",
            endpoint,
            "--receipt-dir",
            receipt_dir.to_str().unwrap(),
            "--credentials-dir",
            credentials_dir.to_str().unwrap(),
            "--script",
            &coord_script,
            "--wait-seconds",
            "20",
        ],
        work,
        None,
    );
    let link = coordinator.next_line().await.expect("link line");

    let mut guests = Vec::new();
    for (i, signer) in ["a", "b"].into_iter().enumerate() {
        let signed = fixture_path(set, &format!("signed_{signer}.psbt"));
        let upload = format!("upload {}", signed.display());
        let script = write_script(work, &format!("guest{i}.txt"), &["wait-psbt", &upload, "wait-close", "exit"]);
        let g_receipts = work.join(format!("guest{i}"));
        std::fs::create_dir_all(&g_receipts).unwrap();
        let mut args = vec!["join"];
        if i == 0 {
            args.push(&link);
        }
        args.extend(["--script", &script, "--receipt-dir", g_receipts.to_str().unwrap(), "--wait-seconds", "20"]);
        let stdin = (i == 1).then(|| format!("{link}\n"));
        let proc = spawn(&args, work, stdin.as_deref());
        guests.push(proc);
    }
    let coordinator = coordinator.finish().await;
    let mut outs = Vec::new();
    for g in guests {
        outs.push(g.finish().await);
    }
    let guests: [Output; 2] = outs.try_into().ok().unwrap();
    CliCeremony { coordinator, guests, link, receipt_dir, credentials_dir }
}
