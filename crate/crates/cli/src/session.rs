//! Runs a live coordinator or guest session from a stream of command lines,
//! handling relay frames between and during commands.

use std::collections::VecDeque;
use std::future::Future;
use std::io;
use std::path::PathBuf;
use std::time::Duration;

use blindroom_client::{
    Coordinator, DirSink, Guest, Live, Participant, ReceiptSink, SessionError, Update,
};
use blindroom_core::WireMessage;
use blindroom_psbt::SignatureProgress;
use tokio::io::{AsyncBufReadExt, BufReader, Stdin};
use tokio::time::{timeout_at, Instant};

use crate::command::{parse_command, Command, HELP};
use crate::exit::CliError;
use crate::input::load_psbt;

pub enum Role {
    Coordinator(Box<Coordinator>),
    Guest(Box<Guest>),
}

pub struct Settings {
    pub endpoint: Option<String>,
    pub receipt_dir: PathBuf,
    pub wait: Duration,
    /// Stop at the first failing command instead of reporting and carrying on.
    pub script: bool,
}

pub enum Lines {
    Stdin(tokio::io::Lines<BufReader<Stdin>>),
    Script(VecDeque<String>),
}

impl Lines {
    pub fn stdin() -> Self {
        Lines::Stdin(BufReader::new(tokio::io::stdin()).lines())
    }

    pub fn script(text: &str) -> Self {
        Lines::Script(text.lines().map(str::to_owned).collect())
    }

    /// Cancel-safe.
    pub async fn next(&mut self) -> io::Result<Option<String>> {
        match self {
            Lines::Stdin(l) => l.next_line().await,
            Lines::Script(q) => Ok(q.pop_front()),
        }
    }
}

pub fn progress_line(p: &SignatureProgress) -> String {
    p.inputs.iter().map(|i| format!("{}/{}", i.have, i.need)).collect::<Vec<_>>().join(" ")
}

fn describe(u: &Update) -> Option<String> {
    Some(match u {
        Update::Joined { .. } => return None,
        Update::PeerJoined(_) => "peer joined".into(),
        Update::PeerLeft(_) => "peer left".into(),
        Update::Progress(p) => format!("progress {}", progress_line(p)),
        Update::QuorumReached => "quorum reached".into(),
        Update::Locked => "room locked".into(),
        Update::Closing => "room closing".into(),
        Update::Rejected { detail, .. } => format!("relay: {detail}"),
        Update::Anomaly => "dropped a delivery that did not decrypt".into(),
        Update::Conflict(e) => format!("ignored a conflicting psbt: {e}"),
    })
}

fn report(updates: &[Update]) {
    for line in updates.iter().filter_map(describe) {
        println!("{line}");
    }
}

fn print_status(diagnostic: String, progress: Option<SignatureProgress>) {
    println!("{diagnostic}");
    match progress {
        None => println!("no psbt yet"),
        Some(p) => {
            for (i, input) in p.inputs.iter().enumerate() {
                let done = if input.finalized { " finalized" } else { "" };
                println!("input {i}: {}/{} of {}{done}", input.have, input.need, input.total);
            }
            println!("quorum: {}", if p.overall_quorum { "yes" } else { "no" });
        }
    }
}

async fn wait<S: Participant>(
    live: &mut Live<S>,
    what: &'static str,
    limit: Duration,
    done: impl FnMut(&S, &Update) -> bool,
) -> Result<(), CliError> {
    let seen = live.wait_for(what, limit, done).await;
    match seen {
        Ok(updates) => {
            report(&updates);
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

async fn wait_close<S: Participant>(live: &mut Live<S>, limit: Duration) -> Result<(), CliError> {
    if live.socket_closed() {
        return Ok(());
    }
    match live.wait_for("room close", limit, |_, u| *u == Update::Closing).await {
        Ok(updates) => {
            report(&updates);
            Ok(())
        }
        Err(SessionError::ConnectionLost) => Ok(()),
        Err(e) => Err(e.into()),
    }
}

async fn sleep<S: Participant>(live: &mut Live<S>, d: Duration) -> Result<(), CliError> {
    let deadline = Instant::now() + d;
    while !live.socket_closed() {
        match timeout_at(deadline, live.next_message()).await {
            Err(_) => break,
            Ok(Ok(Some(msg))) => report(&live.apply(msg).await?),
            Ok(Ok(None)) => {}
            Ok(Err(e)) => return Err(e.into()),
        }
    }
    Ok(())
}

fn coordinator_only(cmd: &str) -> CliError {
    CliError::usage(format!("{cmd} is for the coordinator"))
}

pub struct Runner {
    role: Role,
    settings: Settings,
    sink: DirSink,
}

impl Runner {
    pub fn new(role: Role, settings: Settings, sink: DirSink) -> Self {
        Self { role, settings, sink }
    }

    fn socket_closed(&self) -> bool {
        match &self.role {
            Role::Coordinator(c) => c.socket_closed(),
            Role::Guest(g) => g.socket_closed(),
        }
    }

    async fn next_message(&mut self) -> Result<Option<WireMessage>, SessionError> {
        match &mut self.role {
            Role::Coordinator(c) => c.next_message().await,
            Role::Guest(g) => g.next_message().await,
        }
    }

    async fn on_message(&mut self, msg: Result<Option<WireMessage>, SessionError>) -> Result<(), CliError> {
        let Some(msg) = msg? else {
            println!("relay closed the connection");
            return Ok(());
        };
        let updates = match &mut self.role {
            Role::Coordinator(c) => c.apply(msg).await?,
            Role::Guest(g) => g.apply(msg).await?,
        };
        report(&updates);
        if updates.contains(&Update::Closing) {
            self.after_relay_close();
        }
        Ok(())
    }

    fn after_relay_close(&self) {
        let Role::Coordinator(c) = &self.role else { return };
        if let Some(path) = self.sink.written().last() {
            println!("receipt: {}", path.display());
        }
        if let Some(err) = c.session().sink_error() {
            eprintln!("receipt could not be written: {err}");
        }
    }

    fn write_receipt(&self, receipt: &blindroom_client::AuditReceipt) -> Result<(), CliError> {
        let mut sink = DirSink::new(self.settings.receipt_dir.clone());
        sink.write(receipt).map_err(|e| CliError::protocol(format!("receipt could not be written: {e}")))?;
        if let Some(path) = sink.written().last() {
            println!("receipt: {}", path.display());
        }
        println!("receipt_hash: {}", receipt.receipt_hash());
        Ok(())
    }

    pub async fn execute(&mut self, cmd: Command) -> Result<(), CliError> {
        let limit = self.settings.wait;
        match (&mut self.role, cmd) {
            (_, Command::Exit) => {}
            (_, Command::Help) => println!("{HELP}"),
            (Role::Coordinator(c), Command::Status) => print_status(c.session().diagnostic(), c.session().progress()),
            (Role::Guest(g), Command::Status) => print_status(g.session().diagnostic(), g.session().progress()),
            (role, Command::Upload(path)) => {
                let psbt = load_psbt(&path)?;
                let updates = match role {
                    Role::Coordinator(c) => c.submit(&psbt).await?,
                    Role::Guest(g) => g.submit(&psbt).await?,
                };
                println!("uploaded");
                report(&updates);
            }
            (Role::Coordinator(c), Command::Lock) => {
                c.lock(limit).await?;
                println!("room locked");
            }
            (Role::Coordinator(c), Command::WaitPeers(n)) => {
                if c.session().participants().len() <= n {
                    wait(c, "peers", limit, |s, _| s.participants().len() > n).await?;
                }
            }
            (Role::Coordinator(c), Command::WaitQuorum) => {
                if !c.session().progress().is_some_and(|p| p.overall_quorum) {
                    wait(c, "quorum", limit, |s, _| s.progress().is_some_and(|p| p.overall_quorum)).await?;
                }
            }
            (Role::Guest(g), Command::WaitQuorum) => {
                if !g.session().progress().is_some_and(|p| p.overall_quorum) {
                    wait(g, "quorum", limit, |s, _| s.progress().is_some_and(|p| p.overall_quorum)).await?;
                }
            }
            (Role::Coordinator(_), Command::WaitPsbt) => {}
            (Role::Guest(g), Command::WaitPsbt) => {
                if g.session().current_psbt().is_none() {
                    wait(g, "psbt", limit, |s, _| s.current_psbt().is_some()).await?;
                }
            }
            (Role::Coordinator(c), Command::WaitClose) => {
                wait_close(c.as_mut(), limit).await?;
                self.after_relay_close();
            }
            (Role::Guest(g), Command::WaitClose) => wait_close(g.as_mut(), limit).await?,
            (Role::Coordinator(c), Command::Sleep(d)) => sleep(c.as_mut(), d).await?,
            (Role::Guest(g), Command::Sleep(d)) => sleep(g.as_mut(), d).await?,
            (Role::Coordinator(c), Command::Broadcast) => {
                let endpoint =
                    self.settings.endpoint.clone().ok_or_else(|| CliError::usage("broadcast needs --endpoint or BROADCAST_URL"))?;
                let txid = c.broadcast(&endpoint).await?;
                println!("txid: {txid}");
            }
            (Role::Coordinator(c), Command::Close) => {
                let receipt = c.close(limit).await?;
                if let Some(path) = self.sink.written().last() {
                    println!("receipt: {}", path.display());
                }
                println!("receipt_hash: {}", receipt.receipt_hash());
                println!("room closed");
            }
            (Role::Coordinator(c), Command::Receipt) => {
                let receipt = c.session().receipt();
                self.write_receipt(&receipt)?;
            }
            (Role::Guest(g), Command::Receipt) => {
                let receipt = g.session().receipt();
                self.write_receipt(&receipt)?;
            }
            (Role::Guest(_), Command::Lock) => return Err(coordinator_only("lock")),
            (Role::Guest(_), Command::WaitPeers(_)) => return Err(coordinator_only("wait-peers")),
            (Role::Guest(_), Command::Broadcast) => return Err(coordinator_only("broadcast")),
            (Role::Guest(_), Command::Close) => return Err(coordinator_only("close")),
        }
        Ok(())
    }

    /// Reads commands until `exit`, end of input, or `shutdown` resolves.
    pub async fn run(&mut self, mut lines: Lines, shutdown: impl Future<Output = ()>) -> Result<(), CliError> {
        tokio::pin!(shutdown);
        loop {
            let closed = self.socket_closed();
            tokio::select! {
                _ = &mut shutdown => return Ok(()),
                msg = self.next_message(), if !closed => self.on_message(msg).await?,
                line = lines.next() => {
                    let line = line.map_err(|e| CliError::usage(format!("cannot read commands: {e}")))?;
                    let Some(line) = line else { return Ok(()) };
                    let cmd = match parse_command(&line) {
                        Ok(None) => continue,
                        Ok(Some(cmd)) => cmd,
                        Err(e) if self.settings.script => return Err(CliError::usage(e)),
                        Err(e) => {
                            eprintln!("error: {e}");
                            continue;
                        }
                    };
                    if cmd == Command::Exit {
                        return Ok(());
                    }
                    if let Err(e) = self.execute(cmd).await {
                        if self.settings.script {
                            return Err(e);
                        }
                        eprintln!("error: {e}");
                    }
                }
            }
        }
    }

    pub async fn disconnect(self) {
        match self.role {
            Role::Coordinator(c) => c.disconnect().await,
            Role::Guest(g) => g.disconnect().await,
        }
    }
}
