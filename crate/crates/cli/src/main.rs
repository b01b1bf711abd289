use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use blindroom_cli::exit::CliError;
use blindroom_cli::load_psbt;
use blindroom_cli::session::{Lines, Role, Runner, Settings};
use blindroom_client::{Coordinator, DirSink, FileStore, Guest, SystemWallClock};
use blindroom_core::RoomLink;
use blindroom_relay::{Relay, RelayConfig, RunningRelay, SystemClock, TracingLog};
use clap::{Args, Parser, Subcommand};
use tokio::net::TcpListener;

/// Blind relay rooms for multisig PSBT signing.
#[derive(Parser)]
#[command(name = "blindroom", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the relay.
    Serve(ServeArgs),
    /// Create a room for a PSBT and coordinate it. Prints the room link once.
    Create {
        /// PSBT file, binary or base64. `-` reads stdin.
        psbt: PathBuf,
        #[arg(long, env = "RELAY_URL", default_value = "http://127.0.0.1:8080")]
        relay: String,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Join a room. Without an argument the link is read from stdin.
    Join {
        link: Option<String>,
        #[command(flatten)]
        session: SessionArgs,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "LISTEN_ADDR", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Idle seconds before a room is wiped.
    #[arg(long, env = "ROOM_TTL_SECONDS", default_value_t = 86_400)]
    ttl: u64,
    #[arg(long, env = "MAX_MEMBERS", default_value_t = 20)]
    max_members: usize,
    #[arg(long, env = "MAX_MSG_BYTES", default_value_t = 2_097_152)]
    max_msg_bytes: usize,
    #[arg(long, env = "STATIC_DIR")]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    sweep_seconds: u64,
}

#[derive(Args)]
struct SessionArgs {
    /// Esplora-style API base; transactions are posted to `<endpoint>/tx`.
    #[arg(long, env = "BROADCAST_URL")]
    endpoint: Option<String>,
    #[arg(long, env = "RECEIPT_DIR", default_value = ".")]
    receipt_dir: PathBuf,
    /// Where the admin token is kept while the session runs.
    #[arg(long, env = "BLINDROOM_CREDENTIALS_DIR")]
    credentials_dir: Option<PathBuf>,
    /// Run the commands in this file and stop at the first failure.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Limit for each wait command, in seconds.
    #[arg(long, default_value_t = 600)]
    wait_seconds: u64,
}

impl SessionArgs {
    fn settings(&self) -> Settings {
        Settings {
            endpoint: self.endpoint.clone(),
            receipt_dir: self.receipt_dir.clone(),
            wait: Duration::from_secs(self.wait_seconds),
            script: self.script.is_some(),
        }
    }

    fn script_lines(&self) -> Result<Option<Lines>, CliError> {
        let Some(path) = &self.script else { return Ok(None) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        Ok(Some(Lines::script(&text)))
    }
}

async fn terminated() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let Ok(mut term) = signal(SignalKind::terminate()) else {
            let _ = tokio::signal::ctrl_c().await;
            return;
        };
        tokio::select! {
            _ = term.recv() => {}
            _ = tokio::signal::ctrl_c() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

async fn serve(args: ServeArgs) -> Result<(), CliError> {
    let config = RelayConfig {
        listen_address: args.listen,
        room_ttl: Duration::from_secs(args.ttl),
        max_members_per_room: args.max_members,
        max_message_bytes: args.max_msg_bytes,
        static_asset_dir: args.static_dir,
        sweep_interval: Duration::from_secs(args.sweep_seconds.max(1)),
        ..RelayConfig::default()
    };
    config.validate().map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).try_init();
    let listener = TcpListener::bind(config.listen_address)
        .await
        .map_err(|e| CliError::network(format!("cannot listen on {}: {e}", config.listen_address)))?;
    let relay = Relay::new(config, Arc::new(SystemClock::new()), Arc::new(TracingLog));
    let running = RunningRelay::start(relay, listener).await.map_err(|e| CliError::network(e.to_string()))?;
    println!("listening on {}", running.http_url());
    terminated().await;
    running.shutdown().await.map_err(|e| CliError::network(e.to_string()))
}

fn credential_store(args: &SessionArgs) -> Result<FileStore, CliError> {
    let dir = args.credentials_dir.clone().unwrap_or_else(FileStore::default_dir);
    FileStore::open(&dir).map_err(|e| CliError::usage(format!("cannot open credential store {}: {e}", dir.display())))
}

async fn create(psbt: PathBuf, relay: String, args: SessionArgs) -> Result<(), CliError> {
    let psbt = load_psbt(&psbt)?;
    let script = args.script_lines()?;
    let store = credential_store(&args)?;
    let sink = DirSink::new(args.receipt_dir.clone());
    let (link, coordinator) =
        Coordinator::create(&relay, psbt, Box::new(store), Box::new(sink.clone()), Arc::new(SystemWallClock), None).await?;
    eprintln!("Share this link with the co-signers over a private channel. Anyone holding it can read the room.");
    eprintln!("It is shown once and never again:");
    println!("{link}");
    println!("room created: {}", link.redacted());
    drop(link);
    let runner = Runner::new(Role::Coordinator(Box::new(coordinator)), args.settings(), sink);
    let lines = script.unwrap_or_else(Lines::stdin);
    run_session(runner, lines).await
}

async fn join(link: Option<String>, args: SessionArgs) -> Result<(), CliError> {
    let script = args.script_lines()?;
    let mut stdin = Lines::stdin();
    let text = match link {
        Some(l) => l,
        None => {
            eprint!("room link: ");
            stdin
                .next()
                .await
                .map_err(|e| CliError::usage(format!("cannot read the link: {e}")))?
                .ok_or_else(|| CliError::usage("no room link given"))?
        }
    };
    let link = RoomLink::parse(&text).map_err(|e| CliError::usage(format!("not a room link: {e}")))?;
    drop(text);
    let guest = Guest::join(&link, Arc::new(SystemWallClock), None).await?;
    println!("joined {}", link.redacted());
    drop(link);
    let runner = Runner::new(Role::Guest(Box::new(guest)), args.settings(), DirSink::new(args.receipt_dir.clone()));
    run_session(runner, script.unwrap_or(stdin)).await
}

async fn run_session(mut runner: Runner, lines: Lines) -> Result<(), CliError> {
    let result = runner.run(lines, terminated()).await;
    runner.disconnect().await;
    result
}

async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Serve(args) => serve(args).await,
        Cmd::Create { psbt, relay, session } => create(psbt, relay, session).await,
        Cmd::Join { link, session } => join(link, session).await,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = runtime.block_on(run(cli));
    // A pending stdin read would otherwise hold the process open.
    runtime.shutdown_background();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
