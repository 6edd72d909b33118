use std::io::{self, IsTerminal};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use convex_cli::eval::{self, EvalConfig, EvalOutcome};
use convex_cli::repl::{self, ReplConfig};
use convex_core::dialogue::Engine;
use convex_core::session_store::SessionStore;
use convex_service::AppState;

#[derive(Parser)]
#[command(name = "convex", version, about = "Conversational data exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chat with the assistant in the terminal.
    Repl {
        /// Dataset to upload before the first prompt.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Session and artifact store.
        #[arg(long, env = "CONVEX_STORE", default_value = "convex-store")]
        store: PathBuf,
        /// Seed for randomized analyses.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Field delimiter of uploaded text files.
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// User whose preferences are learned.
        #[arg(long, default_value = "local")]
        user: String,
        /// Lines to run before reading standard input.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, env = "CONVEX_STORE", default_value = "convex-store")]
        store: PathBuf,
    },
    /// Run a conversation corpus and print the metrics.
    Eval {
        /// Corpus JSON; the shipped corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Re-realize utterances from this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory with the fixtures the corpus uploads.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn serve(port: u16, bind: IpAddr, store: PathBuf) -> Result<()> {
    let store = SessionStore::open(&store).with_context(|| format!("cannot open the store at {}", store.display()))?;
    let state = AppState::new(Engine::standard(), store)?;
    let addr = SocketAddr::new(bind, port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = convex_service::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        convex_service::serve(listener, state).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Repl {
            data,
            store,
            seed,
            delimiter,
            user,
            script,
        } => {
            let config = ReplConfig {
                store,
                seed,
                delimiter,
                user,
                data,
                script,
            };
            let stdin = io::stdin();
            if stdin.is_terminal() {
                eprint!("{}", repl::HELP);
            }
            repl::run(config, stdin.lock(), io::stdout().lock())
        }
        Command::Serve { port, bind, store } => serve(port, bind, store),
        Command::Eval {
            corpus,
            seed,
            fixtures,
            out,
        } => {
            let config = EvalConfig {
                corpus,
                seed,
                fixtures,
                out,
            };
            match eval::run(&config) {
                Ok(EvalOutcome::Schema(diagnostics)) => {
                    eprintln!("invalid corpus: {diagnostics}");
                    return ExitCode::from(2);
                }
                Ok(EvalOutcome::Report(report)) => {
                    print!("{}", report.table());
                    if report.failed_cases > 0 {
                        eprintln!("{} case(s) failed", report.failed_cases);
                        return ExitCode::from(1);
                    }
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
