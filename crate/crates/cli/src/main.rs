use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use cakecut_cli::{Choice, Failure, Mode, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cakecut", version, about = "Proportional cake cutting with a secret participant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a cake and resolve allocations.
    Run(RunArgs),
    /// Measure query counts against the n log n bound.
    Bench {
        #[arg(long, default_value_t = 64)]
        n_max: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-check exported pieces and allocations against valuations.
    Verify {
        #[arg(long)]
        pieces: PathBuf,
        #[arg(long)]
        allocations: PathBuf,
        #[arg(long)]
        valuations: PathBuf,
    },
    /// Emit a random valuation set as JSON.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        segments: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve live sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for per-session event logs; sessions found there are restored.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    DcSecret,
    EvenPaz,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "dc-secret")]
    mode: ModeArg,
    /// JSON array of valuations, one per agent.
    #[arg(long, conflicts_with_all = ["seed", "n"])]
    valuations: Option<PathBuf>,
    #[arg(long, requires = "n")]
    seed: Option<u64>,
    #[arg(long, requires = "seed")]
    n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    segments: usize,
    /// `all` or a piece index for the secret participant.
    #[arg(long, default_value = "all")]
    choice: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write the query transcript here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Show numbers rounded to this many places; files stay exact.
    #[arg(long)]
    decimal: Option<usize>,
}

fn run_config(a: RunArgs) -> Result<RunConfig, Failure> {
    let valuations = match (&a.valuations, a.seed, a.n) {
        (Some(path), _, _) => cakecut_cli::load_valuations(path)?,
        (None, Some(seed), Some(n)) => {
            if n == 0 {
                return Err(Failure::Input("--n must be at least 1".into()));
            }
            cakecut_cli::random_valuations(seed, n, a.segments)?
        }
        _ => return Err(Failure::Input("give --valuations or both --seed and --n".into())),
    };
    let choice = match a.choice.as_str() {
        "all" => Choice::All,
        s => Choice::One(
            s.parse()
                .map_err(|_| Failure::Input(format!("--choice must be `all` or a piece index, got {s:?}")))?,
        ),
    };
    Ok(RunConfig {
        mode: match a.mode {
            ModeArg::DcSecret => Mode::DcSecret,
            ModeArg::EvenPaz => Mode::EvenPaz,
        },
        valuations,
        choice,
        out_dir: a.out_dir,
        transcript: a.transcript,
        decimal: a.decimal,
    })
}

async fn serve(addr: SocketAddr, log_dir: Option<PathBuf>) -> Result<String, Failure> {
    let store = match log_dir {
        Some(dir) => cakecut_session::SessionStore::open(dir).map_err(|e| Failure::Input(e.to_string()))?,
        None => cakecut_session::SessionStore::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Failure::Input(format!("{addr}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Failure::Input(e.to_string()))?);
    cakecut_session::serve(listener, Arc::new(store))
        .await
        .map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::new())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_config(a).and_then(|cfg| cakecut_cli::run(&cfg)),
        Command::Bench { n_max, trials, seed } => cakecut_cli::bench(n_max, trials, seed),
        Command::Verify {
            pieces,
            allocations,
            valuations,
        } => cakecut_cli::verify(&pieces, &allocations, &valuations),
        Command::Gen { seed, n, segments, out } => cakecut_cli::generate(seed, n, segments).and_then(|json| match out {
            Some(path) => std::fs::write(&path, json)
                .map(|_| String::new())
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
            None => Ok(json),
        }),
        Command::Serve { addr, log_dir } => tokio::runtime::Runtime::new()
            .map_err(|e| Failure::Input(e.to_string()))
            .and_then(|rt| rt.block_on(serve(addr, log_dir))),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Failure::Violation(m) = &f {
                print!("{m}");
                if !m.ends_with('\n') {
                    println!();
                }
            } else {
                eprintln!("error: {}", f.message());
            }
            ExitCode::from(f.exit_code())
        }
    }
}
