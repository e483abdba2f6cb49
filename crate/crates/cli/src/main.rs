use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use loopgraft_cli::commands::{self, RunOptions, TableFormat};
use loopgraft_cli::input::{load_protein, parse_chain, shared_provider, ProteinArg};
use loopgraft_cli::{api, CliError};
use loopgraft_core::dynamics::{CorrelationMetric, SortOrder};
use loopgraft_core::orchestration::{Config, SessionManager};

#[derive(Parser)]
#[command(name = "loopgraft", version, about = "Protein loop grafting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download an entry into the local cache.
    Fetch {
        id: String,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Per-loop descriptor table.
    Geometry {
        /// PDB id or path to a PDB file.
        pdb: String,
        #[arg(value_parser = parse_chain)]
        chain: char,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Per-residue flexibility profiles and loop aggregates.
    Flex {
        pdb: String,
        #[arg(value_parser = parse_chain)]
        chain: char,
        /// b, gnm, anm, all, or a comma-separated list.
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long)]
        csv: bool,
    },
    /// Loop motion correlation against candidate loops.
    Xcorr {
        pdb: String,
        #[arg(value_parser = parse_chain)]
        chain: char,
        /// Loop ids or residue numbers covered by the loops.
        #[arg(long, value_delimiter = ',', required = true)]
        candidates: Vec<String>,
        #[arg(long, default_value = "ss_to_coil")]
        sort: String,
        #[arg(long)]
        ascending: bool,
    },
    /// Headless end-to-end grafting.
    Run {
        #[arg(long)]
        scaffold: ProteinArg,
        #[arg(long)]
        insert: ProteinArg,
        /// Pair automatically from loop geometry.
        #[arg(long, required = true)]
        auto: bool,
        /// Scaffold loop to replace (id or residue number).
        #[arg(long)]
        candidate: Option<String>,
        /// Boundary variation in residues on each side.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Writes the top models, their origin tables and the ranking here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1800)]
        timeout_secs: u64,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP/JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let config = Config::from_env();
    match cli.command {
        Command::Fetch { id, cache_dir } => commands::fetch(&config, &id, cache_dir.as_deref()),
        Command::Geometry { pdb, chain, json, csv } => {
            let p = load_protein(&config, &pdb, chain)?;
            let format = if json {
                TableFormat::Json
            } else if csv {
                TableFormat::Csv
            } else {
                TableFormat::Text
            };
            commands::geometry(&p, format)
        }
        Command::Flex {
            pdb,
            chain,
            method,
            csv,
        } => {
            let methods = commands::parse_methods(&method)?;
            let p = load_protein(&config, &pdb, chain)?;
            commands::flex(&p, &methods, csv)
        }
        Command::Xcorr {
            pdb,
            chain,
            candidates,
            sort,
            ascending,
        } => {
            let metric: CorrelationMetric = sort.parse()?;
            let order = if ascending {
                SortOrder::Ascending
            } else {
                SortOrder::Descending
            };
            let p = load_protein(&config, &pdb, chain)?;
            commands::xcorr(&p, &candidates, metric, order)
        }
        Command::Run {
            scaffold,
            insert,
            auto: _,
            candidate,
            window,
            top,
            out,
            timeout_secs,
            json,
        } => {
            let (provider, ids) = shared_provider(&config, &[&scaffold.source, &insert.source])?;
            let manager = SessionManager::new(provider, config);
            let opts = RunOptions {
                scaffold,
                insert,
                candidate,
                window,
                top,
                out_dir: out,
                timeout: Duration::from_secs(timeout_secs),
            };
            let report = commands::run_auto(&manager, &ids[0], &ids[1], &opts)?;
            if json {
                Ok(serde_json::to_string_pretty(&report)? + "\n")
            } else {
                Ok(commands::format_run(&report, top))
            }
        }
        Command::Serve { addr } => {
            let (provider, _) = shared_provider(&config, &[])?;
            let manager = SessionManager::new(provider, config);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, api::router(manager))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
            Ok(String::new())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
