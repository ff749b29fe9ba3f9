//! The `wdl` command line.
//!
//! Exit status: 0 on success, 1 on bad input (unreadable or invalid
//! scenario, bad pattern, unknown principal or peer), 2 when a run hits its
//! round cap before quiescence.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::model::{PeerId, PrincipalId, RelKey};
use crate::netsim::{Termination, Trace, World, DEFAULT_MAX_ROUNDS};
use crate::parser::{parse_atom, parse_program};

#[derive(Debug, Parser)]
#[command(name = "wdl", version, about = "Run WebdamLog scenarios with access control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and print its round trace and a summary.
    Run(RunConfig),
    /// Run a scenario, then list the facts a principal may read.
    Query(QueryArgs),
    /// Inspect access control lists.
    #[command(subcommand)]
    Acl(AclCommand),
    /// Parse and validate a scenario without running it.
    Check { scenario: PathBuf },
}

/// How many rounds to run. Without `--rounds` the world runs until a round
/// changes nothing, up to `--max-rounds`.
#[derive(Debug, Clone, Args)]
pub struct Rounds {
    #[arg(long, conflicts_with = "until_quiescent")]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub until_quiescent: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    pub max_rounds: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    pub scenario: PathBuf,
    #[command(flatten)]
    pub rounds: Rounds,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Recorded in the summary only; runs are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    pub scenario: PathBuf,
    #[arg(long = "as")]
    pub who: String,
    #[command(flatten)]
    pub rounds: Rounds,
    /// An atom such as `allPhotos@Alice($f)`; its relation must be ground.
    pub pattern: String,
}

#[derive(Debug, Subcommand)]
pub enum AclCommand {
    /// Print the grants on relations hosted at a peer.
    List {
        peer: String,
        #[arg(long)]
        scenario: PathBuf,
    },
}

/// Runs the command line with the given arguments (including the program
/// name) and returns the exit status.
pub fn main_with(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Run(cfg) => cmd_run(&cfg, out),
        Command::Query(q) => cmd_query(&q, out),
        Command::Acl(AclCommand::List { peer, scenario }) => cmd_acl_list(&scenario, &peer, out),
        Command::Check { scenario } => cmd_check(&scenario, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

/// A user-facing error; always exit status 1.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct Failure(pub String);

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(e.to_string())
    }
}

fn load(path: &Path) -> Result<World, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    World::load(&text).map_err(|e| Failure(format!("{}:{e}", path.display())))
}

fn advance(world: &mut World, rounds: &Rounds) -> (Trace, Option<Termination>) {
    match rounds.rounds {
        Some(n) => (world.run(n), None),
        None => {
            let (trace, how) = world.run_until_quiescent(rounds.max_rounds);
            (trace, Some(how))
        }
    }
}

fn exit_code(how: Option<Termination>) -> i32 {
    match how {
        Some(Termination::Capped) => 2,
        _ => 0,
    }
}

pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut world = load(&cfg.scenario)?;
    let (trace, how) = advance(&mut world, &cfg.rounds);
    match &cfg.trace {
        Some(path) => std::fs::write(path, trace.render()).map_err(|e| Failure(format!("{}: {e}", path.display())))?,
        None => write!(out, "{trace}")?,
    }

    writeln!(out, "summary")?;
    writeln!(out, "  seed {}", cfg.seed)?;
    writeln!(out, "  rounds {}", trace.rounds.len())?;
    match how {
        Some(Termination::Quiescent) => writeln!(out, "  quiescent")?,
        Some(Termination::Capped) => writeln!(out, "  round cap {} reached", cfg.rounds.max_rounds)?,
        None => {}
    }
    let mut counts: BTreeMap<&RelKey, usize> = BTreeMap::new();
    for d in world.catalog.iter().filter(|d| !d.key.is_acl()) {
        counts.insert(&d.key, 0);
    }
    for peer in world.peers.values() {
        for atom in peer.edb.keys().chain(peer.idb.keys()) {
            if let Some(n) = counts.get_mut(&atom.rel) {
                *n += 1;
            }
        }
    }
    writeln!(out, "  facts")?;
    for (rel, n) in counts {
        writeln!(out, "    {rel} {n}")?;
    }
    let rejected: usize = trace.rounds.iter().map(|r| r.rejected.len()).sum();
    writeln!(out, "  rejected {rejected}")?;
    Ok(exit_code(how))
}

pub fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut world = load(&args.scenario)?;
    let pattern = parse_atom(&args.pattern).map_err(|e| Failure(format!("pattern:{e}")))?;
    let who = PrincipalId::new(args.who.as_str());
    if !world.principals.contains_key(&who) {
        return Err(Failure(format!("unknown principal `{who}`")));
    }
    let (_, how) = advance(&mut world, &args.rounds);
    let facts = world.query(&who, &pattern).map_err(|e| Failure(e.to_string()))?;
    for f in facts {
        writeln!(out, "{f}")?;
    }
    Ok(exit_code(how))
}

pub fn cmd_acl_list(scenario: &Path, peer: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let world = load(scenario)?;
    let peer = PeerId::new(peer);
    if !world.peers.contains_key(&peer) {
        return Err(Failure(format!("unknown peer `{peer}`")));
    }
    for line in world.acl.listing(&peer) {
        writeln!(out, "{line}")?;
    }
    Ok(0)
}

pub fn cmd_check(scenario: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(scenario).map_err(|e| Failure(format!("{}: {e}", scenario.display())))?;
    let program = parse_program(&text).map_err(|e| Failure(format!("{}:{e}", scenario.display())))?;
    writeln!(
        out,
        "{}: ok ({} peers, {} relations, {} facts, {} rules)",
        scenario.display(),
        program.peers.len(),
        program.declarations.len(),
        program.facts.len(),
        program.rules.len()
    )?;
    Ok(0)
}
