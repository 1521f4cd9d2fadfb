//! Command-line surface and its resolution into a [`RunConfig`].

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tal_core::{ForkConfig, GasSchedule, ScheduleName, TxHash};
use tal_ingest::{NodeEndpoint, TracerKind};

use crate::error::CliError;

pub const RPC_URL_ENV: &str = "ETH_RPC_URL";

#[derive(Debug, Parser)]
#[command(name = "tal", version, about = "Access-list gas optimizer and auditor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    Optimize,
    Audit,
    BlockReport,
    Stats,
    Fetch,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the gas-optimal access list of every transaction.
    Optimize(CommonArgs),
    /// Classify defects of declared access lists and aggregate them.
    Audit(CommonArgs),
    /// Compare start-of-block lists against intra-block optima.
    BlockReport(CommonArgs),
    /// Per-day access-list adoption.
    Stats(CommonArgs),
    /// Download traces and declared lists into a corpus directory.
    Fetch(FetchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON-RPC endpoint; falls back to $ETH_RPC_URL when no corpus is given.
    #[arg(long)]
    pub rpc_url: Option<String>,
    /// Directory holding traces.ndjson and declared.ndjson.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Inclusive block range `A..B`.
    #[arg(long)]
    pub blocks: Option<BlockRange>,
    /// File with one transaction hash per line.
    #[arg(long)]
    pub tx_file: Option<PathBuf>,
    #[arg(long, default_value = "berlin")]
    pub schedule: String,
    /// `key = value` lines overriding schedule costs.
    #[arg(long)]
    pub schedule_file: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub coinbase_warm: bool,
    #[arg(long, default_value_t = 9)]
    pub precompile_max: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
    pub format: Vec<Format>,
    #[arg(long, default_value_t = 8)]
    pub max_concurrent_requests: usize,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    /// Tracers to try in order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "prestate,struct-logs")]
    pub tracers: Vec<TracerArg>,
}

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Which states to trace each transaction against.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ibs,sob")]
    pub modes: Vec<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TracerArg {
    Prestate,
    StructLogs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ibs,
    Sob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRange {
    pub first: u64,
    pub last: u64,
}

impl BlockRange {
    pub fn contains(&self, n: u64) -> bool {
        (self.first..=self.last).contains(&n)
    }
}

impl FromStr for BlockRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
        let (first, last) = (parse(a)?, parse(b)?);
        if first > last {
            return Err(format!("empty block range {first}..{last}"));
        }
        Ok(Self { first, last })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    Rpc(NodeEndpoint),
    Corpus(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    All,
    Blocks(BlockRange),
    Txs(Vec<TxHash>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: InputSource,
    pub selection: Selection,
    pub schedule: GasSchedule,
    pub fork: ForkConfig,
    pub out: PathBuf,
    pub formats: BTreeSet<Format>,
    pub tracers: Vec<TracerKind>,
    pub fetch_sob: bool,
    pub fetch_ibs: bool,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn read_tx_file(path: &PathBuf) -> Result<Vec<TxHash>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|e| config_err(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

impl RunConfig {
    /// Resolves parsed arguments. `env_rpc_url` is the value of
    /// [`RPC_URL_ENV`], consulted only when neither `--rpc-url` nor
    /// `--corpus` is given.
    pub fn resolve(cli: Cli, env_rpc_url: Option<String>) -> Result<Self, CliError> {
        let (command, args, modes) = match cli.command {
            Command::Optimize(a) => (CommandKind::Optimize, a, vec![]),
            Command::Audit(a) => (CommandKind::Audit, a, vec![]),
            Command::BlockReport(a) => (CommandKind::BlockReport, a, vec![]),
            Command::Stats(a) => (CommandKind::Stats, a, vec![]),
            Command::Fetch(f) => (CommandKind::Fetch, f.common, f.modes),
        };

        let rpc_url = match (&args.rpc_url, &args.corpus) {
            (Some(_), Some(_)) => return Err(config_err("give either --rpc-url or --corpus, not both")),
            (Some(u), None) => Some(u.clone()),
            (None, Some(_)) => None,
            (None, None) => env_rpc_url.filter(|u| !u.is_empty()),
        };
        if !args.timeout.is_finite() || args.timeout <= 0.0 {
            return Err(config_err("--timeout must be positive"));
        }
        let input = match (rpc_url, &args.corpus) {
            (Some(url), _) => InputSource::Rpc(
                NodeEndpoint::new(url, args.max_concurrent_requests, Duration::from_secs_f64(args.timeout))
                    .map_err(|e| config_err(e.to_string()))?,
            ),
            (None, Some(dir)) => InputSource::Corpus(dir.clone()),
            (None, None) => {
                return Err(config_err(format!(
                    "no input: pass --corpus DIR, --rpc-url URL or set {RPC_URL_ENV}"
                )))
            }
        };
        if command == CommandKind::Fetch && !matches!(input, InputSource::Rpc(_)) {
            return Err(config_err("fetch needs an RPC endpoint"));
        }

        let selection = match (args.blocks, &args.tx_file) {
            (Some(_), Some(_)) => return Err(config_err("give either --blocks or --tx-file, not both")),
            (Some(r), None) => Selection::Blocks(r),
            (None, Some(path)) => Selection::Txs(read_tx_file(path)?),
            (None, None) => Selection::All,
        };
        if matches!(input, InputSource::Rpc(_)) && selection == Selection::All {
            return Err(config_err("reading from a node needs --blocks or --tx-file"));
        }

        let name: ScheduleName = args
            .schedule
            .parse()
            .map_err(|e: tal_core::ScheduleConfigError| config_err(e.to_string()))?;
        let mut schedule = GasSchedule::preset(name);
        if let Some(path) = &args.schedule_file {
            let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            schedule
                .apply_overrides(&text)
                .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        }
        let needs_lists = matches!(
            command,
            CommandKind::Optimize | CommandKind::Audit | CommandKind::BlockReport
        );
        if needs_lists && !schedule.supports_access_lists() {
            return Err(config_err(format!(
                "schedule `{}` has no access lists",
                schedule.name.as_str()
            )));
        }
        let fork = ForkConfig::new(args.coinbase_warm, args.precompile_max).map_err(|e| config_err(e.to_string()))?;

        let tracers = args
            .tracers
            .iter()
            .map(|t| match t {
                TracerArg::Prestate => TracerKind::Prestate,
                TracerArg::StructLogs => TracerKind::StructLogs,
            })
            .collect();
        Ok(Self {
            command,
            input,
            selection,
            schedule,
            fork,
            out: args.out,
            formats: args.format.into_iter().collect(),
            tracers,
            fetch_ibs: modes.is_empty() || modes.contains(&ModeArg::Ibs),
            fetch_sob: modes.contains(&ModeArg::Sob),
        })
    }
}
