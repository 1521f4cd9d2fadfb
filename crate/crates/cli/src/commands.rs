//! The subcommands. Each reads block groups, fans per-transaction work out
//! over rayon and writes its reports through a [`Staging`] area.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chrono::DateTime;
use rayon::prelude::*;
use tal_core::corpus::write_ndjson;
use tal_core::{
    audit, cross_state_delta, encode_tal, optimal_tal, tal_delta, AccessList, AccessTrace, AggregateError,
    AggregateStats, Aggregator, AuditReport, Axis, DeclaredTal, Series, StateLabel, TxHash, TxMeta,
};
use tal_ingest::{Client, HttpTransport, TraceMode, Transport};

use crate::config::{CommandKind, InputSource, RunConfig};
use crate::error::CliError;
use crate::input::{corpus_groups, rpc_groups, Groups, DECLARED_FILE, TRACES_FILE};
use crate::output::{Cell, Staging, Table};

/// Runs `cfg.command`, talking to the configured node over HTTP when the
/// input is an RPC endpoint. Returns the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match &cfg.input {
        InputSource::Rpc(endpoint) => {
            let client = Client::connect(endpoint).with_tracers(cfg.tracers.clone());
            run_with_client::<HttpTransport>(cfg, Some(&client))
        }
        InputSource::Corpus(_) => run_with_client::<HttpTransport>(cfg, None),
    }
}

/// As [`run`], with an explicit client for RPC input.
pub fn run_with_client<T: Transport>(cfg: &RunConfig, client: Option<&Client<T>>) -> Result<Vec<PathBuf>, CliError> {
    let modes: Vec<TraceMode> = match cfg.command {
        CommandKind::BlockReport => vec![TraceMode::Ibs, TraceMode::Sob],
        CommandKind::Fetch => [(cfg.fetch_ibs, TraceMode::Ibs), (cfg.fetch_sob, TraceMode::Sob)]
            .into_iter()
            .filter_map(|(on, m)| on.then_some(m))
            .collect(),
        _ => vec![TraceMode::Ibs],
    };
    let groups: Groups<'_> = match (&cfg.input, client) {
        (InputSource::Corpus(dir), _) => corpus_groups(dir, &cfg.selection)?,
        (InputSource::Rpc(_), Some(c)) => rpc_groups(c, &cfg.selection, &modes)?,
        (InputSource::Rpc(_), None) => return Err(CliError::Config("RPC input without a client".into())),
    };
    let mut staging = Staging::new(&cfg.out)?;
    match cfg.command {
        CommandKind::Optimize => cmd_optimize(cfg, groups, &mut staging)?,
        CommandKind::Audit => cmd_audit(cfg, groups, &mut staging)?,
        CommandKind::BlockReport => cmd_block_report(cfg, groups, &mut staging)?,
        CommandKind::Stats => cmd_stats(cfg, groups, &mut staging)?,
        CommandKind::Fetch => cmd_fetch(groups, &mut staging)?,
    }
    staging.commit()
}

/// Traces analysed on their own: everything but start-of-block replays.
fn primary(traces: &[AccessTrace]) -> Vec<&AccessTrace> {
    traces.iter().filter(|t| t.state_label != StateLabel::Sob).collect()
}

fn check_unique(seen: &mut HashSet<TxHash>, tx: TxHash) -> Result<(), CliError> {
    if seen.insert(tx) {
        Ok(())
    } else {
        Err(AggregateError::DuplicateTx(tx).into())
    }
}

pub fn cmd_optimize(cfg: &RunConfig, groups: Groups<'_>, staging: &mut Staging) -> Result<(), CliError> {
    let mut summary = Table::new("optimize_summary", &["tx_hash", "vs_empty_gas", "vs_empty_wei"]);
    let mut seen = HashSet::new();
    for group in groups {
        let group = group?;
        let results = primary(&group.traces)
            .par_iter()
            .map(|t| {
                let tal = optimal_tal(t, &cfg.schedule, &cfg.fork)?;
                let delta = tal_delta(t, &tal, &cfg.schedule, &cfg.fork)?;
                Ok((t.ctx.tx_hash, encode_tal(&tal), delta))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for (tx, encoded, delta) in results {
            check_unique(&mut seen, tx)?;
            staging.write(format!("tals/{tx}.json"), encoded)?;
            summary.push(vec![
                tx.to_string().into(),
                delta.vs_empty.into(),
                delta.vs_empty_wei.into(),
            ]);
        }
    }
    std::fs::create_dir_all(staging.path("tals")?)?;
    staging.write_table(&summary, &cfg.formats)
}

fn histogram_table(stats: &AggregateStats, series: Series, axis: Axis) -> Table {
    let name = format!("histogram_{}_{}", series_name(series), axis_name(axis));
    let mut t = Table::new(name, &["bucket_low", "bucket_high", "count"]);
    for (lo, hi, count) in stats.histograms.get(series, axis).rows() {
        t.push(vec![lo.into(), hi.into(), count.into()]);
    }
    t
}

fn series_name(s: Series) -> &'static str {
    match s {
        Series::Declared => "declared",
        Series::Optimal => "optimal",
    }
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::Gas => "gas",
        Axis::Wei => "wei",
    }
}

pub fn cmd_audit(cfg: &RunConfig, groups: Groups<'_>, staging: &mut Staging) -> Result<(), CliError> {
    let mut detail = Table::new("audit_detail", &["tx_hash", "reason", "address", "key", "regret"]);
    let mut per_tx = Table::new(
        "audit_txs",
        &[
            "tx_hash",
            "block_number",
            "has_tal",
            "delta_declared_gas",
            "delta_optimal_gas",
            "delta_declared_wei",
            "delta_optimal_wei",
            "regret",
        ],
    );
    let mut agg = Aggregator::new();
    for group in groups {
        let group = group?;
        let audited = primary(&group.traces)
            .par_iter()
            .map(|t| {
                let declared = group.declared_for(&t.ctx.tx_hash)?.clone().unwrap_or_default();
                let meta = TxMeta {
                    tx_hash: t.ctx.tx_hash,
                    has_tal: !declared.is_empty(),
                };
                let report = audit(t, &declared, &cfg.schedule, &cfg.fork)?;
                Ok((t.ctx.block_number, meta, report))
            })
            .collect::<Result<Vec<(u64, TxMeta, AuditReport)>, CliError>>()?;
        let mut block_agg = Aggregator::new();
        for (block, meta, report) in &audited {
            block_agg.add(meta, Some(report))?;
            per_tx.push(vec![
                meta.tx_hash.to_string().into(),
                (*block).into(),
                meta.has_tal.into(),
                report.delta_declared.into(),
                report.delta_optimal.into(),
                report.delta_declared_wei.into(),
                report.delta_optimal_wei.into(),
                report.regret.into(),
            ]);
            if !meta.has_tal {
                continue;
            }
            for f in report.findings() {
                detail.push(vec![
                    meta.tx_hash.to_string().into(),
                    f.kind.as_str().into(),
                    f.address.to_string().into(),
                    f.key.map(|k| k.to_string()).unwrap_or_default().into(),
                    f.regret.into(),
                ]);
            }
        }
        agg = agg.merge(block_agg)?;
    }
    let stats = agg.finish();
    let mut summary = Table::new("audit_stats", &["metric", "value"]);
    for (metric, value) in stats.metric_rows() {
        summary.push(vec![metric.into(), value.into()]);
    }
    staging.write_table(&detail, &cfg.formats)?;
    staging.write_table(&per_tx, &cfg.formats)?;
    staging.write_table(&summary, &cfg.formats)?;
    for series in [Series::Declared, Series::Optimal] {
        for axis in [Axis::Gas, Axis::Wei] {
            staging.write_table(&histogram_table(&stats, series, axis), &cfg.formats)?;
        }
    }
    Ok(())
}

#[derive(Debug, Default, Clone, Copy)]
struct Totals {
    n_txs: u64,
    n_profitable: u64,
    n_sob_suboptimal: u64,
    ideal_gas: i64,
    sob_gas: i64,
    ideal_wei: i128,
    sob_wei: i128,
}

impl Totals {
    fn fraction(&self) -> f64 {
        if self.n_profitable == 0 {
            0.0
        } else {
            self.n_sob_suboptimal as f64 / self.n_profitable as f64
        }
    }

    fn add(&mut self, o: &Totals) {
        self.n_txs += o.n_txs;
        self.n_profitable += o.n_profitable;
        self.n_sob_suboptimal += o.n_sob_suboptimal;
        self.ideal_gas += o.ideal_gas;
        self.sob_gas += o.sob_gas;
        self.ideal_wei += o.ideal_wei;
        self.sob_wei += o.sob_wei;
    }
}

/// Pairs intra-block and start-of-block traces by transaction, in order of
/// first appearance.
fn pair_traces(traces: &[AccessTrace]) -> Result<Vec<(&AccessTrace, &AccessTrace)>, CliError> {
    let mut order: Vec<TxHash> = Vec::new();
    let mut pairs: BTreeMap<TxHash, (Option<&AccessTrace>, Option<&AccessTrace>)> = BTreeMap::new();
    for t in traces {
        let slot = pairs.entry(t.ctx.tx_hash).or_insert_with(|| {
            order.push(t.ctx.tx_hash);
            (None, None)
        });
        let side = if t.state_label == StateLabel::Sob {
            &mut slot.1
        } else {
            &mut slot.0
        };
        if side.replace(t).is_some() {
            return Err(AggregateError::DuplicateTx(t.ctx.tx_hash).into());
        }
    }
    order
        .into_iter()
        .map(|tx| match pairs[&tx] {
            (Some(ibs), Some(sob)) => Ok((ibs, sob)),
            (None, _) => Err(CliError::MissingPair {
                tx_hash: tx,
                missing: "intra-block",
            }),
            (_, None) => Err(CliError::MissingPair {
                tx_hash: tx,
                missing: "start-of-block",
            }),
        })
        .collect()
}

pub fn cmd_block_report(cfg: &RunConfig, groups: Groups<'_>, staging: &mut Staging) -> Result<(), CliError> {
    let mut txs = Table::new(
        "block_report_txs",
        &[
            "block_number",
            "tx_index",
            "tx_hash",
            "ideal_delta_gas",
            "sob_delta_gas",
            "ideal_delta_wei",
            "sob_delta_wei",
            "profitable",
            "sob_suboptimal",
        ],
    );
    let mut blocks = Table::new(
        "block_report_blocks",
        &[
            "block_number",
            "n_txs",
            "n_profitable",
            "n_sob_suboptimal",
            "frac_sob_suboptimal",
            "ideal_delta_gas",
            "sob_delta_gas",
            "ideal_delta_wei",
            "sob_delta_wei",
        ],
    );
    let mut overall = Totals::default();
    let mut seen = HashSet::new();
    for group in groups {
        let group = group?;
        let pairs = pair_traces(&group.traces)?;
        let rows = pairs
            .par_iter()
            .map(|(ibs, sob)| {
                let ideal = cross_state_delta(ibs, ibs, &cfg.schedule, &cfg.fork)?;
                let stale = cross_state_delta(sob, ibs, &cfg.schedule, &cfg.fork)?;
                Ok((ibs.ctx.clone(), ideal, stale))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut totals = Totals::default();
        for (ctx, ideal, stale) in rows {
            check_unique(&mut seen, ctx.tx_hash)?;
            let profitable = ideal.vs_empty < 0;
            let suboptimal = stale.vs_empty > ideal.vs_empty;
            totals.add(&Totals {
                n_txs: 1,
                n_profitable: profitable as u64,
                n_sob_suboptimal: (profitable && suboptimal) as u64,
                ideal_gas: ideal.vs_empty,
                sob_gas: stale.vs_empty,
                ideal_wei: ideal.vs_empty_wei,
                sob_wei: stale.vs_empty_wei,
            });
            txs.push(vec![
                ctx.block_number.into(),
                ctx.tx_index.into(),
                ctx.tx_hash.to_string().into(),
                ideal.vs_empty.into(),
                stale.vs_empty.into(),
                ideal.vs_empty_wei.into(),
                stale.vs_empty_wei.into(),
                profitable.into(),
                suboptimal.into(),
            ]);
        }
        if totals.n_txs > 0 {
            blocks.push(vec![
                group.block_number.into(),
                totals.n_txs.into(),
                totals.n_profitable.into(),
                totals.n_sob_suboptimal.into(),
                totals.fraction().into(),
                totals.ideal_gas.into(),
                totals.sob_gas.into(),
                totals.ideal_wei.into(),
                totals.sob_wei.into(),
            ]);
        }
        overall.add(&totals);
    }
    let mut summary = Table::new("block_report_summary", &["metric", "value"]);
    let metrics: [(&str, Cell); 8] = [
        ("n_txs", overall.n_txs.into()),
        ("n_profitable", overall.n_profitable.into()),
        ("n_sob_suboptimal", overall.n_sob_suboptimal.into()),
        ("frac_sob_suboptimal", overall.fraction().into()),
        ("ideal_delta_gas", overall.ideal_gas.into()),
        ("sob_delta_gas", overall.sob_gas.into()),
        ("ideal_delta_wei", overall.ideal_wei.into()),
        ("sob_delta_wei", overall.sob_wei.into()),
    ];
    for (m, v) in metrics {
        summary.push(vec![m.into(), v]);
    }
    staging.write_table(&txs, &cfg.formats)?;
    staging.write_table(&blocks, &cfg.formats)?;
    staging.write_table(&summary, &cfg.formats)
}

pub fn cmd_stats(cfg: &RunConfig, groups: Groups<'_>, staging: &mut Staging) -> Result<(), CliError> {
    let mut days: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut seen = HashSet::new();
    for group in groups {
        let group = group?;
        for t in primary(&group.traces) {
            check_unique(&mut seen, t.ctx.tx_hash)?;
            let ts = t.ctx.block_timestamp.ok_or(CliError::MissingTimestamp(t.ctx.tx_hash))?;
            let date = DateTime::from_timestamp(ts as i64, 0)
                .ok_or(CliError::MissingTimestamp(t.ctx.tx_hash))?
                .date_naive()
                .to_string();
            let has_tal = group
                .declared_for(&t.ctx.tx_hash)?
                .as_ref()
                .is_some_and(|l| !l.is_empty());
            let day = days.entry(date).or_default();
            day.0 += 1;
            day.1 += has_tal as u64;
        }
    }
    let mut series = Table::new("adoption", &["date", "n_txs", "n_with_tal", "fraction"]);
    let (mut n, mut with, mut sum_fraction) = (0u64, 0u64, 0f64);
    for (date, (n_txs, n_with)) in &days {
        let fraction = *n_with as f64 / *n_txs as f64;
        series.push(vec![
            date.clone().into(),
            (*n_txs).into(),
            (*n_with).into(),
            fraction.into(),
        ]);
        n += n_txs;
        with += n_with;
        sum_fraction += fraction;
    }
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut summary = Table::new("adoption_summary", &["metric", "value"]);
    let metrics: [(&str, Cell); 5] = [
        ("n_days", days.len().into()),
        ("n_txs", n.into()),
        ("n_with_tal", with.into()),
        ("frac_with_tal", ratio(with as f64, n as f64).into()),
        ("mean_daily_fraction", ratio(sum_fraction, days.len() as f64).into()),
    ];
    for (m, v) in metrics {
        summary.push(vec![m.into(), v]);
    }
    staging.write_table(&series, &cfg.formats)?;
    staging.write_table(&summary, &cfg.formats)
}

/// Writes the fetched traces and declared lists as a corpus.
pub fn cmd_fetch(groups: Groups<'_>, staging: &mut Staging) -> Result<(), CliError> {
    let mut traces = BufWriter::new(std::fs::File::create(staging.path(TRACES_FILE)?)?);
    let mut declared = BufWriter::new(std::fs::File::create(staging.path(DECLARED_FILE)?)?);
    let mut seen = HashSet::new();
    for group in groups {
        let group = group?;
        write_ndjson(&mut traces, &group.traces)?;
        let mut records: Vec<DeclaredTal> = Vec::new();
        for t in &group.traces {
            if seen.insert(t.ctx.tx_hash) {
                let access_list: Option<AccessList> = group.declared_for(&t.ctx.tx_hash)?.clone();
                records.push(DeclaredTal {
                    tx_hash: t.ctx.tx_hash,
                    access_list,
                });
            }
        }
        write_ndjson(&mut declared, &records)?;
        log::info!("block {}: {} traces", group.block_number, group.traces.len());
    }
    traces.flush()?;
    declared.flush()?;
    Ok(())
}
