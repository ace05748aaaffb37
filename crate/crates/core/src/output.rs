//! Output artifacts: per-seed trace CSVs, the curves CSV and the summary table.
//!
//! Every real number is written with six significant digits (`%g` style).
//! The summary is computed from the parsed-back CSV text, so [`verify`] can
//! recompute it exactly from the files on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::sim::{run_experiment, DropReason, Experiment, ExperimentReport, SimConfig, SimError};

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const INCOMPLETE_FILE: &str = "INCOMPLETE";

pub const TRACE_HEADER: &str = "round,client_id,strategy,rat_id,power_w,prbs,pathway_id,rate_bps,latency_s,energy_j,outage,qos_met,drop_reason,included";
pub const CURVES_HEADER: &str = "round,strategy,seed,accuracy,loss,energy_j,wallclock_s";

/// Relative tolerance for round energy in curves vs the sum of trace rows.
const ENERGY_REL_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{file}:{line}: {message}")]
    Format { file: String, line: usize, message: String },
    #[error("verification failed: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path, e: std::io::Error) -> OutputError {
    OutputError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Six significant digits, trailing zeros trimmed, like C's `%g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), OutputError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: u32,
    pub client_id: u32,
    pub strategy: String,
    pub rat_id: u32,
    pub power_w: f64,
    pub prbs: u32,
    pub pathway_id: Option<u32>,
    pub rate_bps: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub outage: bool,
    pub qos_met: bool,
    pub drop_reason: DropReason,
    pub included: bool,
}

/// One parsed curves row.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub round: u32,
    pub strategy: String,
    pub seed: u64,
    pub accuracy: f64,
    pub loss: f64,
    pub energy_j: f64,
    pub wallclock_s: f64,
}

fn trace_lines(seed: u64, experiments: &[(String, &Experiment)]) -> String {
    let mut rows: Vec<(u32, u32, &str, Vec<String>)> = Vec::new();
    for (name, exp) in experiments {
        let Some(run) = exp.runs.iter().find(|r| r.seed == seed) else { continue };
        for t in &run.traces {
            for r in &t.records {
                let record = vec![
                    t.round_index.to_string(),
                    r.client_id.to_string(),
                    name.clone(),
                    r.action.rat_id.to_string(),
                    fmt_num(r.power_w),
                    r.prbs.to_string(),
                    r.pathway_id.map(|p| p.to_string()).unwrap_or_default(),
                    fmt_num(r.kpi.rate_bps),
                    fmt_num(r.kpi.latency_s),
                    fmt_num(r.kpi.energy_j),
                    r.kpi.outage.to_string(),
                    r.kpi.qos_met.to_string(),
                    r.drop_reason.to_string(),
                    r.included.to_string(),
                ];
                rows.push((t.round_index, r.client_id, name.as_str(), record));
            }
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    to_csv(TRACE_HEADER, rows.into_iter().map(|r| r.3))
}

fn curve_lines(experiments: &[(String, &Experiment)]) -> String {
    let mut rows: Vec<(u32, &str, u64, Vec<String>)> = Vec::new();
    for (name, exp) in experiments {
        for run in &exp.runs {
            for t in &run.traces {
                let record = vec![
                    t.round_index.to_string(),
                    name.clone(),
                    run.seed.to_string(),
                    fmt_num(t.accuracy),
                    fmt_num(t.loss),
                    fmt_num(t.energy_j),
                    fmt_num(t.wallclock_s),
                ];
                rows.push((t.round_index, name.as_str(), run.seed, record));
            }
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    to_csv(CURVES_HEADER, rows.into_iter().map(|r| r.3))
}

fn to_csv(header: &str, records: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header.split(',')).expect("in-memory write");
    for r in records {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn parse_field<T: std::str::FromStr>(file: &str, line: usize, name: &str, v: &str) -> Result<T, OutputError> {
    v.parse().map_err(|_| OutputError::Format { file: file.into(), line, message: format!("bad {name} '{v}'") })
}

/// Yields `(line number, record)` after checking the header.
fn read_records(file: &str, text: &str, header: &str) -> Result<Vec<(usize, csv::StringRecord)>, OutputError> {
    let fmt_err = |line: usize, message: String| OutputError::Format { file: file.into(), line, message };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| fmt_err(1, e.to_string()))?;
    if found.iter().ne(header.split(',')) {
        return Err(fmt_err(1, "unexpected header".into()));
    }
    reader
        .records()
        .map(|r| {
            r.map(|rec| (rec.position().map_or(0, |p| p.line() as usize), rec))
                .map_err(|e| fmt_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))
        })
        .collect()
}

pub fn parse_trace(file: &str, text: &str) -> Result<Vec<TraceRow>, OutputError> {
    let mut rows = Vec::new();
    for (n, f) in read_records(file, text, TRACE_HEADER)? {
        rows.push(TraceRow {
            round: parse_field(file, n, "round", &f[0])?,
            client_id: parse_field(file, n, "client_id", &f[1])?,
            strategy: f[2].to_string(),
            rat_id: parse_field(file, n, "rat_id", &f[3])?,
            power_w: parse_field(file, n, "power_w", &f[4])?,
            prbs: parse_field(file, n, "prbs", &f[5])?,
            pathway_id: if f[6].is_empty() { None } else { Some(parse_field(file, n, "pathway_id", &f[6])?) },
            rate_bps: parse_field(file, n, "rate_bps", &f[7])?,
            latency_s: parse_field(file, n, "latency_s", &f[8])?,
            energy_j: parse_field(file, n, "energy_j", &f[9])?,
            outage: parse_field(file, n, "outage", &f[10])?,
            qos_met: parse_field(file, n, "qos_met", &f[11])?,
            drop_reason: parse_field(file, n, "drop_reason", &f[12])?,
            included: parse_field(file, n, "included", &f[13])?,
        });
    }
    Ok(rows)
}

pub fn parse_curves(file: &str, text: &str) -> Result<Vec<CurveRow>, OutputError> {
    let mut rows = Vec::new();
    for (n, f) in read_records(file, text, CURVES_HEADER)? {
        rows.push(CurveRow {
            round: parse_field(file, n, "round", &f[0])?,
            strategy: f[1].to_string(),
            seed: parse_field(file, n, "seed", &f[2])?,
            accuracy: parse_field(file, n, "accuracy", &f[3])?,
            loss: parse_field(file, n, "loss", &f[4])?,
            energy_j: parse_field(file, n, "energy_j", &f[5])?,
            wallclock_s: parse_field(file, n, "wallclock_s", &f[6])?,
        });
    }
    Ok(rows)
}

/// Rebuilds one report per strategy (ascending name) from parsed rows.
/// `traces` maps seed to that seed's trace rows.
pub fn reports_from_rows(
    curves: &[CurveRow],
    traces: &BTreeMap<u64, Vec<TraceRow>>,
) -> Result<Vec<ExperimentReport>, OutputError> {
    let strategies: BTreeSet<&str> = curves.iter().map(|c| c.strategy.as_str()).collect();
    let mut reports = Vec::new();
    for name in strategies {
        let mine: Vec<&CurveRow> = curves.iter().filter(|c| c.strategy == name).collect();
        let seeds: BTreeSet<u64> = mine.iter().map(|c| c.seed).collect();
        let mut per_seed = Vec::new();
        let mut wallclock = 0.0;
        let mut energy = 0.0;
        let mut delivered = 0u64;
        let mut client_rounds = 0u64;
        let mut clients = BTreeSet::new();
        for &seed in &seeds {
            let rounds: Vec<&&CurveRow> = mine.iter().filter(|c| c.seed == seed).collect();
            let last = rounds.iter().max_by_key(|c| c.round).expect("seed has rows");
            per_seed.push((seed, last.accuracy, last.loss));
            wallclock += rounds.iter().map(|c| c.wallclock_s).sum::<f64>();

            let rows = traces
                .get(&seed)
                .ok_or_else(|| OutputError::Mismatch(format!("no trace file for seed {seed}")))?;
            let mut per_round: BTreeMap<u32, f64> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.strategy == name) {
                energy += r.energy_j;
                *per_round.entry(r.round).or_default() += r.energy_j;
                client_rounds += 1;
                delivered += u64::from(r.included);
                clients.insert(r.client_id);
            }
            for c in &rounds {
                let traced = per_round.get(&c.round).copied().ok_or_else(|| {
                    OutputError::Mismatch(format!("{name} seed {seed} round {} missing from trace", c.round))
                })?;
                if (traced - c.energy_j).abs() > ENERGY_REL_TOL * c.energy_j.abs().max(1e-12) {
                    return Err(OutputError::Mismatch(format!(
                        "{name} seed {seed} round {}: curve energy {} but trace rows sum to {traced}",
                        c.round, c.energy_j
                    )));
                }
            }
            if per_round.len() != rounds.len() {
                return Err(OutputError::Mismatch(format!("{name} seed {seed}: trace and curves cover different rounds")));
            }
        }
        reports.push(ExperimentReport::from_totals(
            name,
            per_seed,
            delivered,
            client_rounds,
            energy,
            wallclock,
            clients.len(),
        ));
    }
    Ok(reports)
}

/// Fixed-width summary table, one row per report in the given order.
pub fn format_summary(reports: &[ExperimentReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>15}",
        "Strategy", "Acc. (%)", "Loss", "Std. Dev.", "QoS", "Avg. Power (W)"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>15}",
            r.strategy,
            fmt_num(100.0 * r.mean_accuracy),
            fmt_num(r.mean_loss),
            fmt_num(100.0 * r.accuracy_std),
            fmt_num(r.qos_satisfaction_rate),
            fmt_num(r.avg_power_w),
        );
    }
    s
}

/// Files produced by one `run` or `compare` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub curves: PathBuf,
    pub traces: Vec<PathBuf>,
    pub summary: PathBuf,
    /// Reports recomputed from the written files, ascending strategy name.
    pub reports: Vec<ExperimentReport>,
}

/// Writes trace, curves and summary files for the named experiments.
pub fn write_bundle(out_dir: &Path, experiments: &[(String, &Experiment)]) -> Result<OutputBundle, OutputError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let seeds: BTreeSet<u64> = experiments.iter().flat_map(|(_, e)| e.runs.iter().map(|r| r.seed)).collect();

    let curves_text = curve_lines(experiments);
    let curves = parse_curves(CURVES_FILE, &curves_text)?;
    let mut trace_texts = Vec::new();
    let mut parsed = BTreeMap::new();
    for &seed in &seeds {
        let text = trace_lines(seed, experiments);
        parsed.insert(seed, parse_trace(&trace_file_name(seed), &text)?);
        trace_texts.push((seed, text));
    }
    let reports = reports_from_rows(&curves, &parsed)?;
    let summary_text = format_summary(&reports);

    let mut traces = Vec::new();
    for (seed, text) in trace_texts {
        let path = out_dir.join(trace_file_name(seed));
        write_atomic(&path, &text)?;
        traces.push(path);
    }
    let curves_path = out_dir.join(CURVES_FILE);
    write_atomic(&curves_path, &curves_text)?;
    let summary = out_dir.join(SUMMARY_FILE);
    write_atomic(&summary, &summary_text)?;
    Ok(OutputBundle { curves: curves_path, traces, summary, reports })
}

/// Runs `f`; on failure leaves an `INCOMPLETE` marker holding the error.
fn guarded<T>(out_dir: &Path, f: impl FnOnce() -> Result<T, OutputError>) -> Result<T, OutputError> {
    let marker = out_dir.join(INCOMPLETE_FILE);
    match f() {
        Ok(v) => {
            if marker.exists() {
                fs::remove_file(&marker).map_err(|e| io_err(&marker, e))?;
            }
            Ok(v)
        }
        Err(e) => {
            // Best effort: the original error matters more than the marker.
            if fs::create_dir_all(out_dir).is_ok() {
                let _ = fs::write(&marker, format!("{e}\n"));
            }
            Err(e)
        }
    }
}

/// Runs one experiment exactly as configured.
pub fn run_single(cfg: &SimConfig, out_dir: &Path) -> Result<OutputBundle, OutputError> {
    guarded(out_dir, || {
        let exp = run_experiment(cfg)?;
        write_bundle(out_dir, &[(cfg.fl.strategy.clone(), &exp)])
    })
}

/// The config used for `strategy` in a comparison: only the strategy name
/// and controller enablement differ from `base` (the RIC runs for fedora).
pub fn strategy_config(base: &SimConfig, strategy: &str) -> SimConfig {
    let mut cfg = base.clone();
    cfg.fl.strategy = strategy.to_string();
    cfg.controller.enabled = strategy == "fedora";
    cfg
}

/// Runs every strategy on identical seeds, topology and data.
pub fn run_compare(base: &SimConfig, strategies: &[String], out_dir: &Path) -> Result<OutputBundle, OutputError> {
    guarded(out_dir, || {
        let names: BTreeSet<&String> = strategies.iter().collect();
        if names.is_empty() {
            return Err(OutputError::Usage("compare needs at least one strategy".into()));
        }
        let configs: Vec<SimConfig> = names.iter().map(|s| strategy_config(base, s)).collect();
        for cfg in &configs {
            cfg.validate()?;
        }
        let experiments: Vec<Experiment> =
            configs.par_iter().map(run_experiment).collect::<Result<_, SimError>>()?;
        let named: Vec<(String, &Experiment)> =
            names.iter().map(|s| s.to_string()).zip(experiments.iter()).collect();
        write_bundle(out_dir, &named)
    })
}

/// Recomputes the summary from the curves and trace files in `dir` and
/// compares it byte for byte with the summary on disk.
pub fn verify(dir: &Path) -> Result<Vec<ExperimentReport>, OutputError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| io_err(&p, e))
    };
    let curves = parse_curves(CURVES_FILE, &read(CURVES_FILE)?)?;
    let seeds: BTreeSet<u64> = curves.iter().map(|c| c.seed).collect();
    let mut traces = BTreeMap::new();
    for seed in seeds {
        let name = trace_file_name(seed);
        traces.insert(seed, parse_trace(&name, &read(&name)?)?);
    }
    let reports = reports_from_rows(&curves, &traces)?;
    let expected = format_summary(&reports);
    let actual = read(SUMMARY_FILE)?;
    if expected != actual {
        return Err(OutputError::Mismatch(format!(
            "summary differs from recomputation\n--- on disk\n{actual}--- recomputed\n{expected}"
        )));
    }
    Ok(reports)
}
