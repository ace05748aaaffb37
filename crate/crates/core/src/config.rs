//! Experiment configuration files.
//!
//! The format is line oriented:
//!
//! ```text
//! # comment
//! [sim]
//! rounds = 100
//! seeds = 1, 2, 3
//!
//! [rat]
//! id = 0
//! power_levels_w = 0.5, 1.0
//!
//! [pathway]
//! id = 0
//! stages = O-RU:0.001, O-DU:0.002, O-CU:0.001
//! capacity_bps = 1e9
//!
//! [client]
//! id = 0
//! count = 10          # expands into ids 0..=9
//! mean_snr = 0:20, 1:35
//! ```
//!
//! `[sim]`, `[controller]` and `[fl]` appear at most once; `[rat]`,
//! `[pathway]` and `[client]` repeat. Unknown sections and keys are errors,
//! and every error carries the line it refers to.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::fl::PartitionKind;
use crate::net::{ClientNode, Pathway, PathwayStage, RatProfile, UnitKind};
use crate::sim::{DataSource, SimConfig, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { key: String, line: Option<usize>, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Sim,
    Controller,
    Fl,
    Rat,
    Pathway,
    Client,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "sim" => Section::Sim,
            "controller" => Section::Controller,
            "fl" => Section::Fl,
            "rat" => Section::Rat,
            "pathway" => Section::Pathway,
            "client" => Section::Client,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Section::Sim => "sim",
            Section::Controller => "controller",
            Section::Fl => "fl",
            Section::Rat => "rat",
            Section::Pathway => "pathway",
            Section::Client => "client",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Sim => &["rounds", "deadline_s", "min_round_duration_s", "eps_out", "seeds"],
            Section::Controller => &[
                "enabled",
                "baseline_rat",
                "alpha",
                "gamma",
                "epsilon",
                "epsilon_decay",
                "epsilon_min",
                "w_energy",
                "w_latency",
                "qos_penalty",
                "energy_norm_j",
                "latency_norm_s",
                "latency_edges",
                "congestion_edges",
                "allocation",
                "rapp_period",
            ],
            Section::Fl => &[
                "strategy",
                "fraction",
                "top_k",
                "hidden",
                "epochs",
                "lr",
                "batch_size",
                "init_scale",
                "partition",
                "dirichlet_alpha",
                "dataset",
                "n_features",
                "n_classes",
                "center_scale",
                "noise_std",
                "test_samples",
                "csv_path",
                "train_split",
            ],
            Section::Rat => &[
                "id",
                "label",
                "prb_count",
                "prb_bandwidth_hz",
                "base_latency_s",
                "power_levels_w",
                "idle_power_w",
                "outage_snr_threshold",
            ],
            Section::Pathway => &["id", "stages", "capacity_bps"],
            Section::Client => &["id", "count", "mean_snr", "dataset_size", "compute_rate", "compute_power_w"],
        }
    }
}

/// Key/value pairs of one section instance.
struct Block {
    section: Section,
    header_line: usize,
    entries: HashMap<String, (String, usize)>,
}

impl Block {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| ConfigError::Parse {
                line,
                message: format!("{}.{key}: cannot parse '{v}'", self.section.name()),
            }),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)?.ok_or_else(|| ConfigError::Parse {
            line: self.header_line,
            message: format!("[{}] block is missing required key '{key}'", self.section.name()),
        })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((v, line)) = self.raw(key) else { return Ok(None) };
        if v.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("{}.{key}: cannot parse list item '{}'", self.section.name(), item.trim()),
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// `a:b, c:d` pairs.
    fn pairs<A: FromStr, B: FromStr>(&self, key: &str) -> Result<Option<Vec<(A, B)>>, ConfigError> {
        let Some((v, line)) = self.raw(key) else { return Ok(None) };
        let err = |item: &str| ConfigError::Parse {
            line,
            message: format!("{}.{key}: expected 'name:value', got '{}'", self.section.name(), item.trim()),
        };
        v.split(',')
            .map(|item| {
                let (a, b) = item.split_once(':').ok_or_else(|| err(item))?;
                Ok((a.trim().parse::<A>().map_err(|_| err(item))?, b.trim().parse::<B>().map_err(|_| err(item))?))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(self.header_line, |(_, l)| l)
    }

    fn reject(&self, key: &str, why: &str) -> Result<(), ConfigError> {
        match self.raw(key) {
            Some((_, line)) => Err(ConfigError::Parse {
                line,
                message: format!("{}.{key}: {why}", self.section.name()),
            }),
            None => Ok(()),
        }
    }
}

fn split_blocks(text: &str) -> Result<Vec<Block>, ConfigError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse { line, message: format!("malformed section header '{content}'") })?
                .trim();
            let section = Section::parse(name)
                .ok_or_else(|| ConfigError::Parse { line, message: format!("unknown section [{name}]") })?;
            if matches!(section, Section::Sim | Section::Controller | Section::Fl)
                && blocks.iter().any(|b| b.section == section)
            {
                return Err(ConfigError::Parse { line, message: format!("section [{name}] appears twice") });
            }
            blocks.push(Block { section, header_line: line, entries: HashMap::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected 'key = value', got '{content}'") })?;
        let key = key.trim();
        let block = blocks
            .last_mut()
            .ok_or_else(|| ConfigError::Parse { line, message: format!("key '{key}' outside any section") })?;
        if !block.section.keys().contains(&key) {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key '{key}' in [{}]", block.section.name()),
            });
        }
        if block.entries.insert(key.to_string(), (value.trim().to_string(), line)).is_some() {
            return Err(ConfigError::Parse { line, message: format!("duplicate key '{key}'") });
        }
    }
    Ok(blocks)
}

fn parse_bool(block: &Block, key: &str, default: bool) -> Result<bool, ConfigError> {
    match block.raw(key) {
        None => Ok(default),
        Some(("true", _)) => Ok(true),
        Some(("false", _)) => Ok(false),
        Some((v, line)) => Err(ConfigError::Parse {
            line,
            message: format!("{}.{key}: expected true or false, got '{v}'", block.section.name()),
        }),
    }
}

fn parse_with<T>(block: &Block, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
    match block.raw(key) {
        None => Ok(None),
        Some((v, line)) => f(v).map(Some).map_err(|m| ConfigError::Parse {
            line,
            message: format!("{}.{key}: {m}", block.section.name()),
        }),
    }
}

/// Parses config text. Relative CSV paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<SimConfig, ConfigError> {
    let blocks = split_blocks(text)?;
    let mut cfg = SimConfig::with_topology(Vec::new(), Vec::new(), Vec::new());
    // key path -> line, for validation messages
    let mut lines: HashMap<String, usize> = HashMap::new();
    let mut note = |path: String, block: &Block, key: &str| {
        lines.insert(path, block.line_of(key));
    };

    for block in &blocks {
        match block.section {
            Section::Sim => {
                cfg.rounds = block.get_or("rounds", cfg.rounds)?;
                cfg.deadline_s = block.get_or("deadline_s", cfg.deadline_s)?;
                cfg.min_round_duration_s = block.get_or("min_round_duration_s", cfg.min_round_duration_s)?;
                cfg.eps_out = block.get_or("eps_out", cfg.eps_out)?;
                if let Some(seeds) = block.list("seeds")? {
                    cfg.seeds = seeds;
                }
                for key in Section::Sim.keys() {
                    note(format!("sim.{key}"), block, key);
                }
            }
            Section::Controller => {
                let c = &mut cfg.controller;
                c.enabled = parse_bool(block, "enabled", c.enabled)?;
                c.baseline_rat = block.get("baseline_rat")?;
                c.q.alpha = block.get_or("alpha", c.q.alpha)?;
                c.q.gamma = block.get_or("gamma", c.q.gamma)?;
                c.q.epsilon = block.get_or("epsilon", c.q.epsilon)?;
                c.q.epsilon_decay = block.get_or("epsilon_decay", c.q.epsilon_decay)?;
                c.q.epsilon_min = block.get_or("epsilon_min", c.q.epsilon_min)?;
                c.reward.w_energy = block.get_or("w_energy", c.reward.w_energy)?;
                c.reward.w_latency = block.get_or("w_latency", c.reward.w_latency)?;
                c.reward.qos_penalty = block.get_or("qos_penalty", c.reward.qos_penalty)?;
                c.reward.energy_norm_j = block.get_or("energy_norm_j", c.reward.energy_norm_j)?;
                c.reward.latency_norm_s = block.get_or("latency_norm_s", c.reward.latency_norm_s)?;
                if let Some(e) = block.list("latency_edges")? {
                    c.latency_edges = e;
                }
                if let Some(e) = block.list("congestion_edges")? {
                    c.congestion_edges = e;
                }
                if let Some(a) = parse_with(block, "allocation", |v| v.parse())? {
                    c.allocation = a;
                }
                c.rapp_period = block.get_or("rapp_period", c.rapp_period)?;
                for key in Section::Controller.keys() {
                    note(format!("controller.{key}"), block, key);
                }
            }
            Section::Fl => {
                parse_fl(block, &mut cfg, base_dir)?;
                for key in Section::Fl.keys() {
                    note(format!("fl.{key}"), block, key);
                }
            }
            Section::Rat => {
                let i = cfg.rats.len();
                let id: u32 = block.require("id")?;
                cfg.rats.push(RatProfile {
                    rat_id: id,
                    label: block.get_or("label", format!("rat{id}"))?,
                    prb_count: block.require("prb_count")?,
                    prb_bandwidth_hz: block.require("prb_bandwidth_hz")?,
                    base_latency_s: block.get_or("base_latency_s", 0.005)?,
                    power_levels_w: block.list("power_levels_w")?.ok_or_else(|| ConfigError::Parse {
                        line: block.header_line,
                        message: "[rat] block is missing required key 'power_levels_w'".into(),
                    })?,
                    idle_power_w: block.get_or("idle_power_w", 0.0)?,
                    outage_snr_threshold: block.get_or("outage_snr_threshold", 1.0)?,
                });
                for key in Section::Rat.keys() {
                    note(format!("rat[{i}].{key}"), block, key);
                }
            }
            Section::Pathway => {
                let i = cfg.pathways.len();
                let stages = parse_with(block, "stages", |v| {
                    v.split(',')
                        .map(|item| {
                            let (unit, latency) = item
                                .split_once(':')
                                .ok_or_else(|| format!("expected 'O-RU:latency', got '{}'", item.trim()))?;
                            let unit: UnitKind = unit.parse()?;
                            let latency_s: f64 =
                                latency.trim().parse().map_err(|_| format!("bad latency '{}'", latency.trim()))?;
                            Ok(PathwayStage { unit, latency_s })
                        })
                        .collect::<Result<Vec<_>, String>>()
                })?
                .ok_or_else(|| ConfigError::Parse {
                    line: block.header_line,
                    message: "[pathway] block is missing required key 'stages'".into(),
                })?;
                cfg.pathways.push(Pathway {
                    pathway_id: block.require("id")?,
                    stages,
                    capacity_bps: block.require("capacity_bps")?,
                });
                for key in Section::Pathway.keys() {
                    note(format!("pathway[{i}].{key}"), block, key);
                }
            }
            Section::Client => {
                let first_id: u32 = block.require("id")?;
                let count: u32 = block.get_or("count", 1)?;
                if count == 0 {
                    return Err(ConfigError::Parse {
                        line: block.line_of("count"),
                        message: "client.count must be at least 1".into(),
                    });
                }
                let mean_snr: BTreeMap<u32, f64> = block
                    .pairs::<u32, f64>("mean_snr")?
                    .ok_or_else(|| ConfigError::Parse {
                        line: block.header_line,
                        message: "[client] block is missing required key 'mean_snr'".into(),
                    })?
                    .into_iter()
                    .collect();
                let dataset_size = block.get_or("dataset_size", 100)?;
                let compute_rate = block.get_or("compute_rate", 1000.0)?;
                let compute_power_w = block.get_or("compute_power_w", 0.5)?;
                for offset in 0..count {
                    let i = cfg.clients.len();
                    cfg.clients.push(ClientNode {
                        client_id: first_id.checked_add(offset).ok_or_else(|| ConfigError::Parse {
                            line: block.line_of("count"),
                            message: "client ids overflow".into(),
                        })?,
                        mean_snr: mean_snr.clone(),
                        dataset_size,
                        compute_rate,
                        compute_power_w,
                    });
                    for key in Section::Client.keys() {
                        note(format!("client[{i}].{key}"), block, key);
                    }
                }
            }
        }
    }

    cfg.validate().map_err(|e| match e {
        SimError::Validation { key, message } => {
            let line = lines.get(&key).copied().or_else(|| {
                // Section-level keys such as `rat` or `client`.
                let section = key.split(['.', '[']).next().unwrap_or("");
                blocks.iter().find(|b| b.section.name() == section).map(|b| b.header_line)
            });
            ConfigError::Validation { key, line, message }
        }
        other => ConfigError::Validation { key: String::new(), line: None, message: other.to_string() },
    })?;
    Ok(cfg)
}

fn parse_fl(block: &Block, cfg: &mut SimConfig, base_dir: Option<&Path>) -> Result<(), ConfigError> {
    let fl = &mut cfg.fl;
    fl.strategy = block.get_or("strategy", fl.strategy.clone())?;
    fl.fraction = block.get_or("fraction", fl.fraction)?;
    fl.top_k = block.get_or("top_k", fl.top_k)?;
    fl.hidden = block.get_or("hidden", fl.hidden)?;
    fl.epochs = block.get_or("epochs", fl.epochs)?;
    fl.lr = block.get_or("lr", fl.lr)?;
    fl.batch_size = block.get_or("batch_size", fl.batch_size)?;
    fl.init_scale = block.get_or("init_scale", fl.init_scale)?;

    let partition: String = block.get_or("partition", "iid".to_string())?;
    fl.partition = match partition.as_str() {
        "iid" => {
            block.reject("dirichlet_alpha", "only valid with partition = dirichlet")?;
            PartitionKind::Iid
        }
        "dirichlet" => PartitionKind::Dirichlet { alpha: block.get_or("dirichlet_alpha", 0.5)? },
        other => {
            return Err(ConfigError::Parse {
                line: block.line_of("partition"),
                message: format!("fl.partition: expected iid or dirichlet, got '{other}'"),
            })
        }
    };

    let dataset: String = block.get_or("dataset", "blobs".to_string())?;
    const BLOB_KEYS: [&str; 5] = ["n_features", "n_classes", "center_scale", "noise_std", "test_samples"];
    const CSV_KEYS: [&str; 2] = ["csv_path", "train_split"];
    fl.data = match dataset.as_str() {
        "blobs" => {
            for key in CSV_KEYS {
                block.reject(key, "only valid with dataset = csv")?;
            }
            let DataSource::Blobs { n_features, n_classes, center_scale, noise_std, test_samples } =
                crate::sim::FlConfig::default().data
            else {
                unreachable!("default data source is synthetic")
            };
            DataSource::Blobs {
                n_features: block.get_or("n_features", n_features)?,
                n_classes: block.get_or("n_classes", n_classes)?,
                center_scale: block.get_or("center_scale", center_scale)?,
                noise_std: block.get_or("noise_std", noise_std)?,
                test_samples: block.get_or("test_samples", test_samples)?,
            }
        }
        "csv" => {
            for key in BLOB_KEYS {
                block.reject(key, "only valid with dataset = blobs")?;
            }
            let raw: PathBuf = block.require::<String>("csv_path")?.into();
            let path = match base_dir {
                Some(dir) if raw.is_relative() => dir.join(raw),
                _ => raw,
            };
            DataSource::Csv { path, train_split: block.get_or("train_split", 0.8)? }
        }
        other => {
            return Err(ConfigError::Parse {
                line: block.line_of("dataset"),
                message: format!("fl.dataset: expected blobs or csv, got '{other}'"),
            })
        }
    };
    Ok(())
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config_str(&text, path.parent())
}

struct Joined<'a, T>(&'a [T]);

impl<T: fmt::Display> fmt::Display for Joined<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Writes every setting explicitly; parsing the output gives back `cfg`.
pub fn to_config_string(cfg: &SimConfig) -> String {
    let mut s = String::new();
    let c = &cfg.controller;
    let fl = &cfg.fl;
    // Writing to a String cannot fail.
    let _ = (|| -> fmt::Result {
        writeln!(s, "[sim]")?;
        writeln!(s, "rounds = {}", cfg.rounds)?;
        writeln!(s, "deadline_s = {}", cfg.deadline_s)?;
        writeln!(s, "min_round_duration_s = {}", cfg.min_round_duration_s)?;
        writeln!(s, "eps_out = {}", cfg.eps_out)?;
        writeln!(s, "seeds = {}", Joined(&cfg.seeds))?;

        writeln!(s, "\n[controller]")?;
        writeln!(s, "enabled = {}", c.enabled)?;
        if let Some(id) = c.baseline_rat {
            writeln!(s, "baseline_rat = {id}")?;
        }
        writeln!(s, "alpha = {}", c.q.alpha)?;
        writeln!(s, "gamma = {}", c.q.gamma)?;
        writeln!(s, "epsilon = {}", c.q.epsilon)?;
        writeln!(s, "epsilon_decay = {}", c.q.epsilon_decay)?;
        writeln!(s, "epsilon_min = {}", c.q.epsilon_min)?;
        writeln!(s, "w_energy = {}", c.reward.w_energy)?;
        writeln!(s, "w_latency = {}", c.reward.w_latency)?;
        writeln!(s, "qos_penalty = {}", c.reward.qos_penalty)?;
        writeln!(s, "energy_norm_j = {}", c.reward.energy_norm_j)?;
        writeln!(s, "latency_norm_s = {}", c.reward.latency_norm_s)?;
        writeln!(s, "latency_edges = {}", Joined(&c.latency_edges))?;
        writeln!(s, "congestion_edges = {}", Joined(&c.congestion_edges))?;
        writeln!(s, "allocation = {}", c.allocation)?;
        writeln!(s, "rapp_period = {}", c.rapp_period)?;

        writeln!(s, "\n[fl]")?;
        writeln!(s, "strategy = {}", fl.strategy)?;
        writeln!(s, "fraction = {}", fl.fraction)?;
        writeln!(s, "top_k = {}", fl.top_k)?;
        writeln!(s, "hidden = {}", fl.hidden)?;
        writeln!(s, "epochs = {}", fl.epochs)?;
        writeln!(s, "lr = {}", fl.lr)?;
        writeln!(s, "batch_size = {}", fl.batch_size)?;
        writeln!(s, "init_scale = {}", fl.init_scale)?;
        match fl.partition {
            PartitionKind::Iid => writeln!(s, "partition = iid")?,
            PartitionKind::Dirichlet { alpha } => {
                writeln!(s, "partition = dirichlet")?;
                writeln!(s, "dirichlet_alpha = {alpha}")?;
            }
        }
        match &fl.data {
            DataSource::Blobs { n_features, n_classes, center_scale, noise_std, test_samples } => {
                writeln!(s, "dataset = blobs")?;
                writeln!(s, "n_features = {n_features}")?;
                writeln!(s, "n_classes = {n_classes}")?;
                writeln!(s, "center_scale = {center_scale}")?;
                writeln!(s, "noise_std = {noise_std}")?;
                writeln!(s, "test_samples = {test_samples}")?;
            }
            DataSource::Csv { path, train_split } => {
                writeln!(s, "dataset = csv")?;
                writeln!(s, "csv_path = {}", path.display())?;
                writeln!(s, "train_split = {train_split}")?;
            }
        }

        for r in &cfg.rats {
            writeln!(s, "\n[rat]")?;
            writeln!(s, "id = {}", r.rat_id)?;
            writeln!(s, "label = {}", r.label)?;
            writeln!(s, "prb_count = {}", r.prb_count)?;
            writeln!(s, "prb_bandwidth_hz = {}", r.prb_bandwidth_hz)?;
            writeln!(s, "base_latency_s = {}", r.base_latency_s)?;
            writeln!(s, "power_levels_w = {}", Joined(&r.power_levels_w))?;
            writeln!(s, "idle_power_w = {}", r.idle_power_w)?;
            writeln!(s, "outage_snr_threshold = {}", r.outage_snr_threshold)?;
        }
        for p in &cfg.pathways {
            writeln!(s, "\n[pathway]")?;
            writeln!(s, "id = {}", p.pathway_id)?;
            let stages: Vec<String> = p.stages.iter().map(|st| format!("{}:{}", st.unit, st.latency_s)).collect();
            writeln!(s, "stages = {}", stages.join(", "))?;
            writeln!(s, "capacity_bps = {}", p.capacity_bps)?;
        }
        for cl in &cfg.clients {
            writeln!(s, "\n[client]")?;
            writeln!(s, "id = {}", cl.client_id)?;
            let snr: Vec<String> = cl.mean_snr.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            writeln!(s, "mean_snr = {}", snr.join(", "))?;
            writeln!(s, "dataset_size = {}", cl.dataset_size)?;
            writeln!(s, "compute_rate = {}", cl.compute_rate)?;
            writeln!(s, "compute_power_w = {}", cl.compute_power_w)?;
        }
        Ok(())
    })();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ric::AllocationKind;

    const MINIMAL: &str = "\
[sim]
seeds = 3

[rat]
id = 0
prb_count = 10
prb_bandwidth_hz = 180e3
power_levels_w = 0.2, 0.5

[pathway]
id = 0
stages = O-RU:0.001, O-DU:0.002, O-CU:0.001
capacity_bps = 1e9

[client]
id = 0
count = 2
mean_snr = 0:15
";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL, None).unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.rounds, crate::sim::DEFAULT_ROUNDS);
        assert_eq!(cfg.eps_out, crate::sim::DEFAULT_EPS_OUT);
        assert_eq!(cfg.rats[0].label, "rat0");
        assert_eq!(cfg.rats[0].prb_bandwidth_hz, 180e3);
        assert_eq!(cfg.clients.len(), 2);
        assert_eq!(cfg.clients[1].client_id, 1);
        assert_eq!(cfg.clients[1].dataset_size, 100);
        assert_eq!(cfg.controller.allocation, AllocationKind::ProportionalFair);
        assert_eq!(cfg.fl.strategy, "fedora");
        assert_eq!(cfg.pathways[0].stage_latency_s(), 0.001 + 0.002 + 0.001);
    }

    #[test]
    fn decreasing_power_levels_name_the_key_and_line() {
        let text = MINIMAL.replace("power_levels_w = 0.2, 0.5", "power_levels_w = 0.5, 0.2");
        match parse_config_str(&text, None).unwrap_err() {
            ConfigError::Validation { key, line, .. } => {
                assert_eq!(key, "rat[0].power_levels_w");
                assert_eq!(line, Some(8));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        let e = parse_config_str(&MINIMAL.replace("seeds = 3", "seeds = 3\nbogus = 1"), None).unwrap_err();
        assert_eq!(e, ConfigError::Parse { line: 3, message: "unknown key 'bogus' in [sim]".into() });
        let e = parse_config_str("[nope]\n", None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 1, .. }));
        let e = parse_config_str("rounds = 3\n", None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_errors_are_line_addressed() {
        let e = parse_config_str(&MINIMAL.replace("prb_count = 10", "prb_count = ten"), None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 6, .. }), "{e:?}");
        let e = parse_config_str(&MINIMAL.replace("O-DU:0.002", "O-XX:0.002"), None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 12, .. }), "{e:?}");
        let e = parse_config_str(&MINIMAL.replace("mean_snr = 0:15", "mean_snr = 15"), None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 18, .. }), "{e:?}");
        let e = parse_config_str(&MINIMAL.replace("id = 0\nprb_count", "prb_count"), None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 4, .. }), "{e:?}");
        let e = parse_config_str(&format!("{MINIMAL}\n[sim]\n"), None).unwrap_err();
        assert!(e.to_string().contains("appears twice"));
    }

    #[test]
    fn one_client_fails_validation() {
        let e = parse_config_str(&MINIMAL.replace("count = 2", "count = 1"), None).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref key, line: Some(15), .. } if key == "client"), "{e:?}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = parse_config_str(MINIMAL, None).unwrap();
        cfg.controller.baseline_rat = Some(0);
        cfg.controller.q.alpha = 0.123456789;
        cfg.fl.partition = PartitionKind::Dirichlet { alpha: 0.3 };
        cfg.rats[0].base_latency_s = 1.0 / 3.0;
        let text = to_config_string(&cfg);
        assert_eq!(parse_config_str(&text, None).unwrap(), cfg);
    }

    #[test]
    fn dataset_keys_must_match_source() {
        let text = MINIMAL.replace("seeds = 3", "seeds = 3\n[fl]\ncsv_path = x.csv");
        assert!(parse_config_str(&text, None).is_err());
        let text = MINIMAL.replace("seeds = 3", "seeds = 3\n[fl]\ndataset = csv\ncsv_path = x.csv");
        let cfg = parse_config_str(&text, Some(Path::new("/data"))).unwrap();
        assert_eq!(cfg.fl.data, DataSource::Csv { path: PathBuf::from("/data/x.csv"), train_split: 0.8 });
    }
}
