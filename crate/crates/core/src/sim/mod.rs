//! Round-by-round coupling of the RIC controllers with the FL loop, and
//! multi-seed experiment orchestration.

mod experiment;
mod round;

pub use experiment::{run_experiment, summarize_runs, Experiment, ExperimentReport, SeedRun};
pub use round::{make_observation, ClientRecord, DropReason, Engine, RoundTrace};

use std::path::PathBuf;

use thiserror::Error;

use crate::fl::{ModelShape, PartitionKind, SelectionStrategy};
use crate::net::{ClientNode, Pathway, RatId, RatProfile};
use crate::ric::{AllocationKind, QLearningParams, RewardWeights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    /// `key` is a dotted path such as `rat[1].power_levels_w`.
    #[error("invalid configuration at {key}: {message}")]
    Validation { key: String, message: String },
    #[error("dataset: {0}")]
    Data(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl SimError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Validation { key: key.into(), message: message.into() }
    }
}

/// rApp/xApp settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// When false the RIC is bypassed: every client uses `baseline_rat` at
    /// maximum power, no outage guard runs, PRBs are shared equally and the
    /// lowest-id pathway carries every upload.
    pub enabled: bool,
    /// RAT of the disabled-controller baseline; `None` means the lowest RAT id.
    pub baseline_rat: Option<RatId>,
    pub q: QLearningParams,
    pub reward: RewardWeights,
    /// Latency bucket edges (s), strictly increasing.
    pub latency_edges: Vec<f64>,
    /// PRB demand-fraction bucket edges, strictly increasing.
    pub congestion_edges: Vec<f64>,
    pub allocation: AllocationKind,
    /// The rApp re-decides every `rapp_period` rounds.
    pub rapp_period: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            enabled: true,
            baseline_rat: None,
            q: QLearningParams::default(),
            reward: RewardWeights::default(),
            latency_edges: vec![0.05, 0.1, 0.2],
            congestion_edges: vec![0.33, 0.66],
            allocation: AllocationKind::ProportionalFair,
            rapp_period: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Synthetic Gaussian clusters; client shard sizes come from `dataset_size`.
    Blobs { n_features: usize, n_classes: usize, center_scale: f64, noise_std: f64, test_samples: usize },
    /// `f0..f{d-1},label` CSV, split into train/test and dealt to clients in
    /// proportion to their `dataset_size`.
    Csv { path: PathBuf, train_split: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlConfig {
    /// One of `fedora`, `fedavg-random`, `greedy`, `loss-ranked`.
    pub strategy: String,
    pub fraction: f64,
    pub top_k: usize,
    /// Hidden width; 0 selects logistic regression.
    pub hidden: usize,
    pub epochs: u32,
    pub lr: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    pub partition: PartitionKind,
    pub data: DataSource,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            strategy: "fedora".into(),
            fraction: 0.5,
            top_k: 5,
            hidden: 0,
            epochs: 1,
            lr: 0.1,
            batch_size: 16,
            init_scale: 0.01,
            partition: PartitionKind::Iid,
            data: DataSource::Blobs {
                n_features: 16,
                n_classes: 10,
                center_scale: 1.0,
                noise_std: 1.0,
                test_samples: 1000,
            },
        }
    }
}

impl FlConfig {
    pub fn selection(&self) -> Result<SelectionStrategy, String> {
        let s = SelectionStrategy::from_name(&self.strategy, self.fraction, self.top_k)?;
        s.check()?;
        Ok(s)
    }
}

/// Complete declarative description of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rounds: u32,
    /// Upload deadline per round (s).
    pub deadline_s: f64,
    /// Floor on a round's wall-clock duration (s).
    pub min_round_duration_s: f64,
    /// Outage probability bound enforced by the guard.
    pub eps_out: f64,
    pub seeds: Vec<u64>,
    pub rats: Vec<RatProfile>,
    pub pathways: Vec<Pathway>,
    pub clients: Vec<ClientNode>,
    pub controller: ControllerConfig,
    pub fl: FlConfig,
}

pub const DEFAULT_ROUNDS: u32 = 50;
pub const DEFAULT_DEADLINE_S: f64 = 1.0;
pub const DEFAULT_MIN_ROUND_S: f64 = 0.1;
pub const DEFAULT_EPS_OUT: f64 = 0.05;

impl SimConfig {
    /// Config with documented defaults and the given topology.
    pub fn with_topology(rats: Vec<RatProfile>, pathways: Vec<Pathway>, clients: Vec<ClientNode>) -> Self {
        SimConfig {
            rounds: DEFAULT_ROUNDS,
            deadline_s: DEFAULT_DEADLINE_S,
            min_round_duration_s: DEFAULT_MIN_ROUND_S,
            eps_out: DEFAULT_EPS_OUT,
            seeds: vec![1],
            rats,
            pathways,
            clients,
            controller: ControllerConfig::default(),
            fl: FlConfig::default(),
        }
    }

    pub fn rat(&self, id: RatId) -> Option<&RatProfile> {
        self.rats.iter().find(|r| r.rat_id == id)
    }

    pub fn baseline_rat(&self) -> RatId {
        self.controller
            .baseline_rat
            .unwrap_or_else(|| self.rats.iter().map(|r| r.rat_id).min().unwrap_or(0))
    }

    pub fn model_shape(&self, n_features: usize, n_classes: usize) -> ModelShape {
        ModelShape { n_features, n_classes, hidden: self.fl.hidden }
    }

    /// Checks every invariant, reporting the first violation by key path.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.rounds == 0 {
            return Err(SimError::invalid("sim.rounds", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(SimError::invalid("sim.seeds", "must list at least one seed"));
        }
        if !(self.eps_out > 0.0 && self.eps_out < 1.0) {
            return Err(SimError::invalid("sim.eps_out", "must lie in (0, 1)"));
        }
        if !(self.min_round_duration_s >= 0.0 && self.min_round_duration_s.is_finite()) {
            return Err(SimError::invalid("sim.min_round_duration_s", "must be nonnegative"));
        }
        if self.rats.is_empty() {
            return Err(SimError::invalid("rat", "at least one [rat] block is required"));
        }
        if self.pathways.is_empty() {
            return Err(SimError::invalid("pathway", "at least one [pathway] block is required"));
        }
        if self.clients.len() < 2 {
            return Err(SimError::invalid("client", "at least two clients are required"));
        }
        for (i, rat) in self.rats.iter().enumerate() {
            rat.check().map_err(|(k, m)| SimError::invalid(format!("rat[{i}].{k}"), m))?;
            if self.rats[..i].iter().any(|r| r.rat_id == rat.rat_id) {
                return Err(SimError::invalid(format!("rat[{i}].id"), format!("duplicate RAT id {}", rat.rat_id)));
            }
        }
        for (i, p) in self.pathways.iter().enumerate() {
            p.check().map_err(|(k, m)| SimError::invalid(format!("pathway[{i}].{k}"), m))?;
            if self.pathways[..i].iter().any(|q| q.pathway_id == p.pathway_id) {
                return Err(SimError::invalid(
                    format!("pathway[{i}].id"),
                    format!("duplicate pathway id {}", p.pathway_id),
                ));
            }
        }
        for (i, c) in self.clients.iter().enumerate() {
            c.check(&self.rats).map_err(|(k, m)| SimError::invalid(format!("client[{i}].{k}"), m))?;
            if self.clients[..i].iter().any(|o| o.client_id == c.client_id) {
                return Err(SimError::invalid(
                    format!("client[{i}].id"),
                    format!("duplicate client id {}", c.client_id),
                ));
            }
        }
        let max_base = self.rats.iter().map(|r| r.base_latency_s).fold(0.0, f64::max);
        if !(self.deadline_s > max_base && self.deadline_s.is_finite()) {
            return Err(SimError::invalid(
                "sim.deadline_s",
                format!("must exceed the largest RAT base latency ({max_base})"),
            ));
        }

        let c = &self.controller;
        c.q.check().map_err(|(k, m)| SimError::invalid(format!("controller.{k}"), m))?;
        c.reward.check().map_err(|(k, m)| SimError::invalid(format!("controller.{k}"), m))?;
        for (key, edges) in [("latency_edges", &c.latency_edges), ("congestion_edges", &c.congestion_edges)] {
            if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SimError::invalid(format!("controller.{key}"), "edges must be finite and strictly increasing"));
            }
            if edges.len() > u8::MAX as usize - 1 {
                return Err(SimError::invalid(format!("controller.{key}"), "too many edges"));
            }
        }
        if c.rapp_period == 0 {
            return Err(SimError::invalid("controller.rapp_period", "must be at least 1"));
        }
        if let Some(id) = c.baseline_rat {
            if self.rat(id).is_none() {
                return Err(SimError::invalid("controller.baseline_rat", format!("unknown RAT id {id}")));
            }
        }

        let fl = &self.fl;
        fl.selection().map_err(|m| SimError::invalid("fl.strategy", m))?;
        if fl.epochs == 0 {
            // Zero local epochs is legal for the trainer but makes the loop a no-op.
            return Err(SimError::invalid("fl.epochs", "must be at least 1"));
        }
        if !(fl.lr > 0.0 && fl.lr.is_finite()) {
            return Err(SimError::invalid("fl.lr", "must be positive"));
        }
        if fl.batch_size == 0 {
            return Err(SimError::invalid("fl.batch_size", "must be at least 1"));
        }
        if !(fl.init_scale >= 0.0 && fl.init_scale.is_finite()) {
            return Err(SimError::invalid("fl.init_scale", "must be nonnegative"));
        }
        if let PartitionKind::Dirichlet { alpha } = fl.partition {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(SimError::invalid("fl.dirichlet_alpha", "must be positive"));
            }
        }
        match &fl.data {
            DataSource::Blobs { n_features, n_classes, center_scale, noise_std, test_samples } => {
                if *n_features == 0 {
                    return Err(SimError::invalid("fl.n_features", "must be at least 1"));
                }
                if *n_classes < 2 {
                    return Err(SimError::invalid("fl.n_classes", "must be at least 2"));
                }
                if !(*center_scale >= 0.0 && center_scale.is_finite()) {
                    return Err(SimError::invalid("fl.center_scale", "must be nonnegative"));
                }
                if !(*noise_std >= 0.0 && noise_std.is_finite()) {
                    return Err(SimError::invalid("fl.noise_std", "must be nonnegative"));
                }
                if *test_samples == 0 {
                    return Err(SimError::invalid("fl.test_samples", "must be at least 1"));
                }
            }
            DataSource::Csv { train_split, .. } => {
                if !(*train_split > 0.0 && *train_split < 1.0) {
                    return Err(SimError::invalid("fl.train_split", "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::BTreeMap;

    use super::*;
    use crate::net::{PathwayStage, UnitKind};

    pub fn rat(id: RatId, levels: Vec<f64>) -> RatProfile {
        RatProfile {
            rat_id: id,
            label: format!("rat{id}"),
            prb_count: 20,
            prb_bandwidth_hz: 180e3,
            base_latency_s: 0.005,
            power_levels_w: levels,
            idle_power_w: 0.01,
            outage_snr_threshold: 1.0,
        }
    }

    pub fn pathway(id: u32) -> Pathway {
        Pathway {
            pathway_id: id,
            stages: vec![
                PathwayStage { unit: UnitKind::RadioUnit, latency_s: 0.001 },
                PathwayStage { unit: UnitKind::DistributedUnit, latency_s: 0.002 },
                PathwayStage { unit: UnitKind::CentralisedUnit, latency_s: 0.001 },
            ],
            capacity_bps: 1e9,
        }
    }

    pub fn client(id: u32, snr: &[(RatId, f64)]) -> ClientNode {
        ClientNode {
            client_id: id,
            mean_snr: snr.iter().copied().collect::<BTreeMap<_, _>>(),
            dataset_size: 40,
            compute_rate: 2000.0,
            compute_power_w: 0.5,
        }
    }

    /// Small, fast two-client config on easy blobs.
    pub fn small_config() -> SimConfig {
        let mut cfg = SimConfig::with_topology(
            vec![rat(0, vec![0.5, 1.0])],
            vec![pathway(0)],
            vec![client(0, &[(0, 200.0)]), client(1, &[(0, 200.0)])],
        );
        cfg.rounds = 3;
        cfg.fl.data = DataSource::Blobs {
            n_features: 4,
            n_classes: 3,
            center_scale: 3.0,
            noise_std: 0.5,
            test_samples: 60,
        };
        cfg
    }
}
