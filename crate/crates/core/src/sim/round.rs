use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{DataSource, SimConfig, SimError};
use crate::fl::data::{self, BlobSpec};
use crate::fl::{
    evaluate, fedavg_aggregate, init_params, local_train, select_clients, ClientHistory, ClientUpdate,
    LocalDataset, ModelParams, ModelShape, PartitionKind, SelectionStrategy, TrainSettings,
};
use crate::net::{
    pathway_latency, round_energy, sample_snr, shannon_rate, ClientId, ClientNode, KpiReport, LinkRealization, PathwayId,
    RatId, RatProfile,
};
use crate::rng::{substream, Stream};
use crate::ric::{
    allocate_prbs, effective_mean_snr, full_action_space, outage_guard, reward, select_pathway, Action,
    AllocationKind, AllocationPolicy, GuardOutcome, QTable, RicError, RicObservation,
};

/// Why a client's update did not reach aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    None,
    Outage,
    Deadline,
    NotSelected,
    Infeasible,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::None => "none",
            DropReason::Outage => "outage",
            DropReason::Deadline => "deadline",
            DropReason::NotSelected => "not-selected",
            DropReason::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DropReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            DropReason::None,
            DropReason::Outage,
            DropReason::Deadline,
            DropReason::NotSelected,
            DropReason::Infeasible,
        ]
        .into_iter()
        .find(|d| d.name() == s)
        .ok_or_else(|| format!("unknown drop reason '{s}'"))
    }
}

/// One client's outcome in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientRecord {
    pub client_id: ClientId,
    /// Action after the outage guard; the rApp's candidate when infeasible.
    pub action: Action,
    pub power_w: f64,
    pub prbs: u32,
    pub pathway_id: Option<PathwayId>,
    pub kpi: KpiReport,
    pub included: bool,
    pub drop_reason: DropReason,
    /// Channel draw of the upload; `None` when nothing was transmitted.
    pub link: Option<LinkRealization>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round_index: u32,
    /// Ascending client id.
    pub records: Vec<ClientRecord>,
    pub accuracy: f64,
    pub loss: f64,
    pub energy_j: f64,
    pub wallclock_s: f64,
}

fn bucket(value: f64, edges: &[f64]) -> u8 {
    edges.iter().filter(|&&e| value >= e).count() as u8
}

/// Discretizes last-round KPIs and per-RAT PRB demand into a controller state.
pub fn make_observation(
    prev_kpi: Option<&KpiReport>,
    congestion: &[f64],
    latency_edges: &[f64],
    congestion_edges: &[f64],
) -> RicObservation {
    let (latency_bucket, outage_flag) = match prev_kpi {
        Some(k) => (bucket(k.latency_s, latency_edges), k.outage),
        None => (0, false),
    };
    RicObservation {
        latency_bucket,
        outage_flag,
        congestion: congestion.iter().map(|&c| bucket(c, congestion_edges)).collect(),
    }
}

/// Per-client data and the shared held-out test set.
struct FederatedData {
    shape: ModelShape,
    shards: Vec<LocalDataset>,
    test: LocalDataset,
}

fn build_data(cfg: &SimConfig, clients: &[ClientNode], seed: u64) -> Result<FederatedData, SimError> {
    let mut rng = substream(seed, Stream::Data, 0, 0);
    let fail = |e: crate::fl::FlError| SimError::Data(e.to_string());
    match &cfg.fl.data {
        DataSource::Blobs { n_features, n_classes, center_scale, noise_std, test_samples } => {
            let spec = BlobSpec {
                n_features: *n_features,
                n_classes: *n_classes,
                center_scale: *center_scale,
                noise_std: *noise_std,
            };
            let centers = spec.centers(&mut rng);
            let test = data::balanced_blobs(&spec, &centers, *test_samples, &mut rng).map_err(fail)?;
            let mut shards = Vec::with_capacity(clients.len());
            for c in clients {
                let probs = match cfg.fl.partition {
                    PartitionKind::Iid => vec![1.0; spec.n_classes],
                    PartitionKind::Dirichlet { alpha } => data::dirichlet(alpha, spec.n_classes, &mut rng),
                };
                let mut shard =
                    data::gaussian_blobs(&spec, &centers, &probs, c.dataset_size as usize, &mut rng).map_err(fail)?;
                shard.partition = cfg.fl.partition;
                shards.push(shard);
            }
            Ok(FederatedData { shape: cfg.model_shape(spec.n_features, spec.n_classes), shards, test })
        }
        DataSource::Csv { path, train_split } => {
            let pooled = LocalDataset::from_csv(path).map_err(fail)?;
            let (train, test) = data::train_test_split(&pooled, *train_split, &mut rng).map_err(fail)?;
            let weights: Vec<f64> = clients.iter().map(|c| c.dataset_size as f64).collect();
            let shards = data::partition(&train, &weights, cfg.fl.partition, &mut rng).map_err(fail)?;
            Ok(FederatedData { shape: cfg.model_shape(pooled.n_features, pooled.n_classes), shards, test })
        }
    }
}

/// Per-client decision state inside one round.
struct Decision {
    candidate: Action,
    guarded: Option<Action>,
    observation: RicObservation,
}

/// Simulation state of one seed.
pub struct Engine<'a> {
    cfg: &'a SimConfig,
    seed: u64,
    strategy: SelectionStrategy,
    clients: Vec<ClientNode>,
    rat_ids: Vec<RatId>,
    data: FederatedData,
    global: ModelParams,
    q: QTable<RicObservation, Action>,
    actions: Vec<Action>,
    history: ClientHistory,
    prev_kpi: BTreeMap<ClientId, KpiReport>,
    prev_congestion: Vec<f64>,
    last_action: BTreeMap<ClientId, Action>,
    round: u32,
}

impl<'a> Engine<'a> {
    /// Fresh data, model, and Q-table for `seed`. The config must be valid.
    pub fn new(cfg: &'a SimConfig, seed: u64) -> Result<Self, SimError> {
        let strategy = cfg.fl.selection().map_err(|m| SimError::invalid("fl.strategy", m))?;
        let mut clients = cfg.clients.clone();
        clients.sort_by_key(|c| c.client_id);
        let mut rat_ids: Vec<RatId> = cfg.rats.iter().map(|r| r.rat_id).collect();
        rat_ids.sort_unstable();
        let data = build_data(cfg, &clients, seed)?;
        let global = init_params(&data.shape, cfg.fl.init_scale, &mut substream(seed, Stream::ModelInit, 0, 0));
        let actions = if cfg.controller.enabled {
            full_action_space(&cfg.rats)
        } else {
            let rat = cfg.rat(cfg.baseline_rat()).expect("validated baseline RAT");
            vec![Action::new(rat.rat_id, rat.max_power_index())]
        };
        Ok(Engine {
            cfg,
            seed,
            strategy,
            prev_congestion: vec![0.0; rat_ids.len()],
            clients,
            rat_ids,
            data,
            global,
            q: QTable::new(cfg.controller.q.clone()),
            actions,
            history: ClientHistory::default(),
            prev_kpi: BTreeMap::new(),
            last_action: BTreeMap::new(),
            round: 0,
        })
    }

    pub fn global(&self) -> &ModelParams {
        &self.global
    }

    pub fn shape(&self) -> ModelShape {
        self.data.shape
    }

    pub fn test_set(&self) -> &LocalDataset {
        &self.data.test
    }

    /// Client shards in ascending client-id order.
    pub fn shards(&self) -> &[LocalDataset] {
        &self.data.shards
    }

    pub fn q_table(&self) -> &QTable<RicObservation, Action> {
        &self.q
    }

    pub fn action_space(&self) -> &[Action] {
        &self.actions
    }

    pub fn evaluate_global(&self) -> Result<(f64, f64), SimError> {
        evaluate(&self.data.shape, &self.global, &self.data.test).map_err(|e| SimError::Runtime(e.to_string()))
    }

    fn rat(&self, id: RatId) -> &'a RatProfile {
        self.cfg.rat(id).expect("actions only reference configured RATs")
    }

    fn observe(&self, client: ClientId, congestion: &[f64], kpi: Option<&KpiReport>) -> RicObservation {
        let c = &self.cfg.controller;
        let kpi = kpi.or_else(|| self.prev_kpi.get(&client));
        make_observation(kpi, congestion, &c.latency_edges, &c.congestion_edges)
    }

    /// Step 1: rApp decision plus outage guard for every client.
    fn decide(&mut self) -> Result<Vec<Decision>, SimError> {
        let mut rng = substream(self.seed, Stream::Policy, self.round as u64, 0);
        let enabled = self.cfg.controller.enabled;
        let act_now = self.round.is_multiple_of(self.cfg.controller.rapp_period);
        let mut decisions = Vec::with_capacity(self.clients.len());
        for client in &self.clients {
            let observation = self.observe(client.client_id, &self.prev_congestion, None);
            let candidate = match self.last_action.get(&client.client_id) {
                Some(prev) if !act_now => *prev,
                _ => self
                    .q
                    .select_action(&observation, &self.actions, &mut rng)
                    .map_err(|e| SimError::Runtime(e.to_string()))?,
            };
            let guarded = if enabled {
                match outage_guard(candidate, client, self.rat(candidate.rat_id), self.cfg.eps_out) {
                    GuardOutcome::Feasible(a) => Some(a),
                    GuardOutcome::Infeasible => None,
                }
            } else {
                Some(candidate)
            };
            decisions.push(Decision { candidate, guarded, observation });
        }
        for (client, d) in self.clients.iter().zip(&decisions) {
            self.last_action.insert(client.client_id, d.candidate);
        }
        Ok(decisions)
    }

    /// Step 4: PRB allocation per RAT. Clients that receive no blocks are deferred.
    fn allocate(&self, on_rat: &BTreeMap<RatId, Vec<(ClientId, f64)>>) -> Result<BTreeMap<ClientId, u32>, SimError> {
        let kind = if self.cfg.controller.enabled {
            self.cfg.controller.allocation
        } else {
            AllocationKind::EqualShare
        };
        let mut prbs = BTreeMap::new();
        for (&rat_id, members) in on_rat {
            let policy = AllocationPolicy::for_rat(kind, self.rat(rat_id));
            let alloc = match allocate_prbs(&policy, members) {
                Err(RicError::OverAdmission { admitted, .. }) => {
                    let kept: Vec<(ClientId, f64)> =
                        members.iter().copied().filter(|(id, _)| admitted.contains(id)).collect();
                    let mut a = allocate_prbs(&policy, &kept).map_err(|e| SimError::Runtime(e.to_string()))?;
                    for (id, _) in members {
                        a.entry(*id).or_insert(0);
                    }
                    a
                }
                other => other.map_err(|e| SimError::Runtime(e.to_string()))?,
            };
            prbs.extend(alloc);
        }
        Ok(prbs)
    }

    /// Executes one full round and advances the state.
    pub fn run_round(&mut self) -> Result<RoundTrace, SimError> {
        let cfg = self.cfg;
        let round = self.round;
        let runtime = |e: &dyn fmt::Display| SimError::Runtime(e.to_string());

        // (1) rApp
        let decisions = self.decide()?;

        // (2) FL client selection over feasible clients
        let eligible: BTreeSet<ClientId> = self
            .clients
            .iter()
            .zip(&decisions)
            .filter(|(_, d)| d.guarded.is_some())
            .map(|(c, _)| c.client_id)
            .collect();
        let selected = if eligible.is_empty() {
            BTreeSet::new()
        } else {
            let mut rng = substream(self.seed, Stream::Selection, round as u64, 0);
            select_clients(&self.strategy, &self.history, &eligible, &mut rng).map_err(|e| runtime(&e))?
        };

        // (3) local training
        let settings = TrainSettings { epochs: cfg.fl.epochs, lr: cfg.fl.lr, batch_size: cfg.fl.batch_size };
        let jobs: Vec<(usize, ClientId)> = self
            .clients
            .iter()
            .enumerate()
            .filter(|(_, c)| selected.contains(&c.client_id))
            .map(|(i, c)| (i, c.client_id))
            .collect();
        let trained: BTreeMap<ClientId, (ModelParams, f64)> = jobs
            .par_iter()
            .map(|&(i, id)| {
                let mut rng = substream(self.seed, Stream::Training, round as u64, id as u64);
                local_train(&self.data.shape, &self.global, &self.data.shards[i], &settings, &mut rng)
                    .map(|out| (id, out))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| runtime(&e))?;

        // (4) xApp: PRBs, then pathways
        let payload_bits = self.global.payload_bits() as f64;
        let mut on_rat: BTreeMap<RatId, Vec<(ClientId, f64)>> = BTreeMap::new();
        for (client, d) in self.clients.iter().zip(&decisions) {
            if let (true, Some(a)) = (selected.contains(&client.client_id), d.guarded) {
                let mean = effective_mean_snr(client, self.rat(a.rat_id), a.power_level_index);
                on_rat.entry(a.rat_id).or_default().push((client.client_id, mean.ln_1p() / std::f64::consts::LN_2));
            }
        }
        let prbs = self.allocate(&on_rat)?;
        let congestion: Vec<f64> = self
            .rat_ids
            .iter()
            .map(|id| {
                let n = on_rat.get(id).map_or(0, Vec::len) as f64;
                n / self.rat(*id).prb_count as f64
            })
            .collect();
        let lowest_pathway = cfg.pathways.iter().map(|p| p.pathway_id).min().expect("validated pathways");

        // (5) physics, tentatively per participant
        struct Upload {
            compute_s: f64,
            tx_s: f64,
            active_s: f64,
            latency_s: f64,
            rate_bps: f64,
            outage: bool,
            drop: DropReason,
            pathway: Option<PathwayId>,
            link: Option<LinkRealization>,
        }
        let mut uploads: BTreeMap<ClientId, Upload> = BTreeMap::new();
        for (client, d) in self.clients.iter().zip(&decisions) {
            let (Some(a), true) = (d.guarded, selected.contains(&client.client_id)) else { continue };
            let rat = self.rat(a.rat_id);
            let shard_len = self.data.shards[self.index_of(client.client_id)].len() as f64;
            let compute_s = cfg.fl.epochs as f64 * shard_len / client.compute_rate;
            let n_prbs = prbs.get(&client.client_id).copied().unwrap_or(0);
            if n_prbs == 0 {
                uploads.insert(
                    client.client_id,
                    Upload {
                        compute_s,
                        tx_s: 0.0,
                        active_s: 0.0,
                        latency_s: 0.0,
                        rate_bps: 0.0,
                        outage: false,
                        drop: DropReason::NotSelected,
                        pathway: None,
                        link: None,
                    },
                );
                continue;
            }
            let bandwidth = n_prbs as f64 * rat.prb_bandwidth_hz;
            let mean = effective_mean_snr(client, rat, a.power_level_index);
            let nominal_rate = shannon_rate(bandwidth, mean).map_err(|e| runtime(&e))?;
            let pathway_id = if cfg.controller.enabled {
                select_pathway(&cfg.pathways, payload_bits, nominal_rate).map_err(|e| runtime(&e))?
            } else {
                lowest_pathway
            };
            let pathway = cfg.pathways.iter().find(|p| p.pathway_id == pathway_id).expect("selected from config");

            let mut channel = substream(self.seed, Stream::Channel, round as u64, client.client_id as u64);
            let snr = sample_snr(mean, &mut channel);
            let outage = snr < rat.outage_snr_threshold;
            // An outage upload still occupies the link for its nominal duration.
            let air_rate = if outage { nominal_rate } else { shannon_rate(bandwidth, snr).map_err(|e| runtime(&e))? };
            let transfer_rate = air_rate.min(pathway.capacity_bps);
            let (tx_s, latency_s) = if transfer_rate > 0.0 {
                let path_s = pathway_latency(pathway, payload_bits, air_rate).map_err(|e| runtime(&e))?;
                (payload_bits / transfer_rate, rat.base_latency_s + path_s)
            } else {
                (cfg.deadline_s, f64::INFINITY)
            };
            let drop = if outage {
                DropReason::Outage
            } else if latency_s > cfg.deadline_s {
                DropReason::Deadline
            } else {
                DropReason::None
            };
            let active_s = if drop == DropReason::None { latency_s } else { latency_s.min(cfg.deadline_s) };
            uploads.insert(
                client.client_id,
                Upload {
                    compute_s,
                    tx_s: tx_s.min(cfg.deadline_s),
                    active_s,
                    latency_s: if latency_s.is_finite() { latency_s } else { cfg.deadline_s },
                    rate_bps: if outage { 0.0 } else { air_rate },
                    outage,
                    drop,
                    pathway: Some(pathway_id),
                    link: Some(LinkRealization {
                        client_id: client.client_id,
                        rat_id: a.rat_id,
                        snr_linear: snr,
                        tx_power_w: rat.power_levels_w[a.power_level_index],
                        prbs_allocated: n_prbs,
                    }),
                },
            );
        }

        let wallclock_s = uploads
            .values()
            .filter(|u| u.drop == DropReason::None)
            .map(|u| u.compute_s + u.latency_s)
            .fold(cfg.min_round_duration_s, f64::max);

        // (6) energy and records
        let mut records = Vec::with_capacity(self.clients.len());
        for (client, d) in self.clients.iter().zip(&decisions) {
            let id = client.client_id;
            let action = d.guarded.unwrap_or(d.candidate);
            let rat = self.rat(action.rat_id);
            let power_w = rat.power_levels_w[action.power_level_index];
            let record = match (d.guarded, uploads.get(&id)) {
                (None, _) => ClientRecord {
                    client_id: id,
                    action,
                    power_w,
                    prbs: 0,
                    pathway_id: None,
                    kpi: KpiReport { outage: true, ..KpiReport::idle(round, id) },
                    included: false,
                    drop_reason: DropReason::Infeasible,
                    link: None,
                },
                (Some(_), None) => ClientRecord {
                    client_id: id,
                    action,
                    power_w,
                    prbs: 0,
                    pathway_id: None,
                    kpi: KpiReport::idle(round, id),
                    included: false,
                    drop_reason: DropReason::NotSelected,
                    link: None,
                },
                (Some(_), Some(u)) => {
                    let idle_s = (wallclock_s - u.compute_s - u.active_s).max(0.0);
                    let energy_j = round_energy(
                        power_w,
                        u.tx_s,
                        client.compute_power_w,
                        u.compute_s,
                        rat.idle_power_w,
                        idle_s,
                    )
                    .map_err(|e| runtime(&e))?;
                    let included = u.drop == DropReason::None;
                    ClientRecord {
                        client_id: id,
                        action,
                        power_w,
                        prbs: prbs.get(&id).copied().unwrap_or(0),
                        pathway_id: u.pathway,
                        kpi: KpiReport {
                            round_index: round,
                            client_id: id,
                            latency_s: u.latency_s,
                            energy_j,
                            rate_bps: u.rate_bps,
                            outage: u.outage,
                            qos_met: included,
                        },
                        included,
                        drop_reason: u.drop,
                        link: u.link.clone(),
                    }
                }
            };
            records.push(record);
        }

        // (7) aggregation over delivered updates
        let updates: Vec<ClientUpdate> = records
            .iter()
            .filter(|r| r.included)
            .map(|r| {
                let (params, loss) = trained[&r.client_id].clone();
                ClientUpdate {
                    client_id: r.client_id,
                    params,
                    sample_count: self.data.shards[self.index_of(r.client_id)].len() as u32,
                    local_loss: loss,
                }
            })
            .collect();
        if !updates.is_empty() {
            self.global = fedavg_aggregate(&updates).map_err(|e| runtime(&e))?;
            for u in &updates {
                self.history.record(u.client_id, u.local_loss);
            }
        }

        // (8) evaluation
        let (accuracy, loss) = self.evaluate_global()?;

        // (9) rApp learning
        if cfg.controller.enabled {
            for (r, d) in records.iter().zip(&decisions) {
                // Clients the FL layer left out produced no feedback. The guard is
                // part of the environment, so the rApp's own choice is credited.
                if d.guarded.is_some() && !uploads.contains_key(&r.client_id) {
                    continue;
                }
                let next = self.observe(r.client_id, &congestion, Some(&r.kpi));
                let gain = reward(&r.kpi, &cfg.controller.reward);
                self.q.update(&d.observation, d.candidate, gain, &next, &self.actions);
            }
            self.q.decay_epsilon();
        }
        for (r, d) in records.iter().zip(&decisions) {
            if d.guarded.is_none() || uploads.contains_key(&r.client_id) {
                self.prev_kpi.insert(r.client_id, r.kpi.clone());
            }
        }
        self.prev_congestion = congestion;
        self.round += 1;

        let energy_j = records.iter().map(|r| r.kpi.energy_j).sum();
        Ok(RoundTrace { round_index: round, records, accuracy, loss, energy_j, wallclock_s })
    }

    fn index_of(&self, id: ClientId) -> usize {
        self.clients
            .binary_search_by_key(&id, |c| c.client_id)
            .expect("client ids come from the engine's own list")
    }
}
