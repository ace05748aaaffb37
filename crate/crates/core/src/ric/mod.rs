//! Two-timescale RAN intelligent control.
//!
//! The rApp ([`QTable`]) picks a (RAT, transmit power) pair per client once
//! per round; [`outage_guard`] then lifts the power until the analytic outage
//! probability meets the configured bound. Within the round the xApp
//! ([`allocate_prbs`], [`select_pathway`]) splits resource blocks among the
//! clients sharing a RAT and routes each upload over the fastest pathway.

mod qtable;
mod xapp;

pub use qtable::{QLearningParams, QTable};
pub use xapp::{allocate_prbs, select_pathway, AllocationKind, AllocationPolicy};

use thiserror::Error;

use crate::net::{outage_probability, ClientNode, KpiReport, RatId, RatProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RicError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// More clients than resource blocks under a one-PRB-minimum policy.
    /// `admitted` lists the clients that fit (lowest ids first).
    #[error("{requested} clients exceed {capacity} resource blocks")]
    OverAdmission { requested: usize, capacity: u32, admitted: Vec<u32> },
}

/// One rApp decision for one client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub rat_id: RatId,
    pub power_level_index: usize,
}

impl Action {
    pub fn new(rat_id: RatId, power_level_index: usize) -> Self {
        Action { rat_id, power_level_index }
    }

    pub fn is_valid_for(&self, rats: &[RatProfile]) -> bool {
        rats.iter()
            .any(|r| r.rat_id == self.rat_id && self.power_level_index < r.power_levels_w.len())
    }
}

/// Every (RAT, power level) pair, in lexicographic order.
pub fn full_action_space(rats: &[RatProfile]) -> Vec<Action> {
    let mut actions: Vec<Action> = rats
        .iter()
        .flat_map(|r| (0..r.power_levels_w.len()).map(move |i| Action::new(r.rat_id, i)))
        .collect();
    actions.sort();
    actions
}

/// Discretized controller state for one client.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RicObservation {
    pub latency_bucket: u8,
    pub outage_flag: bool,
    /// One congestion bucket per RAT, in RAT-id order.
    pub congestion: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights {
    pub w_energy: f64,
    pub w_latency: f64,
    pub qos_penalty: f64,
    pub energy_norm_j: f64,
    pub latency_norm_s: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_energy: 1.0,
            w_latency: 1.0,
            qos_penalty: 5.0,
            energy_norm_j: 1.0,
            latency_norm_s: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("w_energy", self.w_energy),
            ("w_latency", self.w_latency),
            ("qos_penalty", self.qos_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((name, "must be nonnegative".into()));
            }
        }
        if self.w_energy + self.w_latency <= 0.0 {
            return Err(("w_energy", "w_energy + w_latency must be positive".into()));
        }
        if !(self.energy_norm_j > 0.0 && self.energy_norm_j.is_finite()) {
            return Err(("energy_norm_j", "must be positive".into()));
        }
        if !(self.latency_norm_s > 0.0 && self.latency_norm_s.is_finite()) {
            return Err(("latency_norm_s", "must be positive".into()));
        }
        Ok(())
    }
}

/// Negative normalized energy+latency cost, minus the QoS penalty on a miss.
pub fn reward(kpi: &KpiReport, w: &RewardWeights) -> f64 {
    let cost = w.w_energy * kpi.energy_j / w.energy_norm_j + w.w_latency * kpi.latency_s / w.latency_norm_s;
    let penalty = if kpi.qos_met { 0.0 } else { w.qos_penalty };
    -cost - penalty
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardOutcome {
    Feasible(Action),
    /// No power level on this RAT meets the outage bound.
    Infeasible,
}

/// Mean SNR after scaling the max-power mean linearly by the selected power.
pub fn effective_mean_snr(client: &ClientNode, rat: &RatProfile, power_level_index: usize) -> f64 {
    let mean = client.mean_snr.get(&rat.rat_id).copied().unwrap_or(0.0);
    mean * rat.power_levels_w[power_level_index] / rat.max_power_w()
}

/// Outage probability of a client transmitting on `rat` at the given level.
pub fn action_outage_probability(client: &ClientNode, rat: &RatProfile, power_level_index: usize) -> f64 {
    let mean = effective_mean_snr(client, rat, power_level_index);
    outage_probability(mean, rat.outage_snr_threshold).unwrap_or(1.0)
}

/// Raises the candidate's power level until the outage bound holds.
pub fn outage_guard(candidate: Action, client: &ClientNode, rat: &RatProfile, eps_out: f64) -> GuardOutcome {
    debug_assert_eq!(candidate.rat_id, rat.rat_id);
    (candidate.power_level_index..rat.power_levels_w.len())
        .find(|&level| action_outage_probability(client, rat, level) <= eps_out)
        .map_or(GuardOutcome::Infeasible, |level| {
            GuardOutcome::Feasible(Action::new(candidate.rat_id, level))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn kpi(energy_j: f64, latency_s: f64, qos_met: bool) -> KpiReport {
        KpiReport {
            round_index: 0,
            client_id: 0,
            latency_s,
            energy_j,
            rate_bps: 1.0,
            outage: false,
            qos_met,
        }
    }

    fn rat(levels: Vec<f64>, threshold: f64) -> RatProfile {
        RatProfile {
            rat_id: 0,
            label: "r".into(),
            prb_count: 10,
            prb_bandwidth_hz: 1e5,
            base_latency_s: 0.0,
            power_levels_w: levels,
            idle_power_w: 0.0,
            outage_snr_threshold: threshold,
        }
    }

    fn client(mean: f64) -> ClientNode {
        ClientNode {
            client_id: 0,
            mean_snr: BTreeMap::from([(0, mean)]),
            dataset_size: 1,
            compute_rate: 1.0,
            compute_power_w: 1.0,
        }
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights { energy_norm_j: 2.0, latency_norm_s: 0.5, ..Default::default() };
        assert_eq!(reward(&kpi(0.0, 0.0, true), &w), 0.0);
        assert_eq!(reward(&kpi(2.0, 0.5, true), &w), -2.0);
        assert_eq!(reward(&kpi(2.0, 0.5, false), &w), -7.0);
    }

    #[test]
    fn guard_identity_when_met() {
        let r = rat(vec![0.5, 1.0], 0.01);
        let c = client(100.0);
        assert_eq!(outage_guard(Action::new(0, 0), &c, &r, 0.05), GuardOutcome::Feasible(Action::new(0, 0)));
    }

    #[test]
    fn guard_escalates_to_top_level() {
        // threshold 1, eps 0.1: need mean >= 1/-ln(0.9) = 9.491.
        // Mean 12 at max power: level 2 -> 12, level 1 -> 6, level 0 -> 3.
        let r = rat(vec![0.25, 0.5, 1.0], 1.0);
        let c = client(12.0);
        let need = 1.0 / -(0.9f64).ln();
        assert!(12.0 >= need && 6.0 < need);
        assert_eq!(outage_guard(Action::new(0, 0), &c, &r, 0.1), GuardOutcome::Feasible(Action::new(0, 2)));
        assert_eq!(outage_guard(Action::new(0, 1), &c, &r, 0.1), GuardOutcome::Feasible(Action::new(0, 2)));
    }

    #[test]
    fn guard_infeasible_when_exhausted() {
        let r = rat(vec![0.5, 1.0], 1.0);
        let c = client(2.0);
        assert_eq!(outage_guard(Action::new(0, 0), &c, &r, 0.05), GuardOutcome::Infeasible);
    }

    #[test]
    fn action_space_is_lexicographic() {
        let mut a = rat(vec![1.0, 2.0], 1.0);
        a.rat_id = 3;
        let b = rat(vec![1.0], 1.0);
        let space = full_action_space(&[a, b]);
        assert_eq!(space, vec![Action::new(0, 0), Action::new(3, 0), Action::new(3, 1)]);
    }
}
