//! Radio and transport models: RAT profiles, clients, disaggregated
//! pathways, and the rate/latency/energy arithmetic of one model upload.
//!
//! The channel is Rayleigh block fading: the instantaneous linear SNR of a
//! (client, round) pair is exponentially distributed around the client's
//! mean SNR on the chosen RAT, which gives a closed-form outage probability
//! `1 - exp(-threshold / mean)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

pub type RatId = u32;
pub type ClientId = u32;
pub type PathwayId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The link carries no rate; the caller must mark an outage instead of dividing.
    #[error("link rate is zero (outage)")]
    OutageNoRate,
}

/// Static description of one radio access technology.
#[derive(Debug, Clone, PartialEq)]
pub struct RatProfile {
    pub rat_id: RatId,
    pub label: String,
    /// Resource blocks per scheduling interval.
    pub prb_count: u32,
    pub prb_bandwidth_hz: f64,
    /// Fixed access plus fronthaul latency (s).
    pub base_latency_s: f64,
    /// Selectable transmit powers (W), strictly increasing.
    pub power_levels_w: Vec<f64>,
    pub idle_power_w: f64,
    /// Linear SNR below which decoding fails.
    pub outage_snr_threshold: f64,
}

impl RatProfile {
    pub fn max_power_w(&self) -> f64 {
        *self.power_levels_w.last().expect("validated RAT has power levels")
    }

    pub fn max_power_index(&self) -> usize {
        self.power_levels_w.len() - 1
    }

    /// Checks the profile's own invariants, returning the offending field name.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if self.prb_count < 1 {
            return Err(("prb_count", "must be at least 1".into()));
        }
        if !(self.prb_bandwidth_hz > 0.0 && self.prb_bandwidth_hz.is_finite()) {
            return Err(("prb_bandwidth_hz", "must be positive".into()));
        }
        if !(self.base_latency_s >= 0.0 && self.base_latency_s.is_finite()) {
            return Err(("base_latency_s", "must be nonnegative".into()));
        }
        if self.power_levels_w.is_empty() {
            return Err(("power_levels_w", "must list at least one level".into()));
        }
        if self.power_levels_w.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(("power_levels_w", "all levels must be positive".into()));
        }
        if self.power_levels_w.windows(2).any(|w| w[1] <= w[0]) {
            return Err(("power_levels_w", "levels must be strictly increasing".into()));
        }
        if !(self.idle_power_w >= 0.0 && self.idle_power_w.is_finite()) {
            return Err(("idle_power_w", "must be nonnegative".into()));
        }
        if !(self.outage_snr_threshold > 0.0 && self.outage_snr_threshold.is_finite()) {
            return Err(("outage_snr_threshold", "must be positive".into()));
        }
        Ok(())
    }
}

/// One FL participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientNode {
    pub client_id: ClientId,
    /// Average linear SNR on each RAT at that RAT's maximum power level.
    pub mean_snr: BTreeMap<RatId, f64>,
    pub dataset_size: u32,
    /// Local training throughput (samples/s).
    pub compute_rate: f64,
    pub compute_power_w: f64,
}

impl ClientNode {
    pub fn check(&self, rats: &[RatProfile]) -> Result<(), (&'static str, String)> {
        for rat in rats {
            match self.mean_snr.get(&rat.rat_id) {
                None => return Err(("mean_snr", format!("missing entry for RAT {}", rat.rat_id))),
                Some(v) if !(*v > 0.0 && v.is_finite()) => {
                    return Err(("mean_snr", format!("entry for RAT {} must be positive", rat.rat_id)))
                }
                _ => {}
            }
        }
        if let Some(extra) = self.mean_snr.keys().find(|id| !rats.iter().any(|r| r.rat_id == **id)) {
            return Err(("mean_snr", format!("entry for unknown RAT {extra}")));
        }
        if self.dataset_size < 1 {
            return Err(("dataset_size", "must be at least 1".into()));
        }
        if !(self.compute_rate > 0.0 && self.compute_rate.is_finite()) {
            return Err(("compute_rate", "must be positive".into()));
        }
        if !(self.compute_power_w > 0.0 && self.compute_power_w.is_finite()) {
            return Err(("compute_power_w", "must be positive".into()));
        }
        Ok(())
    }
}

/// Disaggregated gNB unit a pathway traverses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    RadioUnit,
    DistributedUnit,
    CentralisedUnit,
}

impl UnitKind {
    pub fn label(self) -> &'static str {
        match self {
            UnitKind::RadioUnit => "O-RU",
            UnitKind::DistributedUnit => "O-DU",
            UnitKind::CentralisedUnit => "O-CU",
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for UnitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "O-RU" => Ok(UnitKind::RadioUnit),
            "O-DU" => Ok(UnitKind::DistributedUnit),
            "O-CU" => Ok(UnitKind::CentralisedUnit),
            other => Err(format!("unknown unit '{other}' (expected O-RU, O-DU or O-CU)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwayStage {
    pub unit: UnitKind,
    pub latency_s: f64,
}

/// Route a model upload takes from the radio unit to the aggregation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Pathway {
    pub pathway_id: PathwayId,
    pub stages: Vec<PathwayStage>,
    /// Aggregate backhaul capacity (bits/s).
    pub capacity_bps: f64,
}

impl Pathway {
    pub fn stage_latency_s(&self) -> f64 {
        self.stages.iter().map(|s| s.latency_s).sum()
    }

    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if self.stages.is_empty() {
            return Err(("stages", "must list at least one stage".into()));
        }
        if self.stages.iter().any(|s| !(s.latency_s >= 0.0 && s.latency_s.is_finite())) {
            return Err(("stages", "stage latencies must be nonnegative".into()));
        }
        if !(self.capacity_bps > 0.0 && self.capacity_bps.is_finite()) {
            return Err(("capacity_bps", "must be positive".into()));
        }
        Ok(())
    }
}

/// Instantaneous channel state of one upload.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub client_id: ClientId,
    pub rat_id: RatId,
    pub snr_linear: f64,
    pub tx_power_w: f64,
    pub prbs_allocated: u32,
}

/// Per-client, per-round KPIs observed by the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub round_index: u32,
    pub client_id: ClientId,
    pub latency_s: f64,
    pub energy_j: f64,
    pub rate_bps: f64,
    pub outage: bool,
    pub qos_met: bool,
}

impl KpiReport {
    /// Report for a client that did not take part in the round.
    pub fn idle(round_index: u32, client_id: ClientId) -> Self {
        KpiReport {
            round_index,
            client_id,
            latency_s: 0.0,
            energy_j: 0.0,
            rate_bps: 0.0,
            outage: false,
            qos_met: false,
        }
    }
}

fn nonneg(name: &str, v: f64) -> Result<(), NetError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(NetError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), NetError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(NetError::InvalidArgument(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// Shannon capacity `bandwidth * log2(1 + snr)` in bits/s.
pub fn shannon_rate(bandwidth_hz: f64, snr_linear: f64) -> Result<f64, NetError> {
    positive("bandwidth_hz", bandwidth_hz)?;
    nonneg("snr_linear", snr_linear)?;
    if snr_linear == 0.0 {
        return Ok(0.0);
    }
    Ok(bandwidth_hz * snr_linear.ln_1p() / std::f64::consts::LN_2)
}

/// Draws an instantaneous SNR under Rayleigh fading (exponential power).
pub fn sample_snr<R: Rng + ?Sized>(mean_snr: f64, rng: &mut R) -> f64 {
    debug_assert!(mean_snr > 0.0);
    let unit: f64 = Exp1.sample(rng);
    mean_snr * unit
}

/// `P[snr < threshold]` for exponential SNR with the given mean.
pub fn outage_probability(mean_snr: f64, threshold: f64) -> Result<f64, NetError> {
    positive("mean_snr", mean_snr)?;
    positive("threshold", threshold)?;
    Ok(-(-threshold / mean_snr).exp_m1())
}

pub fn transmission_time(payload_bits: f64, rate_bps: f64) -> Result<f64, NetError> {
    nonneg("payload_bits", payload_bits)?;
    if payload_bits == 0.0 {
        return Ok(0.0);
    }
    nonneg("rate_bps", rate_bps)?;
    if rate_bps == 0.0 {
        return Err(NetError::OutageNoRate);
    }
    Ok(payload_bits / rate_bps)
}

/// Energy of one client in one round (J).
pub fn round_energy(
    tx_power_w: f64,
    tx_time_s: f64,
    compute_power_w: f64,
    compute_time_s: f64,
    idle_power_w: f64,
    idle_time_s: f64,
) -> Result<f64, NetError> {
    nonneg("tx_power_w", tx_power_w)?;
    nonneg("tx_time_s", tx_time_s)?;
    nonneg("compute_power_w", compute_power_w)?;
    nonneg("compute_time_s", compute_time_s)?;
    nonneg("idle_power_w", idle_power_w)?;
    nonneg("idle_time_s", idle_time_s)?;
    Ok(tx_power_w * tx_time_s + compute_power_w * compute_time_s + idle_power_w * idle_time_s)
}

/// Stage latencies plus the transfer time at the capacity-clamped rate.
pub fn pathway_latency(pathway: &Pathway, payload_bits: f64, rate_bps: f64) -> Result<f64, NetError> {
    let effective = rate_bps.min(pathway.capacity_bps);
    Ok(pathway.stage_latency_s() + transmission_time(payload_bits, effective)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn three_stage(capacity_bps: f64) -> Pathway {
        Pathway {
            pathway_id: 0,
            stages: vec![
                PathwayStage { unit: UnitKind::RadioUnit, latency_s: 0.001 },
                PathwayStage { unit: UnitKind::DistributedUnit, latency_s: 0.002 },
                PathwayStage { unit: UnitKind::CentralisedUnit, latency_s: 0.001 },
            ],
            capacity_bps,
        }
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_rate(1.0e6, 1.0).unwrap(), 1.0e6);
        assert!((shannon_rate(20.0e6, 3.0).unwrap() - 40.0e6).abs() < 1e-6);
        assert_eq!(shannon_rate(5.0e6, 0.0).unwrap(), 0.0);
        assert!(shannon_rate(0.0, 1.0).is_err());
        assert!(shannon_rate(-1.0, 1.0).is_err());
    }

    #[test]
    fn sample_snr_mean_and_support() {
        let mut r = rng::seeded(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let s = sample_snr(2.0, &mut r);
            assert!(s >= 0.0);
            sum += s;
        }
        assert!((sum / n as f64 - 2.0).abs() < 0.01);
    }

    #[test]
    fn sample_snr_golden_value() {
        // Captured once from the seeded stream; guards against silent changes
        // in stream derivation or the sampler.
        let mut r = rng::seeded(42);
        let v = sample_snr(1.0, &mut r);
        let again = sample_snr(1.0, &mut rng::seeded(42));
        assert_eq!(v, again);
        assert_eq!(format!("{v:.12}"), GOLDEN_SNR_SEED_42);
    }

    const GOLDEN_SNR_SEED_42: &str = "0.875883378255";

    #[test]
    fn outage_examples() {
        let p = outage_probability(1.0, 1.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.6321).abs() < 1e-4);
        assert!(outage_probability(10.0, 1e-12).unwrap() < 1e-12);
        assert!(outage_probability(0.0, 1.0).is_err());
        assert!(outage_probability(1.0, -1.0).is_err());
    }

    #[test]
    fn transmission_time_examples() {
        assert_eq!(transmission_time(10.0e6, 5.0e6).unwrap(), 2.0);
        assert_eq!(transmission_time(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(transmission_time(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(transmission_time(1.0e6, 1.0e6).unwrap(), 1.0);
        assert_eq!(transmission_time(1.0, 0.0), Err(NetError::OutageNoRate));
    }

    #[test]
    fn round_energy_examples() {
        let e = round_energy(0.2, 2.0, 1.0, 3.0, 0.1, 1.0).unwrap();
        assert!((e - 3.5).abs() < 1e-12);
        assert_eq!(round_energy(0.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(round_energy(0.5, 4.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 2.0);
        assert!(round_energy(-0.1, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pathway_latency_examples() {
        let p = three_stage(1e9);
        assert!((pathway_latency(&p, 1e6, 1e6).unwrap() - 1.004).abs() < 1e-12);
        assert!((pathway_latency(&p, 0.0, 1e6).unwrap() - 0.004).abs() < 1e-12);
        let narrow = three_stage(1e6);
        assert!((pathway_latency(&narrow, 1e6, 2e6).unwrap() - 1.004).abs() < 1e-12);
        assert_eq!(pathway_latency(&p, 1e6, 0.0), Err(NetError::OutageNoRate));
    }

    #[test]
    fn unit_labels_round_trip() {
        for u in [UnitKind::RadioUnit, UnitKind::DistributedUnit, UnitKind::CentralisedUnit] {
            assert_eq!(u.label().parse::<UnitKind>().unwrap(), u);
        }
        assert!("O-XU".parse::<UnitKind>().is_err());
    }

    #[test]
    fn rat_profile_checks() {
        let mut rat = RatProfile {
            rat_id: 0,
            label: "a".into(),
            prb_count: 4,
            prb_bandwidth_hz: 1.0,
            base_latency_s: 0.0,
            power_levels_w: vec![0.5, 1.0],
            idle_power_w: 0.0,
            outage_snr_threshold: 1.0,
        };
        assert!(rat.check().is_ok());
        rat.power_levels_w = vec![0.5, 0.2];
        assert_eq!(rat.check().unwrap_err().0, "power_levels_w");
    }
}
