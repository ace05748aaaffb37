use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::RicError;
use crate::net::{pathway_latency, ClientId, Pathway, PathwayId, RatProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocationKind {
    ProportionalFair,
    EqualShare,
    GreedyRate,
}

impl AllocationKind {
    pub fn name(self) -> &'static str {
        match self {
            AllocationKind::ProportionalFair => "proportional-fair",
            AllocationKind::EqualShare => "equal-share",
            AllocationKind::GreedyRate => "greedy-rate",
        }
    }
}

impl fmt::Display for AllocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AllocationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proportional-fair" => Ok(AllocationKind::ProportionalFair),
            "equal-share" => Ok(AllocationKind::EqualShare),
            "greedy-rate" => Ok(AllocationKind::GreedyRate),
            other => Err(format!(
                "unknown allocation policy '{other}' (expected proportional-fair, equal-share or greedy-rate)"
            )),
        }
    }
}

/// A predefined PRB allocation rule bound to one RAT's resource grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPolicy {
    pub kind: AllocationKind,
    pub prb_count: u32,
}

impl AllocationPolicy {
    pub fn for_rat(kind: AllocationKind, rat: &RatProfile) -> Self {
        AllocationPolicy { kind, prb_count: rat.prb_count }
    }
}

/// Splits the RAT's PRBs among `clients` given as `(client_id, spectral efficiency)`.
///
/// The result always sums to the policy's `prb_count`.
pub fn allocate_prbs(
    policy: &AllocationPolicy,
    clients: &[(ClientId, f64)],
) -> Result<BTreeMap<ClientId, u32>, RicError> {
    if clients.is_empty() {
        return Err(RicError::InvalidArgument("no clients to allocate".into()));
    }
    if let Some((id, se)) = clients.iter().find(|(_, se)| !(*se > 0.0 && se.is_finite())) {
        return Err(RicError::InvalidArgument(format!(
            "client {id} has nonpositive spectral efficiency {se}"
        )));
    }
    let mut sorted = clients.to_vec();
    sorted.sort_by_key(|(id, _)| *id);
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(RicError::InvalidArgument("duplicate client id".into()));
    }

    let capacity = policy.prb_count;
    let n = sorted.len();
    let mut alloc: BTreeMap<ClientId, u32> = sorted.iter().map(|(id, _)| (*id, 0)).collect();

    match policy.kind {
        AllocationKind::EqualShare => {
            let share = capacity / n as u32;
            let remainder = (capacity % n as u32) as usize;
            for (i, (id, _)) in sorted.iter().enumerate() {
                alloc.insert(*id, share + u32::from(i < remainder));
            }
        }
        AllocationKind::GreedyRate => {
            let mut best = sorted[0];
            for &c in &sorted[1..] {
                if c.1 > best.1 {
                    best = c;
                }
            }
            alloc.insert(best.0, capacity);
        }
        AllocationKind::ProportionalFair => {
            if n > capacity as usize {
                return Err(RicError::OverAdmission {
                    requested: n,
                    capacity,
                    admitted: sorted.iter().take(capacity as usize).map(|(id, _)| *id).collect(),
                });
            }
            // Sum of log(n_i * bw * se_i): each client's marginal gain from one
            // more block is ln(1 + 1/n_i), independent of bw and se_i.
            let mut counts = vec![1u32; n];
            for _ in n as u32..capacity {
                let mut best = 0;
                let mut best_gain = f64::NEG_INFINITY;
                for (i, &c) in counts.iter().enumerate() {
                    let gain = (1.0 / c as f64).ln_1p();
                    if gain > best_gain {
                        best = i;
                        best_gain = gain;
                    }
                }
                counts[best] += 1;
            }
            for ((id, _), c) in sorted.iter().zip(counts) {
                alloc.insert(*id, c);
            }
        }
    }
    Ok(alloc)
}

/// Pathway with the smallest total upload latency; ties go to the lowest id.
pub fn select_pathway(pathways: &[Pathway], payload_bits: f64, rate_bps: f64) -> Result<PathwayId, RicError> {
    let mut best: Option<(PathwayId, f64)> = None;
    for p in pathways {
        let latency = pathway_latency(p, payload_bits, rate_bps)
            .map_err(|e| RicError::InvalidArgument(e.to_string()))?;
        let better = match best {
            None => true,
            Some((id, l)) => latency < l || (latency == l && p.pathway_id < id),
        };
        if better {
            best = Some((p.pathway_id, latency));
        }
    }
    best.map(|(id, _)| id)
        .ok_or_else(|| RicError::InvalidConfiguration("no pathways configured".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{PathwayStage, UnitKind};

    fn pf(prb_count: u32) -> AllocationPolicy {
        AllocationPolicy { kind: AllocationKind::ProportionalFair, prb_count }
    }

    fn path(id: PathwayId, latencies: &[f64], capacity_bps: f64) -> Pathway {
        let units = [UnitKind::RadioUnit, UnitKind::DistributedUnit, UnitKind::CentralisedUnit];
        Pathway {
            pathway_id: id,
            stages: latencies
                .iter()
                .zip(units.iter().cycle())
                .map(|(l, u)| PathwayStage { unit: *u, latency_s: *l })
                .collect(),
            capacity_bps,
        }
    }

    #[test]
    fn pf_symmetric() {
        let a = allocate_prbs(&pf(6), &[(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(a, BTreeMap::from([(0, 3), (1, 3)]));
    }

    #[test]
    fn pf_over_admission() {
        let err = allocate_prbs(&pf(2), &[(5, 1.0), (1, 1.0), (3, 1.0)]).unwrap_err();
        assert_eq!(
            err,
            RicError::OverAdmission { requested: 3, capacity: 2, admitted: vec![1, 3] }
        );
    }

    #[test]
    fn greedy_rate_gives_everything_to_best() {
        let p = AllocationPolicy { kind: AllocationKind::GreedyRate, prb_count: 4 };
        assert_eq!(allocate_prbs(&p, &[(0, 2.0), (1, 5.0)]).unwrap(), BTreeMap::from([(0, 0), (1, 4)]));
        assert_eq!(allocate_prbs(&p, &[(3, 5.0), (1, 5.0)]).unwrap(), BTreeMap::from([(1, 4), (3, 0)]));
    }

    #[test]
    fn equal_share_remainder_to_lowest_ids() {
        let p = AllocationPolicy { kind: AllocationKind::EqualShare, prb_count: 7 };
        let a = allocate_prbs(&p, &[(9, 1.0), (2, 1.0), (4, 1.0)]).unwrap();
        assert_eq!(a, BTreeMap::from([(2, 3), (4, 2), (9, 2)]));
        let few = AllocationPolicy { kind: AllocationKind::EqualShare, prb_count: 1 };
        let a = allocate_prbs(&few, &[(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(a, BTreeMap::from([(0, 1), (1, 0)]));
    }

    #[test]
    fn allocation_rejects_bad_input() {
        assert!(allocate_prbs(&pf(4), &[]).is_err());
        assert!(allocate_prbs(&pf(4), &[(0, 0.0)]).is_err());
        assert!(allocate_prbs(&pf(4), &[(0, 1.0), (0, 2.0)]).is_err());
    }

    #[test]
    fn pathway_examples() {
        let single = [path(4, &[0.001, 0.002, 0.001], 1e9)];
        assert_eq!(select_pathway(&single, 1e6, 1e6).unwrap(), 4);

        let two = [path(0, &[0.001, 0.002, 0.001], 1e9), path(1, &[0.001, 0.0005, 0.0005], 1e9)];
        assert_eq!(select_pathway(&two, 1e6, 1e6).unwrap(), 1);

        assert!(select_pathway(&[], 1.0, 1.0).is_err());
    }

    #[test]
    fn pathway_capacity_versus_stage_latency() {
        // Short path with a thin backhaul versus long path with a fat one.
        let short_thin = path(0, &[0.001, 0.001, 0.001], 2e6);
        let long_fat = path(1, &[0.010, 0.020, 0.010], 1e9);
        let payload = 8e6;
        let rate = 5e7;
        let l_short = pathway_latency(&short_thin, payload, rate).unwrap();
        let l_long = pathway_latency(&long_fat, payload, rate).unwrap();
        // 0.003 + 8e6/2e6 = 4.003 versus 0.04 + 8e6/5e7 = 0.2
        assert!((l_short - 4.003).abs() < 1e-12 && (l_long - 0.2).abs() < 1e-12);
        let pick = select_pathway(&[short_thin.clone(), long_fat.clone()], payload, rate).unwrap();
        assert_eq!(pick, 1);
        // Tiny payload flips the choice.
        let pick = select_pathway(&[short_thin, long_fat], 1e3, rate).unwrap();
        assert_eq!(pick, 0);
    }

    #[test]
    fn pathway_ties_go_to_lowest_id() {
        let ps = [path(7, &[0.001], 1e9), path(2, &[0.001], 1e9)];
        assert_eq!(select_pathway(&ps, 1e3, 1e6).unwrap(), 2);
    }
}
