use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index;
use rand::Rng;

use super::FlError;
use crate::net::ClientId;

/// Which clients train in a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy {
    /// Every client the controller did not mark infeasible.
    Fedora,
    /// Uniform sample of `ceil(fraction * eligible)` clients.
    FedAvgRandom { fraction: f64 },
    /// Top-k by last local loss.
    Greedy { k: usize },
    /// Top-k by last loss improvement (FLAIR-inspired).
    LossRanked { k: usize },
}

impl SelectionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::Fedora => "fedora",
            SelectionStrategy::FedAvgRandom { .. } => "fedavg-random",
            SelectionStrategy::Greedy { .. } => "greedy",
            SelectionStrategy::LossRanked { .. } => "loss-ranked",
        }
    }

    pub const NAMES: [&'static str; 4] = ["fedavg-random", "fedora", "greedy", "loss-ranked"];

    /// Builds a strategy from its name and the shared fraction / k settings.
    pub fn from_name(name: &str, fraction: f64, k: usize) -> Result<Self, String> {
        match name {
            "fedora" => Ok(SelectionStrategy::Fedora),
            "fedavg-random" => Ok(SelectionStrategy::FedAvgRandom { fraction }),
            "greedy" => Ok(SelectionStrategy::Greedy { k }),
            "loss-ranked" => Ok(SelectionStrategy::LossRanked { k }),
            other => Err(format!(
                "unknown strategy '{other}' (expected one of {})",
                Self::NAMES.join(", ")
            )),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        match *self {
            SelectionStrategy::FedAvgRandom { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                Err(format!("fraction must lie in (0, 1], got {fraction}"))
            }
            SelectionStrategy::Greedy { k } | SelectionStrategy::LossRanked { k } if k == 0 => {
                Err("k must be at least 1".into())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-client local-loss history used by the ranking strategies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClientHistory {
    last_loss: BTreeMap<ClientId, f64>,
    loss_delta: BTreeMap<ClientId, f64>,
}

impl ClientHistory {
    pub fn record(&mut self, client: ClientId, loss: f64) {
        if let Some(prev) = self.last_loss.insert(client, loss) {
            self.loss_delta.insert(client, prev - loss);
        }
    }

    pub fn last_loss(&self, client: ClientId) -> Option<f64> {
        self.last_loss.get(&client).copied()
    }

    pub fn loss_delta(&self, client: ClientId) -> Option<f64> {
        self.loss_delta.get(&client).copied()
    }
}

/// Highest scores first; unknown scores (cold start) outrank everything;
/// ties go to the lowest id.
fn top_k(eligible: &BTreeSet<ClientId>, k: usize, score: impl Fn(ClientId) -> Option<f64>) -> BTreeSet<ClientId> {
    let mut ranked: Vec<(ClientId, f64)> = eligible
        .iter()
        .map(|&id| (id, score(id).unwrap_or(f64::INFINITY)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(id, _)| id).collect()
}

pub fn select_clients<R: Rng + ?Sized>(
    strategy: &SelectionStrategy,
    history: &ClientHistory,
    eligible: &BTreeSet<ClientId>,
    rng: &mut R,
) -> Result<BTreeSet<ClientId>, FlError> {
    strategy.check().map_err(FlError::InvalidArgument)?;
    if eligible.is_empty() {
        return Err(FlError::InvalidArgument("no eligible clients".into()));
    }
    Ok(match *strategy {
        SelectionStrategy::Fedora => eligible.clone(),
        SelectionStrategy::FedAvgRandom { fraction } => {
            let ids: Vec<ClientId> = eligible.iter().copied().collect();
            let m = ((fraction * ids.len() as f64).ceil() as usize).clamp(1, ids.len());
            index::sample(rng, ids.len(), m).into_iter().map(|i| ids[i]).collect()
        }
        SelectionStrategy::Greedy { k } => top_k(eligible, k, |id| history.last_loss(id)),
        SelectionStrategy::LossRanked { k } => top_k(eligible, k, |id| history.loss_delta(id)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn set(ids: &[u32]) -> BTreeSet<u32> {
        ids.iter().copied().collect()
    }

    #[test]
    fn fedora_takes_everyone() {
        let out = select_clients(&SelectionStrategy::Fedora, &ClientHistory::default(), &set(&[1, 2, 3]), &mut rng::seeded(0));
        assert_eq!(out.unwrap(), set(&[1, 2, 3]));
    }

    #[test]
    fn greedy_ties_break_low() {
        let mut h = ClientHistory::default();
        h.record(1, 0.2);
        h.record(2, 0.9);
        h.record(3, 0.9);
        let out = select_clients(&SelectionStrategy::Greedy { k: 1 }, &h, &set(&[1, 2, 3]), &mut rng::seeded(0));
        assert_eq!(out.unwrap(), set(&[2]));
    }

    #[test]
    fn cold_start_clients_come_first() {
        let mut h = ClientHistory::default();
        h.record(1, 5.0);
        let out = select_clients(&SelectionStrategy::Greedy { k: 1 }, &h, &set(&[1, 2]), &mut rng::seeded(0));
        assert_eq!(out.unwrap(), set(&[2]));
    }

    #[test]
    fn loss_ranked_uses_improvement() {
        let mut h = ClientHistory::default();
        for (id, a, b) in [(1, 1.0, 0.9), (2, 1.0, 0.2), (3, 2.0, 1.5)] {
            h.record(id, a);
            h.record(id, b);
        }
        assert!((h.loss_delta(2).unwrap() - 0.8).abs() < 1e-12);
        let out = select_clients(&SelectionStrategy::LossRanked { k: 2 }, &h, &set(&[1, 2, 3]), &mut rng::seeded(0));
        assert_eq!(out.unwrap(), set(&[2, 3]));
    }

    #[test]
    fn k_is_clamped() {
        let out = select_clients(&SelectionStrategy::Greedy { k: 10 }, &ClientHistory::default(), &set(&[4, 5]), &mut rng::seeded(0));
        assert_eq!(out.unwrap(), set(&[4, 5]));
    }

    #[test]
    fn random_fraction_frequency() {
        let eligible: BTreeSet<u32> = (0..10).collect();
        let mut r = rng::seeded(77);
        let mut hits = [0usize; 10];
        let trials = 10_000;
        for _ in 0..trials {
            let out = select_clients(
                &SelectionStrategy::FedAvgRandom { fraction: 0.5 },
                &ClientHistory::default(),
                &eligible,
                &mut r,
            )
            .unwrap();
            assert_eq!(out.len(), 5);
            for id in out {
                hits[id as usize] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / trials as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn invalid_parameters() {
        let e = set(&[1]);
        let h = ClientHistory::default();
        let mut r = rng::seeded(0);
        assert!(select_clients(&SelectionStrategy::FedAvgRandom { fraction: 0.0 }, &h, &e, &mut r).is_err());
        assert!(select_clients(&SelectionStrategy::Greedy { k: 0 }, &h, &e, &mut r).is_err());
        assert!(select_clients(&SelectionStrategy::Fedora, &h, &BTreeSet::new(), &mut r).is_err());
    }

    #[test]
    fn names_round_trip() {
        for n in SelectionStrategy::NAMES {
            assert_eq!(SelectionStrategy::from_name(n, 0.5, 2).unwrap().name(), n);
        }
        assert!(SelectionStrategy::from_name("flair", 0.5, 2).is_err());
    }
}
