use rayon::prelude::*;

use super::{Engine, RoundTrace, SimConfig, SimError};

/// All rounds of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub traces: Vec<RoundTrace>,
}

impl SeedRun {
    pub fn final_accuracy(&self) -> f64 {
        self.traces.last().map_or(0.0, |t| t.accuracy)
    }

    pub fn final_loss(&self) -> f64 {
        self.traces.last().map_or(0.0, |t| t.loss)
    }
}

/// Table-style roll-up of one strategy across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub strategy: String,
    /// `(seed, final accuracy, final loss)` in ascending seed order.
    pub per_seed: Vec<(u64, f64, f64)>,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n - 1 denominator) of the final accuracies.
    pub accuracy_std: f64,
    pub mean_loss: f64,
    /// Delivered updates over (rounds x clients), pooled across seeds.
    pub qos_satisfaction_rate: f64,
    /// Mean per-client power: total energy over (total wall-clock x clients).
    pub avg_power_w: f64,
    pub total_energy_j: f64,
    pub total_wallclock_s: f64,
}

impl ExperimentReport {
    /// Assembles the report from per-seed finals and pooled totals.
    pub fn from_totals(
        strategy: &str,
        per_seed: Vec<(u64, f64, f64)>,
        delivered: u64,
        client_rounds: u64,
        total_energy_j: f64,
        total_wallclock_s: f64,
        n_clients: usize,
    ) -> Self {
        let accuracies: Vec<f64> = per_seed.iter().map(|s| s.1).collect();
        let (mean_accuracy, accuracy_std) = mean_and_sample_std(&accuracies);
        let mean_loss = if per_seed.is_empty() {
            0.0
        } else {
            per_seed.iter().map(|s| s.2).sum::<f64>() / per_seed.len() as f64
        };
        let qos_satisfaction_rate = if client_rounds == 0 { 0.0 } else { delivered as f64 / client_rounds as f64 };
        let client_seconds = total_wallclock_s * n_clients as f64;
        let avg_power_w = if client_seconds > 0.0 { total_energy_j / client_seconds } else { 0.0 };
        ExperimentReport {
            strategy: strategy.to_string(),
            per_seed,
            mean_accuracy,
            accuracy_std,
            mean_loss,
            qos_satisfaction_rate,
            avg_power_w,
            total_energy_j,
            total_wallclock_s,
        }
    }
}

/// Welford's running mean and the sample standard deviation (0 for n < 2).
fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let std = if xs.len() < 2 { 0.0 } else { (m2 / (xs.len() - 1) as f64).max(0.0).sqrt() };
    (mean, std)
}

/// Rolls seed runs up into an [`ExperimentReport`].
pub fn summarize_runs(strategy: &str, n_clients: usize, runs: &[SeedRun]) -> ExperimentReport {
    let mut per_seed: Vec<(u64, f64, f64)> =
        runs.iter().map(|r| (r.seed, r.final_accuracy(), r.final_loss())).collect();
    per_seed.sort_by_key(|s| s.0);
    let mut delivered = 0u64;
    let mut client_rounds = 0u64;
    let mut energy = 0.0;
    let mut wallclock = 0.0;
    let mut ordered: Vec<&SeedRun> = runs.iter().collect();
    ordered.sort_by_key(|r| r.seed);
    for run in ordered {
        for t in &run.traces {
            delivered += t.records.iter().filter(|r| r.included).count() as u64;
            client_rounds += t.records.len() as u64;
            energy += t.energy_j;
            wallclock += t.wallclock_s;
        }
    }
    ExperimentReport::from_totals(strategy, per_seed, delivered, client_rounds, energy, wallclock, n_clients)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub report: ExperimentReport,
    /// Ascending seed order.
    pub runs: Vec<SeedRun>,
}

/// Runs every seed (in parallel) from scratch and rolls up the results.
pub fn run_experiment(config: &SimConfig) -> Result<Experiment, SimError> {
    config.validate()?;
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let mut engine = Engine::new(config, seed)?;
            let traces = (0..config.rounds).map(|_| engine.run_round()).collect::<Result<Vec<_>, _>>()?;
            Ok(SeedRun { seed, traces })
        })
        .collect::<Result<_, SimError>>()?;
    let report = summarize_runs(&config.fl.strategy, config.clients.len(), &runs);
    Ok(Experiment { report, runs })
}
