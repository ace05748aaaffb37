use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;

use super::RicError;

/// Tabular Q-learning hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QLearningParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
}

impl Default for QLearningParams {
    fn default() -> Self {
        QLearningParams {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.3,
            epsilon_decay: 0.95,
            epsilon_min: 0.01,
        }
    }
}

impl QLearningParams {
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(("alpha", "must lie in (0, 1]".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(("gamma", "must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(("epsilon", "must lie in [0, 1]".into()));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(("epsilon_decay", "must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return Err(("epsilon_min", "must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Sparse Q-table over states `S` and actions `A`. Unvisited entries read as 0.
///
/// Actions are always supplied by the caller as a slice in ascending order, so
/// greedy ties resolve to the smallest action.
#[derive(Debug, Clone)]
pub struct QTable<S, A> {
    values: HashMap<(S, A), f64>,
    pub params: QLearningParams,
    epsilon: f64,
}

impl<S, A> QTable<S, A>
where
    S: Clone + Eq + Hash,
    A: Copy + Eq + Hash,
{
    pub fn new(params: QLearningParams) -> Self {
        let epsilon = params.epsilon.max(params.epsilon_min).min(1.0);
        QTable { values: HashMap::new(), params, epsilon }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(self.params.epsilon_min, 1.0);
    }

    /// Multiplicative decay, floored at `epsilon_min`.
    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.params.epsilon_decay).clamp(self.params.epsilon_min, 1.0);
    }

    pub fn get(&self, state: &S, action: A) -> f64 {
        self.values.get(&(state.clone(), action)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, state: &S, action: A, value: f64) {
        self.values.insert((state.clone(), action), value);
    }

    pub fn max_value(&self, state: &S, actions: &[A]) -> f64 {
        actions
            .iter()
            .map(|&a| self.get(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action; the first (smallest) wins ties.
    pub fn greedy(&self, state: &S, actions: &[A]) -> Result<A, RicError> {
        let mut best: Option<(A, f64)> = None;
        for &a in actions {
            let v = self.get(state, a);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
            .ok_or_else(|| RicError::InvalidConfiguration("empty action set".into()))
    }

    /// Epsilon-greedy selection.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &S, actions: &[A], rng: &mut R) -> Result<A, RicError> {
        if actions.is_empty() {
            return Err(RicError::InvalidConfiguration("empty action set".into()));
        }
        if self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon {
            return Ok(actions[rng.random_range(0..actions.len())]);
        }
        self.greedy(state, actions)
    }

    /// One-step Q-learning update; returns the new `Q(state, action)`.
    pub fn update(&mut self, state: &S, action: A, reward: f64, next_state: &S, actions: &[A]) -> f64 {
        let bootstrap = if actions.is_empty() { 0.0 } else { self.max_value(next_state, actions) };
        self.update_towards(state, action, reward + self.params.gamma * bootstrap)
    }

    /// Update for a transition into a terminal state (no bootstrap term).
    pub fn update_terminal(&mut self, state: &S, action: A, reward: f64) -> f64 {
        self.update_towards(state, action, reward)
    }

    fn update_towards(&mut self, state: &S, action: A, target: f64) -> f64 {
        let old = self.get(state, action);
        let new = old + self.params.alpha * (target - old);
        self.set(state, action, new);
        new
    }
}
