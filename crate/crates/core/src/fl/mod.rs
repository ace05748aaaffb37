//! Federated learning engine: a small softmax classifier trained natively,
//! sample-weighted aggregation, and client-selection strategies.

mod aggregate;
pub mod data;
mod model;
mod selection;

pub use aggregate::fedavg_aggregate;
pub use data::{LocalDataset, PartitionKind};
pub use model::{evaluate, gradient, init_params, local_train, loss_and_gradient, ModelShape, TrainSettings};
pub use selection::{select_clients, ClientHistory, SelectionStrategy};

use thiserror::Error;

use crate::net::ClientId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("dataset error: {0}")]
    Dataset(String),
}

/// Flat model weight vector. A model upload carries 32 bits per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Vec<f64>,
}

impl ModelParams {
    pub fn new(weights: Vec<f64>) -> Self {
        ModelParams { weights }
    }

    pub fn zeros(dim: usize) -> Self {
        ModelParams { weights: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn payload_bits(&self) -> u64 {
        32 * self.weights.len() as u64
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }
}

/// What one client sends back after local training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: ClientId,
    pub params: ModelParams,
    pub sample_count: u32,
    pub local_loss: f64,
}
