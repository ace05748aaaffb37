//! Multi-RAT O-RAN network simulator coupled with a federated-learning
//! orchestration engine.
//!
//! A non-real-time rApp learns, per client, which radio access technology and
//! transmit power to use; a near-real-time xApp splits resource blocks and
//! picks the transport pathway for each model upload. The FL loop trains a
//! small softmax classifier on every client and aggregates whatever arrives
//! before the round deadline.

pub mod net;
pub mod ric;
pub mod fl;
pub mod sim;
pub mod rng;
pub mod config;
pub mod output;
