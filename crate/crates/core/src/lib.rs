//! Trust credits for volunteers as a cure for cold start in P2P file
//! sharing: closed-form calibration of the penalty and service threshold,
//! Monte-Carlo oracles for those formulas, and an agent-based simulator of
//! the resulting trust dynamics.

pub mod config;
pub mod game_model;
pub mod oracle;
pub mod plot;
pub mod rng;
pub mod sim_engine;
pub mod trust_ledger;

pub use game_model::{GameMatrix, GameParams, RequesterStrategy, ResponderStrategy};
pub use oracle::McResult;
pub use sim_engine::{Behavior, MetricsSeries, SimConfig, Simulation};
pub use trust_ledger::{PeerId, TrustLedger};
