//! Link-level simulator for laser-based indoor optical wireless networks using blind
//! interference alignment across user groups and rate splitting within each group.

pub mod error;
pub mod experiments;
pub mod baselines;
pub mod bia;
pub mod geometry;
pub mod grouping;
pub mod linalg;
pub mod network;
pub mod power_opt;
pub mod rates;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type ScenarioConfig64 = scenario::ScenarioConfig<f64>;
pub type Scenario64 = scenario::Scenario<f64>;
pub type ChannelTensor64 = scenario::ChannelTensor<f64>;
pub type Network64 = network::Network<f64>;
pub type NetworkState64 = rates::NetworkState<f64>;
pub type PowerAllocation64 = rates::PowerAllocation<f64>;
pub type RateReport64 = rates::RateReport<f64>;
pub type OptimizerConfig64 = power_opt::OptimizerConfig<f64>;
pub type Solution64 = power_opt::Solution<f64>;
