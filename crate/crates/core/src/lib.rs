//! Difficulty adjustment, hashrate market model, block-reward controller and
//! targeted-reward ledger for a proof-of-work chain that steers its hashrate
//! into a target band.

pub mod chain;
pub mod controller;
pub mod cost;
pub mod ledger;
pub mod market;
pub mod scenario;
pub mod units;

pub use chain::{BlockRecord, ChainError, ChainParams, ChainState, EpochStats};
pub use controller::{ControllerError, ControllerMode, ControllerParams, ControllerState};
pub use cost::{CostCurve, CostError, Direction, IntervalResult};
pub use ledger::{BaselineLedger, LedgerError, LedgerState, Shares};
pub use market::{HashrateModel, MarketError, MarketState};
pub use units::{Address, Microticks, Satoshi};
pub use scenario::{run_simulation, Scenario, ScenarioError, TrajectoryFormat, TrajectoryRecord};
