//! Versioned scenario documents and the composed simulation.

mod calibration;
mod engine;
mod trajectory;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, ChainParams};
use crate::controller::{ControllerError, ControllerMode, ControllerParams, ControllerState};
use crate::ledger::LedgerError;
use crate::market::{HashrateModel, MarketError, MarketState};
use crate::units::{Address, Satoshi};

pub use calibration::{
    fit_regression, ingest_csv, ingest_reader, CalibrationDataset, CalibrationRow, FitError, IngestError,
    LoadReport, RegressionFit, RowError, CALIBRATION_COLUMNS,
};
pub use engine::{run_simulation, Simulation};
pub use trajectory::{
    export_trajectory, import_trajectory_json, render_trajectory, TrajectoryDocument, TrajectoryFormat,
    TrajectoryRecord, CSV_COLUMNS, TRAJECTORY_VERSION,
};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unsupported scenario version {0} (expected {SCENARIO_VERSION})")]
    Version(u32),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("chain: {0}")]
    Chain(#[from] ChainError),
    #[error("controller: {0}")]
    Controller(#[from] ControllerError),
    #[error("market: {0}")]
    Market(#[from] MarketError),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("neutrality violated at block {height}: targeted {targeted}, baseline {baseline}")]
    Neutrality {
        height: u64,
        targeted: i128,
        baseline: i128,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// One step of a piecewise-constant series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from_epoch: u64,
    pub value: f64,
}

/// Piecewise-constant per-epoch series; the first segment starts at epoch 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimePath(pub Vec<Segment>);

impl TimePath {
    pub fn constant(value: f64) -> Self {
        TimePath(vec![Segment { from_epoch: 0, value }])
    }

    /// Constant `before` until `epoch`, then `after`.
    pub fn step(before: f64, epoch: u64, after: f64) -> Self {
        TimePath(vec![
            Segment {
                from_epoch: 0,
                value: before,
            },
            Segment {
                from_epoch: epoch,
                value: after,
            },
        ])
    }

    pub fn validate(&self, field: &str) -> Result<(), ScenarioError> {
        let Some(first) = self.0.first() else {
            return Err(invalid(field, "series is empty"));
        };
        if first.from_epoch != 0 {
            return Err(invalid(field, "first segment must start at epoch 0"));
        }
        if self.0.windows(2).any(|w| w[1].from_epoch <= w[0].from_epoch) {
            return Err(invalid(field, "segment epochs must be strictly increasing"));
        }
        if self.0.iter().any(|s| !(s.value.is_finite() && s.value > 0.0)) {
            return Err(invalid(field, "values must be positive and finite"));
        }
        Ok(())
    }

    /// Value in effect at `epoch`.
    pub fn at(&self, epoch: u64) -> f64 {
        let i = self.0.partition_point(|s| s.from_epoch <= epoch);
        self.0[i.saturating_sub(1)].value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketPaths {
    pub model: HashrateModel,
    /// USD per BTC.
    pub exchange_rate: TimePath,
    pub unit_hash_cost: TimePath,
    pub asic_efficiency: TimePath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electricity_price: Option<TimePath>,
    #[serde(default)]
    pub competition_margin: f64,
    /// Demand elasticity for the optional electricity price feedback on the
    /// unit hash cost. Off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electricity_feedback_elasticity: Option<f64>,
}

impl MarketPaths {
    /// Market state at `epoch` before any feedback.
    pub fn state_at(&self, epoch: u64) -> MarketState {
        MarketState {
            exchange_rate: self.exchange_rate.at(epoch),
            unit_hash_cost: self.unit_hash_cost.at(epoch),
            competition_margin: self.competition_margin,
            asic_efficiency: self.asic_efficiency.at(epoch),
            electricity_price: self.electricity_price.as_ref().map_or(0.0, |p| p.at(epoch)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    /// Coinbase in Satoshi at epoch 0.
    pub coinbase: Satoshi,
    /// The coinbase halves every this many epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halving_interval_epochs: Option<u64>,
    #[serde(default)]
    pub tx_per_block: u32,
    /// Mean of the exponential fee distribution, in Satoshi.
    #[serde(default)]
    pub fee_mean: f64,
    /// Largest fraction of a sender's spendable amount moved in one transfer.
    #[serde(default = "default_max_spend_fraction")]
    pub max_spend_fraction: f64,
    pub miners: Vec<Address>,
}

fn default_max_spend_fraction() -> f64 {
    0.1
}

impl Workload {
    pub fn coinbase_at(&self, epoch: u64) -> Satoshi {
        match self.halving_interval_epochs {
            Some(h) => {
                let halvings = epoch / h;
                if halvings >= 64 {
                    0
                } else {
                    self.coinbase >> halvings
                }
            }
            None => self.coinbase,
        }
    }

    /// Expected total block reward at `epoch`.
    pub fn expected_total_reward(&self, epoch: u64) -> Satoshi {
        let fees = (self.tx_per_block as f64 * self.fee_mean).round() as Satoshi;
        self.coinbase_at(epoch) + fees
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLedger {
    #[serde(default)]
    pub balances: BTreeMap<Address, Satoshi>,
}

/// A complete, reproducible simulation input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub horizon_epochs: u64,
    pub seed: u64,
    pub chain: ChainParams,
    pub controller: ControllerParams,
    /// Controller state entering the first epoch.
    #[serde(default)]
    pub initial_controller: ControllerState,
    /// Difficulty of the first epoch; defaults to the difficulty at which the
    /// first epoch's model hashrate is on target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_difficulty: Option<f64>,
    pub market: MarketPaths,
    #[serde(default)]
    pub ledger: InitialLedger,
    pub workload: Workload,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| invalid("scenario", e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(self.version));
        }
        self.chain.validate()?;
        self.controller.validate()?;
        match self.initial_controller.mode {
            ControllerMode::Ceiling(0) | ControllerMode::Floor(0) => {
                return Err(invalid("initial_controller", "bound must be positive"));
            }
            _ => {}
        }
        if let Some(d) = self.initial_difficulty {
            if !(d.is_finite() && d > 0.0) {
                return Err(invalid("initial_difficulty", "must be positive and finite"));
            }
        }

        let m = &self.market;
        m.model.validate()?;
        m.exchange_rate.validate("market.exchange_rate")?;
        m.unit_hash_cost.validate("market.unit_hash_cost")?;
        m.asic_efficiency.validate("market.asic_efficiency")?;
        if let Some(p) = &m.electricity_price {
            p.validate("market.electricity_price")?;
        }
        if !(m.competition_margin.is_finite() && m.competition_margin >= 0.0) {
            return Err(invalid("market.competition_margin", "must be >= 0"));
        }
        if let Some(e) = m.electricity_feedback_elasticity {
            if !(e.is_finite() && e != 0.0) {
                return Err(invalid("market.electricity_feedback_elasticity", "must be finite and non-zero"));
            }
        }

        let w = &self.workload;
        if w.miners.is_empty() {
            return Err(invalid("workload.miners", "at least one miner is required"));
        }
        if w.miners.iter().collect::<BTreeSet<_>>().len() != w.miners.len() {
            return Err(invalid("workload.miners", "miner addresses must be distinct"));
        }
        if w.coinbase == 0 {
            return Err(invalid("workload.coinbase", "must be positive"));
        }
        if w.halving_interval_epochs == Some(0) {
            return Err(invalid("workload.halving_interval_epochs", "must be positive"));
        }
        if !(w.fee_mean.is_finite() && w.fee_mean >= 0.0) {
            return Err(invalid("workload.fee_mean", "must be >= 0"));
        }
        if !(w.max_spend_fraction > 0.0 && w.max_spend_fraction <= 1.0) {
            return Err(invalid("workload.max_spend_fraction", "must lie in (0, 1]"));
        }
        let initial_supply: u128 = self.ledger.balances.values().map(|&v| v as u128).sum();
        if initial_supply > i64::MAX as u128 / 2 {
            return Err(invalid("ledger.balances", "initial supply is too large"));
        }
        Ok(())
    }
}
