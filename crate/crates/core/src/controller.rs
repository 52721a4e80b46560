//! Block-reward ceiling/floor controller.
//!
//! At each epoch boundary the controller compares the epoch's `D/T` against
//! the target band `[dt_lower, dt_upper]`:
//!
//! * above the band a ceiling is imposed at `tau * median` (or tightened to
//!   `tau * ceiling` if one is already active);
//! * below the band a floor is imposed at `(2 - tau) * median` (or raised to
//!   `(2 - tau) * floor`);
//! * inside the band an active ceiling is relaxed by `(2 - gamma)` and an
//!   active floor by `gamma`, each removed once it stops binding against the
//!   epoch median.
//!
//! The bound applies to every block of the following epoch. Fees and coinbase
//! are then scaled by a common factor so fee ordering is unchanged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::EpochStats;
use crate::units::Satoshi;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller parameters: {0}")]
    InvalidParams(String),
    #[error("epoch statistic and median reward must be positive")]
    DegenerateEpoch,
    #[error("cannot scale a zero total reward to a positive miner reward")]
    UndefinedScaling,
    #[error("nash bound needs target hashrate >= 1 and deviation >= 0")]
    NashDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    pub tau: f64,
    pub gamma: f64,
    /// `D/T` at the upper end of the target hashrate interval.
    pub dt_upper: f64,
    /// `D/T` at the lower end of the target hashrate interval.
    pub dt_lower: f64,
    #[serde(default)]
    pub nash_guard_enabled: bool,
    /// Target hashrate used by the guard; required when the guard is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash_target_hashrate: Option<f64>,
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::InvalidParams(m.to_string()));
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.dt_lower.is_finite() && self.dt_upper.is_finite()) {
            return bad("dt bounds must be finite");
        }
        if !(self.dt_lower > 0.0 && self.dt_upper > 0.0) {
            return bad("dt bounds must be positive");
        }
        if self.dt_lower >= self.dt_upper {
            return bad("dt_lower must be below dt_upper");
        }
        if self.nash_guard_enabled {
            match self.nash_target_hashrate {
                Some(n) if n.is_finite() && n >= 1.0 => {}
                _ => return bad("nash guard needs nash_target_hashrate >= 1"),
            }
        }
        Ok(())
    }

    /// Per-epoch multipliers `(down, up)` after the optional guard.
    fn multipliers(&self, down: f64, up: f64) -> (f64, f64) {
        match (self.nash_guard_enabled, self.nash_target_hashrate) {
            (true, Some(target)) => {
                let lower = (1.0 + 1.0 / target) / 2.0;
                (down.max(lower), up.min(2.0 - lower))
            }
            _ => (down, up),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ControllerMode {
    Unconstrained,
    Ceiling(Satoshi),
    Floor(Satoshi),
}

impl ControllerMode {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerMode::Unconstrained => "unconstrained",
            ControllerMode::Ceiling(_) => "ceiling",
            ControllerMode::Floor(_) => "floor",
        }
    }

    pub fn bound(&self) -> Option<Satoshi> {
        match *self {
            ControllerMode::Unconstrained => None,
            ControllerMode::Ceiling(v) | ControllerMode::Floor(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerState {
    pub mode: ControllerMode,
    pub epoch_of_last_change: u64,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            mode: ControllerMode::Unconstrained,
            epoch_of_last_change: 0,
        }
    }
}

fn scale(value: Satoshi, factor: f64) -> Satoshi {
    ((value as f64 * factor).round() as Satoshi).max(1)
}

/// One controller transition at the end of `epoch`.
pub fn controller_step(
    state: &ControllerState,
    params: &ControllerParams,
    epoch: &EpochStats,
) -> Result<ControllerState, ControllerError> {
    let dt = epoch.sufficient_statistic;
    let median = epoch.median_total_reward;
    if !(dt > 0.0 && dt.is_finite()) || median == 0 {
        return Err(ControllerError::DegenerateEpoch);
    }
    let (tighten, loosen) = params.multipliers(params.tau, 2.0 - params.tau);
    let (relax_floor, relax_ceiling) = params.multipliers(params.gamma, 2.0 - params.gamma);

    let mode = if dt > params.dt_upper {
        match state.mode {
            ControllerMode::Ceiling(v) => ControllerMode::Ceiling(scale(v, tighten)),
            _ => ControllerMode::Ceiling(scale(median, tighten)),
        }
    } else if dt < params.dt_lower {
        match state.mode {
            ControllerMode::Floor(v) => ControllerMode::Floor(scale(v, loosen)),
            _ => ControllerMode::Floor(scale(median, loosen)),
        }
    } else {
        match state.mode {
            ControllerMode::Unconstrained => ControllerMode::Unconstrained,
            ControllerMode::Ceiling(v) => {
                let relaxed = scale(v, relax_ceiling);
                if relaxed >= median {
                    ControllerMode::Unconstrained
                } else {
                    ControllerMode::Ceiling(relaxed)
                }
            }
            ControllerMode::Floor(v) => {
                let relaxed = scale(v, relax_floor);
                if relaxed <= median {
                    ControllerMode::Unconstrained
                } else {
                    ControllerMode::Floor(relaxed)
                }
            }
        }
    };

    let epoch_of_last_change = if mode != state.mode {
        epoch.index
    } else {
        state.epoch_of_last_change
    };
    Ok(ControllerState {
        mode,
        epoch_of_last_change,
    })
}

/// Miner's block reward under the active bound.
pub fn apply_cap(state: &ControllerState, total_reward: Satoshi) -> Satoshi {
    match state.mode {
        ControllerMode::Unconstrained => total_reward,
        ControllerMode::Ceiling(v) => total_reward.min(v),
        ControllerMode::Floor(v) => total_reward.max(v),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardAdjustment {
    /// `(miner_reward - total_reward) / total_reward`.
    pub xi: f64,
    pub miner_reward: Satoshi,
    pub total_reward: Satoshi,
    pub scaled_fees: Vec<Satoshi>,
    pub scaled_coinbase: Satoshi,
}

/// Scales the coinbase and every fee by `miner_reward / total_reward`.
///
/// Each part is rounded down to whole Satoshi and the shortfall is added to
/// the coinbase, so the parts sum to `miner_reward` exactly.
pub fn scale_fees(
    coinbase: Satoshi,
    fees: &[Satoshi],
    miner_reward: Satoshi,
) -> Result<RewardAdjustment, ControllerError> {
    let total: Satoshi = coinbase + fees.iter().sum::<Satoshi>();
    if total == 0 {
        if miner_reward > 0 {
            return Err(ControllerError::UndefinedScaling);
        }
        return Ok(RewardAdjustment {
            xi: 0.0,
            miner_reward,
            total_reward: 0,
            scaled_fees: fees.to_vec(),
            scaled_coinbase: coinbase,
        });
    }
    let part = |v: Satoshi| (v as u128 * miner_reward as u128 / total as u128) as Satoshi;
    let scaled_fees: Vec<Satoshi> = fees.iter().map(|&f| part(f)).collect();
    let assigned: Satoshi = part(coinbase) + scaled_fees.iter().sum::<Satoshi>();
    Ok(RewardAdjustment {
        xi: (miner_reward as f64 - total as f64) / total as f64,
        miner_reward,
        total_reward: total,
        scaled_fees,
        scaled_coinbase: part(coinbase) + (miner_reward - assigned),
    })
}

/// Range of reward multipliers that keeps a hashrate deviation of
/// `deviation` unprofitable at target hashrate `target_hashrate`:
/// `((1 + deviation / N_T) / (1 + deviation), 1)`.
pub fn nash_adjustment_bound(target_hashrate: f64, deviation: f64) -> Result<(f64, f64), ControllerError> {
    if !(target_hashrate >= 1.0 && deviation >= 0.0) || !target_hashrate.is_finite() || !deviation.is_finite() {
        return Err(ControllerError::NashDomain);
    }
    Ok(((1.0 + deviation / target_hashrate) / (1.0 + deviation), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BTC: Satoshi = 100_000_000;

    fn params() -> ControllerParams {
        ControllerParams {
            tau: 0.9,
            gamma: 0.9,
            dt_upper: 10.0,
            dt_lower: 5.0,
            nash_guard_enabled: false,
            nash_target_hashrate: None,
        }
    }

    fn epoch(dt: f64, median: Satoshi) -> EpochStats {
        EpochStats {
            index: 3,
            difficulty_in_effect: dt,
            elapsed_time: 1_000_000,
            median_total_reward: median,
            median_miner_reward: median,
            sufficient_statistic: dt,
        }
    }

    fn state(mode: ControllerMode) -> ControllerState {
        ControllerState {
            mode,
            epoch_of_last_change: 0,
        }
    }

    #[test]
    fn ceiling_imposed_then_tightened() {
        let s = controller_step(&state(ControllerMode::Unconstrained), &params(), &epoch(12.0, 10 * BTC)).unwrap();
        assert_eq!(s.mode, ControllerMode::Ceiling(900_000_000));
        assert_eq!(s.epoch_of_last_change, 3);
        let s = controller_step(&s, &params(), &epoch(12.0, 10 * BTC)).unwrap();
        assert_eq!(s.mode, ControllerMode::Ceiling(810_000_000));
    }

    #[test]
    fn inside_band_is_noop_when_unconstrained() {
        let s = controller_step(&state(ControllerMode::Unconstrained), &params(), &epoch(7.0, BTC)).unwrap();
        assert_eq!(s, state(ControllerMode::Unconstrained));
    }

    #[test]
    fn ceiling_relaxes_then_lifts() {
        let mut s = state(ControllerMode::Ceiling(810_000_000));
        let mut seen = vec![];
        while let ControllerMode::Ceiling(v) = s.mode {
            seen.push(v);
            s = controller_step(&s, &params(), &epoch(7.0, 10 * BTC)).unwrap();
        }
        assert_eq!(seen, vec![810_000_000, 891_000_000, 980_100_000]);
        assert_eq!(s.mode, ControllerMode::Unconstrained);
    }

    #[test]
    fn floor_imposed_raised_and_relaxed() {
        let s = controller_step(&state(ControllerMode::Ceiling(5)), &params(), &epoch(1.0, 10 * BTC)).unwrap();
        assert_eq!(s.mode, ControllerMode::Floor(1_100_000_000));
        let s = controller_step(&s, &params(), &epoch(1.0, 10 * BTC)).unwrap();
        assert_eq!(s.mode, ControllerMode::Floor(1_210_000_000));
        let s = controller_step(&s, &params(), &epoch(7.0, 10 * BTC)).unwrap();
        assert_eq!(s.mode, ControllerMode::Floor(1_089_000_000));
        let s = controller_step(&s, &params(), &epoch(7.0, 10 * BTC)).unwrap();
        assert_eq!(s.mode, ControllerMode::Unconstrained);
    }

    #[test]
    fn guard_limits_tightening() {
        let mut p = params();
        p.tau = 0.3;
        p.nash_guard_enabled = true;
        p.nash_target_hashrate = Some(4.0);
        assert!(p.validate().is_ok());
        let s = controller_step(&state(ControllerMode::Unconstrained), &p, &epoch(12.0, 1000)).unwrap();
        assert_eq!(s.mode, ControllerMode::Ceiling(625));
        let s = controller_step(&state(ControllerMode::Unconstrained), &p, &epoch(1.0, 1000)).unwrap();
        assert_eq!(s.mode, ControllerMode::Floor(1375));
        p.nash_target_hashrate = None;
        assert!(p.validate().is_err());
    }

    #[test]
    fn degenerate_epoch_rejected() {
        let s = state(ControllerMode::Unconstrained);
        assert_eq!(
            controller_step(&s, &params(), &epoch(7.0, 0)),
            Err(ControllerError::DegenerateEpoch)
        );
    }

    #[test]
    fn params_validation() {
        assert!(params().validate().is_ok());
        let mut p = params();
        p.dt_lower = 11.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.tau = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn cap_examples() {
        assert_eq!(apply_cap(&state(ControllerMode::Unconstrained), 10), 10);
        assert_eq!(apply_cap(&state(ControllerMode::Ceiling(9)), 10), 9);
        assert_eq!(apply_cap(&state(ControllerMode::Floor(11)), 10), 11);
    }

    #[test]
    fn scale_fee_examples() {
        let fees = [5 * BTC, 3 * BTC, 2 * BTC];
        let down = scale_fees(10 * BTC, &fees, 15 * BTC).unwrap();
        assert_eq!(down.xi, -0.25);
        assert_eq!(down.scaled_fees, vec![375_000_000, 225_000_000, 150_000_000]);
        assert_eq!(down.scaled_coinbase, 750_000_000);

        let same = scale_fees(10 * BTC, &fees, 20 * BTC).unwrap();
        assert_eq!(same.xi, 0.0);
        assert_eq!(same.scaled_fees, fees.to_vec());
        assert_eq!(same.scaled_coinbase, 10 * BTC);

        let up = scale_fees(10 * BTC, &fees, 25 * BTC).unwrap();
        assert_eq!(up.xi, 0.25);
        assert_eq!(up.scaled_fees, vec![625_000_000, 375_000_000, 250_000_000]);
        assert_eq!(up.scaled_coinbase, 1_250_000_000);
    }

    #[test]
    fn scale_fee_shortfall_goes_to_coinbase() {
        let adj = scale_fees(1, &[1, 1, 1], 3).unwrap();
        assert_eq!(adj.scaled_fees, vec![0, 0, 0]);
        assert_eq!(adj.scaled_coinbase, 3);
        assert_eq!(scale_fees(0, &[], 5), Err(ControllerError::UndefinedScaling));
        assert_eq!(scale_fees(0, &[], 0).unwrap().xi, 0.0);
    }

    #[test]
    fn nash_bound_examples() {
        assert_eq!(nash_adjustment_bound(10.0, 1.0).unwrap(), (0.55, 1.0));
        assert_eq!(nash_adjustment_bound(1.0, 1.0).unwrap(), (1.0, 1.0));
        assert_eq!(nash_adjustment_bound(4.0, 1.0).unwrap(), (0.625, 1.0));
        assert_eq!(nash_adjustment_bound(0.5, 1.0), Err(ControllerError::NashDomain));
    }

    #[test]
    fn mode_serializes_with_tag() {
        let json = serde_json::to_string(&ControllerMode::Ceiling(42)).unwrap();
        assert_eq!(json, r#"{"mode":"ceiling","value":42}"#);
        let json = serde_json::to_string(&ControllerMode::Unconstrained).unwrap();
        assert_eq!(json, r#"{"mode":"unconstrained"}"#);
    }
}
