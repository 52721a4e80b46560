//! Units shared by every module.
//!
//! Ledger arithmetic is done in whole Satoshi; market calculus works in BTC
//! as `f64`. Time is stored as integer microticks, where one microtick is
//! 10^-6 of a model time unit.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Integer Satoshi amount.
pub type Satoshi = u64;

/// Signed Satoshi amount (reward deltas).
pub type SignedSatoshi = i64;

/// Integer time in microticks.
pub type Microticks = u64;

pub const SATOSHI_PER_BTC: u64 = 100_000_000;

pub const MICROTICKS_PER_UNIT: u64 = 1_000_000;

pub fn sats_to_btc(sats: Satoshi) -> f64 {
    sats as f64 / SATOSHI_PER_BTC as f64
}

/// Converts BTC to Satoshi, rounding to the nearest whole Satoshi.
/// Negative and non-finite inputs map to zero.
pub fn btc_to_sats(btc: f64) -> Satoshi {
    if !btc.is_finite() || btc <= 0.0 {
        return 0;
    }
    (btc * SATOSHI_PER_BTC as f64).round() as Satoshi
}

pub fn ticks_to_units(ticks: Microticks) -> f64 {
    ticks as f64 / MICROTICKS_PER_UNIT as f64
}

/// Converts model time units to microticks, rounding to nearest.
pub fn units_to_ticks(units: f64) -> Microticks {
    if !units.is_finite() || units <= 0.0 {
        return 0;
    }
    let ticks = (units * MICROTICKS_PER_UNIT as f64).round();
    if ticks >= u64::MAX as f64 {
        u64::MAX
    } else {
        ticks as u64
    }
}

/// An account address in the ledger.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub String);

impl Address {
    pub fn new(name: impl Into<String>) -> Self {
        Address(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Address {
    fn from(s: &str) -> Self {
        Address(s.to_string())
    }
}
