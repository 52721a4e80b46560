//! Mining-market equilibrium and the marginal effects that drive the
//! controller.
//!
//! Rewards are in BTC, the exchange rate `e` in USD/BTC and costs in USD per
//! unit of hashrate per target interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("invalid market state: {0}")]
    InvalidState(String),
    #[error("degenerate market: unit cost plus competition margin is zero")]
    DegenerateMarket,
    #[error("growth factor 1 + delta_T must be positive (delta_T = {0})")]
    GrowthDomain(f64),
    #[error("hashrate must be positive (got {0})")]
    NonPositiveHashrate(f64),
    #[error("difficulty must be positive (got {0})")]
    NonPositiveDifficulty(f64),
    #[error("closed-form model passed where a log-regression model is required")]
    WrongModel,
    #[error("regression coefficients must be finite")]
    NonFiniteCoefficients,
    #[error("hashrate response is singular: marginal profit in hashrate is zero")]
    SingularResponse,
}

/// Exogenous market conditions faced by miners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    /// USD per BTC.
    pub exchange_rate: f64,
    /// USD per unit of hashrate per target interval.
    pub unit_hash_cost: f64,
    /// Competitive rate of profit; zero under free entry.
    #[serde(default)]
    pub competition_margin: f64,
    /// Hashes per kWh.
    pub asic_efficiency: f64,
    /// USD per kWh.
    #[serde(default)]
    pub electricity_price: f64,
}

impl MarketState {
    pub fn validate(&self) -> Result<(), MarketError> {
        let finite = [
            self.exchange_rate,
            self.unit_hash_cost,
            self.competition_margin,
            self.asic_efficiency,
            self.electricity_price,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(MarketError::InvalidState("values must be finite".into()));
        }
        if self.exchange_rate <= 0.0 {
            return Err(MarketError::InvalidState("exchange_rate must be > 0".into()));
        }
        if self.unit_hash_cost < 0.0 || self.competition_margin < 0.0 || self.electricity_price < 0.0 {
            return Err(MarketError::InvalidState(
                "costs and competition margin must be >= 0".into(),
            ));
        }
        if self.unit_hash_cost + self.competition_margin <= 0.0 {
            return Err(MarketError::DegenerateMarket);
        }
        if self.asic_efficiency <= 0.0 {
            return Err(MarketError::InvalidState("asic_efficiency must be > 0".into()));
        }
        Ok(())
    }
}

/// How hashrate responds to rewards and costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HashrateModel {
    /// Free-entry equilibrium `N = e P (1 + delta_T) / (c + phi)`.
    ClosedForm,
    /// `ln N = a1 + a2 ln(1 + eP) + a3 ln(1 + efficiency) + a4 ln(1 + c)`.
    LogRegression { alpha: [f64; 4] },
}

impl HashrateModel {
    pub fn validate(&self) -> Result<(), MarketError> {
        match self {
            HashrateModel::ClosedForm => Ok(()),
            HashrateModel::LogRegression { alpha } if alpha.iter().all(|a| a.is_finite()) => Ok(()),
            HashrateModel::LogRegression { .. } => Err(MarketError::NonFiniteCoefficients),
        }
    }

    /// Hashrate predicted by either variant.
    pub fn hashrate(&self, market: &MarketState, miner_reward_btc: f64, delta_t: f64) -> Result<f64, MarketError> {
        match self {
            HashrateModel::ClosedForm => equilibrium_hashrate(market, miner_reward_btc, delta_t),
            HashrateModel::LogRegression { .. } => regression_hashrate(self, market, miner_reward_btc),
        }
    }
}

pub fn equilibrium_hashrate(market: &MarketState, miner_reward_btc: f64, delta_t: f64) -> Result<f64, MarketError> {
    if 1.0 + delta_t <= 0.0 {
        return Err(MarketError::GrowthDomain(delta_t));
    }
    let denom = market.unit_hash_cost + market.competition_margin;
    if denom <= 0.0 {
        return Err(MarketError::DegenerateMarket);
    }
    Ok((market.exchange_rate * miner_reward_btc * (1.0 + delta_t) / denom).max(0.0))
}

/// Evaluates the log-linear regression model. The cost regressor is the
/// unit hash cost `c`.
pub fn regression_hashrate(model: &HashrateModel, market: &MarketState, miner_reward_btc: f64) -> Result<f64, MarketError> {
    let HashrateModel::LogRegression { alpha } = model else {
        return Err(MarketError::WrongModel);
    };
    model.validate()?;
    let x = regressors(
        market.exchange_rate * miner_reward_btc,
        market.asic_efficiency,
        market.unit_hash_cost,
    );
    Ok(alpha.iter().zip(x).map(|(a, v)| a * v).sum::<f64>().exp())
}

/// Design row `[1, ln(1+eP), ln(1+efficiency), ln(1+c)]`.
pub fn regressors(revenue_usd: f64, efficiency: f64, cost: f64) -> [f64; 4] {
    [1.0, revenue_usd.ln_1p(), efficiency.ln_1p(), cost.ln_1p()]
}

/// Profit per unit of hashrate: `e P (1 + delta_T) / N - c`.
pub fn miner_profit(market: &MarketState, miner_reward_btc: f64, hashrate: f64, delta_t: f64) -> Result<f64, MarketError> {
    if hashrate <= 0.0 {
        return Err(MarketError::NonPositiveHashrate(hashrate));
    }
    Ok(market.exchange_rate * miner_reward_btc * (1.0 + delta_t) / hashrate - market.unit_hash_cost)
}

/// Lottery effect `1 / (N + dN)`.
fn lottery_effect(hashrate: f64, delta_n: f64) -> f64 {
    1.0 / (hashrate + delta_n)
}

/// Growth-rate effect `1 + D (1/N - 1/(N + dN))`.
fn growth_rate_effect(hashrate: f64, delta_n: f64, difficulty: f64) -> f64 {
    1.0 + difficulty * (1.0 / hashrate - 1.0 / (hashrate + delta_n))
}

fn check_perturbed(hashrate: f64, delta_n: f64) -> Result<(), MarketError> {
    if hashrate <= 0.0 {
        return Err(MarketError::NonPositiveHashrate(hashrate));
    }
    if hashrate + delta_n <= 0.0 {
        return Err(MarketError::NonPositiveHashrate(hashrate + delta_n));
    }
    Ok(())
}

/// Profit over one target interval after a reward change `delta_p` and a
/// hashrate change `delta_n`, with difficulty `D` expressed so that the
/// on-target ratio `D/N` is one.
pub fn dynamic_profit(
    market: &MarketState,
    miner_reward_btc: f64,
    delta_p: f64,
    hashrate: f64,
    delta_n: f64,
    difficulty: f64,
) -> Result<f64, MarketError> {
    check_perturbed(hashrate, delta_n)?;
    if difficulty <= 0.0 {
        return Err(MarketError::NonPositiveDifficulty(difficulty));
    }
    let value = market.exchange_rate * (miner_reward_btc + delta_p);
    Ok(lottery_effect(hashrate, delta_n) * growth_rate_effect(hashrate, delta_n, difficulty) * value
        - market.unit_hash_cost)
}

/// Marginal effect of hashrate on profit, `-2 e (P + dp) / (N + dN)^2`.
pub fn marginal_profit_wrt_hashrate(
    market: &MarketState,
    miner_reward_btc: f64,
    delta_p: f64,
    hashrate: f64,
    delta_n: f64,
) -> Result<f64, MarketError> {
    let total = hashrate + delta_n;
    if total <= 0.0 {
        return Err(MarketError::NonPositiveHashrate(total));
    }
    Ok(-2.0 * market.exchange_rate * (miner_reward_btc + delta_p) / (total * total))
}

/// Marginal effect of the miner's reward on profit: lottery effect times
/// growth-rate effect times `e`.
pub fn marginal_profit_wrt_reward(
    market: &MarketState,
    hashrate: f64,
    delta_n: f64,
    difficulty: f64,
) -> Result<f64, MarketError> {
    check_perturbed(hashrate, delta_n)?;
    if difficulty <= 0.0 {
        return Err(MarketError::NonPositiveDifficulty(difficulty));
    }
    Ok(lottery_effect(hashrate, delta_n) * growth_rate_effect(hashrate, delta_n, difficulty) * market.exchange_rate)
}

/// `dN/dp = -(dpi/dp) / (dpi/dN)` at the unperturbed point.
pub fn hashrate_response(
    market: &MarketState,
    miner_reward_btc: f64,
    hashrate: f64,
    difficulty: f64,
) -> Result<f64, MarketError> {
    let d_hashrate = marginal_profit_wrt_hashrate(market, miner_reward_btc, 0.0, hashrate, 0.0)?;
    if d_hashrate == 0.0 || !d_hashrate.is_finite() {
        return Err(MarketError::SingularResponse);
    }
    let d_reward = marginal_profit_wrt_reward(market, hashrate, 0.0, difficulty)?;
    Ok(-d_reward / d_hashrate)
}
