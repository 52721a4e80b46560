//! Block and epoch bookkeeping, Nakamoto difficulty retargeting and the
//! `D/T` hashrate signal.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{ticks_to_units, units_to_ticks, Microticks, Satoshi};

pub const CHAIN_SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),
    #[error("block {height} rejected: timestamp {timestamp} is not after {previous}")]
    NonMonotoneTimestamp {
        height: u64,
        timestamp: Microticks,
        previous: Microticks,
    },
    #[error("block sequencing error: expected height {expected}, got {got}")]
    HeightGap { expected: u64, got: u64 },
    #[error("block {height} rejected: difficulty {got} differs from epoch difficulty {expected}")]
    DifficultyMismatch { height: u64, expected: f64, got: f64 },
    #[error("block {0} rejected: difficulty must be positive and finite")]
    InvalidDifficulty(u64),
    #[error("epoch elapsed time must be positive")]
    ZeroElapsed,
    #[error("block time sampling needs difficulty >= 1 and hashrate > 0 (got D={difficulty}, N={hashrate})")]
    InvalidSamplingInput { difficulty: f64, hashrate: f64 },
}

/// Consensus parameters of the simulated chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    /// Blocks per epoch (`m`).
    #[serde(default = "default_blocks_per_epoch")]
    pub blocks_per_epoch: u64,
    /// Target spacing between blocks, in microticks.
    pub target_block_interval: Microticks,
    /// Maximum per-epoch retarget factor.
    #[serde(default = "default_clamp_factor")]
    pub clamp_factor: f64,
    /// Hashes per unit of difficulty.
    #[serde(default = "default_hash_scale")]
    pub hash_scale: f64,
}

fn default_blocks_per_epoch() -> u64 {
    2016
}

fn default_clamp_factor() -> f64 {
    4.0
}

fn default_hash_scale() -> f64 {
    1.0
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            blocks_per_epoch: default_blocks_per_epoch(),
            target_block_interval: 600_000_000,
            clamp_factor: default_clamp_factor(),
            hash_scale: default_hash_scale(),
        }
    }
}

impl ChainParams {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.blocks_per_epoch < 1 {
            return Err(ChainError::InvalidParams("blocks_per_epoch must be >= 1".into()));
        }
        if self.target_block_interval == 0 {
            return Err(ChainError::InvalidParams("target_block_interval must be > 0".into()));
        }
        if !(self.clamp_factor.is_finite() && self.clamp_factor > 1.0) {
            return Err(ChainError::InvalidParams("clamp_factor must be > 1".into()));
        }
        if !(self.hash_scale.is_finite() && self.hash_scale > 0.0) {
            return Err(ChainError::InvalidParams("hash_scale must be > 0".into()));
        }
        Ok(())
    }

    /// `m * T*` in microticks.
    pub fn epoch_target_time(&self) -> Microticks {
        self.blocks_per_epoch * self.target_block_interval
    }

    /// Maps a hashrate onto the epoch `D/T` statistic it produces in
    /// expectation. Inverse of [`estimate_hashrate`].
    pub fn hashrate_to_dt(&self, hashrate: f64) -> f64 {
        hashrate / (self.hash_scale * self.blocks_per_epoch as f64)
    }

    /// Difficulty at which `hashrate` produces blocks on target on average.
    pub fn equilibrium_difficulty(&self, hashrate: f64) -> f64 {
        hashrate * ticks_to_units(self.target_block_interval) / self.hash_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub timestamp: Microticks,
    pub difficulty: f64,
    pub coinbase: Satoshi,
    pub fees: Vec<Satoshi>,
    pub miner_reward_paid: Satoshi,
}

impl BlockRecord {
    /// Coinbase plus every fee (the unmodified block reward).
    pub fn total_reward(&self) -> Satoshi {
        self.coinbase + self.fees.iter().sum::<Satoshi>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub index: u64,
    pub difficulty_in_effect: f64,
    /// Microticks from the previous epoch's end block to this epoch's end block.
    pub elapsed_time: Microticks,
    pub median_total_reward: Satoshi,
    pub median_miner_reward: Satoshi,
    /// `D / T` with `T` measured in model time units.
    pub sufficient_statistic: f64,
}

impl EpochStats {
    pub fn new(
        index: u64,
        difficulty: f64,
        elapsed_time: Microticks,
        median_total_reward: Satoshi,
        median_miner_reward: Satoshi,
    ) -> Result<Self, ChainError> {
        if elapsed_time == 0 {
            return Err(ChainError::ZeroElapsed);
        }
        Ok(EpochStats {
            index,
            difficulty_in_effect: difficulty,
            elapsed_time,
            median_total_reward,
            median_miner_reward,
            sufficient_statistic: difficulty / ticks_to_units(elapsed_time),
        })
    }
}

/// Median of integer amounts; for an even count the two middle values are
/// averaged and rounded down.
pub fn median_sats(values: &mut [Satoshi]) -> Satoshi {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let (a, b) = (values[n / 2 - 1] as u128, values[n / 2] as u128);
        ((a + b) / 2) as Satoshi
    }
}

/// Next-epoch difficulty: `D * (m T*) / T_hat`, with the elapsed time
/// clamped to `[m T* / c, c m T*]` first.
pub fn adjust_difficulty(stats: &EpochStats, params: &ChainParams) -> Result<f64, ChainError> {
    if stats.elapsed_time == 0 {
        return Err(ChainError::ZeroElapsed);
    }
    let target = params.epoch_target_time() as f64;
    let elapsed = stats.elapsed_time as f64;
    let t_hat = elapsed.clamp(target / params.clamp_factor, target * params.clamp_factor);
    Ok(stats.difficulty_in_effect * (target / t_hat))
}

/// `N_hat = kappa * m * D / T`.
pub fn estimate_hashrate(stats: &EpochStats, params: &ChainParams) -> Result<f64, ChainError> {
    if stats.elapsed_time == 0 {
        return Err(ChainError::ZeroElapsed);
    }
    Ok(params.hash_scale * params.blocks_per_epoch as f64 * stats.difficulty_in_effect
        / ticks_to_units(stats.elapsed_time))
}

/// Draws the time until the next block.
///
/// Guesses are Bernoulli trials with success probability `1/difficulty`; the
/// number of guesses to first success is geometric and `hashrate` guesses are
/// made per time unit, so the mean is `difficulty / hashrate`. Callers pass
/// `hash_scale * D` as `difficulty`. The result is at least one microtick.
pub fn sample_block_time<R: Rng + ?Sized>(
    difficulty: f64,
    hashrate: f64,
    rng: &mut R,
) -> Result<Microticks, ChainError> {
    if !(difficulty.is_finite() && difficulty >= 1.0 && hashrate.is_finite() && hashrate > 0.0) {
        return Err(ChainError::InvalidSamplingInput {
            difficulty,
            hashrate,
        });
    }
    let guesses = if difficulty == 1.0 {
        1.0
    } else {
        // Inverse CDF of the geometric distribution on {1, 2, ...}.
        let u: f64 = 1.0 - rng.random::<f64>();
        (u.ln() / (-1.0 / difficulty).ln_1p()).ceil().max(1.0)
    };
    Ok(units_to_ticks(guesses / hashrate).max(1))
}

/// Append-only chain of blocks, closing an epoch every `m` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    params: ChainParams,
    origin_timestamp: Microticks,
    blocks: Vec<BlockRecord>,
    epochs: Vec<EpochStats>,
}

impl ChainState {
    pub fn new(params: ChainParams) -> Result<Self, ChainError> {
        Self::with_origin(params, 0)
    }

    /// A chain whose first epoch is timed from `origin_timestamp`.
    pub fn with_origin(params: ChainParams, origin_timestamp: Microticks) -> Result<Self, ChainError> {
        params.validate()?;
        Ok(ChainState {
            params,
            origin_timestamp,
            blocks: Vec::new(),
            epochs: Vec::new(),
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    pub fn epochs(&self) -> &[EpochStats] {
        &self.epochs
    }

    pub fn tip(&self) -> Option<&BlockRecord> {
        self.blocks.last()
    }

    pub fn tip_timestamp(&self) -> Microticks {
        self.tip().map_or(self.origin_timestamp, |b| b.timestamp)
    }

    pub fn next_height(&self) -> u64 {
        self.blocks.len() as u64 + 1
    }

    /// Appends `block`; returns the epoch statistics when it closes an epoch.
    pub fn append_block(&mut self, block: BlockRecord) -> Result<Option<EpochStats>, ChainError> {
        let expected = self.next_height();
        if block.height != expected {
            return Err(ChainError::HeightGap {
                expected,
                got: block.height,
            });
        }
        let previous = self.tip_timestamp();
        if block.timestamp <= previous {
            return Err(ChainError::NonMonotoneTimestamp {
                height: block.height,
                timestamp: block.timestamp,
                previous,
            });
        }
        if !(block.difficulty.is_finite() && block.difficulty > 0.0) {
            return Err(ChainError::InvalidDifficulty(block.height));
        }
        let m = self.params.blocks_per_epoch;
        let epoch_start = ((block.height - 1) / m * m) as usize;
        if let Some(first) = self.blocks.get(epoch_start) {
            if first.difficulty != block.difficulty {
                return Err(ChainError::DifficultyMismatch {
                    height: block.height,
                    expected: first.difficulty,
                    got: block.difficulty,
                });
            }
        }
        self.blocks.push(block);

        let height = self.blocks.len() as u64;
        if height % m != 0 {
            return Ok(None);
        }
        let stats = self.close_epoch(height / m)?;
        self.epochs.push(stats.clone());
        Ok(Some(stats))
    }

    fn close_epoch(&self, index: u64) -> Result<EpochStats, ChainError> {
        let m = self.params.blocks_per_epoch as usize;
        let end = index as usize * m;
        let epoch = &self.blocks[end - m..end];
        let start_ts = if end == m {
            self.origin_timestamp
        } else {
            self.blocks[end - m - 1].timestamp
        };
        let elapsed = epoch[m - 1].timestamp - start_ts;
        let mut totals: Vec<Satoshi> = epoch.iter().map(BlockRecord::total_reward).collect();
        let mut paid: Vec<Satoshi> = epoch.iter().map(|b| b.miner_reward_paid).collect();
        EpochStats::new(
            index,
            epoch[0].difficulty,
            elapsed,
            median_sats(&mut totals),
            median_sats(&mut paid),
        )
    }

    pub fn snapshot(&self) -> ChainSnapshot {
        ChainSnapshot {
            version: CHAIN_SNAPSHOT_VERSION,
            params: self.params.clone(),
            origin_timestamp: self.origin_timestamp,
            blocks: self.blocks.clone(),
            epochs: self.epochs.clone(),
        }
    }

    /// Rebuilds a chain by replaying a snapshot's blocks.
    pub fn from_snapshot(snapshot: &ChainSnapshot) -> Result<Self, ChainError> {
        if snapshot.version != CHAIN_SNAPSHOT_VERSION {
            return Err(ChainError::InvalidParams(format!(
                "unsupported chain snapshot version {}",
                snapshot.version
            )));
        }
        let mut chain = ChainState::with_origin(snapshot.params.clone(), snapshot.origin_timestamp)?;
        for block in &snapshot.blocks {
            chain.append_block(block.clone())?;
        }
        Ok(chain)
    }
}

/// Versioned JSON document of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub version: u32,
    pub params: ChainParams,
    pub origin_timestamp: Microticks,
    pub blocks: Vec<BlockRecord>,
    pub epochs: Vec<EpochStats>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(m: u64) -> ChainParams {
        ChainParams {
            blocks_per_epoch: m,
            target_block_interval: 1_000_000,
            ..ChainParams::default()
        }
    }

    fn block(height: u64, timestamp: Microticks) -> BlockRecord {
        BlockRecord {
            height,
            timestamp,
            difficulty: 100.0,
            coinbase: 10,
            fees: vec![height],
            miner_reward_paid: 10 + height,
        }
    }

    fn stats(d: f64, elapsed: Microticks) -> EpochStats {
        EpochStats::new(1, d, elapsed, 0, 0).unwrap()
    }

    #[test]
    fn genesis_appends() {
        let mut chain = ChainState::new(params(10)).unwrap();
        assert_eq!(chain.append_block(block(1, 5)).unwrap(), None);
        assert_eq!(chain.len(), 1);
    }

    #[test]
    fn mth_block_closes_epoch() {
        let mut chain = ChainState::new(params(3)).unwrap();
        chain.append_block(block(1, 10)).unwrap();
        chain.append_block(block(2, 20)).unwrap();
        let stats = chain.append_block(block(3, 35)).unwrap().unwrap();
        assert_eq!(stats.index, 1);
        assert_eq!(stats.elapsed_time, 35);
        assert_eq!(stats.median_total_reward, 12);
        assert_eq!(stats.sufficient_statistic, 100.0 / ticks_to_units(35));
        // Second epoch is timed from the end of the first.
        chain.append_block(block(4, 40)).unwrap();
        chain.append_block(block(5, 50)).unwrap();
        let stats = chain.append_block(block(6, 95)).unwrap().unwrap();
        assert_eq!((stats.index, stats.elapsed_time), (2, 60));
    }

    #[test]
    fn rejects_bad_blocks() {
        let mut chain = ChainState::new(params(10)).unwrap();
        chain.append_block(block(1, 10)).unwrap();
        assert!(matches!(
            chain.append_block(block(2, 10)),
            Err(ChainError::NonMonotoneTimestamp { .. })
        ));
        assert_eq!(
            chain.append_block(block(3, 20)),
            Err(ChainError::HeightGap { expected: 2, got: 3 })
        );
        let mut other = block(2, 20);
        other.difficulty = 50.0;
        assert!(matches!(
            chain.append_block(other),
            Err(ChainError::DifficultyMismatch { .. })
        ));
    }

    #[test]
    fn median_even_rounds_down() {
        assert_eq!(median_sats(&mut [4, 1, 3, 2]), 2);
        assert_eq!(median_sats(&mut [5, 1, 3]), 3);
    }

    #[test]
    fn retarget_examples() {
        let p = params(10);
        let target = p.epoch_target_time();
        assert_eq!(adjust_difficulty(&stats(100.0, target), &p).unwrap(), 100.0);
        assert_eq!(adjust_difficulty(&stats(100.0, 2 * target), &p).unwrap(), 50.0);
        assert_eq!(adjust_difficulty(&stats(100.0, 10 * target), &p).unwrap(), 25.0);
        assert_eq!(adjust_difficulty(&stats(100.0, target / 10), &p).unwrap(), 400.0);
    }

    #[test]
    fn hashrate_examples() {
        let mut p = params(10);
        assert_eq!(estimate_hashrate(&stats(100.0, 200_000_000), &p).unwrap(), 5.0);
        assert_eq!(estimate_hashrate(&stats(100.0, 1_000_000_000), &p).unwrap(), 1.0);
        p.hash_scale = 2f64.powi(32);
        assert_eq!(
            estimate_hashrate(&stats(100.0, 200_000_000), &p).unwrap(),
            5.0 * 2f64.powi(32)
        );
        assert_eq!(p.hashrate_to_dt(5.0 * 2f64.powi(32)), 100.0 / 200.0);
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_block_time(1.0, 4.0, &mut rng).unwrap(), 250_000);
        let n = 100_000;
        let total: u64 = (0..n)
            .map(|_| sample_block_time(600.0, 1.0, &mut rng).unwrap())
            .sum();
        let mean = ticks_to_units(total) / n as f64;
        assert!((mean - 600.0).abs() / 600.0 < 0.02, "mean {mean}");
        assert!(sample_block_time(0.5, 1.0, &mut rng).is_err());
        assert!(sample_block_time(10.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_block_time(1e6, 3.0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn snapshot_replays() {
        let mut chain = ChainState::new(params(2)).unwrap();
        for h in 1..=5 {
            chain.append_block(block(h, h * 7)).unwrap();
        }
        let json = serde_json::to_string(&chain.snapshot()).unwrap();
        let snap: ChainSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(ChainState::from_snapshot(&snap).unwrap(), chain);
    }
}
