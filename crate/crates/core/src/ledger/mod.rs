//! Exact-integer account ledger with the reward-neutral monetary policy.
//!
//! When the miner is paid less than the block's total reward the difference
//! goes to the UTXO pool `P` and is credited to addresses as pool shares
//! `e_x`; when paid more, the difference is drawn from pool shares and any
//! excess is recorded as remainder obligations `r_x` against the addresses.
//! Per-address amounts are `floor(share * amount)`; the residuals are kept
//! unassigned in `FP` / `FR` and re-offered at every block.
//!
//! Invariants kept after every operation:
//!
//! * `sum(e_x) + FP == P` and `sum(r_x) + FR == R`;
//! * every address has `x + e_x - r_x >= 0` when shares come from
//!   [`LedgerState::compute_shares`];
//! * aggregate spending potential equals a plain ledger that pays the miner
//!   the unmodified total reward.

mod baseline;
mod shares;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{Address, Satoshi, SignedSatoshi};

pub use baseline::BaselineLedger;
pub use shares::Shares;

pub const LEDGER_SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("shares must sum to one (sum = {0})")]
    SharesNotNormalized(f64),
    #[error("aggregate spending potential is zero; shares are undefined")]
    DegenerateShares,
    #[error("ledger invariant violated: {0}")]
    Invariant(String),
    #[error("unsupported ledger snapshot version {0}")]
    Version(u32),
    #[error("amount overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub recipient: Address,
    pub amount: Satoshi,
    pub fee: Satoshi,
}

/// Everything a block does to the ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSettlement {
    pub transactions: Vec<Transaction>,
    pub miner: Address,
    pub total_reward: Satoshi,
    pub miner_reward: Satoshi,
}

impl BlockSettlement {
    /// `miner_reward - total_reward`.
    pub fn reward_delta(&self) -> SignedSatoshi {
        self.miner_reward as SignedSatoshi - self.total_reward as SignedSatoshi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidTransaction {
    pub index: usize,
    pub sender: Address,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementReport {
    /// Indices of transactions that were applied.
    pub accepted: Vec<usize>,
    pub invalid: Vec<InvalidTransaction>,
    pub fees_collected: Satoshi,
    /// Pool shares paid out to senders.
    pub credited_from_pool: Satoshi,
    /// Remainder obligations burned from senders.
    pub burned_from_remainder: Satoshi,
}

/// Outcome of one reward-delta adjustment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub q: SignedSatoshi,
    /// Change in `e_x - r_x` per address; magnitude is `floor(share * |q|)`.
    pub assigned: BTreeMap<Address, i128>,
    /// Part of `|q|` left unassigned by rounding.
    pub residual: Satoshi,
    /// `P_before - P_after`.
    pub pool_drawdown: i128,
    /// `R_after - R_before`.
    pub remainder_growth: i128,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub assigned_pool: Satoshi,
    pub assigned_remainder: Satoshi,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockReport {
    pub settlement: SettlementReport,
    pub delta: DeltaReport,
    pub rounding: RoundingReport,
    /// Pool value paid to the miner in place of new issuance.
    pub pool_to_miner: Satoshi,
    /// Value sent to the pool out of the block reward.
    pub pool_inflow: Satoshi,
    /// Newly issued value: coinbase plus any minted reward increase.
    pub minted: Satoshi,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    balances: BTreeMap<Address, Satoshi>,
    pool_total: Satoshi,
    pool_shares: BTreeMap<Address, Satoshi>,
    remainder_total: Satoshi,
    remainder_shares: BTreeMap<Address, Satoshi>,
    unassigned_pool: Satoshi,
    unassigned_remainder: Satoshi,
}

fn credit(map: &mut BTreeMap<Address, Satoshi>, addr: &Address, amount: Satoshi) {
    if amount > 0 {
        *map.entry(addr.clone()).or_insert(0) += amount;
    }
}

fn debit(map: &mut BTreeMap<Address, Satoshi>, addr: &Address, amount: Satoshi) {
    if amount == 0 {
        return;
    }
    let slot = map.get_mut(addr).expect("debit from missing entry");
    *slot -= amount;
    if *slot == 0 {
        map.remove(addr);
    }
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_balances<I>(balances: I) -> Self
    where
        I: IntoIterator<Item = (Address, Satoshi)>,
    {
        let mut ledger = Self::new();
        for (addr, amount) in balances {
            ledger.balances.insert(addr, amount);
        }
        ledger
    }

    pub fn balance(&self, addr: &Address) -> Satoshi {
        self.balances.get(addr).copied().unwrap_or(0)
    }

    pub fn pool_share(&self, addr: &Address) -> Satoshi {
        self.pool_shares.get(addr).copied().unwrap_or(0)
    }

    pub fn remainder_share(&self, addr: &Address) -> Satoshi {
        self.remainder_shares.get(addr).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<Address, Satoshi> {
        &self.balances
    }

    pub fn pool_total(&self) -> Satoshi {
        self.pool_total
    }

    pub fn remainder_total(&self) -> Satoshi {
        self.remainder_total
    }

    pub fn unassigned_pool(&self) -> Satoshi {
        self.unassigned_pool
    }

    pub fn unassigned_remainder(&self) -> Satoshi {
        self.unassigned_remainder
    }

    /// Every address with a balance, pool share or remainder share.
    pub fn addresses(&self) -> Vec<Address> {
        let mut all: Vec<Address> = self
            .balances
            .keys()
            .chain(self.pool_shares.keys())
            .chain(self.remainder_shares.keys())
            .cloned()
            .collect();
        all.sort();
        all.dedup();
        all
    }

    /// Test and fixture hook: overwrite the per-address pool and remainder
    /// accounts, keeping `P` and `R` consistent with the unassigned totals.
    pub fn set_accounts(&mut self, addr: &Address, pool_share: Satoshi, remainder_share: Satoshi) {
        let old_e = self.pool_share(addr);
        let old_r = self.remainder_share(addr);
        self.pool_total = self.pool_total - old_e + pool_share;
        self.remainder_total = self.remainder_total - old_r + remainder_share;
        self.pool_shares.remove(addr);
        self.remainder_shares.remove(addr);
        credit(&mut self.pool_shares, addr, pool_share);
        credit(&mut self.remainder_shares, addr, remainder_share);
    }

    /// Test and fixture hook: set the unassigned pool and remainder residuals.
    pub fn set_unassigned(&mut self, pool: Satoshi, remainder: Satoshi) {
        self.pool_total = self.pool_total - self.unassigned_pool + pool;
        self.remainder_total = self.remainder_total - self.unassigned_remainder + remainder;
        self.unassigned_pool = pool;
        self.unassigned_remainder = remainder;
    }

    /// `x + e_x - r_x`.
    pub fn spending_potential(&self, addr: &Address) -> i128 {
        self.balance(addr) as i128 + self.pool_share(addr) as i128 - self.remainder_share(addr) as i128
    }

    /// Sum of address spending potentials plus `FP - FR`.
    pub fn aggregate_spending_potential(&self) -> i128 {
        let addressed: i128 = self
            .addresses()
            .iter()
            .map(|a| self.spending_potential(a))
            .sum();
        addressed + self.unassigned_pool as i128 - self.unassigned_remainder as i128
    }

    /// Each address's fraction of the summed spending potential.
    pub fn compute_shares(&self) -> Result<Shares, LedgerError> {
        let mut weights = Vec::new();
        for addr in self.addresses() {
            let sp = self.spending_potential(&addr);
            if sp < 0 {
                return Err(LedgerError::Invariant(format!(
                    "negative spending potential {sp} at {addr}"
                )));
            }
            weights.push((addr, sp as u128));
        }
        Shares::from_weights(weights)
    }

    /// Executes the block's transactions in order, then pays the miner.
    ///
    /// A sender's pending `e_x - r_x` is realised first (credited from the
    /// pool or burned against the remainder); a transaction whose sender's
    /// spending potential cannot cover amount plus fee is dropped and
    /// reported.
    pub fn settle_transactions(&mut self, block: &BlockSettlement) -> Result<SettlementReport, LedgerError> {
        let mut report = SettlementReport::default();
        for (index, tx) in block.transactions.iter().enumerate() {
            let outlay = tx.amount.checked_add(tx.fee).ok_or(LedgerError::Overflow)?;
            let sp = self.spending_potential(&tx.sender);
            if sp < outlay as i128 {
                report.invalid.push(InvalidTransaction {
                    index,
                    sender: tx.sender.clone(),
                    reason: format!(
                        "spending potential {sp} cannot cover {outlay} (pending burn {})",
                        self.remainder_share(&tx.sender)
                    ),
                });
                continue;
            }
            let e = self.pool_share(&tx.sender);
            let r = self.remainder_share(&tx.sender);
            debit(&mut self.pool_shares, &tx.sender, e);
            debit(&mut self.remainder_shares, &tx.sender, r);
            self.pool_total -= e;
            self.remainder_total -= r;
            report.credited_from_pool += e;
            report.burned_from_remainder += r;

            let settled = (sp - outlay as i128) as Satoshi;
            self.balances.insert(tx.sender.clone(), settled);
            *self.balances.entry(tx.recipient.clone()).or_insert(0) += tx.amount;
            report.fees_collected += tx.fee;
            report.accepted.push(index);
        }
        *self.balances.entry(block.miner.clone()).or_insert(0) += block.miner_reward;
        Ok(report)
    }

    /// Books the reward delta `q = miner_reward - total_reward` against the
    /// pool and remainder accounts.
    ///
    /// Every address's `e_x - r_x` moves by `floor(share * |q|)` in the
    /// direction opposite to `q`. For `q < 0` the amount is added to `e_x`.
    /// For `q > 0` it is drawn from `e_x` first and any excess is added to
    /// `r_x`. The rounding residual goes to `FP` for `q < 0`; for `q > 0` it
    /// is drawn from `FP` first and the rest added to `FR`.
    pub fn apply_reward_delta(&mut self, q: SignedSatoshi, shares: &Shares) -> Result<DeltaReport, LedgerError> {
        self.apply_delta(q, Some(shares))
    }

    fn apply_delta(&mut self, q: SignedSatoshi, shares: Option<&Shares>) -> Result<DeltaReport, LedgerError> {
        let p_before = self.pool_total as i128;
        let r_before = self.remainder_total as i128;
        let magnitude = q.unsigned_abs();
        let (parts, residual) = match shares {
            Some(s) => s.split(magnitude),
            None => (Vec::new(), magnitude),
        };
        let mut assigned = BTreeMap::new();

        if q < 0 {
            for (addr, part) in parts {
                credit(&mut self.pool_shares, &addr, part);
                self.pool_total += part;
                assigned.insert(addr, part as i128);
            }
            self.unassigned_pool += residual;
            self.pool_total += residual;
        } else if q > 0 {
            for (addr, part) in parts {
                let take = self.pool_share(&addr).min(part);
                debit(&mut self.pool_shares, &addr, take);
                self.pool_total -= take;
                let spill = part - take;
                credit(&mut self.remainder_shares, &addr, spill);
                self.remainder_total += spill;
                assigned.insert(addr, -(part as i128));
            }
            let take = self.unassigned_pool.min(residual);
            self.unassigned_pool -= take;
            self.pool_total -= take;
            self.unassigned_remainder += residual - take;
            self.remainder_total += residual - take;
        }

        Ok(DeltaReport {
            q,
            assigned,
            residual,
            pool_drawdown: p_before - self.pool_total as i128,
            remainder_growth: self.remainder_total as i128 - r_before,
        })
    }

    /// Offers the unassigned `FP` and `FR` to addresses by share, rounding
    /// down. `P` and `R` are unchanged.
    pub fn rounding_assignment(&mut self, shares: &Shares) -> RoundingReport {
        let (pool_parts, pool_left) = shares.split(self.unassigned_pool);
        let (rem_parts, rem_left) = shares.split(self.unassigned_remainder);
        let report = RoundingReport {
            assigned_pool: self.unassigned_pool - pool_left,
            assigned_remainder: self.unassigned_remainder - rem_left,
        };
        for (addr, part) in pool_parts {
            credit(&mut self.pool_shares, &addr, part);
        }
        for (addr, part) in rem_parts {
            credit(&mut self.remainder_shares, &addr, part);
        }
        self.unassigned_pool = pool_left;
        self.unassigned_remainder = rem_left;
        report
    }

    /// Runs one block in order: transactions, miner payment, reward delta
    /// with shares taken after payment, then rounding assignment with
    /// refreshed shares.
    pub fn process_block(&mut self, block: &BlockSettlement) -> Result<BlockReport, LedgerError> {
        let settlement = self.settle_transactions(block)?;
        let q = block.reward_delta();
        let delta = match self.compute_shares() {
            Ok(shares) => self.apply_delta(q, Some(&shares))?,
            Err(LedgerError::DegenerateShares) => self.apply_delta(q, None)?,
            Err(e) => return Err(e),
        };
        let rounding = match self.compute_shares() {
            Ok(shares) => self.rounding_assignment(&shares),
            Err(LedgerError::DegenerateShares) => RoundingReport::default(),
            Err(e) => return Err(e),
        };
        let pool_to_miner = delta.pool_drawdown.max(0) as Satoshi;
        let pool_inflow = (-delta.pool_drawdown).max(0) as Satoshi;
        let minted = (block.miner_reward as i128 + pool_inflow as i128
            - settlement.fees_collected as i128
            - pool_to_miner as i128)
            .max(0) as Satoshi;
        Ok(BlockReport {
            settlement,
            delta,
            rounding,
            pool_to_miner,
            pool_inflow,
            minted,
        })
    }

    pub fn check_invariants(&self) -> Result<(), LedgerError> {
        let e_sum: u128 = self.pool_shares.values().map(|&v| v as u128).sum();
        if e_sum + self.unassigned_pool as u128 != self.pool_total as u128 {
            return Err(LedgerError::Invariant(format!(
                "sum(e) + FP = {} but P = {}",
                e_sum + self.unassigned_pool as u128,
                self.pool_total
            )));
        }
        let r_sum: u128 = self.remainder_shares.values().map(|&v| v as u128).sum();
        if r_sum + self.unassigned_remainder as u128 != self.remainder_total as u128 {
            return Err(LedgerError::Invariant(format!(
                "sum(r) + FR = {} but R = {}",
                r_sum + self.unassigned_remainder as u128,
                self.remainder_total
            )));
        }
        for addr in self.addresses() {
            let sp = self.spending_potential(&addr);
            if sp < 0 {
                return Err(LedgerError::Invariant(format!(
                    "negative spending potential {sp} at {addr}"
                )));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            version: LEDGER_SNAPSHOT_VERSION,
            ledger: self.clone(),
        }
    }

    pub fn from_snapshot(snapshot: LedgerSnapshot) -> Result<Self, LedgerError> {
        if snapshot.version != LEDGER_SNAPSHOT_VERSION {
            return Err(LedgerError::Version(snapshot.version));
        }
        snapshot.ledger.check_invariants()?;
        Ok(snapshot.ledger)
    }
}

/// Versioned JSON document of a ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub version: u32,
    pub ledger: LedgerState,
}
