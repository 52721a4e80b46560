use std::collections::BTreeMap;

use crate::units::{Address, Satoshi};

use super::BlockSettlement;

/// Plain account ledger run alongside the targeted one: same accepted
/// transfers, miner paid the unmodified total reward, no pool or remainder.
///
/// Balances are signed because a transfer accepted by the targeted ledger
/// (whose senders may hold pool credit) can exceed the sender's balance
/// here; only the aggregate is compared.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaselineLedger {
    balances: BTreeMap<Address, i128>,
}

impl BaselineLedger {
    pub fn with_balances<I>(balances: I) -> Self
    where
        I: IntoIterator<Item = (Address, Satoshi)>,
    {
        BaselineLedger {
            balances: balances.into_iter().map(|(a, v)| (a, v as i128)).collect(),
        }
    }

    pub fn balance(&self, addr: &Address) -> i128 {
        self.balances.get(addr).copied().unwrap_or(0)
    }

    /// Applies the transactions listed in `accepted` and pays the miner.
    pub fn apply(&mut self, block: &BlockSettlement, accepted: &[usize]) {
        for &i in accepted {
            let tx = &block.transactions[i];
            *self.balances.entry(tx.sender.clone()).or_insert(0) -= (tx.amount + tx.fee) as i128;
            *self.balances.entry(tx.recipient.clone()).or_insert(0) += tx.amount as i128;
        }
        *self.balances.entry(block.miner.clone()).or_insert(0) += block.total_reward as i128;
    }

    pub fn aggregate(&self) -> i128 {
        self.balances.values().sum()
    }
}
