//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tn_core::ledger::{BlockSettlement, Transaction};
use tn_core::{Address, LedgerState};

/// A ledger with `accounts` funded addresses.
pub fn funded_ledger(accounts: usize, seed: u64) -> (LedgerState, Vec<Address>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let addrs: Vec<Address> = (0..accounts).map(|i| Address::new(format!("a{i}"))).collect();
    let ledger = LedgerState::with_balances(addrs.iter().map(|a| (a.clone(), rng.random_range(1_000_000..1_000_000_000))));
    (ledger, addrs)
}

/// A block with small transfers and a capped miner reward.
pub fn capped_block(addrs: &[Address], txs: usize, seed: u64) -> BlockSettlement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transactions = (0..txs)
        .map(|_| Transaction {
            sender: addrs[rng.random_range(0..addrs.len())].clone(),
            recipient: addrs[rng.random_range(0..addrs.len())].clone(),
            amount: rng.random_range(0..10_000),
            fee: rng.random_range(0..1_000),
        })
        .collect();
    BlockSettlement {
        transactions,
        miner: addrs[0].clone(),
        total_reward: 300_000_000,
        miner_reward: 250_000_000,
    }
}
