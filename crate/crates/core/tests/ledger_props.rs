use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tn_core::ledger::{BlockSettlement, Transaction};
use tn_core::{Address, BaselineLedger, LedgerError, LedgerState, Shares};

fn addresses(n: usize) -> Vec<Address> {
    (0..n).map(|i| Address::new(format!("addr{i}"))).collect()
}

fn random_block(rng: &mut ChaCha8Rng, addrs: &[Address], ledger: &LedgerState) -> BlockSettlement {
    let mut transactions = Vec::new();
    for _ in 0..rng.random_range(0..6) {
        let sender = &addrs[rng.random_range(0..addrs.len())];
        let sp = ledger.spending_potential(sender).max(0) as u64;
        // Sometimes overspend to exercise rejection.
        let budget = if rng.random_bool(0.1) { sp + 1000 } else { sp / 3 };
        let fee = rng.random_range(0..=budget.min(10_000));
        transactions.push(Transaction {
            sender: sender.clone(),
            recipient: addrs[rng.random_range(0..addrs.len())].clone(),
            amount: rng.random_range(0..=budget - fee),
            fee,
        });
    }
    let total_reward = rng.random_range(1..5_000_000);
    let miner_reward = match rng.random_range(0..3) {
        0 => total_reward,
        1 => rng.random_range(0..=total_reward),
        _ => rng.random_range(total_reward..=3 * total_reward),
    };
    BlockSettlement {
        transactions,
        miner: addrs[rng.random_range(0..addrs.len())].clone(),
        total_reward,
        miner_reward,
    }
}

/// Runs `blocks` random blocks step by step, checking every ledger invariant.
fn run(seed: u64, n_addr: usize, blocks: usize) -> Result<LedgerState, TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let addrs = addresses(n_addr);
    let initial: Vec<(Address, u64)> = addrs.iter().map(|a| (a.clone(), rng.random_range(0..1_000_000_000))).collect();
    let mut ledger = LedgerState::with_balances(initial.clone());
    let mut baseline = BaselineLedger::with_balances(initial);

    for _ in 0..blocks {
        let block = random_block(&mut rng, &addrs, &ledger);
        let settlement = ledger.settle_transactions(&block).unwrap();
        baseline.apply(&block, &settlement.accepted);

        let q = block.reward_delta();
        match ledger.compute_shares() {
            Ok(shares) => {
                let report = ledger.apply_reward_delta(q, &shares).unwrap();
                prop_assert_eq!(report.pool_drawdown + report.remainder_growth, q as i128);
                for (addr, amount) in &report.assigned {
                    let w = shares.weight(addr);
                    let exact = w * q.unsigned_abs() as u128;
                    let got = amount.unsigned_abs();
                    prop_assert!(got * shares.denominator() <= exact);
                    prop_assert!(exact < (got + 1) * shares.denominator());
                }
                prop_assert!((report.residual as usize) < shares.len().max(1));
            }
            Err(LedgerError::DegenerateShares) => prop_assert_eq!(q, 0),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
        ledger.check_invariants().unwrap();
        if let Ok(shares) = ledger.compute_shares() {
            ledger.rounding_assignment(&shares);
        }
        ledger.check_invariants().unwrap();
        for a in ledger.addresses() {
            prop_assert!(ledger.spending_potential(&a) >= 0);
        }
        prop_assert_eq!(ledger.aggregate_spending_potential(), baseline.aggregate());
    }
    Ok(ledger)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stepwise_invariants(seed in any::<u64>(), n_addr in 1usize..8) {
        run(seed, n_addr, 200)?;
    }

    #[test]
    fn process_block_matches_stepwise(seed in any::<u64>(), n_addr in 1usize..8) {
        let stepwise = run(seed, n_addr, 60)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let addrs = addresses(n_addr);
        let initial: Vec<(Address, u64)> =
            addrs.iter().map(|a| (a.clone(), rng.random_range(0..1_000_000_000))).collect();
        let mut ledger = LedgerState::with_balances(initial);
        for _ in 0..60 {
            let block = random_block(&mut rng, &addrs, &ledger);
            ledger.process_block(&block).unwrap();
        }
        prop_assert_eq!(
            serde_json::to_string(&ledger.snapshot()).unwrap(),
            serde_json::to_string(&stepwise.snapshot()).unwrap()
        );
    }

    #[test]
    fn split_is_proportional(weights in prop::collection::vec(0u128..1u128 << 60, 1..20), amount in any::<u64>()) {
        prop_assume!(weights.iter().any(|&w| w > 0));
        let shares = Shares::from_weights(addresses(weights.len()).into_iter().zip(weights.iter().copied())).unwrap();
        let (parts, residual) = shares.split(amount);
        let assigned: u64 = parts.iter().map(|(_, p)| p).sum();
        prop_assert_eq!(assigned + residual, amount);
        prop_assert!((residual as usize) < weights.len());
    }
}
