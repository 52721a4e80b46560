use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_core::chain::{adjust_difficulty, estimate_hashrate, sample_block_time};
use tn_core::units::ticks_to_units;
use tn_core::{BlockRecord, ChainParams, ChainState, EpochStats};

fn params(m: u64, kappa: f64) -> ChainParams {
    ChainParams {
        blocks_per_epoch: m,
        target_block_interval: 600_000_000,
        clamp_factor: 4.0,
        hash_scale: kappa,
    }
}

fn chain_from(p: &ChainParams, gaps: &[u64], difficulty: f64) -> (ChainState, Vec<EpochStats>) {
    let mut chain = ChainState::new(p.clone()).unwrap();
    let mut closed = Vec::new();
    let mut ts = 0;
    for (i, gap) in gaps.iter().enumerate() {
        ts += gap;
        let block = BlockRecord {
            height: i as u64 + 1,
            timestamp: ts,
            difficulty,
            coinbase: 1000 + i as u64,
            fees: vec![i as u64 % 7],
            miner_reward_paid: 900,
        };
        if let Some(stats) = chain.append_block(block).unwrap() {
            closed.push(stats);
        }
    }
    (chain, closed)
}

proptest! {
    #[test]
    fn on_target_epoch_keeps_difficulty(m in 1u64..5000, d in 1e-3f64..1e15) {
        let p = params(m, 1.0);
        let stats = EpochStats::new(1, d, p.epoch_target_time(), 1, 1).unwrap();
        prop_assert_eq!(adjust_difficulty(&stats, &p).unwrap(), d);
    }

    #[test]
    fn retarget_stays_within_clamp(m in 1u64..5000, d in 1e-3f64..1e15, elapsed in 1u64..u64::MAX / 4) {
        let p = params(m, 1.0);
        let stats = EpochStats::new(1, d, elapsed, 1, 1).unwrap();
        let next = adjust_difficulty(&stats, &p).unwrap();
        prop_assert!(next >= d / 4.0 * (1.0 - 1e-12));
        prop_assert!(next <= d * 4.0 * (1.0 + 1e-12));
    }

    #[test]
    fn estimator_identity(m in 1u64..5000, d in 1e-3f64..1e15, elapsed in 1u64..1u64 << 50, kappa in prop::sample::select(vec![1.0, 4294967296.0])) {
        let p = params(m, kappa);
        let stats = EpochStats::new(1, d, elapsed, 1, 1).unwrap();
        let n_hat = estimate_hashrate(&stats, &p).unwrap();
        let lhs = n_hat * ticks_to_units(elapsed);
        let rhs = kappa * m as f64 * d;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn epoch_close_is_deterministic(gaps in prop::collection::vec(1u64..10_000_000, 1..60), m in 1u64..8, d in 1.0f64..1e6) {
        let p = params(m, 1.0);
        let (a, sa) = chain_from(&p, &gaps, d);
        let (_, sb) = chain_from(&p, &gaps, d);
        prop_assert_eq!(sa, sb);
        prop_assert_eq!(a.epochs().len() as u64, gaps.len() as u64 / m);
    }

    #[test]
    fn block_time_is_positive(d in 1.0f64..1e12, n in 1e-3f64..1e12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(sample_block_time(d, n, &mut rng).unwrap() >= 1);
    }
}

#[test]
fn snapshot_round_trip() {
    let p = params(3, 1.0);
    let (chain, _) = chain_from(&p, &[5, 6, 7, 8, 9, 10, 11], 10.0);
    let json = serde_json::to_string(&chain.snapshot()).unwrap();
    let back = ChainState::from_snapshot(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back, chain);
}
