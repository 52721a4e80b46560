use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{Scenario, ScenarioError, TrajectoryRecord};
use crate::chain::{estimate_hashrate, adjust_difficulty, sample_block_time, BlockRecord, ChainState};
use crate::controller::{apply_cap, controller_step, scale_fees, ControllerState};
use crate::cost::electricity_price_feedback;
use crate::ledger::{BaselineLedger, BlockSettlement, LedgerState, Transaction};
use crate::market::MarketError;
use crate::units::{sats_to_btc, ticks_to_units, Address, Satoshi};

/// Runs every epoch of `scenario` and returns one record per epoch.
pub fn run_simulation(scenario: &Scenario) -> Result<Vec<TrajectoryRecord>, ScenarioError> {
    let mut sim = Simulation::new(scenario)?;
    (0..scenario.horizon_epochs).map(|_| sim.step_epoch()).collect()
}

/// Epoch-by-epoch simulation state. Randomness comes from a single ChaCha8
/// stream seeded by the scenario, so a run is a pure function of its input.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    rng: ChaCha8Rng,
    chain: ChainState,
    ledger: LedgerState,
    baseline: BaselineLedger,
    controller: ControllerState,
    difficulty: Option<f64>,
    epoch: u64,
    first_model_hashrate: Option<f64>,
    last_model_hashrate: Option<f64>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let balances = scenario.ledger.balances.iter().map(|(a, &v)| (a.clone(), v));
        Ok(Simulation {
            scenario: scenario.clone(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            chain: ChainState::new(scenario.chain.clone())?,
            ledger: LedgerState::with_balances(balances.clone()),
            baseline: BaselineLedger::with_balances(balances),
            controller: scenario.initial_controller,
            difficulty: scenario.initial_difficulty,
            epoch: 0,
            first_model_hashrate: None,
            last_model_hashrate: None,
        })
    }

    pub fn ledger(&self) -> &LedgerState {
        &self.ledger
    }

    pub fn baseline(&self) -> &BaselineLedger {
        &self.baseline
    }

    pub fn chain(&self) -> &ChainState {
        &self.chain
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    /// Hashrate the market supplies this epoch given the controller state
    /// entering it.
    fn model_hashrate(&mut self) -> Result<f64, ScenarioError> {
        let k = self.epoch;
        let paths = &self.scenario.market;
        let mut market = paths.state_at(k);
        if let (Some(elasticity), Some(first), Some(last)) = (
            paths.electricity_feedback_elasticity,
            self.first_model_hashrate,
            self.last_model_hashrate,
        ) {
            market.unit_hash_cost = electricity_price_feedback(market.unit_hash_cost, last / first, elasticity);
        }
        market.validate()?;
        let expected = apply_cap(&self.controller, self.scenario.workload.expected_total_reward(k));
        let n = paths.model.hashrate(&market, sats_to_btc(expected), 0.0)?;
        if !(n.is_finite() && n > 0.0) {
            return Err(MarketError::NonPositiveHashrate(n).into());
        }
        self.first_model_hashrate.get_or_insert(n);
        self.last_model_hashrate = Some(n);
        Ok(n)
    }

    /// Mines one full epoch, closes it and advances difficulty and the
    /// controller.
    pub fn step_epoch(&mut self) -> Result<TrajectoryRecord, ScenarioError> {
        let k = self.epoch;
        let n_model = self.model_hashrate()?;
        let params = self.scenario.chain.clone();
        let difficulty = *self
            .difficulty
            .get_or_insert_with(|| params.equilibrium_difficulty(n_model));
        let state_in_effect = self.controller;
        let coinbase = self.scenario.workload.coinbase_at(k);

        let mut xi_sum = 0.0;
        let mut closed = None;
        for _ in 0..params.blocks_per_epoch {
            let dt = sample_block_time(params.hash_scale * difficulty, n_model, &mut self.rng)?;
            let miner = self.pick_miner();
            let transactions = self.generate_transactions();
            let fees: Vec<Satoshi> = transactions.iter().map(|t| t.fee).collect();
            let total_reward = coinbase + fees.iter().sum::<Satoshi>();
            let miner_reward = apply_cap(&self.controller, total_reward);
            xi_sum += scale_fees(coinbase, &fees, miner_reward)?.xi;

            let block = BlockSettlement {
                transactions,
                miner,
                total_reward,
                miner_reward,
            };
            let report = self.ledger.process_block(&block)?;
            self.baseline.apply(&block, &report.settlement.accepted);
            let height = self.chain.next_height();
            let targeted = self.ledger.aggregate_spending_potential();
            let baseline = self.baseline.aggregate();
            if targeted != baseline {
                return Err(ScenarioError::Neutrality {
                    height,
                    targeted,
                    baseline,
                });
            }

            closed = self.chain.append_block(BlockRecord {
                height,
                timestamp: self.chain.tip_timestamp() + dt,
                difficulty,
                coinbase,
                fees,
                miner_reward_paid: miner_reward,
            })?;
        }
        let stats = closed.expect("epoch closes after m blocks");

        let n_est = estimate_hashrate(&stats, &params)?;
        self.difficulty = Some(adjust_difficulty(&stats, &params)?);
        self.controller = controller_step(&self.controller, &self.scenario.controller, &stats)?;
        self.epoch += 1;

        Ok(TrajectoryRecord {
            epoch: k,
            difficulty,
            elapsed: ticks_to_units(stats.elapsed_time),
            dt: stats.sufficient_statistic,
            n_est,
            n_model,
            mode: state_in_effect.mode.name().to_string(),
            bound: state_in_effect.mode.bound(),
            median_total_reward: stats.median_total_reward,
            median_miner_reward: stats.median_miner_reward,
            xi_mean: xi_sum / params.blocks_per_epoch as f64,
            agg_sp_targeted: to_i64(self.ledger.aggregate_spending_potential()),
            agg_sp_nakamoto: to_i64(self.baseline.aggregate()),
            pool: self.ledger.pool_total(),
            remainder: self.ledger.remainder_total(),
        })
    }

    fn pick_miner(&mut self) -> Address {
        let miners = &self.scenario.workload.miners;
        miners[self.rng.random_range(0..miners.len())].clone()
    }

    /// Synthetic transfers: senders drawn with probability proportional to
    /// what they can spend, exponential fees, uniform recipients.
    fn generate_transactions(&mut self) -> Vec<Transaction> {
        let w = &self.scenario.workload;
        if w.tx_per_block == 0 {
            return Vec::new();
        }
        let universe: Vec<Address> = self
            .ledger
            .addresses()
            .into_iter()
            .chain(w.miners.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        // Spendable under both ledgers, so the baseline never goes negative.
        let mut available: Vec<u64> = universe
            .iter()
            .map(|a| {
                let sp = self.ledger.spending_potential(a).max(0);
                sp.min(self.baseline.balance(a).max(0)) as u64
            })
            .collect();
        let fee_dist = (w.fee_mean > 0.0).then(|| Exp::new(1.0 / w.fee_mean).expect("positive rate"));

        let mut out = Vec::with_capacity(w.tx_per_block as usize);
        for _ in 0..w.tx_per_block {
            let total: u128 = available.iter().map(|&v| v as u128).sum();
            if total == 0 {
                break;
            }
            let mut pick = self.rng.random_range(0..total);
            let sender = available
                .iter()
                .position(|&v| {
                    if pick < v as u128 {
                        true
                    } else {
                        pick -= v as u128;
                        false
                    }
                })
                .expect("pick below total");
            let avail = available[sender];
            let fee = fee_dist
                .as_ref()
                .map_or(0, |d| d.sample(&mut self.rng).round() as u64)
                .min(avail);
            let max_amount = ((avail - fee) as f64 * w.max_spend_fraction).floor() as u64;
            let amount = self.rng.random_range(0..=max_amount);
            let recipient = self.rng.random_range(0..universe.len());
            available[sender] -= amount + fee;
            out.push(Transaction {
                sender: universe[sender].clone(),
                recipient: universe[recipient].clone(),
                amount,
                fee,
            });
        }
        out
    }
}

fn to_i64(v: i128) -> i64 {
    i64::try_from(v).expect("aggregate spending potential fits in i64")
}
