//! Externality cost curves and the target hashrate interval.
//!
//! Environmental cost rises with hashrate and security cost falls with it;
//! the target interval is the set of hashrates where their sum is within a
//! tolerance of its minimum. Curves are user inputs and the defaults shipped
//! in examples are illustrative only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::ChainParams;

/// Price elasticity of electricity demand used by the optional price
/// feedback.
pub const DEFAULT_ELECTRICITY_DEMAND_ELASTICITY: f64 = -2.06;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("curve validation failed: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveShape {
    /// `scale * N^exponent`.
    PowerLaw { scale: f64, exponent: f64 },
    /// `slope * N + intercept`.
    Linear { slope: f64, intercept: f64 },
    /// Linear interpolation between `(N, cost)` knots, flat beyond the ends.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    #[serde(flatten)]
    pub shape: CurveShape,
    pub direction: Direction,
}

impl CostCurve {
    pub fn new(shape: CurveShape, direction: Direction) -> Result<Self, CostError> {
        let curve = CostCurve { shape, direction };
        curve.validate()?;
        Ok(curve)
    }

    pub fn power_law(scale: f64, exponent: f64, direction: Direction) -> Result<Self, CostError> {
        Self::new(CurveShape::PowerLaw { scale, exponent }, direction)
    }

    pub fn linear(slope: f64, intercept: f64, direction: Direction) -> Result<Self, CostError> {
        Self::new(CurveShape::Linear { slope, intercept }, direction)
    }

    /// The zero curve, valid under either direction tag.
    pub fn zero(direction: Direction) -> Self {
        CostCurve {
            shape: CurveShape::Linear {
                slope: 0.0,
                intercept: 0.0,
            },
            direction,
        }
    }

    /// Checks that the shape's monotonicity agrees with the direction tag.
    pub fn validate(&self) -> Result<(), CostError> {
        let bad = |m: String| Err(CostError::Validation(m));
        // Sign of the slope implied by the shape: +1, -1 or 0 (flat).
        let slope_sign = match &self.shape {
            CurveShape::PowerLaw { scale, exponent } => {
                if !(scale.is_finite() && exponent.is_finite()) {
                    return bad("power law parameters must be finite".into());
                }
                if *scale < 0.0 {
                    return bad("power law scale must be >= 0".into());
                }
                (scale * exponent).signum() * ((scale * exponent) != 0.0) as i32 as f64
            }
            CurveShape::Linear { slope, intercept } => {
                if !(slope.is_finite() && intercept.is_finite()) {
                    return bad("linear parameters must be finite".into());
                }
                slope.signum() * (*slope != 0.0) as i32 as f64
            }
            CurveShape::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return bad("piecewise curve needs at least one knot".into());
                }
                if knots.iter().any(|(x, y)| !(x.is_finite() && y.is_finite()) || *y < 0.0) {
                    return bad("knots must be finite with non-negative cost".into());
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("knot abscissae must be strictly increasing".into());
                }
                let up = knots.windows(2).any(|w| w[1].1 > w[0].1);
                let down = knots.windows(2).any(|w| w[1].1 < w[0].1);
                match (up, down) {
                    (true, true) => return bad("piecewise curve is not monotone".into()),
                    (true, false) => 1.0,
                    (false, true) => -1.0,
                    (false, false) => 0.0,
                }
            }
        };
        match self.direction {
            Direction::Increasing if slope_sign < 0.0 => bad("curve tagged increasing is decreasing".into()),
            Direction::Decreasing if slope_sign > 0.0 => bad("curve tagged decreasing is increasing".into()),
            _ => Ok(()),
        }
    }

    /// Cost at hashrate `n`.
    pub fn evaluate(&self, n: f64) -> Result<f64, CostError> {
        let value = match &self.shape {
            CurveShape::PowerLaw { scale, exponent } => {
                if *scale == 0.0 {
                    0.0
                } else if n <= 0.0 && *exponent < 0.0 {
                    return Err(CostError::Domain(format!("power law with negative exponent at N = {n}")));
                } else {
                    scale * n.powf(*exponent)
                }
            }
            CurveShape::Linear { slope, intercept } => slope * n + intercept,
            CurveShape::PiecewiseLinear { knots } => interpolate(knots, n),
        };
        if !value.is_finite() || value < 0.0 {
            return Err(CostError::Domain(format!("cost {value} at N = {n} is not a non-negative number")));
        }
        Ok(value)
    }
}

fn interpolate(knots: &[(f64, f64)], n: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if n <= first.0 {
        return first.1;
    }
    if n >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= n);
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (n - x0) / (x1 - x0)
}

/// Electricity cost per hash: price per kWh over hashes per kWh.
pub fn per_hash_cost(electricity_price: f64, asic_efficiency: f64) -> Result<f64, CostError> {
    if !(asic_efficiency > 0.0 && asic_efficiency.is_finite()) {
        return Err(CostError::Domain("asic efficiency must be positive".into()));
    }
    if !(electricity_price >= 0.0 && electricity_price.is_finite()) {
        return Err(CostError::Domain("electricity price must be non-negative".into()));
    }
    Ok(electricity_price / asic_efficiency)
}

fn check_tags(env: &CostCurve, sec: &CostCurve) -> Result<(), CostError> {
    if env.direction != Direction::Increasing {
        return Err(CostError::Validation("environmental curve must be increasing".into()));
    }
    if sec.direction != Direction::Decreasing {
        return Err(CostError::Validation("security curve must be decreasing".into()));
    }
    env.validate()?;
    sec.validate()
}

pub fn total_cost(env: &CostCurve, sec: &CostCurve, n: f64) -> Result<f64, CostError> {
    check_tags(env, sec)?;
    Ok(env.evaluate(n)? + sec.evaluate(n)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub n_low: f64,
    pub n_high: f64,
    /// Grid point with the smallest total cost.
    pub n_best: f64,
    pub min_total_cost: f64,
    pub grid_step: f64,
}

impl IntervalResult {
    /// Controller band `(dt_lower, dt_upper)` matching this hashrate interval.
    pub fn to_dt_bounds(&self, chain: &ChainParams) -> (f64, f64) {
        (chain.hashrate_to_dt(self.n_low), chain.hashrate_to_dt(self.n_high))
    }
}

/// Grid search for the hashrates whose total cost is within `tolerance` of
/// the grid minimum, reported as the tightest enclosing interval.
pub fn optimal_interval(
    env: &CostCurve,
    sec: &CostCurve,
    domain: (f64, f64),
    grid: usize,
    tolerance: f64,
) -> Result<IntervalResult, CostError> {
    check_tags(env, sec)?;
    let (lo, hi) = domain;
    if grid < 3 {
        return Err(CostError::Domain("grid needs at least 3 points".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CostError::Domain("domain must satisfy n_min < n_max".into()));
    }
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(CostError::Domain("tolerance must be non-negative".into()));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let points: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let n = if i == grid - 1 { hi } else { lo + step * i as f64 };
            Ok((n, env.evaluate(n)? + sec.evaluate(n)?))
        })
        .collect::<Result<_, CostError>>()?;
    let (n_best, min_total_cost) = points
        .iter()
        .copied()
        .fold((lo, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
    let threshold = min_total_cost + tolerance;
    let admitted = points.iter().filter(|p| p.1 <= threshold).map(|p| p.0);
    let (n_low, n_high) = admitted.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), n| (a.min(n), b.max(n)));
    Ok(IntervalResult {
        n_low,
        n_high,
        n_best,
        min_total_cost,
        grid_step: step,
    })
}

/// Attacker's undiscounted ex-ante expected profit:
/// `p V - (1 - p) * cost_per_block * expected_blocks`.
pub fn double_spend_profit(
    p_success: f64,
    value: f64,
    cost_per_block: f64,
    expected_blocks: f64,
) -> Result<f64, CostError> {
    if !(0.0..=1.0).contains(&p_success) {
        return Err(CostError::Domain("success probability must lie in [0, 1]".into()));
    }
    if !(value >= 0.0 && cost_per_block >= 0.0 && expected_blocks >= 0.0) {
        return Err(CostError::Domain("value, cost and block count must be non-negative".into()));
    }
    Ok(p_success * value - (1.0 - p_success) * cost_per_block * expected_blocks)
}

/// Electricity price after mining demand moves by `demand_ratio`, for a
/// demand elasticity `elasticity`: `price * ratio^(1/|elasticity|)`.
pub fn electricity_price_feedback(base_price: f64, demand_ratio: f64, elasticity: f64) -> f64 {
    if demand_ratio <= 0.0 || elasticity == 0.0 {
        return base_price;
    }
    base_price * demand_ratio.powf(1.0 / elasticity.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_linear() -> CostCurve {
        CostCurve::linear(1.0, 0.0, Direction::Increasing).unwrap()
    }

    fn sec_inverse(a: f64) -> CostCurve {
        CostCurve::power_law(a, -1.0, Direction::Decreasing).unwrap()
    }

    #[test]
    fn per_hash_cost_examples() {
        assert!((per_hash_cost(0.05, 1e9).unwrap() - 5e-11).abs() < 1e-24);
        assert_eq!(per_hash_cost(0.0, 123.0).unwrap(), 0.0);
        assert_eq!(per_hash_cost(1.0, 2e9).unwrap() * 2.0, per_hash_cost(1.0, 1e9).unwrap());
        assert!(per_hash_cost(1.0, 0.0).is_err());
    }

    #[test]
    fn total_cost_examples() {
        assert_eq!(total_cost(&env_linear(), &sec_inverse(100.0), 10.0).unwrap(), 20.0);
        let zero_env = CostCurve::zero(Direction::Increasing);
        assert_eq!(total_cost(&zero_env, &sec_inverse(100.0), 4.0).unwrap(), 25.0);
        let zero_sec = CostCurve::zero(Direction::Decreasing);
        assert_eq!(total_cost(&env_linear(), &zero_sec, 4.0).unwrap(), 4.0);
        assert!(total_cost(&sec_inverse(1.0), &env_linear(), 4.0).is_err());
    }

    #[test]
    fn direction_tags_checked() {
        assert!(CostCurve::linear(-1.0, 10.0, Direction::Increasing).is_err());
        assert!(CostCurve::power_law(1.0, 2.0, Direction::Decreasing).is_err());
        let bumpy = CurveShape::PiecewiseLinear {
            knots: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)],
        };
        assert!(CostCurve::new(bumpy, Direction::Increasing).is_err());
    }

    #[test]
    fn piecewise_interpolates() {
        let c = CostCurve::new(
            CurveShape::PiecewiseLinear {
                knots: vec![(0.0, 0.0), (10.0, 5.0), (20.0, 25.0)],
            },
            Direction::Increasing,
        )
        .unwrap();
        assert_eq!(c.evaluate(-1.0).unwrap(), 0.0);
        assert_eq!(c.evaluate(5.0).unwrap(), 2.5);
        assert_eq!(c.evaluate(15.0).unwrap(), 15.0);
        assert_eq!(c.evaluate(99.0).unwrap(), 25.0);
    }

    #[test]
    fn interval_examples() {
        let r = optimal_interval(&env_linear(), &sec_inverse(100.0), (1.0, 100.0), 9901, 1e-9).unwrap();
        assert!((r.n_best - 10.0).abs() <= r.grid_step);
        assert!((r.min_total_cost - 20.0).abs() < 1e-9);
        assert!(r.n_low <= 10.0 + r.grid_step && r.n_high >= 10.0 - r.grid_step);

        let r = optimal_interval(&env_linear(), &CostCurve::zero(Direction::Decreasing), (2.0, 9.0), 50, 0.0).unwrap();
        assert_eq!((r.n_low, r.n_high), (2.0, 2.0));

        let flat_env = CostCurve::linear(0.0, 3.0, Direction::Increasing).unwrap();
        let r = optimal_interval(&flat_env, &CostCurve::zero(Direction::Decreasing), (2.0, 9.0), 50, 1e-12).unwrap();
        assert_eq!((r.n_low, r.n_high), (2.0, 9.0));

        assert!(optimal_interval(&env_linear(), &sec_inverse(1.0), (1.0, 2.0), 2, 0.0).is_err());
        assert!(optimal_interval(&env_linear(), &sec_inverse(1.0), (2.0, 1.0), 10, 0.0).is_err());
    }

    #[test]
    fn dt_bounds_follow_chain_mapping() {
        let chain = ChainParams {
            blocks_per_epoch: 10,
            hash_scale: 2.0,
            ..ChainParams::default()
        };
        let r = IntervalResult {
            n_low: 40.0,
            n_high: 80.0,
            n_best: 60.0,
            min_total_cost: 0.0,
            grid_step: 1.0,
        };
        assert_eq!(r.to_dt_bounds(&chain), (2.0, 4.0));
    }

    #[test]
    fn double_spend_examples() {
        assert_eq!(double_spend_profit(1.0, 100.0, 10.0, 6.0).unwrap(), 100.0);
        assert_eq!(double_spend_profit(0.5, 100.0, 10.0, 6.0).unwrap(), 20.0);
        assert_eq!(double_spend_profit(0.0, 100.0, 10.0, 6.0).unwrap(), -60.0);
        assert!(double_spend_profit(1.5, 100.0, 10.0, 6.0).is_err());
    }

    #[test]
    fn price_feedback_rises_with_demand() {
        let p = electricity_price_feedback(0.05, 2.0, DEFAULT_ELECTRICITY_DEMAND_ELASTICITY);
        assert!(p > 0.05);
        assert_eq!(electricity_price_feedback(0.05, 1.0, -2.06), 0.05);
    }

    #[test]
    fn curve_json_shape() {
        let json = r#"{"kind":"power_law","scale":100.0,"exponent":-1.0,"direction":"decreasing"}"#;
        let c: CostCurve = serde_json::from_str(json).unwrap();
        assert_eq!(c, sec_inverse(100.0));
    }
}
