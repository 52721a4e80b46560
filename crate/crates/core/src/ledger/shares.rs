use std::collections::BTreeMap;

use crate::units::Address;

use super::LedgerError;

/// Denominator used when fractional shares are given as floats.
const FRACTION_SCALE: f64 = 1e12;

/// Exact rational shares over a common denominator.
///
/// `share(x) = weight(x) / denominator`, with the weights summing to the
/// denominator, so shares sum to one exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shares {
    weights: BTreeMap<Address, u128>,
    denominator: u128,
}

impl Shares {
    /// Shares proportional to non-negative weights.
    pub fn from_weights<I>(weights: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (Address, u128)>,
    {
        let mut map = BTreeMap::new();
        for (addr, w) in weights {
            *map.entry(addr).or_insert(0u128) += w;
        }
        let denominator: u128 = map.values().sum();
        if denominator == 0 {
            return Err(LedgerError::DegenerateShares);
        }
        Ok(Shares {
            weights: map,
            denominator,
        })
    }

    /// Shares given as fractions, which must sum to one within 1e-12.
    ///
    /// Fractions are quantised to multiples of 1e-12 before use.
    pub fn from_fractions<I>(fractions: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (Address, f64)>,
    {
        let mut weights = Vec::new();
        let mut sum = 0.0;
        for (addr, f) in fractions {
            if !(f.is_finite() && f >= 0.0) {
                return Err(LedgerError::SharesNotNormalized(f));
            }
            sum += f;
            weights.push((addr, (f * FRACTION_SCALE).round() as u128));
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(LedgerError::SharesNotNormalized(sum));
        }
        Self::from_weights(weights)
    }

    pub fn denominator(&self) -> u128 {
        self.denominator
    }

    pub fn weight(&self, addr: &Address) -> u128 {
        self.weights.get(addr).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, u128)> {
        self.weights.iter().map(|(a, &w)| (a, w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn fraction(&self, addr: &Address) -> f64 {
        self.weight(addr) as f64 / self.denominator as f64
    }

    /// `floor(share(addr) * amount)`.
    pub fn floor_part(&self, addr: &Address, amount: u64) -> u64 {
        (self.weight(addr) * amount as u128 / self.denominator) as u64
    }

    /// Splits `amount` into floored per-address parts; returns the parts and
    /// the unassigned residual.
    pub fn split(&self, amount: u64) -> (Vec<(Address, u64)>, u64) {
        let parts: Vec<(Address, u64)> = self
            .weights
            .iter()
            .map(|(a, &w)| (a.clone(), (w * amount as u128 / self.denominator) as u64))
            .collect();
        let assigned: u64 = parts.iter().map(|(_, p)| p).sum();
        (parts, amount - assigned)
    }
}
