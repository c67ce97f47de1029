use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sparseness {
    pub value: f64,
    /// All rates were zero; the value is defined as 0.
    pub all_zero: bool,
}

/// `S = (1 - (sum r / N)^2 / (sum r^2 / N)) / (1 - 1/N)`.
pub fn population_sparseness(rates: &[f64]) -> Result<Sparseness> {
    let n = rates.len();
    if n < 2 {
        return Err(Error::Config("sparseness needs at least two neurons".into()));
    }
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config("rates must lie in [0, 1]".into()));
    }
    let sq: f64 = rates.iter().map(|r| r * r).sum();
    if sq == 0.0 {
        return Ok(Sparseness { value: 0.0, all_zero: true });
    }
    // N sum r^2 - (sum r)^2 written as a sum of squared pairwise differences,
    // so equal rates give exactly 0 and a single active neuron exactly 1.
    let mut spread = 0.0;
    for (i, a) in rates.iter().enumerate() {
        for b in &rates[i + 1..] {
            spread += (a - b) * (a - b);
        }
    }
    let s = spread / ((n - 1) as f64 * sq);
    Ok(Sparseness { value: s.clamp(0.0, 1.0), all_zero: false })
}
