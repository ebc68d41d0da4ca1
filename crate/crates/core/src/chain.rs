//! Rate tables for a birth–death chain on `0..=N`.

use crate::error::{AlleeError, Result};
use crate::model::{birth_rate_unchecked, death_rate_unchecked, ModelParams};

/// `birth[i]` is the rate `i -> i+1`, `death[i]` the rate `i -> i-1`.
/// `birth[N]` and `death[0]` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathChain {
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl BirthDeathChain {
    pub fn from_params(params: &ModelParams) -> Self {
        let n = params.capacity_n;
        let birth = (0..=n).map(|i| birth_rate_unchecked(params, i)).collect();
        let death = (0..=n).map(|i| death_rate_unchecked(params, i)).collect();
        Self { birth, death }
    }

    /// Arbitrary rates. Both slices have length `N + 1`; `birth[N]` and
    /// `death[0]` must be zero.
    pub fn from_rates(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        if birth.len() != death.len() || birth.len() < 2 {
            return Err(AlleeError::InvalidParameter(format!(
                "rate tables must share a length >= 2, got {} and {}",
                birth.len(),
                death.len()
            )));
        }
        if birth
            .iter()
            .chain(&death)
            .any(|r| !r.is_finite() || *r < 0.0)
        {
            return Err(AlleeError::InvalidParameter(
                "rates must be finite and non-negative".into(),
            ));
        }
        if *birth.last().unwrap() != 0.0 || death[0] != 0.0 {
            return Err(AlleeError::InvalidParameter(
                "birth[N] and death[0] must be zero".into(),
            ));
        }
        Ok(Self { birth, death })
    }

    pub fn capacity(&self) -> usize {
        self.birth.len() - 1
    }

    pub fn birth(&self) -> &[f64] {
        &self.birth
    }

    pub fn death(&self) -> &[f64] {
        &self.death
    }

    /// Unnormalized stationary log-weights `log(p_i / p_0)` from the product
    /// `p_{i+1}/p_i = b(i)/d(i+1)`.
    pub fn log_weights(&self) -> Result<Vec<f64>> {
        if self.birth[0] <= 0.0 {
            return Err(AlleeError::DegenerateDistribution);
        }
        let n = self.capacity();
        let mut lw = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        lw.push(acc);
        for i in 0..n {
            acc += self.birth[i].ln() - self.death[i + 1].ln();
            lw.push(acc);
        }
        Ok(lw)
    }
}
