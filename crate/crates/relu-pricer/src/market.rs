use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contract and model parameters for a european maximum option on `d`
/// uncorrelated Black–Scholes assets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Strikes `K_1, …, K_d`; their count is the dimension `d`.
    pub strikes: Vec<f64>,
    /// Spot domain `[a, b]` of each asset.
    pub domain: (f64, f64),
    /// Smoothness order `n` driving quadrature and factor accuracy.
    pub smoothness: usize,
    pub drift: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl MarketParams {
    /// The normalized model `μ = σ²/2`, `σ = T = 1`.
    pub fn normalized(strikes: Vec<f64>, domain: (f64, f64), smoothness: usize) -> Result<Self> {
        let p = Self { strikes, domain, smoothness, drift: 0.5, vol: 1.0, maturity: 1.0 };
        p.validate()?;
        Ok(p)
    }

    /// Normalized model with all `d` strikes equal to `strike`.
    pub fn uniform(d: usize, strike: f64, domain: (f64, f64), smoothness: usize) -> Result<Self> {
        Self::normalized(vec![strike; d], domain, smoothness)
    }

    pub fn dim(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.vol == 1.0 && self.maturity == 1.0 && self.drift == 0.5
    }

    /// `(μ − σ²/2) T`, the log-drift of each asset.
    pub fn log_drift(&self) -> f64 {
        (self.drift - 0.5 * self.vol * self.vol) * self.maturity
    }

    /// `σ √T`.
    pub fn log_vol(&self) -> f64 {
        self.vol * self.maturity.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.strikes.is_empty() {
            return Err(Error::DimensionMismatch("at least one asset is required".into()));
        }
        if let Some(&k) = self.strikes.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::DomainError(format!("strike {k} must be finite and nonnegative")));
        }
        let (a, b) = self.domain;
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::InvalidInterval(a, b));
        }
        if self.smoothness == 0 {
            return Err(Error::InvalidArity(0));
        }
        if !(self.vol > 0.0 && self.maturity > 0.0 && self.drift.is_finite()) {
            return Err(Error::DomainError("volatility and maturity must be positive".into()));
        }
        Ok(())
    }
}
