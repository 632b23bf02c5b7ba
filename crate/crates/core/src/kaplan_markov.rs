//! Kaplan-Markov sequential P-value for PPEB samples.
//!
//! For taints `T_1, T_2, ...` and total bound `U > 1`,
//!
//! ```text
//! P = min_j prod_{i <= j} (1 - 1/U) / (1 - T_i)
//! ```
//!
//! reported capped at 1. A taint of exactly 1 makes its factor infinite; the
//! running product stays at `+inf` from then on, so later draws can never
//! lower `P` below its value before that draw.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KmError {
    #[error("total error bound {0} is not above 1")]
    BoundNotAboveOne(f64),
    #[error("taint {0} is above 1")]
    TaintAboveOne(f64),
}

/// Running product and prefix minimum over a taint sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaplanMarkov {
    shrink: f64,
    product: f64,
    min: f64,
    draws: u64,
}

impl KaplanMarkov {
    pub fn new(total_bound: f64) -> Result<KaplanMarkov, KmError> {
        // written this way so NaN is rejected too
        if !(total_bound > 1.0) {
            return Err(KmError::BoundNotAboveOne(total_bound));
        }
        Ok(KaplanMarkov {
            shrink: 1.0 - 1.0 / total_bound,
            product: 1.0,
            min: f64::INFINITY,
            draws: 0,
        })
    }

    /// Folds in the next draw's taint.
    pub fn push(&mut self, taint: f64) -> Result<f64, KmError> {
        if taint > 1.0 || taint.is_nan() {
            return Err(KmError::TaintAboveOne(taint));
        }
        self.product = if taint == 1.0 || self.product.is_infinite() {
            f64::INFINITY
        } else {
            self.product * self.shrink / (1.0 - taint)
        };
        self.min = self.min.min(self.product);
        self.draws += 1;
        Ok(self.p_value())
    }

    /// Current P, capped at 1; 1 before any draw.
    pub fn p_value(&self) -> f64 {
        self.min.min(1.0)
    }

    /// Full-length product term (uncapped).
    pub fn product(&self) -> f64 {
        self.product
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// True once a taint of 1 has been seen.
    pub fn saturated(&self) -> bool {
        self.product.is_infinite()
    }
}

/// P-value of a whole taint sequence.
pub fn km_pvalue(taints: &[f64], total_bound: f64) -> Result<f64, KmError> {
    let mut km = KaplanMarkov::new(total_bound)?;
    for &t in taints {
        km.push(t)?;
    }
    Ok(km.p_value())
}
