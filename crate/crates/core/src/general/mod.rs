//! Mechanisms over an explicit, finite outcome space.
//!
//! * [`lexi_allocate`] / [`lexi_payments`]: the lexicographic welfare
//!   auction for value maximizers (the `L^inf` welfare maximizer).
//! * [`lp_allocate`] / [`lp_payments`]: `L^alpha` welfare maximization with
//!   `L^alpha` externality payments; `alpha = 1` is VCG.
//! * [`lp_affine_allocate`] / [`lp_affine_payments`]: weighted, offset
//!   `L^alpha` maximizers.
//! * [`virtual_welfare_run`]: the lexicographic auction run on per-bidder
//!   monotone transforms of the values.
//!
//! Ties are broken towards the lowest outcome index and the lowest bidder
//! index everywhere.

mod lexi;
mod lp;
mod virtual_welfare;

use serde::{Deserialize, Serialize};

pub use lexi::{lexi_allocate, lexi_payments, lexi_payments_on_grid};
pub use lp::{lp_affine_allocate, lp_affine_payments, lp_allocate, lp_payments, AffineParams};
pub use virtual_welfare::{invert_virtual, virtual_welfare_run, VirtualValueFn};

pub(crate) use lexi::{lexi_externalities, lexi_select, lexi_tie_margin};
pub(crate) use lp::lp_score_margin;

use crate::error::{Error, Result};

/// One round of the lexicographic allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiRound {
    pub winner: usize,
    pub value: f64,
    /// Best competing bidder still unconsidered in this round, with its
    /// best value over the outcomes that survived the previous round.
    pub runner_up: Option<(usize, f64)>,
    /// Outcomes still in play after this round.
    pub survivors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LexiTrace {
    pub rounds: Vec<LexiRound>,
}

/// Chosen outcome and per-bidder total payments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionResult {
    pub outcome: usize,
    pub payments: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<LexiTrace>,
}

/// Discrete type space with spacing `step`. Payments are rounded to the
/// next type strictly above the critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    step: f64,
}

impl TypeGrid {
    pub fn new(step: f64) -> Result<Self> {
        if step.is_finite() && step > 0.0 {
            Ok(Self { step })
        } else {
            Err(Error::InvalidParameter(format!(
                "type grid step must be > 0, got {step}"
            )))
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Smallest grid point strictly greater than `x`; zero stays zero.
    pub fn next_above(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        // x sitting on a grid point may divide to just below an integer
        let k = (x / self.step + 1e-9).floor();
        let mut next = (k + 1.0) * self.step;
        if next <= x {
            next += self.step;
        }
        next
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in [1, inf], got {alpha}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_grid_rounds_strictly_up() {
        let g = TypeGrid::new(0.5).unwrap();
        assert_eq!(g.next_above(0.0), 0.0);
        assert_eq!(g.next_above(0.2), 0.5);
        assert_eq!(g.next_above(1.0), 1.5);
        assert_eq!(g.next_above(1.01), 1.5);
        let tenth = TypeGrid::new(0.1).unwrap();
        assert!((tenth.next_above(0.3) - 0.4).abs() < 1e-12);
        assert!(TypeGrid::new(0.0).is_err());
    }
}
