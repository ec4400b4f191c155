//! When ROI constraints make any super-quasi-linear bidder behave like a
//! value maximizer.
//!
//! Bidders here bid their ROI-reduced value `b = t / (1 + gamma)`, which is
//! the truthful report of an ROI-constrained value maximizer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slots::SlotAuctionInstance;
use crate::valuation::ValuationMatrix;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && !gamma.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )))
    }
}

/// `gamma / (gamma + 1)`, with the limit 1 at infinity.
fn discount(gamma: f64) -> f64 {
    if gamma.is_infinite() {
        1.0
    } else {
        gamma / (gamma + 1.0)
    }
}

/// Pair of outcomes `(o, o')` with `v(o) > v(o')` but
/// `v(o) * gamma / (gamma + 1) < v(o')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationViolation {
    pub better: usize,
    pub worse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCheck {
    pub gamma: f64,
    /// First violating pair of each bidder, `None` where the bidder passes.
    pub violations: Vec<Option<SeparationViolation>>,
}

impl SeparationCheck {
    pub fn passed(&self) -> bool {
        self.violations.iter().all(Option::is_none)
    }
}

/// Checks that every bidder's distinct values are far enough apart that an
/// ROI-`gamma` bidder never trades a higher-value outcome for a lower one.
pub fn separation_condition(values: &ValuationMatrix, gamma: f64) -> Result<SeparationCheck> {
    check_gamma(gamma)?;
    let d = discount(gamma);
    let violations = values
        .rows()
        .iter()
        .map(|row| {
            let outcomes = 0..row.len();
            outcomes.clone().find_map(|better| {
                outcomes
                    .clone()
                    .find(|&worse| row[better] > row[worse] && row[better] * d < row[worse])
                    .map(|worse| SeparationViolation { better, worse })
            })
        })
        .collect();
    Ok(SeparationCheck { gamma, violations })
}

/// Smallest ROI requirement above which no bidder with super-quasi-linear
/// preferences gains by lying under GSP, given the current bids.
///
/// With bidders ranked by score `s`, slot effects `a` (`a_{m+1} = 0`) and
/// missing bidders scoring 0, this is the maximum over slots `i` of
/// `a_i / (a_i - a_{i+1}) - a_{i+1} / (a_i - a_{i+1}) * s_{i+2} / s_{i+1}`,
/// where the ratio is dropped when `s_{i+1} = 0`. The guarantee needs
/// `gamma` strictly above this value. Fails on tied scores.
pub fn native_min_gamma(instance: &SlotAuctionInstance) -> Result<f64> {
    let scores = instance.scores();
    let ranking = instance.ranking();
    if let Some(w) = ranking.windows(2).find(|w| scores[w[0]] == scores[w[1]]) {
        let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
        return Err(Error::TiedScores {
            first,
            second,
            score: scores[w[0]],
        });
    }
    let score_at = |rank: usize| ranking.get(rank).map_or(0.0, |&b| scores[b]);
    let alpha = |slot: usize| instance.slot_effect(slot);

    Ok((0..instance.slots())
        .map(|i| {
            let (a, next) = (alpha(i), alpha(i + 1));
            let gap = a - next;
            let below = score_at(i + 1);
            let ratio = if below > 0.0 {
                score_at(i + 2) / below
            } else {
                0.0
            };
            a / gap - next / gap * ratio
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Whether [`native_min_gamma`] certifies the auction at `gamma`.
pub fn certified_at(instance: &SlotAuctionInstance, gamma: f64) -> Result<bool> {
    check_gamma(gamma)?;
    Ok(native_min_gamma(instance)? < gamma)
}

/// Slot-level form of the separation condition:
/// `alpha_{i+1} <= gamma / (gamma + 1) * alpha_i` for every slot.
pub fn corollary_slot_condition(slot_effects: &[f64], gamma: f64) -> Result<bool> {
    check_gamma(gamma)?;
    if slot_effects.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::AlphaNotDescending);
    }
    let d = discount(gamma);
    Ok(slot_effects.windows(2).all(|w| w[1] <= d * w[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    /// Share of the included auctions with `gamma* < gamma`.
    pub fraction: f64,
    /// Auctions left out because two bidders tie on score.
    pub excluded_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// `gamma*` per auction, `None` for excluded auctions.
    pub per_auction_gamma_star: Vec<Option<f64>>,
    pub curve: Vec<CurvePoint>,
    pub dataset_size: usize,
}

impl RobustnessReport {
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(p) = self
            .curve
            .iter()
            .find(|p| !(0.0..=1.0).contains(&p.fraction))
        {
            return Err(Error::Invariant(format!(
                "fraction {} at gamma {} outside [0, 1]",
                p.fraction, p.gamma
            )));
        }
        if let Some(w) = self
            .curve
            .windows(2)
            .find(|w| w[1].fraction < w[0].fraction)
        {
            return Err(Error::Invariant(format!(
                "curve drops from {} at gamma {} to {} at gamma {}",
                w[0].fraction, w[0].gamma, w[1].fraction, w[1].gamma
            )));
        }
        Ok(())
    }
}

/// Fraction of auctions certified by [`native_min_gamma`] at each `gamma`.
/// Auctions with tied scores are excluded from the fraction and counted.
pub fn gamma_curve(dataset: &[SlotAuctionInstance], gammas: &[f64]) -> Result<RobustnessReport> {
    if dataset.is_empty() {
        return Err(Error::Empty);
    }
    if gammas.windows(2).any(|w| w[1] < w[0]) || gammas.iter().any(|g| g.is_nan()) {
        return Err(Error::InvalidParameter(
            "gammas must be sorted ascending".into(),
        ));
    }
    let per_auction_gamma_star: Vec<Option<f64>> = dataset
        .par_iter()
        .map(|inst| match native_min_gamma(inst) {
            Ok(g) => Ok(Some(g)),
            Err(Error::TiedScores { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut stars: Vec<f64> = per_auction_gamma_star.iter().flatten().copied().collect();
    stars.sort_by(f64::total_cmp);
    let excluded_count = dataset.len() - stars.len();
    let curve = gammas
        .iter()
        .map(|&gamma| {
            let below = stars.partition_point(|&s| s < gamma);
            CurvePoint {
                gamma,
                fraction: if stars.is_empty() {
                    0.0
                } else {
                    below as f64 / stars.len() as f64
                },
                excluded_count,
            }
        })
        .collect();
    let report = RobustnessReport {
        per_auction_gamma_star,
        curve,
        dataset_size: dataset.len(),
    };
    report.check_invariants()?;
    Ok(report)
}
