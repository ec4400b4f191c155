use std::fmt;

use crate::error::{Error, Result};
use crate::general::TypeGrid;

/// Number of evenly spaced probes on `[0, max_bid]` used to bracket the
/// jump before bisection.
pub const PROBE_POINTS: usize = 1024;

const BISECTION_TOLERANCE: f64 = 1e-9;

/// Allocation level of one bidder as a function of its own bid, others'
/// bids held fixed.
pub struct AllocationRule<'a> {
    level: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    max_bid: f64,
}

impl fmt::Debug for AllocationRule<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AllocationRule")
            .field("max_bid", &self.max_bid)
            .finish_non_exhaustive()
    }
}

impl<'a> AllocationRule<'a> {
    pub fn new(level: impl Fn(f64) -> f64 + Send + Sync + 'a, max_bid: f64) -> Result<Self> {
        if !(max_bid.is_finite() && max_bid > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bid domain upper bound must be > 0, got {max_bid}"
            )));
        }
        Ok(Self {
            level: Box::new(level),
            max_bid,
        })
    }

    /// Right-continuous step function: `base` below the first threshold,
    /// `levels[k]` on `[thresholds[k], thresholds[k+1])`.
    pub fn step(base: f64, steps: Vec<(f64, f64)>, max_bid: f64) -> Result<Self> {
        if steps.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter(
                "step thresholds must be sorted".into(),
            ));
        }
        Self::new(
            move |b| {
                steps
                    .iter()
                    .take_while(|(t, _)| *t <= b)
                    .last()
                    .map_or(base, |(_, x)| *x)
            },
            max_bid,
        )
    }

    pub fn level(&self, bid: f64) -> f64 {
        (self.level)(bid)
    }

    pub fn max_bid(&self) -> f64 {
        self.max_bid
    }
}

/// Infimum bid that still earns the allocation level obtained at `bid`.
///
/// A coarse probe grid brackets the jump, then bisection narrows it to
/// `1e-9`. Fails if the rule decreases anywhere on the probes.
pub fn critical_bid(rule: &AllocationRule<'_>, bid: f64) -> Result<f64> {
    if !(bid.is_finite() && bid >= 0.0) {
        return Err(Error::InvalidParameter(format!("bid {bid} must be >= 0")));
    }
    let top = rule.max_bid.max(bid);
    let mut probes: Vec<(f64, f64)> = (0..PROBE_POINTS)
        .map(|k| {
            let b = top * k as f64 / (PROBE_POINTS - 1) as f64;
            (b, rule.level(b))
        })
        .collect();
    let target = rule.level(bid);
    let at = probes.partition_point(|(b, _)| *b < bid);
    probes.insert(at, (bid, target));

    for w in probes.windows(2) {
        if w[1].1 < w[0].1 {
            return Err(Error::NotMonotone {
                prev_at: w[0].0,
                prev_level: w[0].1,
                at: w[1].0,
                level: w[1].1,
            });
        }
    }
    if probes[0].1 >= target {
        return Ok(0.0);
    }

    // last probe below the target level, and the one after it
    let last_below = probes[..=at]
        .iter()
        .rposition(|(_, x)| *x < target)
        .expect("level at zero is below target");
    let (mut lo, _) = probes[last_below];
    let (mut hi, _) = probes[last_below + 1];
    while hi - lo > BISECTION_TOLERANCE {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let x = rule.level(mid);
        if x > target {
            return Err(Error::NotMonotone {
                prev_at: mid,
                prev_level: x,
                at: bid,
                level: target,
            });
        }
        if x < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Total payment `critical_bid * level(bid)`.
pub fn critical_price(rule: &AllocationRule<'_>, bid: f64) -> Result<f64> {
    Ok(critical_bid(rule, bid)? * rule.level(bid))
}

/// [`critical_price`] on a discrete type space: the critical bid is raised
/// to the next type above it.
pub fn critical_price_on_grid(rule: &AllocationRule<'_>, bid: f64, grid: TypeGrid) -> Result<f64> {
    Ok(grid.next_above(critical_bid(rule, bid)?) * rule.level(bid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_price_step() {
        // bidder with 7 against a competing 4; lower index wins ties
        let rule = AllocationRule::step(0.0, vec![(4.0, 1.0)], 70.0).unwrap();
        let p = critical_price(&rule, 7.0).unwrap();
        assert!((p - 4.0).abs() < 1e-9);
    }

    #[test]
    fn constant_rule_is_free() {
        let rule = AllocationRule::new(|_| 0.5, 10.0).unwrap();
        assert_eq!(critical_price(&rule, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn losing_bid_pays_nothing() {
        let rule = AllocationRule::step(0.0, vec![(4.0, 1.0)], 70.0).unwrap();
        assert_eq!(critical_price(&rule, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn multi_level_steps() {
        let rule =
            AllocationRule::step(0.0, vec![(1.3, 0.2), (2.7, 0.5), (6.1, 0.9)], 20.0).unwrap();
        assert!((critical_bid(&rule, 2.0).unwrap() - 1.3).abs() < 1e-9);
        assert!((critical_bid(&rule, 5.0).unwrap() - 2.7).abs() < 1e-9);
        assert!((critical_price(&rule, 19.0).unwrap() - 6.1 * 0.9).abs() < 1e-8);
        // bid beyond the declared domain still resolves
        assert!((critical_bid(&rule, 25.0).unwrap() - 6.1).abs() < 1e-9);
    }

    #[test]
    fn continuous_rule() {
        // x(b) = min(b, 1): every bid below 1 has its own level, so the
        // infimum earning that level is the bid itself
        let rule = AllocationRule::new(|b: f64| b.min(1.0), 5.0).unwrap();
        assert!((critical_bid(&rule, 0.6).unwrap() - 0.6).abs() < 1e-9);
        assert!((critical_bid(&rule, 3.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn discrete_type_grid() {
        let rule = AllocationRule::step(0.0, vec![(4.2, 1.0)], 70.0).unwrap();
        let grid = TypeGrid::new(0.5).unwrap();
        assert!((critical_price_on_grid(&rule, 7.0, grid).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn detects_non_monotone_rule() {
        let rule = AllocationRule::new(|b| if (2.0..=3.0).contains(&b) { 1.0 } else { 0.0 }, 10.0)
            .unwrap();
        assert!(matches!(
            critical_price(&rule, 2.5),
            Err(Error::NotMonotone { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(AllocationRule::new(|_| 0.0, 0.0).is_err());
        assert!(AllocationRule::step(0.0, vec![(2.0, 1.0), (1.0, 2.0)], 5.0).is_err());
        let rule = AllocationRule::new(|_| 0.0, 1.0).unwrap();
        assert!(critical_bid(&rule, -1.0).is_err());
    }
}
