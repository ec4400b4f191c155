//! Generalizations of GSP beyond the separable slot model.

use super::critical::{critical_bid, AllocationRule};
use super::{rank_by_score, MatchingSpace, SlotAssignment, SlotAuctionInstance};
use crate::error::{Error, Result};
use crate::general::AuctionResult;
use crate::valuation::ValuationMatrix;

/// V1: the lexicographic welfare auction on an arbitrary outcome space.
pub fn generalized_gsp_v1(values: &ValuationMatrix) -> AuctionResult {
    AuctionResult::lexi(values)
}

/// V1 on a slot instance, expanded to the space of full matchings.
pub fn generalized_gsp_v1_slots(instance: &SlotAuctionInstance) -> Result<SlotAssignment> {
    let space = MatchingSpace::for_instance(instance);
    let values = space.valuation(instance, instance.bids())?;
    let result = generalized_gsp_v1(&values);
    Ok(SlotAssignment::from_expected(
        instance,
        space.slot_of(result.outcome),
        &result.payments,
    ))
}

/// A single-parameter domain: each outcome gives every bidder an allocation
/// level, and a bidder's value is its per-unit type times its level.
pub trait SingleParameterDomain: Sync {
    type Outcome: Clone + PartialEq;

    fn bidders(&self) -> usize;

    /// Outcome maximizing `sum_i bid_i * level_i`.
    fn allocate(&self, bids: &[f64]) -> Self::Outcome;

    fn level(&self, outcome: &Self::Outcome, bidder: usize) -> f64;
}

/// Finite list of allocation vectors (outcome -> bidder -> level).
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitAllocations {
    levels: Vec<Vec<f64>>,
    bidders: usize,
}

impl ExplicitAllocations {
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        let bidders = levels.first().map(Vec::len).ok_or(Error::Empty)?;
        if bidders == 0 {
            return Err(Error::Empty);
        }
        for (o, row) in levels.iter().enumerate() {
            if row.len() != bidders {
                return Err(Error::Dimension(format!(
                    "allocation {o} has {} levels, expected {bidders}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "allocation {o} has a negative or non-finite level"
                )));
            }
        }
        Ok(Self { levels, bidders })
    }
}

impl SingleParameterDomain for ExplicitAllocations {
    type Outcome = usize;

    fn bidders(&self) -> usize {
        self.bidders
    }

    fn allocate(&self, bids: &[f64]) -> usize {
        let welfare =
            |o: usize| -> f64 { self.levels[o].iter().zip(bids).map(|(x, b)| x * b).sum() };
        let mut best = 0;
        let mut best_welfare = welfare(0);
        for o in 1..self.levels.len() {
            let w = welfare(o);
            if w > best_welfare {
                best = o;
                best_welfare = w;
            }
        }
        best
    }

    fn level(&self, outcome: &usize, bidder: usize) -> f64 {
        self.levels[*outcome][bidder]
    }
}

/// Separable slot model: welfare is maximized by the assortative matching.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDomain {
    slot_effects: Vec<f64>,
    ad_effects: Vec<f64>,
}

impl SlotDomain {
    pub fn new(instance: &SlotAuctionInstance) -> Self {
        Self {
            slot_effects: instance.slot_effects().to_vec(),
            ad_effects: instance.ad_effects().to_vec(),
        }
    }
}

impl SingleParameterDomain for SlotDomain {
    /// Slot of each bidder.
    type Outcome = Vec<Option<usize>>;

    fn bidders(&self) -> usize {
        self.ad_effects.len()
    }

    fn allocate(&self, bids: &[f64]) -> Vec<Option<usize>> {
        let scores: Vec<f64> = self
            .ad_effects
            .iter()
            .zip(bids)
            .map(|(b, x)| b * x)
            .collect();
        let mut slot_of = vec![None; bids.len()];
        for (slot, bidder) in rank_by_score(&scores)
            .into_iter()
            .take(self.slot_effects.len())
            .enumerate()
        {
            slot_of[bidder] = Some(slot);
        }
        slot_of
    }

    fn level(&self, outcome: &Vec<Option<usize>>, bidder: usize) -> f64 {
        outcome[bidder].map_or(0.0, |j| self.slot_effects[j] * self.ad_effects[bidder])
    }
}

/// Outcome of a single-parameter mechanism with total payments and the
/// critical per-unit bids behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleParamResult<O> {
    pub outcome: O,
    pub payments: Vec<f64>,
    pub critical_bids: Vec<f64>,
}

/// V2: quasilinear welfare maximization with critical-value prices,
/// `payment_i = critical_bid_i * level_i`.
pub fn generalized_gsp_v2<D: SingleParameterDomain>(
    domain: &D,
    bids: &[f64],
) -> Result<SingleParamResult<D::Outcome>> {
    if bids.len() != domain.bidders() {
        return Err(Error::Dimension(format!(
            "{} bids for {} bidders",
            bids.len(),
            domain.bidders()
        )));
    }
    if let Some(b) = bids.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::InvalidParameter(format!("bid {b} must be >= 0")));
    }
    let outcome = domain.allocate(bids);
    let max_bid = 10.0 * bids.iter().copied().fold(0.0, f64::max);
    let max_bid = if max_bid > 0.0 { max_bid } else { 1.0 };

    let mut payments = Vec::with_capacity(bids.len());
    let mut critical_bids = Vec::with_capacity(bids.len());
    for i in 0..bids.len() {
        let rule = AllocationRule::new(
            |b| {
                let mut deviated = bids.to_vec();
                deviated[i] = b;
                domain.level(&domain.allocate(&deviated), i)
            },
            max_bid,
        )?;
        let critical = critical_bid(&rule, bids[i])?;
        critical_bids.push(critical);
        payments.push(critical * domain.level(&outcome, i));
    }
    Ok(SingleParamResult {
        outcome,
        payments,
        critical_bids,
    })
}

/// V2 on a slot instance; per-click prices are the critical bids.
pub fn generalized_gsp_v2_slots(instance: &SlotAuctionInstance) -> Result<SlotAssignment> {
    let result = generalized_gsp_v2(&SlotDomain::new(instance), instance.bids())?;
    Ok(SlotAssignment::from_per_click(
        instance,
        result.outcome,
        result.critical_bids,
    ))
}

impl From<SingleParamResult<usize>> for AuctionResult {
    fn from(r: SingleParamResult<usize>) -> Self {
        AuctionResult {
            outcome: r.outcome,
            payments: r.payments,
            trace: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slots::gsp;

    fn three_bidders() -> SlotAuctionInstance {
        SlotAuctionInstance::new(vec![1.0, 0.5], vec![1.0; 3], vec![10.0, 6.0, 4.0], None).unwrap()
    }

    #[test]
    fn v1_on_slots_matches_gsp() {
        let inst = three_bidders();
        let v1 = generalized_gsp_v1_slots(&inst).unwrap();
        let g = gsp(&inst);
        assert_eq!(v1.slot_of, g.slot_of);
        assert_eq!(v1.expected_payment, g.expected_payment);
    }

    #[test]
    fn v1_zero_values_pay_nothing() {
        let m = ValuationMatrix::new(vec![vec![0.0; 3]; 3]).unwrap();
        let r = generalized_gsp_v1(&m);
        assert_eq!(r.outcome, 0);
        assert_eq!(r.payments, vec![0.0; 3]);
    }

    #[test]
    fn v2_on_slots_matches_gsp() {
        let inst = three_bidders();
        let v2 = generalized_gsp_v2_slots(&inst).unwrap();
        let g = gsp(&inst);
        assert_eq!(v2.slot_of, g.slot_of);
        for i in 0..3 {
            assert!((v2.per_click_price[i] - g.per_click_price[i]).abs() < 1e-8);
            assert!((v2.expected_payment[i] - g.expected_payment[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn v2_single_item() {
        let domain = ExplicitAllocations::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = generalized_gsp_v2(&domain, &[7.0, 4.0]).unwrap();
        assert_eq!(r.outcome, 0);
        assert!((r.payments[0] - 4.0).abs() < 1e-9);
        assert_eq!(r.payments[1], 0.0);
    }

    #[test]
    fn v2_constant_level_is_free() {
        // bidder 1 gets 0.5 in every allocation
        let domain = ExplicitAllocations::new(vec![vec![1.0, 0.5], vec![0.0, 0.5]]).unwrap();
        let r = generalized_gsp_v2(&domain, &[3.0, 8.0]).unwrap();
        assert_eq!(r.payments[1], 0.0);
        assert_eq!(r.payments[0], 0.0);
    }

    #[test]
    fn v2_rejects_bad_bids() {
        let domain = ExplicitAllocations::new(vec![vec![1.0, 0.0]]).unwrap();
        assert!(generalized_gsp_v2(&domain, &[1.0]).is_err());
        assert!(generalized_gsp_v2(&domain, &[1.0, -2.0]).is_err());
        assert!(ExplicitAllocations::new(vec![]).is_err());
        assert!(ExplicitAllocations::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
