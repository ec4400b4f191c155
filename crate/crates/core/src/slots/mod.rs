//! Separable position auctions.
//!
//! Ad `i` shown in slot `j` is clicked with probability
//! `slot_effect[j] * ad_effect[i]`; bids and prices are per click.

mod critical;
mod ggsp;
mod gsp;
mod hybrid;
mod matching;

use serde::{Deserialize, Serialize};

pub use critical::{
    critical_bid, critical_price, critical_price_on_grid, AllocationRule, PROBE_POINTS,
};
pub use ggsp::{
    generalized_gsp_v1, generalized_gsp_v1_slots, generalized_gsp_v2, generalized_gsp_v2_slots,
    ExplicitAllocations, SingleParamResult, SingleParameterDomain, SlotDomain,
};
pub use gsp::{gsp, gsp_allocation_rule};
pub use hybrid::hybrid_gsp;
pub use matching::MatchingSpace;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAuctionInstance {
    slot_effects: Vec<f64>,
    ad_effects: Vec<f64>,
    bids: Vec<f64>,
    types: Option<Vec<f64>>,
}

impl SlotAuctionInstance {
    pub fn new(
        slot_effects: Vec<f64>,
        ad_effects: Vec<f64>,
        bids: Vec<f64>,
        types: Option<Vec<f64>>,
    ) -> Result<Self> {
        if slot_effects.is_empty() || bids.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(a) = slot_effects.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "slot effect {a} outside (0, 1]"
            )));
        }
        if slot_effects.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::AlphaNotDescending);
        }
        if ad_effects.len() != bids.len() {
            return Err(Error::Dimension(format!(
                "{} ad effects for {} bids",
                ad_effects.len(),
                bids.len()
            )));
        }
        if slot_effects.len() > bids.len() {
            return Err(Error::Dimension(format!(
                "{} slots for only {} bidders",
                slot_effects.len(),
                bids.len()
            )));
        }
        if let Some(b) = ad_effects.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "ad effect {b} must be > 0"
            )));
        }
        let nonneg = |x: &f64| x.is_finite() && *x >= 0.0;
        if let Some(b) = bids.iter().find(|b| !nonneg(b)) {
            return Err(Error::InvalidParameter(format!("bid {b} must be >= 0")));
        }
        if let Some(types) = &types {
            if types.len() != bids.len() {
                return Err(Error::Dimension(format!(
                    "{} types for {} bids",
                    types.len(),
                    bids.len()
                )));
            }
            if let Some(t) = types.iter().find(|t| !nonneg(t)) {
                return Err(Error::InvalidParameter(format!("type {t} must be >= 0")));
            }
        }
        Ok(Self {
            slot_effects,
            ad_effects,
            bids,
            types,
        })
    }

    pub fn slots(&self) -> usize {
        self.slot_effects.len()
    }

    pub fn bidders(&self) -> usize {
        self.bids.len()
    }

    pub fn slot_effects(&self) -> &[f64] {
        &self.slot_effects
    }

    /// Slot effect of slot `j`, zero past the last slot.
    pub fn slot_effect(&self, j: usize) -> f64 {
        self.slot_effects.get(j).copied().unwrap_or(0.0)
    }

    pub fn ad_effects(&self) -> &[f64] {
        &self.ad_effects
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn types(&self) -> Option<&[f64]> {
        self.types.as_deref()
    }

    /// Per-click true values, falling back to the bids.
    pub fn true_types(&self) -> &[f64] {
        self.types.as_deref().unwrap_or(&self.bids)
    }

    pub fn with_bids(&self, bids: Vec<f64>) -> Result<Self> {
        Self::new(
            self.slot_effects.clone(),
            self.ad_effects.clone(),
            bids,
            self.types.clone(),
        )
    }

    /// Ranking scores `ad_effect * bid`.
    pub fn scores(&self) -> Vec<f64> {
        self.ad_effects
            .iter()
            .zip(&self.bids)
            .map(|(b, bid)| b * bid)
            .collect()
    }

    /// Bidder indices by descending score, lower index first on ties.
    pub fn ranking(&self) -> Vec<usize> {
        rank_by_score(&self.scores())
    }

    /// Expected clicks of bidder `i` in slot `j`.
    pub fn clicks(&self, bidder: usize, slot: usize) -> f64 {
        self.slot_effect(slot) * self.ad_effects[bidder]
    }
}

pub(crate) fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Slot assignment with per-click and expected (per-impression) prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub slot_of: Vec<Option<usize>>,
    pub per_click_price: Vec<f64>,
    pub expected_payment: Vec<f64>,
}

impl SlotAssignment {
    /// Builds the assignment from per-click prices; unassigned bidders pay 0.
    pub(crate) fn from_per_click(
        instance: &SlotAuctionInstance,
        slot_of: Vec<Option<usize>>,
        per_click: Vec<f64>,
    ) -> Self {
        let per_click_price: Vec<f64> = slot_of
            .iter()
            .zip(per_click)
            .map(|(slot, p)| if slot.is_some() { p } else { 0.0 })
            .collect();
        let expected_payment = slot_of
            .iter()
            .enumerate()
            .map(|(i, slot)| slot.map_or(0.0, |j| per_click_price[i] * instance.clicks(i, j)))
            .collect();
        Self {
            slot_of,
            per_click_price,
            expected_payment,
        }
    }

    /// Builds the assignment from expected payments: per-click price is the
    /// payment divided by expected clicks.
    pub(crate) fn from_expected(
        instance: &SlotAuctionInstance,
        slot_of: Vec<Option<usize>>,
        expected: &[f64],
    ) -> Self {
        let per_click = slot_of
            .iter()
            .enumerate()
            .map(|(i, slot)| slot.map_or(0.0, |j| expected[i] / instance.clicks(i, j)))
            .collect();
        Self::from_per_click(instance, slot_of, per_click)
    }

    /// Allocation level (expected clicks) of bidder `i`.
    pub fn level(&self, instance: &SlotAuctionInstance, bidder: usize) -> f64 {
        self.slot_of[bidder].map_or(0.0, |j| instance.clicks(bidder, j))
    }
}
