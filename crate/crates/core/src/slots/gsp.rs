use super::{AllocationRule, SlotAssignment, SlotAuctionInstance};

/// Generalized second price auction.
///
/// Bidders are ranked by `ad_effect * bid`; the bidder ranked `j` takes slot
/// `j` and pays, per click, the minimum bid that keeps its rank:
/// `score_{j+1} / ad_effect_j` (zero if nobody ranks below).
pub fn gsp(instance: &SlotAuctionInstance) -> SlotAssignment {
    let scores = instance.scores();
    let ranking = instance.ranking();
    let n = instance.bidders();
    let mut slot_of = vec![None; n];
    let mut per_click = vec![0.0; n];
    for (rank, &bidder) in ranking.iter().enumerate().take(instance.slots()) {
        slot_of[bidder] = Some(rank);
        per_click[bidder] = ranking
            .get(rank + 1)
            .map_or(0.0, |&next| scores[next] / instance.ad_effects()[bidder]);
    }
    SlotAssignment::from_per_click(instance, slot_of, per_click)
}

/// Expected clicks of `bidder` under GSP as a function of its own bid.
pub fn gsp_allocation_rule(instance: &SlotAuctionInstance, bidder: usize) -> AllocationRule<'_> {
    let max_bid = 10.0 * instance.bids().iter().copied().fold(0.0, f64::max);
    AllocationRule::new(
        move |bid| {
            let mut bids = instance.bids().to_vec();
            bids[bidder] = bid;
            let deviated = instance
                .with_bids(bids)
                .expect("nonnegative bid keeps the instance valid");
            gsp(&deviated).level(&deviated, bidder)
        },
        if max_bid > 0.0 { max_bid } else { 1.0 },
    )
    .expect("positive bid range")
}
