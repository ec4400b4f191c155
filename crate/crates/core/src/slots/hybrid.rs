use super::{MatchingSpace, SlotAssignment, SlotAuctionInstance};
use crate::error::Result;
use crate::general::{lp_allocate, lp_payments};

/// Hybrid GSP: the welfare-maximizing (assortative) matching, priced with
/// `L^alpha` externality payments over the space of matchings.
///
/// `alpha = 1` gives VCG prices, `alpha = inf` gives GSP prices.
pub fn hybrid_gsp(instance: &SlotAuctionInstance, alpha: f64) -> Result<SlotAssignment> {
    let space = MatchingSpace::for_instance(instance);
    let values = space.valuation(instance, instance.bids())?;
    let chosen = lp_allocate(&values, alpha)?;
    let payments = lp_payments(&values, alpha, chosen)?;
    Ok(SlotAssignment::from_expected(
        instance,
        space.slot_of(chosen),
        &payments,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slots::gsp;

    fn three_bidders() -> SlotAuctionInstance {
        SlotAuctionInstance::new(vec![1.0, 0.5], vec![1.0; 3], vec![10.0, 6.0, 4.0], None).unwrap()
    }

    #[test]
    fn alpha_one_is_vcg() {
        let a = hybrid_gsp(&three_bidders(), 1.0).unwrap();
        assert_eq!(a.slot_of, vec![Some(0), Some(1), None]);
        let expected = [5.0, 2.0, 0.0];
        for (got, want) in a.expected_payment.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{:?}", a.expected_payment);
        }
    }

    #[test]
    fn alpha_infinity_is_gsp() {
        let inst = three_bidders();
        let a = hybrid_gsp(&inst, f64::INFINITY).unwrap();
        assert_eq!(a.per_click_price, gsp(&inst).per_click_price);
    }

    #[test]
    fn intermediate_alpha_lies_between() {
        let inst = three_bidders();
        let a = hybrid_gsp(&inst, 3.0).unwrap();
        // top bidder: VCG per-click 5, GSP per-click 6
        assert!(a.per_click_price[0] > 5.0 && a.per_click_price[0] < 6.0);
    }

    #[test]
    fn lone_bidder() {
        let inst = SlotAuctionInstance::new(vec![1.0], vec![1.0], vec![2.0], None).unwrap();
        for alpha in [1.0, 2.0, f64::INFINITY] {
            assert_eq!(
                hybrid_gsp(&inst, alpha).unwrap().expected_payment,
                vec![0.0]
            );
        }
    }
}
