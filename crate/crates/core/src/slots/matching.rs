use super::SlotAuctionInstance;
use crate::error::Result;
use crate::valuation::{OutcomeSpace, ValuationMatrix};

/// Every assignment filling all slots with distinct bidders, in
/// lexicographic order of `(bidder in slot 1, bidder in slot 2, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingSpace {
    bidders: usize,
    /// outcome -> slot -> bidder
    assignments: Vec<Vec<usize>>,
}

impl MatchingSpace {
    pub fn enumerate(bidders: usize, slots: usize) -> Self {
        fn extend(
            prefix: &mut Vec<usize>,
            bidders: usize,
            slots: usize,
            out: &mut Vec<Vec<usize>>,
        ) {
            if prefix.len() == slots {
                out.push(prefix.clone());
                return;
            }
            for b in 0..bidders {
                if !prefix.contains(&b) {
                    prefix.push(b);
                    extend(prefix, bidders, slots, out);
                    prefix.pop();
                }
            }
        }
        let mut assignments = Vec::new();
        if slots <= bidders {
            extend(
                &mut Vec::with_capacity(slots),
                bidders,
                slots,
                &mut assignments,
            );
        }
        Self {
            bidders,
            assignments,
        }
    }

    pub fn for_instance(instance: &SlotAuctionInstance) -> Self {
        Self::enumerate(instance.bidders(), instance.slots())
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Bidder occupying each slot in `outcome`.
    pub fn slot_holders(&self, outcome: usize) -> &[usize] {
        &self.assignments[outcome]
    }

    pub fn slot_of(&self, outcome: usize) -> Vec<Option<usize>> {
        let mut slot_of = vec![None; self.bidders];
        for (slot, &bidder) in self.assignments[outcome].iter().enumerate() {
            slot_of[bidder] = Some(slot);
        }
        slot_of
    }

    pub fn position(&self, slot_of: &[Option<usize>]) -> Option<usize> {
        (0..self.len()).find(|&o| self.slot_of(o) == slot_of)
    }

    /// Value of each bidder in each matching, `clicks * per_click_value`.
    pub fn valuation(
        &self,
        instance: &SlotAuctionInstance,
        per_click_values: &[f64],
    ) -> Result<ValuationMatrix> {
        let rows = (0..self.bidders)
            .map(|i| {
                (0..self.len())
                    .map(|o| {
                        self.assignments[o]
                            .iter()
                            .position(|&b| b == i)
                            .map_or(0.0, |slot| instance.clicks(i, slot) * per_click_values[i])
                    })
                    .collect()
            })
            .collect();
        ValuationMatrix::new(rows)
    }

    /// Labels like `s1=b3,s2=b1`.
    pub fn outcome_space(&self) -> Result<OutcomeSpace> {
        OutcomeSpace::new(
            self.assignments
                .iter()
                .map(|a| {
                    a.iter()
                        .enumerate()
                        .map(|(s, b)| format!("s{}=b{}", s + 1, b + 1))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect(),
        )
    }
}
