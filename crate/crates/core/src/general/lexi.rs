use super::{AuctionResult, LexiRound, LexiTrace, TypeGrid};
use crate::error::{Error, Result};
use crate::valuation::ValuationMatrix;

/// Lexicographic welfare allocation.
///
/// Each round, the unconsidered bidder with the largest attainable value over
/// the surviving outcomes wins the round (lowest index on ties) and only the
/// outcomes giving it that value survive. After every bidder has been
/// considered the lowest-index survivor is returned.
pub fn lexi_allocate(values: &ValuationMatrix) -> (usize, LexiTrace) {
    let rows: Vec<(usize, &[f64])> = values.row_refs().into_iter().enumerate().collect();
    lexi_select(&rows, values.outcomes())
}

/// Externality payments of the lexicographic auction.
///
/// Bidder `i` pays the largest value, at the outcome chosen without `i`,
/// among the other bidders whose value differs between that outcome and
/// `chosen`. It pays zero when removing it does not change the outcome.
pub fn lexi_payments(values: &ValuationMatrix, chosen: usize) -> Result<Vec<f64>> {
    let (expected, _) = lexi_allocate(values);
    if chosen != expected {
        return Err(Error::OutcomeMismatch { chosen, expected });
    }
    Ok(lexi_externalities(
        &values.row_refs(),
        values.outcomes(),
        chosen,
    ))
}

/// [`lexi_payments`] for a discrete type space: each positive payment is
/// raised to the next type above the critical value.
pub fn lexi_payments_on_grid(
    values: &ValuationMatrix,
    chosen: usize,
    grid: TypeGrid,
) -> Result<Vec<f64>> {
    let mut payments = lexi_payments(values, chosen)?;
    for p in &mut payments {
        *p = grid.next_above(*p);
    }
    Ok(payments)
}

impl AuctionResult {
    /// Runs the lexicographic auction end to end, keeping the trace.
    pub fn lexi(values: &ValuationMatrix) -> Self {
        let (outcome, trace) = lexi_allocate(values);
        let payments = lexi_externalities(&values.row_refs(), values.outcomes(), outcome);
        Self {
            outcome,
            payments,
            trace: Some(trace),
        }
    }
}

/// Core of the allocation over arbitrary finite rows. `rows` holds
/// `(bidder id, values)` in ascending id order; the ids only label the trace.
pub(crate) fn lexi_select(rows: &[(usize, &[f64])], outcomes: usize) -> (usize, LexiTrace) {
    let mut survivors: Vec<usize> = (0..outcomes).collect();
    let mut pending: Vec<(usize, &[f64])> = rows.to_vec();
    let mut rounds = Vec::with_capacity(rows.len());

    while !pending.is_empty() {
        let best: Vec<f64> = pending
            .iter()
            .map(|(_, row)| {
                survivors
                    .iter()
                    .map(|&o| row[o])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();

        let mut win = 0;
        for k in 1..pending.len() {
            if best[k] > best[win] {
                win = k;
            }
        }
        let runner_up = (0..pending.len())
            .filter(|&k| k != win)
            .fold(None::<usize>, |acc, k| match acc {
                Some(a) if best[a] >= best[k] => Some(a),
                _ => Some(k),
            })
            .map(|k| (pending[k].0, best[k]));

        let (winner, row) = pending.remove(win);
        let value = best[win];
        survivors.retain(|&o| row[o] == value);
        rounds.push(LexiRound {
            winner,
            value,
            runner_up,
            survivors: survivors.clone(),
        });
    }

    (survivors[0], LexiTrace { rounds })
}

/// Payments for `chosen` over raw rows (any finite reals).
pub(crate) fn lexi_externalities(rows: &[&[f64]], outcomes: usize, chosen: usize) -> Vec<f64> {
    (0..rows.len())
        .map(|i| {
            let others: Vec<(usize, &[f64])> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, r)| (j, *r))
                .collect();
            if others.is_empty() {
                return 0.0;
            }
            let (alt, _) = lexi_select(&others, outcomes);
            if alt == chosen {
                return 0.0;
            }
            others
                .iter()
                .filter(|(_, r)| r[alt] != r[chosen])
                .map(|(_, r)| r[alt])
                .fold(None, |acc: Option<f64>, x| {
                    Some(acc.map_or(x, |a| a.max(x)))
                })
                .unwrap_or(0.0)
        })
        .collect()
}

/// Smallest gap between `bidder` and its closest competitor in any round
/// where the two are the top candidates and the round's value is positive.
/// Rounds won at value zero keep every survivor and decide nothing.
pub(crate) fn lexi_tie_margin(rows: &[&[f64]], outcomes: usize, bidder: usize) -> f64 {
    let indexed: Vec<(usize, &[f64])> = rows.iter().copied().enumerate().collect();
    let (_, trace) = lexi_select(&indexed, outcomes);
    trace
        .rounds
        .iter()
        .filter_map(|round| {
            let (other, other_value) = round.runner_up?;
            let involved = round.winner == bidder || other == bidder;
            (involved && round.value > 0.0).then_some(round.value - other_value)
        })
        .fold(f64::INFINITY, f64::min)
}
