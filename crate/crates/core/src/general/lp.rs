use serde::{Deserialize, Serialize};

use super::{lexi_externalities, lexi_select, validate_alpha};
use crate::error::{Error, Result};
use crate::valuation::ValuationMatrix;

/// Sums of `v^alpha` that fall below this (after scaling by the largest
/// value involved) are rounding noise and clamp to zero.
const NEGATIVE_EXTERNALITY_SLACK: f64 = 1e-12;

/// Weights and offsets of an `L^alpha` affine maximizer, which chooses the
/// outcome maximizing `z(o)^alpha + sum_i (w_i v_i(o))^alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
    pub alpha: f64,
}

impl AffineParams {
    pub fn new(weights: Vec<f64>, offsets: Vec<f64>, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!("weight {w} must be > 0")));
        }
        if let Some(z) = offsets.iter().find(|z| !(z.is_finite() && **z >= 0.0)) {
            return Err(Error::InvalidParameter(format!("offset {z} must be >= 0")));
        }
        Ok(Self {
            weights,
            offsets,
            alpha,
        })
    }

    /// Unit weights and zero offsets: plain `L^alpha` welfare.
    pub fn unweighted(bidders: usize, outcomes: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![1.0; bidders], vec![0.0; outcomes], alpha)
    }
}

/// Outcome maximizing the `L^alpha` norm of the bidders' values.
/// `alpha = inf` is the lexicographic allocation.
pub fn lp_allocate(values: &ValuationMatrix, alpha: f64) -> Result<usize> {
    validate_alpha(alpha)?;
    Ok(lp_select(&values.row_refs(), values.outcomes(), alpha))
}

/// `L^alpha` externality payments
/// `p_i = (sum_{j != i} v_j(o_-i)^alpha - v_j(o*)^alpha)^(1/alpha)`, where
/// `o_-i` is the allocation with bidder `i` removed.
pub fn lp_payments(values: &ValuationMatrix, alpha: f64, chosen: usize) -> Result<Vec<f64>> {
    let expected = lp_allocate(values, alpha)?;
    if chosen != expected {
        return Err(Error::OutcomeMismatch { chosen, expected });
    }
    let rows = values.row_refs();
    if alpha.is_infinite() {
        return Ok(lexi_externalities(&rows, values.outcomes(), chosen));
    }
    (0..rows.len())
        .map(|i| lp_externality(&rows, values.outcomes(), i, chosen, alpha))
        .collect()
}

/// Outcome maximizing `z(o)^alpha + sum_i (w_i v_i(o))^alpha`; with
/// `alpha = inf` the offsets act as one more (lowest-priority) bidder in the
/// lexicographic allocation.
pub fn lp_affine_allocate(values: &ValuationMatrix, params: &AffineParams) -> Result<usize> {
    if params.weights.len() != values.bidders() {
        return Err(Error::Dimension(format!(
            "{} weights for {} bidders",
            params.weights.len(),
            values.bidders()
        )));
    }
    if params.offsets.len() != values.outcomes() {
        return Err(Error::Dimension(format!(
            "{} offsets for {} outcomes",
            params.offsets.len(),
            values.outcomes()
        )));
    }
    let weighted = weighted_rows(values, params);
    Ok(lp_select(
        &affine_rows(&weighted, params),
        values.outcomes(),
        params.alpha,
    ))
}

/// Externality payments of the affine maximizer, in each bidder's own
/// units: the `L^alpha` externality on the weighted values and the offset
/// term, divided by the bidder's weight. Unit weights and zero offsets give
/// [`lp_payments`].
pub fn lp_affine_payments(
    values: &ValuationMatrix,
    params: &AffineParams,
    chosen: usize,
) -> Result<Vec<f64>> {
    let expected = lp_affine_allocate(values, params)?;
    if chosen != expected {
        return Err(Error::OutcomeMismatch { chosen, expected });
    }
    let weighted = weighted_rows(values, params);
    let rows = affine_rows(&weighted, params);
    let outcomes = values.outcomes();
    let raw = if params.alpha.is_infinite() {
        lexi_externalities(&rows, outcomes, chosen)
    } else {
        (0..values.bidders())
            .map(|i| lp_externality(&rows, outcomes, i, chosen, params.alpha))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(raw
        .into_iter()
        .zip(&params.weights)
        .map(|(p, w)| p / w)
        .collect())
}

fn weighted_rows(values: &ValuationMatrix, params: &AffineParams) -> Vec<Vec<f64>> {
    values
        .rows()
        .iter()
        .zip(&params.weights)
        .map(|(row, w)| row.iter().map(|v| w * v).collect())
        .collect()
}

/// Weighted rows followed by the offsets, which act as one more bidder
/// that is never removed and comes last in tie-breaks.
fn affine_rows<'a>(weighted: &'a [Vec<f64>], params: &'a AffineParams) -> Vec<&'a [f64]> {
    let mut rows: Vec<&[f64]> = weighted.iter().map(Vec::as_slice).collect();
    rows.push(&params.offsets);
    rows
}

pub(crate) fn lp_select(rows: &[&[f64]], outcomes: usize, alpha: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    if alpha.is_infinite() {
        let indexed: Vec<(usize, &[f64])> = rows.iter().copied().enumerate().collect();
        return lexi_select(&indexed, outcomes).0;
    }
    first_argmax(&column_scores(rows, outcomes, alpha))
}

/// Relative gap between the best and second-best outcome scores.
pub(crate) fn lp_score_margin(rows: &[&[f64]], outcomes: usize, alpha: f64) -> f64 {
    let mut scores = column_scores(rows, outcomes, alpha);
    scores.sort_by(|a, b| b.total_cmp(a));
    match scores.as_slice() {
        [best, second, ..] if *best > 0.0 => (best - second) / best,
        _ => f64::INFINITY,
    }
}

/// Per-outcome objective, monotone in the `L^alpha` norm. For `alpha > 1`
/// every term is divided by the largest entry before exponentiation, which
/// keeps `alpha` up to a few hundred free of overflow.
fn column_scores(rows: &[&[f64]], outcomes: usize, alpha: f64) -> Vec<f64> {
    if alpha == 1.0 {
        return (0..outcomes)
            .map(|o| rows.iter().map(|r| r[o]).sum())
            .collect();
    }
    let scale = rows
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![0.0; outcomes];
    }
    (0..outcomes)
        .map(|o| rows.iter().map(|r| (r[o] / scale).powf(alpha)).sum())
        .collect()
}

fn first_argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (o, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = o;
        }
    }
    best
}

fn lp_externality(
    rows: &[&[f64]],
    outcomes: usize,
    bidder: usize,
    chosen: usize,
    alpha: f64,
) -> Result<f64> {
    let others: Vec<&[f64]> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != bidder)
        .map(|(_, r)| *r)
        .collect();
    if others.is_empty() {
        return Ok(0.0);
    }
    let alt = lp_select(&others, outcomes, alpha);
    if alt == chosen {
        return Ok(0.0);
    }

    let scale = if alpha == 1.0 {
        1.0
    } else {
        others
            .iter()
            .map(|r| r[alt].max(r[chosen]))
            .fold(0.0, f64::max)
    };
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = others
        .iter()
        .map(|r| (r[alt] / scale).powf(alpha) - (r[chosen] / scale).powf(alpha))
        .sum();
    if sum < 0.0 {
        if sum > -NEGATIVE_EXTERNALITY_SLACK {
            return Ok(0.0);
        }
        return Err(Error::NegativeExternality(sum));
    }
    Ok(scale * sum.powf(1.0 / alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::general::lexi_payments;

    fn worked_example() -> ValuationMatrix {
        ValuationMatrix::new(vec![
            vec![3.0, 3.0, 1.0],
            vec![0.5, 1.0, 1.0],
            vec![2.0, 1.0, 0.0],
            vec![0.5, 0.5, 0.5],
        ])
        .unwrap()
    }

    /// Brute-force VCG: enumerate outcomes by summed value, charge
    /// others' best welfare without `i` minus others' welfare at the choice.
    fn vcg_oracle(m: &ValuationMatrix) -> (usize, Vec<f64>) {
        let welfare = |o: usize, skip: Option<usize>| -> f64 {
            (0..m.bidders())
                .filter(|&j| Some(j) != skip)
                .map(|j| m.value(j, o))
                .sum()
        };
        let best = |skip: Option<usize>| {
            (0..m.outcomes()).fold(0, |b, o| {
                if welfare(o, skip) > welfare(b, skip) {
                    o
                } else {
                    b
                }
            })
        };
        let chosen = best(None);
        let pay = (0..m.bidders())
            .map(|i| welfare(best(Some(i)), Some(i)) - welfare(chosen, Some(i)))
            .collect();
        (chosen, pay)
    }

    #[test]
    fn alpha_one_on_worked_example() {
        let m = worked_example();
        assert_eq!(lp_allocate(&m, 1.0).unwrap(), 0);
        let p = lp_payments(&m, 1.0, 0).unwrap();
        let expected = [0.0, 0.0, 0.5, 0.0];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{p:?}");
        }
        let (o, oracle) = vcg_oracle(&m);
        assert_eq!(o, 0);
        assert_eq!(oracle, p);
    }

    #[test]
    fn alpha_infinity_is_lexicographic() {
        let m = worked_example();
        assert_eq!(lp_allocate(&m, f64::INFINITY).unwrap(), 0);
        assert_eq!(
            lp_payments(&m, f64::INFINITY, 0).unwrap(),
            lexi_payments(&m, 0).unwrap()
        );
    }

    #[test]
    fn single_nonzero_column() {
        let m = ValuationMatrix::new(vec![vec![0.0, 0.0, 2.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(lp_allocate(&m, 1.0).unwrap(), 2);
        assert_eq!(lp_allocate(&m, 3.0).unwrap(), 2);
    }

    #[test]
    fn unchanged_outcome_costs_nothing() {
        let m = ValuationMatrix::new(vec![vec![4.0, 1.0], vec![3.0, 2.0]]).unwrap();
        let o = lp_allocate(&m, 2.0).unwrap();
        assert_eq!(o, 0);
        // without bidder 0, bidder 1 still prefers o1
        assert_eq!(lp_payments(&m, 2.0, o).unwrap()[0], 0.0);
    }

    #[test]
    fn two_norm_payment_formula() {
        // o1: (3, 0), o2: (0, 2). L2 picks o1; bidder 0 pays sqrt(2^2 - 0) = 2
        let m = ValuationMatrix::new(vec![vec![3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(lp_allocate(&m, 2.0).unwrap(), 0);
        let p = lp_payments(&m, 2.0, 0).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn high_alpha_does_not_overflow() {
        let m = ValuationMatrix::new(vec![vec![1e200, 0.0], vec![0.0, 9e199]]).unwrap();
        assert_eq!(lp_allocate(&m, 64.0).unwrap(), 0);
        let p = lp_payments(&m, 64.0, 0).unwrap();
        assert!((p[0] / 9e199 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alpha_and_mismatch() {
        let m = worked_example();
        assert!(lp_allocate(&m, 0.5).is_err());
        assert!(matches!(
            lp_payments(&m, 1.0, 2),
            Err(Error::OutcomeMismatch { .. })
        ));
    }

    #[test]
    fn affine_reduces_to_plain_lp() {
        let m = worked_example();
        for alpha in [1.0, 2.0, 7.5, f64::INFINITY] {
            let params = AffineParams::unweighted(4, 3, alpha).unwrap();
            assert_eq!(
                lp_affine_allocate(&m, &params).unwrap(),
                lp_allocate(&m, alpha).unwrap()
            );
        }
    }

    #[test]
    fn affine_offsets_and_weights() {
        let m = ValuationMatrix::new(vec![vec![1.0, 2.0]]).unwrap();
        let params = AffineParams::new(vec![10.0], vec![100.0, 0.0], 1.0).unwrap();
        assert_eq!(lp_affine_allocate(&m, &params).unwrap(), 0);

        let zeros = ValuationMatrix::new(vec![vec![0.0; 3]; 2]).unwrap();
        for alpha in [1.0, 2.0, f64::INFINITY] {
            let params = AffineParams::new(vec![1.0, 1.0], vec![0.1, 0.7, 0.3], alpha).unwrap();
            assert_eq!(lp_affine_allocate(&zeros, &params).unwrap(), 1);
        }
    }

    #[test]
    fn affine_validation() {
        assert!(AffineParams::new(vec![0.0], vec![0.0], 1.0).is_err());
        assert!(AffineParams::new(vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(AffineParams::new(vec![1.0], vec![0.0], 0.9).is_err());
        let m = worked_example();
        let wrong = AffineParams::unweighted(3, 3, 1.0).unwrap();
        assert!(matches!(
            lp_affine_allocate(&m, &wrong),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn affine_payments_reduce_and_rescale() {
        let m = worked_example();
        for alpha in [1.0, 2.0, f64::INFINITY] {
            let params = AffineParams::unweighted(4, 3, alpha).unwrap();
            let o = lp_affine_allocate(&m, &params).unwrap();
            assert_eq!(
                lp_affine_payments(&m, &params, o).unwrap(),
                lp_payments(&m, alpha, o).unwrap()
            );
        }
        // weighted VCG: bidder 1 displaces 3 units of weighted welfare at weight 2
        let m = ValuationMatrix::new(vec![vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let params = AffineParams::new(vec![2.0, 1.0], vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(lp_affine_allocate(&m, &params).unwrap(), 0);
        assert_eq!(lp_affine_payments(&m, &params, 0).unwrap(), vec![1.5, 0.0]);
        assert!(lp_affine_payments(&m, &params, 1).is_err());
    }
}
