use std::fmt;
use std::sync::Arc;

use super::{lexi_externalities, lexi_select, AuctionResult};
use crate::error::{Error, Result};
use crate::valuation::ValuationMatrix;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const BISECTION_TOLERANCE: f64 = 1e-12;

/// Strictly increasing, continuous transform applied to one bidder's values.
#[derive(Clone)]
pub struct VirtualValueFn {
    name: String,
    forward: RealFn,
    inverse: Option<RealFn>,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for VirtualValueFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VirtualValueFn")
            .field("name", &self.name)
            .field("closed_form_inverse", &self.inverse.is_some())
            .field("domain", &(self.lo, self.hi))
            .finish()
    }
}

impl VirtualValueFn {
    /// `forward` must be strictly increasing on `[lo, hi]`; `hi` may be
    /// infinite. Without `inverse`, prices are inverted by bisection.
    pub fn new(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: Option<RealFn>,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if !(lo.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "virtual value domain [{lo}, {hi}] is empty"
            )));
        }
        Ok(Self {
            name: name.into(),
            forward: Arc::new(forward),
            inverse,
            lo,
            hi,
        })
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x, Some(Arc::new(|y| y)), 0.0, f64::INFINITY).unwrap()
    }

    pub fn square() -> Self {
        Self::new(
            "square",
            |x| x * x,
            Some(Arc::new(f64::sqrt)),
            0.0,
            f64::INFINITY,
        )
        .unwrap()
    }

    pub fn log1p() -> Self {
        Self::new(
            "log1p",
            f64::ln_1p,
            Some(Arc::new(f64::exp_m1)),
            0.0,
            f64::INFINITY,
        )
        .unwrap()
    }

    pub fn scaled(factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be > 0, got {factor}"
            )));
        }
        Self::new(
            format!("scale({factor})"),
            move |x| factor * x,
            Some(Arc::new(move |y| y / factor)),
            0.0,
            f64::INFINITY,
        )
    }

    /// Same function without its closed-form inverse, forcing bisection.
    pub fn without_inverse(mut self) -> Self {
        self.inverse = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn apply(&self, x: f64) -> Result<f64> {
        if x < self.lo || x > self.hi || x.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "value {x} outside the domain of {}",
                self.name
            )));
        }
        Ok((self.forward)(x))
    }

    fn range(&self) -> (f64, f64) {
        ((self.forward)(self.lo), (self.forward)(self.hi))
    }
}

/// Preimage of `y` under `f`: the closed-form inverse when available,
/// otherwise bisection on the domain to an argument tolerance of `1e-12`.
pub fn invert_virtual(f: &VirtualValueFn, y: f64) -> Result<f64> {
    let (ymin, ymax) = f.range();
    if y.is_nan() || y < ymin || y > ymax {
        return Err(Error::NotInvertible(y));
    }
    if let Some(inverse) = &f.inverse {
        return Ok(inverse(y).clamp(f.lo, f.hi));
    }
    if y == ymin {
        return Ok(f.lo);
    }

    let mut lo = f.lo;
    let mut hi = if f.hi.is_finite() {
        f.hi
    } else {
        // unbounded domain: grow until the bracket contains y
        let mut h = (lo.abs() + 1.0).max(1.0);
        while (f.forward)(h) < y {
            h *= 2.0;
            if !h.is_finite() {
                return Err(Error::NotInvertible(y));
            }
        }
        h
    };
    while hi - lo > BISECTION_TOLERANCE {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if (f.forward)(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// The lexicographic auction on virtual values `phi_i(v_i(o))`; virtual
/// prices `pi_i` are mapped back to `phi_i^-1(pi_i)`.
pub fn virtual_welfare_run(
    values: &ValuationMatrix,
    phis: &[VirtualValueFn],
) -> Result<AuctionResult> {
    let transformed = transform(values, phis)?;
    let rows: Vec<&[f64]> = transformed.iter().map(Vec::as_slice).collect();
    let indexed: Vec<(usize, &[f64])> = rows.iter().copied().enumerate().collect();
    let (outcome, trace) = lexi_select(&indexed, values.outcomes());
    let payments = lexi_externalities(&rows, values.outcomes(), outcome)
        .into_iter()
        .zip(phis)
        .map(|(pi, phi)| invert_virtual(phi, pi))
        .collect::<Result<Vec<_>>>()?;
    Ok(AuctionResult {
        outcome,
        payments,
        trace: Some(trace),
    })
}

pub(crate) fn transform(
    values: &ValuationMatrix,
    phis: &[VirtualValueFn],
) -> Result<Vec<Vec<f64>>> {
    if phis.len() != values.bidders() {
        return Err(Error::Dimension(format!(
            "{} virtual value functions for {} bidders",
            phis.len(),
            values.bidders()
        )));
    }
    values
        .rows()
        .iter()
        .zip(phis)
        .map(|(row, phi)| row.iter().map(|&v| phi.apply(v)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::general::{lexi_allocate, lexi_payments};

    fn worked_example() -> ValuationMatrix {
        ValuationMatrix::new(vec![
            vec![3.0, 3.0, 1.0],
            vec![0.5, 1.0, 1.0],
            vec![2.0, 1.0, 0.0],
            vec![0.5, 0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn identity_reduces_to_lexicographic() {
        let m = worked_example();
        let r = virtual_welfare_run(&m, &vec![VirtualValueFn::identity(); 4]).unwrap();
        assert_eq!(r.outcome, 0);
        assert_eq!(r.payments, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn squaring_keeps_example_result() {
        let m = worked_example();
        let r = virtual_welfare_run(&m, &vec![VirtualValueFn::square(); 4]).unwrap();
        assert_eq!(r.outcome, 0);
        assert_eq!(r.payments, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn positive_scaling_inverts_back() {
        let m = worked_example();
        let phis = vec![VirtualValueFn::scaled(2.0).unwrap(); 4];
        let r = virtual_welfare_run(&m, &phis).unwrap();
        let (o, _) = lexi_allocate(&m);
        assert_eq!(r.outcome, o);
        assert_eq!(r.payments, lexi_payments(&m, o).unwrap());
    }

    #[test]
    fn per_bidder_transforms_change_the_winner() {
        // bidder 1 values o2 less, but its transform triples it
        let m = ValuationMatrix::new(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let phis = vec![
            VirtualValueFn::identity(),
            VirtualValueFn::scaled(3.0).unwrap(),
        ];
        let r = virtual_welfare_run(&m, &phis).unwrap();
        assert_eq!(r.outcome, 1);
        // virtual price of bidder 1 is bidder 0's virtual 2, i.e. 2/3 real
        assert!((r.payments[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.payments[0], 0.0);
    }

    #[test]
    fn inversion_closed_form_and_bisection() {
        assert_eq!(invert_virtual(&VirtualValueFn::square(), 9.0).unwrap(), 3.0);
        assert_eq!(
            invert_virtual(&VirtualValueFn::identity(), 4.25).unwrap(),
            4.25
        );
        let y = 3f64.ln();
        let closed = invert_virtual(&VirtualValueFn::log1p(), y).unwrap();
        let bisected = invert_virtual(&VirtualValueFn::log1p().without_inverse(), y).unwrap();
        assert!((closed - 2.0).abs() < 1e-9);
        assert!((bisected - y.exp_m1()).abs() < 1e-9);
        let sq = invert_virtual(&VirtualValueFn::square().without_inverse(), 2.0).unwrap();
        assert!((sq - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn out_of_range_prices_are_rejected() {
        let bounded = VirtualValueFn::new("clip", |x| x, None, 0.0, 1.0).unwrap();
        assert_eq!(
            invert_virtual(&bounded, 2.0),
            Err(Error::NotInvertible(2.0))
        );
        assert_eq!(
            invert_virtual(&VirtualValueFn::square(), -1.0),
            Err(Error::NotInvertible(-1.0))
        );
        // bidder 0's virtual range is [5, 6]; its virtual price 0.5 comes
        // from bidder 1 and has no preimage
        let shifted = VirtualValueFn::new("shift", |x| x + 5.0, None, 0.0, 1.0).unwrap();
        let m = ValuationMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let phis = vec![shifted, VirtualValueFn::identity()];
        assert!(matches!(
            virtual_welfare_run(&m, &phis),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn values_outside_domain_are_rejected() {
        let m = ValuationMatrix::new(vec![vec![5.0]]).unwrap();
        let bounded = VirtualValueFn::new("clip", |x| x, None, 0.0, 1.0).unwrap();
        assert!(virtual_welfare_run(&m, &[bounded]).is_err());
        assert!(virtual_welfare_run(&m, &[]).is_err());
    }
}
