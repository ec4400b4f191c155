//! Bidder preferences over (value, payment) bundles.
//!
//! Every mechanism and the incentive checker share one comparator,
//! [`prefer`]. It returns [`Ordering::Greater`] when the first bundle is
//! strictly preferred, [`Ordering::Less`] when the second one is, and
//! [`Ordering::Equal`] for indifference.
//!
//! Constrained models (simple value maximizers and the ROI variants) rank
//! every feasible bundle above every infeasible one. Infeasible bundles are
//! ordered by lower payment, then higher value, so the comparator is a total
//! preorder.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// From this exponent on, alpha-hybrid comparisons use the ordering of the
/// `alpha -> infinity` limit.
pub const HYBRID_LIMIT_ALPHA: f64 = 64.0;

/// A value-payment pair as realized by one bidder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub value: f64,
    pub payment: f64,
}

impl Bundle {
    /// The bundle of a bidder who does not participate.
    pub const NOTHING: Bundle = Bundle {
        value: 0.0,
        payment: 0.0,
    };

    pub fn new(value: f64, payment: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(value) || !ok(payment) {
            return Err(Error::InvalidParameter(format!(
                "bundle ({value}, {payment}) must be finite and nonnegative"
            )));
        }
        Ok(Self { value, payment })
    }

    pub fn surplus(&self) -> f64 {
        self.value - self.payment
    }
}

/// Preference family of a bidder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum PreferenceModel {
    /// Maximizes `v - p`.
    Quasilinear,
    /// Maximizes value subject to `p <= v`; lower price breaks value ties.
    SimpleValueMax,
    /// Maximizes value subject to `(v - p) / p >= gamma`.
    RoiValueMax { gamma: f64 },
    /// Maximizes `v^alpha - p^alpha`; `alpha` may be infinite.
    AlphaHybrid { alpha: f64 },
    /// Maximizes `v^alpha - p^alpha` subject to the ROI constraint `gamma`.
    /// With `alpha = 1` this is a profit maximizer with an ROI floor.
    RoiHybrid { alpha: f64, gamma: f64 },
}

impl PreferenceModel {
    pub fn roi_value_max(gamma: f64) -> Result<Self> {
        Self::RoiValueMax { gamma }.validated()
    }

    pub fn alpha_hybrid(alpha: f64) -> Result<Self> {
        Self::AlphaHybrid { alpha }.validated()
    }

    pub fn roi_hybrid(alpha: f64, gamma: f64) -> Result<Self> {
        Self::RoiHybrid { alpha, gamma }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let check_gamma = |g: f64| {
            if g.is_finite() && g > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "gamma must be > 0, got {g}"
                )))
            }
        };
        let check_alpha = |a: f64| {
            if a >= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "alpha must be >= 1, got {a}"
                )))
            }
        };
        match self {
            Self::Quasilinear | Self::SimpleValueMax => {}
            Self::RoiValueMax { gamma } => check_gamma(gamma)?,
            Self::AlphaHybrid { alpha } => check_alpha(alpha)?,
            Self::RoiHybrid { alpha, gamma } => {
                check_alpha(alpha)?;
                check_gamma(gamma)?;
            }
        }
        Ok(self)
    }

    /// ROI requirement of the constrained models.
    pub fn roi_gamma(&self) -> Option<f64> {
        match *self {
            Self::RoiValueMax { gamma } | Self::RoiHybrid { gamma, .. } => Some(gamma),
            _ => None,
        }
    }
}

/// Value of an ROI-constrained value maximizer expressed as a willingness to
/// pay: `v / (1 + gamma)`.
pub fn roi_reduced_value(value: f64, gamma: f64) -> f64 {
    value / (1.0 + gamma)
}

/// Whether `bundle` satisfies the model's constraint.
pub fn feasible(model: &PreferenceModel, bundle: &Bundle) -> bool {
    match *model {
        PreferenceModel::Quasilinear | PreferenceModel::AlphaHybrid { .. } => true,
        PreferenceModel::SimpleValueMax => bundle.payment <= bundle.value,
        PreferenceModel::RoiValueMax { gamma } | PreferenceModel::RoiHybrid { gamma, .. } => {
            bundle.payment <= roi_reduced_value(bundle.value, gamma)
        }
    }
}

/// Compares two bundles under `model`; `Greater` means `a` is preferred.
pub fn prefer(model: &PreferenceModel, a: &Bundle, b: &Bundle) -> Ordering {
    match *model {
        PreferenceModel::Quasilinear => cmp_f64(a.surplus(), b.surplus()),
        PreferenceModel::AlphaHybrid { alpha } => cmp_hybrid(alpha, a, b),
        PreferenceModel::SimpleValueMax | PreferenceModel::RoiValueMax { .. } => {
            constrained(model, a, b, value_then_price)
        }
        PreferenceModel::RoiHybrid { alpha, .. } => {
            constrained(model, a, b, |a, b| cmp_hybrid(alpha, a, b))
        }
    }
}

fn constrained(
    model: &PreferenceModel,
    a: &Bundle,
    b: &Bundle,
    among_feasible: impl Fn(&Bundle, &Bundle) -> Ordering,
) -> Ordering {
    match (feasible(model, a), feasible(model, b)) {
        (true, true) => among_feasible(a, b),
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => cmp_f64(b.payment, a.payment).then(cmp_f64(a.value, b.value)),
    }
}

fn value_then_price(a: &Bundle, b: &Bundle) -> Ordering {
    cmp_f64(a.value, b.value).then(cmp_f64(b.payment, a.payment))
}

fn cmp_f64(x: f64, y: f64) -> Ordering {
    x.partial_cmp(&y).expect("bundle quantities are finite")
}

fn cmp_hybrid(alpha: f64, a: &Bundle, b: &Bundle) -> Ordering {
    if alpha == 1.0 {
        cmp_f64(a.surplus(), b.surplus())
    } else if alpha >= HYBRID_LIMIT_ALPHA {
        cmp_hybrid_limit(a, b)
    } else {
        HybridUtility::of(alpha, a).cmp(&HybridUtility::of(alpha, b))
    }
}

/// Ordering of `v^alpha - p^alpha` as `alpha -> infinity`: bundles with
/// `v > p` beat bundles with `v = p`, which beat bundles with `v < p`.
/// Within the first class higher value wins, then lower payment; within the
/// last class lower payment wins, then higher value. Bundles with `v = p`
/// are all indifferent.
fn cmp_hybrid_limit(a: &Bundle, b: &Bundle) -> Ordering {
    let class = |x: &Bundle| cmp_f64(x.value, x.payment);
    match class(a).cmp(&class(b)) {
        Ordering::Equal => match class(a) {
            Ordering::Greater => value_then_price(a, b),
            Ordering::Less => cmp_f64(b.payment, a.payment).then(cmp_f64(a.value, b.value)),
            Ordering::Equal => Ordering::Equal,
        },
        other => other,
    }
}

/// `v^alpha - p^alpha`, held either directly or as `sign * exp(log_mag)`
/// when the direct powers would overflow or underflow.
#[derive(Debug, Clone, Copy)]
enum HybridUtility {
    Linear(f64),
    Log { sign: f64, log_mag: f64 },
}

impl HybridUtility {
    fn of(alpha: f64, bundle: &Bundle) -> Self {
        let (v, p) = (bundle.value, bundle.payment);
        if v == p {
            return Self::Linear(0.0);
        }
        let hi = v.max(p);
        let scale = hi.powf(alpha);
        if scale.is_finite() && scale > 1e-290 {
            return Self::Linear(v.powf(alpha) - p.powf(alpha));
        }
        let lo = v.min(p);
        let sign = if v > p { 1.0 } else { -1.0 };
        let log_mag = alpha * hi.ln() + (-(lo / hi).powf(alpha)).ln_1p();
        Self::Log { sign, log_mag }
    }

    fn signed_log(self) -> (f64, f64) {
        match self {
            Self::Linear(0.0) => (0.0, f64::NEG_INFINITY),
            Self::Linear(x) => (x.signum(), x.abs().ln()),
            Self::Log { sign, log_mag } => (sign, log_mag),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        if let (Self::Linear(x), Self::Linear(y)) = (self, other) {
            return cmp_f64(*x, *y);
        }
        let (sa, la) = self.signed_log();
        let (sb, lb) = other.signed_log();
        match cmp_f64(sa, sb) {
            Ordering::Equal if sa > 0.0 => cmp_f64(la, lb),
            Ordering::Equal if sa < 0.0 => cmp_f64(lb, la),
            other => other,
        }
    }
}

/// Per-unit type of a single-parameter bidder: value at allocation level
/// `x` is `t * x`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SingleParamType(pub f64);

impl SingleParamType {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t >= 0.0 {
            Ok(Self(t))
        } else {
            Err(Error::InvalidParameter(format!(
                "type must be >= 0, got {t}"
            )))
        }
    }

    pub fn value_at(self, allocation: f64) -> f64 {
        self.0 * allocation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(v: f64, p: f64) -> Bundle {
        Bundle::new(v, p).unwrap()
    }

    #[test]
    fn simple_value_max_prefers_more_clicks_at_full_price() {
        let m = PreferenceModel::SimpleValueMax;
        assert_eq!(
            prefer(&m, &b(1000.0, 1000.0), &b(999.0, 0.0)),
            Ordering::Greater
        );
    }

    #[test]
    fn quasilinear_tie_on_equal_surplus() {
        let m = PreferenceModel::Quasilinear;
        assert_eq!(prefer(&m, &b(3.0, 1.0), &b(2.0, 0.0)), Ordering::Equal);
    }

    #[test]
    fn roi_rejects_low_return_bundle() {
        let m = PreferenceModel::roi_value_max(1.0).unwrap();
        assert_eq!(prefer(&m, &b(10.0, 6.0), &b(4.0, 2.0)), Ordering::Less);
    }

    #[test]
    fn alpha_two_compares_squares() {
        let m = PreferenceModel::alpha_hybrid(2.0).unwrap();
        assert_eq!(prefer(&m, &b(3.0, 2.0), &b(2.0, 0.0)), Ordering::Greater);
    }

    #[test]
    fn feasibility_boundaries() {
        assert!(feasible(&PreferenceModel::SimpleValueMax, &b(5.0, 5.0)));
        assert!(feasible(
            &PreferenceModel::roi_value_max(1.0).unwrap(),
            &b(10.0, 5.0)
        ));
        assert!(!feasible(
            &PreferenceModel::roi_value_max(2.0).unwrap(),
            &b(10.0, 5.0)
        ));
        assert!(feasible(&PreferenceModel::Quasilinear, &b(0.0, 7.0)));
    }

    #[test]
    fn reduced_value() {
        assert_eq!(roi_reduced_value(10.0, 1.0), 5.0);
        assert_eq!(roi_reduced_value(12.0, 2.0), 4.0);
        assert!((roi_reduced_value(7.0, 1e-12) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_parameters() {
        assert!(PreferenceModel::roi_value_max(0.0).is_err());
        assert!(PreferenceModel::roi_value_max(-1.0).is_err());
        assert!(PreferenceModel::alpha_hybrid(0.5).is_err());
        assert!(PreferenceModel::alpha_hybrid(f64::INFINITY).is_ok());
        assert!(Bundle::new(-1.0, 0.0).is_err());
        assert!(SingleParamType::new(-0.1).is_err());
    }

    #[test]
    fn infeasible_ordering_is_deterministic() {
        let m = PreferenceModel::SimpleValueMax;
        // both infeasible: lower payment first, then higher value
        assert_eq!(prefer(&m, &b(1.0, 2.0), &b(5.0, 6.0)), Ordering::Greater);
        assert_eq!(prefer(&m, &b(1.5, 2.0), &b(1.0, 2.0)), Ordering::Greater);
        // anything feasible beats anything infeasible
        assert_eq!(
            prefer(&m, &b(0.0, 0.0), &b(100.0, 100.5)),
            Ordering::Greater
        );
    }

    #[test]
    fn hybrid_limit_is_indifferent_at_zero_surplus() {
        let m = PreferenceModel::alpha_hybrid(f64::INFINITY).unwrap();
        assert_eq!(prefer(&m, &b(3.0, 3.0), &b(1.0, 1.0)), Ordering::Equal);
        assert_eq!(prefer(&m, &b(3.0, 2.9), &b(2.0, 0.0)), Ordering::Greater);
        assert_eq!(prefer(&m, &b(0.0, 1.0), &b(5.0, 2.0)), Ordering::Less);
    }

    #[test]
    fn hybrid_large_values_do_not_overflow() {
        let m = PreferenceModel::alpha_hybrid(60.0).unwrap();
        // 1e20^60 overflows f64; the log path must still order correctly
        assert_eq!(
            prefer(&m, &b(1e20, 0.0), &b(0.9e20, 0.0)),
            Ordering::Greater
        );
        assert_eq!(prefer(&m, &b(1e20, 2e20), &b(1e19, 0.0)), Ordering::Less);
        assert_eq!(prefer(&m, &b(1e-8, 0.0), &b(2e-8, 0.0)), Ordering::Less);
    }

    fn model_strategy() -> impl Strategy<Value = PreferenceModel> {
        prop_oneof![
            Just(PreferenceModel::Quasilinear),
            Just(PreferenceModel::SimpleValueMax),
            (0.1f64..5.0).prop_map(|gamma| PreferenceModel::RoiValueMax { gamma }),
            (1.0f64..80.0).prop_map(|alpha| PreferenceModel::AlphaHybrid { alpha }),
            Just(PreferenceModel::AlphaHybrid {
                alpha: f64::INFINITY
            }),
            (1.0f64..20.0, 0.1f64..3.0)
                .prop_map(|(alpha, gamma)| PreferenceModel::RoiHybrid { alpha, gamma }),
        ]
    }

    fn bundle_strategy() -> impl Strategy<Value = Bundle> {
        // a coarse grid makes exact ties reachable
        (0u32..40, 0u32..40).prop_map(|(v, p)| b(v as f64 * 0.25, p as f64 * 0.25))
    }

    proptest! {
        #[test]
        fn prefer_is_a_total_preorder(
            m in model_strategy(),
            x in bundle_strategy(),
            y in bundle_strategy(),
            z in bundle_strategy(),
        ) {
            prop_assert_eq!(prefer(&m, &x, &y), prefer(&m, &y, &x).reverse());
            prop_assert_eq!(prefer(&m, &x, &x), Ordering::Equal);
            if prefer(&m, &x, &y) != Ordering::Less && prefer(&m, &y, &z) != Ordering::Less {
                prop_assert_ne!(prefer(&m, &x, &z), Ordering::Less);
            }
        }

        // Super-quasi-linearity on the individually rational region p <= v.
        #[test]
        fn alpha_hybrid_is_super_quasilinear(
            alpha in prop_oneof![1.0f64..70.0, Just(f64::INFINITY)],
            v in 0.01f64..10.0,
            p_frac in 0.0f64..=1.0,
            v2_frac in 0.0f64..1.0,
            p2_extra in 0.0f64..10.0,
        ) {
            let a = b(v, v * p_frac);
            let v2 = v * v2_frac;
            // v2 - p2 <= v - p
            let p2 = (v2 - a.surplus()).max(0.0) + p2_extra;
            let other = b(v2, p2);
            prop_assume!(a.value > other.value && a.surplus() >= other.surplus());
            let m = PreferenceModel::AlphaHybrid { alpha };
            prop_assert_ne!(prefer(&m, &a, &other), Ordering::Less);
        }

        #[test]
        fn roi_matches_reduced_simple_value_max(
            gamma in 0.05f64..4.0,
            v1 in 0.0f64..10.0, f1 in 0.0f64..=1.0,
            v2 in 0.0f64..10.0, f2 in 0.0f64..=1.0,
        ) {
            let r1 = roi_reduced_value(v1, gamma);
            let r2 = roi_reduced_value(v2, gamma);
            let a = b(v1, r1 * f1);
            let c = b(v2, r2 * f2);
            let roi = PreferenceModel::RoiValueMax { gamma };
            prop_assume!(feasible(&roi, &a) && feasible(&roi, &c));
            let reduced = |x: &Bundle| b(roi_reduced_value(x.value, gamma), x.payment);
            prop_assert_eq!(
                prefer(&roi, &a, &c),
                prefer(&PreferenceModel::SimpleValueMax, &reduced(&a), &reduced(&c))
            );
        }

        #[test]
        fn large_alpha_agrees_with_value_maximizer(
            v1 in 0.0f64..10.0, f1 in 0.0f64..=1.0,
            v2 in 0.0f64..10.0, f2 in 0.0f64..=1.0,
        ) {
            let a = b(v1, v1 * f1);
            let c = b(v2, v2 * f2);
            prop_assume!((a.value - c.value).abs() >= 0.01);
            prop_assume!((a.value - a.payment).abs() >= 0.01 && (c.value - c.payment).abs() >= 0.01);
            prop_assume!((a.value - c.payment).abs() >= 0.01 && (c.value - a.payment).abs() >= 0.01);
            let hybrid = PreferenceModel::AlphaHybrid { alpha: 64.0 };
            prop_assert_eq!(
                prefer(&hybrid, &a, &c),
                prefer(&PreferenceModel::SimpleValueMax, &a, &c)
            );
        }
    }
}
