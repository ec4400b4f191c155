//! Brute-force incentive and monotonicity checks.
//!
//! A deviation grid is evaluated for one bidder at a time: every report on
//! the grid is run through the mechanism with the other reports held fixed,
//! and the bidder's realized bundle (true value of the outcome, payment as
//! charged) is compared to the truthful one with [`prefer`].
//!
//! The checks falsify; they cannot prove. A clean grid run says nothing
//! about reports between grid points.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::general::{
    lexi_tie_margin, lp_affine_allocate, lp_affine_payments, lp_allocate, lp_payments,
    lp_score_margin, virtual_welfare_run, AffineParams, AuctionResult, VirtualValueFn,
};
use crate::preference::{prefer, roi_reduced_value, Bundle, PreferenceModel};
use crate::slots::{
    generalized_gsp_v1_slots, generalized_gsp_v2_slots, gsp, hybrid_gsp, AllocationRule,
    MatchingSpace, SlotAssignment, SlotAuctionInstance,
};
use crate::valuation::ValuationMatrix;

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_STEP: f64 = 0.05;

/// Evenly spaced points `lo, lo + step, ...`, keeping every point below
/// `hi + step / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid step must be > 0, got {step}"
            )));
        }
        if lo > hi {
            return Err(Error::InvalidParameter(format!(
                "grid lo {lo} exceeds hi {hi}"
            )));
        }
        Ok(Self { lo, hi, step })
    }

    /// Parses `lo:hi:step`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(Error::InvalidParameter(format!(
                "grid {text:?} is not of the form lo:hi:step"
            )));
        };
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("grid {text:?}: {s:?} is not a number"))
            })
        };
        Self::new(num(lo)?, num(hi)?, num(step)?)
    }

    /// `[0, 2 * max_value]` in steps of 0.05.
    pub fn default_for(max_value: f64) -> Self {
        Self {
            lo: 0.0,
            hi: 2.0 * max_value.max(0.0),
            step: DEFAULT_STEP,
        }
    }

    /// Grid points, rounded to a few digits below the step so that
    /// `0:1:0.05` yields `0.15` rather than `0.15000000000000002`.
    pub fn points(&self) -> Vec<f64> {
        let limit = self.hi + self.step / 2.0;
        let digits = (6.0 - self.step.log10().floor()).clamp(0.0, 15.0) as i32;
        let scale = 10f64.powi(digits);
        (0..)
            .map(|k| self.lo + k as f64 * self.step)
            .take_while(|&x| x < limit)
            .map(|x| (x * scale).round() / scale)
            .collect()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// A single bidder's report.
pub trait Report: Clone + Send + Sync + fmt::Debug {
    /// Candidate lies around the true report.
    fn deviations(&self, grid: &GridSpec) -> Vec<Self>;

    fn scaled(&self, factor: f64) -> Self;

    fn peak(&self) -> f64;

    fn to_vec(&self) -> Vec<f64>;
}

impl Report for f64 {
    fn deviations(&self, grid: &GridSpec) -> Vec<f64> {
        grid.points()
    }

    fn scaled(&self, factor: f64) -> f64 {
        self * factor
    }

    fn peak(&self) -> f64 {
        *self
    }

    fn to_vec(&self) -> Vec<f64> {
        vec![*self]
    }
}

/// Row reports deviate in two ways: uniform rescaling of the true row so its
/// peak lands on each grid point, and replacing one entry by a grid point.
/// That is `points * (1 + outcomes)` candidates instead of the full product
/// grid.
impl Report for Vec<f64> {
    fn deviations(&self, grid: &GridSpec) -> Vec<Vec<f64>> {
        let points = grid.points();
        let peak = self.peak();
        let mut out = Vec::with_capacity(points.len() * (1 + self.len()));
        if peak > 0.0 {
            out.extend(points.iter().map(|p| self.scaled(p / peak)));
        }
        for o in 0..self.len() {
            for &p in &points {
                let mut row = self.clone();
                row[o] = p;
                out.push(row);
            }
        }
        out
    }

    fn scaled(&self, factor: f64) -> Vec<f64> {
        self.iter().map(|v| v * factor).collect()
    }

    fn peak(&self) -> f64 {
        self.iter().copied().fold(0.0, f64::max)
    }

    fn to_vec(&self) -> Vec<f64> {
        self.clone()
    }
}

/// What a bidder reports when telling the truth: its true value, or for
/// ROI-constrained models the reduced value `v / (1 + gamma)`.
pub fn truthful_report<R: Report>(model: &PreferenceModel, truth: &R) -> R {
    match model.roi_gamma() {
        Some(gamma) => truth.scaled(roi_reduced_value(1.0, gamma)),
        None => truth.clone(),
    }
}

/// A mechanism seen from one bidder.
pub trait Mechanism: Sync {
    type Bid: Report;

    /// Runs the mechanism on `bids` and returns what `bidder` gets, valued
    /// with its true report `truth`.
    fn realize(&self, bids: &[Self::Bid], bidder: usize, truth: &Self::Bid) -> Result<Bundle>;

    /// Distance from a tie in the comparisons that decide `bidder`'s
    /// outcome at `bids`.
    fn tie_margin(&self, bids: &[Self::Bid], bidder: usize) -> f64;
}

/// General-domain mechanisms; reports are value rows.
#[derive(Debug, Clone)]
pub enum GeneralMechanism {
    Lexi,
    Lp { alpha: f64 },
    LpAffine(AffineParams),
    Virtual(Vec<VirtualValueFn>),
}

impl GeneralMechanism {
    pub fn run(&self, values: &ValuationMatrix) -> Result<AuctionResult> {
        match self {
            Self::Lexi => Ok(AuctionResult::lexi(values)),
            Self::Lp { alpha } => {
                let outcome = lp_allocate(values, *alpha)?;
                Ok(AuctionResult {
                    outcome,
                    payments: lp_payments(values, *alpha, outcome)?,
                    trace: None,
                })
            }
            Self::LpAffine(params) => {
                let outcome = lp_affine_allocate(values, params)?;
                Ok(AuctionResult {
                    outcome,
                    payments: lp_affine_payments(values, params, outcome)?,
                    trace: None,
                })
            }
            Self::Virtual(phis) => virtual_welfare_run(values, phis),
        }
    }
}

impl Mechanism for GeneralMechanism {
    type Bid = Vec<f64>;

    fn realize(&self, bids: &[Vec<f64>], bidder: usize, truth: &Vec<f64>) -> Result<Bundle> {
        let result = self.run(&ValuationMatrix::new(bids.to_vec())?)?;
        Bundle::new(truth[result.outcome], result.payments[bidder])
    }

    fn tie_margin(&self, bids: &[Vec<f64>], bidder: usize) -> f64 {
        let rows: Vec<&[f64]> = bids.iter().map(Vec::as_slice).collect();
        let outcomes = rows.first().map_or(0, |r| r.len());
        match self {
            Self::Lexi => lexi_tie_margin(&rows, outcomes, bidder),
            Self::Lp { alpha } if alpha.is_infinite() => lexi_tie_margin(&rows, outcomes, bidder),
            Self::Lp { alpha } => lp_score_margin(&rows, outcomes, *alpha),
            Self::LpAffine(params) => {
                if params.alpha.is_infinite() {
                    return lexi_tie_margin(&rows, outcomes, bidder);
                }
                let weighted: Vec<Vec<f64>> = bids
                    .iter()
                    .zip(&params.weights)
                    .map(|(r, w)| r.scaled(*w))
                    .collect();
                let mut refs: Vec<&[f64]> = weighted.iter().map(Vec::as_slice).collect();
                refs.push(&params.offsets);
                lp_score_margin(&refs, outcomes, params.alpha)
            }
            Self::Virtual(phis) => {
                let transformed: Option<Vec<Vec<f64>>> = bids
                    .iter()
                    .zip(phis)
                    .map(|(r, phi)| r.iter().map(|&v| phi.apply(v).ok()).collect())
                    .collect();
                match transformed {
                    Some(t) => {
                        let refs: Vec<&[f64]> = t.iter().map(Vec::as_slice).collect();
                        lexi_tie_margin(&refs, outcomes, bidder)
                    }
                    None => f64::INFINITY,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotRule {
    Gsp,
    GgspV1,
    GgspV2,
    Hybrid { alpha: f64 },
}

/// Slot mechanisms on a fixed click model; reports are per-click bids.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMechanism {
    slot_effects: Vec<f64>,
    ad_effects: Vec<f64>,
    rule: SlotRule,
}

impl SlotMechanism {
    pub fn new(instance: &SlotAuctionInstance, rule: SlotRule) -> Self {
        Self {
            slot_effects: instance.slot_effects().to_vec(),
            ad_effects: instance.ad_effects().to_vec(),
            rule,
        }
    }

    pub fn run(&self, instance: &SlotAuctionInstance) -> Result<SlotAssignment> {
        match self.rule {
            SlotRule::Gsp => Ok(gsp(instance)),
            SlotRule::GgspV1 => generalized_gsp_v1_slots(instance),
            SlotRule::GgspV2 => generalized_gsp_v2_slots(instance),
            SlotRule::Hybrid { alpha } => hybrid_gsp(instance, alpha),
        }
    }

    fn instance(&self, bids: &[f64]) -> Result<SlotAuctionInstance> {
        SlotAuctionInstance::new(
            self.slot_effects.clone(),
            self.ad_effects.clone(),
            bids.to_vec(),
            None,
        )
    }
}

impl Mechanism for SlotMechanism {
    type Bid = f64;

    fn realize(&self, bids: &[f64], bidder: usize, truth: &f64) -> Result<Bundle> {
        let instance = self.instance(bids)?;
        let assignment = self.run(&instance)?;
        Bundle::new(
            truth * assignment.level(&instance, bidder),
            assignment.expected_payment[bidder],
        )
    }

    fn tie_margin(&self, bids: &[f64], bidder: usize) -> f64 {
        let own = self.ad_effects[bidder] * bids[bidder];
        let score_gap = bids
            .iter()
            .zip(&self.ad_effects)
            .enumerate()
            .filter(|&(j, _)| j != bidder)
            .map(|(_, (b, beta))| (own - b * beta).abs())
            .fold(f64::INFINITY, f64::min);
        if self.rule != SlotRule::GgspV1 {
            return score_gap;
        }
        // the lexicographic rounds also compare values across slots
        let Ok(instance) = self.instance(bids) else {
            return score_gap;
        };
        let space = MatchingSpace::for_instance(&instance);
        match space.valuation(&instance, bids) {
            Ok(values) => {
                let rows = values.row_refs();
                score_gap.min(lexi_tie_margin(&rows, values.outcomes(), bidder))
            }
            Err(_) => score_gap,
        }
    }
}

/// Best deviation found for one bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub bidder: usize,
    pub truthful_bid: Vec<f64>,
    pub truthful_bundle: Bundle,
    pub best_bid: Vec<f64>,
    pub best_bundle: Bundle,
    pub profitable: bool,
    /// Grid points run through the mechanism.
    pub evaluated: usize,
    /// Grid points skipped because the deciding comparison was within eps
    /// of a tie.
    pub tie_excluded: usize,
    /// Grid points on which the mechanism returned an error.
    pub failed: usize,
    pub first_failure: Option<String>,
}

/// Whether `candidate` beats `truthful` by more than rounding: it must stay
/// strictly preferred after its payment is raised by `eps` (relative to
/// payments above 1).
fn clearly_better(
    model: &PreferenceModel,
    candidate: &Bundle,
    truthful: &Bundle,
    eps: f64,
) -> bool {
    let padded = Bundle {
        value: candidate.value,
        payment: candidate.payment + eps * candidate.payment.max(1.0),
    };
    prefer(model, candidate, truthful) == Ordering::Greater
        && prefer(model, &padded, truthful) == Ordering::Greater
}

enum Probe {
    Excluded,
    Failed(String),
    Realized(Bundle),
}

/// Runs every grid deviation of `bidder` against the fixed `profile` and
/// reports the best one. The truthful report is
/// [`truthful_report`]`(model, truth)`; `profile[bidder]` is ignored.
pub fn best_response<M: Mechanism>(
    mechanism: &M,
    model: &PreferenceModel,
    bidder: usize,
    truth: &M::Bid,
    profile: &[M::Bid],
    grid: &GridSpec,
    eps: f64,
) -> Result<DeviationReport> {
    if bidder >= profile.len() {
        return Err(Error::Dimension(format!(
            "bidder {bidder} out of range for {} reports",
            profile.len()
        )));
    }
    let with_bid = |bid: &M::Bid| {
        let mut bids = profile.to_vec();
        bids[bidder] = bid.clone();
        bids
    };
    let truthful_bid = truthful_report(model, truth);
    let truthful_bundle = mechanism.realize(&with_bid(&truthful_bid), bidder, truth)?;

    let candidates = truth.deviations(grid);
    let probes: Vec<Probe> = candidates
        .par_iter()
        .map(|bid| {
            let bids = with_bid(bid);
            if mechanism.tie_margin(&bids, bidder) <= eps {
                return Probe::Excluded;
            }
            match mechanism.realize(&bids, bidder, truth) {
                Ok(bundle) => Probe::Realized(bundle),
                Err(e) => Probe::Failed(e.to_string()),
            }
        })
        .collect();

    let mut report = DeviationReport {
        bidder,
        truthful_bid: truthful_bid.to_vec(),
        truthful_bundle,
        best_bid: truthful_bid.to_vec(),
        best_bundle: truthful_bundle,
        profitable: false,
        evaluated: 0,
        tie_excluded: 0,
        failed: 0,
        first_failure: None,
    };
    for (bid, probe) in candidates.iter().zip(probes) {
        let bundle = match probe {
            Probe::Excluded => {
                report.tie_excluded += 1;
                continue;
            }
            Probe::Failed(message) => {
                report.failed += 1;
                report.first_failure.get_or_insert(message);
                continue;
            }
            Probe::Realized(bundle) => bundle,
        };
        report.evaluated += 1;
        let profitable = clearly_better(model, &bundle, &truthful_bundle, eps);
        let replace = match (report.profitable, profitable) {
            (false, true) => true,
            (true, false) => false,
            _ => prefer(model, &bundle, &report.best_bundle) == Ordering::Greater,
        };
        if replace {
            report.best_bid = bid.to_vec();
            report.best_bundle = bundle;
            report.profitable = profitable;
        }
    }
    debug_assert!(
        !report.profitable
            || prefer(model, &report.best_bundle, &report.truthful_bundle) == Ordering::Greater
    );
    Ok(report)
}

/// Outcome of [`dsic_ae_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsicReport {
    pub passed: bool,
    pub reports: Vec<DeviationReport>,
}

impl DsicReport {
    pub fn profitable(&self) -> impl Iterator<Item = &DeviationReport> {
        self.reports.iter().filter(|r| r.profitable)
    }
}

/// Every bidder holds model `model` with true report `truths[i]` and the
/// others report truthfully. Passes iff no bidder has a profitable deviation
/// outside the tie band. Without an explicit grid, deviations cover
/// `[0, 2 * max true value]` in steps of 0.05.
pub fn dsic_ae_check<M: Mechanism>(
    mechanism: &M,
    model: &PreferenceModel,
    truths: &[M::Bid],
    grid: Option<&GridSpec>,
    eps: f64,
) -> Result<DsicReport> {
    if truths.is_empty() {
        return Err(Error::Empty);
    }
    let grid = grid.copied().unwrap_or_else(|| {
        GridSpec::default_for(truths.iter().map(Report::peak).fold(0.0, f64::max))
    });
    let profile: Vec<M::Bid> = truths.iter().map(|t| truthful_report(model, t)).collect();
    let reports = (0..truths.len())
        .map(|i| best_response(mechanism, model, i, &truths[i], &profile, &grid, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(DsicReport {
        passed: reports.iter().all(|r| !r.profitable),
        reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneViolation {
    pub prev_at: f64,
    pub prev_level: f64,
    pub at: f64,
    pub level: f64,
}

/// First point where the allocation level drops along the grid, if any.
pub fn monotone_check(rule: &AllocationRule<'_>, grid: &GridSpec) -> Option<MonotoneViolation> {
    let levels: Vec<(f64, f64)> = grid
        .points()
        .into_iter()
        .map(|b| (b, rule.level(b)))
        .collect();
    levels
        .windows(2)
        .find(|w| w[1].1 < w[0].1)
        .map(|w| MonotoneViolation {
            prev_at: w[0].0,
            prev_level: w[0].1,
            at: w[1].0,
            level: w[1].1,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slots::gsp_allocation_rule;

    fn three_bidders() -> SlotAuctionInstance {
        SlotAuctionInstance::new(vec![1.0, 0.5], vec![1.0; 3], vec![10.0, 6.0, 4.0], None).unwrap()
    }

    #[test]
    fn grid_points_and_parsing() {
        let g = GridSpec::parse("0:3:0.05").unwrap();
        assert_eq!(g.points().len(), 61);
        assert_eq!(g.points()[3], 0.15);
        assert_eq!(g.points()[60], 3.0);
        assert_eq!(GridSpec::parse("1:1:0.5").unwrap().points(), vec![1.0]);
        assert!(GridSpec::parse("0:1").is_err());
        assert!(GridSpec::parse("0:1:0").is_err());
        assert!(GridSpec::parse("2:1:0.1").is_err());
        assert!(GridSpec::parse("a:1:0.1").is_err());
    }

    #[test]
    fn row_deviations_count() {
        let row = vec![1.0, 0.5, 0.0];
        let grid = GridSpec::new(0.0, 2.0, 0.5).unwrap();
        assert_eq!(row.deviations(&grid).len(), 5 * 4);
        assert_eq!(vec![0.0, 0.0].deviations(&grid).len(), 5 * 2);
    }

    #[test]
    fn gsp_second_bidder_has_no_profitable_lie() {
        let inst = three_bidders();
        let mech = SlotMechanism::new(&inst, SlotRule::Gsp);
        let grid = GridSpec::new(0.0, 20.0, 0.05).unwrap();
        let r = best_response(
            &mech,
            &PreferenceModel::SimpleValueMax,
            1,
            &6.0,
            inst.bids(),
            &grid,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(!r.profitable);
        assert_eq!(r.truthful_bundle, Bundle::new(3.0, 2.0).unwrap());
        assert!(r.tie_excluded >= 2);
    }

    #[test]
    fn gsp_quasilinear_top_bidder() {
        // dropping to slot 2 yields (5, 2), surplus 3 < 4
        let inst = three_bidders();
        let mech = SlotMechanism::new(&inst, SlotRule::Gsp);
        let grid = GridSpec::new(0.0, 20.0, 0.05).unwrap();
        let r = best_response(
            &mech,
            &PreferenceModel::Quasilinear,
            0,
            &10.0,
            inst.bids(),
            &grid,
            DEFAULT_EPS,
        )
        .unwrap();
        assert_eq!(r.truthful_bundle, Bundle::new(10.0, 6.0).unwrap());
        assert!(!r.profitable);
        assert_eq!(
            mech.realize(&[5.0, 6.0, 4.0], 0, &10.0).unwrap(),
            Bundle::new(5.0, 2.0).unwrap()
        );
    }

    #[test]
    fn lone_lexi_bidder_gains_nothing() {
        let truths = vec![vec![0.3, 0.9, 0.1]];
        for model in [
            PreferenceModel::SimpleValueMax,
            PreferenceModel::Quasilinear,
            PreferenceModel::AlphaHybrid { alpha: 3.0 },
        ] {
            let r =
                dsic_ae_check(&GeneralMechanism::Lexi, &model, &truths, None, DEFAULT_EPS).unwrap();
            assert!(r.passed);
            assert_eq!(r.reports[0].truthful_bundle.payment, 0.0);
        }
    }

    #[test]
    fn mismatched_model_is_caught() {
        // L2 picks (1, 0) over (0.6, 0.6); a quasilinear bidder 1 shades its
        // row to flip to the second outcome for free
        let truths = vec![vec![1.0, 0.6], vec![0.0, 0.6]];
        let mech = GeneralMechanism::Lp { alpha: 2.0 };
        let r = dsic_ae_check(
            &mech,
            &PreferenceModel::Quasilinear,
            &truths,
            None,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(!r.passed);
        let lie = &r.reports[0];
        assert!(lie.profitable);
        assert!((lie.truthful_bundle.payment - 0.6).abs() < 1e-12);
        assert_eq!(lie.best_bundle, Bundle::new(0.6, 0.0).unwrap());
        // the matching model sees no gain
        let ok = dsic_ae_check(
            &mech,
            &PreferenceModel::AlphaHybrid { alpha: 2.0 },
            &truths,
            None,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(ok.passed);
    }

    #[test]
    fn roi_bidders_report_reduced_values() {
        let m = PreferenceModel::RoiValueMax { gamma: 1.0 };
        assert_eq!(truthful_report(&m, &10.0), 5.0);
        assert_eq!(truthful_report(&m, &vec![4.0, 2.0]), vec![2.0, 1.0]);
        assert_eq!(truthful_report(&PreferenceModel::Quasilinear, &3.0), 3.0);
    }

    #[test]
    fn monotonicity() {
        let grid = GridSpec::new(0.0, 10.0, 0.25).unwrap();
        let step = AllocationRule::step(0.0, vec![(4.0, 1.0)], 10.0).unwrap();
        assert_eq!(monotone_check(&step, &grid), None);
        let bump = AllocationRule::new(|b| if (2.0..=3.0).contains(&b) { 1.0 } else { 0.0 }, 10.0)
            .unwrap();
        let v = monotone_check(&bump, &grid).unwrap();
        assert_eq!(v.at, 3.25);
        let inst = three_bidders();
        for i in 0..3 {
            assert_eq!(monotone_check(&gsp_allocation_rule(&inst, i), &grid), None);
        }
    }
}
