//! Auctions for value-maximizing bidders.
//!
//! Value maximizers want the most valuable outcome they can afford, subject
//! to a constraint such as `p <= v` or a return-on-investment floor. This
//! crate implements mechanisms that are truthful for such bidders, from the
//! lexicographic welfare auction on an arbitrary outcome space to GSP and its
//! variants for sponsored-search slots, together with brute-force checkers
//! for incentive compatibility and ROI robustness.

pub mod error;
pub mod general;
pub mod generate;
pub mod io;
pub mod preference;
pub mod robustness;
pub mod slots;
pub mod valuation;
pub mod verification;

pub use error::{Error, Result};
pub use general::{AuctionResult, LexiTrace};
pub use preference::{prefer, Bundle, PreferenceModel};
pub use slots::{SlotAssignment, SlotAuctionInstance};
pub use valuation::{OutcomeSpace, ValuationMatrix};
