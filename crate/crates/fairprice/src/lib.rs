//! Optimal personalized pricing under price-range regulation.
//!
//! A monopolist who can price-discriminate perfectly captures the entire
//! gains from trade. This crate computes the revenue-maximizing *price band*
//! `(p_l, p_u)` when a regulator caps either the absolute spread of
//! personalized prices (`p_u - p_l <= eps`) or their cost-adjusted ratio
//! (`(p_u - c) <= gamma * (p_l - c)`), and reports the consumer, producer,
//! and total surplus that result across the full range of regulatory
//! intensity.
//!
//! Modules:
//! - [`demand`]: willingness-to-pay distributions (closed-form families and
//!   fitted logistic demand) plus hazard-rate / regularity diagnostics.
//! - [`numerics`]: bracketed root finding and adaptive quadrature.
//! - [`welfare`]: surplus accounting for a price band.
//! - [`solver`]: the constrained revenue-maximization solves, parameter
//!   sweeps, thresholds, sensitivities, and policy comparisons.
//! - [`oracle`]: a brute-force grid optimizer used to validate the solver.
//! - [`ingest`]: CSV loading and logistic demand estimation.
//!
//! All numeric code is generic over the scalar type through the [`Real`]
//! trait; concrete `f64` aliases live at the crate root.

// Negated comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand;
pub mod ingest;
pub mod numerics;
pub mod oracle;
pub mod solver;
pub mod welfare;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Scalar type for every numeric routine in this crate: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

pub use demand::{DemandModel, Family, RegularityReport, Support};
pub use solver::{Policy, Solution, Solver, SweepTable};
pub use welfare::{PriceBand, WelfareReport};

/// `f64` demand model.
pub type DemandModel64 = demand::DemandModel<f64>;
/// `f64` price band.
pub type PriceBand64 = welfare::PriceBand<f64>;
/// `f64` welfare report.
pub type WelfareReport64 = welfare::WelfareReport<f64>;
/// `f64` regulatory policy.
pub type Policy64 = solver::Policy<f64>;
/// `f64` solved instance.
pub type Solution64 = solver::Solution<f64>;
/// `f64` sweep table.
pub type SweepTable64 = solver::SweepTable<f64>;
/// `f64` regularity report.
pub type RegularityReport64 = demand::RegularityReport<f64>;
