//! Brute-force grid optimizer.
//!
//! Deliberately naive independent check on the solver: enumerate candidate
//! lower prices on a uniform grid, enforce the policy constraint exactly,
//! and keep the band with the largest producer surplus. Producer surplus is
//! smooth and single-peaked along the constraint, so the grid optimum's
//! surplus is within `O(step^2)` of the true one even though the band itself
//! is only step-accurate.

use crate::demand::DemandModel;
use crate::solver::{Policy, Solution, SolverError};
use crate::welfare::{self, PriceBand, WelfareConfig};
use crate::Real;

/// Search grid: `n_points` lower-price candidates on `[cost, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<R> {
    pub n_points: usize,
    /// Upper end of the candidate range; defaults to the model's effective
    /// upper bound at tail mass `1e-12`.
    pub upper: Option<R>,
}

impl<R> Default for GridSpec<R> {
    fn default() -> Self {
        Self {
            n_points: 4001,
            upper: None,
        }
    }
}

/// Exhaustive search over grid bands satisfying `policy` at marginal cost
/// `cost`. Welfare of every candidate comes from the welfare module; the
/// winner is re-packaged as a [`Solution`] whose `foc_residual` reports the
/// first-order condition at the grid optimum.
pub fn brute_force_solve<R: Real>(
    model: &DemandModel<R>,
    policy: Policy<R>,
    cost: R,
    grid: &GridSpec<R>,
    cfg: &WelfareConfig<R>,
) -> Result<Solution<R>, SolverError<R>> {
    if grid.n_points < 101 {
        return Err(SolverError::OracleGrid {
            points: grid.n_points,
        });
    }
    match policy {
        Policy::Difference { eps } if !eps.is_finite() || eps < R::zero() => {
            return Err(SolverError::PolicyRange {
                name: "eps",
                requested: eps,
                limit: R::infinity(),
            });
        }
        Policy::Ratio { gamma } if !gamma.is_finite() || gamma < R::one() => {
            return Err(SolverError::PolicyRange {
                name: "gamma",
                requested: gamma,
                limit: R::one(),
            });
        }
        _ => {}
    }

    let support_upper = model.support().upper;
    let default_upper = model.effective_upper(R::of(1e-12));
    let mut hi = grid.upper.unwrap_or(default_upper).min(support_upper);
    // Candidates must keep the implied upper price inside the support.
    hi = match policy {
        Policy::Difference { eps } => hi.min(support_upper - eps),
        Policy::Ratio { gamma } => hi.min(cost + (support_upper - cost) / gamma),
    };
    if !(hi > cost) {
        return Err(SolverError::PolicyRange {
            name: "cost",
            requested: cost,
            limit: hi,
        });
    }

    let n = grid.n_points;
    let step = (hi - cost) / R::of((n - 1) as f64);
    let band_for = |lower: R| -> Result<PriceBand<R>, SolverError<R>> {
        let upper = match policy {
            Policy::Difference { eps } => lower + eps,
            Policy::Ratio { gamma } => cost + gamma * (lower - cost),
        };
        Ok(PriceBand::new(lower, upper.min(support_upper).max(lower))?)
    };

    let mut best_lower = cost;
    let mut best_ps = R::neg_infinity();
    for i in 0..n {
        let lower = cost + step * R::of(i as f64);
        let band = band_for(lower)?;
        let ps = welfare::producer_surplus(model, &band, cost, cfg)?;
        if ps > best_ps {
            best_ps = ps;
            best_lower = lower;
        }
    }

    let band = band_for(best_lower)?;
    let report = welfare::report(model, &band, cost, cfg)?;
    let shifted = model.shift(cost).map_err(SolverError::Demand)?;
    let q = best_lower - cost;
    let foc_residual = match policy {
        Policy::Difference { eps } => shifted.survival(q + eps) - q * shifted.pdf(q),
        Policy::Ratio { gamma } => gamma * shifted.survival(gamma * q) - q * shifted.pdf(q),
    };
    Ok(Solution {
        policy,
        band,
        welfare: report,
        foc_residual,
        binding: true,
        warnings: Vec::new(),
    })
}
