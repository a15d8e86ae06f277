//! Grid-based hazard-rate and regularity diagnostics.
//!
//! Certification is by finite differences on an evaluation grid, not proof:
//! fitted demand curves show hazard fluctuations at rounding scale, so the
//! monotone-hazard check tolerates slopes down to `-1e-6 * max(1, h)`.

use super::{DemandError, DemandModel};
use crate::Real;

/// Grid request for [`check_regularity`]; `upper` defaults to the
/// effective upper bound of the model at tail mass `1e-12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticGrid<R> {
    pub points: usize,
    pub upper: Option<R>,
}

impl<R> Default for DiagnosticGrid<R> {
    fn default() -> Self {
        Self {
            points: 1001,
            upper: None,
        }
    }
}

/// The grid actually evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridUsed<R> {
    pub points: usize,
    pub lower: R,
    pub upper: R,
}

/// Outcome of the regularity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport<R> {
    /// Hazard rate non-decreasing across the grid (within slope tolerance).
    pub is_mhr: bool,
    /// Grid segments where the hazard decreases: `(v, h(v), h(v + step))`.
    pub mhr_violations: Vec<(R, R, R)>,
    /// Largest `k` for which `k`-strong regularity is certified; `None`
    /// when the virtual value is not monotone, infinite when it diverges.
    pub k_strong_regular_up_to: Option<R>,
    /// Virtual value strictly increasing across the grid.
    pub w_monotone: bool,
    /// Whether the queried `k` falls below the certified bound.
    pub certifies_k: bool,
    pub grid: GridUsed<R>,
}

const MHR_SLOPE_TOL: f64 = 1e-6;

/// Evaluates hazard-rate monotonicity and strong regularity of `model` on a
/// grid of `grid.points` values over `[0, upper]`, and reports the largest
/// certified regularity level against the queried `k`.
pub fn check_regularity<R: Real>(
    model: &DemandModel<R>,
    k: R,
    grid: &DiagnosticGrid<R>,
) -> Result<RegularityReport<R>, DemandError<R>> {
    if grid.points < 16 {
        return Err(DemandError::GridTooCoarse {
            points: grid.points,
        });
    }
    let default_upper = model.effective_upper(R::of(1e-12));
    let upper = grid
        .upper
        .unwrap_or(default_upper)
        .min(model.support().upper);
    let n = grid.points;
    let step = upper / R::of((n - 1) as f64);

    let mut hazard = Vec::with_capacity(n);
    let mut virtual_value = Vec::with_capacity(n);
    for i in 0..n {
        let v = step * R::of(i as f64);
        hazard.push(model.hazard(v));
        let f = model.pdf(v);
        virtual_value.push(if f > R::zero() {
            v - model.survival(v) / f
        } else {
            v
        });
    }

    let slope_tol = R::of(MHR_SLOPE_TOL);
    let mut mhr_violations = Vec::new();
    for i in 0..n - 1 {
        let (h0, h1) = (hazard[i], hazard[i + 1]);
        if !h0.is_finite() {
            continue;
        }
        let slope = (h1 - h0) / step;
        let threshold = -slope_tol * h0.max(R::one());
        if !(slope >= threshold) {
            let v = step * R::of(i as f64);
            mhr_violations.push((v, h0, h1));
        }
    }
    let is_mhr = mhr_violations.is_empty();

    let w_monotone = virtual_value.windows(2).all(|pair| pair[1] > pair[0]);

    let k_strong_regular_up_to = if w_monotone {
        Some(virtual_value_limit(model, upper, virtual_value[n - 1]))
    } else {
        None
    };
    let certifies_k = match k_strong_regular_up_to {
        Some(bound) => k < bound,
        None => false,
    };

    Ok(RegularityReport {
        is_mhr,
        mhr_violations,
        k_strong_regular_up_to,
        w_monotone,
        certifies_k,
        grid: GridUsed {
            points: n,
            lower: R::zero(),
            upper,
        },
    })
}

/// Estimates `lim w(v)` as `v` approaches the upper support bound. Finite
/// supports read the last grid value; infinite supports probe doubling
/// points and declare divergence when the increments keep growing.
fn virtual_value_limit<R: Real>(model: &DemandModel<R>, upper: R, w_at_upper: R) -> R {
    if model.support().is_finite() {
        return w_at_upper;
    }
    let two = R::of(2.0);
    let mut v = upper;
    let mut prev_w = w_at_upper;
    let mut prev_inc: Option<R> = None;
    let mut increments_growing = false;
    for _ in 0..48 {
        v = v * two;
        let survival = model.survival(v);
        let density = model.pdf(v);
        if !(survival > R::zero()) || !(density > R::zero()) {
            break;
        }
        let w = v - survival / density;
        if !w.is_finite() || w <= prev_w {
            increments_growing = false;
            break;
        }
        let inc = w - prev_w;
        increments_growing = match prev_inc {
            Some(p) => inc >= p,
            None => false,
        };
        prev_inc = Some(inc);
        prev_w = w;
    }
    if increments_growing {
        R::infinity()
    } else {
        prev_w
    }
}
