//! Willingness-to-pay distributions.
//!
//! A [`DemandModel`] bundles the density, survival, hazard, virtual value,
//! and quantile of a consumer-valuation distribution supported on `[0, U]`
//! (`U` may be infinite). The survival function doubles as the aggregate
//! demand curve: `S(v)` is the fraction of consumers who buy at price `v`.
//!
//! Built-in families: uniform, exponential, logistic (conditioned on
//! non-negative valuations), power law with shortscale, and the two fitted
//! forms produced by [`crate::ingest`], a normalized truncated logistic and
//! an equal-slope mixture of logistics. Every family is closed under the
//! marginal-cost shift [`DemandModel::shift`], so shifted models keep their
//! closed-form tails.

mod regularity;

pub use regularity::{check_regularity, DiagnosticGrid, GridUsed, RegularityReport};

use thiserror::Error;

use crate::numerics::{find_root_monotone, RootConfig};
use crate::Real;

/// Errors from model construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError<R: Real> {
    #[error("invalid {name}: {reason}")]
    Parameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("value {value} lies outside the support or the density vanishes there")]
    OutsideSupport { value: R },
    #[error("cost {cost} exhausts the support: no consumer values the good that highly")]
    CostExhaustsSupport { cost: R },
    #[error("diagnostic grid too coarse: {points} points, need at least 16")]
    GridTooCoarse { points: usize },
}

/// Valuation support `[lower, upper]`; `lower` is always zero and `upper`
/// may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support<R> {
    pub lower: R,
    pub upper: R,
}

impl<R: Real> Support<R> {
    fn new(upper: R) -> Self {
        Self {
            lower: R::zero(),
            upper,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.upper.is_finite()
    }
}

/// Parametric families of the demand distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Family<R> {
    /// Uniform on `[0, a]`.
    Uniform { upper: R },
    /// Exponential with the given rate on `[0, inf)`.
    Exponential { rate: R },
    /// Logistic with scale `s > 0` and location `mu`, conditioned on
    /// `[0, inf)` so that `S(0) = 1`.
    Logistic { scale: R, location: R },
    /// Power law with shortscale: density `alpha delta^alpha (v + delta)^-(alpha+1)`
    /// on `[0, inf)`; `scale` is delta and `shape` is alpha.
    PowerLaw { scale: R, shape: R },
    /// Survival `sigma(a + b v) / sigma(a)` with slope `b < 0`.
    TruncatedLogistic { intercept: R, slope: R },
    /// Weighted mixture of truncated logistics sharing one slope,
    /// normalized so `S(0) = 1`. Weights sum to one.
    MixtureLogistic {
        intercepts: Vec<R>,
        weights: Vec<R>,
        slope: R,
    },
}

/// A validated willingness-to-pay distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel<R>(Family<R>);

pub(crate) fn sigmoid<R: Real>(z: R) -> R {
    if z >= R::zero() {
        R::one() / (R::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (R::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus<R: Real>(z: R) -> R {
    if z > R::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logit<R: Real>(p: R) -> R {
    p.ln() - (-p).ln_1p()
}

fn require<R: Real>(
    ok: bool,
    name: &'static str,
    reason: &'static str,
) -> Result<(), DemandError<R>> {
    if ok {
        Ok(())
    } else {
        Err(DemandError::Parameter { name, reason })
    }
}

impl<R: Real> DemandModel<R> {
    /// Validates the family parameters and builds the model.
    pub fn new(family: Family<R>) -> Result<Self, DemandError<R>> {
        match &family {
            Family::Uniform { upper } => {
                require(
                    upper.is_finite() && *upper > R::zero(),
                    "a",
                    "must be positive",
                )?;
            }
            Family::Exponential { rate } => {
                require(
                    rate.is_finite() && *rate > R::zero(),
                    "lambda",
                    "must be positive",
                )?;
            }
            Family::Logistic { scale, location } => {
                require(
                    scale.is_finite() && *scale > R::zero(),
                    "s",
                    "must be positive",
                )?;
                require(location.is_finite(), "mu", "must be finite")?;
            }
            Family::PowerLaw { scale, shape } => {
                require(
                    scale.is_finite() && *scale > R::zero(),
                    "delta",
                    "must be positive",
                )?;
                require(
                    shape.is_finite() && *shape > R::zero(),
                    "alpha",
                    "must be positive",
                )?;
            }
            Family::TruncatedLogistic { intercept, slope } => {
                require(intercept.is_finite(), "a", "must be finite")?;
                require(
                    slope.is_finite() && *slope < R::zero(),
                    "b",
                    "must be negative",
                )?;
            }
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                require(!intercepts.is_empty(), "intercepts", "must be non-empty")?;
                require(
                    intercepts.len() == weights.len(),
                    "weights",
                    "must match intercepts in length",
                )?;
                require(
                    slope.is_finite() && *slope < R::zero(),
                    "beta",
                    "must be negative",
                )?;
                for c in intercepts {
                    require(c.is_finite(), "intercepts", "must be finite")?;
                }
                let mut norm = R::zero();
                for (&c, &w) in intercepts.iter().zip(weights) {
                    require(
                        w.is_finite() && w > R::zero(),
                        "weights",
                        "must be positive",
                    )?;
                    norm = norm + w * sigmoid(c);
                }
                require(
                    norm > R::zero(),
                    "intercepts",
                    "mixture survival underflows to zero at the origin",
                )?;
            }
        }
        let family = match family {
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                let total = weights.iter().fold(R::zero(), |acc, &w| acc + w);
                let weights = weights.into_iter().map(|w| w / total).collect();
                Family::MixtureLogistic {
                    intercepts,
                    weights,
                    slope,
                }
            }
            other => other,
        };
        Ok(Self(family))
    }

    pub fn uniform(upper: R) -> Result<Self, DemandError<R>> {
        Self::new(Family::Uniform { upper })
    }

    pub fn exponential(rate: R) -> Result<Self, DemandError<R>> {
        Self::new(Family::Exponential { rate })
    }

    pub fn logistic(scale: R, location: R) -> Result<Self, DemandError<R>> {
        Self::new(Family::Logistic { scale, location })
    }

    pub fn power_law(scale: R, shape: R) -> Result<Self, DemandError<R>> {
        Self::new(Family::PowerLaw { scale, shape })
    }

    pub fn truncated_logistic(intercept: R, slope: R) -> Result<Self, DemandError<R>> {
        Self::new(Family::TruncatedLogistic { intercept, slope })
    }

    /// Equal-weight mixture.
    pub fn mixture_logistic(intercepts: Vec<R>, slope: R) -> Result<Self, DemandError<R>> {
        let weights = vec![R::one(); intercepts.len().max(1)];
        Self::new(Family::MixtureLogistic {
            intercepts,
            weights,
            slope,
        })
    }

    /// Mixture with explicit positive weights (normalized internally).
    pub fn mixture_logistic_weighted(
        components: Vec<(R, R)>,
        slope: R,
    ) -> Result<Self, DemandError<R>> {
        let (intercepts, weights) = components.into_iter().unzip();
        Self::new(Family::MixtureLogistic {
            intercepts,
            weights,
            slope,
        })
    }

    pub fn family(&self) -> &Family<R> {
        &self.0
    }

    pub fn support(&self) -> Support<R> {
        match &self.0 {
            Family::Uniform { upper } => Support::new(*upper),
            _ => Support::new(R::infinity()),
        }
    }

    /// The logistic variants share one evaluation path; this returns the
    /// `(a, b)` of `S(v) = sigma(a + b v) / sigma(a)`.
    fn logistic_params(&self) -> Option<(R, R)> {
        match &self.0 {
            Family::Logistic { scale, location } => Some((*location / *scale, -scale.recip())),
            Family::TruncatedLogistic { intercept, slope } => Some((*intercept, *slope)),
            _ => None,
        }
    }

    /// Density `f(v)`; zero outside the support.
    pub fn pdf(&self, v: R) -> R {
        let upper = self.support().upper;
        if v < R::zero() || v > upper {
            return R::zero();
        }
        match &self.0 {
            Family::Uniform { upper } => upper.recip(),
            Family::Exponential { rate } => *rate * (-*rate * v).exp(),
            Family::Logistic { .. } | Family::TruncatedLogistic { .. } => {
                let (a, b) = self.logistic_params().unwrap();
                let s = sigmoid(a + b * v);
                -b * s * (R::one() - s) / sigmoid(a)
            }
            Family::PowerLaw { scale, shape } => {
                let base = *scale / (v + *scale);
                *shape * base.powf(*shape) / (v + *scale)
            }
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                let mut num = R::zero();
                let mut norm = R::zero();
                for (&c, &w) in intercepts.iter().zip(weights) {
                    let s = sigmoid(c + *slope * v);
                    num = num + w * s * (R::one() - s);
                    norm = norm + w * sigmoid(c);
                }
                -*slope * num / norm
            }
        }
    }

    /// Survival `S(v) = P[V > v]`, clamped to `[0, 1]` outside the support.
    pub fn survival(&self, v: R) -> R {
        if v <= R::zero() {
            return R::one();
        }
        let upper = self.support().upper;
        if v >= upper {
            return R::zero();
        }
        match &self.0 {
            Family::Uniform { upper } => (*upper - v) / *upper,
            Family::Exponential { rate } => (-*rate * v).exp(),
            Family::Logistic { .. } | Family::TruncatedLogistic { .. } => {
                let (a, b) = self.logistic_params().unwrap();
                sigmoid(a + b * v) / sigmoid(a)
            }
            Family::PowerLaw { scale, shape } => (*scale / (v + *scale)).powf(*shape),
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                let mut num = R::zero();
                let mut norm = R::zero();
                for (&c, &w) in intercepts.iter().zip(weights) {
                    num = num + w * sigmoid(c + *slope * v);
                    norm = norm + w * sigmoid(c);
                }
                num / norm
            }
        }
    }

    /// Cumulative distribution `F(v) = 1 - S(v)`.
    pub fn cdf(&self, v: R) -> R {
        if v <= R::zero() {
            return R::zero();
        }
        match &self.0 {
            Family::Uniform { upper } => (v / *upper).min(R::one()),
            Family::Exponential { rate } => -(-*rate * v).exp_m1(),
            _ => R::one() - self.survival(v),
        }
    }

    /// Hazard rate `h(v) = f(v) / S(v)`; infinite where the survival is zero.
    pub fn hazard(&self, v: R) -> R {
        match &self.0 {
            // Closed forms avoid 0/0 at the edge of the support.
            Family::Exponential { rate } => *rate,
            Family::PowerLaw { scale, shape } => *shape / (v + *scale),
            Family::Logistic { .. } | Family::TruncatedLogistic { .. } => {
                let (a, b) = self.logistic_params().unwrap();
                -b * sigmoid(-(a + b * v))
            }
            _ => self.pdf(v) / self.survival(v),
        }
    }

    /// Virtual value `w(v) = v - S(v)/f(v)`. Its zero is the optimal uniform
    /// price. Errors where the density vanishes or `v` leaves the support.
    pub fn virtual_value(&self, v: R) -> Result<R, DemandError<R>> {
        let upper = self.support().upper;
        if v < R::zero() || v > upper {
            return Err(DemandError::OutsideSupport { value: v });
        }
        let f = self.pdf(v);
        if !(f > R::zero()) {
            return Err(DemandError::OutsideSupport { value: v });
        }
        Ok(v - self.survival(v) / f)
    }

    /// Derivative of the density, where the family provides one.
    pub fn pdf_derivative(&self, v: R) -> Option<R> {
        let upper = self.support().upper;
        if v < R::zero() || v > upper {
            return Some(R::zero());
        }
        let two = R::of(2.0);
        match &self.0 {
            Family::Uniform { .. } => Some(R::zero()),
            Family::Exponential { rate } => Some(-*rate * *rate * (-*rate * v).exp()),
            Family::Logistic { .. } | Family::TruncatedLogistic { .. } => {
                let (a, b) = self.logistic_params().unwrap();
                let s = sigmoid(a + b * v);
                Some(-b * b * s * (R::one() - s) * (R::one() - two * s) / sigmoid(a))
            }
            Family::PowerLaw { scale, shape } => {
                let base = *scale / (v + *scale);
                let alpha = *shape;
                Some(-alpha * (alpha + R::one()) * base.powf(alpha) / ((v + *scale) * (v + *scale)))
            }
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                let mut num = R::zero();
                let mut norm = R::zero();
                for (&c, &w) in intercepts.iter().zip(weights) {
                    let s = sigmoid(c + *slope * v);
                    num = num + w * s * (R::one() - s) * (R::one() - two * s);
                    norm = norm + w * sigmoid(c);
                }
                Some(-*slope * *slope * num / norm)
            }
        }
    }

    /// Upper partial expectation `T(x) = integral of v f(v) over [x, U]`,
    /// in closed form. `None` when the mean diverges.
    pub fn tail_partial_expectation(&self, x: R) -> Option<R> {
        if !self.has_finite_mean() {
            return None;
        }
        let upper = self.support().upper;
        let x = x.max(R::zero());
        if x >= upper {
            return Some(R::zero());
        }
        let two = R::of(2.0);
        Some(match &self.0 {
            Family::Uniform { upper } => (*upper * *upper - x * x) / (two * *upper),
            Family::Exponential { rate } => (-*rate * x).exp() * (x + rate.recip()),
            Family::Logistic { .. } | Family::TruncatedLogistic { .. } => {
                let (a, b) = self.logistic_params().unwrap();
                x * self.survival(x) + softplus(a + b * x) / (-b * sigmoid(a))
            }
            Family::PowerLaw { scale, shape } => {
                let s = self.survival(x);
                s * (*shape * (x + *scale) / (*shape - R::one()) - *scale)
            }
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                let mut num = R::zero();
                let mut norm = R::zero();
                for (&c, &w) in intercepts.iter().zip(weights) {
                    num = num + w * softplus(c + *slope * x);
                    norm = norm + w * sigmoid(c);
                }
                x * self.survival(x) + num / (-*slope * norm)
            }
        })
    }

    /// Expected valuation, when finite.
    pub fn mean(&self) -> Option<R> {
        self.tail_partial_expectation(R::zero())
    }

    pub fn has_finite_mean(&self) -> bool {
        match &self.0 {
            Family::PowerLaw { shape, .. } => *shape > R::one(),
            _ => true,
        }
    }

    /// Quantile `Q(q)` with `F(Q(q)) = q`; `q` outside `[0, 1]` is clamped.
    pub fn quantile(&self, q: R) -> R {
        if q <= R::zero() {
            return R::zero();
        }
        if q >= R::one() {
            return self.support().upper;
        }
        match &self.0 {
            Family::Uniform { upper } => *upper * q,
            Family::Exponential { rate } => -(-q).ln_1p() / *rate,
            _ => self.invert_survival(R::one() - q),
        }
    }

    /// Smallest `v` with `S(v) <= target`; closed form where available,
    /// bisection on the monotone survival otherwise.
    fn invert_survival(&self, target: R) -> R {
        match &self.0 {
            Family::Uniform { upper } => *upper * (R::one() - target),
            Family::Exponential { rate } => -target.ln() / *rate,
            Family::PowerLaw { scale, shape } => *scale * (target.powf(-shape.recip()) - R::one()),
            Family::Logistic { .. } | Family::TruncatedLogistic { .. } => {
                let (a, b) = self.logistic_params().unwrap();
                (logit(target * sigmoid(a)) - a) / b
            }
            Family::MixtureLogistic { .. } => {
                let mut hi = R::one();
                let mut doublings = 0;
                while self.survival(hi) > target && doublings < 1100 {
                    hi = hi * R::of(2.0);
                    doublings += 1;
                }
                let cfg = RootConfig {
                    abs_tol: R::of(1e-13),
                    rel_tol: R::of(1e-12),
                    max_iter: 300,
                };
                match find_root_monotone(|v| self.survival(v) - target, (R::zero(), hi), &cfg) {
                    Ok(v) => v,
                    Err(_) => hi,
                }
            }
        }
    }

    /// A finite truncation point with `S(v) <= tail_mass`; returns the exact
    /// upper bound for finite supports. `tail_mass` is clamped into `(0, 1)`.
    pub fn effective_upper(&self, tail_mass: R) -> R {
        let support = self.support();
        if support.is_finite() {
            return support.upper;
        }
        let t = tail_mass
            .max(R::min_positive_value())
            .min(R::one() - R::epsilon());
        self.invert_survival(t)
    }

    /// The marginal-cost shift: conditions the distribution on `V > cost`
    /// and re-origins it, giving `S~(v) = S(v + cost)/S(cost)`. Every family
    /// maps onto itself, so closed forms survive the transform.
    pub fn shift(&self, cost: R) -> Result<Self, DemandError<R>> {
        if !cost.is_finite() || cost < R::zero() {
            return Err(DemandError::Parameter {
                name: "cost",
                reason: "must be finite and non-negative",
            });
        }
        if cost == R::zero() {
            return Ok(self.clone());
        }
        if !(self.survival(cost) > R::zero()) {
            return Err(DemandError::CostExhaustsSupport { cost });
        }
        match &self.0 {
            Family::Uniform { upper } => Self::uniform(*upper - cost),
            Family::Exponential { rate } => Self::exponential(*rate),
            Family::Logistic { scale, location } => Self::logistic(*scale, *location - cost),
            Family::PowerLaw { scale, shape } => Self::power_law(*scale + cost, *shape),
            Family::TruncatedLogistic { intercept, slope } => {
                Self::truncated_logistic(*intercept + *slope * cost, *slope)
            }
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => {
                let shifted = intercepts.iter().map(|&c| c + *slope * cost).collect();
                Self::new(Family::MixtureLogistic {
                    intercepts: shifted,
                    weights: weights.clone(),
                    slope: *slope,
                })
            }
        }
    }
}

impl<R: Real> std::fmt::Display for DemandModel<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.0 {
            Family::Uniform { upper } => write!(f, "uniform(a={upper})"),
            Family::Exponential { rate } => write!(f, "exponential(lambda={rate})"),
            Family::Logistic { scale, location } => {
                write!(f, "logistic(s={scale}, mu={location})")
            }
            Family::PowerLaw { scale, shape } => {
                write!(f, "power_law(delta={scale}, alpha={shape})")
            }
            Family::TruncatedLogistic { intercept, slope } => {
                write!(f, "truncated_logistic(a={intercept}, b={slope})")
            }
            Family::MixtureLogistic {
                intercepts, slope, ..
            } => write!(f, "mixture_logistic(n={}, beta={slope})", intercepts.len()),
        }
    }
}
