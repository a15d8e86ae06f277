//! Surplus accounting for a price band.
//!
//! The optimal constrained strategy charges the upper price to valuations
//! above the band, the valuation itself inside it, and the lower price below
//! it. The resulting surpluses are
//!
//! ```text
//! PS = (p_u - c) S(p_u) + integral over [p_l, p_u] of (v - c) f(v) dv
//! CS = integral over [p_u, U] of (v - p_u) f(v) dv
//! TS = integral over [p_l, U] of (v - c) f(v) dv
//! ```
//!
//! Tail integrals use the model's closed-form partial expectation when one
//! exists, which removes truncation error on infinite supports; adaptive
//! quadrature is the fallback and can be forced for cross-checking.

use thiserror::Error;

use crate::demand::DemandModel;
use crate::numerics::{integrate, NumericsError, QuadConfig};
use crate::Real;

/// Errors from surplus evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WelfareError<R: Real> {
    #[error("band is inverted: lower {lower} exceeds upper {upper}")]
    InvertedBand { lower: R, upper: R },
    #[error("band prices must be finite and non-negative, got ({lower}, {upper})")]
    InvalidPrices { lower: R, upper: R },
    #[error("lower price {lower} is below marginal cost {cost}")]
    BandBelowCost { lower: R, cost: R },
    #[error("upper price {upper} exceeds the valuation support bound {support_upper}")]
    BandAboveSupport { upper: R, support_upper: R },
    #[error("demand has a divergent mean; surplus integrals do not converge")]
    DivergentMean,
    #[error("surplus identity violated: cs {cs} + ps {ps} differs from ts {ts}")]
    IdentityViolation { cs: R, ps: R, ts: R },
    #[error(transparent)]
    Numerics(#[from] NumericsError<R>),
}

/// A lower/upper price pair; degenerate bands (`lower == upper`) represent
/// uniform pricing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBand<R> {
    lower: R,
    upper: R,
}

impl<R: Real> PriceBand<R> {
    pub fn new(lower: R, upper: R) -> Result<Self, WelfareError<R>> {
        if !lower.is_finite() || !upper.is_finite() || lower < R::zero() {
            return Err(WelfareError::InvalidPrices { lower, upper });
        }
        if lower > upper {
            return Err(WelfareError::InvertedBand { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// Uniform price, the degenerate band.
    pub fn uniform(price: R) -> Result<Self, WelfareError<R>> {
        Self::new(price, price)
    }

    pub fn lower(&self) -> R {
        self.lower
    }

    pub fn upper(&self) -> R {
        self.upper
    }

    pub fn width(&self) -> R {
        self.upper - self.lower
    }
}

/// Evaluation options for the surplus integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareConfig<R> {
    pub quad: QuadConfig<R>,
    /// Skip closed-form partial expectations and integrate numerically.
    pub force_quadrature: bool,
    /// Relative slack allowed on the `CS + PS = TS` identity in [`report`].
    pub identity_rel_tol: R,
}

impl<R: Real> Default for WelfareConfig<R> {
    fn default() -> Self {
        Self {
            quad: QuadConfig::default(),
            force_quadrature: false,
            identity_rel_tol: R::of(1e-7),
        }
    }
}

/// Surpluses of one solved instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareReport<R> {
    pub band: PriceBand<R>,
    pub cost: R,
    pub ps: R,
    pub cs: R,
    pub ts: R,
}

fn validate<R: Real>(
    model: &DemandModel<R>,
    band: &PriceBand<R>,
    cost: R,
) -> Result<(), WelfareError<R>> {
    if band.lower < cost {
        return Err(WelfareError::BandBelowCost {
            lower: band.lower,
            cost,
        });
    }
    let support_upper = model.support().upper;
    if band.upper > support_upper {
        return Err(WelfareError::BandAboveSupport {
            upper: band.upper,
            support_upper,
        });
    }
    if !model.has_finite_mean() {
        return Err(WelfareError::DivergentMean);
    }
    Ok(())
}

/// `integral over [x, U] of v f(v) dv`, preferring the closed form.
fn upper_partial_expectation<R: Real>(
    model: &DemandModel<R>,
    x: R,
    cfg: &WelfareConfig<R>,
) -> Result<R, WelfareError<R>> {
    if !cfg.force_quadrature {
        if let Some(t) = model.tail_partial_expectation(x) {
            return Ok(t);
        }
    }
    let upper = model.support().upper;
    if x >= upper {
        return Ok(R::zero());
    }
    Ok(integrate(|v| v * model.pdf(v), x, upper, &cfg.quad)?)
}

/// Producer surplus (revenue net of cost) of `band` at marginal cost `cost`.
pub fn producer_surplus<R: Real>(
    model: &DemandModel<R>,
    band: &PriceBand<R>,
    cost: R,
    cfg: &WelfareConfig<R>,
) -> Result<R, WelfareError<R>> {
    validate(model, band, cost)?;
    let (lower, upper) = (band.lower, band.upper);
    let top = (upper - cost) * model.survival(upper);
    let interior = if lower == upper {
        R::zero()
    } else if cfg.force_quadrature {
        integrate(|v| (v - cost) * model.pdf(v), lower, upper, &cfg.quad)?
    } else {
        match (
            model.tail_partial_expectation(lower),
            model.tail_partial_expectation(upper),
        ) {
            (Some(t_lo), Some(t_hi)) => {
                t_lo - t_hi - cost * (model.survival(lower) - model.survival(upper))
            }
            _ => integrate(|v| (v - cost) * model.pdf(v), lower, upper, &cfg.quad)?,
        }
    };
    Ok(top + interior)
}

/// Consumer surplus: value retained by buyers above the upper price.
pub fn consumer_surplus<R: Real>(
    model: &DemandModel<R>,
    band: &PriceBand<R>,
    cost: R,
    cfg: &WelfareConfig<R>,
) -> Result<R, WelfareError<R>> {
    validate(model, band, cost)?;
    let upper = band.upper;
    if cfg.force_quadrature {
        let support_upper = model.support().upper;
        if upper >= support_upper {
            return Ok(R::zero());
        }
        return Ok(integrate(
            |v| (v - upper) * model.pdf(v),
            upper,
            support_upper,
            &cfg.quad,
        )?);
    }
    let tail = upper_partial_expectation(model, upper, cfg)?;
    Ok(tail - upper * model.survival(upper))
}

/// Total surplus: all gains from trade realized by the band.
pub fn total_surplus<R: Real>(
    model: &DemandModel<R>,
    band: &PriceBand<R>,
    cost: R,
    cfg: &WelfareConfig<R>,
) -> Result<R, WelfareError<R>> {
    validate(model, band, cost)?;
    let lower = band.lower;
    if cfg.force_quadrature {
        return Ok(integrate(
            |v| (v - cost) * model.pdf(v),
            lower,
            model.support().upper,
            &cfg.quad,
        )?);
    }
    let tail = upper_partial_expectation(model, lower, cfg)?;
    Ok(tail - cost * model.survival(lower))
}

/// The efficient-trade benchmark `E[(V - c)+]`: the ceiling on total surplus,
/// attained by perfect price discrimination.
pub fn efficient_trade_surplus<R: Real>(
    model: &DemandModel<R>,
    cost: R,
    cfg: &WelfareConfig<R>,
) -> Result<R, WelfareError<R>> {
    if !model.has_finite_mean() {
        return Err(WelfareError::DivergentMean);
    }
    let cost = cost.max(R::zero());
    if cfg.force_quadrature {
        let upper = model.support().upper;
        if cost >= upper {
            return Ok(R::zero());
        }
        return Ok(integrate(
            |v| (v - cost) * model.pdf(v),
            cost,
            upper,
            &cfg.quad,
        )?);
    }
    let tail = upper_partial_expectation(model, cost, cfg)?;
    Ok(tail - cost * model.survival(cost))
}

/// Bundles the three surpluses and enforces the accounting identity
/// `CS + PS = TS` before returning.
pub fn report<R: Real>(
    model: &DemandModel<R>,
    band: &PriceBand<R>,
    cost: R,
    cfg: &WelfareConfig<R>,
) -> Result<WelfareReport<R>, WelfareError<R>> {
    let ps = producer_surplus(model, band, cost, cfg)?;
    let cs = consumer_surplus(model, band, cost, cfg)?;
    let ts = total_surplus(model, band, cost, cfg)?;
    let gap = (cs + ps - ts).abs();
    if gap > cfg.identity_rel_tol * ts.abs().max(R::one()) {
        return Err(WelfareError::IdentityViolation { cs, ps, ts });
    }
    Ok(WelfareReport {
        band: *band,
        cost,
        ps,
        cs,
        ts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> WelfareConfig<f64> {
        WelfareConfig::default()
    }

    fn quad_cfg() -> WelfareConfig<f64> {
        WelfareConfig {
            force_quadrature: true,
            ..WelfareConfig::default()
        }
    }

    #[test]
    fn uniform_closed_forms() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::new(0.25, 0.75).unwrap();
        assert_relative_eq!(
            producer_surplus(&m, &band, 0.0, &cfg()).unwrap(),
            0.4375,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            consumer_surplus(&m, &band, 0.0, &cfg()).unwrap(),
            0.03125,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            total_surplus(&m, &band, 0.0, &cfg()).unwrap(),
            0.46875,
            max_relative = 1e-12
        );
    }

    #[test]
    fn uniform_price_degenerate_band() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::uniform(0.5).unwrap();
        let r = report(&m, &band, 0.0, &cfg()).unwrap();
        assert_relative_eq!(r.ps, 0.25, max_relative = 1e-12);
        assert_relative_eq!(r.cs, 0.125, max_relative = 1e-12);
        assert_relative_eq!(r.ts, 0.375, max_relative = 1e-12);
    }

    #[test]
    fn exponential_unit_price() {
        let m = DemandModel::exponential(1.0).unwrap();
        let band = PriceBand::uniform(1.0).unwrap();
        let e1 = (-1.0f64).exp();
        assert_relative_eq!(
            producer_surplus(&m, &band, 0.0, &cfg()).unwrap(),
            e1,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            consumer_surplus(&m, &band, 0.0, &cfg()).unwrap(),
            e1,
            max_relative = 1e-12
        );
    }

    #[test]
    fn power_law_unit_price() {
        let m = DemandModel::power_law(1.0, 2.0).unwrap();
        let band = PriceBand::uniform(1.0).unwrap();
        let r = report(&m, &band, 0.0, &cfg()).unwrap();
        assert_relative_eq!(r.ps, 0.25, max_relative = 1e-12);
        assert_relative_eq!(r.cs, 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.ts, 0.75, max_relative = 1e-12);
    }

    #[test]
    fn ratio_optimum_report() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::new(0.4, 0.8).unwrap();
        let r = report(&m, &band, 0.0, &cfg()).unwrap();
        assert_relative_eq!(r.ps, 0.4, max_relative = 1e-12);
        assert_relative_eq!(r.cs, 0.02, max_relative = 1e-10);
        assert_relative_eq!(r.ts, 0.42, max_relative = 1e-12);
    }

    #[test]
    fn efficient_trade_examples() {
        let u = DemandModel::uniform(1.0).unwrap();
        assert_relative_eq!(
            efficient_trade_surplus(&u, 0.0, &cfg()).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        let e = DemandModel::exponential(1.0).unwrap();
        assert_relative_eq!(
            efficient_trade_surplus(&e, 0.0, &cfg()).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            efficient_trade_surplus(&e, 0.5, &cfg()).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn full_trade_captures_the_mean() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::new(0.0, 0.0).unwrap();
        assert_relative_eq!(
            total_surplus(&m, &band, 0.0, &cfg()).unwrap(),
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn consumer_surplus_vanishes_at_the_support_edge() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::new(0.3, 1.0).unwrap();
        let cs = consumer_surplus(&m, &band, 0.0, &cfg()).unwrap();
        assert!(cs.abs() < 1e-12);
    }

    #[test]
    fn quadrature_route_agrees_with_closed_forms() {
        let models = [
            DemandModel::uniform(1.0).unwrap(),
            DemandModel::exponential(1.0).unwrap(),
            DemandModel::power_law(1.0, 2.0).unwrap(),
            DemandModel::truncated_logistic(3.94, -3.44).unwrap(),
            DemandModel::mixture_logistic(vec![2.0, 4.0], -3.0).unwrap(),
        ];
        for m in &models {
            let band = PriceBand::new(0.2, 0.7).unwrap();
            let c = 0.1;
            for (closed, numeric) in [
                (
                    producer_surplus(m, &band, c, &cfg()).unwrap(),
                    producer_surplus(m, &band, c, &quad_cfg()).unwrap(),
                ),
                (
                    consumer_surplus(m, &band, c, &cfg()).unwrap(),
                    consumer_surplus(m, &band, c, &quad_cfg()).unwrap(),
                ),
                (
                    total_surplus(m, &band, c, &cfg()).unwrap(),
                    total_surplus(m, &band, c, &quad_cfg()).unwrap(),
                ),
                (
                    efficient_trade_surplus(m, c, &cfg()).unwrap(),
                    efficient_trade_surplus(m, c, &quad_cfg()).unwrap(),
                ),
            ] {
                assert!(
                    (closed - numeric).abs() < 1e-8 * closed.abs().max(1.0),
                    "{m}: closed {closed} vs quadrature {numeric}"
                );
            }
        }
    }

    #[test]
    fn identity_holds_on_both_routes() {
        let m = DemandModel::truncated_logistic(3.94, -3.44).unwrap();
        let band = PriceBand::new(0.5, 1.2).unwrap();
        for config in [cfg(), quad_cfg()] {
            let r = report(&m, &band, 0.2, &config).unwrap();
            assert!((r.cs + r.ps - r.ts).abs() < 1e-8 * r.ts.max(1.0));
        }
    }

    #[test]
    fn rejects_band_below_cost() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::new(0.2, 0.6).unwrap();
        assert!(matches!(
            producer_surplus(&m, &band, 0.3, &cfg()),
            Err(WelfareError::BandBelowCost { .. })
        ));
    }

    #[test]
    fn rejects_band_above_support() {
        let m = DemandModel::uniform(1.0).unwrap();
        let band = PriceBand::new(0.2, 1.5).unwrap();
        assert!(matches!(
            producer_surplus(&m, &band, 0.0, &cfg()),
            Err(WelfareError::BandAboveSupport { .. })
        ));
    }

    #[test]
    fn rejects_divergent_mean() {
        let m = DemandModel::power_law(1.0, 0.9).unwrap();
        let band = PriceBand::new(0.2, 0.6).unwrap();
        assert!(matches!(
            total_surplus(&m, &band, 0.0, &cfg()),
            Err(WelfareError::DivergentMean)
        ));
        assert!(matches!(
            efficient_trade_surplus(&m, 0.0, &cfg()),
            Err(WelfareError::DivergentMean)
        ));
    }

    #[test]
    fn band_construction_validates() {
        assert!(PriceBand::new(0.6, 0.2).is_err());
        assert!(PriceBand::new(-0.1, 0.2).is_err());
        assert!(PriceBand::new(f64::NAN, 0.2).is_err());
        assert!(PriceBand::new(0.25, 0.25).is_ok());
    }
}
