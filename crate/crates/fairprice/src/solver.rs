//! Constrained revenue maximization.
//!
//! The monopolist picks a price band `(p_l, p_u)` maximizing producer surplus
//! subject to a cap on the band: `p_u - p_l <= eps` (difference policy) or
//! `(p_u - c) <= gamma (p_l - c)` (ratio policy). Positive marginal cost is
//! reduced to the zero-cost problem by conditioning the demand distribution
//! on `V > c` ([`cost_shift`]); the constraint then binds at the optimum and
//! the lower price solves a scalar first-order condition with a unique sign
//! change:
//!
//! ```text
//! difference:  S(p_l + eps) - p_l f(p_l) = 0
//! ratio:       gamma S(gamma q_l) - q_l f(q_l) = 0
//! ```
//!
//! On top of the single solves sit parameter sweeps, the threshold eps0
//! above which the difference policy is guaranteed to trade producer for
//! consumer surplus, implicit-function sensitivities of the band, and the
//! difference-vs-ratio comparison at matched consumer surplus.

use thiserror::Error;

use crate::demand::{check_regularity, DemandError, DemandModel, DiagnosticGrid};
use crate::numerics::{find_root_monotone, NumericsError, RootConfig};
use crate::welfare::{self, PriceBand, WelfareConfig, WelfareError, WelfareReport};
use crate::Real;

/// Fraction of the effective upper bound used as the smallest representable
/// shifted price when bracketing and capping.
const TINY_PRICE_FRACTION: f64 = 1e-12;
/// Policy parameters are clamped this close to the perfect-discrimination
/// boundary, where the first-order condition degenerates.
const ENDPOINT_MARGIN: f64 = 1e-9;

/// Errors from the solver layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError<R: Real> {
    #[error("policy parameter {name} = {requested} is outside the valid range (limit {limit})")]
    PolicyRange {
        name: &'static str,
        requested: R,
        limit: R,
    },
    #[error("cost must be finite and non-negative, got {cost}")]
    InvalidCost { cost: R },
    #[error("cost {cost} exhausts the market: survival at cost is zero")]
    EmptyMarket { cost: R },
    #[error(
        "first-order condition has no bracketable root on (0, {hi}); demand may not be regular"
    )]
    Regularity { hi: R },
    #[error("consumer surplus target {target} is not attainable in the monotone region (maximum {attainable})")]
    CsUnattainable { target: R, attainable: R },
    #[error("demand model provides no density derivative")]
    MissingDensityDerivative,
    #[error("sweep parameters must be finite and strictly ascending")]
    SweepParams,
    #[error("oracle grid too coarse: {points} points, need at least 101")]
    OracleGrid { points: usize },
    #[error(transparent)]
    Demand(#[from] DemandError<R>),
    #[error(transparent)]
    Welfare(#[from] WelfareError<R>),
    #[error(transparent)]
    Numerics(#[from] NumericsError<R>),
}

/// The regulatory constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy<R> {
    /// Cap `eps >= 0` on the price difference `p_u - p_l`.
    Difference { eps: R },
    /// Cap `gamma >= 1` on the cost-adjusted price ratio.
    Ratio { gamma: R },
}

impl<R: Real> Policy<R> {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Difference { .. } => PolicyKind::Difference,
            Policy::Ratio { .. } => PolicyKind::Ratio,
        }
    }

    pub fn param(&self) -> R {
        match self {
            Policy::Difference { eps } => *eps,
            Policy::Ratio { gamma } => *gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Difference,
    Ratio,
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::Difference => write!(f, "diff"),
            PolicyKind::Ratio => write!(f, "ratio"),
        }
    }
}

/// Non-fatal findings attached to a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveWarning<R> {
    /// The regularity probe could not certify a monotone virtual value;
    /// the root found may not be the unique optimum.
    RegularityUncertified,
    /// The requested parameter sat beyond the representable range and was
    /// clamped before solving.
    ParameterClamped { requested: R, used: R },
    /// The nominal bracket failed; the root came from a grid scan for the
    /// first sign change.
    BracketScan,
}

impl<R: Real> std::fmt::Display for SolveWarning<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveWarning::RegularityUncertified => {
                write!(f, "regularity not certified; optimum may not be unique")
            }
            SolveWarning::ParameterClamped { requested, used } => {
                write!(f, "parameter {requested} clamped to {used}")
            }
            SolveWarning::BracketScan => {
                write!(
                    f,
                    "nominal bracket failed; used first sign change from a grid scan"
                )
            }
        }
    }
}

/// One solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<R> {
    pub policy: Policy<R>,
    pub band: PriceBand<R>,
    pub welfare: WelfareReport<R>,
    /// First-order-condition value at the solved (shifted) lower price.
    pub foc_residual: R,
    /// Whether the constraint is active at the optimum.
    pub binding: bool,
    pub warnings: Vec<SolveWarning<R>>,
}

/// One row of a parameter sweep; failures stay in-row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<R: Real> {
    pub param: R,
    pub result: Result<Solution<R>, SolverError<R>>,
}

/// An ordered trade-off curve: one solved instance per policy parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable<R: Real> {
    pub kind: PolicyKind,
    pub model: String,
    pub cost: R,
    pub rows: Vec<SweepRow<R>>,
}

/// Welfare of the two policies at matched consumer surplus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceRecord<R> {
    pub cs_level: R,
    pub eps_matched: R,
    pub gamma: R,
    pub ps_diff: R,
    pub ps_ratio: R,
    pub ts_diff: R,
    pub ts_ratio: R,
}

/// Solver options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<R> {
    pub root: RootConfig<R>,
    pub welfare: WelfareConfig<R>,
    /// Tail mass at which infinite supports are truncated for bracketing.
    pub tail_mass: R,
    /// Probe the shifted model's regularity at construction and attach
    /// warnings when certification fails.
    pub diagnose: bool,
    /// Grid size of the fallback scan for a first sign change.
    pub scan_points: usize,
}

impl<R: Real> Default for SolverConfig<R> {
    fn default() -> Self {
        Self {
            root: RootConfig::tight(),
            welfare: WelfareConfig::default(),
            tail_mass: R::of(1e-12),
            diagnose: true,
            scan_points: 512,
        }
    }
}

/// Shares the cost-shifted model, effective bounds, and the uniform-price
/// root across the solve operations for one `(model, cost)` pair.
pub struct Solver<'m, R: Real> {
    model: &'m DemandModel<R>,
    cost: R,
    cfg: SolverConfig<R>,
    shifted: DemandModel<R>,
    /// Effective upper bound of the shifted valuation distribution.
    upper: R,
    /// Root of `S(p) - p f(p)` on the shifted model: the uniform price
    /// before adding back the cost.
    uniform_root: R,
    uniform_residual: R,
    regular_certified: bool,
    mhr_certified: bool,
}

/// Cost reduction: conditions demand on `V > cost` so the positive-cost
/// problem becomes a zero-cost problem on the new model.
pub fn cost_shift<R: Real>(
    model: &DemandModel<R>,
    cost: R,
) -> Result<DemandModel<R>, SolverError<R>> {
    if !cost.is_finite() || cost < R::zero() {
        return Err(SolverError::InvalidCost { cost });
    }
    model.shift(cost).map_err(|e| match e {
        DemandError::CostExhaustsSupport { cost } => SolverError::EmptyMarket { cost },
        other => SolverError::Demand(other),
    })
}

impl<'m, R: Real> Solver<'m, R> {
    pub fn new(model: &'m DemandModel<R>, cost: R) -> Result<Self, SolverError<R>> {
        Self::with_config(model, cost, SolverConfig::default())
    }

    pub fn with_config(
        model: &'m DemandModel<R>,
        cost: R,
        cfg: SolverConfig<R>,
    ) -> Result<Self, SolverError<R>> {
        let shifted = cost_shift(model, cost)?;
        let upper = shifted.effective_upper(cfg.tail_mass);

        let (regular_certified, mhr_certified) = if cfg.diagnose {
            let grid = DiagnosticGrid {
                points: 513,
                upper: Some(upper),
            };
            match check_regularity(&shifted, R::zero(), &grid) {
                Ok(report) => (report.certifies_k, report.is_mhr),
                Err(_) => (false, false),
            }
        } else {
            (true, false)
        };

        let mut solver = Self {
            model,
            cost,
            cfg,
            shifted,
            upper,
            uniform_root: R::zero(),
            uniform_residual: R::zero(),
            regular_certified,
            mhr_certified,
        };
        let tiny = R::of(TINY_PRICE_FRACTION) * upper;
        let (root, residual, _) = solver.foc_root(
            |p| solver.shifted.survival(p) - p * solver.shifted.pdf(p),
            tiny,
            upper,
            upper,
        )?;
        solver.uniform_root = root;
        solver.uniform_residual = residual;
        Ok(solver)
    }

    pub fn cost(&self) -> R {
        self.cost
    }

    /// The cost-shifted demand model the first-order conditions run on.
    pub fn shifted_model(&self) -> &DemandModel<R> {
        &self.shifted
    }

    /// Effective upper bound of the shifted model; also the representable
    /// range of the difference cap.
    pub fn effective_upper(&self) -> R {
        self.upper
    }

    /// Whether the construction-time probe certified a strictly increasing
    /// virtual value on the shifted model.
    pub fn regularity_certified(&self) -> bool {
        self.regular_certified
    }

    fn base_warnings(&self) -> Vec<SolveWarning<R>> {
        if self.regular_certified {
            Vec::new()
        } else {
            vec![SolveWarning::RegularityUncertified]
        }
    }

    /// Locates the sign change of a first-order condition that starts
    /// positive near zero. Shrinks the lower endpoint when needed, and falls
    /// back to a grid scan for the first crossing when the nominal bracket
    /// fails. Returns `(root, residual, scanned)`.
    fn foc_root(
        &self,
        g: impl Fn(R) -> R,
        lo0: R,
        hi: R,
        scan_hi: R,
    ) -> Result<(R, R, bool), SolverError<R>> {
        let mut lo = lo0;
        let mut g_lo = g(lo);
        for _ in 0..50 {
            if g_lo > R::zero() || lo <= R::min_positive_value() {
                break;
            }
            lo = lo * R::of(1e-6);
            g_lo = g(lo);
        }
        let g_hi = g(hi);
        if g_lo > R::zero() && g_hi <= R::zero() {
            let root = find_root_monotone(&g, (lo, hi), &self.cfg.root)?;
            let residual = g(root);
            return Ok((root, residual, false));
        }
        self.scan_first_crossing(g, lo0.min(lo), scan_hi)
            .map(|(root, residual)| (root, residual, true))
    }

    /// Grid scan for the first positive-to-negative crossing.
    fn scan_first_crossing(
        &self,
        g: impl Fn(R) -> R,
        lo: R,
        hi: R,
    ) -> Result<(R, R), SolverError<R>> {
        let n = self.cfg.scan_points.max(16);
        let step = (hi - lo) / R::of(n as f64);
        let mut prev_v = lo;
        let mut prev_g = g(lo);
        for i in 1..=n {
            let v = lo + step * R::of(i as f64);
            let g_v = g(v);
            if prev_g > R::zero() && g_v <= R::zero() {
                let root = find_root_monotone(&g, (prev_v, v), &self.cfg.root)?;
                let residual = g(root);
                return Ok((root, residual));
            }
            prev_v = v;
            prev_g = g_v;
        }
        Err(SolverError::Regularity { hi })
    }

    /// Shifted lower-price root of the difference policy at cap `eps`.
    /// Returns `(root, residual, scanned)`.
    fn difference_root(&self, eps: R) -> Result<(R, R, bool), SolverError<R>> {
        let g = |p: R| self.shifted.survival(p + eps) - p * self.shifted.pdf(p);
        let hi = self.upper - eps;
        let lo0 = R::of(TINY_PRICE_FRACTION) * self.upper;
        self.foc_root(g, lo0.min(hi * R::of(0.5)), hi, hi)
    }

    /// Clamp a requested parameter to the representable range; values beyond
    /// it solve at the cap with a warning and a non-binding constraint.
    fn clamp(&self, requested: R, cap: R) -> (R, bool) {
        if requested > cap {
            (cap, true)
        } else {
            (requested, false)
        }
    }

    fn build_solution(
        &self,
        policy: Policy<R>,
        shifted_lower: R,
        shifted_upper: R,
        residual: R,
        binding: bool,
        warnings: Vec<SolveWarning<R>>,
    ) -> Result<Solution<R>, SolverError<R>> {
        let support_upper = self.model.support().upper;
        let lower = shifted_lower + self.cost;
        let upper = (shifted_upper + self.cost).min(support_upper).max(lower);
        let band = PriceBand::new(lower, upper)?;
        let report = welfare::report(self.model, &band, self.cost, &self.cfg.welfare)?;
        Ok(Solution {
            policy,
            band,
            welfare: report,
            foc_residual: residual,
            binding,
            warnings,
        })
    }

    /// Unconstrained-uniform benchmark: the monopoly price, where the
    /// shifted virtual value crosses zero.
    pub fn uniform_price(&self) -> Result<Solution<R>, SolverError<R>> {
        self.build_solution(
            Policy::Difference { eps: R::zero() },
            self.uniform_root,
            self.uniform_root,
            self.uniform_residual,
            true,
            self.base_warnings(),
        )
    }

    /// Optimal band under the difference cap `eps`.
    pub fn difference(&self, eps: R) -> Result<Solution<R>, SolverError<R>> {
        if !eps.is_finite() || eps < R::zero() {
            return Err(SolverError::PolicyRange {
                name: "eps",
                requested: eps,
                limit: self.upper,
            });
        }
        if eps >= self.upper {
            return Err(SolverError::PolicyRange {
                name: "eps",
                requested: eps,
                limit: self.upper,
            });
        }
        let cap = self.upper * (R::one() - R::of(ENDPOINT_MARGIN));
        let (eps_used, clamped) = self.clamp(eps, cap);
        let (root, residual, scanned) = self.difference_root(eps_used)?;
        let mut warnings = self.base_warnings();
        if clamped {
            warnings.push(SolveWarning::ParameterClamped {
                requested: eps,
                used: eps_used,
            });
        }
        if scanned {
            warnings.push(SolveWarning::BracketScan);
        }
        self.build_solution(
            Policy::Difference { eps },
            root,
            root + eps_used,
            residual,
            !clamped,
            warnings,
        )
    }

    /// Optimal band under the ratio cap `gamma`.
    pub fn ratio(&self, gamma: R) -> Result<Solution<R>, SolverError<R>> {
        if !gamma.is_finite() || gamma < R::one() {
            return Err(SolverError::PolicyRange {
                name: "gamma",
                requested: gamma,
                limit: R::one(),
            });
        }
        // Largest ratio whose lower price stays representable.
        let cap = R::of(TINY_PRICE_FRACTION).recip();
        let (gamma_used, clamped) = self.clamp(gamma, cap);
        let g = |q: R| gamma_used * self.shifted.survival(gamma_used * q) - q * self.shifted.pdf(q);
        // The optimal lower price never exceeds the uniform price; pad the
        // endpoint so the gamma = 1 solve keeps a sign change.
        let pad = self.uniform_root * R::of(1e-9) + self.cfg.root.abs_tol;
        let hi = (self.uniform_root + pad).min(self.upper);
        let lo0 = R::of(TINY_PRICE_FRACTION) * self.upper / gamma_used;
        let (root, residual, scanned) = self.foc_root(g, lo0, hi, self.upper)?;
        let mut warnings = self.base_warnings();
        if clamped {
            warnings.push(SolveWarning::ParameterClamped {
                requested: gamma,
                used: gamma_used,
            });
        }
        if scanned {
            warnings.push(SolveWarning::BracketScan);
        }
        self.build_solution(
            Policy::Ratio { gamma },
            root,
            gamma_used * root,
            residual,
            !clamped,
            warnings,
        )
    }

    pub fn solve(&self, policy: Policy<R>) -> Result<Solution<R>, SolverError<R>> {
        match policy {
            Policy::Difference { eps } => self.difference(eps),
            Policy::Ratio { gamma } => self.ratio(gamma),
        }
    }

    /// The threshold eps0 solving `eps = 2 p_l*(eps)`: above it, the upper
    /// price rises (and consumer surplus falls) in `eps` even for strongly
    /// regular demand that is not MHR.
    pub fn epsilon_threshold(&self) -> Result<R, SolverError<R>> {
        let two = R::of(2.0);
        let cap = self.upper * (R::one() - R::of(ENDPOINT_MARGIN));
        // phi is strictly increasing, negative at 0, and non-negative by
        // twice the uniform price.
        let hi = (two * self.uniform_root).min(cap);
        let mut inner: Option<SolverError<R>> = None;
        let phi = |eps: R, inner: &mut Option<SolverError<R>>| match self.difference_root(eps) {
            Ok((root, _, _)) => eps - two * root,
            Err(e) => {
                *inner = Some(e);
                R::nan()
            }
        };
        let result =
            find_root_monotone(|eps| phi(eps, &mut inner), (R::zero(), hi), &self.cfg.root);
        match inner {
            Some(e) => Err(e),
            None => Ok(result?),
        }
    }

    /// Implicit-function derivatives of the band endpoints with respect to
    /// the policy parameter, evaluated on the shifted problem.
    pub fn sensitivity(&self, solution: &Solution<R>) -> Result<(R, R), SolverError<R>> {
        let two = R::of(2.0);
        let lower = solution.band.lower() - self.cost;
        let upper = solution.band.upper() - self.cost;
        let f_lo = self.shifted.pdf(lower);
        let df_lo = self
            .shifted
            .pdf_derivative(lower)
            .ok_or(SolverError::MissingDensityDerivative)?;
        match solution.policy {
            Policy::Difference { .. } => {
                let eps = upper - lower;
                let f_hi = self.shifted.pdf(lower + eps);
                let denom = f_hi + f_lo + lower * df_lo;
                let d_lower = -f_hi / denom;
                Ok((d_lower, d_lower + R::one()))
            }
            Policy::Ratio { .. } => {
                let gamma = upper / lower;
                let f_hi = self.shifted.pdf(upper);
                let denom = gamma * gamma * f_hi + f_lo + lower * df_lo;
                let d_lower = (self.shifted.survival(upper) - upper * f_hi) / denom;
                let d_upper = (lower * lower * df_lo + two * lower * f_lo) / denom;
                Ok((d_lower, d_upper))
            }
        }
    }

    /// Solves one instance per parameter; row failures are recorded in-row.
    pub fn sweep(&self, kind: PolicyKind, params: &[R]) -> Result<SweepTable<R>, SolverError<R>> {
        let ascending = params.windows(2).all(|w| w[0] < w[1]);
        if !ascending || params.iter().any(|p| !p.is_finite()) {
            return Err(SolverError::SweepParams);
        }
        let rows = params
            .iter()
            .map(|&param| SweepRow {
                param,
                result: match kind {
                    PolicyKind::Difference => self.difference(param),
                    PolicyKind::Ratio => self.ratio(param),
                },
            })
            .collect();
        Ok(SweepTable {
            kind,
            model: self.model.to_string(),
            cost: self.cost,
            rows,
        })
    }

    /// Consumer surplus of the difference policy at cap `eps`, without the
    /// full welfare report.
    fn difference_cs(&self, eps: R) -> Result<R, SolverError<R>> {
        let (root, _, _) = self.difference_root(eps)?;
        let support_upper = self.model.support().upper;
        let upper = (root + eps + self.cost).min(support_upper);
        let band = PriceBand::new((root + self.cost).min(upper), upper)?;
        Ok(welfare::consumer_surplus(
            self.model,
            &band,
            self.cost,
            &self.cfg.welfare,
        )?)
    }

    /// Matches the ratio policy's consumer surplus with a difference cap and
    /// compares the welfare of the two: at equal consumer surplus the
    /// difference policy weakly dominates on both producer and total surplus.
    pub fn dominance_compare(&self, gamma: R) -> Result<DominanceRecord<R>, SolverError<R>> {
        let ratio_sol = self.ratio(gamma)?;
        let target = ratio_sol.welfare.cs;

        // CS under the difference cap is only guaranteed monotone above
        // eps0 unless the (shifted) model is MHR.
        let region_lo = if self.mhr_certified {
            R::zero()
        } else {
            self.epsilon_threshold()?
        };
        let cs_lo = self.difference_cs(region_lo)?;
        let slack = R::of(1e-9) * cs_lo.abs().max(R::one());
        if target > cs_lo + slack {
            return Err(SolverError::CsUnattainable {
                target,
                attainable: cs_lo,
            });
        }

        let cap = self.upper * (R::one() - R::of(ENDPOINT_MARGIN));
        let eps_matched = if target >= cs_lo - slack {
            region_lo
        } else {
            // Bracket: CS falls from cs_lo toward zero as eps grows.
            let mut hi = (region_lo + self.upper * R::of(0.01)).min(cap);
            let mut cs_hi = self.difference_cs(hi)?;
            while cs_hi > target && hi < cap {
                hi = (hi * R::of(2.0)).min(cap);
                cs_hi = self.difference_cs(hi)?;
            }
            if cs_hi > target {
                return Err(SolverError::CsUnattainable {
                    target,
                    attainable: cs_hi,
                });
            }
            let mut inner: Option<SolverError<R>> = None;
            let result = find_root_monotone(
                |eps| match self.difference_cs(eps) {
                    Ok(cs) => cs - target,
                    Err(e) => {
                        inner = Some(e);
                        R::nan()
                    }
                },
                (region_lo, hi),
                &self.cfg.root,
            );
            match inner {
                Some(e) => return Err(e),
                None => result?,
            }
        };

        let diff_sol = self.difference(eps_matched)?;
        Ok(DominanceRecord {
            cs_level: target,
            eps_matched,
            gamma,
            ps_diff: diff_sol.welfare.ps,
            ps_ratio: ratio_sol.welfare.ps,
            ts_diff: diff_sol.welfare.ts,
            ts_ratio: ratio_sol.welfare.ts,
        })
    }
}

/// Uniform (monopoly) price of `model` at marginal cost `cost`.
pub fn solve_uniform_price<R: Real>(
    model: &DemandModel<R>,
    cost: R,
) -> Result<Solution<R>, SolverError<R>> {
    Solver::new(model, cost)?.uniform_price()
}

/// Optimal band under the difference cap `eps`.
pub fn solve_difference<R: Real>(
    model: &DemandModel<R>,
    eps: R,
    cost: R,
) -> Result<Solution<R>, SolverError<R>> {
    Solver::new(model, cost)?.difference(eps)
}

/// Optimal band under the ratio cap `gamma`.
pub fn solve_ratio<R: Real>(
    model: &DemandModel<R>,
    gamma: R,
    cost: R,
) -> Result<Solution<R>, SolverError<R>> {
    Solver::new(model, cost)?.ratio(gamma)
}

/// The threshold eps0 of the difference policy.
pub fn epsilon_threshold<R: Real>(model: &DemandModel<R>, cost: R) -> Result<R, SolverError<R>> {
    Solver::new(model, cost)?.epsilon_threshold()
}

/// Band-endpoint derivatives of a solved instance.
pub fn sensitivity<R: Real>(
    model: &DemandModel<R>,
    solution: &Solution<R>,
    cost: R,
) -> Result<(R, R), SolverError<R>> {
    Solver::new(model, cost)?.sensitivity(solution)
}

/// One solved instance per parameter.
pub fn sweep<R: Real>(
    model: &DemandModel<R>,
    kind: PolicyKind,
    params: &[R],
    cost: R,
) -> Result<SweepTable<R>, SolverError<R>> {
    Solver::new(model, cost)?.sweep(kind, params)
}

/// Difference-vs-ratio welfare comparison at matched consumer surplus.
pub fn dominance_compare<R: Real>(
    model: &DemandModel<R>,
    gamma: R,
    cost: R,
) -> Result<DominanceRecord<R>, SolverError<R>> {
    Solver::new(model, cost)?.dominance_compare(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform() -> DemandModel<f64> {
        DemandModel::uniform(1.0).unwrap()
    }

    fn exponential() -> DemandModel<f64> {
        DemandModel::exponential(1.0).unwrap()
    }

    fn power_law() -> DemandModel<f64> {
        DemandModel::power_law(1.0, 2.0).unwrap()
    }

    #[test]
    fn uniform_price_closed_forms() {
        let s = solve_uniform_price(&uniform(), 0.0).unwrap();
        assert_relative_eq!(s.band.lower(), 0.5, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.ps, 0.25, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.cs, 0.125, max_relative = 1e-10);

        let e = solve_uniform_price(&exponential(), 0.0).unwrap();
        assert_relative_eq!(e.band.lower(), 1.0, max_relative = 1e-10);

        let p = solve_uniform_price(&power_law(), 0.0).unwrap();
        assert_relative_eq!(p.band.lower(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn difference_uniform_closed_form() {
        let s = solve_difference(&uniform(), 0.5, 0.0).unwrap();
        assert_relative_eq!(s.band.lower(), 0.25, max_relative = 1e-10);
        assert_relative_eq!(s.band.upper(), 0.75, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.ps, 0.4375, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.cs, 0.03125, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.ts, 0.46875, max_relative = 1e-10);
        assert!(s.binding);
        assert!(s.foc_residual.abs() < 1e-10);
    }

    #[test]
    fn difference_exponential_closed_form() {
        let s = solve_difference(&exponential(), 1.0, 0.0).unwrap();
        let expected = (-1.0f64).exp();
        assert_relative_eq!(s.band.lower(), expected, max_relative = 1e-10);
        assert_relative_eq!(s.band.upper(), expected + 1.0, max_relative = 1e-10);
    }

    #[test]
    fn difference_at_zero_reduces_to_uniform_price() {
        let s = solve_difference(&uniform(), 0.0, 0.0).unwrap();
        assert_relative_eq!(s.band.lower(), 0.5, max_relative = 1e-10);
        assert_eq!(s.band.lower(), s.band.upper());
    }

    #[test]
    fn difference_rejects_out_of_range() {
        assert!(matches!(
            solve_difference(&uniform(), 1.0, 0.0),
            Err(SolverError::PolicyRange { .. })
        ));
        assert!(matches!(
            solve_difference(&uniform(), -0.1, 0.0),
            Err(SolverError::PolicyRange { .. })
        ));
    }

    #[test]
    fn ratio_uniform_closed_form() {
        let s = solve_ratio(&uniform(), 2.0, 0.0).unwrap();
        assert_relative_eq!(s.band.lower(), 0.4, max_relative = 1e-10);
        assert_relative_eq!(s.band.upper(), 0.8, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.ps, 0.4, max_relative = 1e-10);
        assert_relative_eq!(s.welfare.cs, 0.02, max_relative = 1e-8);
    }

    #[test]
    fn ratio_exponential_fixed_point() {
        let s = solve_ratio(&exponential(), 2.0, 0.0).unwrap();
        assert_relative_eq!(s.band.lower(), 0.852605502013725, max_relative = 1e-10);
        assert_relative_eq!(s.band.upper(), 1.705211004027451, max_relative = 1e-10);
    }

    #[test]
    fn ratio_at_one_matches_uniform_price() {
        for model in [uniform(), exponential(), power_law()] {
            let u = solve_uniform_price(&model, 0.0).unwrap();
            let r = solve_ratio(&model, 1.0, 0.0).unwrap();
            assert_relative_eq!(r.band.lower(), u.band.lower(), max_relative = 1e-9);
            assert_relative_eq!(r.band.upper(), u.band.upper(), max_relative = 1e-9);
        }
    }

    #[test]
    fn ratio_rejects_below_one() {
        assert!(matches!(
            solve_ratio(&uniform(), 0.9, 0.0),
            Err(SolverError::PolicyRange { .. })
        ));
    }

    #[test]
    fn constraints_bind_exactly() {
        let s = solve_difference(&exponential(), 0.7, 0.25).unwrap();
        assert_relative_eq!(s.band.width(), 0.7, epsilon = 1e-12);
        let r = solve_ratio(&exponential(), 3.0, 0.25).unwrap();
        assert_relative_eq!(
            (r.band.upper() - 0.25) / (r.band.lower() - 0.25),
            3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn epsilon_threshold_closed_forms() {
        let u = epsilon_threshold(&uniform(), 0.0).unwrap();
        assert_relative_eq!(u, 0.5, max_relative = 1e-9);
        let e = epsilon_threshold(&exponential(), 0.0).unwrap();
        assert_relative_eq!(e, 0.852605502013725, max_relative = 1e-9);
        // Bounded by twice the uniform price.
        let p = epsilon_threshold(&power_law(), 0.0).unwrap();
        assert!(p > 0.0 && p <= 2.0, "eps0 = {p}");
    }

    #[test]
    fn sensitivity_closed_forms() {
        let model = uniform();
        let solver = Solver::new(&model, 0.0).unwrap();
        let diff = solver.difference(0.5).unwrap();
        let (dl, du) = solver.sensitivity(&diff).unwrap();
        assert_relative_eq!(dl, -0.5, max_relative = 1e-9);
        assert_relative_eq!(du, 0.5, max_relative = 1e-9);

        let ratio = solver.ratio(2.0).unwrap();
        let (dl, du) = solver.sensitivity(&ratio).unwrap();
        assert_relative_eq!(dl, -0.12, max_relative = 1e-8);
        assert_relative_eq!(du, 0.16, max_relative = 1e-8);

        let em = exponential();
        let esolver = Solver::new(&em, 0.0).unwrap();
        let ediff = esolver.difference(1.0).unwrap();
        let (dl, _) = esolver.sensitivity(&ediff).unwrap();
        assert_relative_eq!(dl, -(-1.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn cost_shift_examples() {
        let e = exponential();
        let shifted = cost_shift(&e, 0.5).unwrap();
        assert_eq!(&shifted, &e);

        let u = uniform();
        let us = cost_shift(&u, 0.5).unwrap();
        assert_relative_eq!(us.pdf(0.2), 2.0, max_relative = 1e-12);

        assert!(matches!(
            cost_shift(&u, 1.0),
            Err(SolverError::EmptyMarket { .. })
        ));
        assert!(matches!(
            cost_shift(&u, -0.5),
            Err(SolverError::InvalidCost { .. })
        ));
    }

    #[test]
    fn shifted_exponential_uniform_price_adds_cost() {
        let s = solve_difference(&exponential(), 0.0, 0.5).unwrap();
        assert_relative_eq!(s.band.lower(), 1.5, max_relative = 1e-10);
        assert_relative_eq!(s.band.upper(), 1.5, max_relative = 1e-10);
    }

    #[test]
    fn sweep_closed_forms() {
        let table = sweep(
            &uniform(),
            PolicyKind::Difference,
            &[0.0, 0.25, 0.5, 0.75],
            0.0,
        )
        .unwrap();
        let expected_cs = [0.125, 0.070_312_5, 0.031_25, 0.007_812_5];
        for (row, want) in table.rows.iter().zip(expected_cs) {
            let sol = row.result.as_ref().unwrap();
            assert_relative_eq!(sol.welfare.cs, want, max_relative = 1e-9);
        }

        let ratios = sweep(&uniform(), PolicyKind::Ratio, &[1.0, 2.0, 4.0], 0.0).unwrap();
        let expected_pu = [0.5, 0.8, 16.0 / 17.0];
        for (row, want) in ratios.rows.iter().zip(expected_pu) {
            let sol = row.result.as_ref().unwrap();
            assert_relative_eq!(sol.band.upper(), want, max_relative = 1e-9);
        }

        let exps = sweep(
            &exponential(),
            PolicyKind::Difference,
            &[0.0, 1.0, 2.0],
            0.0,
        )
        .unwrap();
        let expected_pl = [1.0, (-1.0f64).exp(), (-2.0f64).exp()];
        for (row, want) in exps.rows.iter().zip(expected_pl) {
            let sol = row.result.as_ref().unwrap();
            assert_relative_eq!(sol.band.lower(), want, max_relative = 1e-9);
        }
    }

    #[test]
    fn sweep_records_row_errors_inline() {
        let table = sweep(&uniform(), PolicyKind::Difference, &[0.5, 0.9, 2.0], 0.0).unwrap();
        assert!(table.rows[0].result.is_ok());
        assert!(table.rows[1].result.is_ok());
        assert!(matches!(
            table.rows[2].result,
            Err(SolverError::PolicyRange { .. })
        ));
    }

    #[test]
    fn sweep_rejects_unsorted_params() {
        assert!(matches!(
            sweep(&uniform(), PolicyKind::Difference, &[0.5, 0.25], 0.0),
            Err(SolverError::SweepParams)
        ));
    }

    #[test]
    fn dominance_uniform_closed_form() {
        let record = dominance_compare(&uniform(), 2.0, 0.0).unwrap();
        assert_relative_eq!(record.cs_level, 0.02, max_relative = 1e-8);
        assert_relative_eq!(record.eps_matched, 0.6, max_relative = 1e-7);
        assert_relative_eq!(record.ps_diff, 0.46, max_relative = 1e-8);
        assert_relative_eq!(record.ps_ratio, 0.40, max_relative = 1e-8);
        assert!(record.ps_diff >= record.ps_ratio - 1e-8);
        assert!(record.ts_diff >= record.ts_ratio - 1e-8);
    }

    #[test]
    fn dominance_at_gamma_one_collapses() {
        let record = dominance_compare(&exponential(), 1.0, 0.0).unwrap();
        assert!(record.eps_matched.abs() < 1e-9);
        assert_relative_eq!(record.ps_diff, record.ps_ratio, max_relative = 1e-8);
        assert_relative_eq!(record.ts_diff, record.ts_ratio, max_relative = 1e-8);
    }

    #[test]
    fn divergent_power_law_has_no_interior_optimum() {
        // Shape below one: revenue rises in the price without bound, so the
        // uniform-price condition never changes sign.
        let m = DemandModel::power_law(1.0, 0.9).unwrap();
        assert!(matches!(
            Solver::new(&m, 0.0),
            Err(SolverError::Regularity { .. })
        ));
    }

    #[test]
    fn irregular_mixture_solves_with_warning() {
        // Two well-separated demand plateaus: the hazard dips between them,
        // so neither MHR nor a monotone virtual value certifies.
        let m = DemandModel::mixture_logistic(vec![25.0, 5.0], -10.0).unwrap();
        let solver = Solver::new(&m, 0.0).unwrap();
        assert!(!solver.regularity_certified());
        let s = solver.uniform_price().unwrap();
        assert!(s
            .warnings
            .iter()
            .any(|w| matches!(w, SolveWarning::RegularityUncertified)));
    }

    #[test]
    fn endpoint_parameters_clamp_with_warning() {
        let model = exponential();
        let solver = Solver::new(&model, 0.0).unwrap();
        let upper = solver.effective_upper();
        let s = solver.difference(upper * (1.0 - 1e-12)).unwrap();
        assert!(!s.binding);
        assert!(s
            .warnings
            .iter()
            .any(|w| matches!(w, SolveWarning::ParameterClamped { .. })));
    }
    #[test]
    fn whole_stack_runs_on_f32() {
        let model = DemandModel::<f32>::uniform(1.0).unwrap();
        let cfg = SolverConfig::<f32> {
            root: RootConfig {
                abs_tol: 1e-6,
                rel_tol: 1e-5,
                max_iter: 200,
            },
            welfare: crate::welfare::WelfareConfig {
                quad: crate::numerics::QuadConfig {
                    abs_tol: 1e-5,
                    rel_tol: 1e-4,
                    max_depth: 40,
                },
                force_quadrature: false,
                identity_rel_tol: 1e-3,
            },
            tail_mass: 1e-6,
            diagnose: true,
            scan_points: 256,
        };
        let solver = Solver::with_config(&model, 0.0, cfg).unwrap();
        let sol = solver.difference(0.5).unwrap();
        assert!((sol.band.lower() - 0.25).abs() < 1e-4);
        assert!((sol.welfare.ps - 0.4375).abs() < 1e-4);
    }
}
