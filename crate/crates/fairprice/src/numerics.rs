//! Shared numerical kernel: bracketed root finding on monotone functions and
//! adaptive quadrature with semi-infinite upper limits.

use thiserror::Error;

use crate::Real;

/// Errors from the numerical kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError<R: Real> {
    /// The supplied bracket does not straddle a sign change.
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    NoSignChange { lo: R, hi: R, g_lo: R, g_hi: R },
    /// The root finder ran out of iterations; carries the last bracket.
    #[error("root not located in {max_iter} iterations; last bracket [{lo}, {hi}]")]
    RootIterations { max_iter: usize, lo: R, hi: R },
    /// The function produced a non-finite value inside the bracket.
    #[error("function evaluated to a non-finite value at {at}")]
    NonFinite { at: R },
    /// Quadrature hit the subdivision limit; carries the best estimate.
    #[error("quadrature tolerance not reached: estimate {estimate}, error bound {error}")]
    QuadAccuracy { estimate: R, error: R },
    /// Invalid tolerance or iteration budget.
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

/// Tolerances for [`find_root_monotone`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig<R> {
    pub abs_tol: R,
    pub rel_tol: R,
    pub max_iter: usize,
}

impl<R: Real> Default for RootConfig<R> {
    fn default() -> Self {
        Self {
            abs_tol: R::of(1e-12),
            rel_tol: R::of(1e-10),
            max_iter: 200,
        }
    }
}

impl<R: Real> RootConfig<R> {
    /// Tolerances near floating-point resolution, for solves whose residual
    /// feeds downstream checks.
    pub fn tight() -> Self {
        Self {
            abs_tol: R::of(1e-15),
            rel_tol: R::epsilon() * R::of(32.0),
            max_iter: 200,
        }
    }

    fn validate(&self) -> Result<(), NumericsError<R>> {
        if !(self.abs_tol > R::zero()) || !(self.rel_tol > R::zero()) {
            return Err(NumericsError::Config("root tolerances must be positive"));
        }
        if self.max_iter < 8 {
            return Err(NumericsError::Config("max_iter must be at least 8"));
        }
        Ok(())
    }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig<R> {
    pub abs_tol: R,
    pub rel_tol: R,
    pub max_depth: usize,
}

impl<R: Real> Default for QuadConfig<R> {
    fn default() -> Self {
        Self {
            abs_tol: R::of(1e-10),
            rel_tol: R::of(1e-9),
            max_depth: 50,
        }
    }
}

impl<R: Real> QuadConfig<R> {
    fn validate(&self) -> Result<(), NumericsError<R>> {
        if !(self.abs_tol > R::zero()) || !(self.rel_tol > R::zero()) {
            return Err(NumericsError::Config(
                "quadrature tolerances must be positive",
            ));
        }
        Ok(())
    }
}

/// Locates the root of a continuous function with a single sign change on
/// `bracket`, by bisection with secant acceleration. The iterate never leaves
/// the bracket, and a bisection step is forced whenever the previous step
/// failed to halve the bracket, so convergence is guaranteed.
///
/// Returns the bracket endpoint with the smaller residual once the bracket
/// width drops below `abs_tol + rel_tol * |x|`.
pub fn find_root_monotone<R, F>(
    mut g: F,
    bracket: (R, R),
    cfg: &RootConfig<R>,
) -> Result<R, NumericsError<R>>
where
    R: Real,
    F: FnMut(R) -> R,
{
    cfg.validate()?;
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::Config(
            "bracket must satisfy lo < hi and be finite",
        ));
    }
    let mut g_lo = g(lo);
    if !g_lo.is_finite() {
        return Err(NumericsError::NonFinite { at: lo });
    }
    if g_lo == R::zero() {
        return Ok(lo);
    }
    let mut g_hi = g(hi);
    if !g_hi.is_finite() {
        return Err(NumericsError::NonFinite { at: hi });
    }
    if g_hi == R::zero() {
        return Ok(hi);
    }
    if (g_lo > R::zero()) == (g_hi > R::zero()) {
        return Err(NumericsError::NoSignChange { lo, hi, g_lo, g_hi });
    }

    let half = R::of(0.5);
    let mut force_bisect = false;
    for _ in 0..cfg.max_iter {
        let width = hi - lo;
        let mid = lo + width * half;
        let tol = cfg.abs_tol + cfg.rel_tol * mid.abs();
        // Stop on a narrow bracket, or when no representable midpoint exists.
        if width <= tol || !(mid > lo && mid < hi) {
            return Ok(if g_lo.abs() <= g_hi.abs() { lo } else { hi });
        }

        let x = if force_bisect {
            mid
        } else {
            let denom = g_hi - g_lo;
            let secant = hi - g_hi * width / denom;
            if secant > lo && secant < hi {
                secant
            } else {
                mid
            }
        };

        let g_x = g(x);
        if !g_x.is_finite() {
            return Err(NumericsError::NonFinite { at: x });
        }
        if g_x == R::zero() {
            return Ok(x);
        }
        if (g_x > R::zero()) == (g_lo > R::zero()) {
            lo = x;
            g_lo = g_x;
        } else {
            hi = x;
            g_hi = g_x;
        }
        force_bisect = hi - lo > width * half;
    }
    Err(NumericsError::RootIterations {
        max_iter: cfg.max_iter,
        lo,
        hi,
    })
}

// 15-point Kronrod nodes on [0, 1] side (symmetric), with the embedded
// 7-point Gauss rule on the odd-indexed nodes. Values from the QUADPACK QK15
// rule.
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.000_000_000_000_000,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// One Gauss-Kronrod 15(7) panel: returns (integral, error bound).
fn gk15<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R) -> (R, R) {
    let half = R::of(0.5);
    let center = (a + b) * half;
    let halflen = (b - a) * half;

    let fc = f(center);
    let mut kronrod = fc * R::of(KRONROD_WEIGHTS[7]);
    let mut gauss = fc * R::of(GAUSS_WEIGHTS[3]);
    let mut resabs = fc.abs() * R::of(KRONROD_WEIGHTS[7]);

    let mut samples = [(R::zero(), R::zero()); 7];
    for i in 0..7 {
        let offset = halflen * R::of(KRONROD_NODES[i]);
        let f_lo = f(center - offset);
        let f_hi = f(center + offset);
        let wk = R::of(KRONROD_WEIGHTS[i]);
        kronrod = kronrod + wk * (f_lo + f_hi);
        resabs = resabs + wk * (f_lo.abs() + f_hi.abs());
        if i % 2 == 1 {
            gauss = gauss + R::of(GAUSS_WEIGHTS[i / 2]) * (f_lo + f_hi);
        }
        samples[i] = (f_lo, f_hi);
    }

    // Error rescaling as in QUADPACK: compare against the deviation of f
    // from its mean so nearly-constant integrands report tiny errors.
    let mean = kronrod * half;
    let mut resasc = R::of(KRONROD_WEIGHTS[7]) * (fc - mean).abs();
    for i in 0..7 {
        let wk = R::of(KRONROD_WEIGHTS[i]);
        resasc = resasc + wk * ((samples[i].0 - mean).abs() + (samples[i].1 - mean).abs());
    }
    resasc = resasc * halflen.abs();
    resabs = resabs * halflen.abs();

    let integral = kronrod * halflen;
    let mut err = ((kronrod - gauss) * halflen).abs();
    if resasc > R::zero() && err > R::zero() {
        let scale = (R::of(200.0) * err / resasc).powf(R::of(1.5));
        err = if scale < R::one() {
            resasc * scale
        } else {
            resasc
        };
    }
    let floor = R::of(50.0) * R::epsilon() * resabs;
    if floor > err {
        err = floor;
    }
    (integral, err)
}

/// Adaptive quadrature of `f` over `[a, b]`. An infinite `b` is mapped onto
/// `[0, 1)` with `v = a + t/(1-t)` before integrating, which works for any
/// integrand with a dominated tail.
pub fn integrate<R, F>(f: F, a: R, b: R, cfg: &QuadConfig<R>) -> Result<R, NumericsError<R>>
where
    R: Real,
    F: Fn(R) -> R,
{
    cfg.validate()?;
    if b.is_infinite() {
        let one = R::one();
        let transformed = move |t: R| {
            let rest = one - t;
            let v = a + t / rest;
            let jac = one / (rest * rest);
            let fv = f(v);
            if fv == R::zero() {
                R::zero()
            } else {
                fv * jac
            }
        };
        return adaptive(&transformed, R::zero(), one, cfg);
    }
    adaptive(&f, a, b, cfg)
}

fn adaptive<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    cfg: &QuadConfig<R>,
) -> Result<R, NumericsError<R>> {
    if a == b {
        return Ok(R::zero());
    }
    if !(a < b) {
        return Err(NumericsError::Config(
            "integration bounds must satisfy a <= b",
        ));
    }

    let (whole, whole_err) = gk15(f, a, b);
    if !whole.is_finite() {
        return Err(NumericsError::NonFinite { at: a });
    }
    let budget = cfg.abs_tol.max(cfg.rel_tol * whole.abs());
    if whole_err <= budget {
        return Ok(whole);
    }

    // Depth-first subdivision; each panel receives a tolerance share
    // proportional to its length.
    let span = b - a;
    let mut total = R::zero();
    let mut leftover_err = R::zero();
    let mut failed = false;
    let mut stack: Vec<(R, R, usize)> = vec![(a, b, 0)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (value, err) = gk15(f, lo, hi);
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { at: lo });
        }
        let share = budget * ((hi - lo) / span);
        if err <= share || hi - lo <= R::epsilon() * span {
            total = total + value;
            leftover_err = leftover_err + err;
        } else if depth >= cfg.max_depth {
            total = total + value;
            leftover_err = leftover_err + err;
            failed = true;
        } else {
            let mid = lo + (hi - lo) * R::of(0.5);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    if failed && leftover_err > budget {
        return Err(NumericsError::QuadAccuracy {
            estimate: total,
            error: leftover_err,
        });
    }
    Ok(total)
}
