//! Demand estimation from purchase data.
//!
//! Loads `(price, bought)` observations, optionally with covariates, from
//! CSV, fits a logistic take-up model by Newton's method on the
//! log-likelihood, and converts the fit into a [`DemandModel`]:
//! `sigma(a + b p)` becomes a normalized truncated logistic, and a covariate
//! fit `sigma(coefs . x + beta p)` becomes a mixture over the empirical
//! covariate distribution of the fitted records.
//!
//! Published fits for two classic willingness-to-pay surveys ship as the
//! presets `coke` and `cake`.

use std::path::Path;

use thiserror::Error;

use crate::demand::{sigmoid, softplus, DemandError, DemandModel};
use crate::Real;

/// Errors from loading and fitting.
#[derive(Debug, Error)]
pub enum IngestError<R: Real> {
    #[error("failed to read csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("malformed rows: {}", format_bad_rows(.rows))]
    Malformed { rows: Vec<(u64, String)> },
    #[error("dataset is empty")]
    Empty,
    #[error("need at least two records with both outcomes present")]
    DegenerateOutcomes,
    #[error("covariate vectors must share one dimension across the dataset")]
    CovariateDimension,
    #[error("perfect separation detected after {iterations} iterations")]
    Separation { iterations: usize },
    #[error("fit did not converge in {max_iter} iterations (gradient norm {gradient_norm})")]
    NoConvergence {
        max_iter: usize,
        gradient_norm: R,
        last: Box<LogisticFit<R>>,
    },
    #[error("fitted price coefficient {0} is not negative: not a downward-sloping demand")]
    PriceSlopeSign(R),
    #[error("covariate fit requires the fitted records to build the mixture")]
    MissingRecords,
    #[error("singular normal equations in the Newton step")]
    SingularStep,
    #[error(transparent)]
    Demand(#[from] DemandError<R>),
}

fn format_bad_rows(rows: &[(u64, String)]) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(8)
        .map(|(line, why)| format!("line {line}: {why}"))
        .collect();
    let mut out = shown.join("; ");
    if rows.len() > 8 {
        out.push_str(&format!("; ... {} more", rows.len() - 8));
    }
    out
}

/// One survey/transaction observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PurchaseRecord<R> {
    pub price: R,
    pub bought: bool,
    pub covariates: Option<Vec<R>>,
}

/// Where the price of a record comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceSource<R> {
    /// Read the price from a column.
    Column(String),
    /// Net present value of the payment stream minus the amount lent:
    /// `payment * sum over tau of (1 + rate)^-tau - amount`.
    Loan {
        payment: String,
        term: String,
        amount: String,
        rate: R,
    },
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema<R> {
    pub price: PriceSource<R>,
    pub bought: String,
    pub covariates: Vec<String>,
}

/// Discounted value of an installment loan to the lender: the net present
/// value of the payments minus the amount lent. `rate` is per period.
pub fn loan_price<R: Real>(monthly_payment: R, term: u32, loan_amount: R, rate: R) -> R {
    let base = R::one() + rate;
    let mut discount_sum = R::zero();
    for tau in 1..=term {
        discount_sum = discount_sum + base.powi(-(tau as i32));
    }
    monthly_payment * discount_sum - loan_amount
}

/// Per-period rate used for loan pricing when none is supplied (0.12%).
pub fn default_loan_rate<R: Real>() -> R {
    R::of(0.0012)
}

fn parse_field<R: Real>(raw: &str) -> Option<R> {
    raw.trim().parse::<f64>().ok().and_then(R::from_f64)
}

fn parse_bought(raw: &str) -> Option<bool> {
    match raw.trim() {
        "1" => Some(true),
        "0" => Some(false),
        other => match other.to_ascii_lowercase().as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        },
    }
}

/// Loads purchase records from a headered CSV file. Every mapped column must
/// exist; rows with missing or unparseable mapped fields abort the load with
/// their line numbers.
pub fn load_csv<R: Real>(
    path: &Path,
    schema: &CsvSchema<R>,
) -> Result<Vec<PurchaseRecord<R>>, IngestError<R>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize, IngestError<R>> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };

    let bought_idx = column(&schema.bought)?;
    let covariate_idx: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| column(c))
        .collect::<Result<_, _>>()?;
    enum PriceIdx<R> {
        Column(usize),
        Loan {
            payment: usize,
            term: usize,
            amount: usize,
            rate: R,
        },
    }
    let price_idx = match &schema.price {
        PriceSource::Column(name) => PriceIdx::Column(column(name)?),
        PriceSource::Loan {
            payment,
            term,
            amount,
            rate,
        } => PriceIdx::Loan {
            payment: column(payment)?,
            term: column(term)?,
            amount: column(amount)?,
            rate: *rate,
        },
    };

    let mut records = Vec::new();
    let mut bad_rows: Vec<(u64, String)> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = (i + 2) as u64; // 1-based, after the header
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                bad_rows.push((line, e.to_string()));
                continue;
            }
        };
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let price = match &price_idx {
            PriceIdx::Column(idx) => parse_field::<R>(field(*idx)),
            PriceIdx::Loan {
                payment,
                term,
                amount,
                rate,
            } => {
                let p = parse_field::<R>(field(*payment));
                let t = field(*term).trim().parse::<u32>().ok();
                let a = parse_field::<R>(field(*amount));
                match (p, t, a) {
                    (Some(p), Some(t), Some(a)) => Some(loan_price(p, t, a, *rate)),
                    _ => None,
                }
            }
        };
        let bought = parse_bought(field(bought_idx));
        let covariates: Option<Vec<R>> = if covariate_idx.is_empty() {
            Some(Vec::new())
        } else {
            covariate_idx
                .iter()
                .map(|&idx| parse_field::<R>(field(idx)))
                .collect()
        };
        match (price, bought, covariates) {
            (Some(price), Some(bought), Some(covs)) => records.push(PurchaseRecord {
                price,
                bought,
                covariates: if covs.is_empty() { None } else { Some(covs) },
            }),
            (p, b, c) => {
                let mut missing = Vec::new();
                if p.is_none() {
                    missing.push("price");
                }
                if b.is_none() {
                    missing.push("bought");
                }
                if c.is_none() {
                    missing.push("covariates");
                }
                bad_rows.push((
                    line,
                    format!("unparseable field(s): {}", missing.join(", ")),
                ));
            }
        }
    }
    if !bad_rows.is_empty() {
        return Err(IngestError::Malformed { rows: bad_rows });
    }
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(records)
}

/// Maximum-likelihood estimates of the take-up model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<R> {
    pub intercept: R,
    pub price_coef: R,
    pub covariate_coefs: Option<Vec<R>>,
    pub log_likelihood: R,
    pub converged: bool,
    pub iterations: usize,
}

/// Newton / IRLS options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig<R> {
    pub gradient_tol: R,
    pub max_iter: usize,
    /// Ridge floor on the Hessian diagonal against collinear covariates.
    pub ridge: R,
}

impl<R: Real> Default for FitConfig<R> {
    fn default() -> Self {
        Self {
            gradient_tol: R::of(1e-8),
            max_iter: 100,
            ridge: R::of(1e-10),
        }
    }
}

/// Solves the symmetric system `m x = rhs` by Gaussian elimination with
/// partial pivoting; the systems here are tiny (covariates + 2).
#[allow(clippy::needless_range_loop)]
fn solve_linear<R: Real>(mut m: Vec<Vec<R>>, mut rhs: Vec<R>) -> Option<Vec<R>> {
    let n = rhs.len();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() <= R::zero() || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                let delta = factor * m[col][k];
                m[row][k] = m[row][k] - delta;
            }
            rhs[row] = rhs[row] - factor * rhs[col];
        }
    }
    let mut x = vec![R::zero(); n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc = acc - m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

fn log_likelihood<R: Real>(rows: &[Vec<R>], outcomes: &[bool], coefs: &[R]) -> R {
    let mut ll = R::zero();
    for (row, &y) in rows.iter().zip(outcomes) {
        let eta = row
            .iter()
            .zip(coefs)
            .fold(R::zero(), |acc, (&x, &b)| acc + x * b);
        let y_term = if y { eta } else { R::zero() };
        ll = ll + y_term - softplus(eta);
    }
    ll
}

/// Fits `P[bought] = sigma(a + coefs . x + b price)` by Newton's method with
/// step halving, so the log-likelihood never decreases across iterations.
#[allow(clippy::needless_range_loop)]
pub fn fit_logistic<R: Real>(
    records: &[PurchaseRecord<R>],
    use_covariates: bool,
    cfg: &FitConfig<R>,
) -> Result<LogisticFit<R>, IngestError<R>> {
    if records.len() < 2 {
        return Err(IngestError::DegenerateOutcomes);
    }
    let n_bought = records.iter().filter(|r| r.bought).count();
    if n_bought == 0 || n_bought == records.len() {
        return Err(IngestError::DegenerateOutcomes);
    }

    let covariate_dim = if use_covariates {
        let dim = records
            .first()
            .and_then(|r| r.covariates.as_ref())
            .map(|c| c.len())
            .ok_or(IngestError::CovariateDimension)?;
        if dim == 0 {
            return Err(IngestError::CovariateDimension);
        }
        dim
    } else {
        0
    };

    // Design rows: [1, covariates.., price].
    let mut rows = Vec::with_capacity(records.len());
    let mut outcomes = Vec::with_capacity(records.len());
    for r in records {
        let mut row = Vec::with_capacity(covariate_dim + 2);
        row.push(R::one());
        if use_covariates {
            let covs = r
                .covariates
                .as_ref()
                .ok_or(IngestError::CovariateDimension)?;
            if covs.len() != covariate_dim {
                return Err(IngestError::CovariateDimension);
            }
            row.extend_from_slice(covs);
        }
        row.push(r.price);
        rows.push(row);
        outcomes.push(r.bought);
    }

    let dim = covariate_dim + 2;
    // Standardize the non-intercept columns; raw price scales in the
    // hundreds make the normal equations too ill-conditioned for Newton to
    // reach a tight gradient tolerance.
    let n_rows = R::of(rows.len() as f64);
    let mut means = vec![R::zero(); dim];
    let mut sds = vec![R::one(); dim];
    for j in 1..dim {
        let mean = rows.iter().fold(R::zero(), |acc, r| acc + r[j]) / n_rows;
        let var = rows.iter().fold(R::zero(), |acc, r| {
            let d = r[j] - mean;
            acc + d * d
        }) / n_rows;
        means[j] = mean;
        let sd = var.sqrt();
        sds[j] = if sd > R::of(1e-12) { sd } else { R::one() };
    }
    for row in &mut rows {
        for j in 1..dim {
            row[j] = (row[j] - means[j]) / sds[j];
        }
    }

    let mut coefs = vec![R::zero(); dim];
    let mut ll = log_likelihood(&rows, &outcomes, &coefs);
    let mut gradient_norm = R::infinity();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        let mut gradient = vec![R::zero(); dim];
        let mut hessian = vec![vec![R::zero(); dim]; dim];
        let mut all_separated = true;
        for (row, &y) in rows.iter().zip(&outcomes) {
            let eta = row
                .iter()
                .zip(&coefs)
                .fold(R::zero(), |acc, (&x, &b)| acc + x * b);
            let mu = sigmoid(eta);
            let resid = if y { R::one() - mu } else { -mu };
            let weight = mu * (R::one() - mu);
            for i in 0..dim {
                gradient[i] = gradient[i] + row[i] * resid;
                for j in i..dim {
                    hessian[i][j] = hessian[i][j] + weight * row[i] * row[j];
                }
            }
            let margin_ok = if y {
                eta > R::of(10.0)
            } else {
                eta < R::of(-10.0)
            };
            all_separated = all_separated && margin_ok;
        }
        for i in 0..dim {
            for j in 0..i {
                hessian[i][j] = hessian[j][i];
            }
            hessian[i][i] = hessian[i][i] + cfg.ridge;
        }

        gradient_norm = gradient.iter().fold(R::zero(), |acc, g| acc.max(g.abs()));
        if gradient_norm < cfg.gradient_tol {
            converged = true;
            break;
        }
        if all_separated {
            return Err(IngestError::Separation { iterations: iter });
        }

        let step = solve_linear(hessian, gradient).ok_or(IngestError::SingularStep)?;
        let step_norm = step.iter().fold(R::zero(), |acc, s| acc.max(s.abs()));
        if step_norm < R::of(1e-4) {
            // Tiny step: inside Newton's quadratic-convergence basin, where
            // line-search comparisons drown in summation rounding.
            for (c, s) in coefs.iter_mut().zip(&step) {
                *c = *c + *s;
            }
            ll = log_likelihood(&rows, &outcomes, &coefs);
            continue;
        }
        // Halve the step until the likelihood improves.
        let mut scale = R::one();
        let mut accepted = false;
        for _ in 0..30 {
            let candidate: Vec<R> = coefs
                .iter()
                .zip(&step)
                .map(|(&c, &s)| c + scale * s)
                .collect();
            let candidate_ll = log_likelihood(&rows, &outcomes, &candidate);
            if candidate_ll.is_finite() && candidate_ll >= ll {
                coefs = candidate;
                ll = candidate_ll;
                accepted = true;
                break;
            }
            scale = scale * R::of(0.5);
        }
        if !accepted {
            // No improving step at any scale: stationary to rounding.
            converged = gradient_norm < cfg.gradient_tol * R::of(1e4);
            break;
        }
    }

    // Map the coefficients back to the raw column scales.
    let mut raw = vec![R::zero(); dim];
    raw[0] = coefs[0];
    for j in 1..dim {
        raw[j] = coefs[j] / sds[j];
        raw[0] = raw[0] - coefs[j] * means[j] / sds[j];
    }
    let fit = LogisticFit {
        intercept: raw[0],
        price_coef: raw[dim - 1],
        covariate_coefs: if use_covariates {
            Some(raw[1..dim - 1].to_vec())
        } else {
            None
        },
        log_likelihood: ll,
        converged,
        iterations,
    };
    if !converged {
        return Err(IngestError::NoConvergence {
            max_iter: cfg.max_iter,
            gradient_norm,
            last: Box::new(fit),
        });
    }
    Ok(fit)
}

/// Turns a fit into a demand model. Plain fits become a truncated logistic;
/// covariate fits become a mixture over the supplied records' covariates,
/// one component per distinct intercept with empirical weights.
pub fn to_demand<R: Real>(
    fit: &LogisticFit<R>,
    records: Option<&[PurchaseRecord<R>]>,
) -> Result<DemandModel<R>, IngestError<R>> {
    if !(fit.price_coef < R::zero()) {
        return Err(IngestError::PriceSlopeSign(fit.price_coef));
    }
    match &fit.covariate_coefs {
        None => Ok(DemandModel::truncated_logistic(
            fit.intercept,
            fit.price_coef,
        )?),
        Some(coefs) => {
            let records = records.ok_or(IngestError::MissingRecords)?;
            let mut components: Vec<(R, R)> = Vec::new();
            for r in records {
                let covs = r
                    .covariates
                    .as_ref()
                    .ok_or(IngestError::CovariateDimension)?;
                if covs.len() != coefs.len() {
                    return Err(IngestError::CovariateDimension);
                }
                let intercept = covs
                    .iter()
                    .zip(coefs)
                    .fold(fit.intercept, |acc, (&x, &c)| acc + x * c);
                match components
                    .iter_mut()
                    .find(|(existing, _)| *existing == intercept)
                {
                    Some((_, weight)) => *weight = *weight + R::one(),
                    None => components.push((intercept, R::one())),
                }
            }
            if components.is_empty() {
                return Err(IngestError::Empty);
            }
            Ok(DemandModel::mixture_logistic_weighted(
                components,
                fit.price_coef,
            )?)
        }
    }
}

/// Published logistic demand fits: `coke` and `cake` willingness-to-pay
/// surveys.
pub fn preset<R: Real>(name: &str) -> Option<DemandModel<R>> {
    let (a, b) = match name {
        "coke" => (3.94, -3.44),
        "cake" => (4.58, -3.72),
        _ => return None,
    };
    Some(DemandModel::truncated_logistic(R::of(a), R::of(b)).expect("preset parameters are valid"))
}

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &["coke", "cake"]
}
