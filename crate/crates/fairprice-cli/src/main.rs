//! `fairprice`: constrained personalized-pricing analysis at the command
//! line. Solves optimal price bands under difference/ratio caps, sweeps
//! regulatory intensity into plot-ready tables, runs demand diagnostics,
//! and fits logistic demand from purchase data.

// Negated comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod emit;
mod model_source;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairprice::demand::{check_regularity, DiagnosticGrid};
use fairprice::ingest::{self, CsvSchema, FitConfig, PriceSource};
use fairprice::solver::{Policy, PolicyKind, Solution, Solver, SolverConfig};
use fairprice::welfare;
use fairprice::DemandModel64;
use serde_json::json;

use emit::{cell, num, write_output, CliError};
use model_source::{ModelArgs, ModelFile};

#[derive(Parser)]
#[command(
    name = "fairprice",
    version,
    about = "Optimal monopoly pricing under caps on the personalized price range"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one constrained-pricing instance.
    Solve(SolveArgs),
    /// Sweep a policy-parameter grid into a trade-off table.
    Sweep(SweepArgs),
    /// Hazard-rate and regularity diagnostics for a demand model.
    Check(CheckArgs),
    /// Threshold eps0 of the difference policy.
    Threshold(ThresholdArgs),
    /// Compare the two policies at matched consumer surplus.
    Dominance(DominanceArgs),
    /// Fit logistic demand from a purchase CSV.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyOpt {
    Diff,
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Marginal cost.
    #[arg(long, default_value_t = 0.0)]
    cost: f64,
    /// Tail mass at which infinite supports are truncated (default 1e-12).
    #[arg(long)]
    tail_mass: Option<f64>,
    /// Output path; stdout when omitted. Written atomically.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Constraint type.
    #[arg(long, value_enum)]
    policy: PolicyOpt,
    /// Difference cap (with --policy diff).
    #[arg(long)]
    eps: Option<f64>,
    /// Ratio cap (with --policy ratio).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    policy: PolicyOpt,
    /// Grid start.
    #[arg(long)]
    from: Option<f64>,
    /// Grid end (inclusive).
    #[arg(long)]
    to: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    steps: Option<usize>,
    /// Log-spaced grid instead of linear.
    #[arg(long, default_value_t = false)]
    log: bool,
    /// Explicit comma-separated parameter list (alternative to --from/--to/--steps).
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Regularity level to certify against.
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    /// Diagnostic grid size.
    #[arg(long, default_value_t = 1001)]
    grid_points: usize,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct DominanceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Single ratio cap to compare at.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = false)]
    log: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Purchase data: headered CSV.
    #[arg(long, value_name = "PATH")]
    csv: PathBuf,
    /// Column with the offered price.
    #[arg(long, default_value = "price")]
    price_col: String,
    /// Column with the binary take-up outcome.
    #[arg(long, default_value = "bought")]
    bought_col: String,
    /// Covariate columns (fits a mixture demand over them).
    #[arg(long, value_delimiter = ',')]
    covariate_cols: Option<Vec<String>>,
    /// Derive the price as the loan's net present value instead of reading
    /// a price column.
    #[arg(long, default_value_t = false)]
    loan_price: bool,
    #[arg(long, default_value = "monthly_payment")]
    payment_col: String,
    #[arg(long, default_value = "term")]
    term_col: String,
    #[arg(long, default_value = "loan_amount")]
    amount_col: String,
    /// Per-period rate for loan pricing.
    #[arg(long, default_value_t = 0.0012)]
    rate: f64,
    /// Save the fitted demand model as JSON, loadable via --model-file.
    #[arg(long, value_name = "PATH")]
    save_model: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
        Command::Threshold(args) => cmd_threshold(args),
        Command::Dominance(args) => cmd_dominance(args),
        Command::Fit(args) => cmd_fit(args),
    };
    if let Err(e) = result {
        e.report_and_exit();
    }
}

/// Default solver options, with `FAIRPRICE_TOL` overriding the root and
/// quadrature tolerances (absolute = value, relative = 10x value).
fn solver_config(tail_mass: Option<f64>) -> Result<SolverConfig<f64>, CliError> {
    let mut cfg = SolverConfig::default();
    if let Ok(raw) = std::env::var("FAIRPRICE_TOL") {
        let tol: f64 = raw
            .parse()
            .map_err(|_| CliError::config(format!("FAIRPRICE_TOL is not a number: {raw:?}")))?;
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::config("FAIRPRICE_TOL must be a positive number"));
        }
        cfg.root.abs_tol = tol;
        cfg.root.rel_tol = tol * 10.0;
        cfg.welfare.quad.abs_tol = tol;
        cfg.welfare.quad.rel_tol = tol * 10.0;
    }
    if let Some(t) = tail_mass {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::config("--tail-mass must lie in (0, 1)"));
        }
        cfg.tail_mass = t;
    }
    Ok(cfg)
}

fn validate_cost(cost: f64) -> Result<(), CliError> {
    if !cost.is_finite() || cost < 0.0 {
        return Err(CliError::config("--cost must be finite and non-negative"));
    }
    Ok(())
}

fn policy_from(
    args_policy: PolicyOpt,
    eps: Option<f64>,
    gamma: Option<f64>,
) -> Result<Policy<f64>, CliError> {
    match args_policy {
        PolicyOpt::Diff => {
            if gamma.is_some() {
                return Err(CliError::config("--gamma does not apply to --policy diff"));
            }
            let eps = eps.ok_or_else(|| CliError::config("--policy diff requires --eps"))?;
            Ok(Policy::Difference { eps })
        }
        PolicyOpt::Ratio => {
            if eps.is_some() {
                return Err(CliError::config("--eps does not apply to --policy ratio"));
            }
            let gamma = gamma.ok_or_else(|| CliError::config("--policy ratio requires --gamma"))?;
            Ok(Policy::Ratio { gamma })
        }
    }
}

fn parameter_grid(
    from: Option<f64>,
    to: Option<f64>,
    steps: Option<usize>,
    log: bool,
    explicit: Option<Vec<f64>>,
) -> Result<Vec<f64>, CliError> {
    if let Some(params) = explicit {
        if from.is_some() || to.is_some() || steps.is_some() {
            return Err(CliError::config(
                "--params conflicts with --from/--to/--steps",
            ));
        }
        if params.is_empty() {
            return Err(CliError::config("--params must be non-empty"));
        }
        return Ok(params);
    }
    let (from, to, steps) = match (from, to, steps) {
        (Some(f), Some(t), Some(s)) => (f, t, s),
        _ => {
            return Err(CliError::config(
                "provide --from, --to, and --steps, or an explicit --params list",
            ))
        }
    };
    if steps < 1 {
        return Err(CliError::config("--steps must be at least 1"));
    }
    if !(to > from) && steps > 1 {
        return Err(CliError::config("--to must exceed --from"));
    }
    if log && !(from > 0.0) {
        return Err(CliError::config("--log requires --from > 0"));
    }
    let n = steps;
    let grid = (0..n)
        .map(|i| {
            if n == 1 {
                from
            } else {
                let t = i as f64 / (n - 1) as f64;
                if log {
                    from * (to / from).powf(t)
                } else {
                    from + (to - from) * t
                }
            }
        })
        .collect();
    Ok(grid)
}

fn policy_json(policy: &Policy<f64>) -> serde_json::Value {
    json!({ "kind": policy.kind().to_string(), "param": num(policy.param()) })
}

fn solution_json(model: &DemandModel64, cost: f64, sol: &Solution<f64>) -> serde_json::Value {
    json!({
        "model": model.to_string(),
        "cost": num(cost),
        "policy": policy_json(&sol.policy),
        "p_l": num(sol.band.lower()),
        "p_u": num(sol.band.upper()),
        "ps": num(sol.welfare.ps),
        "cs": num(sol.welfare.cs),
        "ts": num(sol.welfare.ts),
        "foc_residual": num(sol.foc_residual),
        "binding": sol.binding,
        "warnings": sol.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    validate_cost(args.common.cost)?;
    let model = args.common.model.resolve()?;
    let cfg = solver_config(args.common.tail_mass)?;
    let policy = policy_from(args.policy, args.eps, args.gamma)?;
    let solver = Solver::with_config(&model, args.common.cost, cfg)?;
    let sol = solver.solve(policy)?;

    let content = match args.format {
        Format::Json => {
            format!("{:#}", solution_json(&model, args.common.cost, &sol))
        }
        Format::Csv => {
            let mut s = String::from("policy,param,p_l,p_u,cs,ps,ts,foc_residual,binding\n");
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                sol.policy.kind(),
                cell(sol.policy.param()),
                cell(sol.band.lower()),
                cell(sol.band.upper()),
                cell(sol.welfare.cs),
                cell(sol.welfare.ps),
                cell(sol.welfare.ts),
                cell(sol.foc_residual),
                sol.binding
            ));
            s
        }
    };
    write_output(&args.common.out, &content)
}

fn csv_quote(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    validate_cost(args.common.cost)?;
    let model = args.common.model.resolve()?;
    let cfg = solver_config(args.common.tail_mass)?;
    let params = parameter_grid(args.from, args.to, args.steps, args.log, args.params)?;
    let kind = match args.policy {
        PolicyOpt::Diff => PolicyKind::Difference,
        PolicyOpt::Ratio => PolicyKind::Ratio,
    };
    let solver = Solver::with_config(&model, args.common.cost, cfg)?;
    let efficient = welfare::efficient_trade_surplus(&model, args.common.cost, &cfg.welfare)?;
    let table = solver.sweep(kind, &params)?;

    let ok_rows = table.rows.iter().filter(|r| r.result.is_ok()).count();
    let content = match args.format {
        Format::Csv => {
            let mut s = format!(
                "# model={} cost={} policy={} tail_mass={} root_abs_tol={} root_rel_tol={} quad_abs_tol={} quad_rel_tol={} efficient_trade={}\n",
                table.model,
                cell(table.cost),
                table.kind,
                cell(cfg.tail_mass),
                cell(cfg.root.abs_tol),
                cell(cfg.root.rel_tol),
                cell(cfg.welfare.quad.abs_tol),
                cell(cfg.welfare.quad.rel_tol),
                cell(efficient),
            );
            s.push_str("param,p_l,p_u,cs,ps,ts,error\n");
            for row in &table.rows {
                match &row.result {
                    Ok(sol) => s.push_str(&format!(
                        "{},{},{},{},{},{},\n",
                        cell(row.param),
                        cell(sol.band.lower()),
                        cell(sol.band.upper()),
                        cell(sol.welfare.cs),
                        cell(sol.welfare.ps),
                        cell(sol.welfare.ts),
                    )),
                    Err(e) => s.push_str(&format!(
                        "{},,,,,,{}\n",
                        cell(row.param),
                        csv_quote(&e.to_string())
                    )),
                }
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| match &row.result {
                    Ok(sol) => json!({
                        "param": num(row.param),
                        "p_l": num(sol.band.lower()),
                        "p_u": num(sol.band.upper()),
                        "cs": num(sol.welfare.cs),
                        "ps": num(sol.welfare.ps),
                        "ts": num(sol.welfare.ts),
                    }),
                    Err(e) => json!({ "param": num(row.param), "error": e.to_string() }),
                })
                .collect();
            format!(
                "{:#}",
                json!({
                    "model": table.model,
                    "cost": num(table.cost),
                    "policy": table.kind.to_string(),
                    "efficient_trade": num(efficient),
                    "rows": rows,
                })
            )
        }
    };
    write_output(&args.common.out, &content)?;
    if ok_rows == 0 {
        let first_err = table
            .rows
            .iter()
            .find_map(|r| r.result.as_ref().err())
            .expect("no rows succeeded");
        return Err(CliError::Numeric(format!(
            "every sweep row failed; first error: {first_err}"
        )));
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), CliError> {
    validate_cost(args.common.cost)?;
    let model = args.common.model.resolve()?;
    let tail_mass = args.common.tail_mass.unwrap_or(1e-12);
    if !(tail_mass > 0.0 && tail_mass < 1.0) {
        return Err(CliError::config("--tail-mass must lie in (0, 1)"));
    }
    let grid = DiagnosticGrid {
        points: args.grid_points,
        upper: Some(model.effective_upper(tail_mass)),
    };
    let report = check_regularity(&model, args.k, &grid)?;

    let k_strong = match report.k_strong_regular_up_to {
        None => serde_json::Value::Null,
        Some(v) if v.is_infinite() => json!("inf"),
        Some(v) => num(v),
    };
    let violations: Vec<serde_json::Value> = report
        .mhr_violations
        .iter()
        .take(32)
        .map(|(v, h0, h1)| json!({ "v": num(*v), "h": num(*h0), "h_next": num(*h1) }))
        .collect();
    // Hazard samples for plotting, capped at 257 points.
    let n_samples = report.grid.points.min(257);
    let samples: Vec<serde_json::Value> = (0..n_samples)
        .map(|i| {
            let v = report.grid.upper * i as f64 / (n_samples - 1) as f64;
            json!({ "v": num(v), "hazard": num(model.hazard(v)) })
        })
        .collect();

    let content = format!(
        "{:#}",
        json!({
            "model": model.to_string(),
            "k": num(args.k),
            "is_mhr": report.is_mhr,
            "mhr_violations": violations,
            "mhr_violation_count": report.mhr_violations.len(),
            "w_monotone": report.w_monotone,
            "k_strong_regular_up_to": k_strong,
            "certifies_k": report.certifies_k,
            "grid": {
                "points": report.grid.points,
                "lower": num(report.grid.lower),
                "upper": num(report.grid.upper),
            },
            "hazard_samples": samples,
        })
    );
    write_output(&args.common.out, &content)
}

fn cmd_threshold(args: ThresholdArgs) -> Result<(), CliError> {
    validate_cost(args.common.cost)?;
    let model = args.common.model.resolve()?;
    let cfg = solver_config(args.common.tail_mass)?;
    let solver = Solver::with_config(&model, args.common.cost, cfg)?;
    let eps0 = solver.epsilon_threshold()?;
    let content = format!(
        "{:#}",
        json!({
            "model": model.to_string(),
            "cost": num(args.common.cost),
            "eps0": num(eps0),
        })
    );
    write_output(&args.common.out, &content)
}

fn cmd_dominance(args: DominanceArgs) -> Result<(), CliError> {
    validate_cost(args.common.cost)?;
    let model = args.common.model.resolve()?;
    let cfg = solver_config(args.common.tail_mass)?;
    let gammas = match args.gamma {
        Some(g) => {
            if args.from.is_some() || args.to.is_some() || args.steps.is_some() {
                return Err(CliError::config(
                    "--gamma conflicts with --from/--to/--steps",
                ));
            }
            vec![g]
        }
        None => parameter_grid(args.from, args.to, args.steps, args.log, None)?,
    };
    let solver = Solver::with_config(&model, args.common.cost, cfg)?;
    let rows: Vec<(f64, Result<_, _>)> = gammas
        .iter()
        .map(|&g| (g, solver.dominance_compare(g)))
        .collect();

    let ok_rows = rows.iter().filter(|(_, r)| r.is_ok()).count();
    let content = match args.format {
        Format::Csv => {
            let mut s = format!("# model={} cost={}\n", model, cell(args.common.cost));
            s.push_str("gamma,cs_level,eps_matched,ps_diff,ps_ratio,ts_diff,ts_ratio,error\n");
            for (gamma, result) in &rows {
                match result {
                    Ok(rec) => s.push_str(&format!(
                        "{},{},{},{},{},{},{},\n",
                        cell(*gamma),
                        cell(rec.cs_level),
                        cell(rec.eps_matched),
                        cell(rec.ps_diff),
                        cell(rec.ps_ratio),
                        cell(rec.ts_diff),
                        cell(rec.ts_ratio),
                    )),
                    Err(e) => s.push_str(&format!(
                        "{},,,,,,,{}\n",
                        cell(*gamma),
                        csv_quote(&e.to_string())
                    )),
                }
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|(gamma, result)| match result {
                    Ok(rec) => json!({
                        "gamma": num(*gamma),
                        "cs_level": num(rec.cs_level),
                        "eps_matched": num(rec.eps_matched),
                        "ps_diff": num(rec.ps_diff),
                        "ps_ratio": num(rec.ps_ratio),
                        "ts_diff": num(rec.ts_diff),
                        "ts_ratio": num(rec.ts_ratio),
                    }),
                    Err(e) => json!({ "gamma": num(*gamma), "error": e.to_string() }),
                })
                .collect();
            format!(
                "{:#}",
                json!({ "model": model.to_string(), "cost": num(args.common.cost), "rows": rows })
            )
        }
    };
    write_output(&args.common.out, &content)?;
    if ok_rows == 0 {
        let first_err = rows
            .iter()
            .find_map(|(_, r)| r.as_ref().err())
            .expect("no rows succeeded");
        return Err(CliError::from(first_err.clone()));
    }
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let price = if args.loan_price {
        PriceSource::Loan {
            payment: args.payment_col.clone(),
            term: args.term_col.clone(),
            amount: args.amount_col.clone(),
            rate: args.rate,
        }
    } else {
        PriceSource::Column(args.price_col.clone())
    };
    let covariates = args.covariate_cols.clone().unwrap_or_default();
    let use_covariates = !covariates.is_empty();
    let schema = CsvSchema {
        price,
        bought: args.bought_col.clone(),
        covariates,
    };
    let records = ingest::load_csv::<f64>(&args.csv, &schema)?;
    let fit = ingest::fit_logistic(&records, use_covariates, &FitConfig::default())?;
    let model = ingest::to_demand(&fit, if use_covariates { Some(&records) } else { None })?;

    let mut saved: Option<String> = None;
    if let Some(path) = &args.save_model {
        let file = ModelFile::from_model(&model)?;
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| CliError::Numeric(format!("cannot serialize model: {e}")))?;
        write_output(&Some(path.clone()), &text)?;
        saved = Some(path.display().to_string());
    }

    let covariate_coefs = match &fit.covariate_coefs {
        Some(coefs) => serde_json::Value::Array(coefs.iter().map(|&c| num(c)).collect()),
        None => serde_json::Value::Null,
    };
    let content = format!(
        "{:#}",
        json!({
            "records": records.len(),
            "intercept": num(fit.intercept),
            "price_coef": num(fit.price_coef),
            "covariate_coefs": covariate_coefs,
            "log_likelihood": num(fit.log_likelihood),
            "converged": fit.converged,
            "iterations": fit.iterations,
            "model": model.to_string(),
            "model_file": saved,
        })
    );
    write_output(&args.out, &content)
}
