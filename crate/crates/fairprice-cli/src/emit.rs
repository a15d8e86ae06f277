//! Output plumbing: 15-significant-digit numbers, atomic file writes, and
//! machine-readable errors with stable exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};

use fairprice::demand::DemandError;
use fairprice::ingest::IngestError;
use fairprice::solver::SolverError;
use fairprice::welfare::WelfareError;
use serde_json::Value;

/// Rounds to 15 significant digits; report numbers serialize through this so
/// emitted text parses back to the emitted value exactly.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// JSON value with report precision.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(sig15(x)) {
        Some(n) => Value::Number(n),
        None => Value::Null,
    }
}

/// CSV cell with report precision (shortest text that parses back exactly).
pub fn cell(x: f64) -> String {
    format!("{}", sig15(x))
}

/// Error category mapped onto the exit-code contract:
/// 2 configuration, 3 numeric/regularity, 4 data.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Data(_) => "data",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Data(m) => m,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Prints the error as JSON on stderr and exits with the mapped code.
    pub fn report_and_exit(self) -> ! {
        let payload = serde_json::json!({
            "error": { "kind": self.kind(), "message": self.message() }
        });
        eprintln!("{payload}");
        std::process::exit(self.exit_code());
    }
}

impl From<SolverError<f64>> for CliError {
    fn from(e: SolverError<f64>) -> Self {
        match &e {
            SolverError::PolicyRange { .. }
            | SolverError::InvalidCost { .. }
            | SolverError::SweepParams
            | SolverError::OracleGrid { .. }
            | SolverError::Demand(DemandError::Parameter { .. })
            | SolverError::Demand(DemandError::GridTooCoarse { .. }) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<WelfareError<f64>> for CliError {
    fn from(e: WelfareError<f64>) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<DemandError<f64>> for CliError {
    fn from(e: DemandError<f64>) -> Self {
        match &e {
            DemandError::Parameter { .. } | DemandError::GridTooCoarse { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<IngestError<f64>> for CliError {
    fn from(e: IngestError<f64>) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Writes to stdout, or atomically (temp file + rename) to `--out`.
pub fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
        Some(path) => write_atomic(path, content)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
    }
}

fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
            std::process::id()
        )),
        None => PathBuf::from(format!(".fairprice.tmp{}", std::process::id())),
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
