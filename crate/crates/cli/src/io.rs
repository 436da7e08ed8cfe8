//! File formats, output and exit codes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use permanental_core::{DenseMatrix, Error, PermanentalSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// Bad flags or unreadable input.
    Usage(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// JSON `{"n", "rows"}` or whitespace-delimited rows.
pub fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    } else {
        Ok(DenseMatrix::parse_text(&text)?)
    }
}

/// `{"alpha": .., "kernel": {..}}` or `{"alpha": .., "a": {..}}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpecFile {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<DenseMatrix>,
}

pub fn read_spec(path: &Path) -> CliResult<PermanentalSpec> {
    let text = read_text(path)?;
    let file: SpecFile = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    match (file.kernel, file.a) {
        (Some(k), None) => Ok(PermanentalSpec::from_kernel(&k, file.alpha)?),
        (None, Some(a)) => Ok(PermanentalSpec::from_a(&a, file.alpha)?),
        _ => Err(CliError::Usage(format!("{}: give exactly one of \"kernel\" and \"a\"", path.display()))),
    }
}

pub fn parse_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {:?} as a number", t.trim())))
        })
        .collect()
}

pub fn parse_counts(flag: &str, text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {:?} as a count", t.trim())))
        })
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

/// Shortest round-trip formatting, `NaN` and infinities spelled out.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
