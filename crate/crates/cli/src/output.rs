use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Failure tagged with the stage that produced it.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Train(String),
    Detect(String),
    Eval(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Train(_) => 3,
            CliError::Detect(_) => 4,
            CliError::Eval(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::Io(m)
            | CliError::Train(m)
            | CliError::Detect(m)
            | CliError::Eval(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes through a temp file in the target directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub feature: String,
    pub auc: f64,
    pub best_acc: f64,
    /// Threshold achieving `best_acc`; `"inf"` when every tick is called normal.
    #[serde(with = "egokit::eval::extended_f64")]
    pub threshold: f64,
    pub mean_theta_abnormal: f64,
    pub mean_theta_normal: f64,
    pub ticks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub smoothing_window: usize,
    /// Feature ids, best first.
    pub ranking: Vec<String>,
    pub entries: Vec<ReportEntry>,
}
