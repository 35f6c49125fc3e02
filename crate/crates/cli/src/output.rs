use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cvmfe_core::{ErrorClass, VERSION};
use serde::Serialize;

/// Failure of a command, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Invalid(String),
    Core(cvmfe_core::Error),
}

impl CliError {
    pub fn io(path: &Path, err: io::Error) -> Self {
        let what = match err.kind() {
            io::ErrorKind::NotFound => "file not found".to_string(),
            _ => err.to_string(),
        };
        CliError::Io(format!("{}: {what}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(msg) | CliError::Invalid(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<cvmfe_core::Error> for CliError {
    fn from(e: cvmfe_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "cvmfe-core")]
    core: &'static str,
    #[serde(rename = "cvmfe-cli")]
    cli: &'static str,
}

#[derive(Serialize)]
pub struct RunManifest<'a, C> {
    pub command: &'a str,
    pub config: &'a C,
    versions: Versions,
    pub outputs: Vec<String>,
}

/// Tracks files written by one command and emits the manifest.
pub struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs { written: Vec::new() }
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult {
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Writes to `path`, or to standard output when no path is given.
    pub fn emit(&mut self, path: Option<&Path>, text: &str) -> CliResult {
        match path {
            Some(p) => self.write(p, text.as_bytes()),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|()| out.flush())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))
            }
        }
    }

    /// Writes the manifest to `path` if any file was written.
    pub fn finish<C: Serialize>(self, command: &str, config: &C, path: Option<PathBuf>) -> CliResult {
        let Some(path) = path else { return Ok(()) };
        if self.written.is_empty() {
            return Ok(());
        }
        let manifest = RunManifest {
            command,
            config,
            versions: Versions {
                core: VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            outputs: self.written.iter().map(|p| p.display().to_string()).collect(),
        };
        fs::write(&path, to_json(&manifest)).map_err(|e| CliError::io(&path, e))
    }
}

/// `<path>.manifest.json` next to the primary output.
pub fn manifest_beside(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}
