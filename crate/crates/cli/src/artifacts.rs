use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "dense-orbits";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The versioned wrapper around every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub kind: String,
    pub data: T,
}

/// Writes artifacts stamped with one config's hash, remembering the file names.
pub struct Writer {
    hash: String,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            hash: config.hash(),
            written: Vec::new(),
        }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn json<T: Serialize>(&mut self, path: &Path, kind: &str, data: &T) -> CliResult<()> {
        let env = Envelope {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            config_hash: self.hash.clone(),
            kind: kind.to_string(),
            data,
        };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::io(path, e))?;
        text.push('\n');
        self.raw(path, text.as_bytes())
    }

    /// A CSV table; the first line is a comment carrying version and hash.
    pub fn csv(&mut self, path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut out = format!("# {TOOL} {VERSION} config {}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header).map_err(|e| CliError::io(path, e))?;
            for r in rows {
                w.write_record(r).map_err(|e| CliError::io(path, e))?;
            }
            w.flush().map_err(|e| CliError::io(path, e))?;
        }
        self.raw(path, &out)
    }

    pub fn text(&mut self, path: &Path, body: &str) -> CliResult<()> {
        self.raw(path, body.as_bytes())
    }

    fn raw(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }
}

/// Reads an artifact, accepting either an envelope or the bare payload.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<(Option<String>, T)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let schema = |e: serde_json::Error| CliError::Config(format!("{}: {e}", path.display()));
    if value.get("tool").is_some() && value.get("data").is_some() {
        let env: Envelope<T> = serde_json::from_value(value).map_err(schema)?;
        Ok((Some(env.kind), env.data))
    } else {
        Ok((None, serde_json::from_value(value).map_err(schema)?))
    }
}

/// `path` with its extension replaced by `csv`.
pub fn sibling_csv(path: &Path) -> PathBuf {
    path.with_extension("csv")
}
