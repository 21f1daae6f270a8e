//! Result files. JSON results carry version and config hash and nothing that
//! changes between reruns; wall-clock goes to a `<stem>.meta.json` sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use degennes_core::io::canonical_json;
use serde::Serialize;

use crate::config::{RunConfig, VERSION};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub config_hash: String,
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    metadata: &'a Metadata,
    config: &'a RunConfig,
    result: &'a T,
}

pub struct Run {
    pub meta: Metadata,
    pub config: RunConfig,
    started: Instant,
    written: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Run {
            meta: Metadata {
                command: command.into(),
                version: VERSION.into(),
                config_hash: config.hash(),
            },
            config,
            started: Instant::now(),
            written: Vec::new(),
        }
    }

    pub fn json<T: Serialize>(&self, result: &T) -> Result<String, CliError> {
        let env = Envelope {
            metadata: &self.meta,
            config: &self.config,
            result,
        };
        Ok(canonical_json(&env)? + "\n")
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::failed(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Writes the sidecar next to `anchor` when any file was written.
    pub fn finish(&mut self, anchor: &Path) -> Result<(), CliError> {
        if self.written.is_empty() {
            return Ok(());
        }
        #[derive(Serialize)]
        struct Sidecar<'a> {
            metadata: &'a Metadata,
            files: Vec<String>,
            wall_clock_seconds: f64,
            finished_unix: u64,
        }
        let side = Sidecar {
            metadata: &self.meta,
            files: self.written.iter().map(|p| p.display().to_string()).collect(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            finished_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let path = meta_path(anchor);
        let text = canonical_json(&side)? + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::failed(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// `dir/name.csv` → `dir/name.meta.json`; a directory gets `dir/<command>.meta.json`
/// via the caller passing `dir/<command>`.
pub fn meta_path(anchor: &Path) -> PathBuf {
    let stem = anchor
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    anchor.with_file_name(format!("{stem}.meta.json"))
}

/// Writes to standard output. A closed reader (`| head`) is not an error:
/// the command still finishes and reports its own exit code.
pub fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

macro_rules! outln {
    ($($t:tt)*) => {
        $crate::output::stdout(&(format!($($t)*) + "\n"))
    };
}
pub(crate) use outln;
