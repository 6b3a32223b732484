//! Output files that are removed again unless the command completes.

use std::path::{Path, PathBuf};

use crate::commands::CliError;

#[derive(Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `write` for `path` and remembers the file for cleanup.
    pub fn write<F>(&mut self, path: &Path, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&Path) -> Result<(), CliError>,
    {
        self.written.push(path.to_path_buf());
        write(path)
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        self.write(path, |p| std::fs::write(p, text).map_err(|e| CliError::io(p, e)))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            if path.exists() {
                if let Err(e) = std::fs::remove_file(path) {
                    log::warn!("could not remove partial output {}: {e}", path.display());
                }
            }
        }
    }
}
