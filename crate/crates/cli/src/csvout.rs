//! CSV emission with `#`-prefixed metadata: every file records the command,
//! version, seed and the fully resolved section config, so a run can be
//! reproduced from its output alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct CsvOutput {
    lines: Vec<String>,
}

impl CsvOutput {
    pub fn new(
        command: &str,
        experiment: Option<&str>,
        seed: u64,
        resolved_config_json: &str,
        header: &str,
    ) -> Self {
        let mut lines = vec![format!("# ehm {command} v{VERSION}")];
        if let Some(id) = experiment {
            lines.push(format!("# experiment: {id}"));
        }
        lines.push(format!("# seed: {seed}"));
        lines.push(format!("# config: {resolved_config_json}"));
        lines.push(header.to_string());
        Self { lines }
    }

    pub fn push_row(&mut self, row: String) {
        self.lines.push(row);
    }

    /// Extra `#` lines appended after the standard metadata block.
    pub fn push_comment(&mut self, comment: &str) {
        let at = self.lines.len() - 1; // keep the header row last
        self.lines.insert(at, format!("# {comment}"));
    }

    pub fn write_to(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|e| {
            CliError::Invalid(format!("cannot write {}: {e}", path.display()))
        })?;
        let mut w = BufWriter::new(file);
        for line in &self.lines {
            writeln!(w, "{line}")
                .map_err(|e| CliError::Invalid(format!("write {}: {e}", path.display())))?;
        }
        w.flush()
            .map_err(|e| CliError::Invalid(format!("write {}: {e}", path.display())))
    }
}
