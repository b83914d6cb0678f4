//! File plumbing shared by the subcommands. Every failure names its path.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use aerotrace_core::series::{read_series_csv, TimeSeries};

use crate::error::{CliError, CliResult};

pub fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::at(path, e))
}

pub fn read_series(path: &Path, time_column: &str, value_column: &str) -> CliResult<TimeSeries> {
    read_series_csv(open(path)?, time_column, value_column).map_err(|e| CliError::at(path, e))
}

/// Runs `body` against `out`, or stdout when `out` is `None`.
pub fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::at(path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)
                .and_then(|()| w.flush())
                .map_err(|e| CliError::at(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)
                .and_then(|()| lock.flush())
                .map_err(|e| CliError::data(format!("stdout: {e}")))
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::at(path, e))
}
