use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::warn;

use crate::clock::to_chrono;
use crate::kv::{self, KvDoc};
use crate::series::{format_timestamp, parse_timestamp, Timestamp};

const MARKER_SUFFIX: &str = ".confirmed";

/// `<file>.confirmed`, written once the store acknowledged the whole file.
pub fn marker_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(MARKER_SUFFIX);
    PathBuf::from(s)
}

pub fn write_confirmation(path: &Path, confirmed_at: Timestamp) -> io::Result<()> {
    fs::write(
        marker_path(path),
        kv::render([("confirmed_at", format_timestamp(confirmed_at))]),
    )
}

pub fn read_confirmation(path: &Path) -> Option<Timestamp> {
    let text = fs::read_to_string(marker_path(path)).ok()?;
    KvDoc::parse(&text)
        .ok()?
        .get("confirmed_at")
        .and_then(parse_timestamp)
}

pub(crate) fn is_marker(file_name: &str) -> bool {
    file_name.ends_with(MARKER_SUFFIX)
}

/// Deletes buffer files confirmed more than `retention` before `now`, with
/// their markers. Unconfirmed files are never touched. Failed deletes are
/// logged and retried on the next sweep.
pub fn retention_sweep(buffer_dir: &Path, now: Timestamp, retention: Duration) -> Vec<PathBuf> {
    let entries = match fs::read_dir(buffer_dir) {
        Ok(e) => e,
        Err(e) => {
            warn!("retention sweep: cannot list {}: {e}", buffer_dir.display());
            return Vec::new();
        }
    };
    let keep_for = to_chrono(retention);
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !is_marker(n))
        })
        .collect();
    paths.sort();

    let mut deleted = Vec::new();
    for path in paths {
        let Some(confirmed_at) = read_confirmation(&path) else {
            continue;
        };
        if now - confirmed_at <= keep_for {
            continue;
        }
        match fs::remove_file(&path) {
            Ok(()) => {
                let _ = fs::remove_file(marker_path(&path));
                deleted.push(path);
            }
            Err(e) => warn!("retention sweep: cannot delete {}: {e}", path.display()),
        }
    }
    deleted
}
