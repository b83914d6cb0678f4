use std::path::Path;

use aerotrace_core::series::format_timestamp;
use aerotrace_core::store::{apply_tier_policy, BlobBackend, BlobError, FsBackend};
use chrono::Utc;
use log::info;

use crate::args::StoreCommand;
use crate::error::{CliError, CliResult};
use crate::io::emit;

/// Bad addresses and missing or archived objects are the caller's data;
/// anything else is the backend failing.
fn classify(err: BlobError) -> CliError {
    match err {
        BlobError::InvalidNodeId(_)
        | BlobError::InvalidKey(_)
        | BlobError::NoSuchContainer(_)
        | BlobError::NotFound { .. }
        | BlobError::Archived { .. } => CliError::data(err.to_string()),
        BlobError::BackendUnavailable(_) | BlobError::Io(_) => CliError::backend(err.to_string()),
    }
}

fn open_store(root: &Path) -> CliResult<FsBackend> {
    if !root.is_dir() {
        return Err(CliError::at(root, "store root is not a directory"));
    }
    Ok(FsBackend::new(root))
}

fn containers(store: &FsBackend, node: Option<&str>) -> CliResult<Vec<String>> {
    match node {
        Some(n) => Ok(vec![n.to_string()]),
        None => store.list_containers().map_err(classify),
    }
}

pub fn run(cmd: &StoreCommand) -> CliResult {
    match cmd {
        StoreCommand::Ls { root, node } => {
            let store = open_store(&root.root)?;
            let mut lines = String::new();
            for c in containers(&store, node.as_deref())? {
                for obj in store.list(&c).map_err(classify)? {
                    lines.push_str(&format!(
                        "{}\t{}\t{}\t{}\n",
                        obj.blob,
                        obj.size,
                        obj.blob.tier(),
                        format_timestamp(obj.uploaded_at)
                    ));
                }
            }
            emit(None, |w| w.write_all(lines.as_bytes()))
        }
        StoreCommand::Get {
            root,
            node,
            key,
            out,
        } => {
            let store = open_store(&root.root)?;
            let bytes = store.get(node, key).map_err(classify)?;
            emit(out.as_deref(), |w| w.write_all(&bytes))
        }
        StoreCommand::TierSweep {
            root,
            node,
            archive_after,
            now,
        } => {
            let store = open_store(&root.root)?;
            let now = now.unwrap_or_else(Utc::now);
            let mut moved = Vec::new();
            for c in containers(&store, node.as_deref())? {
                moved.extend(apply_tier_policy(&store, &c, now, *archive_after).map_err(classify)?);
            }
            info!("{} object(s) archived", moved.len());
            let lines: String = moved.iter().map(|b| format!("{b}\n")).collect();
            emit(None, |w| w.write_all(lines.as_bytes()))
        }
    }
}
