use std::fs::{self, File};
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{
    validate_address, validate_node_id, BlobBackend, BlobError, BlobRef, ObjectInfo, Tier,
};
use crate::kv::{self, KvDoc};
use crate::series::{format_timestamp, parse_timestamp, Timestamp};

const META_SUFFIX: &str = ".meta";
const PART_SUFFIX: &str = ".part";

/// Objects live at `<root>/<container>/<key>`; each has a sidecar
/// `<key>.meta` holding `tier`, `uploaded_at` and `size` as key/value text.
/// An object without a sidecar is an interrupted upload and is invisible.
#[derive(Debug, Clone)]
pub struct FsBackend {
    root: PathBuf,
}

impl FsBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn container_dir(&self, container: &str) -> Result<PathBuf, BlobError> {
        validate_node_id(container)?;
        let dir = self.root.join(container);
        if dir.is_dir() {
            Ok(dir)
        } else {
            Err(BlobError::NoSuchContainer(container.to_string()))
        }
    }

    fn object_paths(&self, container: &str, key: &str) -> Result<(PathBuf, PathBuf), BlobError> {
        validate_address(container, key)?;
        if key.ends_with(META_SUFFIX) || key.ends_with(PART_SUFFIX) {
            return Err(BlobError::InvalidKey(key.to_string()));
        }
        let dir = self.container_dir(container)?;
        let data = dir.join(key);
        let meta = sidecar_path(&data);
        Ok((data, meta))
    }
}

fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(META_SUFFIX);
    PathBuf::from(s)
}

fn part_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(PART_SUFFIX);
    PathBuf::from(s)
}

#[derive(Debug)]
struct Meta {
    tier: Tier,
    uploaded_at: Timestamp,
    size: u64,
}

fn read_meta(path: &Path) -> Result<Meta, BlobError> {
    let text = fs::read_to_string(path)?;
    let bad = || BlobError::BackendUnavailable(format!("corrupt sidecar {}", path.display()));
    let doc = KvDoc::parse(&text).map_err(|_| bad())?;
    Ok(Meta {
        tier: doc
            .get("tier")
            .and_then(|t| t.parse().ok())
            .ok_or_else(bad)?,
        uploaded_at: doc
            .get("uploaded_at")
            .and_then(parse_timestamp)
            .ok_or_else(bad)?,
        size: doc
            .get("size")
            .and_then(|s| s.parse().ok())
            .ok_or_else(bad)?,
    })
}

fn write_meta(path: &Path, meta: &Meta) -> io::Result<()> {
    let text = kv::render([
        ("tier", meta.tier.to_string()),
        ("uploaded_at", format_timestamp(meta.uploaded_at)),
        ("size", meta.size.to_string()),
    ]);
    let tmp = part_path(path);
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)
}

fn not_found(container: &str, key: &str) -> BlobError {
    BlobError::NotFound {
        container: container.to_string(),
        key: key.to_string(),
    }
}

impl BlobBackend for FsBackend {
    fn ensure_container(&self, container: &str) -> Result<(), BlobError> {
        validate_node_id(container)?;
        fs::create_dir_all(self.root.join(container))
            .map_err(|e| BlobError::BackendUnavailable(format!("{}: {e}", self.root.display())))
    }

    fn list_containers(&self) -> Result<Vec<String>, BlobError> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut names = Vec::new();
        for entry in entries {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            if let Some(name) = entry.file_name().to_str() {
                if validate_node_id(name).is_ok() {
                    names.push(name.to_string());
                }
            }
        }
        names.sort();
        Ok(names)
    }

    fn put(
        &self,
        container: &str,
        key: &str,
        data: &mut dyn Read,
        uploaded_at: Timestamp,
    ) -> Result<u64, BlobError> {
        let (path, meta_path) = self.object_paths(container, key)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        // a replaced object is invisible while its new bytes land
        match fs::remove_file(&meta_path) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
        let tmp = part_path(&path);
        let mut out = BufWriter::new(File::create(&tmp)?);
        let size = io::copy(data, &mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, &path)?;
        write_meta(
            &meta_path,
            &Meta {
                tier: Tier::Cool,
                uploaded_at,
                size,
            },
        )?;
        Ok(size)
    }

    fn get(&self, container: &str, key: &str) -> Result<Vec<u8>, BlobError> {
        let (path, meta_path) = self.object_paths(container, key)?;
        if !meta_path.is_file() {
            return Err(not_found(container, key));
        }
        if read_meta(&meta_path)?.tier == Tier::Archive {
            return Err(BlobError::Archived {
                container: container.to_string(),
                key: key.to_string(),
            });
        }
        Ok(fs::read(path)?)
    }

    fn list(&self, container: &str) -> Result<Vec<ObjectInfo>, BlobError> {
        let dir = self.container_dir(container)?;
        let mut out = Vec::new();
        for entry in WalkDir::new(&dir).sort_by_file_name() {
            let entry = entry.map_err(|e| BlobError::Io(e.into()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let Some(rel) = entry.path().strip_prefix(&dir).ok().and_then(Path::to_str) else {
                continue;
            };
            if rel.ends_with(META_SUFFIX) || rel.ends_with(PART_SUFFIX) {
                continue;
            }
            let meta_path = sidecar_path(entry.path());
            if !meta_path.is_file() {
                continue;
            }
            let key = rel.replace(std::path::MAIN_SEPARATOR, "/");
            let meta = read_meta(&meta_path)?;
            out.push(ObjectInfo {
                blob: BlobRef::new(container, &key)?.with_tier(meta.tier),
                size: meta.size,
                uploaded_at: meta.uploaded_at,
            });
        }
        out.sort_by(|a, b| a.blob.key().cmp(b.blob.key()));
        Ok(out)
    }

    fn set_tier(&self, container: &str, key: &str, tier: Tier) -> Result<(), BlobError> {
        let (_, meta_path) = self.object_paths(container, key)?;
        if !meta_path.is_file() {
            return Err(not_found(container, key));
        }
        let mut meta = read_meta(&meta_path)?;
        meta.tier = tier;
        write_meta(&meta_path, &meta)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    #[test]
    fn on_disk_layout() {
        let dir = tempfile::tempdir().unwrap();
        let b = FsBackend::new(dir.path());
        b.ensure_container("node-01").unwrap();
        let t = Utc.with_ymd_and_hms(2022, 7, 1, 16, 5, 0).unwrap();
        b.put("node-01", "video/a.fseq", &mut &b"payload"[..], t)
            .unwrap();
        assert_eq!(
            fs::read(dir.path().join("node-01/video/a.fseq")).unwrap(),
            b"payload"
        );
        let meta = fs::read_to_string(dir.path().join("node-01/video/a.fseq.meta")).unwrap();
        assert_eq!(
            meta,
            "tier=cool\nuploaded_at=2022-07-01T16:05:00Z\nsize=7\n"
        );
    }

    #[test]
    fn sidecarless_objects_are_invisible() {
        let dir = tempfile::tempdir().unwrap();
        let b = FsBackend::new(dir.path());
        b.ensure_container("n").unwrap();
        fs::create_dir_all(dir.path().join("n/video")).unwrap();
        fs::write(dir.path().join("n/video/half.fseq"), b"x").unwrap();
        assert!(b.list("n").unwrap().is_empty());
        assert!(matches!(
            b.get("n", "video/half.fseq"),
            Err(BlobError::NotFound { .. })
        ));
    }

    #[test]
    fn reserved_suffixes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let b = FsBackend::new(dir.path());
        b.ensure_container("n").unwrap();
        let t = Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap();
        assert!(matches!(
            b.put("n", "csv/x.meta", &mut &b""[..], t),
            Err(BlobError::InvalidKey(_))
        ));
    }
}
