//! Flat `key=value` text used for config files, store sidecars and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KvError {
    #[error("line {line}: expected `key=value`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: invalid value `{value}`")]
    Invalid { key: String, value: String },
}

/// Parsed key/value document. Blank lines and `#` comments are ignored;
/// whitespace around keys and values is trimmed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: BTreeMap<String, String>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(KvError::Malformed { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Malformed { line: i + 1 });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(KvError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key)
            .ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `key` with `FromStr`, falling back to `default` when absent.
    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, KvError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(key, v)),
        }
    }

    /// Durations use humantime syntax (`10s`, `5m`, `1h`, `30days`).
    pub fn duration_or(&self, key: &str, default: Duration) -> Result<Duration, KvError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => humantime::parse_duration(v).map_err(|_| invalid(key, v)),
        }
    }
}

fn invalid(key: &str, value: &str) -> KvError {
    KvError::Invalid {
        key: key.to_string(),
        value: value.to_string(),
    }
}

/// Renders pairs one per line, in the given order.
pub fn render<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let doc = KvDoc::parse("# node\nnode_id = n-1\n\nsample_interval=10s\n").unwrap();
        assert_eq!(doc.get("node_id"), Some("n-1"));
        assert_eq!(
            doc.duration_or("sample_interval", Duration::ZERO).unwrap(),
            Duration::from_secs(10)
        );
        assert_eq!(doc.parse_or("video_fps", 10u8).unwrap(), 10);
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(
            KvDoc::parse("a=1\nnonsense"),
            Err(KvError::Malformed { line: 2 })
        );
        assert!(matches!(
            KvDoc::parse("a=1\na=2"),
            Err(KvError::Duplicate { .. })
        ));
        let doc = KvDoc::parse("fps=ten").unwrap();
        assert!(matches!(
            doc.parse_or("fps", 1u8),
            Err(KvError::Invalid { .. })
        ));
    }
}
