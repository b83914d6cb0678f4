use std::path::PathBuf;
use std::time::Duration;

use crate::kv::{KvDoc, KvError};
use crate::store::validate_node_id;

use super::NodeError;

/// Node runtime settings, read from flat `key=value` text:
///
/// ```text
/// node_id=node-01
/// buffer_dir=/var/lib/aerotrace/buffer
/// sample_interval=10s
/// video_chunk_len=5m
/// video_fps=10
/// frame_width=1296
/// frame_height=730
/// retention=1day
/// queue_depth=64
/// upload_workers=2
/// ```
///
/// Only `node_id` and `buffer_dir` are required.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub node_id: String,
    pub sample_interval: Duration,
    pub video_chunk_len: Duration,
    pub video_fps: u8,
    pub frame_width: usize,
    pub frame_height: usize,
    pub retention: Duration,
    pub buffer_dir: PathBuf,
    pub queue_depth: usize,
    pub upload_workers: usize,
}

impl NodeConfig {
    pub const KEYS: &'static [&'static str] = &[
        "node_id",
        "buffer_dir",
        "sample_interval",
        "video_chunk_len",
        "video_fps",
        "frame_width",
        "frame_height",
        "retention",
        "queue_depth",
        "upload_workers",
    ];

    pub fn new(node_id: &str, buffer_dir: impl Into<PathBuf>) -> Self {
        Self {
            node_id: node_id.to_string(),
            sample_interval: Duration::from_secs(10),
            video_chunk_len: Duration::from_secs(300),
            video_fps: 10,
            frame_width: 1296,
            frame_height: 730,
            retention: Duration::from_secs(86_400),
            buffer_dir: buffer_dir.into(),
            queue_depth: 64,
            upload_workers: 2,
        }
    }

    /// Reads the documented keys and ignores any others; callers that own
    /// extra keys check for strays themselves.
    pub fn from_doc(doc: &KvDoc) -> Result<Self, NodeError> {
        let defaults = Self::new(doc.require("node_id")?, doc.require("buffer_dir")?);
        let cfg = Self {
            sample_interval: doc.duration_or("sample_interval", defaults.sample_interval)?,
            video_chunk_len: doc.duration_or("video_chunk_len", defaults.video_chunk_len)?,
            video_fps: doc.parse_or("video_fps", defaults.video_fps)?,
            frame_width: doc.parse_or("frame_width", defaults.frame_width)?,
            frame_height: doc.parse_or("frame_height", defaults.frame_height)?,
            retention: doc.duration_or("retention", defaults.retention)?,
            queue_depth: doc.parse_or("queue_depth", defaults.queue_depth)?,
            upload_workers: doc.parse_or("upload_workers", defaults.upload_workers)?,
            ..defaults
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, NodeError> {
        Self::from_doc(&KvDoc::parse(text)?)
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        let bad = |key: &str, value: String| {
            Err(NodeError::Config(KvError::Invalid {
                key: key.to_string(),
                value,
            }))
        };
        validate_node_id(&self.node_id).or_else(|_| bad("node_id", self.node_id.clone()))?;
        // CSV timestamps carry whole seconds
        if self.sample_interval.is_zero() || self.sample_interval.subsec_nanos() != 0 {
            return bad("sample_interval", format!("{:?}", self.sample_interval));
        }
        if self.video_chunk_len.is_zero() || self.video_chunk_len.subsec_nanos() != 0 {
            return bad("video_chunk_len", format!("{:?}", self.video_chunk_len));
        }
        if self.video_fps == 0 {
            return bad("video_fps", "0".into());
        }
        for (key, v) in [
            ("frame_width", self.frame_width),
            ("frame_height", self.frame_height),
        ] {
            if v == 0 || v > u16::MAX as usize {
                return bad(key, v.to_string());
            }
        }
        if self.queue_depth == 0 {
            return bad("queue_depth", "0".into());
        }
        if self.upload_workers == 0 {
            return bad("upload_workers", "0".into());
        }
        Ok(())
    }
}
