use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::frame::GrayFrame;
use crate::fseq::{chunk_file_name, FseqError, FseqWriter};
use crate::sensor::{csv_file_name, sample_to_csv_row, SensorSample, CSV_HEADER};
use crate::series::Timestamp;
use crate::store::{BlobError, BlobRef};

use super::NodeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChunkKind {
    Video,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkMeta {
    pub node_id: String,
    pub kind: ChunkKind,
    /// First frame instant for video, UTC midnight for CSV.
    pub start: Timestamp,
    pub path: PathBuf,
    pub size_bytes: u64,
}

impl ChunkMeta {
    pub fn video(node_id: &str, start: Timestamp, buffer_dir: &Path) -> Self {
        Self {
            node_id: node_id.to_string(),
            kind: ChunkKind::Video,
            start,
            path: buffer_dir.join(chunk_file_name(node_id, start)),
            size_bytes: 0,
        }
    }

    pub fn csv(node_id: &str, day: NaiveDate, buffer_dir: &Path) -> Self {
        Self {
            node_id: node_id.to_string(),
            kind: ChunkKind::Csv,
            start: day.and_hms_opt(0, 0, 0).expect("midnight").and_utc(),
            path: buffer_dir.join(csv_file_name(node_id, day)),
            size_bytes: 0,
        }
    }

    pub fn file_name(&self) -> &str {
        self.path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
    }

    pub fn blob_ref(&self) -> Result<BlobRef, BlobError> {
        match self.kind {
            ChunkKind::Video => BlobRef::video(&self.node_id, self.file_name()),
            ChunkKind::Csv => BlobRef::csv(&self.node_id, self.file_name()),
        }
    }
}

/// Classifies a buffer file by name.
pub(crate) fn kind_of(file_name: &str) -> Option<ChunkKind> {
    if file_name.ends_with(".fseq") {
        Some(ChunkKind::Video)
    } else if file_name.ends_with(".csv") {
        Some(ChunkKind::Csv)
    } else {
        None
    }
}

pub(crate) fn part_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".part");
    PathBuf::from(s)
}

/// A video chunk being written. Bytes go to `<name>.part`; the final name
/// only appears once the header is patched and the file synced.
pub(crate) struct OpenChunk {
    pub meta: ChunkMeta,
    writer: FseqWriter<BufWriter<File>>,
}

impl OpenChunk {
    pub fn create(
        meta: ChunkMeta,
        width: usize,
        height: usize,
        fps: u8,
    ) -> Result<Self, NodeError> {
        let writer = FseqWriter::create(&part_path(&meta.path), width, height, fps)?;
        Ok(Self { meta, writer })
    }

    pub fn push(&mut self, frame: &GrayFrame) -> Result<(), FseqError> {
        self.writer.write_frame(frame)
    }

    pub fn frames(&self) -> u32 {
        self.writer.frames_written()
    }

    pub fn seal(self) -> Result<ChunkMeta, NodeError> {
        let (_, out) = self.writer.finish()?;
        let file = out
            .into_inner()
            .map_err(|e| NodeError::Io(e.into_error()))?;
        file.sync_all()?;
        drop(file);
        let mut meta = self.meta;
        fs::rename(part_path(&meta.path), &meta.path)?;
        meta.size_bytes = fs::metadata(&meta.path)?.len();
        Ok(meta)
    }

    pub fn discard(self) {
        let _ = fs::remove_file(part_path(&self.meta.path));
    }
}

/// Writes `frames` as one sealed FSEQ file at `meta.path`.
pub fn seal_video_chunk(
    frames: &[GrayFrame],
    fps: u8,
    meta: ChunkMeta,
) -> Result<ChunkMeta, NodeError> {
    let first = frames.first().ok_or(NodeError::EmptyChunk)?;
    let mut chunk = OpenChunk::create(meta, first.width(), first.height(), fps)?;
    for f in frames {
        chunk.push(f)?;
    }
    chunk.seal()
}

/// The daily CSV being appended to. Rows are flushed as written so a crash
/// loses at most the row in flight.
pub(crate) struct DailyCsv {
    pub meta: ChunkMeta,
    pub day: NaiveDate,
    out: BufWriter<File>,
}

impl DailyCsv {
    pub fn open(node_id: &str, day: NaiveDate, buffer_dir: &Path) -> Result<Self, NodeError> {
        let meta = ChunkMeta::csv(node_id, day, buffer_dir);
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&meta.path)?;
        let fresh = file.metadata()?.len() == 0;
        // contents are about to change; any earlier confirmation is stale
        let _ = fs::remove_file(super::retention::marker_path(&meta.path));
        let mut out = BufWriter::new(file);
        if fresh {
            writeln!(out, "{CSV_HEADER}")?;
        }
        Ok(Self { meta, day, out })
    }

    pub fn append(&mut self, sample: &SensorSample) -> Result<(), NodeError> {
        writeln!(self.out, "{}", sample_to_csv_row(sample))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn seal(self) -> Result<ChunkMeta, NodeError> {
        let file = self
            .out
            .into_inner()
            .map_err(|e| NodeError::Io(e.into_error()))?;
        file.sync_all()?;
        let mut meta = self.meta;
        meta.size_bytes = file.metadata()?.len();
        Ok(meta)
    }
}
