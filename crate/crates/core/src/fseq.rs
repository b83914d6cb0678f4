//! FSEQ: raw grayscale frame-sequence container.
//!
//! ```text
//! "FSEQ1"  width:u16  height:u16  fps:u8  frame_count:u32   (little-endian)
//! frame_count × (width × height) bytes, row-major, top-left origin
//! ```
//!
//! Chunk files are named `<node_id>_YYYYMMDD_HHMMSS.fseq` after the UTC
//! instant of their first frame.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::frame::GrayFrame;
use crate::series::Timestamp;

pub const MAGIC: &[u8; 5] = b"FSEQ1";
pub const HEADER_LEN: u64 = 14;
const COUNT_OFFSET: u64 = 10;

#[derive(Debug, Error)]
pub enum FseqError {
    #[error("short write: {0}")]
    ShortWrite(io::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt container: {0}")]
    CorruptContainer(String),
    #[error("frame is {got_w}x{got_h}, container is {want_w}x{want_h}")]
    DimensionMismatch {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("invalid header: {0}")]
    InvalidHeader(&'static str),
}

fn write_err(e: io::Error) -> FseqError {
    match e.kind() {
        io::ErrorKind::WriteZero | io::ErrorKind::StorageFull => FseqError::ShortWrite(e),
        _ => FseqError::Io(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FseqHeader {
    pub width: u16,
    pub height: u16,
    pub fps: u8,
    pub frame_count: u32,
}

impl FseqHeader {
    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[..5].copy_from_slice(MAGIC);
        b[5..7].copy_from_slice(&self.width.to_le_bytes());
        b[7..9].copy_from_slice(&self.height.to_le_bytes());
        b[9] = self.fps;
        b[10..14].copy_from_slice(&self.frame_count.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN as usize]) -> Result<Self, FseqError> {
        if &b[..5] != MAGIC {
            return Err(FseqError::CorruptContainer("bad magic".into()));
        }
        let h = Self {
            width: u16::from_le_bytes([b[5], b[6]]),
            height: u16::from_le_bytes([b[7], b[8]]),
            fps: b[9],
            frame_count: u32::from_le_bytes([b[10], b[11], b[12], b[13]]),
        };
        if h.width == 0 || h.height == 0 || h.fps == 0 {
            return Err(FseqError::CorruptContainer("zero dimension or fps".into()));
        }
        Ok(h)
    }

    /// Total byte length of a well-formed container with this header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.frame_count as u64 * self.frame_len() as u64
    }
}

/// Streams frames to disk; the frame count is patched into the header by
/// [`FseqWriter::finish`].
pub struct FseqWriter<W: Write + Seek> {
    out: W,
    header: FseqHeader,
}

impl FseqWriter<BufWriter<File>> {
    pub fn create(path: &Path, width: usize, height: usize, fps: u8) -> Result<Self, FseqError> {
        Self::new(BufWriter::new(File::create(path)?), width, height, fps)
    }
}

impl<W: Write + Seek> FseqWriter<W> {
    pub fn new(mut out: W, width: usize, height: usize, fps: u8) -> Result<Self, FseqError> {
        let width =
            u16::try_from(width).map_err(|_| FseqError::InvalidHeader("width exceeds u16"))?;
        let height =
            u16::try_from(height).map_err(|_| FseqError::InvalidHeader("height exceeds u16"))?;
        if width == 0 || height == 0 || fps == 0 {
            return Err(FseqError::InvalidHeader("zero dimension or fps"));
        }
        let header = FseqHeader {
            width,
            height,
            fps,
            frame_count: 0,
        };
        out.write_all(&header.to_bytes()).map_err(write_err)?;
        Ok(Self { out, header })
    }

    pub fn frames_written(&self) -> u32 {
        self.header.frame_count
    }

    pub fn write_frame(&mut self, frame: &GrayFrame) -> Result<(), FseqError> {
        if frame.width() != self.header.width as usize
            || frame.height() != self.header.height as usize
        {
            return Err(FseqError::DimensionMismatch {
                want_w: self.header.width as usize,
                want_h: self.header.height as usize,
                got_w: frame.width(),
                got_h: frame.height(),
            });
        }
        if self.header.frame_count == u32::MAX {
            return Err(FseqError::InvalidHeader("frame count overflow"));
        }
        self.out.write_all(frame.pixels()).map_err(write_err)?;
        self.header.frame_count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(FseqHeader, W), FseqError> {
        self.out.seek(SeekFrom::Start(COUNT_OFFSET))?;
        self.out
            .write_all(&self.header.frame_count.to_le_bytes())
            .map_err(write_err)?;
        self.out.seek(SeekFrom::End(0))?;
        self.out.flush().map_err(write_err)?;
        Ok((self.header, self.out))
    }
}

/// Sequential frame reader.
pub struct FseqReader<R: Read> {
    input: R,
    header: FseqHeader,
    next: u32,
}

impl FseqReader<BufReader<File>> {
    /// Opens a file and checks its length against the header.
    pub fn open(path: &Path) -> Result<Self, FseqError> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let reader = Self::new(BufReader::new(file))?;
        if len != reader.header.file_len() {
            return Err(FseqError::CorruptContainer(format!(
                "header promises {} bytes, file has {len}",
                reader.header.file_len()
            )));
        }
        Ok(reader)
    }
}

impl<R: Read> FseqReader<R> {
    pub fn new(mut input: R) -> Result<Self, FseqError> {
        let mut raw = [0u8; HEADER_LEN as usize];
        input.read_exact(&mut raw).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FseqError::CorruptContainer("truncated header".into()),
            _ => FseqError::Io(e),
        })?;
        Ok(Self {
            input,
            header: FseqHeader::from_bytes(&raw)?,
            next: 0,
        })
    }

    pub fn header(&self) -> FseqHeader {
        self.header
    }

    pub fn next_frame(&mut self) -> Option<Result<GrayFrame, FseqError>> {
        if self.next == self.header.frame_count {
            return None;
        }
        let mut buf = vec![0u8; self.header.frame_len()];
        if let Err(e) = self.input.read_exact(&mut buf) {
            return Some(Err(match e.kind() {
                io::ErrorKind::UnexpectedEof => {
                    FseqError::CorruptContainer(format!("truncated at frame {}", self.next))
                }
                _ => FseqError::Io(e),
            }));
        }
        self.next += 1;
        Some(Ok(GrayFrame::new(
            self.header.width as usize,
            self.header.height as usize,
            buf,
        )
        .expect("buffer sized from header")))
    }
}

impl<R: Read> Iterator for FseqReader<R> {
    type Item = Result<GrayFrame, FseqError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame()
    }
}

pub fn write_fseq(path: &Path, fps: u8, frames: &[GrayFrame]) -> Result<FseqHeader, FseqError> {
    let first = frames
        .first()
        .ok_or(FseqError::InvalidHeader("need at least one frame"))?;
    let mut w = FseqWriter::create(path, first.width(), first.height(), fps)?;
    for f in frames {
        w.write_frame(f)?;
    }
    Ok(w.finish()?.0)
}

pub fn read_fseq(path: &Path) -> Result<(FseqHeader, Vec<GrayFrame>), FseqError> {
    let reader = FseqReader::open(path)?;
    let header = reader.header();
    let frames = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((header, frames))
}

const CHUNK_TIME_FORMAT: &str = "%Y%m%d_%H%M%S";

/// `<node_id>_YYYYMMDD_HHMMSS.fseq`
pub fn chunk_file_name(node_id: &str, start: Timestamp) -> String {
    format!("{node_id}_{}.fseq", start.format(CHUNK_TIME_FORMAT))
}

/// Recovers the start instant from a chunk file name.
pub fn parse_chunk_start(file_name: &str) -> Option<Timestamp> {
    let stem = file_name.strip_suffix(".fseq")?;
    // the timestamp is the last 15 characters: YYYYMMDD_HHMMSS
    let split = stem.len().checked_sub(16)?;
    if stem.as_bytes().get(split) != Some(&b'_') {
        return None;
    }
    NaiveDateTime::parse_from_str(&stem[split + 1..], CHUNK_TIME_FORMAT)
        .ok()
        .map(|t| t.and_utc())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use std::io::Cursor;

    fn gradient(w: usize, h: usize, seed: u8) -> GrayFrame {
        let px = (0..w * h)
            .map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed))
            .collect();
        GrayFrame::new(w, h, px).unwrap()
    }

    #[test]
    fn header_layout_is_little_endian() {
        let h = FseqHeader {
            width: 1296,
            height: 730,
            fps: 10,
            frame_count: 3000,
        };
        let b = h.to_bytes();
        assert_eq!(&b[..5], b"FSEQ1");
        assert_eq!(&b[5..7], &[0x10, 0x05]);
        assert_eq!(&b[7..9], &[0xDA, 0x02]);
        assert_eq!(b[9], 10);
        assert_eq!(&b[10..14], &[0xB8, 0x0B, 0, 0]);
        assert_eq!(h.file_len(), 14 + 3000 * 1296 * 730);
        assert_eq!(FseqHeader::from_bytes(&b).unwrap(), h);
    }

    #[test]
    fn round_trip_in_memory() {
        let frames: Vec<GrayFrame> = (0..5).map(|i| gradient(7, 3, i)).collect();
        let mut w = FseqWriter::new(Cursor::new(Vec::new()), 7, 3, 25).unwrap();
        for f in &frames {
            w.write_frame(f).unwrap();
        }
        let (header, cursor) = w.finish().unwrap();
        assert_eq!(header.frame_count, 5);
        let bytes = cursor.into_inner();
        assert_eq!(bytes.len() as u64, header.file_len());
        let back: Vec<GrayFrame> = FseqReader::new(bytes.as_slice())
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn single_frame_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.fseq");
        let frame = gradient(4, 4, 9);
        write_fseq(&path, 10, std::slice::from_ref(&frame)).unwrap();
        let (h, frames) = read_fseq(&path).unwrap();
        assert_eq!(h.frame_count, 1);
        assert_eq!(frames, vec![frame]);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        assert!(matches!(
            FseqReader::new(&b"FSEQ2\x01\x00\x01\x00\x01\x00\x00\x00\x00"[..]),
            Err(FseqError::CorruptContainer(_))
        ));
        assert!(matches!(
            FseqReader::new(&b"FSE"[..]),
            Err(FseqError::CorruptContainer(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.fseq");
        write_fseq(&path, 10, &[gradient(4, 4, 1), gradient(4, 4, 2)]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            FseqReader::open(&path),
            Err(FseqError::CorruptContainer(_))
        ));
    }

    #[test]
    fn writer_rejects_wrong_dimensions() {
        let mut w = FseqWriter::new(Cursor::new(Vec::new()), 4, 4, 10).unwrap();
        assert!(matches!(
            w.write_frame(&gradient(5, 4, 0)),
            Err(FseqError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn chunk_names() {
        let t = Utc.with_ymd_and_hms(2022, 7, 1, 16, 5, 0).unwrap();
        let name = chunk_file_name("node-01", t);
        assert_eq!(name, "node-01_20220701_160500.fseq");
        assert_eq!(parse_chunk_start(&name), Some(t));
        assert_eq!(parse_chunk_start("scene.fseq"), None);
    }
}
