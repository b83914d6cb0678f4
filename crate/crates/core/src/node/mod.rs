//! Node runtime.
//!
//! Two loops run on their own threads: sampling (one CSV row per
//! `sample_interval`, rotated at UTC midnight) and video (frames at
//! `video_fps`, sealed into FSEQ chunks on boundaries that are multiples of
//! `video_chunk_len` since the Unix epoch). Both hand sealed files to a
//! bounded upload queue drained by worker threads, so a slow store never
//! delays sampling or sealing.
//!
//! All timestamps are scheduled (`start + k * interval`), never measured.

mod chunk;
mod config;
mod retention;
mod sources;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};
use log::{error, info, warn};
use thiserror::Error;

use crate::clock::{to_chrono, Clock};
use crate::fseq::FseqError;
use crate::kv::KvError;
use crate::sensor::{decode_pms7003_frame, SensorSample};
use crate::series::Timestamp;
use crate::store::{ensure_node_container, upload, BlobBackend, RetryPolicy, UploadJob};

pub use chunk::{seal_video_chunk, ChunkKind, ChunkMeta};
pub use config::NodeConfig;
pub use retention::{marker_path, read_confirmation, retention_sweep, write_confirmation};
pub use sources::{
    FlatFrames, FrameSource, RawReading, SampleSource, SceneFrames, SimulatedSensor, SourceError,
};

use chunk::{kind_of, DailyCsv, OpenChunk};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("config: {0}")]
    Config(#[from] KvError),
    #[error("buffer dir {} is not writable: {source}", .path.display())]
    BufferDirUnwritable { path: PathBuf, source: io::Error },
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("video chunk: {0}")]
    Fseq(#[from] FseqError),
    #[error("a chunk needs at least one frame")]
    EmptyChunk,
    #[error("{0} loop panicked")]
    LoopPanicked(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealRecord {
    pub meta: ChunkMeta,
    /// Clock reading when the file got its final name.
    pub sealed_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionSummary {
    pub samples_written: usize,
    /// Decode failures, source errors and clock regressions.
    pub samples_dropped: usize,
    pub clock_regressions: usize,
    pub frames_written: usize,
    pub frames_dropped: usize,
    pub chunks_sealed: usize,
    pub csv_sealed: usize,
    /// Files found sealed but unconfirmed at startup.
    pub restart_enqueued: usize,
    pub enqueued: usize,
    pub queue_overflows: usize,
    pub confirmed: usize,
    pub failed: usize,
    pub files_deleted: usize,
    pub sealed: Vec<SealRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunPlan {
    pub start: Timestamp,
    pub duration: Duration,
    pub retry: RetryPolicy,
}

#[derive(Default)]
struct Counters {
    enqueued: AtomicUsize,
    overflows: AtomicUsize,
    confirmed: AtomicUsize,
    failed: AtomicUsize,
    deleted: AtomicUsize,
}

/// Non-blocking handoff to the upload workers, deduplicated by file name.
struct UploadQueue<'a> {
    tx: Mutex<Option<Sender<UploadJob>>>,
    seen: Mutex<HashSet<String>>,
    counters: &'a Counters,
}

impl UploadQueue<'_> {
    fn enqueue(&self, meta: &ChunkMeta) {
        let name = meta.file_name().to_string();
        if !self.seen.lock().unwrap().insert(name.clone()) {
            return;
        }
        let blob = match meta.blob_ref() {
            Ok(b) => b,
            Err(e) => {
                error!("cannot address {name}: {e}");
                return;
            }
        };
        let guard = self.tx.lock().unwrap();
        let Some(tx) = guard.as_ref() else {
            return;
        };
        match tx.try_send(UploadJob::new(blob, &meta.path)) {
            Ok(()) => {
                self.counters.enqueued.fetch_add(1, Ordering::SeqCst);
            }
            Err(TrySendError::Full(_)) => {
                self.counters.overflows.fetch_add(1, Ordering::SeqCst);
                error!("upload queue full; {name} stays buffered for the next restart scan");
            }
            Err(TrySendError::Disconnected(_)) => {
                error!("upload workers gone; {name} stays buffered");
            }
        }
    }

    fn close(&self) {
        self.tx.lock().unwrap().take();
    }
}

fn upload_worker(
    rx: Receiver<UploadJob>,
    node_id: &str,
    store: &dyn BlobBackend,
    clock: &dyn Clock,
    retry: &RetryPolicy,
    counters: &Counters,
) {
    for job in rx.iter() {
        if let Err(e) = ensure_node_container(store, node_id) {
            warn!("store unavailable: {e}");
        }
        let path = job.local_path.clone();
        match upload(store, clock, retry, job) {
            Ok(_) => match write_confirmation(&path, clock.now()) {
                Ok(()) => {
                    counters.confirmed.fetch_add(1, Ordering::SeqCst);
                }
                Err(e) => {
                    // without a marker the file is simply uploaded again later
                    error!("cannot record confirmation for {}: {e}", path.display());
                    counters.failed.fetch_add(1, Ordering::SeqCst);
                }
            },
            Err(e) => {
                error!("{e}");
                counters.failed.fetch_add(1, Ordering::SeqCst);
            }
        }
    }
}

fn check_buffer_dir(dir: &Path) -> Result<(), NodeError> {
    let probe = dir.join(".write-probe");
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&probe, b""))
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|source| NodeError::BufferDirUnwritable {
            path: dir.to_path_buf(),
            source,
        })
}

/// Sealed files without a confirmation marker, except `skip`.
fn restart_scan(config: &NodeConfig, skip: Option<&str>) -> Result<Vec<ChunkMeta>, NodeError> {
    let mut found = Vec::new();
    for entry in fs::read_dir(&config.buffer_dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(kind) = kind_of(name) else {
            continue;
        };
        if Some(name) == skip || !path.is_file() || read_confirmation(&path).is_some() {
            continue;
        }
        found.push(ChunkMeta {
            node_id: config.node_id.clone(),
            kind,
            start: Timestamp::UNIX_EPOCH,
            size_bytes: fs::metadata(&path)?.len(),
            path,
        });
    }
    found.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(found)
}

/// Floor to the whole second.
fn whole_second(t: Timestamp) -> Timestamp {
    Timestamp::from_timestamp(t.timestamp(), 0).expect("in range")
}

/// Runs for `duration` starting at the current clock reading, floored to
/// the second.
pub fn run_node(
    config: &NodeConfig,
    samples: Box<dyn SampleSource>,
    frames: Box<dyn FrameSource>,
    store: Arc<dyn BlobBackend>,
    clock: Arc<dyn Clock>,
    duration: Duration,
) -> Result<SessionSummary, NodeError> {
    let plan = RunPlan {
        start: whole_second(clock.now()),
        duration,
        retry: RetryPolicy::default(),
    };
    run_node_with(config, samples, frames, store, clock, plan)
}

pub fn run_node_with(
    config: &NodeConfig,
    mut samples: Box<dyn SampleSource>,
    mut frames: Box<dyn FrameSource>,
    store: Arc<dyn BlobBackend>,
    clock: Arc<dyn Clock>,
    plan: RunPlan,
) -> Result<SessionSummary, NodeError> {
    config.validate()?;
    check_buffer_dir(&config.buffer_dir)?;
    if let Err(e) = ensure_node_container(&*store, &config.node_id) {
        warn!("store unavailable at startup, uploads will retry: {e}");
    }

    let start = plan.start;
    let end = start + to_chrono(plan.duration);
    let csv_in_use = (!plan.duration.is_zero())
        .then(|| ChunkMeta::csv(&config.node_id, start.date_naive(), &config.buffer_dir));
    let pending = restart_scan(config, csv_in_use.as_ref().map(|m| m.file_name()))?;

    let counters = Counters::default();
    let (tx, rx) = bounded(config.queue_depth);
    let queue = UploadQueue {
        tx: Mutex::new(Some(tx)),
        seen: Mutex::new(HashSet::new()),
        counters: &counters,
    };
    let mut summary = SessionSummary {
        restart_enqueued: pending.len(),
        ..Default::default()
    };
    info!(
        "node {} running {} from {start}; {} buffered file(s) to re-upload",
        config.node_id,
        humantime::format_duration(plan.duration),
        pending.len()
    );

    let (sampling, video) = thread::scope(|s| {
        for _ in 0..config.upload_workers {
            let rx = rx.clone();
            let (store, clock, counters) = (&*store, &*clock, &counters);
            let retry = &plan.retry;
            let node_id = config.node_id.as_str();
            s.spawn(move || upload_worker(rx, node_id, store, clock, retry, counters));
        }
        for meta in &pending {
            queue.enqueue(meta);
        }

        let sampling =
            s.spawn(|| sampling_loop(config, &mut *samples, &*clock, &queue, start, end));
        let video =
            s.spawn(|| video_loop(config, &mut *frames, &*clock, &queue, &counters, start, end));
        let sampling = sampling
            .join()
            .map_err(|_| NodeError::LoopPanicked("sampling"));
        let video = video.join().map_err(|_| NodeError::LoopPanicked("video"));
        queue.close();
        (sampling, video)
    });
    let sampling = sampling??;
    let video = video??;

    let swept = retention_sweep(&config.buffer_dir, clock.now(), config.retention);
    counters.deleted.fetch_add(swept.len(), Ordering::SeqCst);

    summary.samples_written = sampling.written;
    summary.samples_dropped = sampling.dropped;
    summary.clock_regressions = sampling.regressions;
    summary.csv_sealed = sampling.sealed.len();
    summary.frames_written = video.written;
    summary.frames_dropped = video.dropped;
    summary.chunks_sealed = video.sealed.len();
    summary.sealed = video.sealed.into_iter().chain(sampling.sealed).collect();
    summary.sealed.sort_by(|a, b| a.meta.path.cmp(&b.meta.path));
    summary.enqueued = counters.enqueued.load(Ordering::SeqCst);
    summary.queue_overflows = counters.overflows.load(Ordering::SeqCst);
    summary.confirmed = counters.confirmed.load(Ordering::SeqCst);
    summary.failed = counters.failed.load(Ordering::SeqCst);
    summary.files_deleted = counters.deleted.load(Ordering::SeqCst);
    info!("node {} done: {summary:?}", config.node_id);
    Ok(summary)
}

#[derive(Default)]
struct LoopReport {
    written: usize,
    dropped: usize,
    regressions: usize,
    sealed: Vec<SealRecord>,
}

fn sampling_loop(
    config: &NodeConfig,
    source: &mut dyn SampleSource,
    clock: &dyn Clock,
    queue: &UploadQueue,
    start: Timestamp,
    end: Timestamp,
) -> Result<LoopReport, NodeError> {
    let step = to_chrono(config.sample_interval);
    let mut report = LoopReport::default();
    let mut csv: Option<DailyCsv> = None;
    let mut last_reading: Option<Timestamp> = None;
    let mut t = start;
    while t < end {
        clock.sleep_until(t);
        let now = clock.now();
        if last_reading.is_some_and(|prev| now < prev) {
            warn!("clock went backwards at sample {t}; dropped");
            report.regressions += 1;
            report.dropped += 1;
            t += step;
            continue;
        }
        last_reading = Some(now);

        let sample = source.read(t).map_err(|e| e.to_string()).and_then(|raw| {
            decode_pms7003_frame(&raw.frame)
                .map(|frame| SensorSample::from_frame(t, &frame, raw.env))
                .map_err(|e| e.to_string())
        });
        match sample {
            Ok(sample) => {
                let day = t.date_naive();
                if csv.as_ref().is_some_and(|c| c.day != day) {
                    let meta = csv.take().expect("checked").seal()?;
                    queue.enqueue(&meta);
                    report.sealed.push(SealRecord {
                        meta,
                        sealed_at: clock.now(),
                    });
                }
                if csv.is_none() {
                    csv = Some(DailyCsv::open(&config.node_id, day, &config.buffer_dir)?);
                }
                csv.as_mut().expect("opened").append(&sample)?;
                report.written += 1;
            }
            Err(e) => {
                warn!("sample at {t} dropped: {e}");
                report.dropped += 1;
            }
        }
        t += step;
    }
    if let Some(c) = csv {
        let meta = c.seal()?;
        queue.enqueue(&meta);
        report.sealed.push(SealRecord {
            meta,
            sealed_at: clock.now(),
        });
    }
    Ok(report)
}

fn video_loop(
    config: &NodeConfig,
    source: &mut dyn FrameSource,
    clock: &dyn Clock,
    queue: &UploadQueue,
    counters: &Counters,
    start: Timestamp,
    end: Timestamp,
) -> Result<LoopReport, NodeError> {
    let fps = config.video_fps as i64;
    let chunk_ns = config.video_chunk_len.as_nanos() as i64;
    let chunk_of = |t: Timestamp| {
        t.timestamp_nanos_opt()
            .expect("in range")
            .div_euclid(chunk_ns)
    };
    let mut report = LoopReport::default();
    let mut open: Option<(i64, OpenChunk)> = None;

    let seal = |chunk: OpenChunk, report: &mut LoopReport| -> Result<(), NodeError> {
        if chunk.frames() == 0 {
            chunk.discard();
            return Ok(());
        }
        let meta = chunk.seal()?;
        let sealed_at = clock.now();
        queue.enqueue(&meta);
        report.sealed.push(SealRecord { meta, sealed_at });
        let swept = retention_sweep(&config.buffer_dir, sealed_at, config.retention);
        counters.deleted.fetch_add(swept.len(), Ordering::SeqCst);
        Ok(())
    };

    for i in 0i64.. {
        let t = start + chrono::Duration::nanoseconds(i * 1_000_000_000 / fps);
        if t >= end {
            break;
        }
        clock.sleep_until(t);
        let idx = chunk_of(t);
        if open.as_ref().is_some_and(|(k, _)| *k != idx) {
            let (_, chunk) = open.take().expect("checked");
            seal(chunk, &mut report)?;
        }
        let frame = match source.frame(t) {
            Ok(f) => f,
            Err(e) => {
                warn!("frame at {t} dropped: {e}");
                report.dropped += 1;
                continue;
            }
        };
        if open.is_none() {
            let meta = ChunkMeta::video(&config.node_id, whole_second(t), &config.buffer_dir);
            let chunk = OpenChunk::create(
                meta,
                config.frame_width,
                config.frame_height,
                config.video_fps,
            )?;
            open = Some((idx, chunk));
        }
        let (_, chunk) = open.as_mut().expect("opened");
        match chunk.push(&frame) {
            Ok(()) => report.written += 1,
            Err(FseqError::DimensionMismatch { .. }) => {
                warn!("frame at {t} has the wrong size; dropped");
                report.dropped += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some((_, chunk)) = open {
        seal(chunk, &mut report)?;
    }
    Ok(report)
}
