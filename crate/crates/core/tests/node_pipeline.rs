//! Whole-node sessions on virtual clocks against real buffer directories.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use aerotrace_core::clock::{AcceleratedClock, Clock, ManualClock};
use aerotrace_core::fseq::FseqReader;
use aerotrace_core::node::{
    read_confirmation, run_node_with, ChunkKind, FlatFrames, NodeConfig, RunPlan, SessionSummary,
    SimulatedSensor,
};
use aerotrace_core::series::{parse_timestamp, Timestamp};
use aerotrace_core::store::{
    BlobBackend, FaultPlan, FaultyBackend, FsBackend, MemoryBackend, RetryPolicy,
};
use chrono::{TimeZone, Utc};

const HOUR: Duration = Duration::from_secs(3600);

fn at(d: u32, h: u32, m: u32) -> Timestamp {
    Utc.with_ymd_and_hms(2026, 3, d, h, m, 0).unwrap()
}

fn small_config(dir: &Path) -> NodeConfig {
    let mut c = NodeConfig::new("cam-01", dir);
    c.frame_width = 32;
    c.frame_height = 18;
    c
}

fn session(
    config: &NodeConfig,
    store: Arc<dyn BlobBackend>,
    clock: Arc<dyn Clock>,
    start: Timestamp,
    duration: Duration,
) -> SessionSummary {
    run_node_with(
        config,
        Box::new(SimulatedSensor::new(11)),
        Box::new(FlatFrames::new(config.frame_width, config.frame_height, 90)),
        store,
        clock,
        RunPlan {
            start,
            duration,
            retry: RetryPolicy::default(),
        },
    )
    .unwrap()
}

fn csv_times(path: &Path) -> Vec<Timestamp> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("timestamp,pm1_0,pm2_5,pm10,temp_c,rh_pct,pressure_hpa")
    );
    lines
        .map(|l| parse_timestamp(l.split(',').next().unwrap()).unwrap())
        .collect()
}

fn assert_exact_spacing(times: &[Timestamp], step_s: i64) {
    for w in times.windows(2) {
        assert_eq!((w[1] - w[0]).num_seconds(), step_s, "{} -> {}", w[0], w[1]);
        assert_eq!(w[1].timestamp_subsec_nanos(), 0);
    }
}

#[test]
fn one_hour_accelerated_run_uploads_everything_intact() {
    let buf = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    let config = small_config(buf.path());
    let store = Arc::new(FsBackend::new(root.path()));
    let start = at(2, 8, 0);
    let clock = Arc::new(AcceleratedClock::new(start, 3600.0));
    let s = session(&config, store.clone(), clock, start, HOUR);

    assert_eq!(s.chunks_sealed, 12);
    assert_eq!(s.csv_sealed, 1);
    assert_eq!(s.samples_written, 360);
    assert_eq!(s.frames_written, 36_000);
    assert_eq!((s.confirmed, s.failed, s.queue_overflows), (13, 0, 0));

    let listed = store.list("cam-01").unwrap();
    assert_eq!(listed.len(), 13);
    for rec in &s.sealed {
        let local = std::fs::read(&rec.meta.path).unwrap();
        let blob = rec.meta.blob_ref().unwrap();
        assert_eq!(store.get(blob.container(), blob.key()).unwrap(), local);
        assert!(read_confirmation(&rec.meta.path).is_some());
        if rec.meta.kind == ChunkKind::Video {
            let header = FseqReader::open(&rec.meta.path).unwrap().header();
            assert_eq!(header.frame_count, 3000);
        }
    }
    let csv = s
        .sealed
        .iter()
        .find(|r| r.meta.kind == ChunkKind::Csv)
        .unwrap();
    let times = csv_times(&csv.meta.path);
    assert_eq!(times.len(), 360);
    assert_eq!(times[0], start);
    assert_exact_spacing(&times, 10);
}

#[test]
fn slow_store_never_delays_sampling_or_sealing() {
    let buf = tempfile::tempdir().unwrap();
    let mut config = small_config(buf.path());
    config.video_fps = 2;
    let start = at(2, 8, 0);
    let clock: Arc<dyn Clock> = Arc::new(AcceleratedClock::new(start, 3600.0));
    let latency = config.video_chunk_len * 3;
    let store = Arc::new(
        FaultyBackend::new(MemoryBackend::new(), FaultPlan::Healthy)
            .with_put_latency(clock.clone(), latency),
    );
    let s = session(&config, store.clone(), clock, start, HOUR);

    let csv = s
        .sealed
        .iter()
        .find(|r| r.meta.kind == ChunkKind::Csv)
        .unwrap();
    let times = csv_times(&csv.meta.path);
    assert_eq!(times.len(), 360);
    assert_exact_spacing(&times, 10);

    let chunk_len = chrono::Duration::from_std(config.video_chunk_len).unwrap();
    for rec in s.sealed.iter().filter(|r| r.meta.kind == ChunkKind::Video) {
        let lag = rec.sealed_at - (rec.meta.start + chunk_len);
        assert!(
            lag < chunk_len,
            "{} sealed {lag} late",
            rec.meta.file_name()
        );
    }
    assert_eq!(s.confirmed, 13);
    assert_eq!(store.put_attempts(), 13);
}

#[test]
fn midnight_rotates_the_csv() {
    let buf = tempfile::tempdir().unwrap();
    let mut config = small_config(buf.path());
    config.video_fps = 1;
    let start = at(2, 23, 30);
    let clock = Arc::new(ManualClock::new(start));
    let s = session(&config, Arc::new(MemoryBackend::new()), clock, start, HOUR);

    assert_eq!(s.csv_sealed, 2);
    let csvs: Vec<_> = s
        .sealed
        .iter()
        .filter(|r| r.meta.kind == ChunkKind::Csv)
        .collect();
    let before = csv_times(&csvs[0].meta.path);
    let after = csv_times(&csvs[1].meta.path);
    assert_eq!((before.len(), after.len()), (180, 180));
    assert_eq!(after[0], at(3, 0, 0));
    assert_eq!(
        *before.last().unwrap(),
        at(3, 0, 0) - chrono::Duration::seconds(10)
    );
    assert_eq!(s.confirmed, 14);
}

#[test]
fn zero_duration_writes_nothing() {
    let buf = tempfile::tempdir().unwrap();
    let config = small_config(buf.path());
    let start = at(2, 8, 0);
    let store = Arc::new(MemoryBackend::new());
    let s = session(
        &config,
        store.clone(),
        Arc::new(ManualClock::new(start)),
        start,
        Duration::ZERO,
    );
    assert_eq!(s, SessionSummary::default());
    assert_eq!(std::fs::read_dir(buf.path()).unwrap().count(), 0);
    assert!(store.list("cam-01").unwrap().is_empty());
}

#[test]
fn restart_uploads_leftovers_once() {
    let buf = tempfile::tempdir().unwrap();
    let mut config = small_config(buf.path());
    config.video_fps = 1;
    let start = at(2, 8, 0);

    // first session: the store rejects every video chunk
    let clock = Arc::new(ManualClock::new(start));
    let failing = Arc::new(FaultyBackend::new(
        MemoryBackend::new(),
        FaultPlan::FailKeysContaining("video/".into()),
    ));
    let first = session(&config, failing, clock, start, Duration::from_secs(600));
    assert_eq!(
        (first.chunks_sealed, first.confirmed, first.failed),
        (2, 1, 2)
    );

    // second session later the same day: both chunks are re-sent exactly
    // once; the CSV is appended to and sent with the new session's rows
    let store = Arc::new(FaultyBackend::new(MemoryBackend::new(), FaultPlan::Healthy));
    let later = at(2, 9, 0);
    let second = session(
        &config,
        store.clone(),
        Arc::new(ManualClock::new(later)),
        later,
        Duration::from_secs(300),
    );
    assert_eq!(second.restart_enqueued, 2);
    assert_eq!(second.confirmed, 2 + 1 + 1);
    assert_eq!(store.put_attempts(), 4);

    let csv = second
        .sealed
        .iter()
        .find(|r| r.meta.kind == ChunkKind::Csv)
        .unwrap();
    let times = csv_times(&csv.meta.path);
    assert_eq!(times.len(), 60 + 30);
    let blob = csv.meta.blob_ref().unwrap();
    assert_eq!(
        store.get(blob.container(), blob.key()).unwrap(),
        std::fs::read(&csv.meta.path).unwrap()
    );

    // a third session finds nothing left to send
    let third = session(
        &config,
        store.clone(),
        Arc::new(ManualClock::new(at(2, 10, 0))),
        at(2, 10, 0),
        Duration::ZERO,
    );
    assert_eq!(third.restart_enqueued, 0);
}

#[test]
fn full_queue_leaves_files_for_the_next_session() {
    let buf = tempfile::tempdir().unwrap();
    let mut config = small_config(buf.path());
    config.video_fps = 1;
    config.video_chunk_len = Duration::from_secs(60);
    config.queue_depth = 1;
    config.upload_workers = 1;
    let start = at(2, 8, 0);
    let clock: Arc<dyn Clock> = Arc::new(AcceleratedClock::new(start, 600.0));
    let slow = Arc::new(
        FaultyBackend::new(MemoryBackend::new(), FaultPlan::Healthy)
            .with_put_latency(clock.clone(), Duration::from_secs(600)),
    );
    let s = session(&config, slow, clock, start, Duration::from_secs(600));
    assert_eq!(s.chunks_sealed, 10);
    assert!(s.queue_overflows > 0);
    assert_eq!(s.confirmed + s.queue_overflows, 11);

    config.queue_depth = 64;
    let store = Arc::new(MemoryBackend::new());
    let again = session(
        &config,
        store.clone(),
        Arc::new(ManualClock::new(at(2, 12, 0))),
        at(2, 12, 0),
        Duration::ZERO,
    );
    assert_eq!(again.restart_enqueued, s.queue_overflows);
    assert_eq!(again.confirmed, s.queue_overflows);
}

#[test]
fn retention_keeps_unconfirmed_files_under_faults() {
    let buf = tempfile::tempdir().unwrap();
    let mut config = small_config(buf.path());
    config.video_fps = 1;
    config.retention = Duration::from_secs(600);
    let start = at(2, 8, 0);
    let clock: Arc<dyn Clock> = Arc::new(AcceleratedClock::new(start, 3600.0));
    // the chunk starting at 08:10 never makes it
    let store = Arc::new(FaultyBackend::new(
        MemoryBackend::new(),
        FaultPlan::FailKeysContaining("_081000".into()),
    ));
    let s = session(&config, store.clone(), clock, start, HOUR);
    assert_eq!(s.chunks_sealed, 12);
    assert_eq!(s.failed, 1);
    assert!(s.files_deleted > 0);

    let uploaded: Vec<String> = store
        .inner()
        .list("cam-01")
        .unwrap()
        .into_iter()
        .map(|o| o.blob.key().to_string())
        .collect();
    for rec in &s.sealed {
        let key = rec.meta.blob_ref().unwrap().key().to_string();
        if !rec.meta.path.exists() {
            assert!(uploaded.contains(&key), "{key} deleted without upload");
        }
        if !uploaded.contains(&key) {
            assert!(rec.meta.path.exists(), "{key} lost");
            assert!(read_confirmation(&rec.meta.path).is_none());
        }
    }
    assert!(buf.path().join("cam-01_20260302_081000.fseq").exists());
}
