use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::Duration;

use crate::frame::GrayFrame;
use crate::fseq::{parse_chunk_start, FseqReader};
use crate::series::{format_timestamp, hour_floor, TimeSeries, Timestamp};

use super::background::{BackgroundModel, BackgroundParams};
use super::detect::extract_detections;
use super::line::{count_crossings, CountLine, Direction};
use super::sort::{Counted, SortParams, Track, Tracker};
use super::TrafficError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountParams {
    pub background: BackgroundParams,
    pub min_area: usize,
    pub sort: SortParams,
}

impl Default for CountParams {
    fn default() -> Self {
        Self {
            background: BackgroundParams::default(),
            min_area: 150,
            sort: SortParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountEvent {
    pub track_id: u64,
    /// Time of the first frame whose center lies past the line.
    pub at: Timestamp,
    pub direction: Direction,
}

/// Background model, detector, tracker and line counter over one
/// continuous frame stream. A track is counted when it ends, so every
/// crossing is judged on the track's whole center history.
#[derive(Debug)]
pub struct CountingPipeline {
    line: CountLine,
    params: CountParams,
    background: BackgroundModel,
    tracker: Tracker,
    frame_times: Vec<Timestamp>,
    events: Vec<CountEvent>,
    track_ids: Vec<u64>,
}

impl CountingPipeline {
    pub fn new(width: usize, height: usize, line: CountLine, params: CountParams) -> Self {
        Self {
            line,
            params,
            background: BackgroundModel::new(width, height, params.background),
            tracker: Tracker::new(params.sort),
            frame_times: Vec::new(),
            events: Vec::new(),
            track_ids: Vec::new(),
        }
    }

    pub fn frames_seen(&self) -> usize {
        self.frame_times.len()
    }

    pub fn push(&mut self, frame: &GrayFrame, at: Timestamp) -> Result<(), TrafficError> {
        let mask = self.background.update(frame)?;
        let detections = extract_detections(&mask, self.params.min_area);
        self.frame_times.push(at);
        let report = self.tracker.step(&detections);
        self.track_ids.extend(&report.created);
        for track in report.lost {
            self.settle(track);
        }
        Ok(())
    }

    fn settle(&mut self, mut track: Track) {
        if track.hits < self.params.sort.min_hits {
            return;
        }
        let history = track.history();
        let centers = track.centers();
        let crossings = count_crossings(&centers, &self.line);
        for c in &crossings {
            let frame = history[c.index].0 as usize;
            self.events.push(CountEvent {
                track_id: track.id(),
                at: self.frame_times[frame],
                direction: c.direction,
            });
        }
        track.counted = match crossings.len() {
            0 => Counted::NotYet,
            2 => Counted::Both,
            _ if crossings[0].direction == Direction::Up => Counted::Up,
            _ => Counted::Down,
        };
    }

    /// Ends the stream, counting the tracks still alive.
    pub fn finish(mut self) -> StreamCounts {
        let remaining =
            std::mem::replace(&mut self.tracker, Tracker::new(self.params.sort)).finish();
        for track in remaining {
            self.settle(track);
        }
        self.events.sort_by_key(|e| (e.at, e.track_id));
        StreamCounts {
            events: self.events,
            span: self
                .frame_times
                .first()
                .copied()
                .zip(self.frame_times.last().copied()),
            track_ids: self.track_ids,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamCounts {
    pub events: Vec<CountEvent>,
    /// First and last frame time, `None` for an empty stream.
    pub span: Option<(Timestamp, Timestamp)>,
    /// Every id issued, in order of creation.
    pub track_ids: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HourRow {
    pub hour_start: Timestamp,
    pub up: u64,
    pub down: u64,
}

impl HourRow {
    pub fn total(&self) -> u64 {
        self.up + self.down
    }
}

/// Crossings per UTC hour, one row for every hour from the first frame's
/// hour to the last frame's hour.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HourlyCounts {
    rows: Vec<HourRow>,
}

impl HourlyCounts {
    pub fn from_events(events: &[CountEvent], first: Timestamp, last: Timestamp) -> Self {
        let first = hour_floor(first);
        let last = hour_floor(last);
        let hours = ((last - first).num_hours().max(0) + 1) as usize;
        let mut rows: Vec<HourRow> = (0..hours)
            .map(|h| HourRow {
                hour_start: first + Duration::hours(h as i64),
                up: 0,
                down: 0,
            })
            .collect();
        for e in events {
            let idx = (hour_floor(e.at) - first).num_hours();
            let Some(row) = usize::try_from(idx).ok().and_then(|i| rows.get_mut(i)) else {
                continue;
            };
            match e.direction {
                Direction::Up => row.up += 1,
                Direction::Down => row.down += 1,
            }
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[HourRow] {
        &self.rows
    }

    pub fn totals(&self) -> Vec<u64> {
        self.rows.iter().map(HourRow::total).collect()
    }

    pub fn total_series(&self) -> TimeSeries {
        TimeSeries::new(
            self.rows
                .iter()
                .map(|r| (r.hour_start, r.total() as f64))
                .collect(),
        )
        .expect("hours increase and counts are finite")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "hour_start,count_up,count_down,count_total")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                format_timestamp(r.hour_start),
                r.up,
                r.down,
                r.total()
            )?;
        }
        Ok(())
    }
}

/// Timestamp of frame `index` in a stream starting at `start`.
pub fn frame_time(start: Timestamp, index: u64, fps: u8) -> Timestamp {
    start + Duration::nanoseconds((index as i64 * 1_000_000_000) / fps as i64)
}

fn start_of(path: &Path, start: Option<Timestamp>) -> Result<Timestamp, TrafficError> {
    start
        .or_else(|| {
            path.file_name()
                .and_then(|n| n.to_str())
                .and_then(parse_chunk_start)
        })
        .ok_or_else(|| TrafficError::MissingStartTime(path.to_path_buf()))
}

fn feed(
    pipeline: &mut CountingPipeline,
    path: &Path,
    start: Timestamp,
) -> Result<Timestamp, TrafficError> {
    let reader = FseqReader::open(path)?;
    let fps = reader.header().fps;
    let mut end = start;
    for (i, frame) in reader.enumerate() {
        let at = frame_time(start, i as u64, fps);
        pipeline.push(&frame?, at)?;
        end = frame_time(start, i as u64 + 1, fps);
    }
    Ok(end)
}

/// Counts one FSEQ file. The start time comes from `start` or, failing that,
/// from a chunk file name.
pub fn count_video(
    path: &Path,
    line: &CountLine,
    params: &CountParams,
    start: Option<Timestamp>,
) -> Result<HourlyCounts, TrafficError> {
    let start = start_of(path, start)?;
    let header = FseqReader::open(path)?.header();
    if header.frame_count == 0 {
        return Err(TrafficError::EmptyVideo(path.to_path_buf()));
    }
    let mut pipeline = CountingPipeline::new(
        header.width as usize,
        header.height as usize,
        *line,
        *params,
    );
    feed(&mut pipeline, path, start)?;
    let counts = pipeline.finish();
    let (first, last) = counts.span.expect("non-empty video");
    Ok(HourlyCounts::from_events(&counts.events, first, last))
}

/// Counts a set of chunk files named by their start times. Chunks that
/// follow each other without a gap share one pipeline, so a vehicle on a
/// chunk boundary is neither lost nor counted twice; a gap or a change of
/// frame size starts a fresh pipeline.
pub fn count_videos(
    paths: &[PathBuf],
    line: &CountLine,
    params: &CountParams,
) -> Result<HourlyCounts, TrafficError> {
    let mut chunks = Vec::with_capacity(paths.len());
    for p in paths {
        let header = FseqReader::open(p)?.header();
        if header.frame_count > 0 {
            chunks.push((start_of(p, None)?, header, p));
        }
    }
    chunks.sort_by_key(|c| c.0);
    let (Some(first), Some(last_chunk)) = (chunks.first(), chunks.last()) else {
        return Err(TrafficError::EmptyVideo(
            paths.first().cloned().unwrap_or_default(),
        ));
    };
    let span_start = first.0;
    let span_end = frame_time(
        last_chunk.0,
        last_chunk.1.frame_count as u64 - 1,
        last_chunk.1.fps,
    );

    let mut events = Vec::new();
    let mut current: Option<(CountingPipeline, Timestamp, (u16, u16))> = None;
    for (start, header, path) in chunks {
        let dims = (header.width, header.height);
        let continues = matches!(&current, Some((_, end, d)) if *end == start && *d == dims);
        if !continues {
            if let Some((p, _, _)) = current.take() {
                events.extend(p.finish().events);
            }
            let p = CountingPipeline::new(dims.0 as usize, dims.1 as usize, *line, *params);
            current = Some((p, start, dims));
        }
        let (pipeline, end, _) = current.as_mut().expect("set above");
        *end = feed(pipeline, path, start)?;
    }
    if let Some((p, _, _)) = current {
        events.extend(p.finish().events);
    }
    events.sort_by_key(|e| e.at);
    Ok(HourlyCounts::from_events(&events, span_start, span_end))
}
