//! Vehicle counting over FSEQ frame sequences.
//!
//! Frames pass through a per-pixel stability background model, 8-connected
//! component detection, a Kalman/IOU tracker and a virtual count line.
//! Counts are bucketed per UTC hour from frame times derived from the
//! stream start and the frame rate.

use std::path::PathBuf;

use thiserror::Error;

use crate::fseq::FseqError;

pub mod background;
pub mod detect;
pub mod geometry;
pub mod hungarian;
pub mod kalman;
pub mod line;
pub mod pipeline;
pub mod sort;
pub mod synth;

pub use background::{background_update, BackgroundModel, BackgroundParams, ForegroundMask};
pub use detect::{extract_detections, Detection};
pub use geometry::{iou, BBox};
pub use hungarian::{hungarian, Assignment};
pub use kalman::{box_kalman, BoxKalman, BoxKalmanParams, KalmanError, LinearKalman};
pub use line::{count_crossings, CountLine, CrossingEvent, Direction};
pub use pipeline::{
    count_video, count_videos, frame_time, CountEvent, CountParams, CountingPipeline, HourRow,
    HourlyCounts, StreamCounts,
};
pub use sort::{tracker_step, Counted, SortParams, StepReport, Track, Tracker};
pub use synth::{Scene, SceneObject, SynthError, TruthCrossing};

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("frame is {}x{}, model is {}x{}", found.0, found.1, expected.0, expected.1)]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("count line endpoints must be distinct finite points `x1,y1,x2,y2`")]
    DegenerateLine,
    #[error(transparent)]
    Fseq(#[from] FseqError),
    #[error("no start time for {0}: pass one or use a chunk file name")]
    MissingStartTime(PathBuf),
    #[error("{0} holds no frames")]
    EmptyVideo(PathBuf),
}

impl PartialEq for TrafficError {
    fn eq(&self, other: &Self) -> bool {
        use TrafficError::*;
        match (self, other) {
            (
                DimensionMismatch {
                    expected: a,
                    found: b,
                },
                DimensionMismatch {
                    expected: c,
                    found: d,
                },
            ) => a == c && b == d,
            (DegenerateLine, DegenerateLine) => true,
            (MissingStartTime(a), MissingStartTime(b)) | (EmptyVideo(a), EmptyVideo(b)) => a == b,
            _ => false,
        }
    }
}
