use log::debug;
use nalgebra::SVector;

use super::detect::Detection;
use super::geometry::{iou, BBox};
use super::hungarian::hungarian;
use super::kalman::{box_kalman, BoxKalman, BoxKalmanParams, KalmanError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortParams {
    /// Minimum IOU for a prediction/detection pair to be associated.
    pub iou_gate: f64,
    /// A track is dropped once it has gone more than this many frames
    /// unmatched.
    pub max_age: u32,
    /// Matched frames before a track is eligible for counting.
    pub min_hits: u32,
    pub kalman: BoxKalmanParams,
}

impl Default for SortParams {
    fn default() -> Self {
        Self {
            iou_gate: 0.3,
            max_age: 5,
            min_hits: 3,
            kalman: BoxKalmanParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Counted {
    #[default]
    NotYet,
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    kf: BoxKalman,
    pub hits: u32,
    pub misses: u32,
    pub counted: Counted,
    /// Filtered center after every matched frame, with the frame index.
    history: Vec<(u64, (f64, f64))>,
}

impl Track {
    fn new(id: u64, det: &Detection, frame: u64, params: &BoxKalmanParams) -> Self {
        Self {
            id,
            kf: box_kalman(det.bbox.to_measurement(), params),
            hits: 1,
            misses: 0,
            counted: Counted::NotYet,
            history: vec![(frame, det.center())],
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> &SVector<f64, 7> {
        &self.kf.x
    }

    pub fn filter(&self) -> &BoxKalman {
        &self.kf
    }

    pub fn bbox(&self) -> BBox {
        let x = &self.kf.x;
        BBox::from_measurement(x[0], x[1], x[2], x[3])
    }

    pub fn history(&self) -> &[(u64, (f64, f64))] {
        &self.history
    }

    pub fn centers(&self) -> Vec<(f64, f64)> {
        self.history.iter().map(|h| h.1).collect()
    }

    /// Advances the state one frame. Area may not go negative.
    pub fn kalman_predict(&mut self) -> Result<BBox, KalmanError> {
        if self.kf.x[2] + self.kf.x[6] <= 0.0 {
            self.kf.x[6] = 0.0;
        }
        self.kf.predict()?;
        Ok(self.bbox())
    }

    /// Corrects the state with a matched detection. Area stays positive.
    pub fn kalman_update(&mut self, det: &Detection) -> Result<(), KalmanError> {
        self.kf.update(&SVector::from(det.bbox.to_measurement()))?;
        if self.kf.x[2] <= 0.0 {
            self.kf.x[2] = det.bbox.area().max(1.0);
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct StepReport {
    /// Tracks removed this step: aged out or numerically broken.
    pub lost: Vec<Track>,
    /// Ids that reached `min_hits` this step.
    pub newly_confirmed: Vec<u64>,
    pub matched: usize,
    pub created: Vec<u64>,
}

/// Tracking by detection: constant-velocity Kalman prediction per track,
/// assignment on `1 - IOU` cost, gated by `iou_gate`.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: SortParams,
    tracks: Vec<Track>,
    next_id: u64,
    frame: u64,
}

impl Tracker {
    pub fn new(params: SortParams) -> Self {
        Self {
            params,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
        }
    }

    pub fn params(&self) -> &SortParams {
        &self.params
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Frames stepped so far.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn step(&mut self, detections: &[Detection]) -> StepReport {
        let frame = self.frame;
        self.frame += 1;
        let mut report = StepReport::default();

        let mut predicted = Vec::with_capacity(self.tracks.len());
        let mut alive = Vec::with_capacity(self.tracks.len());
        for mut t in self.tracks.drain(..) {
            match t.kalman_predict() {
                Ok(b) => {
                    predicted.push(b);
                    alive.push(t);
                }
                Err(e) => {
                    debug!("track {} dropped on predict: {e}", t.id);
                    report.lost.push(t);
                }
            }
        }

        let cost: Vec<Vec<f64>> = predicted
            .iter()
            .map(|p| detections.iter().map(|d| 1.0 - iou(p, &d.bbox)).collect())
            .collect();
        let mut det_taken = vec![false; detections.len()];
        let mut assignment: Vec<Option<usize>> = vec![None; alive.len()];
        if !alive.is_empty() && !detections.is_empty() {
            for (ti, di) in hungarian(&cost).pairs {
                // pairs below the gate stay unmatched on both sides
                if 1.0 - cost[ti][di] >= self.params.iou_gate {
                    det_taken[di] = true;
                    assignment[ti] = Some(di);
                }
            }
        }

        for (mut t, di) in alive.into_iter().zip(assignment) {
            match di {
                Some(di) => {
                    if let Err(e) = t.kalman_update(&detections[di]) {
                        debug!("track {} dropped on update: {e}", t.id);
                        report.lost.push(t);
                        continue;
                    }
                    t.hits += 1;
                    t.misses = 0;
                    let x = &t.kf.x;
                    t.history.push((frame, (x[0], x[1])));
                    report.matched += 1;
                    if t.hits == self.params.min_hits {
                        report.newly_confirmed.push(t.id);
                    }
                    self.tracks.push(t);
                }
                None => {
                    t.misses += 1;
                    if t.misses > self.params.max_age {
                        report.lost.push(t);
                    } else {
                        self.tracks.push(t);
                    }
                }
            }
        }

        for (di, d) in detections.iter().enumerate() {
            if det_taken[di] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks
                .push(Track::new(id, d, frame, &self.params.kalman));
            report.created.push(id);
            if self.params.min_hits <= 1 {
                report.newly_confirmed.push(id);
            }
        }
        report
    }

    /// Ends the run, returning every live track.
    pub fn finish(self) -> Vec<Track> {
        self.tracks
    }
}

/// One tracker step; see [`Tracker::step`].
pub fn tracker_step(tracker: &mut Tracker, detections: &[Detection]) -> StepReport {
    tracker.step(detections)
}
