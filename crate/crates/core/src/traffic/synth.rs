//! Scripted synthetic scenes: rigid rectangles moving at constant velocity
//! over a flat background, with optional per-pixel noise.
//!
//! A script is flat text. Header lines are `key=value`; each object is one
//! row `object,name,w,h,x0,y0,vx,vy,t0,intensity` where `(x0, y0)` is the
//! top-left corner at time `t0` seconds and velocities are pixels/second.
//!
//! ```text
//! width=324
//! height=182
//! fps=10
//! duration=12
//! background=40
//! noise=4
//! seed=7
//! start=2026-03-02T08:00:00Z
//! line=0,91,324,91
//! object,car,30,20,60,-20,0,40,3,200
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frame::GrayFrame;
use crate::fseq::{FseqError, FseqHeader, FseqWriter};
use crate::kv::{KvDoc, KvError};
use crate::series::{parse_timestamp, Timestamp};

use super::line::{CountLine, Direction};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Header(#[from] KvError),
    #[error("scene has no count line")]
    NoLine,
    #[error(transparent)]
    Fseq(#[from] FseqError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub w: f64,
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
    pub t0: f64,
    pub intensity: u8,
}

impl SceneObject {
    /// Box center at `t`, or `None` before the object appears.
    pub fn center_at(&self, t: f64) -> Option<(f64, f64)> {
        (t >= self.t0).then(|| {
            let dt = t - self.t0;
            (
                self.x0 + self.w / 2.0 + self.vx * dt,
                self.y0 + self.h / 2.0 + self.vy * dt,
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthCrossing {
    pub object: String,
    /// Seconds from scene start.
    pub t: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub fps: u8,
    duration_s: f64,
    pub background: u8,
    /// Noise is uniform in `[-noise, noise]`, independent per pixel.
    pub noise: u8,
    pub seed: u64,
    pub start: Option<Timestamp>,
    pub line: Option<CountLine>,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut header = String::new();
        let mut objects = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix("object,") {
                objects.push(parse_object(rest).map_err(|reason| SynthError::Syntax {
                    line: i + 1,
                    reason,
                })?);
                header.push('\n');
            } else {
                header.push_str(line);
                header.push('\n');
            }
        }
        let doc = KvDoc::parse(&header)?;
        let bad = |key: &str| KvError::Invalid {
            key: key.to_string(),
            value: doc.get(key).unwrap_or_default().to_string(),
        };
        let width: usize = doc.parse_or("width", 324)?;
        let height: usize = doc.parse_or("height", 182)?;
        let fps: u8 = doc.parse_or("fps", 10)?;
        let duration_s: f64 = doc.parse_or("duration", 10.0)?;
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(bad("width").into());
        }
        if fps == 0 {
            return Err(bad("fps").into());
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(bad("duration").into());
        }
        let start = match doc.get("start") {
            None => None,
            Some(v) => Some(parse_timestamp(v).ok_or_else(|| bad("start"))?),
        };
        let line = match doc.get("line") {
            None => None,
            Some(v) => Some(CountLine::parse(v).map_err(|_| bad("line"))?),
        };
        Ok(Self {
            width,
            height,
            fps,
            duration_s,
            background: doc.parse_or("background", 40)?,
            noise: doc.parse_or("noise", 0)?,
            seed: doc.parse_or("seed", 0)?,
            start,
            line,
            objects,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(FseqError::Io)?;
        Self::parse(&text)
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps as f64).round() as usize
    }

    /// Same trajectories sampled at a different rate.
    pub fn with_fps(&self, fps: u8) -> Self {
        Self {
            fps,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Renders the scene at `t` seconds. `noise_key` selects the noise
    /// pattern, so equal keys give identical frames.
    pub fn render_at(&self, t: f64, noise_key: u64) -> GrayFrame {
        let mut frame = GrayFrame::filled(self.width, self.height, self.background);
        for o in &self.objects {
            if let Some((cx, cy)) = o.center_at(t) {
                let x = (cx - o.w / 2.0).round() as i64;
                let y = (cy - o.h / 2.0).round() as i64;
                frame.fill_rect(x, y, o.w as i64, o.h as i64, o.intensity);
            }
        }
        if self.noise > 0 {
            let key = self.seed ^ noise_key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            let n = self.noise as i16;
            for p in frame.pixels_mut() {
                *p = (*p as i16 + rng.random_range(-n..=n)).clamp(0, 255) as u8;
            }
        }
        frame
    }

    /// Frame `i` at the scene's own rate.
    pub fn frame(&self, i: usize) -> GrayFrame {
        self.render_at(i as f64 / self.fps as f64, i as u64)
    }

    pub fn frames(&self) -> impl Iterator<Item = GrayFrame> + '_ {
        (0..self.frame_count()).map(|i| self.frame(i))
    }

    pub fn write_fseq(&self, path: &Path) -> Result<FseqHeader, SynthError> {
        let mut w = FseqWriter::create(path, self.width, self.height, self.fps)?;
        for f in self.frames() {
            w.write_frame(&f)?;
        }
        Ok(w.finish()?.0)
    }

    /// Crossings of `line` by each object's continuous center path over
    /// `[t0, duration]`, in time order.
    pub fn ground_truth(&self, line: &CountLine) -> Vec<TruthCrossing> {
        let mut out = Vec::new();
        for o in &self.objects {
            let (Some(p), Some(q)) = (o.center_at(o.t0), o.center_at(self.duration_s)) else {
                continue;
            };
            if !line.strictly_crosses(p, q) {
                continue;
            }
            let (s0, s1) = (line.side(p), line.side(q));
            out.push(TruthCrossing {
                object: o.name.clone(),
                t: o.t0 + (self.duration_s - o.t0) * s0 / (s0 - s1),
                direction: if s1 > 0.0 {
                    Direction::Down
                } else {
                    Direction::Up
                },
            });
        }
        out.sort_by(|a, b| a.t.total_cmp(&b.t));
        out
    }

    pub fn script_line(&self) -> Result<CountLine, SynthError> {
        self.line.ok_or(SynthError::NoLine)
    }
}

fn parse_object(rest: &str) -> Result<SceneObject, String> {
    let fields: Vec<&str> = rest.split(',').map(str::trim).collect();
    let [name, w, h, x0, y0, vx, vy, t0, intensity] = fields[..] else {
        return Err(format!(
            "object row needs 9 fields after `object`, got {}",
            fields.len()
        ));
    };
    let num = |label: &str, v: &str| {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("{label}: not a number: `{v}`"))
    };
    let o = SceneObject {
        name: name.to_string(),
        w: num("w", w)?,
        h: num("h", h)?,
        x0: num("x0", x0)?,
        y0: num("y0", y0)?,
        vx: num("vx", vx)?,
        vy: num("vy", vy)?,
        t0: num("t0", t0)?,
        intensity: intensity
            .parse()
            .map_err(|_| format!("intensity: expected 0..=255, got `{intensity}`"))?,
    };
    if name.is_empty() || o.w < 1.0 || o.h < 1.0 || o.t0 < 0.0 {
        return Err("object needs a name, w,h ≥ 1 and t0 ≥ 0".to_string());
    }
    Ok(o)
}
