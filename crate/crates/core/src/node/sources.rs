//! Pull-based inputs for the node loops. Hardware drivers would implement
//! the same traits.

use std::f64::consts::PI;

use chrono::Timelike;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frame::GrayFrame;
use crate::sensor::{encode_pms7003_frame, EnvReading, Pms7003Frame, FRAME_LEN};
use crate::series::Timestamp;
use crate::traffic::synth::Scene;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("source unavailable: {0}")]
    Unavailable(String),
}

/// Raw sensor read: the particulate sensor's wire frame plus the
/// environment reading taken at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReading {
    pub frame: [u8; FRAME_LEN],
    pub env: EnvReading,
}

pub trait SampleSource: Send {
    fn read(&mut self, at: Timestamp) -> Result<RawReading, SourceError>;
}

pub trait FrameSource: Send {
    fn frame(&mut self, at: Timestamp) -> Result<GrayFrame, SourceError>;
}

/// Seeded sensor with a diurnal PM2.5 cycle.
#[derive(Debug, Clone)]
pub struct SimulatedSensor {
    rng: ChaCha8Rng,
    corrupt_every: Option<u64>,
    reads: u64,
}

impl SimulatedSensor {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            corrupt_every: None,
            reads: 0,
        }
    }

    /// Every `n`th frame gets a flipped payload byte.
    pub fn corrupt_every(mut self, n: u64) -> Self {
        self.corrupt_every = Some(n.max(1));
        self
    }
}

impl SampleSource for SimulatedSensor {
    fn read(&mut self, at: Timestamp) -> Result<RawReading, SourceError> {
        self.reads += 1;
        let hour = at.hour() as f64 + at.minute() as f64 / 60.0;
        let phase = 2.0 * PI * (hour - 8.0) / 24.0;
        let pm25 = (14.0 + 8.0 * phase.sin() + self.rng.random_range(-2.0..2.0)).max(0.0);
        let word = |x: f64| x.round().clamp(0.0, 65535.0) as u16;
        let frame = Pms7003Frame {
            pm1_0_std: word(pm25 * 0.7),
            pm2_5_std: word(pm25),
            pm10_std: word(pm25 * 1.3),
            pm1_0_atm: word(pm25 * 0.7),
            pm2_5_atm: word(pm25),
            pm10_atm: word(pm25 * 1.3),
            count_0_3um: word(pm25 * 180.0),
            count_0_5um: word(pm25 * 50.0),
            count_1_0um: word(pm25 * 9.0),
            count_2_5um: word(pm25),
            count_5_0um: word(pm25 * 0.2),
            count_10um: word(pm25 * 0.05),
            reserved: 0,
        };
        let mut bytes = encode_pms7003_frame(&frame);
        if self.corrupt_every.is_some_and(|n| self.reads % n == 0) {
            bytes[10] ^= 0x01;
        }
        let env = EnvReading::new(
            27.0 + 3.0 * phase.sin() + self.rng.random_range(-0.2..0.2),
            (65.0 - 10.0 * phase.sin()).clamp(0.0, 100.0),
            1008.0 + self.rng.random_range(-0.5..0.5),
        )
        .map_err(|e| SourceError::Unavailable(e.to_string()))?;
        Ok(RawReading { frame: bytes, env })
    }
}

/// Uniform frames.
#[derive(Debug, Clone)]
pub struct FlatFrames {
    frame: GrayFrame,
}

impl FlatFrames {
    pub fn new(width: usize, height: usize, value: u8) -> Self {
        Self {
            frame: GrayFrame::filled(width, height, value),
        }
    }
}

impl FrameSource for FlatFrames {
    fn frame(&mut self, _at: Timestamp) -> Result<GrayFrame, SourceError> {
        Ok(self.frame.clone())
    }
}

/// Renders a synthetic scene, looping it over its duration. Scene time zero
/// is `origin`.
#[derive(Debug, Clone)]
pub struct SceneFrames {
    scene: Scene,
    origin: Timestamp,
}

impl SceneFrames {
    pub fn new(scene: Scene, origin: Timestamp) -> Self {
        Self { scene, origin }
    }
}

impl FrameSource for SceneFrames {
    fn frame(&mut self, at: Timestamp) -> Result<GrayFrame, SourceError> {
        let offset = (at - self.origin).num_nanoseconds().unwrap_or(0) as f64 / 1e9;
        let t = offset.rem_euclid(self.scene.duration_s());
        Ok(self.scene.render_at(t, (t * 1e3) as u64))
    }
}
