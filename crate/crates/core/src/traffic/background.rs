use crate::frame::GrayFrame;

use super::TrafficError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackgroundParams {
    pub pixel_threshold: u8,
    /// Frames a candidate must stay within threshold before it becomes
    /// background.
    pub min_stability: u32,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            pixel_threshold: 16,
            min_stability: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ForegroundMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub(crate) fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Per-pixel stability counting.
///
/// Each pixel keeps a candidate intensity and a count of consecutive frames
/// that stayed within `pixel_threshold` of it. A candidate that survives
/// `min_stability` frames is promoted to background. Until a pixel has been
/// promoted once it is never foreground.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    params: BackgroundParams,
    background: Vec<u8>,
    defined: Vec<bool>,
    candidate: Vec<u8>,
    stability: Vec<u32>,
    primed: bool,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize, params: BackgroundParams) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            params,
            background: vec![0; n],
            defined: vec![false; n],
            candidate: vec![0; n],
            stability: vec![0; n],
            primed: false,
        }
    }

    pub fn params(&self) -> BackgroundParams {
        self.params
    }

    pub fn is_defined(&self, x: usize, y: usize) -> bool {
        self.defined[y * self.width + x]
    }

    pub fn stability(&self, x: usize, y: usize) -> u32 {
        self.stability[y * self.width + x]
    }

    /// Folds `frame` into the model, then classifies it against the updated
    /// background.
    pub fn update(&mut self, frame: &GrayFrame) -> Result<ForegroundMask, TrafficError> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(TrafficError::DimensionMismatch {
                expected: (self.width, self.height),
                found: (frame.width(), frame.height()),
            });
        }
        let thr = self.params.pixel_threshold;
        let mut mask = ForegroundMask::new(self.width, self.height);
        for (i, &p) in frame.pixels().iter().enumerate() {
            if self.primed && p.abs_diff(self.candidate[i]) <= thr {
                self.stability[i] = self.stability[i].saturating_add(1);
            } else {
                self.candidate[i] = p;
                self.stability[i] = 0;
            }
            if self.stability[i] >= self.params.min_stability {
                self.background[i] = self.candidate[i];
                self.defined[i] = true;
            }
            mask.bits[i] = self.defined[i] && p.abs_diff(self.background[i]) > thr;
        }
        self.primed = true;
        Ok(mask)
    }
}

pub fn background_update(
    model: &mut BackgroundModel,
    frame: &GrayFrame,
) -> Result<ForegroundMask, TrafficError> {
    model.update(frame)
}
