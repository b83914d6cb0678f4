use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pixel buffer holds {got} bytes, {width}x{height} needs {}", width * height)]
pub struct FrameSizeError {
    pub width: usize,
    pub height: usize,
    pub got: usize,
}

/// 8-bit grayscale image, row-major, top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FrameSizeError> {
        if pixels.len() != width * height {
            return Err(FrameSizeError {
                width,
                height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Paints the axis-aligned rectangle `[x, x+w) x [y, y+h)`, clipped to
    /// the frame.
    pub fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, value: u8) {
        let x0 = x.clamp(0, self.width as i64) as usize;
        let x1 = (x + w).clamp(0, self.width as i64) as usize;
        let y0 = y.clamp(0, self.height as i64) as usize;
        let y1 = (y + h).clamp(0, self.height as i64) as usize;
        for row in y0..y1 {
            self.pixels[row * self.width + x0..row * self.width + x1].fill(value);
        }
    }
}
