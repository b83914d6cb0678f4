use super::background::ForegroundMask;
use super::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    /// Foreground pixels in the component, not the box area.
    pub pixels: usize,
}

impl Detection {
    pub fn center(&self) -> (f64, f64) {
        self.bbox.center()
    }
}

/// 8-connected components with at least `min_area` pixels, as tight boxes.
/// Components are ordered by their first pixel in raster order.
pub fn extract_detections(mask: &ForegroundMask, min_area: usize) -> Vec<Detection> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for seed in 0..w * h {
        if !bits[seed] || visited[seed] {
            continue;
        }
        visited[seed] = true;
        stack.push(seed);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut count = 0;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if bits[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if count >= min_area {
            out.push(Detection {
                bbox: BBox::new(
                    x0 as f64,
                    y0 as f64,
                    (x1 - x0 + 1) as f64,
                    (y1 - y0 + 1) as f64,
                ),
                pixels: count,
            });
        }
    }
    out
}
