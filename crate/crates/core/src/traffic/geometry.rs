/// Axis-aligned box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// `(cx, cy, area, aspect)` with aspect = w / h.
    pub fn to_measurement(&self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.area(), self.w / self.h]
    }

    pub fn from_measurement(cx: f64, cy: f64, area: f64, aspect: f64) -> Self {
        let w = (area * aspect).max(0.0).sqrt();
        let h = if w > 0.0 { area / w } else { 0.0 };
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iou_cases() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(20.0, 0.0, 10.0, 10.0)), 0.0);
        // touching edges share no area
        assert_eq!(iou(&a, &BBox::new(10.0, 0.0, 10.0, 10.0)), 0.0);
        let shifted = BBox::new(5.0, 0.0, 10.0, 10.0);
        assert!((iou(&a, &shifted) - 50.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn measurement_round_trip() {
        let b = BBox::new(12.0, 7.0, 30.0, 14.0);
        let [cx, cy, s, r] = b.to_measurement();
        let back = BBox::from_measurement(cx, cy, s, r);
        for (p, q) in [(b.x, back.x), (b.y, back.y), (b.w, back.w), (b.h, back.h)] {
            assert!((p - q).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn iou_bounded_and_symmetric(
            ax in 0.0f64..100.0, ay in 0.0f64..100.0, aw in 1.0f64..50.0, ah in 1.0f64..50.0,
            bx in 0.0f64..100.0, by in 0.0f64..100.0, bw in 1.0f64..50.0, bh in 1.0f64..50.0,
        ) {
            let a = BBox::new(ax, ay, aw, ah);
            let b = BBox::new(bx, by, bw, bh);
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
        }
    }
}
