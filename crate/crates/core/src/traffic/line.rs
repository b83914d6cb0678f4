use super::TrafficError;

/// Direction of a crossing relative to the line's orientation. With the
/// line drawn left to right in image coordinates (y grows downward), `Down`
/// is a crossing toward larger y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountLine {
    a: (f64, f64),
    b: (f64, f64),
}

impl CountLine {
    pub fn new(a: (f64, f64), b: (f64, f64)) -> Result<Self, TrafficError> {
        if a == b || ![a.0, a.1, b.0, b.1].iter().all(|v| v.is_finite()) {
            return Err(TrafficError::DegenerateLine);
        }
        Ok(Self { a, b })
    }

    /// Parses `x1,y1,x2,y2`.
    pub fn parse(text: &str) -> Result<Self, TrafficError> {
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| TrafficError::DegenerateLine)?;
        match v[..] {
            [x1, y1, x2, y2] => Self::new((x1, y1), (x2, y2)),
            _ => Err(TrafficError::DegenerateLine),
        }
    }

    pub fn endpoints(&self) -> ((f64, f64), (f64, f64)) {
        (self.a, self.b)
    }

    /// Signed area of `(a, b, p)`: positive on the `Down` side.
    pub fn side(&self, p: (f64, f64)) -> f64 {
        cross(sub(self.b, self.a), sub(p, self.a))
    }

    /// True when segment `p`→`q` crosses the line segment at a single
    /// interior point of both.
    pub fn strictly_crosses(&self, p: (f64, f64), q: (f64, f64)) -> bool {
        let d1 = self.side(p);
        let d2 = self.side(q);
        let pq = sub(q, p);
        let d3 = cross(pq, sub(self.a, p));
        let d4 = cross(pq, sub(self.b, p));
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }
}

fn sub(p: (f64, f64), q: (f64, f64)) -> (f64, f64) {
    (p.0 - q.0, p.1 - q.1)
}

fn cross(u: (f64, f64), v: (f64, f64)) -> f64 {
    u.0 * v.1 - u.1 * v.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingEvent {
    /// Index of the first history point past the line.
    pub index: usize,
    pub direction: Direction,
}

/// Crossing events along a center path, at most one per direction.
///
/// Points exactly on the line carry no side; a crossing is measured from the
/// last point that did, so a path that touches the line and turns back is
/// not counted.
pub fn count_crossings(history: &[(f64, f64)], line: &CountLine) -> Vec<CrossingEvent> {
    let mut events: Vec<CrossingEvent> = Vec::new();
    let mut anchor: Option<(f64, f64)> = None;
    for (i, &p) in history.iter().enumerate() {
        let s = line.side(p);
        if s == 0.0 {
            continue;
        }
        if let Some(prev) = anchor {
            if line.strictly_crosses(prev, p) {
                let direction = if s > 0.0 {
                    Direction::Down
                } else {
                    Direction::Up
                };
                if events.iter().all(|e| e.direction != direction) {
                    events.push(CrossingEvent {
                        index: i,
                        direction,
                    });
                }
            }
        }
        anchor = Some(p);
    }
    events
}
