//! Time sources. The node runtime, uploader and retry policy all read time
//! through [`Clock`] so desk runs can be accelerated or fully scripted.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::series::Timestamp;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;

    /// Blocks until `now() >= deadline`. Returns immediately if already past.
    fn sleep_until(&self, deadline: Timestamp);

    fn sleep(&self, duration: Duration) {
        self.sleep_until(self.now() + to_chrono(duration));
    }
}

pub(crate) fn to_chrono(d: Duration) -> chrono::Duration {
    chrono::Duration::from_std(d).expect("duration in range")
}

/// Wall clock.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        chrono::Utc::now()
    }

    fn sleep_until(&self, deadline: Timestamp) {
        if let Ok(d) = (deadline - self.now()).to_std() {
            std::thread::sleep(d);
        }
    }
}

/// Virtual time that runs `factor` times faster than the wall clock,
/// starting at `origin`.
#[derive(Debug, Clone)]
pub struct AcceleratedClock {
    origin: Timestamp,
    started: Instant,
    factor: f64,
}

impl AcceleratedClock {
    pub fn new(origin: Timestamp, factor: f64) -> Self {
        assert!(
            factor > 0.0 && factor.is_finite(),
            "acceleration must be positive"
        );
        Self {
            origin,
            started: Instant::now(),
            factor,
        }
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

impl Clock for AcceleratedClock {
    fn now(&self) -> Timestamp {
        let virt = self.started.elapsed().as_secs_f64() * self.factor;
        self.origin + chrono::Duration::nanoseconds((virt * 1e9) as i64)
    }

    fn sleep_until(&self, deadline: Timestamp) {
        loop {
            let Ok(remaining) = (deadline - self.now()).to_std() else {
                return;
            };
            if remaining.is_zero() {
                return;
            }
            std::thread::sleep(remaining.div_f64(self.factor));
        }
    }
}

/// Scripted time: `sleep_until` jumps forward instantly and never blocks.
/// Every sleep request is recorded for assertions on backoff schedules.
#[derive(Debug)]
pub struct ManualClock {
    state: Mutex<ManualState>,
}

#[derive(Debug)]
struct ManualState {
    now: Timestamp,
    sleeps: Vec<Duration>,
}

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        Self {
            state: Mutex::new(ManualState {
                now: start,
                sleeps: Vec::new(),
            }),
        }
    }

    pub fn set(&self, now: Timestamp) {
        self.state.lock().unwrap().now = now;
    }

    pub fn advance(&self, d: Duration) {
        let mut s = self.state.lock().unwrap();
        s.now += to_chrono(d);
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().sleeps.clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        self.state.lock().unwrap().now
    }

    fn sleep_until(&self, deadline: Timestamp) {
        let mut s = self.state.lock().unwrap();
        if deadline > s.now {
            let d = (deadline - s.now).to_std().unwrap_or_default();
            s.sleeps.push(d);
            s.now = deadline;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn manual_clock_records_sleeps() {
        let start = chrono::Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap();
        let clock = ManualClock::new(start);
        clock.sleep(Duration::from_secs(5));
        clock.sleep_until(start);
        assert_eq!(clock.now(), start + chrono::Duration::seconds(5));
        assert_eq!(clock.sleeps(), vec![Duration::from_secs(5)]);
    }

    #[test]
    fn accelerated_clock_runs_fast() {
        let start = chrono::Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap();
        let clock = AcceleratedClock::new(start, 10_000.0);
        let target = start + chrono::Duration::seconds(20);
        let wall = Instant::now();
        clock.sleep_until(target);
        assert!(clock.now() >= target);
        assert!(wall.elapsed() < Duration::from_millis(500));
    }
}
