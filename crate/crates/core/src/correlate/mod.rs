//! Hourly vehicle counts against cleaned PM2.5: inner join, Pearson
//! correlation, a lag scan and a chart report.

mod chart;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::Duration;
use thiserror::Error;

use crate::series::{format_timestamp, TimeSeries, Timestamp};

pub use chart::{render_chart, CHART_HEADER};

#[derive(Debug, Error)]
pub enum CorrelateError {
    #[error("the two series share no hour")]
    NoOverlap,
    #[error("input is constant; correlation is undefined")]
    ConstantInput,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{len} joined hours cannot support lags up to {max_lag} (need more than {})", max_lag + 3)]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("cannot write {}: {source}", path.display())]
    OutputUnwritable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Vehicles and PM2.5 on a run of consecutive hours.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedSeries {
    hours: Vec<Timestamp>,
    vehicles: Vec<f64>,
    pm25: Vec<f64>,
    /// Input points of each side left out of the join.
    pub dropped_vehicles: usize,
    pub dropped_pm25: usize,
}

impl JoinedSeries {
    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn hours(&self) -> &[Timestamp] {
        &self.hours
    }

    pub fn vehicles(&self) -> &[f64] {
        &self.vehicles
    }

    pub fn pm25(&self) -> &[f64] {
        &self.pm25
    }

    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "hour_start,vehicles,pm25")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{}",
                format_timestamp(self.hours[i]),
                self.vehicles[i],
                self.pm25[i]
            )?;
        }
        Ok(())
    }
}

/// Inner join on exact timestamps. When the shared hours are not
/// contiguous, the longest consecutive run is kept (the earliest on ties)
/// and everything else counts as dropped.
pub fn join_hourly(
    vehicles: &TimeSeries,
    pm25: &TimeSeries,
) -> Result<JoinedSeries, CorrelateError> {
    let (a, b) = (vehicles.points(), pm25.points());
    let mut shared = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared.push((a[i].0, a[i].1, b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    if shared.is_empty() {
        return Err(CorrelateError::NoOverlap);
    }
    let (mut best, mut run_start) = ((0, 1), 0);
    for k in 1..shared.len() {
        if shared[k].0 - shared[k - 1].0 != Duration::hours(1) {
            run_start = k;
        }
        if k + 1 - run_start > best.1 - best.0 {
            best = (run_start, k + 1);
        }
    }
    let run = &shared[best.0..best.1];
    Ok(JoinedSeries {
        hours: run.iter().map(|r| r.0).collect(),
        vehicles: run.iter().map(|r| r.1).collect(),
        pm25: run.iter().map(|r| r.2).collect(),
        dropped_vehicles: a.len() - run.len(),
        dropped_pm25: b.len() - run.len(),
    })
}

/// Pearson product-moment coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelateError> {
    if x.len() != y.len() {
        return Err(CorrelateError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(CorrelateError::TooFewPoints(n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelateError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagCorrelation {
    /// PM2.5 trails vehicles by this many hours.
    pub lag: usize,
    pub r: f64,
    pub n: usize,
}

/// Pearson r of `vehicles[0..n-k]` against `pm25[k..n]` for every lag
/// `k` in `0..=max_lag`. Lags where either window is constant are left out.
pub fn lagged_cross_correlation(
    joined: &JoinedSeries,
    max_lag: usize,
) -> Result<Vec<LagCorrelation>, CorrelateError> {
    let n = joined.len();
    if n <= max_lag + 3 {
        return Err(CorrelateError::SeriesTooShort { len: n, max_lag });
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        match pearson(&joined.vehicles[..n - lag], &joined.pm25[lag..]) {
            Ok(r) => out.push(LagCorrelation { lag, r, n: n - lag }),
            Err(CorrelateError::ConstantInput) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Entry with the largest r; the smallest lag wins ties.
pub fn best_lag(lags: &[LagCorrelation]) -> Option<LagCorrelation> {
    lags.iter()
        .copied()
        .fold(None, |best: Option<LagCorrelation>, l| match best {
            Some(b) if b.r >= l.r => Some(b),
            _ => Some(l),
        })
}

pub fn write_lags_csv<W: io::Write>(lags: &[LagCorrelation], mut out: W) -> io::Result<()> {
    writeln!(out, "lag_hours,r,n")?;
    for l in lags {
        writeln!(out, "{},{:.6},{}", l.lag, l.r, l.n)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub chart: PathBuf,
    pub joined: PathBuf,
    /// Absent when there were no lags to tabulate.
    pub lags: Option<PathBuf>,
}

pub const CHART_FILE: &str = "chart.svg";
pub const JOINED_FILE: &str = "joined.csv";
pub const LAGS_FILE: &str = "lags.csv";

/// Writes the chart and tables into `out_dir`, creating it if needed.
pub fn emit_report(
    joined: &JoinedSeries,
    lags: &[LagCorrelation],
    out_dir: &Path,
) -> Result<ReportFiles, CorrelateError> {
    let unwritable = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorrelateError::OutputUnwritable { path, source }
    };
    fs::create_dir_all(out_dir).map_err(unwritable(out_dir))?;

    let chart = out_dir.join(CHART_FILE);
    fs::write(&chart, render_chart(joined, lags)).map_err(unwritable(&chart))?;

    let joined_path = out_dir.join(JOINED_FILE);
    let mut buf = Vec::new();
    joined.write_csv(&mut buf).expect("in-memory write");
    fs::write(&joined_path, buf).map_err(unwritable(&joined_path))?;

    let lags_path = if lags.is_empty() {
        None
    } else {
        let path = out_dir.join(LAGS_FILE);
        let mut buf = Vec::new();
        write_lags_csv(lags, &mut buf).expect("in-memory write");
        fs::write(&path, buf).map_err(unwritable(&path))?;
        Some(path)
    };
    Ok(ReportFiles {
        chart,
        joined: joined_path,
        lags: lags_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hour(h: i64) -> Timestamp {
        Utc.with_ymd_and_hms(2026, 3, 2, 0, 0, 0).unwrap() + Duration::hours(h)
    }

    fn hourly(first: i64, values: &[f64]) -> TimeSeries {
        TimeSeries::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (hour(first + i as i64), v))
                .collect(),
        )
        .unwrap()
    }

    /// Textbook single-pass form, independent of the centered sums above.
    fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn identical_hours_join_fully() {
        let v = hourly(0, &[1.0, 2.0, 3.0, 4.0]);
        let j = join_hourly(&v, &hourly(0, &[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert_eq!(j.len(), 4);
        assert_eq!((j.dropped_vehicles, j.dropped_pm25), (0, 0));
    }

    #[test]
    fn one_hour_offset_loses_one_hour() {
        let v = hourly(0, &[1.0; 24]);
        let p = hourly(1, &[0.5; 24]);
        let j = join_hourly(&v, &p).unwrap();
        assert_eq!(j.len(), 23);
        assert_eq!(j.hours()[0], hour(1));
        assert_eq!((j.dropped_vehicles, j.dropped_pm25), (1, 1));
    }

    #[test]
    fn disjoint_spans_do_not_join() {
        let v = hourly(0, &[1.0; 5]);
        let p = hourly(5, &[1.0; 5]);
        assert!(matches!(
            join_hourly(&v, &p),
            Err(CorrelateError::NoOverlap)
        ));
    }

    #[test]
    fn gaps_keep_the_longest_run() {
        let v = hourly(0, &[1.0; 12]);
        // pm25 misses hour 3
        let p = TimeSeries::new(
            (0..12)
                .filter(|&h| h != 3)
                .map(|h| (hour(h), 0.5))
                .collect(),
        )
        .unwrap();
        let j = join_hourly(&v, &p).unwrap();
        assert_eq!(j.len(), 8);
        assert_eq!(j.hours()[0], hour(4));
        for w in j.hours().windows(2) {
            assert_eq!(w[1] - w[0], Duration::hours(1));
        }
        assert_eq!((j.dropped_vehicles, j.dropped_pm25), (4, 3));
    }

    #[test]
    fn pearson_edge_cases() {
        let x = [1.0, 2.0, 3.0, 5.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() <= 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() <= 1e-15);
        assert!(matches!(
            pearson(&x, &[2.0; 4]),
            Err(CorrelateError::ConstantInput)
        ));
        assert!(matches!(
            pearson(&x[..2], &x[..2]),
            Err(CorrelateError::TooFewPoints(2))
        ));
        assert!(matches!(
            pearson(&x, &x[..3]),
            Err(CorrelateError::LengthMismatch(4, 3))
        ));
    }

    #[test]
    fn pearson_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(3..60);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|v| 0.3 * v + rng.random_range(-5.0..5.0))
                .collect();
            let r = pearson(&x, &y).unwrap();
            assert!((r - direct_pearson(&x, &y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn lag_zero_is_plain_pearson() {
        let v: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let p: Vec<f64> = (0..30).map(|i| ((i * 5) % 13) as f64).collect();
        let j = join_hourly(&hourly(0, &v), &hourly(0, &p)).unwrap();
        let lags = lagged_cross_correlation(&j, 6).unwrap();
        assert_eq!(lags.len(), 7);
        assert_eq!(lags[0].r, pearson(&v, &p).unwrap());
        assert_eq!(lags[6].n, 24);
        let same = join_hourly(&hourly(0, &v), &hourly(0, &v)).unwrap();
        assert_eq!(lagged_cross_correlation(&same, 3).unwrap()[0].r, 1.0);
    }

    #[test]
    fn short_series_are_rejected() {
        let j = join_hourly(
            &hourly(0, &[1.0, 2.0, 4.0, 3.0, 5.0, 6.0]),
            &hourly(0, &[1.0, 3.0, 2.0, 5.0, 4.0, 6.0]),
        )
        .unwrap();
        assert!(matches!(
            lagged_cross_correlation(&j, 3),
            Err(CorrelateError::SeriesTooShort { len: 6, max_lag: 3 })
        ));
        assert_eq!(lagged_cross_correlation(&j, 2).unwrap().len(), 3);
    }

    #[test]
    fn best_lag_prefers_the_earliest_tie() {
        let l = |lag, r| LagCorrelation { lag, r, n: 10 };
        assert_eq!(best_lag(&[l(0, 0.2), l(1, 0.9), l(2, 0.9)]).unwrap().lag, 1);
        assert!(best_lag(&[]).is_none());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..40),
            seed in any::<u64>(),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs.iter().map(|x| x + rng.random_range(-30.0..30.0)).collect();
            let Ok(r) = pearson(&xs, &ys) else { return Ok(()) };
            let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let negated: Vec<f64> = ys.iter().map(|y| -y).collect();
            prop_assert!((pearson(&scaled, &ys).unwrap() - r).abs() <= 1e-9);
            prop_assert!((pearson(&xs, &negated).unwrap() + r).abs() <= 1e-12);
            prop_assert!(r.abs() <= 1.0);
        }
    }
}
