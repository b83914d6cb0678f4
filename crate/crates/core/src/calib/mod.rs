//! Evaluation of a low-cost sensor against a co-located reference:
//! time alignment, DTW, trailing moving average, MAPE, RMSE and the
//! Hodrick-Prescott trend-match score.

mod dtw;
mod hp;

use std::time::Duration;

use thiserror::Error;

use crate::clock::to_chrono;
use crate::kv;
use crate::series::{TimeSeries, Timestamp};

pub use dtw::{dtw, warp_onto_reference, WarpPath};
pub use hp::{hp_filter, hp_objective, HpDecomposition, DEFAULT_LAMBDA};

pub const DEFAULT_WINDOW: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("empty input")]
    EmptyInput,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("every reference value is zero; MAPE undefined")]
    AllReferenceZero,
    #[error("series too short: need {needed}, got {found}")]
    SeriesTooShort { needed: usize, found: usize },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("reference and test series do not overlap in time")]
    NoTemporalOverlap,
}

/// Reference and test values on one shared timestamp grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    reference: TimeSeries,
    test: TimeSeries,
}

impl AlignedPair {
    pub fn reference(&self) -> &TimeSeries {
        &self.reference
    }

    pub fn test(&self) -> &TimeSeries {
        &self.test
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }
}

/// Restricts the reference to the common time span and samples the test
/// series at those reference timestamps by linear interpolation.
pub fn align(reference: &TimeSeries, test: &TimeSeries) -> Result<AlignedPair, CalibError> {
    let (Some(r0), Some(r1), Some(t0), Some(t1)) = (
        reference.first(),
        reference.last(),
        test.first(),
        test.last(),
    ) else {
        return Err(CalibError::NoTemporalOverlap);
    };
    let lo = r0.0.max(t0.0);
    let hi = r1.0.min(t1.0);
    let grid: Vec<(Timestamp, f64)> = reference
        .points()
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo && t <= hi)
        .collect();
    if grid.len() < 2 {
        return Err(CalibError::NoTemporalOverlap);
    }

    let tp = test.points();
    let mut k = 0;
    let mut sampled = Vec::with_capacity(grid.len());
    for &(t, _) in &grid {
        while k + 1 < tp.len() && tp[k + 1].0 <= t {
            k += 1;
        }
        let (ta, va) = tp[k];
        let v = if ta == t || k + 1 == tp.len() {
            va
        } else {
            let (tb, vb) = tp[k + 1];
            let frac = (t - ta).num_milliseconds() as f64 / (tb - ta).num_milliseconds() as f64;
            va + (vb - va) * frac
        };
        sampled.push((t, v));
    }
    Ok(AlignedPair {
        reference: TimeSeries::from_points_unchecked(grid),
        test: TimeSeries::from_points_unchecked(sampled),
    })
}

/// Trailing time-based mean over `(t - window, t]`, evaluated at every input
/// timestamp.
pub fn moving_average(series: &TimeSeries, window: Duration) -> TimeSeries {
    let window = to_chrono(window);
    let p = series.points();
    let mut out = Vec::with_capacity(p.len());
    let mut lo = 0;
    for (hi, &(t, _)) in p.iter().enumerate() {
        while p[lo].0 <= t - window {
            lo += 1;
        }
        // mean of deviations from the newest value: exact on constant windows
        let anchor = p[hi].1;
        let dev: f64 = p[lo..=hi].iter().map(|x| x.1 - anchor).sum();
        out.push((t, anchor + dev / (hi - lo + 1) as f64));
    }
    TimeSeries::from_points_unchecked(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub pct: f64,
    /// Points skipped because the reference read exactly zero.
    pub skipped: usize,
}

/// Mean of `|test - ref| / ref`, as a percentage.
pub fn mape(reference: &[f64], test: &[f64]) -> Result<Mape, CalibError> {
    check_lengths(reference, test)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (&r, &t) in reference.iter().zip(test) {
        if r == 0.0 {
            continue;
        }
        total += ((t - r) / r).abs();
        used += 1;
    }
    if used == 0 {
        return Err(CalibError::AllReferenceZero);
    }
    Ok(Mape {
        pct: total / used as f64 * 100.0,
        skipped: reference.len() - used,
    })
}

pub fn rmse(reference: &[f64], test: &[f64]) -> Result<f64, CalibError> {
    check_lengths(reference, test)?;
    let mse = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (t - r).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    Ok(mse.sqrt())
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), CalibError> {
    if a.len() != b.len() {
        return Err(CalibError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(CalibError::EmptyInput);
    }
    Ok(())
}

/// Percentage of indices where the two cycles agree in sign. A zero cycle
/// value agrees with anything.
pub fn trend_match_score(cycle_ref: &[f64], cycle_test: &[f64]) -> Result<f64, CalibError> {
    check_lengths(cycle_ref, cycle_test)?;
    let sign = |x: f64| {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };
    let matches = cycle_ref
        .iter()
        .zip(cycle_test)
        .filter(|(a, b)| sign(**a) * sign(**b) >= 0)
        .count();
    Ok(100.0 * matches as f64 / cycle_ref.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub mape_pct: f64,
    pub rmse: f64,
    pub trend_match_pct: f64,
    pub dtw_distance: f64,
    pub n_points: usize,
    pub data_range: (f64, f64),
    pub mape_skipped: usize,
    pub lambda: f64,
    pub window: Duration,
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        kv::render([
            ("mape_pct", format!("{:.4}", self.mape_pct)),
            ("rmse", format!("{:.4}", self.rmse)),
            ("trend_match_pct", format!("{:.2}", self.trend_match_pct)),
            ("dtw_distance", format!("{:.4}", self.dtw_distance)),
            ("n_points", self.n_points.to_string()),
            ("data_min", format!("{:.4}", self.data_range.0)),
            ("data_max", format!("{:.4}", self.data_range.1)),
            ("mape_skipped", self.mape_skipped.to_string()),
            ("lambda", self.lambda.to_string()),
            (
                "window",
                humantime::format_duration(self.window).to_string(),
            ),
        ])
    }
}

/// align → DTW + warp onto reference → moving average of both → MAPE, RMSE;
/// HP filter of both smoothed series → trend-match score.
pub fn calibration_report(
    reference: &TimeSeries,
    test: &TimeSeries,
    window: Duration,
    lambda: f64,
) -> Result<CalibrationReport, CalibError> {
    let pair = align(reference, test)?;
    let ref_values = pair.reference.values();
    let (dtw_distance, path) = dtw(&ref_values, &pair.test.values())?;
    let warped = warp_onto_reference(ref_values.len(), &pair.test.values(), &path);
    let warped = TimeSeries::from_points_unchecked(
        pair.reference
            .timestamps()
            .into_iter()
            .zip(warped)
            .collect(),
    );

    let smooth_ref = moving_average(&pair.reference, window).values();
    let smooth_test = moving_average(&warped, window).values();
    let m = mape(&smooth_ref, &smooth_test)?;
    let rmse = rmse(&smooth_ref, &smooth_test)?;
    let hp_ref = hp_filter(&smooth_ref, lambda)?;
    let hp_test = hp_filter(&smooth_test, lambda)?;
    let trend = trend_match_score(&hp_ref.cycle, &hp_test.cycle)?;

    let data_range = smooth_ref
        .iter()
        .chain(&smooth_test)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok(CalibrationReport {
        mape_pct: m.pct,
        rmse,
        trend_match_pct: trend,
        dtw_distance,
        n_points: smooth_ref.len(),
        data_range,
        mape_skipped: m.skipped,
        lambda,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn start() -> Timestamp {
        Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap()
    }

    fn per_minute(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(start(), chrono::Duration::minutes(1), values).unwrap()
    }

    #[test]
    fn moving_average_examples() {
        let ramp: Vec<f64> = (0..10).map(f64::from).collect();
        let avg = moving_average(&per_minute(&ramp), DEFAULT_WINDOW);
        assert_eq!(avg.values()[9], 4.5);
        assert_eq!(avg.values()[0], 0.0);

        let flat = per_minute(&[0.1; 30]);
        assert_eq!(moving_average(&flat, DEFAULT_WINDOW), flat);

        let s = per_minute(&[1.0, 9.0, 4.0]);
        assert_eq!(moving_average(&s, Duration::from_secs(30)), s);
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[10.0, 20.0], &[10.0, 20.0]).unwrap().pct, 0.0);
        let m = mape(&[10.0, 20.0], &[11.0, 18.0]).unwrap();
        assert!((m.pct - 10.0).abs() < 1e-12);
        let m = mape(&[0.0, 10.0], &[5.0, 10.0]).unwrap();
        assert_eq!((m.pct, m.skipped), (0.0, 1));
        assert_eq!(
            mape(&[0.0, 0.0], &[1.0, 2.0]).unwrap_err(),
            CalibError::AllReferenceZero
        );
        assert_eq!(
            mape(&[1.0], &[1.0, 2.0]).unwrap_err(),
            CalibError::LengthMismatch(1, 2)
        );
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&[], &[]).unwrap_err(), CalibError::EmptyInput);
    }

    #[test]
    fn trend_match_examples() {
        assert_eq!(
            trend_match_score(&[1.0, -2.0, 3.0], &[1.0, -2.0, 3.0]).unwrap(),
            100.0
        );
        let s = trend_match_score(&[1.0, 1.0, -1.0], &[1.0, -1.0, -1.0]).unwrap();
        assert!((s - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(trend_match_score(&[1.0, -2.0], &[-1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(trend_match_score(&[0.0, 1.0], &[-5.0, 1.0]).unwrap(), 100.0);
    }

    #[test]
    fn align_interpolates_test_onto_reference_grid() {
        let reference = per_minute(&[1.0, 2.0, 3.0, 4.0]);
        let test = TimeSeries::new(vec![
            (start() + chrono::Duration::seconds(30), 10.0),
            (start() + chrono::Duration::seconds(150), 22.0),
        ])
        .unwrap();
        let pair = align(&reference, &test).unwrap();
        assert_eq!(pair.reference().values(), vec![2.0, 3.0]);
        assert_eq!(pair.test().values(), vec![13.0, 19.0]);

        let later = TimeSeries::from_values(
            start() + chrono::Duration::hours(5),
            chrono::Duration::minutes(1),
            &[1.0, 2.0],
        )
        .unwrap();
        assert_eq!(
            align(&reference, &later).unwrap_err(),
            CalibError::NoTemporalOverlap
        );
    }

    #[test]
    fn report_self_comparison() {
        let values: Vec<f64> = (0..120)
            .map(|i| 12.0 + 6.0 * (i as f64 / 7.0).sin())
            .collect();
        let s = per_minute(&values);
        let r = calibration_report(&s, &s, DEFAULT_WINDOW, DEFAULT_LAMBDA).unwrap();
        assert_eq!(
            (r.mape_pct, r.rmse, r.trend_match_pct, r.dtw_distance),
            (0.0, 0.0, 100.0, 0.0)
        );
        assert_eq!(r.n_points, 120);
    }

    #[test]
    fn report_scaled_test_sensor() {
        // alternating levels keep the optimal warp on the diagonal
        let values: Vec<f64> = (0..180)
            .map(|i| {
                if i % 2 == 0 {
                    10.0 + (i % 7) as f64 * 0.1
                } else {
                    20.0 + (i % 5) as f64 * 0.1
                }
            })
            .collect();
        let reference = per_minute(&values);
        let test = reference.map_values(|v| 1.1 * v);
        let (_, path) = dtw(&reference.values(), &test.values()).unwrap();
        assert!(path.is_diagonal());
        let r = calibration_report(&reference, &test, DEFAULT_WINDOW, DEFAULT_LAMBDA).unwrap();
        assert!((r.mape_pct - 10.0).abs() < 1e-9, "{}", r.mape_pct);
        assert_eq!(r.trend_match_pct, 100.0);
    }

    #[test]
    fn report_text_has_provenance() {
        let s = per_minute(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let text = calibration_report(&s, &s, DEFAULT_WINDOW, 1600.0)
            .unwrap()
            .to_text();
        assert!(text.contains("lambda=1600\n"));
        assert!(text.contains("window=10m\n"));
        assert!(text.contains("mape_skipped=0\n"));
    }

    proptest! {
        #[test]
        fn moving_average_bounded(values in proptest::collection::vec(-50.0f64..50.0, 1..200)) {
            let avg = moving_average(&per_minute(&values), DEFAULT_WINDOW).values();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(avg.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
        }

        #[test]
        fn trend_score_ignores_positive_scaling(
            a in proptest::collection::vec(-5.0f64..5.0, 1..40),
            c in 0.01f64..100.0,
        ) {
            let b: Vec<f64> = a.iter().rev().copied().collect();
            let scaled: Vec<f64> = b.iter().map(|x| c * x).collect();
            prop_assert_eq!(trend_match_score(&a, &b).unwrap(), trend_match_score(&a, &scaled).unwrap());
        }

        #[test]
        fn rmse_is_homogeneous(
            pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40),
            c in -10.0f64..10.0,
        ) {
            let (r, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = rmse(&r, &t).unwrap();
            let rs: Vec<f64> = r.iter().map(|x| c * x).collect();
            let ts: Vec<f64> = t.iter().map(|x| c * x).collect();
            prop_assert!((rmse(&rs, &ts).unwrap() - c.abs() * base).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
