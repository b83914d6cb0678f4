//! PM2.5 preprocessing: hardware-error filter, standard-deviation outlier
//! removal, hourly resampling with interior interpolation, and min-max
//! normalization, applied in that order.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::series::{hour_floor, TimeSeries, Timestamp};

/// Raw PMS7003 readings above this are sensor faults, not air.
pub const DEFAULT_HW_ERROR_THRESHOLD: f64 = 20000.0;
pub const DEFAULT_STDDEV_K: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CleanError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("empty input series")]
    EmptyInput,
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    pub hw_error_threshold: f64,
    pub stddev_k: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            hw_error_threshold: DEFAULT_HW_ERROR_THRESHOLD,
            stddev_k: DEFAULT_STDDEV_K,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<(), CleanError> {
        if !(self.hw_error_threshold > 0.0) {
            return Err(CleanError::InvalidConfig("hw_error_threshold must be > 0"));
        }
        if !(self.stddev_k > 0.0) {
            return Err(CleanError::InvalidConfig("stddev_k must be > 0"));
        }
        Ok(())
    }
}

/// Keeps exactly the points whose value is `<= threshold`.
pub fn filter_hardware_errors(series: &TimeSeries, threshold: f64) -> TimeSeries {
    TimeSeries::from_points_unchecked(
        series
            .points()
            .iter()
            .copied()
            .filter(|&(_, v)| v <= threshold)
            .collect(),
    )
}

/// Single pass: mean and population standard deviation are computed once over
/// the input, then points with `|x - mean| > k * sigma` are removed.
pub fn remove_outliers_stddev(series: &TimeSeries, k: f64) -> Result<TimeSeries, CleanError> {
    let n = series.len();
    if n < 2 {
        return Err(CleanError::TooFewPoints {
            needed: 2,
            found: n,
        });
    }
    let values = series.values();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        // sigma is exactly zero; rounding in the mean must not manufacture outliers
        return Ok(series.clone());
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let limit = k * var.sqrt();
    Ok(TimeSeries::from_points_unchecked(
        series
            .points()
            .iter()
            .copied()
            .filter(|&(_, v)| (v - mean).abs() <= limit)
            .collect(),
    ))
}

/// Result of [`resample_hourly`].
#[derive(Debug, Clone, PartialEq)]
pub struct Hourly {
    pub series: TimeSeries,
    /// Hours that had no samples and were filled by interpolation.
    pub interpolated: usize,
}

/// Buckets by UTC hour (mean per bucket, stamped at the hour start) and fills
/// interior empty hours linearly between the nearest non-empty neighbours.
pub fn resample_hourly(series: &TimeSeries) -> Result<Hourly, CleanError> {
    if series.is_empty() {
        return Err(CleanError::EmptyInput);
    }
    let mut buckets: BTreeMap<Timestamp, (f64, usize)> = BTreeMap::new();
    for &(t, v) in series.points() {
        let e = buckets.entry(hour_floor(t)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let filled: Vec<(Timestamp, f64)> = buckets
        .into_iter()
        .map(|(t, (sum, count))| (t, sum / count as f64))
        .collect();

    let hour = chrono::Duration::hours(1);
    let mut out = Vec::with_capacity(filled.len());
    let mut interpolated = 0;
    for pair in filled.windows(2) {
        let (t0, v0) = pair[0];
        let (t1, v1) = pair[1];
        out.push((t0, v0));
        let gap = (t1 - t0).num_hours();
        for step in 1..gap {
            let frac = step as f64 / gap as f64;
            out.push((t0 + hour * step as i32, v0 + (v1 - v0) * frac));
            interpolated += 1;
        }
    }
    out.push(*filled.last().expect("non-empty"));
    Ok(Hourly {
        series: TimeSeries::from_points_unchecked(out),
        interpolated,
    })
}

/// The `x_min`/`x_max` of a min-max scaling. `constant` marks the degenerate
/// `x_min == x_max` case, where every value is mapped to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub x_min: f64,
    pub x_max: f64,
    pub constant: bool,
}

impl NormalizationParams {
    pub fn scale(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (x - self.x_min) / (self.x_max - self.x_min)
        }
    }

    pub fn unscale(&self, scaled: f64) -> f64 {
        if self.constant {
            self.x_min
        } else {
            self.x_min + scaled * (self.x_max - self.x_min)
        }
    }
}

/// `x_scaled = (x - x_min) / (x_max - x_min)`.
pub fn min_max_normalize(
    series: &TimeSeries,
) -> Result<(TimeSeries, NormalizationParams), CleanError> {
    if series.is_empty() {
        return Err(CleanError::EmptyInput);
    }
    let (x_min, x_max) = series
        .points()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
            (lo.min(v), hi.max(v))
        });
    let params = NormalizationParams {
        x_min,
        x_max,
        constant: x_min == x_max,
    };
    Ok((series.map_values(|x| params.scale(x)), params))
}

pub fn denormalize(series: &TimeSeries, params: &NormalizationParams) -> TimeSeries {
    series.map_values(|s| params.unscale(s))
}

/// Points removed by each of the four steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepDrops {
    pub hw_errors: usize,
    pub outliers: usize,
    pub resample: usize,
    pub normalize: usize,
}

impl StepDrops {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.hw_errors, self.outliers, self.resample, self.normalize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanOutcome {
    pub series: TimeSeries,
    pub params: NormalizationParams,
    pub drops: StepDrops,
    pub interpolated_hours: usize,
}

pub fn clean_pipeline(
    series: &TimeSeries,
    config: &CleanConfig,
) -> Result<CleanOutcome, CleanError> {
    config.validate()?;
    let filtered = filter_hardware_errors(series, config.hw_error_threshold);
    let inliers = remove_outliers_stddev(&filtered, config.stddev_k)?;
    let hourly = resample_hourly(&inliers)?;
    let (normalized, params) = min_max_normalize(&hourly.series)?;
    Ok(CleanOutcome {
        series: normalized,
        params,
        drops: StepDrops {
            hw_errors: series.len() - filtered.len(),
            outliers: filtered.len() - inliers.len(),
            // aggregation and scaling never discard observations
            resample: 0,
            normalize: 0,
        },
        interpolated_hours: hourly.interpolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn start() -> Timestamp {
        Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap()
    }

    fn every_10s(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(start(), chrono::Duration::seconds(10), values).unwrap()
    }

    /// Independent restatement: two-pass population statistics, then filter.
    fn outlier_oracle(values: &[f64], k: f64) -> Vec<f64> {
        let n = values.len() as f64;
        let mut mean = 0.0;
        for v in values {
            mean += v / n;
        }
        let mut var = 0.0;
        for v in values {
            var += (v - mean) * (v - mean) / n;
        }
        let sd = var.sqrt();
        values
            .iter()
            .copied()
            .filter(|v| (v - mean).abs() <= k * sd)
            .collect()
    }

    #[test]
    fn hardware_filter_rule() {
        let s = every_10s(&[5.0, 20001.0, 12.0]);
        assert_eq!(
            filter_hardware_errors(&s, 20000.0).values(),
            vec![5.0, 12.0]
        );
        let boundary = every_10s(&[20000.0, 20001.0]);
        assert_eq!(
            filter_hardware_errors(&boundary, 20000.0).values(),
            vec![20000.0]
        );
        assert!(filter_hardware_errors(&TimeSeries::default(), 20000.0).is_empty());
    }

    #[test]
    fn outliers_constant_and_infinite_k() {
        let constant = every_10s(&[0.1; 7]);
        assert_eq!(remove_outliers_stddev(&constant, 0.5).unwrap(), constant);
        let s = every_10s(&[1.0, 2.0, 50.0, 3.0]);
        assert_eq!(remove_outliers_stddev(&s, f64::INFINITY).unwrap(), s);
        assert_eq!(
            remove_outliers_stddev(&every_10s(&[1.0]), 3.0),
            Err(CleanError::TooFewPoints {
                needed: 2,
                found: 1
            })
        );
    }

    #[test]
    fn outliers_match_oracle_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(2..80);
            let mut values: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..50.0)).collect();
            for _ in 0..rng.random_range(0..3) {
                let i = rng.random_range(0..n);
                values[i] = rng.random_range(200.0..2000.0);
            }
            let k = rng.random_range(1.0..4.0);
            let got = remove_outliers_stddev(&every_10s(&values), k)
                .unwrap()
                .values();
            assert_eq!(got, outlier_oracle(&values, k));
        }
    }

    #[test]
    fn resample_interpolates_interior_gap() {
        let h = |hh: u32, m: u32| Utc.with_ymd_and_hms(2022, 7, 1, hh, m, 0).unwrap();
        let s = TimeSeries::new(vec![(h(3, 0), 5.0), (h(3, 30), 15.0), (h(5, 10), 30.0)]).unwrap();
        let out = resample_hourly(&s).unwrap();
        assert_eq!(out.series.timestamps(), vec![h(3, 0), h(4, 0), h(5, 0)]);
        assert_eq!(out.series.values(), vec![10.0, 20.0, 30.0]);
        assert_eq!(out.interpolated, 1);
    }

    #[test]
    fn resample_single_hour_and_identity() {
        let one = every_10s(&[1.0, 2.0, 3.0, 6.0]);
        let out = resample_hourly(&one).unwrap().series;
        assert_eq!(out.points(), &[(start(), 3.0)]);

        let hourly =
            TimeSeries::from_values(start(), chrono::Duration::hours(1), &[1.0, 3.0, 5.0, 7.0])
                .unwrap();
        assert_eq!(resample_hourly(&hourly).unwrap().series, hourly);
        assert_eq!(
            resample_hourly(&TimeSeries::default()),
            Err(CleanError::EmptyInput)
        );
    }

    #[test]
    fn normalize_examples() {
        let (s, p) = min_max_normalize(&every_10s(&[5.0, 10.0, 15.0])).unwrap();
        assert_eq!(s.values(), vec![0.0, 0.5, 1.0]);
        assert_eq!((p.x_min, p.x_max, p.constant), (5.0, 15.0, false));

        let (s, p) = min_max_normalize(&every_10s(&[4.0, 4.0])).unwrap();
        assert_eq!(s.values(), vec![0.0, 0.0]);
        assert!(p.constant);
        assert_eq!(denormalize(&s, &p).values(), vec![4.0, 4.0]);
    }

    #[test]
    fn pipeline_drop_counts() {
        let mut values: Vec<f64> = (0..100)
            .map(|i| 10.0 + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        values[40] = 20001.0;
        // six baseline standard deviations above the mean
        values[70] = 10.0 + 6.0 * 0.1 * 10.0;
        let out = clean_pipeline(&every_10s(&values), &CleanConfig::default()).unwrap();
        assert_eq!(out.drops.as_tuple(), (1, 1, 0, 0));

        let quiet = every_10s(&[3.0, 4.0, 5.0, 4.0]);
        let out = clean_pipeline(&quiet, &CleanConfig::default()).unwrap();
        assert_eq!(out.drops, StepDrops::default());
    }

    #[test]
    fn pipeline_rejects_bad_config_and_short_input() {
        let cfg = CleanConfig {
            stddev_k: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            clean_pipeline(&every_10s(&[1.0, 2.0]), &cfg),
            Err(CleanError::InvalidConfig(_))
        ));
        assert!(matches!(
            clean_pipeline(&every_10s(&[1.0, 30000.0]), &CleanConfig::default()),
            Err(CleanError::TooFewPoints { .. })
        ));
    }

    fn random_series() -> impl Strategy<Value = TimeSeries> {
        proptest::collection::vec((1i64..900, -50.0f64..30000.0), 2..120).prop_map(|steps| {
            let mut t = start();
            let mut points = Vec::new();
            for (dt, v) in steps {
                t += chrono::Duration::seconds(dt * 10);
                points.push((t, v));
            }
            TimeSeries::new(points).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pipeline_is_the_composition(s in random_series()) {
            let cfg = CleanConfig::default();
            let by_hand = remove_outliers_stddev(&filter_hardware_errors(&s, cfg.hw_error_threshold), cfg.stddev_k)
                .and_then(|x| resample_hourly(&x))
                .and_then(|h| min_max_normalize(&h.series));
            match (clean_pipeline(&s, &cfg), by_hand) {
                (Ok(out), Ok((series, params))) => {
                    prop_assert_eq!(out.series, series);
                    prop_assert_eq!(out.params, params);
                }
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert!(false, "diverged: {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn normalized_range_and_inverse(values in proptest::collection::vec(-1000.0f64..1000.0, 1..60)) {
            let s = every_10s(&values);
            let (n, p) = min_max_normalize(&s).unwrap();
            let scaled = n.values();
            prop_assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
            if !p.constant {
                prop_assert!(scaled.contains(&0.0) && scaled.contains(&1.0));
                for (a, b) in denormalize(&n, &p).values().iter().zip(&values) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn resampled_hours_are_consecutive(s in random_series()) {
            let out = resample_hourly(&s).unwrap().series;
            for w in out.timestamps().windows(2) {
                prop_assert_eq!(w[1] - w[0], chrono::Duration::hours(1));
            }
        }
    }
}
