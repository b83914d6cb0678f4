//! Timestamped scalar series and the CSV tables they travel in.
//!
//! Every analytic stage (cleaning, calibration, counting, correlation) speaks
//! [`TimeSeries`]. Timestamps are UTC with one-second text resolution.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Formats an instant as ISO-8601 UTC with a `Z` suffix and whole seconds.
pub fn format_timestamp(ts: Timestamp) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

/// Parses the exact form produced by [`format_timestamp`].
pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    NaiveDateTime::parse_from_str(text, TIMESTAMP_FORMAT)
        .ok()
        .map(|naive| naive.and_utc())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("timestamps must strictly increase (index {index})")]
    NotIncreasing { index: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
}

/// Ordered `(timestamp, value)` pairs with strictly increasing timestamps and
/// finite values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    points: Vec<(Timestamp, f64)>,
}

impl TimeSeries {
    pub fn new(points: Vec<(Timestamp, f64)>) -> Result<Self, SeriesError> {
        for (index, (_, value)) in points.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::NonFinite { index });
            }
        }
        for (index, pair) in points.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(SeriesError::NotIncreasing { index: index + 1 });
            }
        }
        Ok(Self { points })
    }

    /// Evenly spaced series starting at `start`.
    pub fn from_values(
        start: Timestamp,
        step: chrono::Duration,
        values: &[f64],
    ) -> Result<Self, SeriesError> {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start + step * i as i32, v))
            .collect();
        Self::new(points)
    }

    /// Callers guarantee the invariants; checked in debug builds.
    pub(crate) fn from_points_unchecked(points: Vec<(Timestamp, f64)>) -> Self {
        debug_assert!(Self::new(points.clone()).is_ok());
        Self { points }
    }

    pub fn points(&self) -> &[(Timestamp, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn first(&self) -> Option<(Timestamp, f64)> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<(Timestamp, f64)> {
        self.points.last().copied()
    }

    /// Keeps timestamps, replaces values. `f` must return finite values.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_points_unchecked(self.points.iter().map(|&(t, v)| (t, f(v))).collect())
    }

    pub fn with_values(&self, values: &[f64]) -> Result<Self, SeriesError> {
        assert_eq!(values.len(), self.points.len(), "value count must match");
        Self::new(
            self.points
                .iter()
                .zip(values)
                .map(|(&(t, _), &v)| (t, v))
                .collect(),
        )
    }

    pub fn into_points(self) -> Vec<(Timestamp, f64)> {
        self.points
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{field}`")]
    BadField { row: usize, field: String },
    #[error("row {row}: {source}")]
    Series {
        row: usize,
        #[source]
        source: SeriesError,
    },
}

/// Reads `value_column` against `time_column` from a headed CSV table.
pub fn read_series_csv<R: Read>(
    reader: R,
    time_column: &str,
    value_column: &str,
) -> Result<TimeSeries, TableError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))
    };
    let t_idx = find(time_column)?;
    let v_idx = find(value_column)?;
    let mut points = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let t_text = record.get(t_idx).unwrap_or_default();
        let v_text = record.get(v_idx).unwrap_or_default();
        let t = parse_timestamp(t_text).ok_or_else(|| TableError::BadField {
            row,
            field: t_text.to_string(),
        })?;
        let v: f64 = v_text.parse().map_err(|_| TableError::BadField {
            row,
            field: v_text.to_string(),
        })?;
        points.push((t, v));
    }
    let len = points.len();
    TimeSeries::new(points).map_err(|source| TableError::Series { row: len, source })
}

/// Writes `time_header,value_header` rows. Values use the shortest
/// round-tripping representation.
pub fn write_series_csv<W: Write>(
    mut writer: W,
    time_header: &str,
    value_header: &str,
    series: &TimeSeries,
) -> std::io::Result<()> {
    writeln!(writer, "{time_header},{value_header}")?;
    for &(t, v) in series.points() {
        writeln!(writer, "{},{}", format_timestamp(t), v)?;
    }
    Ok(())
}

/// Floor of `ts` to the start of its UTC hour.
pub fn hour_floor(ts: Timestamp) -> Timestamp {
    let secs = ts.timestamp();
    DateTime::from_timestamp(secs - secs.rem_euclid(3600), 0).expect("in range")
}
