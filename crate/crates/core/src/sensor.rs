//! PMS7003 active-mode frames, BME280-style environment readings, and the
//! daily CSV row format the node writes.
//!
//! # Frame format
//!
//! ```text
//! offset  0  1   2  3    4 .. 29             30 31
//!        42 4D  00 1C   13 big-endian words  checksum (BE)
//! ```
//!
//! The checksum is the unsigned sum of bytes 0..30, modulo 2^16.

use chrono::NaiveDate;
use thiserror::Error;

use crate::series::{format_timestamp, parse_timestamp, Timestamp};

pub const FRAME_LEN: usize = 32;
pub const START_BYTES: [u8; 2] = [0x42, 0x4D];
/// Declared payload length: 13 data words plus the checksum word.
pub const PAYLOAD_LEN: u16 = 28;

const DATA_WORDS: usize = 13;
const DATA_OFFSET: usize = 4;
const CHECKSUM_OFFSET: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad start bytes {found:02X?} at offset 0")]
    BadStartBytes { found: [u8; 2] },
    #[error("bad declared length {value} at offset 2 (expected {PAYLOAD_LEN})")]
    BadLength { value: u16 },
    #[error(
        "checksum mismatch at offset 30: frame says {declared:#06X}, bytes sum to {computed:#06X}"
    )]
    ChecksumMismatch { declared: u16, computed: u16 },
    #[error("frame must be {FRAME_LEN} bytes, got {0}")]
    WrongSize(usize),
}

/// One decoded PMS7003 measurement frame. Concentrations are µg/m³;
/// counts are particles per 0.1 L above the given diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Pms7003Frame {
    pub pm1_0_std: u16,
    pub pm2_5_std: u16,
    pub pm10_std: u16,
    pub pm1_0_atm: u16,
    pub pm2_5_atm: u16,
    pub pm10_atm: u16,
    pub count_0_3um: u16,
    pub count_0_5um: u16,
    pub count_1_0um: u16,
    pub count_2_5um: u16,
    pub count_5_0um: u16,
    pub count_10um: u16,
    pub reserved: u16,
}

impl Pms7003Frame {
    fn words(&self) -> [u16; DATA_WORDS] {
        [
            self.pm1_0_std,
            self.pm2_5_std,
            self.pm10_std,
            self.pm1_0_atm,
            self.pm2_5_atm,
            self.pm10_atm,
            self.count_0_3um,
            self.count_0_5um,
            self.count_1_0um,
            self.count_2_5um,
            self.count_5_0um,
            self.count_10um,
            self.reserved,
        ]
    }

    fn from_words(w: [u16; DATA_WORDS]) -> Self {
        Self {
            pm1_0_std: w[0],
            pm2_5_std: w[1],
            pm10_std: w[2],
            pm1_0_atm: w[3],
            pm2_5_atm: w[4],
            pm10_atm: w[5],
            count_0_3um: w[6],
            count_0_5um: w[7],
            count_1_0um: w[8],
            count_2_5um: w[9],
            count_5_0um: w[10],
            count_10um: w[11],
            reserved: w[12],
        }
    }
}

fn checksum(bytes: &[u8]) -> u16 {
    bytes
        .iter()
        .fold(0u16, |acc, &b| acc.wrapping_add(b as u16))
}

pub fn encode_pms7003_frame(frame: &Pms7003Frame) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[..2].copy_from_slice(&START_BYTES);
    out[2..4].copy_from_slice(&PAYLOAD_LEN.to_be_bytes());
    for (i, word) in frame.words().iter().enumerate() {
        let at = DATA_OFFSET + 2 * i;
        out[at..at + 2].copy_from_slice(&word.to_be_bytes());
    }
    let sum = checksum(&out[..CHECKSUM_OFFSET]);
    out[CHECKSUM_OFFSET..].copy_from_slice(&sum.to_be_bytes());
    out
}

pub fn decode_pms7003_frame(bytes: &[u8; FRAME_LEN]) -> Result<Pms7003Frame, FrameError> {
    if bytes[..2] != START_BYTES {
        return Err(FrameError::BadStartBytes {
            found: [bytes[0], bytes[1]],
        });
    }
    let declared_len = u16::from_be_bytes([bytes[2], bytes[3]]);
    if declared_len != PAYLOAD_LEN {
        return Err(FrameError::BadLength {
            value: declared_len,
        });
    }
    let declared = u16::from_be_bytes([bytes[CHECKSUM_OFFSET], bytes[CHECKSUM_OFFSET + 1]]);
    let computed = checksum(&bytes[..CHECKSUM_OFFSET]);
    if declared != computed {
        return Err(FrameError::ChecksumMismatch { declared, computed });
    }
    let mut words = [0u16; DATA_WORDS];
    for (i, w) in words.iter_mut().enumerate() {
        let at = DATA_OFFSET + 2 * i;
        *w = u16::from_be_bytes([bytes[at], bytes[at + 1]]);
    }
    Ok(Pms7003Frame::from_words(words))
}

/// Slice entry point for byte streams of unknown length.
pub fn decode_pms7003_slice(bytes: &[u8]) -> Result<Pms7003Frame, FrameError> {
    let array: &[u8; FRAME_LEN] = bytes
        .try_into()
        .map_err(|_| FrameError::WrongSize(bytes.len()))?;
    decode_pms7003_frame(array)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("relative humidity {0} outside [0, 100]")]
    HumidityOutOfRange(f64),
    #[error("non-finite environment reading")]
    NonFinite,
}

/// Temperature (°C), relative humidity (%) and pressure (hPa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvReading {
    temp_c: f64,
    rh_pct: f64,
    pressure_hpa: f64,
}

impl EnvReading {
    pub fn new(temp_c: f64, rh_pct: f64, pressure_hpa: f64) -> Result<Self, SensorError> {
        if !(temp_c.is_finite() && rh_pct.is_finite() && pressure_hpa.is_finite()) {
            return Err(SensorError::NonFinite);
        }
        if !(0.0..=100.0).contains(&rh_pct) {
            return Err(SensorError::HumidityOutOfRange(rh_pct));
        }
        Ok(Self {
            temp_c,
            rh_pct,
            pressure_hpa,
        })
    }

    pub fn temp_c(&self) -> f64 {
        self.temp_c
    }

    pub fn rh_pct(&self) -> f64 {
        self.rh_pct
    }

    pub fn pressure_hpa(&self) -> f64 {
        self.pressure_hpa
    }

    /// Pressure outside (300, 1200) hPa is physically implausible at ground level.
    pub fn pressure_suspect(&self) -> bool {
        !(self.pressure_hpa > 300.0 && self.pressure_hpa < 1200.0)
    }
}

/// One 10-second environmental reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    pub timestamp: Timestamp,
    pub pm1_0: u16,
    pub pm2_5: u16,
    pub pm10: u16,
    pub env: EnvReading,
}

impl SensorSample {
    /// Fuses a particulate frame with an environment reading. The
    /// atmospheric-environment concentrations are used.
    pub fn from_frame(timestamp: Timestamp, frame: &Pms7003Frame, env: EnvReading) -> Self {
        Self {
            timestamp,
            pm1_0: frame.pm1_0_atm,
            pm2_5: frame.pm2_5_atm,
            pm10: frame.pm10_atm,
            env,
        }
    }
}

pub const CSV_HEADER: &str = "timestamp,pm1_0,pm2_5,pm10,temp_c,rh_pct,pressure_hpa";
const CSV_FIELDS: usize = 7;

pub fn sample_to_csv_row(sample: &SensorSample) -> String {
    format!(
        "{},{},{},{},{:.2},{:.2},{:.2}",
        format_timestamp(sample.timestamp),
        sample.pm1_0,
        sample.pm2_5,
        sample.pm10,
        sample.env.temp_c,
        sample.env.rh_pct,
        sample.env.pressure_hpa
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsvRowError {
    #[error("expected {CSV_FIELDS} fields, found {0}")]
    FieldCountMismatch(usize),
    #[error("cannot parse field {0}")]
    UnparsableField(usize),
    #[error("timestamp is not UTC (`Z` suffix required)")]
    NonUtcTimestamp,
}

pub fn parse_csv_row(line: &str) -> Result<SensorSample, CsvRowError> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != CSV_FIELDS {
        return Err(CsvRowError::FieldCountMismatch(fields.len()));
    }
    let timestamp = match parse_timestamp(fields[0]) {
        Some(ts) => ts,
        None if chrono::DateTime::parse_from_rfc3339(fields[0]).is_ok() => {
            return Err(CsvRowError::NonUtcTimestamp)
        }
        None => return Err(CsvRowError::UnparsableField(0)),
    };
    let pm = |i: usize| {
        fields[i]
            .parse::<u16>()
            .map_err(|_| CsvRowError::UnparsableField(i))
    };
    let real = |i: usize| {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(CsvRowError::UnparsableField(i))
    };
    let (pm1_0, pm2_5, pm10) = (pm(1)?, pm(2)?, pm(3)?);
    let (temp_c, rh_pct, pressure_hpa) = (real(4)?, real(5)?, real(6)?);
    let env = EnvReading::new(temp_c, rh_pct, pressure_hpa)
        .map_err(|_| CsvRowError::UnparsableField(5))?;
    Ok(SensorSample {
        timestamp,
        pm1_0,
        pm2_5,
        pm10,
        env,
    })
}

/// `<node_id>_YYYY-MM-DD.csv`
pub fn csv_file_name(node_id: &str, day: NaiveDate) -> String {
    format!("{node_id}_{}.csv", day.format("%Y-%m-%d"))
}
