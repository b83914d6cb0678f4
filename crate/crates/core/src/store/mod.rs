//! Per-node object storage.
//!
//! Each node owns one container named after its `node_id`. Objects are keyed
//! `video/<file>` or `csv/<file>`, start in [`Tier::Cool`] and only ever move
//! to [`Tier::Archive`] under [`apply_tier_policy`]. Archived objects refuse
//! reads until rehydrated.

mod fault;
mod fs;
mod memory;
mod upload;

use std::fmt;
use std::io::{self, Read};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::clock::to_chrono;
use crate::series::Timestamp;

pub use fault::{FaultPlan, FaultyBackend};
pub use fs::FsBackend;
pub use memory::MemoryBackend;
pub use upload::{upload, JobState, RetryPolicy, UploadError, UploadJob};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    Cool,
    Archive,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Cool => "cool",
            Tier::Archive => "archive",
        })
    }
}

impl FromStr for Tier {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "cool" => Ok(Tier::Cool),
            "archive" => Ok(Tier::Archive),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("invalid node id `{0}`: expected [a-z0-9-]{{1,63}}")]
    InvalidNodeId(String),
    #[error("invalid key `{0}`")]
    InvalidKey(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no container `{0}`")]
    NoSuchContainer(String),
    #[error("no object `{container}/{key}`")]
    NotFound { container: String, key: String },
    #[error("object `{container}/{key}` is archived; rehydrate before reading")]
    Archived { container: String, key: String },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

pub fn validate_node_id(id: &str) -> Result<(), BlobError> {
    let ok = (1..=63).contains(&id.len())
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(BlobError::InvalidNodeId(id.to_string()))
    }
}

/// Non-empty `/`-separated segments; no empty, `.` or `..` segment.
pub fn validate_key(key: &str) -> Result<(), BlobError> {
    let ok = !key.is_empty()
        && !key.contains('\\')
        && key
            .split('/')
            .all(|seg| !seg.is_empty() && seg != "." && seg != "..");
    if ok {
        Ok(())
    } else {
        Err(BlobError::InvalidKey(key.to_string()))
    }
}

pub(crate) fn validate_address(container: &str, key: &str) -> Result<(), BlobError> {
    validate_node_id(container)?;
    validate_key(key)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlobRef {
    container: String,
    key: String,
    tier: Tier,
}

impl BlobRef {
    pub fn new(container: &str, key: &str) -> Result<Self, BlobError> {
        validate_address(container, key)?;
        Ok(Self {
            container: container.to_string(),
            key: key.to_string(),
            tier: Tier::Cool,
        })
    }

    pub fn video(node_id: &str, file_name: &str) -> Result<Self, BlobError> {
        Self::new(node_id, &format!("video/{file_name}"))
    }

    pub fn csv(node_id: &str, file_name: &str) -> Result<Self, BlobError> {
        Self::new(node_id, &format!("csv/{file_name}"))
    }

    pub fn container(&self) -> &str {
        &self.container
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    pub fn with_tier(mut self, tier: Tier) -> Self {
        self.tier = tier;
        self
    }
}

impl fmt::Display for BlobRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.container, self.key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectInfo {
    pub blob: BlobRef,
    pub size: u64,
    pub uploaded_at: Timestamp,
}

/// Storage backend. Implementations are shared across upload workers.
pub trait BlobBackend: Send + Sync {
    /// Idempotent.
    fn ensure_container(&self, container: &str) -> Result<(), BlobError>;

    fn list_containers(&self) -> Result<Vec<String>, BlobError>;

    /// Stores the whole stream, replacing any previous object, with tier
    /// Cool. Returns the acknowledged byte length.
    fn put(
        &self,
        container: &str,
        key: &str,
        data: &mut dyn Read,
        uploaded_at: Timestamp,
    ) -> Result<u64, BlobError>;

    fn get(&self, container: &str, key: &str) -> Result<Vec<u8>, BlobError>;

    /// Sorted by key.
    fn list(&self, container: &str) -> Result<Vec<ObjectInfo>, BlobError>;

    fn set_tier(&self, container: &str, key: &str, tier: Tier) -> Result<(), BlobError>;
}

impl<T: BlobBackend + ?Sized> BlobBackend for Arc<T> {
    fn ensure_container(&self, container: &str) -> Result<(), BlobError> {
        (**self).ensure_container(container)
    }

    fn list_containers(&self) -> Result<Vec<String>, BlobError> {
        (**self).list_containers()
    }

    fn put(
        &self,
        container: &str,
        key: &str,
        data: &mut dyn Read,
        uploaded_at: Timestamp,
    ) -> Result<u64, BlobError> {
        (**self).put(container, key, data, uploaded_at)
    }

    fn get(&self, container: &str, key: &str) -> Result<Vec<u8>, BlobError> {
        (**self).get(container, key)
    }

    fn list(&self, container: &str) -> Result<Vec<ObjectInfo>, BlobError> {
        (**self).list(container)
    }

    fn set_tier(&self, container: &str, key: &str, tier: Tier) -> Result<(), BlobError> {
        (**self).set_tier(container, key, tier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHandle {
    name: String,
}

impl ContainerHandle {
    pub fn name(&self) -> &str {
        &self.name
    }
}

pub fn ensure_node_container(
    backend: &dyn BlobBackend,
    node_id: &str,
) -> Result<ContainerHandle, BlobError> {
    validate_node_id(node_id)?;
    backend.ensure_container(node_id)?;
    Ok(ContainerHandle {
        name: node_id.to_string(),
    })
}

/// Archives every Cool object strictly older than `archive_after`. Returns
/// the refs that changed tier.
pub fn apply_tier_policy(
    backend: &dyn BlobBackend,
    container: &str,
    now: Timestamp,
    archive_after: Duration,
) -> Result<Vec<BlobRef>, BlobError> {
    let threshold = to_chrono(archive_after);
    let mut moved = Vec::new();
    for obj in backend.list(container)? {
        if obj.blob.tier() == Tier::Cool && now - obj.uploaded_at > threshold {
            backend.set_tier(container, obj.blob.key(), Tier::Archive)?;
            moved.push(obj.blob.with_tier(Tier::Archive));
        }
    }
    Ok(moved)
}

/// Moves an archived object back to Cool so it can be read.
pub fn rehydrate(backend: &dyn BlobBackend, blob: &BlobRef) -> Result<(), BlobError> {
    backend.set_tier(blob.container(), blob.key(), Tier::Cool)
}

const BYTES_PER_GB: f64 = 1e9;
const DAYS_PER_MONTH: f64 = 30.0;

/// Cumulative cost of storing `daily_bytes` of new data every day for
/// `days` days at `rate_per_gb_month`. On day `d` the store holds
/// `d * daily_bytes`, billed pro rata at one thirtieth of a month:
///
/// `rate * Σ_{d=1..days} (daily_bytes * d) / 1e9 / 30`
///
/// The daily fee grows linearly, so the cumulative figure is quadratic in
/// `days`.
pub fn estimate_storage_cost(daily_bytes: f64, days: u32, rate_per_gb_month: f64) -> f64 {
    let days = days as f64;
    let byte_days = daily_bytes * days * (days + 1.0) / 2.0;
    rate_per_gb_month * byte_days / BYTES_PER_GB / DAYS_PER_MONTH
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierRates {
    pub cool_per_gb_month: f64,
    pub archive_per_gb_month: f64,
}

/// Same accumulation as [`estimate_storage_cost`], with each day's upload
/// held in Cool for `archive_after_days` days and in Archive afterwards.
pub fn estimate_tiered_cost(
    daily_bytes: f64,
    days: u32,
    archive_after_days: u32,
    rates: TierRates,
) -> f64 {
    let mut cool_byte_days = 0.0;
    let mut archive_byte_days = 0.0;
    for d in 1..=days {
        let cool_uploads = d.min(archive_after_days) as f64;
        cool_byte_days += daily_bytes * cool_uploads;
        archive_byte_days += daily_bytes * (d as f64 - cool_uploads);
    }
    (rates.cool_per_gb_month * cool_byte_days + rates.archive_per_gb_month * archive_byte_days)
        / BYTES_PER_GB
        / DAYS_PER_MONTH
}
