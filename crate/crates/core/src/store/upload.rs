use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

use super::{BlobBackend, BlobError, BlobRef};
use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JobState {
    Pending,
    InFlight,
    Confirmed,
    Failed,
}

/// Exponential backoff: attempt `k` (1-based) is preceded by a pause of
/// `base * factor^(k-2)` for `k >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(5),
            factor: 2,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Pause after failed attempt `attempt` (1-based).
    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base * self.factor.saturating_pow(attempt.saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UploadJob {
    pub blob: BlobRef,
    pub local_path: PathBuf,
    attempts: u32,
    state: JobState,
}

impl UploadJob {
    pub fn new(blob: BlobRef, local_path: impl Into<PathBuf>) -> Self {
        Self {
            blob,
            local_path: local_path.into(),
            attempts: 0,
            state: JobState::Pending,
        }
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    pub fn state(&self) -> JobState {
        self.state
    }

    fn advance(&mut self, next: JobState) {
        debug_assert!(
            next >= self.state || (self.state == JobState::InFlight && next == JobState::Pending),
            "{:?} -> {next:?}",
            self.state
        );
        self.state = next;
    }
}

#[derive(Debug, Error)]
pub enum UploadError {
    #[error("local file {} is missing", .0.display())]
    LocalFileMissing(PathBuf),
    #[error("upload of {} failed after {} attempts: {last}", .job.blob, .job.attempts())]
    Failed {
        job: Box<UploadJob>,
        last: BlobError,
    },
}

fn open_local(path: &Path) -> Result<(File, u64), UploadError> {
    let missing = || UploadError::LocalFileMissing(path.to_path_buf());
    let file = File::open(path).map_err(|_| missing())?;
    let len = file.metadata().map_err(|_| missing())?.len();
    Ok((file, len))
}

/// Streams the local file into the job's blob, retrying transient failures
/// per `policy`. Backoff pauses go through `clock`. A put only confirms when
/// the acknowledged length equals the local file length.
pub fn upload(
    backend: &dyn BlobBackend,
    clock: &dyn Clock,
    policy: &RetryPolicy,
    mut job: UploadJob,
) -> Result<UploadJob, UploadError> {
    let max = policy.max_attempts.max(1);
    loop {
        let (file, expected) = open_local(&job.local_path)?;
        job.attempts += 1;
        job.advance(JobState::InFlight);
        let result = backend.put(
            job.blob.container(),
            job.blob.key(),
            &mut BufReader::new(file),
            clock.now(),
        );
        let err = match result {
            Ok(acked) if acked == expected => {
                job.advance(JobState::Confirmed);
                debug!("{} confirmed after {} attempt(s)", job.blob, job.attempts);
                return Ok(job);
            }
            Ok(acked) => {
                BlobError::BackendUnavailable(format!("acknowledged {acked} of {expected} bytes"))
            }
            Err(e) => e,
        };
        if job.attempts >= max {
            job.advance(JobState::Failed);
            warn!("{} failed after {} attempts: {err}", job.blob, job.attempts);
            return Err(UploadError::Failed {
                job: Box::new(job),
                last: err,
            });
        }
        warn!("{} attempt {} failed: {err}", job.blob, job.attempts);
        job.advance(JobState::Pending);
        clock.sleep(policy.delay_after(job.attempts));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::store::{FaultPlan, FaultyBackend, MemoryBackend};
    use chrono::{TimeZone, Utc};
    use rand::{RngCore, SeedableRng};

    fn setup(
        plan: FaultPlan,
    ) -> (
        FaultyBackend<MemoryBackend>,
        ManualClock,
        tempfile::TempDir,
        UploadJob,
        Vec<u8>,
    ) {
        let backend = FaultyBackend::new(MemoryBackend::new(), plan);
        backend.ensure_container("node-01").unwrap();
        let clock = ManualClock::new(Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.fseq");
        let mut data = vec![0u8; 1 << 20];
        rand_chacha::ChaCha8Rng::seed_from_u64(9).fill_bytes(&mut data);
        std::fs::write(&path, &data).unwrap();
        let job = UploadJob::new(BlobRef::video("node-01", "a.fseq").unwrap(), &path);
        (backend, clock, dir, job, data)
    }

    #[test]
    fn identity_transfer() {
        let (backend, clock, _dir, job, data) = setup(FaultPlan::Healthy);
        let done = upload(&backend, &clock, &RetryPolicy::default(), job).unwrap();
        assert_eq!(done.state(), JobState::Confirmed);
        assert_eq!(done.attempts(), 1);
        assert!(backend.get("node-01", "video/a.fseq").unwrap() == data);
        assert!(clock.sleeps().is_empty());
    }

    #[test]
    fn transient_failures_then_success() {
        let (backend, clock, _dir, job, _) = setup(FaultPlan::FailFirst(2));
        let done = upload(&backend, &clock, &RetryPolicy::default(), job).unwrap();
        assert_eq!(done.state(), JobState::Confirmed);
        assert_eq!(done.attempts(), 3);
        assert_eq!(
            clock.sleeps(),
            vec![Duration::from_secs(5), Duration::from_secs(10)]
        );
    }

    #[test]
    fn permanent_failure_hits_the_ceiling() {
        let (backend, clock, _dir, job, _) = setup(FaultPlan::AlwaysFail);
        let err = upload(&backend, &clock, &RetryPolicy::default(), job).unwrap_err();
        let UploadError::Failed { job, .. } = err else {
            panic!("expected Failed");
        };
        assert_eq!(job.attempts(), 5);
        assert_eq!(job.state(), JobState::Failed);
        assert_eq!(backend.put_attempts(), 5);
        let secs: Vec<u64> = clock.sleeps().iter().map(Duration::as_secs).collect();
        assert_eq!(secs, vec![5, 10, 20, 40]);
        assert!(backend.list("node-01").unwrap().is_empty());
    }

    #[test]
    fn missing_local_file() {
        let (backend, clock, _dir, mut job, _) = setup(FaultPlan::Healthy);
        job.local_path = job.local_path.with_file_name("gone.fseq");
        assert!(matches!(
            upload(&backend, &clock, &RetryPolicy::default(), job),
            Err(UploadError::LocalFileMissing(_))
        ));
    }
}
