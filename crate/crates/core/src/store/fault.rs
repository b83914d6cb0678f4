use std::io::Read;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use super::{BlobBackend, BlobError, ObjectInfo, Tier};
use crate::clock::Clock;
use crate::series::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultPlan {
    Healthy,
    /// The first `n` puts fail, later ones pass through.
    FailFirst(u32),
    AlwaysFail,
    /// Every put whose key contains the pattern fails.
    FailKeysContaining(String),
}

/// Wraps a backend with scripted put failures and per-put latency.
pub struct FaultyBackend<B> {
    inner: B,
    plan: FaultPlan,
    latency: Option<(Arc<dyn Clock>, Duration)>,
    puts: AtomicU32,
}

impl<B: BlobBackend> FaultyBackend<B> {
    pub fn new(inner: B, plan: FaultPlan) -> Self {
        Self {
            inner,
            plan,
            latency: None,
            puts: AtomicU32::new(0),
        }
    }

    /// Every put first sleeps `latency` on `clock`.
    pub fn with_put_latency(mut self, clock: Arc<dyn Clock>, latency: Duration) -> Self {
        self.latency = Some((clock, latency));
        self
    }

    /// Put attempts seen so far, failed or not.
    pub fn put_attempts(&self) -> u32 {
        self.puts.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: BlobBackend> BlobBackend for FaultyBackend<B> {
    fn ensure_container(&self, container: &str) -> Result<(), BlobError> {
        self.inner.ensure_container(container)
    }

    fn list_containers(&self) -> Result<Vec<String>, BlobError> {
        self.inner.list_containers()
    }

    fn put(
        &self,
        container: &str,
        key: &str,
        data: &mut dyn Read,
        uploaded_at: Timestamp,
    ) -> Result<u64, BlobError> {
        let n = self.puts.fetch_add(1, Ordering::SeqCst);
        if let Some((clock, latency)) = &self.latency {
            clock.sleep(*latency);
        }
        let fail = match &self.plan {
            FaultPlan::Healthy => false,
            FaultPlan::FailFirst(k) => n < *k,
            FaultPlan::AlwaysFail => true,
            FaultPlan::FailKeysContaining(pat) => key.contains(pat.as_str()),
        };
        if fail {
            return Err(BlobError::BackendUnavailable(format!(
                "injected fault on put #{}",
                n + 1
            )));
        }
        self.inner.put(container, key, data, uploaded_at)
    }

    fn get(&self, container: &str, key: &str) -> Result<Vec<u8>, BlobError> {
        self.inner.get(container, key)
    }

    fn list(&self, container: &str) -> Result<Vec<ObjectInfo>, BlobError> {
        self.inner.list(container)
    }

    fn set_tier(&self, container: &str, key: &str, tier: Tier) -> Result<(), BlobError> {
        self.inner.set_tier(container, key, tier)
    }
}
