use std::collections::BTreeMap;
use std::io::Read;
use std::sync::RwLock;

use super::{
    validate_address, validate_node_id, BlobBackend, BlobError, BlobRef, ObjectInfo, Tier,
};
use crate::series::Timestamp;

#[derive(Debug)]
struct Stored {
    data: Vec<u8>,
    tier: Tier,
    uploaded_at: Timestamp,
}

type Containers = BTreeMap<String, BTreeMap<String, Stored>>;

/// Process-local backend for tests and dry runs.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    containers: RwLock<Containers>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

fn missing(container: &str, key: &str) -> BlobError {
    BlobError::NotFound {
        container: container.to_string(),
        key: key.to_string(),
    }
}

impl BlobBackend for MemoryBackend {
    fn ensure_container(&self, container: &str) -> Result<(), BlobError> {
        validate_node_id(container)?;
        self.containers
            .write()
            .unwrap()
            .entry(container.to_string())
            .or_default();
        Ok(())
    }

    fn list_containers(&self) -> Result<Vec<String>, BlobError> {
        Ok(self.containers.read().unwrap().keys().cloned().collect())
    }

    fn put(
        &self,
        container: &str,
        key: &str,
        data: &mut dyn Read,
        uploaded_at: Timestamp,
    ) -> Result<u64, BlobError> {
        validate_address(container, key)?;
        // read outside the lock; the stream may be slow
        let mut buf = Vec::new();
        data.read_to_end(&mut buf)?;
        let mut all = self.containers.write().unwrap();
        let objects = all
            .get_mut(container)
            .ok_or_else(|| BlobError::NoSuchContainer(container.to_string()))?;
        let len = buf.len() as u64;
        objects.insert(
            key.to_string(),
            Stored {
                data: buf,
                tier: Tier::Cool,
                uploaded_at,
            },
        );
        Ok(len)
    }

    fn get(&self, container: &str, key: &str) -> Result<Vec<u8>, BlobError> {
        let all = self.containers.read().unwrap();
        let objects = all
            .get(container)
            .ok_or_else(|| BlobError::NoSuchContainer(container.to_string()))?;
        let obj = objects.get(key).ok_or_else(|| missing(container, key))?;
        if obj.tier == Tier::Archive {
            return Err(BlobError::Archived {
                container: container.to_string(),
                key: key.to_string(),
            });
        }
        Ok(obj.data.clone())
    }

    fn list(&self, container: &str) -> Result<Vec<ObjectInfo>, BlobError> {
        let all = self.containers.read().unwrap();
        let objects = all
            .get(container)
            .ok_or_else(|| BlobError::NoSuchContainer(container.to_string()))?;
        objects
            .iter()
            .map(|(key, obj)| {
                Ok(ObjectInfo {
                    blob: BlobRef::new(container, key)?.with_tier(obj.tier),
                    size: obj.data.len() as u64,
                    uploaded_at: obj.uploaded_at,
                })
            })
            .collect()
    }

    fn set_tier(&self, container: &str, key: &str, tier: Tier) -> Result<(), BlobError> {
        let mut all = self.containers.write().unwrap();
        let objects = all
            .get_mut(container)
            .ok_or_else(|| BlobError::NoSuchContainer(container.to_string()))?;
        objects
            .get_mut(key)
            .ok_or_else(|| missing(container, key))?
            .tier = tier;
        Ok(())
    }
}
