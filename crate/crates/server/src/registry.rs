use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use relevance_core::{ClassifierModel, Hyperparameters};
use tokio::sync::{OwnedRwLockReadGuard, OwnedRwLockWriteGuard, RwLock};

use crate::error::ApiError;
use crate::key::ModelKey;

type Slot = Arc<RwLock<Option<ClassifierModel>>>;

/// In-memory models keyed by (user, classifier), backed by checkpoints.
///
/// Each model sits behind its own reader/writer lock: training holds the
/// write side, so a prediction issued after a training response always sees
/// the new weights, and models never block each other. Checkpoints on disk
/// are loaded on first use.
#[derive(Debug)]
pub struct Registry {
    data_dir: PathBuf,
    slots: Mutex<HashMap<ModelKey, Slot>>,
}

pub type ReadGuard = OwnedRwLockReadGuard<Option<ClassifierModel>>;
pub type WriteGuard = OwnedRwLockWriteGuard<Option<ClassifierModel>>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

impl Registry {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Registry {
            data_dir: data_dir.into(),
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn data_dir(&self) -> &std::path::Path {
        &self.data_dir
    }

    pub fn checkpoint_path(&self, key: &ModelKey) -> PathBuf {
        key.checkpoint_path(&self.data_dir)
    }

    fn slot(&self, key: &ModelKey) -> Slot {
        let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        slots.entry(key.clone()).or_default().clone()
    }

    /// Fills an empty slot from disk. Returns false when no checkpoint exists.
    async fn load_into(&self, key: &ModelKey, guard: &mut WriteGuard) -> Result<bool, ApiError> {
        if guard.is_some() {
            return Ok(true);
        }
        let path = self.checkpoint_path(key);
        if !blocking({
            let path = path.clone();
            move || path.exists()
        })
        .await?
        {
            return Ok(false);
        }
        let model = blocking(move || ClassifierModel::restore(&path)).await??;
        log::info!("restored {key} from disk");
        **guard = Some(model);
        Ok(true)
    }

    fn missing(key: &ModelKey) -> ApiError {
        ApiError::not_found(format!("unknown model {key}"))
    }

    /// Creates the model (saving its first checkpoint) unless it already
    /// exists. `requested` is compared against an existing model and must
    /// match after normalization. Returns `(created, hyperparameters, n_trained)`.
    pub async fn init(
        &self,
        key: &ModelKey,
        requested: Option<Hyperparameters>,
        default: Hyperparameters,
    ) -> Result<(bool, Hyperparameters, u64), ApiError> {
        let mut guard = self.slot(key).write_owned().await;
        if self.load_into(key, &mut guard).await? {
            let model = guard.as_ref().expect("loaded");
            if let Some(hp) = requested {
                if hp.normalized() != model.hyperparameters().normalized() {
                    return Err(ApiError::new(
                        axum::http::StatusCode::CONFLICT,
                        format!("model {key} exists with different hyperparameters"),
                    ));
                }
            }
            return Ok((false, model.hyperparameters().clone(), model.n_trained()));
        }
        let hp = requested.unwrap_or(default);
        let path = self.checkpoint_path(key);
        let model = blocking(move || -> relevance_core::Result<ClassifierModel> {
            let model = ClassifierModel::build(hp)?;
            model.save(&path)?;
            Ok(model)
        })
        .await??;
        let out = (true, model.hyperparameters().clone(), model.n_trained());
        *guard = Some(model);
        log::info!("created {key}");
        Ok(out)
    }

    /// Shared access; waits behind any in-flight training of the same model.
    pub async fn read(&self, key: &ModelKey) -> Result<ReadGuard, ApiError> {
        let slot = self.slot(key);
        {
            let guard = slot.clone().read_owned().await;
            if guard.is_some() {
                return Ok(guard);
            }
        }
        let mut guard = slot.write_owned().await;
        if !self.load_into(key, &mut guard).await? {
            drop(guard);
            self.forget_if_empty(key);
            return Err(Self::missing(key));
        }
        Ok(guard.downgrade())
    }

    /// Exclusive access for training.
    pub async fn write(&self, key: &ModelKey) -> Result<WriteGuard, ApiError> {
        let mut guard = self.slot(key).write_owned().await;
        if !self.load_into(key, &mut guard).await? {
            drop(guard);
            self.forget_if_empty(key);
            return Err(Self::missing(key));
        }
        Ok(guard)
    }

    fn forget_if_empty(&self, key: &ModelKey) {
        let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(slot) = slots.get(key) {
            if slot.try_read().is_ok_and(|g| g.is_none()) {
                slots.remove(key);
            }
        }
    }

    pub fn loaded_keys(&self) -> Vec<ModelKey> {
        let slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        let mut keys: Vec<ModelKey> = slots.keys().cloned().collect();
        keys.sort();
        keys
    }

    /// Writes every loaded model to its checkpoint. Returns how many.
    pub async fn flush(&self) -> Result<usize, ApiError> {
        let mut n = 0;
        for key in self.loaded_keys() {
            let guard = self.slot(&key).read_owned().await;
            if guard.is_none() {
                continue;
            }
            let path = self.checkpoint_path(&key);
            blocking(move || guard.as_ref().expect("checked").save(&path)).await??;
            n += 1;
        }
        Ok(n)
    }
}
