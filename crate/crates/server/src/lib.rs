//! HTTP service over the inventory registry and the change store.
//!
//! Both stores sit behind one `RwLock`: writes are serialized through it and
//! reads only ever see committed state.

mod api;
mod lock;
mod problem;

use std::future::Future;
use std::path::Path;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use euc_core::changes::{AlertRuleSet, ChangeStore, StoreError};
use euc_core::inventory::{InventoryError, InventoryStore};
use euc_core::standards::{EffortConfig, RuleConfig};
use euc_core::timefmt::{self, Timestamp};
use thiserror::Error;

pub use api::router;
pub use lock::{DataDirLock, LockError, LOCK_FILE};
pub use problem::Problem;

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub rules: RuleConfig,
    pub alerts: AlertRuleSet,
    pub effort: EffortConfig,
}

pub struct Registry {
    pub inventory: InventoryStore,
    pub changes: ChangeStore,
}

impl Registry {
    /// `<dir>/inventory` and `<dir>/changes`.
    pub fn open(data_dir: &Path) -> Result<Self, OpenError> {
        Ok(Registry {
            inventory: InventoryStore::open(&data_dir.join("inventory"))?,
            changes: ChangeStore::open(&data_dir.join("changes"))?,
        })
    }
}

#[derive(Debug, Error)]
pub enum OpenError {
    #[error("inventory: {0}")]
    Inventory(#[from] InventoryError),
    #[error("changes: {0}")]
    Changes(#[from] StoreError),
}

struct Shared {
    registry: RwLock<Registry>,
    settings: Settings,
    clock: Clock,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(registry: Registry, settings: Settings) -> Self {
        Self::with_clock(registry, settings, Arc::new(timefmt::now))
    }

    pub fn with_clock(registry: Registry, settings: Settings, clock: Clock) -> Self {
        AppState {
            shared: Arc::new(Shared {
                registry: RwLock::new(registry),
                settings,
                clock,
            }),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Registry> {
        self.shared.registry.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Registry> {
        self.shared.registry.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn settings(&self) -> &Settings {
        &self.shared.settings
    }

    pub fn now(&self) -> Timestamp {
        (self.shared.clock)()
    }
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
