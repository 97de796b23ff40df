//! HTTP front end for atlaspaint: submit render jobs, poll them, fetch the
//! resulting images.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/v1/jobs` | `{config, csv, mode?, view?}` → 201 `{job_id}` |
//! | GET | `/api/v1/jobs/{id}` | job record |
//! | GET | `/api/v1/jobs/{id}/images/{name}` | PNG or GIF bytes |
//! | GET | `/api/v1/atlases` | registered atlases |
//!
//! Everything else is served from the UI directory, if one is configured.

mod api;
pub mod jobs;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use atlaspaint_core::{AtlasError, AtlasManifest};
use axum::Router;

pub use api::{AtlasInfo, SubmitBody, SubmitResponse};
pub use jobs::{JobRecord, JobStatus, JobSystem, LoadedAtlas, Mode};

pub const DEFAULT_QUEUE_CAP: usize = 64;
pub const DEFAULT_CSV_CAP: usize = 10 * 1024 * 1024;
pub const DEFAULT_RETENTION: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub spool_dir: PathBuf,
    /// Jobs rendered at once. Zero accepts jobs but never runs them.
    pub workers: usize,
    pub queue_cap: usize,
    pub csv_cap: usize,
    pub retention: Duration,
    pub gc_interval: Duration,
    pub ui_dir: Option<PathBuf>,
    /// `*` allows any origin.
    pub cors_origin: Option<String>,
}

impl ServiceOptions {
    pub fn new(spool_dir: PathBuf) -> Self {
        Self {
            spool_dir,
            workers: default_workers(),
            queue_cap: DEFAULT_QUEUE_CAP,
            csv_cap: DEFAULT_CSV_CAP,
            retention: DEFAULT_RETENTION,
            gc_interval: Duration::from_secs(600),
            ui_dir: None,
            cors_origin: None,
        }
    }
}

/// `ATLASPAINT_THREADS` if set to a positive integer, else the hardware parallelism.
pub fn default_workers() -> usize {
    std::env::var("ATLASPAINT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("atlas `{atlas_id}`: {source}")]
    Atlas {
        atlas_id: String,
        #[source]
        source: AtlasError,
    },
    #[error("atlas id `{0}` registered twice")]
    DuplicateAtlas(String),
    #[error("spool directory {path}: {source}")]
    Spool {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad CORS origin `{0}`")]
    BadOrigin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct AppState {
    pub options: ServiceOptions,
    pub atlases: BTreeMap<String, Arc<LoadedAtlas>>,
    pub jobs: Arc<JobSystem>,
}

/// Shared state plus the worker threads; dropping it stops the workers
/// after the queue drains.
pub struct Service {
    state: Arc<AppState>,
    workers: Vec<JoinHandle<()>>,
}

impl Service {
    pub fn new(options: ServiceOptions, manifests: Vec<AtlasManifest>) -> Result<Self, ServiceError> {
        let mut atlases = BTreeMap::new();
        for m in manifests {
            let id = m.atlas_id.clone();
            let loaded = LoadedAtlas::load(m).map_err(|source| ServiceError::Atlas {
                atlas_id: id.clone(),
                source,
            })?;
            if atlases.insert(id.clone(), Arc::new(loaded)).is_some() {
                return Err(ServiceError::DuplicateAtlas(id));
            }
        }
        let spool = &options.spool_dir;
        std::fs::create_dir_all(spool).map_err(|source| ServiceError::Spool {
            path: spool.clone(),
            source,
        })?;
        sweep_spool(spool, options.retention);
        let jobs = Arc::new(JobSystem::new(spool.clone(), options.queue_cap));
        let workers = (0..options.workers)
            .map(|i| {
                let jobs = Arc::clone(&jobs);
                std::thread::Builder::new()
                    .name(format!("render-{i}"))
                    .spawn(move || jobs.work())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            state: Arc::new(AppState {
                options,
                atlases,
                jobs,
            }),
            workers,
        })
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    pub fn router(&self) -> Result<Router, ServiceError> {
        api::router(Arc::clone(&self.state))
    }

    /// Serves on `listener` until the process is interrupted.
    pub async fn serve(&self, listener: tokio::net::TcpListener) -> Result<(), ServiceError> {
        let app = self.router()?;
        let gc_state = Arc::clone(&self.state);
        let gc = tokio::spawn(async move {
            let mut tick = tokio::time::interval(gc_state.options.gc_interval);
            loop {
                tick.tick().await;
                let n = gc_state.jobs.registry.collect_garbage(gc_state.options.retention);
                if n > 0 {
                    log::info!("removed {n} expired jobs");
                }
            }
        });
        let result = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await;
        gc.abort();
        Ok(result?)
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.state.jobs.close();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Removes job directories left over from earlier runs once they are older
/// than `retention`.
fn sweep_spool(spool: &std::path::Path, retention: Duration) {
    let Ok(entries) = std::fs::read_dir(spool) else { return };
    for entry in entries.flatten() {
        let old = entry
            .metadata()
            .and_then(|m| m.modified())
            .ok()
            .and_then(|t| t.elapsed().ok())
            .is_some_and(|age| age >= retention);
        if old && entry.path().is_dir() {
            if let Err(e) = std::fs::remove_dir_all(entry.path()) {
                log::warn!("sweeping {}: {e}", entry.path().display());
            }
        }
    }
}

/// Binds `addr` and serves until interrupted.
pub async fn run(options: ServiceOptions, manifests: Vec<AtlasManifest>, addr: SocketAddr) -> Result<(), ServiceError> {
    let service = Service::new(options, manifests)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    service.serve(listener).await
}
