//! Job registry, FIFO queue and render workers.

use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use atlaspaint_core::compose::{render_job, write_animation, write_montage, RenderJob};
use atlaspaint_core::config::Config;
use atlaspaint_core::render::NamedView;
use atlaspaint_core::{AtlasManifest, BiomarkerTable, Mesh};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Error,
}

/// Public view of a job.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub status: JobStatus,
    /// RFC 3339, UTC.
    pub submitted_at: String,
    pub images: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Images,
    Montage,
    Animation,
}

/// An atlas with its meshes loaded once at startup.
#[derive(Debug)]
pub struct LoadedAtlas {
    pub manifest: AtlasManifest,
    pub meshes: Vec<Arc<Mesh>>,
}

impl LoadedAtlas {
    pub fn load(manifest: AtlasManifest) -> Result<Self, atlaspaint_core::AtlasError> {
        let meshes = manifest
            .regions
            .iter()
            .map(|r| manifest.load_region_mesh(r).map(Arc::new))
            .collect::<Result<_, _>>()?;
        Ok(Self { manifest, meshes })
    }

    pub fn views_supported(&self) -> Vec<NamedView> {
        NamedView::ALL
            .into_iter()
            .filter(|v| !(v.is_inner() && self.manifest.hollow))
            .collect()
    }
}

/// A validated submission.
#[derive(Debug)]
pub struct JobPlan {
    pub config: Config,
    pub table: BiomarkerTable,
    pub atlas: Arc<LoadedAtlas>,
    pub mode: Mode,
    /// Animated view; the first configured view when absent.
    pub view: Option<NamedView>,
}

struct Entry {
    record: JobRecord,
    dir: PathBuf,
    finished: Option<Instant>,
}

#[derive(Default)]
pub struct Registry {
    jobs: RwLock<HashMap<String, Entry>>,
}

impl Registry {
    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.jobs.read().unwrap().get(id).map(|e| e.record.clone())
    }

    /// Record plus output directory, for serving files.
    pub fn get_with_dir(&self, id: &str) -> Option<(JobRecord, PathBuf)> {
        self.jobs
            .read()
            .unwrap()
            .get(id)
            .map(|e| (e.record.clone(), e.dir.clone()))
    }

    fn insert(&self, record: JobRecord, dir: PathBuf) {
        let id = record.job_id.clone();
        self.jobs.write().unwrap().insert(id, Entry { record, dir, finished: None });
    }

    fn contains(&self, id: &str) -> bool {
        self.jobs.read().unwrap().contains_key(id)
    }

    /// Moves a job forward; transitions never go backwards.
    fn advance(&self, id: &str, status: JobStatus, images: Vec<String>, error: Option<String>) {
        let mut jobs = self.jobs.write().unwrap();
        let Some(e) = jobs.get_mut(id) else { return };
        debug_assert!(status > e.record.status);
        if status <= e.record.status {
            return;
        }
        e.record.status = status;
        e.record.images = images;
        e.record.error_message = error;
        if matches!(status, JobStatus::Done | JobStatus::Error) {
            e.finished = Some(Instant::now());
        }
    }

    /// Drops finished jobs older than `retention` and deletes their files.
    pub fn collect_garbage(&self, retention: Duration) -> usize {
        let now = Instant::now();
        let expired: Vec<(String, PathBuf)> = {
            let mut jobs = self.jobs.write().unwrap();
            let ids: Vec<String> = jobs
                .iter()
                .filter(|(_, e)| e.finished.is_some_and(|t| now.duration_since(t) >= retention))
                .map(|(id, _)| id.clone())
                .collect();
            ids.into_iter()
                .filter_map(|id| jobs.remove(&id).map(|e| (id, e.dir)))
                .collect()
        };
        for (id, dir) in &expired {
            if let Err(e) = std::fs::remove_dir_all(dir) {
                log::warn!("job {id}: removing {}: {e}", dir.display());
            }
        }
        expired.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SubmitError {
    #[error("queue is full ({0} outstanding jobs)")]
    QueueFull(usize),
    #[error("creating job directory: {0}")]
    Io(#[from] std::io::Error),
}

struct Pending {
    id: String,
    plan: JobPlan,
    dir: PathBuf,
}

struct QueueState {
    pending: VecDeque<Pending>,
    /// Queued plus running.
    outstanding: usize,
    closed: bool,
}

/// Registry plus bounded FIFO queue feeding a fixed set of worker threads.
pub struct JobSystem {
    pub registry: Registry,
    queue: Mutex<QueueState>,
    ready: Condvar,
    spool: PathBuf,
    cap: usize,
}

const ID_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn new_job_id() -> String {
    let mut rng = rand::rng();
    (0..16)
        .map(|_| ID_ALPHABET[rng.random_range(0..ID_ALPHABET.len())] as char)
        .collect()
}

impl JobSystem {
    pub fn new(spool: PathBuf, cap: usize) -> Self {
        Self {
            registry: Registry::default(),
            queue: Mutex::new(QueueState {
                pending: VecDeque::new(),
                outstanding: 0,
                closed: false,
            }),
            ready: Condvar::new(),
            spool,
            cap,
        }
    }

    pub fn spool(&self) -> &Path {
        &self.spool
    }

    /// Registers and enqueues a job, or refuses when `cap` jobs are outstanding.
    pub fn submit(&self, plan: JobPlan) -> Result<String, SubmitError> {
        let mut q = self.queue.lock().unwrap();
        if q.outstanding >= self.cap {
            return Err(SubmitError::QueueFull(q.outstanding));
        }
        let id = loop {
            let id = new_job_id();
            if !self.registry.contains(&id) {
                break id;
            }
        };
        let dir = self.spool.join(&id);
        std::fs::create_dir_all(&dir)?;
        self.registry.insert(
            JobRecord {
                job_id: id.clone(),
                status: JobStatus::Queued,
                submitted_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                images: Vec::new(),
                error_message: None,
            },
            dir.clone(),
        );
        q.outstanding += 1;
        q.pending.push_back(Pending {
            id: id.clone(),
            plan,
            dir,
        });
        drop(q);
        self.ready.notify_one();
        Ok(id)
    }

    pub fn outstanding(&self) -> usize {
        self.queue.lock().unwrap().outstanding
    }

    /// Stops workers once the queue drains.
    pub fn close(&self) {
        self.queue.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    fn next(&self) -> Option<Pending> {
        let mut q = self.queue.lock().unwrap();
        loop {
            if let Some(p) = q.pending.pop_front() {
                return Some(p);
            }
            if q.closed {
                return None;
            }
            q = self.ready.wait(q).unwrap();
        }
    }

    /// Worker loop: runs jobs in submission order until closed.
    pub fn work(&self) {
        while let Some(p) = self.next() {
            self.registry.advance(&p.id, JobStatus::Running, Vec::new(), None);
            match run_plan(&p.plan, &p.dir) {
                Ok(images) => self.registry.advance(&p.id, JobStatus::Done, images, None),
                Err(msg) => {
                    log::warn!("job {}: {msg}", p.id);
                    self.registry.advance(&p.id, JobStatus::Error, Vec::new(), Some(msg));
                }
            }
            self.queue.lock().unwrap().outstanding -= 1;
        }
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Renders a plan into `dir`; returns the written file names.
pub fn run_plan(plan: &JobPlan, dir: &Path) -> Result<Vec<String>, String> {
    let cfg = &plan.config;
    let job = RenderJob::with_meshes(
        plan.atlas.manifest.clone(),
        plan.atlas.meshes.clone(),
        plan.table.clone(),
        cfg.gradient.clone(),
        cfg.views.clone(),
        (cfg.resolution[0], cfg.resolution[1]),
        cfg.shell_alpha,
        cfg.background,
        dir.join(&cfg.prefix),
    )
    .map_err(|e| e.to_string())?;
    let names = match plan.mode {
        Mode::Images => {
            let report = render_job(&job).map_err(|e| e.to_string())?;
            if !report.is_complete() {
                let msgs: Vec<String> = report.failures.iter().map(|f| f.to_string()).collect();
                return Err(msgs.join("; "));
            }
            report.files.iter().map(|p| file_name(p)).collect()
        }
        Mode::Montage => vec![file_name(
            &write_montage(&job, cfg.montage_pad, cfg.background).map_err(|e| e.to_string())?,
        )],
        Mode::Animation => {
            let view = plan.view.unwrap_or(cfg.views[0]);
            let path = write_animation(
                &job,
                view,
                cfg.frames_per_transition as usize,
                cfg.delay_cs,
                cfg.dither,
            )
            .map_err(|e| e.to_string())?;
            vec![file_name(&path)]
        }
    };
    if names.is_empty() {
        return Err("job produced no images".into());
    }
    Ok(names)
}
