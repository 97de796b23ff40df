//! Scene assembly per named view, and the job-level outputs: per-stage
//! renders, stage × view montages and GIF animations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::atlas::{AtlasError, AtlasManifest, Hemisphere, RegionKey, StructureClass};
use crate::biomarker::{interpolate_stages, BiomarkerTable};
use crate::colormap::{ColorError, ColorGradient, Rgb};
use crate::geom::Aabb;
use crate::gif::{encode_animation, GifError};
use crate::image::RgbaImage;
use crate::mesh::Mesh;
use crate::png::encode_png;
use crate::render::{named_view_camera, render_scene, Framebuffer, Material, NamedView, RenderError, SceneItem};

pub const MIN_RESOLUTION: u32 = 16;

#[derive(Debug, thiserror::Error)]
pub enum ComposeError {
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("view `{view}` is not supported by atlas `{atlas_id}` (its meshes are hollow)")]
    UnsupportedView { view: NamedView, atlas_id: String },
    #[error("animation needs at least 2 stages, got {0}")]
    TooFewStages(usize),
    #[error("invalid job: {0}")]
    InvalidJob(String),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Gif(#[from] GifError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage `{stage}`, view `{view}`: {source}")]
    Cell {
        stage: String,
        view: NamedView,
        #[source]
        source: Box<ComposeError>,
    },
}

/// Everything needed to render: atlas with loaded meshes, values, colors, views.
#[derive(Debug, Clone)]
pub struct RenderJob {
    pub manifest: AtlasManifest,
    /// Region meshes aligned with `manifest.regions`, in atlas space with normals.
    pub meshes: Vec<Arc<Mesh<f64>>>,
    pub table: BiomarkerTable<f64>,
    pub gradient: ColorGradient<f64>,
    pub views: Vec<NamedView>,
    pub width: u32,
    pub height: u32,
    /// Cortical shell opacity in the subcortical view; 0 hides it.
    pub shell_alpha: f64,
    pub background: Rgb<f64>,
    /// Output path prefix; files are `<prefix>_<stage>_<view>.png`.
    pub output_prefix: PathBuf,
}

impl RenderJob {
    /// Loads every region mesh and checks job invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        manifest: AtlasManifest,
        table: BiomarkerTable<f64>,
        gradient: ColorGradient<f64>,
        views: Vec<NamedView>,
        (width, height): (u32, u32),
        shell_alpha: f64,
        background: Rgb<f64>,
        output_prefix: PathBuf,
    ) -> Result<Self, ComposeError> {
        let meshes = manifest
            .regions
            .par_iter()
            .map(|r| manifest.load_region_mesh(r).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_meshes(
            manifest,
            meshes,
            table,
            gradient,
            views,
            (width, height),
            shell_alpha,
            background,
            output_prefix,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_meshes(
        manifest: AtlasManifest,
        meshes: Vec<Arc<Mesh<f64>>>,
        table: BiomarkerTable<f64>,
        gradient: ColorGradient<f64>,
        views: Vec<NamedView>,
        (width, height): (u32, u32),
        shell_alpha: f64,
        background: Rgb<f64>,
        output_prefix: PathBuf,
    ) -> Result<Self, ComposeError> {
        let job = Self {
            manifest,
            meshes,
            table,
            gradient,
            views,
            width,
            height,
            shell_alpha,
            background,
            output_prefix,
        };
        job.validate()?;
        Ok(job)
    }

    fn validate(&self) -> Result<(), ComposeError> {
        let bad = |m: String| Err(ComposeError::InvalidJob(m));
        if self.views.is_empty() {
            return bad("view list is empty".into());
        }
        if self.width < MIN_RESOLUTION || self.height < MIN_RESOLUTION {
            return bad(format!(
                "resolution {}×{} is below {MIN_RESOLUTION}×{MIN_RESOLUTION}",
                self.width, self.height
            ));
        }
        if !(0.0..=1.0).contains(&self.shell_alpha) {
            return bad(format!("shell_alpha {} outside [0, 1]", self.shell_alpha));
        }
        if self.meshes.len() != self.manifest.regions.len() {
            return bad("mesh list does not match manifest regions".into());
        }
        if self.table.k != self.gradient.k() {
            return bad(format!(
                "table scale K = {} but gradient has K = {}",
                self.table.k,
                self.gradient.k()
            ));
        }
        let known: Vec<RegionKey> = self.manifest.keys().collect();
        if let Some(k) = self.table.keys().into_iter().find(|k| !known.contains(k)) {
            return bad(format!("table region `{k}` is not in the atlas"));
        }
        Ok(())
    }

    pub fn stage_index(&self, stage: &str) -> Result<usize, ComposeError> {
        self.table
            .stage_index(stage)
            .ok_or_else(|| ComposeError::UnknownStage(stage.to_owned()))
    }

    pub fn check_view(&self, view: NamedView) -> Result<(), ComposeError> {
        if view.is_inner() && self.manifest.hollow {
            return Err(ComposeError::UnsupportedView {
                view,
                atlas_id: self.manifest.atlas_id.clone(),
            });
        }
        Ok(())
    }

    /// Output file for one (stage, view) render.
    pub fn output_path(&self, stage: &str, view: NamedView) -> PathBuf {
        self.prefixed(&format!("_{}_{}.png", sanitize(stage), view.name()))
    }

    pub fn montage_path(&self) -> PathBuf {
        self.prefixed("_montage.png")
    }

    pub fn animation_path(&self, view: NamedView) -> PathBuf {
        self.prefixed(&format!("_{}.gif", view.name()))
    }

    fn prefixed(&self, suffix: &str) -> PathBuf {
        let mut s = self.output_prefix.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }
}

/// Replaces characters that are unsafe in file names with `_`.
pub fn sanitize(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "_".into()
    } else {
        s
    }
}

/// Views where `hemisphere` meshes are drawn.
fn hemisphere_visible(view: NamedView, hemisphere: Hemisphere) -> bool {
    match view {
        NamedView::CorticalOuterLeft | NamedView::CorticalInnerLeft => hemisphere == Hemisphere::Left,
        NamedView::CorticalOuterRight | NamedView::CorticalInnerRight => hemisphere == Hemisphere::Right,
        NamedView::Top | NamedView::Bottom | NamedView::Subcortical => true,
    }
}

/// Scene items for one view, colored from `value(region key)`.
fn scene_with(
    job: &RenderJob,
    view: NamedView,
    value: impl Fn(&RegionKey) -> f64,
) -> Result<Vec<(usize, SceneItem<f64>)>, ComposeError> {
    job.check_view(view)?;
    let mut items = Vec::new();
    for (i, entry) in job.manifest.regions.iter().enumerate() {
        if !hemisphere_visible(view, entry.hemisphere) {
            continue;
        }
        let alpha = match (view, entry.structure_class) {
            (NamedView::Subcortical, StructureClass::Cortical) => job.shell_alpha,
            _ => 1.0,
        };
        if alpha <= 0.0 {
            continue;
        }
        let k = job.gradient.k() as f64;
        let v = value(&entry.key()).clamp(0.0, k);
        items.push((
            i,
            SceneItem {
                mesh: Arc::clone(&job.meshes[i]),
                material: Material {
                    base_color: job.gradient.value_to_color(v)?,
                    alpha,
                },
            },
        ));
    }
    Ok(items)
}

/// View-dependent mesh selection and material assignment for one stage.
pub fn build_scene(job: &RenderJob, stage: &str, view: NamedView) -> Result<Vec<SceneItem<f64>>, ComposeError> {
    let s = job.stage_index(stage)?;
    Ok(scene_with(job, view, |k| job.table.value(s, k))?
        .into_iter()
        .map(|(_, item)| item)
        .collect())
}

fn bounds_of<'a>(meshes: impl Iterator<Item = &'a Mesh<f64>>) -> Option<Aabb<f64>> {
    meshes.filter_map(Mesh::triangle_bounds).reduce(Aabb::union)
}

fn render_items(job: &RenderJob, view: NamedView, items: &[SceneItem<f64>]) -> Result<Framebuffer<f64>, ComposeError> {
    let bounds = bounds_of(items.iter().map(|i| i.mesh.as_ref()))
        .or_else(|| bounds_of(job.meshes.iter().map(Arc::as_ref)));
    let cam = named_view_camera(view, bounds.as_ref())?.fit_aspect(job.width, job.height);
    Ok(render_scene(items, &cam, job.width, job.height, job.background)?)
}

fn render_values(
    job: &RenderJob,
    view: NamedView,
    value: impl Fn(&RegionKey) -> f64,
) -> Result<Framebuffer<f64>, ComposeError> {
    let items: Vec<SceneItem<f64>> = scene_with(job, view, value)?.into_iter().map(|(_, i)| i).collect();
    render_items(job, view, &items)
}

/// Linear-light render of one (stage, view) cell.
pub fn render_stage(job: &RenderJob, stage: usize, view: NamedView) -> Result<Framebuffer<f64>, ComposeError> {
    render_values(job, view, |k| job.table.value(stage, k))
}

pub fn render_stage_image(job: &RenderJob, stage: usize, view: NamedView) -> Result<RgbaImage, ComposeError> {
    render_stage(job, stage, view).map(|fb| RgbaImage::from_framebuffer(&fb))
}

/// Outcome of [`render_job`]: files written plus per-cell failures.
#[derive(Debug, Default)]
pub struct RenderReport {
    pub files: Vec<PathBuf>,
    pub failures: Vec<ComposeError>,
}

impl RenderReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ComposeError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| ComposeError::Io {
            path: dir.to_owned(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| ComposeError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Renders and writes one PNG per (stage, view), stages-major.
///
/// A failing cell (for example an unsupported view) is reported in
/// `failures` and leaves no file; the remaining cells are still written.
pub fn render_job(job: &RenderJob) -> Result<RenderReport, ComposeError> {
    let cells: Vec<(usize, NamedView)> = (0..job.table.stages.len())
        .flat_map(|s| job.views.iter().map(move |&v| (s, v)))
        .collect();
    let encoded: Vec<Result<Vec<u8>, ComposeError>> = cells
        .par_iter()
        .map(|&(s, v)| render_stage_image(job, s, v).map(|img| encode_png(&img)))
        .collect();
    let mut report = RenderReport::default();
    for ((s, view), result) in cells.into_iter().zip(encoded) {
        let stage = &job.table.stages[s];
        match result {
            Ok(bytes) => {
                let path = job.output_path(stage, view);
                write_file(&path, &bytes)?;
                report.files.push(path);
            }
            Err(e) => report.failures.push(ComposeError::Cell {
                stage: stage.clone(),
                view,
                source: Box::new(e),
            }),
        }
    }
    Ok(report)
}

/// Montage dimensions for a `cols × rows` grid of `w × h` cells.
pub fn montage_size(cols: u32, rows: u32, w: u32, h: u32, pad: u32) -> (u32, u32) {
    (cols * w + (cols + 1) * pad, rows * h + (rows + 1) * pad)
}

/// Grid with one row per view and one column per stage, `pad` pixels of
/// `background` between and around the cells.
pub fn render_montage(job: &RenderJob, pad: u32, background: Rgb<f64>) -> Result<RgbaImage, ComposeError> {
    let stages = job.table.stages.len() as u32;
    let rows = job.views.len() as u32;
    if stages == 0 {
        return Err(ComposeError::InvalidJob("no stages".into()));
    }
    let cells: Vec<(u32, u32)> = (0..rows).flat_map(|r| (0..stages).map(move |c| (r, c))).collect();
    let images = cells
        .par_iter()
        .map(|&(r, c)| {
            let view = job.views[r as usize];
            render_stage_image(job, c as usize, view).map_err(|e| ComposeError::Cell {
                stage: job.table.stages[c as usize].clone(),
                view,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (w, h) = montage_size(stages, rows, job.width, job.height, pad);
    let mut canvas = RgbaImage::background(w, h, background);
    for (&(r, c), img) in cells.iter().zip(&images) {
        canvas.blit(img, pad + c * (job.width + pad), pad + r * (job.height + pad));
    }
    Ok(canvas)
}

pub fn write_montage(job: &RenderJob, pad: u32, background: Rgb<f64>) -> Result<PathBuf, ComposeError> {
    let img = render_montage(job, pad, background)?;
    let path = job.montage_path();
    write_file(&path, &encode_png(&img))?;
    Ok(path)
}

/// Region values for animation frame `k`.
pub fn frame_values(table: &BiomarkerTable<f64>, k: usize, frames_per_transition: usize) -> BTreeMap<RegionKey, f64> {
    let last = table.stages.len() - 1;
    let (s, r) = (k / frames_per_transition, k % frames_per_transition);
    if s >= last {
        return interpolate_stages(table, last, last, 0.0);
    }
    interpolate_stages(table, s, s + 1, r as f64 / frames_per_transition as f64)
}

pub fn animation_frame_count(stages: usize, frames_per_transition: usize) -> usize {
    (stages - 1) * frames_per_transition + 1
}

/// Unquantized frames: `(S − 1)·fpt + 1` renders stepping linearly in value
/// space between consecutive stages.
pub fn render_animation_frames(
    job: &RenderJob,
    view: NamedView,
    frames_per_transition: usize,
) -> Result<Vec<Framebuffer<f64>>, ComposeError> {
    let n = job.table.stages.len();
    if n < 2 {
        return Err(ComposeError::TooFewStages(n));
    }
    if frames_per_transition == 0 {
        return Err(ComposeError::InvalidJob("frames_per_transition must be ≥ 1".into()));
    }
    job.check_view(view)?;
    (0..animation_frame_count(n, frames_per_transition))
        .into_par_iter()
        .map(|k| {
            let values = frame_values(&job.table, k, frames_per_transition);
            render_values(job, view, |key| values.get(key).copied().unwrap_or(0.0))
        })
        .collect()
}

/// GIF bytes for an animation of one view.
pub fn render_animation(
    job: &RenderJob,
    view: NamedView,
    frames_per_transition: usize,
    delay_cs: u16,
    dither: bool,
) -> Result<Vec<u8>, ComposeError> {
    let frames: Vec<RgbaImage> = render_animation_frames(job, view, frames_per_transition)?
        .iter()
        .map(RgbaImage::from_framebuffer)
        .collect();
    Ok(encode_animation(&frames, delay_cs, dither)?)
}

pub fn write_animation(
    job: &RenderJob,
    view: NamedView,
    frames_per_transition: usize,
    delay_cs: u16,
    dither: bool,
) -> Result<PathBuf, ComposeError> {
    let bytes = render_animation(job, view, frames_per_transition, delay_cs, dither)?;
    let path = job.animation_path(view);
    write_file(&path, &bytes)?;
    Ok(path)
}
