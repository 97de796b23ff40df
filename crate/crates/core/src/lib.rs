//! Region-level coloring of brain-atlas meshes from per-stage biomarker
//! values, rendered without an external 3D engine.
//!
//! Geometry, color and rendering are generic over the scalar type ([`Real`],
//! implemented for `f32` and `f64`). The aliases at the crate root fix the
//! scalar to `f64`, which is what the atlas and job pipeline uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atlas;
pub mod biomarker;
pub mod colormap;
pub mod compose;
pub mod config;
pub mod geom;
pub mod gif;
pub mod image;
pub mod mesh;
pub mod ply;
pub mod png;
pub mod render;
pub mod scalar;
pub mod synthetic;

pub use atlas::{load_manifest, prep_atlas, split_hemispheres, AtlasError, AtlasManifest, Hemisphere, RegionKey};
pub use compose::{build_scene, render_job, ComposeError, RenderJob, RenderReport};
pub use config::{load_config, Config, ConfigError, ConfigLayer, Diagnostic};
pub use image::RgbaImage;
pub use render::NamedView;
pub use scalar::Real;

pub type Vec3 = geom::Vec3<f64>;
pub type Aabb = geom::Aabb<f64>;
pub type Affine3 = geom::Affine3<f64>;
pub type Mesh = mesh::Mesh<f64>;
pub type Rgb = colormap::Rgb<f64>;
pub type ColorGradient = colormap::ColorGradient<f64>;
pub type BiomarkerTable = biomarker::BiomarkerTable<f64>;
pub type Camera = render::Camera<f64>;
pub type Framebuffer = render::Framebuffer<f64>;
pub type Material = render::Material<f64>;
pub type SceneItem = render::SceneItem<f64>;
