//! Software renderer: orthographic cameras for the named anatomical views,
//! a z-buffered triangle rasterizer and two-pass (opaque, then translucent)
//! scene rendering.

mod camera;
mod raster;
mod scene;

pub use camera::{named_view_camera, project_vertex, Camera, NamedView, ParseViewError};
pub use raster::{rasterize_triangle, triangle_coverage, Framebuffer};
pub use scene::{render_scene, shade, Material, SceneItem, AMBIENT, DIFFUSE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("scene is empty; nothing to frame")]
    EmptyScene,
    #[error("invalid framebuffer size {width}×{height}")]
    BadSize { width: u32, height: u32 },
}
