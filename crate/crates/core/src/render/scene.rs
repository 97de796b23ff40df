use std::sync::Arc;

use rayon::prelude::*;

use crate::colormap::Rgb;
use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::scalar::Real;

use super::camera::{project_vertex, Camera};
use super::raster::{raster_into, SetupTriangle, Target};
use super::{Framebuffer, RenderError};

pub const AMBIENT: f64 = 0.35;
pub const DIFFUSE: f64 = 0.65;

/// Rows per parallel band.
const BAND_ROWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material<S> {
    pub base_color: Rgb<S>,
    /// 1 is opaque.
    pub alpha: S,
}

impl<S: Real> Material<S> {
    pub fn opaque(base_color: Rgb<S>) -> Self {
        Self {
            base_color,
            alpha: S::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneItem<S> {
    pub mesh: Arc<Mesh<S>>,
    pub material: Material<S>,
}

/// Two-sided headlight: `base · (ambient + diffuse·|n · −forward|)`, clamped.
pub fn shade<S: Real>(base: Rgb<S>, normal: Vec3<S>, cam: &Camera<S>) -> Rgb<S> {
    let facing = normal.dot(-cam.forward).abs();
    let intensity = S::lit(AMBIENT) + S::lit(DIFFUSE) * facing;
    base.map(|c| (c * intensity).clamp01())
}

struct Prepared<S> {
    tri: SetupTriangle<S>,
    color: Rgb<S>,
    alpha: S,
    centroid_depth: S,
}

/// Renders opaque items with a z-buffer, then blends translucent items
/// back-to-front (by triangle centroid depth) against the opaque depth.
///
/// Triangles are flat shaded with their face normal. The framebuffer is split
/// into horizontal bands rendered in parallel; each band applies triangles in
/// the same global order, so output does not depend on the thread count.
pub fn render_scene<S: Real>(
    items: &[SceneItem<S>],
    cam: &Camera<S>,
    width: u32,
    height: u32,
    background: Rgb<S>,
) -> Result<Framebuffer<S>, RenderError> {
    let mut fb = Framebuffer::new(width, height, background)?;
    let mut opaque = Vec::new();
    let mut translucent = Vec::new();
    let third = S::lit(1.0 / 3.0);

    for item in items {
        let alpha = item.material.alpha.clamp01();
        if alpha <= S::zero() {
            continue;
        }
        let mesh = &item.mesh;
        let projected: Vec<[S; 3]> = mesh
            .vertices
            .iter()
            .map(|&p| project_vertex(p, cam, width, height))
            .collect();
        for &t in &mesh.triangles {
            let screen = t.map(|i| projected[i as usize]);
            let Some(tri) = SetupTriangle::new(screen) else {
                continue;
            };
            if tri.max_y < S::zero() || tri.min_y > S::lit(height as f64) {
                continue;
            }
            let normal = mesh
                .face_cross(t)
                .try_normalize()
                .unwrap_or_else(crate::mesh::fallback_normal);
            let p = Prepared {
                tri,
                color: shade(item.material.base_color, normal, cam),
                alpha,
                centroid_depth: (screen[0][2] + screen[1][2] + screen[2][2]) * third,
            };
            if alpha >= S::one() {
                opaque.push(p);
            } else {
                translucent.push(p);
            }
        }
    }
    // Farthest first; stable so equal depths keep submission order.
    translucent.sort_by(|a, b| b.centroid_depth.partial_cmp(&a.centroid_depth).unwrap_or(std::cmp::Ordering::Equal));

    let w = width as usize;
    let band_len = BAND_ROWS * w;
    fb.color
        .par_chunks_mut(band_len)
        .zip(fb.depth.par_chunks_mut(band_len))
        .enumerate()
        .for_each(|(band, (color, depth))| {
            let y0 = (band * BAND_ROWS) as u32;
            let rows = (depth.len() / w) as u32;
            let (band_top, band_bottom) = (S::lit(y0 as f64), S::lit((y0 + rows) as f64));
            let mut target = Target {
                width,
                height,
                y0,
                color,
                depth,
            };
            for p in opaque.iter().chain(translucent.iter()) {
                // Pixel centers in this band lie in [y0 + 0.5, y0 + rows − 0.5].
                if p.tri.max_y < band_top || p.tri.min_y > band_bottom {
                    continue;
                }
                raster_into(&mut target, &p.tri, p.color, p.alpha);
            }
        });
    Ok(fb)
}
