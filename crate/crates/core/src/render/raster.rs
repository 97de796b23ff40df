use crate::colormap::{linear_to_srgb8, Rgb};
use crate::scalar::Real;

use super::RenderError;

/// Linear RGBA color plus depth per pixel, row-major from the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct Framebuffer<S> {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[S; 4]>,
    pub depth: Vec<S>,
}

impl<S: Real> Framebuffer<S> {
    pub fn new(width: u32, height: u32, background: Rgb<S>) -> Result<Self, RenderError> {
        if width == 0 || height == 0 {
            return Err(RenderError::BadSize { width, height });
        }
        let n = width as usize * height as usize;
        Ok(Self {
            width,
            height,
            color: vec![[background.r, background.g, background.b, S::one()]; n],
            depth: vec![S::infinity(); n],
        })
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [S; 4] {
        self.color[y as usize * self.width as usize + x as usize]
    }

    /// sRGB-encoded 8-bit RGBA, rows top-down.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.color.len() * 4);
        for c in &self.color {
            out.extend_from_slice(&[
                linear_to_srgb8(c[0]),
                linear_to_srgb8(c[1]),
                linear_to_srgb8(c[2]),
                (c[3].clamp01() * S::lit(255.0)).round().to_u8().unwrap_or(255),
            ]);
        }
        out
    }

    pub(crate) fn full_target(&mut self) -> Target<'_, S> {
        Target {
            width: self.width,
            height: self.height,
            y0: 0,
            color: &mut self.color,
            depth: &mut self.depth,
        }
    }
}

/// A horizontal band `[y0, y0 + rows)` of a framebuffer.
pub(crate) struct Target<'a, S> {
    pub width: u32,
    pub height: u32,
    pub y0: u32,
    pub color: &'a mut [[S; 4]],
    pub depth: &'a mut [S],
}

impl<S> Target<'_, S> {
    fn rows(&self) -> u32 {
        (self.depth.len() / self.width as usize) as u32
    }
}

/// Screen-space triangle prepared for coverage tests.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SetupTriangle<S> {
    v: [[S; 3]; 3],
    area2: S,
    top_left: [bool; 3],
    pub min_y: S,
    pub max_y: S,
}

/// Signed doubled area of (u, v, p); positive when p is on the interior side
/// for the winding we normalize to.
#[inline]
fn edge<S: Real>(u: [S; 3], v: [S; 3], px: S, py: S) -> S {
    (v[0] - u[0]) * (py - u[1]) - (v[1] - u[1]) * (px - u[0])
}

impl<S: Real> SetupTriangle<S> {
    /// `None` for zero-area or non-finite triangles.
    pub fn new(v: [[S; 3]; 3]) -> Option<Self> {
        if !v.iter().flatten().all(|c| c.is_finite()) {
            return None;
        }
        let [a, mut b, mut c] = v;
        let mut area2 = edge(a, b, c[0], c[1]);
        if area2 == S::zero() || !area2.is_finite() {
            return None;
        }
        if area2 < S::zero() {
            std::mem::swap(&mut b, &mut c);
            area2 = -area2;
        }
        let v = [a, b, c];
        // Edge k is opposite vertex k: (b,c), (c,a), (a,b).
        let top_left = [(1, 2), (2, 0), (0, 1)].map(|(i, j)| {
            let dx = v[j][0] - v[i][0];
            let dy = v[j][1] - v[i][1];
            (dy == S::zero() && dx > S::zero()) || dy < S::zero()
        });
        Some(Self {
            v,
            area2,
            top_left,
            min_y: a[1].min(b[1]).min(c[1]),
            max_y: a[1].max(b[1]).max(c[1]),
        })
    }

    /// Calls `f(x, y, depth)` for every covered pixel center within rows `[row0, row1)`.
    #[inline]
    pub fn for_each_fragment(&self, width: u32, row0: u32, row1: u32, mut f: impl FnMut(u32, u32, S)) {
        let [a, b, c] = self.v;
        let half = S::lit(0.5);
        // Pixel x is a candidate when x + 0.5 lies in [min, max].
        let span = |lo: S, hi: S, limit: u32| -> Option<(u32, u32)> {
            let first = (lo - half).ceil().max(S::zero());
            let last = (hi - half).floor().min(S::lit(limit as f64 - 1.0));
            if first > last {
                return None;
            }
            Some((first.to_u32()?, last.to_u32()?))
        };
        let Some((x0, x1)) = span(a[0].min(b[0]).min(c[0]), a[0].max(b[0]).max(c[0]), width) else {
            return;
        };
        let Some((y0, y1)) = span(self.min_y, self.max_y, row1) else {
            return;
        };
        let y0 = y0.max(row0);
        let inside = |w: S, tl: bool| w > S::zero() || (w == S::zero() && tl);
        for y in y0..=y1 {
            let py = S::lit(y as f64) + half;
            for x in x0..=x1 {
                let px = S::lit(x as f64) + half;
                let w0 = edge(b, c, px, py);
                let w1 = edge(c, a, px, py);
                let w2 = edge(a, b, px, py);
                if inside(w0, self.top_left[0]) && inside(w1, self.top_left[1]) && inside(w2, self.top_left[2]) {
                    let z = (w0 * a[2] + w1 * b[2] + w2 * c[2]) / self.area2;
                    f(x, y, z);
                }
            }
        }
    }
}

/// Pixels whose centers a screen-space triangle covers under the top-left rule.
pub fn triangle_coverage<S: Real>(v: [[S; 3]; 3], width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    if let Some(t) = SetupTriangle::new(v) {
        t.for_each_fragment(width, 0, height, |x, y, _| out.push((x, y)));
    }
    out
}

/// Rasterizes one triangle into a band. `alpha == 1` is the opaque path
/// (depth test and write); otherwise fragments blend over without writing depth.
pub(crate) fn raster_into<S: Real>(target: &mut Target<'_, S>, tri: &SetupTriangle<S>, color: Rgb<S>, alpha: S) {
    let rows = target.rows();
    let (w, y0) = (target.width, target.y0);
    let row1 = (y0 + rows).min(target.height);
    let opaque = alpha >= S::one();
    let color_slice = &mut *target.color;
    let depth_slice = &mut *target.depth;
    tri.for_each_fragment(w, y0, row1, |x, y, z| {
        let i = (y - y0) as usize * w as usize + x as usize;
        if !(z < depth_slice[i]) {
            return;
        }
        if opaque {
            color_slice[i] = [color.r, color.g, color.b, S::one()];
            depth_slice[i] = z;
        } else {
            let dst = color_slice[i];
            let keep = S::one() - alpha;
            color_slice[i] = [
                alpha * color.r + keep * dst[0],
                alpha * color.g + keep * dst[1],
                alpha * color.b + keep * dst[2],
                alpha + keep * dst[3],
            ];
        }
    });
}

/// Rasterizes one screen-space triangle (`[x, y, depth]` per vertex) with a
/// precomputed shaded color.
pub fn rasterize_triangle<S: Real>(fb: &mut Framebuffer<S>, verts: [[S; 3]; 3], shaded: Rgb<S>, alpha: S) {
    if let Some(tri) = SetupTriangle::new(verts) {
        raster_into(&mut fb.full_target(), &tri, shaded, alpha);
    }
}
