//! 8-bit RGBA images (sRGB-encoded) used for output and montage assembly.

use crate::colormap::Rgb;
use crate::render::Framebuffer;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGBA bytes, top row first.
    pub data: Vec<u8>,
}

impl RgbaImage {
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            data: rgba.repeat(n),
        }
    }

    pub fn from_framebuffer<S: Real>(fb: &Framebuffer<S>) -> Self {
        Self {
            width: fb.width,
            height: fb.height,
            data: fb.to_rgba8(),
        }
    }

    pub fn background<S: Real>(width: u32, height: u32, color: Rgb<S>) -> Self {
        let [r, g, b] = color.to_srgb8();
        Self::filled(width, height, [r, g, b, 255])
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.data[i..i + 4].try_into().expect("4 bytes")
    }

    /// Copies `src` with its top-left corner at `(x, y)`, clipping at the edges.
    pub fn blit(&mut self, src: &RgbaImage, x: u32, y: u32) {
        if x >= self.width || y >= self.height {
            return;
        }
        let cols = src.width.min(self.width - x) as usize;
        let rows = src.height.min(self.height - y);
        for row in 0..rows {
            let s = row as usize * src.width as usize * 4;
            let d = ((y + row) as usize * self.width as usize + x as usize) * 4;
            self.data[d..d + cols * 4].copy_from_slice(&src.data[s..s + cols * 4]);
        }
    }

    /// Sub-image at `(x, y)` of the given size; must lie inside.
    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> RgbaImage {
        assert!(x + width <= self.width && y + height <= self.height, "crop out of bounds");
        let mut data = Vec::with_capacity(width as usize * height as usize * 4);
        for row in y..y + height {
            let s = (row as usize * self.width as usize + x as usize) * 4;
            data.extend_from_slice(&self.data[s..s + width as usize * 4]);
        }
        RgbaImage { width, height, data }
    }

    /// Mirror image about the vertical center line.
    pub fn flip_horizontal(&self) -> RgbaImage {
        let mut out = self.clone();
        let w = self.width as usize;
        for y in 0..self.height as usize {
            for x in 0..w {
                let s = (y * w + x) * 4;
                let d = (y * w + (w - 1 - x)) * 4;
                out.data[d..d + 4].copy_from_slice(&self.data[s..s + 4]);
            }
        }
        out
    }
}
