//! Minimal PNG writer: 8-bit RGBA, non-interlaced, sRGB chunk.

use std::io::Write as _;
use std::path::Path;

use flate2::write::ZlibEncoder;
use flate2::Compression;

use crate::image::RgbaImage;
use crate::render::Framebuffer;
use crate::scalar::Real;

const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

fn chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    let mut crc = crc32fast::Hasher::new();
    crc.update(kind);
    crc.update(data);
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    out.extend_from_slice(&crc.finalize().to_be_bytes());
}

/// Encodes an RGBA image. Every row uses the `Sub` filter.
pub fn encode_png(img: &RgbaImage) -> Vec<u8> {
    let stride = img.width as usize * 4;
    let mut filtered = Vec::with_capacity((stride + 1) * img.height as usize);
    for row in img.data.chunks_exact(stride.max(1)).take(img.height as usize) {
        filtered.push(1);
        for (i, &b) in row.iter().enumerate() {
            let left = if i >= 4 { row[i - 4] } else { 0 };
            filtered.push(b.wrapping_sub(left));
        }
    }
    let mut z = ZlibEncoder::new(Vec::new(), Compression::default());
    z.write_all(&filtered).expect("in-memory write");
    let idat = z.finish().expect("in-memory write");

    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&img.width.to_be_bytes());
    ihdr.extend_from_slice(&img.height.to_be_bytes());
    // bit depth 8, color type 6 (RGBA), deflate, adaptive filtering, no interlace
    ihdr.extend_from_slice(&[8, 6, 0, 0, 0]);

    let mut out = Vec::with_capacity(idat.len() + 64);
    out.extend_from_slice(&SIGNATURE);
    chunk(&mut out, b"IHDR", &ihdr);
    chunk(&mut out, b"sRGB", &[0]);
    chunk(&mut out, b"IDAT", &idat);
    chunk(&mut out, b"IEND", &[]);
    out
}

/// sRGB-encodes a framebuffer and writes it as PNG.
pub fn write_png<S: Real>(fb: &Framebuffer<S>, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, encode_png(&RgbaImage::from_framebuffer(fb)))
}
