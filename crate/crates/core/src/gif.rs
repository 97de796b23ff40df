//! GIF89a animation encoder with a global median-cut palette.
//!
//! Layout: header, logical screen descriptor, 256-entry global color table,
//! NETSCAPE2.0 looping extension, then per frame a graphic control extension
//! (delay) and a full-canvas image with LZW data (minimum code size 8).

use std::collections::{BTreeMap, HashMap};

use crate::image::RgbaImage;

pub const PALETTE_SIZE: usize = 256;
const MIN_CODE_SIZE: u8 = 8;
const MAX_CODE: u16 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GifError {
    #[error("animation has no frames")]
    NoFrames,
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    SizeMismatch {
        index: usize,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("GIF dimensions are limited to 65535, got {0}×{1}")]
    TooLarge(u32, u32),
}

struct ColorBox {
    colors: Vec<([u8; 3], u64)>,
}

impl ColorBox {
    fn channel_range(&self, c: usize) -> u8 {
        let (lo, hi) = self
            .colors
            .iter()
            .fold((u8::MAX, u8::MIN), |(lo, hi), (rgb, _)| (lo.min(rgb[c]), hi.max(rgb[c])));
        hi.saturating_sub(lo)
    }

    /// Widest channel and its range.
    fn widest(&self) -> (usize, u8) {
        (0..3)
            .map(|c| (c, self.channel_range(c)))
            .fold((0, 0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    fn population(&self) -> u64 {
        self.colors.iter().map(|(_, n)| n).sum()
    }

    fn mean(&self) -> [u8; 3] {
        let total = self.population().max(1);
        let mut acc = [0u64; 3];
        for (rgb, n) in &self.colors {
            for c in 0..3 {
                acc[c] += rgb[c] as u64 * n;
            }
        }
        acc.map(|s| ((s + total / 2) / total) as u8)
    }

    /// Splits at the population median along the widest channel.
    fn split(mut self) -> (ColorBox, ColorBox) {
        let (axis, _) = self.widest();
        self.colors.sort_by_key(|(rgb, _)| (rgb[axis], rgb[(axis + 1) % 3], rgb[(axis + 2) % 3]));
        let half = self.population().div_ceil(2);
        let mut acc = 0;
        let mut cut = self.colors.len() - 1;
        for (i, (_, n)) in self.colors.iter().enumerate() {
            acc += n;
            if acc >= half {
                cut = i + 1;
                break;
            }
        }
        let cut = cut.clamp(1, self.colors.len() - 1);
        let upper = self.colors.split_off(cut);
        (self, ColorBox { colors: upper })
    }
}

/// Median-cut palette over a color histogram.
///
/// With at most `max_colors` distinct colors the palette is exactly those
/// colors in sorted order. Otherwise boxes are split, widest range first,
/// until `max_colors` boxes exist; each contributes its count-weighted mean.
pub fn median_cut_palette(histogram: &BTreeMap<[u8; 3], u64>, max_colors: usize) -> Vec<[u8; 3]> {
    if histogram.len() <= max_colors {
        return histogram.keys().copied().collect();
    }
    let mut boxes = vec![ColorBox {
        colors: histogram.iter().map(|(&c, &n)| (c, n)).collect(),
    }];
    while boxes.len() < max_colors {
        let pick = boxes
            .iter()
            .enumerate()
            .filter(|(_, b)| b.colors.len() > 1)
            .max_by_key(|(i, b)| (b.widest().1, b.population(), std::cmp::Reverse(*i)))
            .map(|(i, _)| i);
        let Some(i) = pick else { break };
        let (a, b) = boxes.swap_remove(i).split();
        boxes.push(a);
        boxes.push(b);
    }
    let mut palette: Vec<[u8; 3]> = boxes.iter().map(ColorBox::mean).collect();
    palette.sort_unstable();
    palette.dedup();
    palette
}

fn nearest(palette: &[[u8; 3]], c: [i32; 3]) -> u8 {
    let mut best = (i32::MAX, 0usize);
    for (i, p) in palette.iter().enumerate() {
        let d: i32 = (0..3).map(|k| (p[k] as i32 - c[k]).pow(2)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1 as u8
}

const BAYER4: [[i32; 4]; 4] = [[0, 8, 2, 10], [12, 4, 14, 6], [3, 11, 1, 9], [15, 7, 13, 5]];

/// Palette plus one index buffer per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedFrames {
    pub width: u32,
    pub height: u32,
    pub palette: Vec<[u8; 3]>,
    pub frames: Vec<Vec<u8>>,
}

/// Builds one global palette for all frames and maps every pixel to it.
/// Alpha is ignored. `dither` applies 4×4 ordered dithering before mapping.
pub fn quantize_frames(frames: &[RgbaImage], dither: bool) -> Result<QuantizedFrames, GifError> {
    let first = frames.first().ok_or(GifError::NoFrames)?;
    let (w, h) = (first.width, first.height);
    if w > u16::MAX as u32 || h > u16::MAX as u32 {
        return Err(GifError::TooLarge(w, h));
    }
    for (index, f) in frames.iter().enumerate() {
        if (f.width, f.height) != (w, h) {
            return Err(GifError::SizeMismatch {
                index,
                expected: (w, h),
                found: (f.width, f.height),
            });
        }
    }
    let mut hist = BTreeMap::new();
    for f in frames {
        for px in f.data.chunks_exact(4) {
            *hist.entry([px[0], px[1], px[2]]).or_insert(0u64) += 1;
        }
    }
    let palette = median_cut_palette(&hist, PALETTE_SIZE);
    let exact = hist.len() <= PALETTE_SIZE;
    // Spread of the dither offsets, in 8-bit units.
    let spread = 256 / palette.len().max(2).ilog2().max(1) as i32;

    let mut cache: HashMap<[i32; 3], u8> = HashMap::new();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let mut idx = Vec::with_capacity(w as usize * h as usize);
        for (i, px) in f.data.chunks_exact(4).enumerate() {
            let mut c = [px[0] as i32, px[1] as i32, px[2] as i32];
            if dither && !exact {
                let (x, y) = (i % w as usize, i / w as usize);
                let t = (BAYER4[y % 4][x % 4] * 2 + 1 - 16) * spread / 32;
                c = c.map(|v| (v + t).clamp(0, 255));
            }
            idx.push(*cache.entry(c).or_insert_with(|| nearest(&palette, c)));
        }
        out.push(idx);
    }
    Ok(QuantizedFrames {
        width: w,
        height: h,
        palette,
        frames: out,
    })
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    bits: u8,
}

impl BitWriter {
    fn write(&mut self, code: u16, width: u8) {
        self.acc |= (code as u32) << self.bits;
        self.bits += width;
        while self.bits >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.bits -= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.bits > 0 {
            self.out.push(self.acc as u8);
        }
        self.out
    }
}

/// GIF-flavoured variable-width LZW (LSB-first codes, no sub-blocking).
pub fn lzw_encode(indices: &[u8], min_code_size: u8) -> Vec<u8> {
    let clear: u16 = 1 << min_code_size;
    let eoi = clear + 1;
    let mut w = BitWriter {
        out: Vec::with_capacity(indices.len() / 2 + 16),
        acc: 0,
        bits: 0,
    };
    let mut code_size = min_code_size + 1;
    let mut next = eoi + 1;
    let mut dict: HashMap<u32, u16> = HashMap::new();
    w.write(clear, code_size);
    let Some((&first, rest)) = indices.split_first() else {
        w.write(eoi, code_size);
        return w.finish();
    };
    let mut prefix = first as u16;
    for &k in rest {
        let key = (prefix as u32) << 8 | k as u32;
        if let Some(&code) = dict.get(&key) {
            prefix = code;
            continue;
        }
        w.write(prefix, code_size);
        if next < MAX_CODE {
            dict.insert(key, next);
            next += 1;
            // The decoder adds its entry one code later, hence `>`.
            if next > (1 << code_size) && code_size < 12 {
                code_size += 1;
            }
        } else {
            w.write(clear, code_size);
            dict.clear();
            code_size = min_code_size + 1;
            next = eoi + 1;
        }
        prefix = k as u16;
    }
    w.write(prefix, code_size);
    w.write(eoi, code_size);
    w.finish()
}

fn push_sub_blocks(out: &mut Vec<u8>, data: &[u8]) {
    for block in data.chunks(255) {
        out.push(block.len() as u8);
        out.extend_from_slice(block);
    }
    out.push(0);
}

/// Serializes quantized frames as a looping GIF89a.
pub fn encode_gif(q: &QuantizedFrames, delay_cs: u16) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"GIF89a");
    out.extend_from_slice(&(q.width as u16).to_le_bytes());
    out.extend_from_slice(&(q.height as u16).to_le_bytes());
    // global table present, 8-bit color resolution, 2^(7+1) entries
    out.extend_from_slice(&[0xF7, 0, 0]);
    for i in 0..PALETTE_SIZE {
        out.extend_from_slice(&q.palette.get(i).copied().unwrap_or([0, 0, 0]));
    }
    // NETSCAPE2.0, loop count 0 = forever
    out.extend_from_slice(&[0x21, 0xFF, 0x0B]);
    out.extend_from_slice(b"NETSCAPE2.0");
    out.extend_from_slice(&[0x03, 0x01, 0x00, 0x00, 0x00]);
    for frame in &q.frames {
        let d = delay_cs.to_le_bytes();
        // disposal 1 (leave in place), no transparency
        out.extend_from_slice(&[0x21, 0xF9, 0x04, 0x04, d[0], d[1], 0x00, 0x00]);
        out.push(0x2C);
        out.extend_from_slice(&[0, 0, 0, 0]);
        out.extend_from_slice(&(q.width as u16).to_le_bytes());
        out.extend_from_slice(&(q.height as u16).to_le_bytes());
        out.push(0x00);
        out.push(MIN_CODE_SIZE);
        push_sub_blocks(&mut out, &lzw_encode(frame, MIN_CODE_SIZE));
    }
    out.push(0x3B);
    out
}

/// Quantizes and encodes RGBA frames in one step.
pub fn encode_animation(frames: &[RgbaImage], delay_cs: u16, dither: bool) -> Result<Vec<u8>, GifError> {
    Ok(encode_gif(&quantize_frames(frames, dither)?, delay_cs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_palette_when_few_colors() {
        let hist: BTreeMap<[u8; 3], u64> = [([3, 2, 1], 5), ([0, 0, 0], 1)].into();
        assert_eq!(median_cut_palette(&hist, 256), vec![[0, 0, 0], [3, 2, 1]]);
    }

    #[test]
    fn median_cut_respects_budget() {
        let mut hist = BTreeMap::new();
        for r in 0..32u8 {
            for g in 0..32u8 {
                hist.insert([r * 8, g * 8, 100], 1 + r as u64);
            }
        }
        let p = median_cut_palette(&hist, 16);
        assert!(p.len() <= 16 && p.len() >= 12, "{}", p.len());
        assert!(p.iter().all(|c| c[2] == 100));
    }

    #[test]
    fn median_split_balances_population() {
        let b = ColorBox {
            colors: vec![([0, 0, 0], 10), ([10, 0, 0], 10), ([20, 0, 0], 10), ([200, 0, 0], 10)],
        };
        let (lo, hi) = b.split();
        assert_eq!(lo.colors.len(), 2);
        assert_eq!(hi.colors.len(), 2);
    }

    #[test]
    fn lzw_handles_long_runs_and_resets() {
        // Enough varied input to fill the 4096-entry table several times.
        let mut data = Vec::new();
        let mut x: u32 = 12345;
        for _ in 0..200_000 {
            x = x.wrapping_mul(1_103_515_245).wrapping_add(12345);
            data.push((x >> 16) as u8);
        }
        let encoded = lzw_encode(&data, 8);
        let decoded = reference_lzw_decode(&encoded, 8);
        assert_eq!(decoded, data);
        let zeros = vec![0u8; 100_000];
        assert_eq!(reference_lzw_decode(&lzw_encode(&zeros, 8), 8), zeros);
        assert_eq!(reference_lzw_decode(&lzw_encode(&[], 8), 8), Vec::<u8>::new());
    }

    /// Straightforward table-based GIF LZW decoder used as a test oracle.
    fn reference_lzw_decode(data: &[u8], min: u8) -> Vec<u8> {
        let clear = 1u16 << min;
        let eoi = clear + 1;
        let mut table: Vec<Vec<u8>> = Vec::new();
        let reset = |t: &mut Vec<Vec<u8>>| {
            t.clear();
            for i in 0..clear {
                t.push(vec![i as u8]);
            }
            t.push(vec![]);
            t.push(vec![]);
        };
        reset(&mut table);
        let mut size = min + 1;
        let (mut acc, mut bits, mut pos) = (0u32, 0u8, 0usize);
        let mut prev: Option<Vec<u8>> = None;
        let mut out = Vec::new();
        loop {
            while bits < size {
                acc |= (data[pos] as u32) << bits;
                pos += 1;
                bits += 8;
            }
            let code = (acc & ((1 << size) - 1)) as u16;
            acc >>= size;
            bits -= size;
            if code == clear {
                reset(&mut table);
                size = min + 1;
                prev = None;
                continue;
            }
            if code == eoi {
                return out;
            }
            let entry = if (code as usize) < table.len() {
                table[code as usize].clone()
            } else {
                let p = prev.clone().expect("KwKwK needs a previous code");
                let mut e = p.clone();
                e.push(p[0]);
                e
            };
            out.extend_from_slice(&entry);
            if let Some(p) = prev {
                if table.len() < 4096 {
                    let mut e = p;
                    e.push(entry[0]);
                    table.push(e);
                    if table.len() == (1 << size) && size < 12 {
                        size += 1;
                    }
                }
            }
            prev = Some(entry);
        }
    }

    #[test]
    fn frame_size_checks() {
        assert_eq!(quantize_frames(&[], false), Err(GifError::NoFrames));
        let a = RgbaImage::filled(2, 2, [0, 0, 0, 255]);
        let b = RgbaImage::filled(3, 2, [0, 0, 0, 255]);
        assert!(matches!(quantize_frames(&[a, b], false), Err(GifError::SizeMismatch { index: 1, .. })));
    }
}
