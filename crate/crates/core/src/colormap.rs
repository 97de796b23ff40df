//! Anchor-color gradients and sRGB conversions.

use crate::scalar::Real;

/// Linear-light RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rgb<S> {
    pub r: S,
    pub g: S,
    pub b: S,
}

impl<S: Real> Rgb<S> {
    pub const fn new(r: S, g: S, b: S) -> Self {
        Self { r, g, b }
    }

    pub fn splat(v: S) -> Self {
        Self::new(v, v, v)
    }

    pub fn to_array(self) -> [S; 3] {
        [self.r, self.g, self.b]
    }

    pub fn map(self, f: impl Fn(S) -> S) -> Self {
        Self::new(f(self.r), f(self.g), f(self.b))
    }

    pub fn scale(self, s: S) -> Self {
        self.map(|c| c * s)
    }

    pub fn lerp(self, other: Self, f: S) -> Self {
        let g = S::one() - f;
        Self::new(
            g * self.r + f * other.r,
            g * self.g + f * other.g,
            g * self.b + f * other.b,
        )
    }

    pub fn in_unit_range(self) -> bool {
        self.to_array().iter().all(|&c| c >= S::zero() && c <= S::one())
    }

    /// Encodes to 8-bit sRGB.
    pub fn to_srgb8(self) -> [u8; 3] {
        self.to_array().map(linear_to_srgb8)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ColorError {
    #[error("`{0}` is not a #RRGGBB color")]
    BadColor(String),
    #[error("gradient needs at least 2 anchors, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor {0} has a channel outside [0, 1]")]
    AnchorOutOfRange(usize),
    #[error("value {value} outside [0, {k}]")]
    OutOfRange { value: f64, k: usize },
}

/// sRGB transfer function, decoding direction.
pub fn srgb_to_linear<S: Real>(c: S) -> S {
    if c <= S::lit(0.04045) {
        c / S::lit(12.92)
    } else {
        ((c + S::lit(0.055)) / S::lit(1.055)).powf(S::lit(2.4))
    }
}

/// sRGB transfer function, encoding direction.
pub fn linear_to_srgb<S: Real>(c: S) -> S {
    if c <= S::lit(0.0031308) {
        c * S::lit(12.92)
    } else {
        S::lit(1.055) * c.powf(S::lit(1.0 / 2.4)) - S::lit(0.055)
    }
}

/// Linear channel to an sRGB byte, clamping to `[0, 1]` first.
pub fn linear_to_srgb8<S: Real>(c: S) -> u8 {
    let c = if c.is_nan() { S::zero() } else { c.clamp01() };
    let v = (linear_to_srgb(c) * S::lit(255.0)).round();
    v.to_u8().unwrap_or(if v > S::zero() { 255 } else { 0 })
}

/// Decodes `#RRGGBB` (sRGB) into linear RGB.
pub fn parse_hex_color<S: Real>(text: &str) -> Result<Rgb<S>, ColorError> {
    let bad = || ColorError::BadColor(text.to_owned());
    let hex = text.strip_prefix('#').ok_or_else(bad)?;
    if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(bad());
    }
    let channel = |i: usize| {
        let byte = u8::from_str_radix(&hex[i..i + 2], 16).expect("validated hex");
        srgb_to_linear(S::lit(byte as f64) / S::lit(255.0))
    };
    Ok(Rgb::new(channel(0), channel(2), channel(4)))
}

/// Default anchors: light grey baseline, then yellow, orange, red.
pub const DEFAULT_GRADIENT: [&str; 4] = ["#CCCCCC", "#FFF500", "#FF7800", "#FF0000"];

/// K+1 linear-RGB anchors; values in `[0, K]` blend between neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorGradient<S> {
    anchors: Vec<Rgb<S>>,
}

impl<S: Real> ColorGradient<S> {
    pub fn new(anchors: Vec<Rgb<S>>) -> Result<Self, ColorError> {
        if anchors.len() < 2 {
            return Err(ColorError::TooFewAnchors(anchors.len()));
        }
        if let Some(i) = anchors.iter().position(|a| !a.in_unit_range()) {
            return Err(ColorError::AnchorOutOfRange(i));
        }
        Ok(Self { anchors })
    }

    pub fn from_hex<T: AsRef<str>>(colors: &[T]) -> Result<Self, ColorError> {
        let anchors = colors
            .iter()
            .map(|c| parse_hex_color(c.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(anchors)
    }

    pub fn default_gradient() -> Self {
        Self::from_hex(&DEFAULT_GRADIENT).expect("default gradient is valid")
    }

    /// Anchor count minus one.
    pub fn k(&self) -> usize {
        self.anchors.len() - 1
    }

    pub fn anchors(&self) -> &[Rgb<S>] {
        &self.anchors
    }

    /// Maps `v ∈ [0, K]` to a color.
    pub fn value_to_color(&self, v: S) -> Result<Rgb<S>, ColorError> {
        let k = self.k();
        let k_s = S::lit(k as f64);
        if !(v >= S::zero() && v <= k_s) {
            return Err(ColorError::OutOfRange {
                value: v.to_f64_lossy(),
                k,
            });
        }
        let i = v.floor().to_usize().unwrap_or(0).min(k - 1);
        let f = v - S::lit(i as f64);
        Ok(self.anchors[i].lerp(self.anchors[i + 1], f))
    }
}

/// Free-function form of [`ColorGradient::value_to_color`].
pub fn value_to_color<S: Real>(v: S, g: &ColorGradient<S>) -> Result<Rgb<S>, ColorError> {
    g.value_to_color(v)
}
