use std::fmt;
use std::str::FromStr;

use crate::geom::{Aabb, Vec3};
use crate::scalar::Real;

use super::RenderError;

/// Margin added on each side when framing a scene.
const FRAME_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedView {
    CorticalOuterLeft,
    CorticalOuterRight,
    CorticalInnerLeft,
    CorticalInnerRight,
    Subcortical,
    Top,
    Bottom,
}

impl NamedView {
    pub const ALL: [NamedView; 7] = [
        NamedView::CorticalOuterLeft,
        NamedView::CorticalOuterRight,
        NamedView::CorticalInnerLeft,
        NamedView::CorticalInnerRight,
        NamedView::Subcortical,
        NamedView::Top,
        NamedView::Bottom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedView::CorticalOuterLeft => "cortical-outer-left",
            NamedView::CorticalOuterRight => "cortical-outer-right",
            NamedView::CorticalInnerLeft => "cortical-inner-left",
            NamedView::CorticalInnerRight => "cortical-inner-right",
            NamedView::Subcortical => "subcortical",
            NamedView::Top => "top",
            NamedView::Bottom => "bottom",
        }
    }

    pub fn is_inner(self) -> bool {
        matches!(self, NamedView::CorticalInnerLeft | NamedView::CorticalInnerRight)
    }

    /// Unit view direction and screen-up vector.
    pub fn orientation<S: Real>(self) -> (Vec3<S>, Vec3<S>) {
        let v = |x: f64, y: f64, z: f64| Vec3::from_f64(x, y, z);
        match self {
            NamedView::CorticalOuterRight | NamedView::Subcortical | NamedView::CorticalInnerLeft => {
                (v(-1.0, 0.0, 0.0), v(0.0, 0.0, 1.0))
            }
            NamedView::CorticalOuterLeft | NamedView::CorticalInnerRight => {
                (v(1.0, 0.0, 0.0), v(0.0, 0.0, 1.0))
            }
            NamedView::Top => (v(0.0, 0.0, -1.0), v(0.0, 1.0, 0.0)),
            NamedView::Bottom => (v(0.0, 0.0, 1.0), v(0.0, 1.0, 0.0)),
        }
    }
}

impl fmt::Display for NamedView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown view `{0}`; allowed: cortical-outer-left, cortical-outer-right, cortical-inner-left, cortical-inner-right, subcortical, top, bottom (the `cortical-` prefix is optional)")]
pub struct ParseViewError(pub String);

impl FromStr for NamedView {
    type Err = ParseViewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let short = s.strip_prefix("cortical-").unwrap_or(s);
        Ok(match short {
            "outer-left" => NamedView::CorticalOuterLeft,
            "outer-right" => NamedView::CorticalOuterRight,
            "inner-left" => NamedView::CorticalInnerLeft,
            "inner-right" => NamedView::CorticalInnerRight,
            "subcortical" if s == short => NamedView::Subcortical,
            "top" if s == short => NamedView::Top,
            "bottom" if s == short => NamedView::Bottom,
            _ => return Err(ParseViewError(s.to_owned())),
        })
    }
}

/// Orthographic camera. `right = forward × up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera<S> {
    pub eye: Vec3<S>,
    pub forward: Vec3<S>,
    pub up: Vec3<S>,
    pub right: Vec3<S>,
    pub half_width: S,
    pub half_height: S,
    pub near: S,
    pub far: S,
}

impl<S: Real> Camera<S> {
    /// Camera looking along `forward` that frames `bounds` with a 5% margin.
    pub fn framing(forward: Vec3<S>, up: Vec3<S>, bounds: &Aabb<S>) -> Self {
        let right = forward.cross(up);
        let center = bounds.center();
        let extent = |axis: Vec3<S>| {
            bounds
                .corners()
                .iter()
                .map(|&c| (c - center).dot(axis).abs())
                .fold(S::zero(), S::max)
        };
        let grow = S::one() + S::lit(FRAME_MARGIN);
        let (mut hw, mut hh) = (extent(right) * grow, extent(up) * grow);
        let fallback = hw.max(hh).max(S::lit(1e-6));
        if !(hw > S::zero()) {
            hw = fallback;
        }
        if !(hh > S::zero()) {
            hh = fallback;
        }
        let depth = extent(forward) * grow + hw.max(hh) * S::lit(FRAME_MARGIN) + S::lit(1e-6);
        Self {
            eye: center - forward * depth,
            forward,
            up,
            right,
            half_width: hw,
            half_height: hh,
            near: S::zero(),
            far: depth + depth,
        }
    }

    /// Widens one half-extent so that `half_width / half_height == width / height`.
    pub fn fit_aspect(mut self, width: u32, height: u32) -> Self {
        let aspect = S::lit(width as f64) / S::lit(height as f64);
        if self.half_width / self.half_height < aspect {
            self.half_width = self.half_height * aspect;
        } else {
            self.half_height = self.half_width / aspect;
        }
        self
    }

    pub fn view_center(&self) -> Vec3<S> {
        self.eye
    }
}

/// Camera for a named view, framing `scene_bounds`.
pub fn named_view_camera<S: Real>(
    view: NamedView,
    scene_bounds: Option<&Aabb<S>>,
) -> Result<Camera<S>, RenderError> {
    let bounds = scene_bounds
        .filter(|b| b.min.is_finite() && b.max.is_finite())
        .ok_or(RenderError::EmptyScene)?;
    let (forward, up) = view.orientation();
    Ok(Camera::framing(forward, up, bounds))
}

/// Orthographic projection to `(screen x, screen y, depth)`, y pointing down.
#[inline]
pub fn project_vertex<S: Real>(p: Vec3<S>, cam: &Camera<S>, width: u32, height: u32) -> [S; 3] {
    let d = p - cam.eye;
    let half = S::lit(0.5);
    let cx = d.dot(cam.right);
    let cy = d.dot(cam.up);
    [
        (cx / cam.half_width * half + half) * S::lit(width as f64),
        (half - cy / cam.half_height * half) * S::lit(height as f64),
        d.dot(cam.forward),
    ]
}
