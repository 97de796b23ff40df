//! Small fixed-size vector and affine types.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Vec3<S> {
    #[inline]
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(S::lit(x), S::lit(y), S::lit(z))
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length(self) -> S {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a zero (or non-finite) vector.
    pub fn try_normalize(self) -> Option<Self> {
        let len = self.length();
        if len > S::zero() && len.is_finite() {
            Some(self / len)
        } else {
            None
        }
    }

    pub fn min_by_component(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_by_component(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    pub fn cast<T: Real>(self) -> Vec3<T> {
        Vec3::new(
            T::lit(self.x.to_f64_lossy()),
            T::lit(self.y.to_f64_lossy()),
            T::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<S: Real> Add for Vec3<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Real> AddAssign for Vec3<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Real> Sub for Vec3<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Real> Mul<S> for Vec3<S> {
    type Output = Self;
    #[inline]
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<S: Real> Div<S> for Vec3<S> {
    type Output = Self;
    #[inline]
    fn div(self, s: S) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<S: Real> Neg for Vec3<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S> Index<usize> for Vec3<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<S> {
    pub min: Vec3<S>,
    pub max: Vec3<S>,
}

impl<S: Real> Aabb<S> {
    pub fn new(min: Vec3<S>, max: Vec3<S>) -> Self {
        Self { min, max }
    }

    pub fn from_points<I: IntoIterator<Item = Vec3<S>>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Self::new(first, first), |b, p| b.including(p)))
    }

    pub fn including(self, p: Vec3<S>) -> Self {
        Self::new(self.min.min_by_component(p), self.max.max_by_component(p))
    }

    pub fn union(self, o: Self) -> Self {
        Self::new(self.min.min_by_component(o.min), self.max.max_by_component(o.max))
    }

    pub fn center(&self) -> Vec3<S> {
        (self.min + self.max) * S::lit(0.5)
    }

    pub fn diagonal(&self) -> S {
        (self.max - self.min).length()
    }

    pub fn corners(&self) -> [Vec3<S>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }
}

/// 3×4 affine map `v ↦ A·v + b`, stored row-major as `[a00 a01 a02 b0, a10 .. b1, a20 .. b2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine3<S> {
    pub rows: [[S; 4]; 3],
}

impl<S: Real> Affine3<S> {
    pub fn identity() -> Self {
        let (o, z) = (S::one(), S::zero());
        Self {
            rows: [[o, z, z, z], [z, o, z, z], [z, z, o, z]],
        }
    }

    /// Builds from 12 row-major numbers.
    pub fn from_row_major(m: [S; 12]) -> Self {
        Self {
            rows: [
                [m[0], m[1], m[2], m[3]],
                [m[4], m[5], m[6], m[7]],
                [m[8], m[9], m[10], m[11]],
            ],
        }
    }

    pub fn to_row_major(&self) -> [S; 12] {
        let r = &self.rows;
        [
            r[0][0], r[0][1], r[0][2], r[0][3], r[1][0], r[1][1], r[1][2], r[1][3], r[2][0],
            r[2][1], r[2][2], r[2][3],
        ]
    }

    pub fn scale(s: S) -> Self {
        let mut t = Self::identity();
        for i in 0..3 {
            t.rows[i][i] = s;
        }
        t
    }

    pub fn translation(d: Vec3<S>) -> Self {
        let mut t = Self::identity();
        t.rows[0][3] = d.x;
        t.rows[1][3] = d.y;
        t.rows[2][3] = d.z;
        t
    }

    /// Rotation about +z by `angle` radians.
    pub fn rotation_z(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        let z = S::zero();
        Self {
            rows: [[c, -s, z, z], [s, c, z, z], [z, z, S::one(), z]],
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn determinant(&self) -> S {
        let m = &self.rows;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[inline]
    pub fn transform_point(&self, p: Vec3<S>) -> Vec3<S> {
        let m = &self.rows;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    #[inline]
    pub fn transform_vector(&self, v: Vec3<S>) -> Vec3<S> {
        let m = &self.rows;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Linear block inverse via the adjugate; `None` when `|det| <= eps`.
    fn linear_inverse(&self, eps: S) -> Option<[[S; 3]; 3]> {
        let det = self.determinant();
        if det.abs() <= eps || !det.is_finite() {
            return None;
        }
        let m = &self.rows;
        let inv_det = S::one() / det;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        Some([
            [
                cof(1, 2, 1, 2) * inv_det,
                -cof(0, 2, 1, 2) * inv_det,
                cof(0, 1, 1, 2) * inv_det,
            ],
            [
                -cof(1, 2, 0, 2) * inv_det,
                cof(0, 2, 0, 2) * inv_det,
                -cof(0, 1, 0, 2) * inv_det,
            ],
            [
                cof(1, 2, 0, 1) * inv_det,
                -cof(0, 2, 0, 1) * inv_det,
                cof(0, 1, 0, 1) * inv_det,
            ],
        ])
    }

    pub fn inverse(&self, eps: S) -> Option<Self> {
        let inv = self.linear_inverse(eps)?;
        let b = Vec3::new(self.rows[0][3], self.rows[1][3], self.rows[2][3]);
        let mut out = Self::identity();
        for (i, row) in inv.iter().enumerate() {
            out.rows[i][..3].copy_from_slice(row);
            out.rows[i][3] = -(row[0] * b.x + row[1] * b.y + row[2] * b.z);
        }
        Some(out)
    }

    /// Inverse-transpose of the linear block, used for normals.
    pub fn normal_matrix(&self, eps: S) -> Option<[[S; 3]; 3]> {
        let inv = self.linear_inverse(eps)?;
        let mut t = inv;
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = inv[j][i];
            }
        }
        Some(t)
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &Self) -> Self {
        let a = &self.rows;
        let b = &first.rows;
        let mut out = Self::identity();
        for (i, arow) in a.iter().enumerate() {
            for j in 0..4 {
                let mut acc = if j == 3 { arow[3] } else { S::zero() };
                for (k, brow) in b.iter().enumerate() {
                    acc += arow[k] * brow[j];
                }
                out.rows[i][j] = acc;
            }
        }
        out
    }
}

pub(crate) fn apply3<S: Real>(m: &[[S; 3]; 3], v: Vec3<S>) -> Vec3<S> {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_inverse_round_trip() {
        let t = Affine3::<f64>::from_row_major([
            2.0, 0.5, 0.0, 1.0, 0.0, 1.5, -0.3, -2.0, 0.1, 0.0, 3.0, 0.5,
        ]);
        let inv = t.inverse(1e-9).unwrap();
        let id = inv.compose(&t);
        for i in 0..3 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((id.rows[i][j] - expected).abs() < 1e-12, "{id:?}");
            }
        }
    }

    #[test]
    fn singular_has_no_inverse() {
        let t = Affine3::<f64>::scale(0.0);
        assert!(t.inverse(1e-9).is_none());
    }

    #[test]
    fn compose_order() {
        let s = Affine3::<f64>::scale(2.0);
        let tr = Affine3::translation(Vec3::new(1.0, 0.0, 0.0));
        // translate then scale
        let p = s.compose(&tr).transform_point(Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(p, Vec3::new(4.0, 2.0, 2.0));
    }
}
