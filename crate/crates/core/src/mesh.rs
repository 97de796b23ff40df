//! Indexed triangle meshes.

use crate::geom::{Aabb, Vec3};
use crate::scalar::Real;

/// Normal assigned to vertices that no non-degenerate triangle touches.
pub fn fallback_normal<S: Real>() -> Vec3<S> {
    Vec3::new(S::zero(), S::zero(), S::one())
}

/// Indexed triangle mesh in atlas space (millimeters).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh<S> {
    pub vertices: Vec<Vec3<S>>,
    /// Per-vertex unit normals; either empty-as-`None` or one per vertex.
    pub normals: Option<Vec<Vec3<S>>>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index}, but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("mesh has {vertices} vertices but {normals} normals")]
    NormalCount { vertices: usize, normals: usize },
}

impl<S: Real> Mesh<S> {
    pub fn new(vertices: Vec<Vec3<S>>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            normals: None,
            triangles,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index,
                    vertex_count: n,
                });
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(MeshError::NormalCount {
                    vertices: n,
                    normals: normals.len(),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn triangle_positions(&self, tri: [u32; 3]) -> [Vec3<S>; 3] {
        tri.map(|i| self.vertices[i as usize])
    }

    /// Unnormalized face normal (twice the area in magnitude).
    #[inline]
    pub fn face_cross(&self, tri: [u32; 3]) -> Vec3<S> {
        let [a, b, c] = self.triangle_positions(tri);
        (b - a).cross(c - a)
    }

    pub fn surface_area(&self) -> S {
        let half = S::lit(0.5);
        self.triangles
            .iter()
            .fold(S::zero(), |acc, &t| acc + self.face_cross(t).length() * half)
    }

    pub fn bounds(&self) -> Option<Aabb<S>> {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Bounds over vertices that some triangle references.
    pub fn triangle_bounds(&self) -> Option<Aabb<S>> {
        Aabb::from_points(
            self.triangles
                .iter()
                .flat_map(|t| t.iter().map(|&i| self.vertices[i as usize])),
        )
    }

    /// Returns a copy whose normals are the area-weighted average of incident face normals.
    ///
    /// Accumulating the raw cross product weights each face by its area; degenerate
    /// faces contribute zero. Vertices left with a zero sum get [`fallback_normal`].
    pub fn with_vertex_normals(&self) -> Self {
        let mut acc = vec![Vec3::zero(); self.vertices.len()];
        for &tri in &self.triangles {
            let n = self.face_cross(tri);
            for i in tri {
                acc[i as usize] += n;
            }
        }
        let normals = acc
            .into_iter()
            .map(|n| n.try_normalize().unwrap_or_else(fallback_normal))
            .collect();
        Self {
            vertices: self.vertices.clone(),
            normals: Some(normals),
            triangles: self.triangles.clone(),
        }
    }

    pub fn cast<T: Real>(&self) -> Mesh<T> {
        Mesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| n.cast()).collect()),
            triangles: self.triangles.clone(),
        }
    }
}

/// Free-function form of [`Mesh::with_vertex_normals`].
pub fn compute_vertex_normals<S: Real>(mesh: &Mesh<S>) -> Mesh<S> {
    mesh.with_vertex_normals()
}
