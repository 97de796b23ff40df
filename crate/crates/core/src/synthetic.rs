//! A small, exactly left/right symmetric test atlas built from ellipsoids.
//!
//! Right-hemisphere meshes are the left ones mirrored through `x = 0` with
//! the same vertex and triangle order, so renders of swapped data are exact
//! mirror images.

use std::path::{Path, PathBuf};

use crate::atlas::{AtlasError, AtlasManifest, Hemisphere, RegionEntry, StructureClass};
use crate::geom::{Affine3, Vec3};
use crate::mesh::Mesh;
use crate::ply::{write_ply, PlyFormat};

pub const ATLAS_ID: &str = "synthetic";

pub struct SyntheticRegion {
    pub name: &'static str,
    pub class: StructureClass,
    /// Left-hemisphere center; x < 0.
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

pub const REGIONS: [SyntheticRegion; 6] = [
    SyntheticRegion {
        name: "frontal",
        class: StructureClass::Cortical,
        center: [-33.7, 38.3, 18.1],
        radii: [27.9, 34.2, 31.3],
    },
    SyntheticRegion {
        name: "parietal",
        class: StructureClass::Cortical,
        center: [-31.9, -24.6, 36.7],
        radii: [26.3, 29.1, 24.8],
    },
    SyntheticRegion {
        name: "temporal",
        class: StructureClass::Cortical,
        center: [-46.2, -6.1, -14.3],
        radii: [17.7, 36.4, 17.2],
    },
    SyntheticRegion {
        name: "occipital",
        class: StructureClass::Cortical,
        center: [-27.3, -68.9, 9.4],
        radii: [22.1, 19.6, 23.3],
    },
    SyntheticRegion {
        name: "thalamus",
        class: StructureClass::Subcortical,
        center: [-12.3, -13.7, 6.2],
        radii: [7.1, 12.3, 8.9],
    },
    SyntheticRegion {
        name: "hippocampus",
        class: StructureClass::Subcortical,
        center: [-26.6, -22.4, -12.8],
        radii: [6.3, 17.9, 6.7],
    },
];

pub const SEGMENTS: u32 = 32;
pub const RINGS: u32 = 16;

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Closed, outward-facing UV ellipsoid; coordinates are rounded to `f32`
/// so the mesh survives a PLY round trip unchanged.
pub fn ellipsoid_mesh(center: [f64; 3], radii: [f64; 3], segments: u32, rings: u32) -> Mesh<f64> {
    assert!(segments >= 3 && rings >= 2);
    let point = |x: f64, y: f64, z: f64| {
        Vec3::new(
            round_f32(center[0] + radii[0] * x),
            round_f32(center[1] + radii[1] * y),
            round_f32(center[2] + radii[2] * z),
        )
    };
    let mut vertices = vec![point(0.0, 0.0, 1.0)];
    for r in 1..rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = std::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(point(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    let south = vertices.len() as u32;
    vertices.push(point(0.0, 0.0, -1.0));

    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + s % segments;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b) = (ring(r, s), ring(r, s + 1));
            let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for s in 0..segments {
        triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    Mesh::new(vertices, triangles)
}

/// Reflection through `x = 0`, keeping outward orientation.
pub fn mirror_x(mesh: &Mesh<f64>) -> Mesh<f64> {
    Mesh {
        vertices: mesh.vertices.iter().map(|v| Vec3::new(-v.x, v.y, v.z)).collect(),
        normals: mesh
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| Vec3::new(-n.x, n.y, n.z)).collect()),
        triangles: mesh.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
    }
}

/// Region entries with their meshes, in manifest order (lh then rh per region).
pub fn atlas_meshes() -> Vec<(RegionEntry, Mesh<f64>)> {
    let mut out = Vec::new();
    for r in &REGIONS {
        let left = ellipsoid_mesh(r.center, r.radii, SEGMENTS, RINGS);
        let right = mirror_x(&left);
        for (hemisphere, mesh) in [(Hemisphere::Left, left), (Hemisphere::Right, right)] {
            let region_id = format!("{}{}", r.name, hemisphere.suffix());
            out.push((
                RegionEntry {
                    mesh_path: PathBuf::from(format!("{region_id}.ply")),
                    region_id,
                    hemisphere,
                    structure_class: r.class,
                    local_transform: None,
                },
                mesh,
            ));
        }
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AtlasError + '_ {
    move |source| AtlasError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_manifest(dir: &Path, manifest: &AtlasManifest) -> Result<(), AtlasError> {
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).map_err(io_err(&path))
}

/// Writes the per-hemisphere atlas (binary PLYs + `manifest.json`) to `dir`.
pub fn write_atlas(dir: &Path) -> Result<AtlasManifest, AtlasError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut regions = Vec::new();
    for (entry, mesh) in atlas_meshes() {
        let path = dir.join(&entry.mesh_path);
        std::fs::write(&path, write_ply(&mesh, PlyFormat::BinaryLittleEndian)).map_err(io_err(&path))?;
        regions.push(entry);
    }
    let manifest = AtlasManifest {
        atlas_id: ATLAS_ID.into(),
        regions,
        global_transform: Affine3::identity(),
        hollow: false,
        base_dir: dir.to_owned(),
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Writes an unsplit version of the atlas: one ASCII PLY per region holding
/// both hemispheres (`hemisphere: both`), scaled by 0.5 and undone by the
/// manifest's global transform. Input for `prep_atlas`.
pub fn write_raw_atlas(dir: &Path) -> Result<AtlasManifest, AtlasError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let half = Affine3::scale(0.5);
    let mut regions = Vec::new();
    for r in &REGIONS {
        let left = ellipsoid_mesh(r.center, r.radii, SEGMENTS, RINGS);
        let right = mirror_x(&left);
        let n = left.vertices.len() as u32;
        let mut both = left;
        both.vertices.extend(right.vertices);
        both.triangles
            .extend(right.triangles.iter().map(|t| t.map(|i| i + n)));
        both.vertices.iter_mut().for_each(|v| *v = half.transform_point(*v));
        let file = PathBuf::from(format!("{}.ply", r.name));
        let path = dir.join(&file);
        std::fs::write(&path, write_ply(&both, PlyFormat::Ascii)).map_err(io_err(&path))?;
        regions.push(RegionEntry {
            region_id: r.name.into(),
            mesh_path: file,
            hemisphere: Hemisphere::Both,
            structure_class: r.class,
            local_transform: None,
        });
    }
    let manifest = AtlasManifest {
        atlas_id: ATLAS_ID.into(),
        regions,
        global_transform: Affine3::scale(2.0),
        hollow: false,
        base_dir: dir.to_owned(),
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// A four-stage progression: spread from the left hippocampus outwards, with
/// the right hemisphere one step behind.
pub fn sample_csv() -> String {
    let order = ["hippocampus", "thalamus", "temporal", "parietal", "frontal", "occipital"];
    let stages = ["stage-1", "stage-2", "stage-3", "stage-4"];
    let mut header = vec![crate::biomarker::STAGE_HEADER.to_string()];
    for h in ["-lh", "-rh"] {
        header.extend(order.iter().map(|r| format!("{r}{h}")));
    }
    let mut out = header.join(",") + "\n";
    for (s, label) in stages.iter().enumerate() {
        let mut row = vec![label.to_string()];
        for lag in [0.0, 1.0] {
            for (i, _) in order.iter().enumerate() {
                let v = (s as f64 - lag - 0.5 * i as f64 + 1.0).clamp(0.0, 3.0);
                row.push(format!("{v}"));
            }
        }
        out += &(row.join(",") + "\n");
    }
    out
}

pub const SAMPLE_CONFIG: &str = r##"{
  "atlas": "atlas/manifest.json",
  "input_csv": "biomarkers.csv",
  "colors": ["#CCCCCC", "#FFF500", "#FF7800", "#FF0000"],
  "views": ["cortical-outer-right", "subcortical", "top"],
  "resolution": [800, 600],
  "shell_alpha": 0.15,
  "background": "#FFFFFF",
  "out_dir": "out"
}
"##;

/// Writes `atlas/`, `raw/`, `biomarkers.csv` and `config.json` under `dir`.
pub fn write_example(dir: &Path) -> Result<(), AtlasError> {
    write_atlas(&dir.join("atlas"))?;
    write_raw_atlas(&dir.join("raw"))?;
    for (name, text) in [("biomarkers.csv", sample_csv()), ("config.json", SAMPLE_CONFIG.to_owned())] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}
