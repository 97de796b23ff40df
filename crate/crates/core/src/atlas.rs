//! Atlas manifests, affine normalization, mid-sagittal hemisphere splitting
//! and the atlas-prep pipeline.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{apply3, Affine3, Vec3};
use crate::mesh::Mesh;
use crate::ply::{parse_ply, write_ply, PlyError, PlyFormat};
use crate::scalar::Real;

/// Linear blocks with `|det|` at or below this are rejected.
pub const SINGULAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Left,
    Right,
    Both,
}

impl Hemisphere {
    pub fn suffix(self) -> &'static str {
        match self {
            Hemisphere::Left => "-lh",
            Hemisphere::Right => "-rh",
            Hemisphere::Both => "",
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hemisphere::Left => "left",
            Hemisphere::Right => "right",
            Hemisphere::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureClass {
    Cortical,
    Subcortical,
}

/// Region identity as seen by biomarker tables: base name plus hemisphere.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionKey {
    pub region: String,
    pub hemisphere: Hemisphere,
}

impl RegionKey {
    pub fn new(region: impl Into<String>, hemisphere: Hemisphere) -> Self {
        Self {
            region: region.into(),
            hemisphere,
        }
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.region, self.hemisphere.suffix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionEntry {
    pub region_id: String,
    /// As written in the manifest.
    pub mesh_path: PathBuf,
    pub hemisphere: Hemisphere,
    pub structure_class: StructureClass,
    pub local_transform: Option<Affine3<f64>>,
}

impl RegionEntry {
    /// Region name with a hemisphere suffix matching `hemisphere` removed.
    pub fn base_id(&self) -> &str {
        let suffix = self.hemisphere.suffix();
        if !suffix.is_empty() {
            if let Some(base) = self.region_id.strip_suffix(suffix) {
                if !base.is_empty() {
                    return base;
                }
            }
        }
        &self.region_id
    }

    pub fn key(&self) -> RegionKey {
        RegionKey::new(self.base_id(), self.hemisphere)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasManifest {
    pub atlas_id: String,
    pub regions: Vec<RegionEntry>,
    pub global_transform: Affine3<f64>,
    /// Meshes are open shells; inner-cortical views are unsupported.
    pub hollow: bool,
    /// Directory that relative `mesh_path`s resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum AtlasError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest at `{key}`: {reason}")]
    Parse {
        path: PathBuf,
        key: String,
        reason: String,
    },
    #[error("duplicate region `{0}`")]
    DuplicateRegion(String),
    #[error("region `{region_id}`: mesh file {path} does not exist")]
    MissingMesh { region_id: String, path: PathBuf },
    #[error("singular transform (|det| = {det:e})")]
    SingularTransform { det: f64 },
    #[error("{path}: {source}")]
    Ply {
        path: PathBuf,
        #[source]
        source: PlyError,
    },
    #[error("region `{region_id}`: {source}")]
    Region {
        region_id: String,
        #[source]
        source: Box<AtlasError>,
    },
}

impl AtlasError {
    fn in_region(self, region_id: &str) -> Self {
        AtlasError::Region {
            region_id: region_id.to_owned(),
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    atlas_id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    hollow: bool,
    #[serde(default = "identity_row_major")]
    global_transform: [f64; 12],
    regions: Vec<RegionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionDoc {
    region_id: String,
    mesh_path: PathBuf,
    hemisphere: Hemisphere,
    structure_class: StructureClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    local_transform: Option<[f64; 12]>,
}

fn identity_row_major() -> [f64; 12] {
    Affine3::identity().to_row_major()
}

impl AtlasManifest {
    /// Parses manifest JSON; `mesh_path`s resolve against `base_dir`.
    ///
    /// Checks region uniqueness and transform invertibility, but not mesh existence.
    pub fn from_json(text: &str, source: &Path, base_dir: &Path) -> Result<Self, AtlasError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ManifestDoc =
            serde_path_to_error::deserialize(de).map_err(|e| AtlasError::Parse {
                path: source.to_owned(),
                key: e.path().to_string(),
                reason: e.inner().to_string(),
            })?;
        let global = Affine3::from_row_major(doc.global_transform);
        check_invertible(&global).map_err(|_| AtlasError::Parse {
            path: source.to_owned(),
            key: "global_transform".into(),
            reason: "3×3 block is singular".into(),
        })?;
        let mut seen = HashSet::new();
        let mut regions = Vec::with_capacity(doc.regions.len());
        for (i, r) in doc.regions.into_iter().enumerate() {
            if r.region_id.is_empty() || r.region_id.contains(',') {
                return Err(AtlasError::Parse {
                    path: source.to_owned(),
                    key: format!("regions[{i}].region_id"),
                    reason: "region ids must be nonempty and contain no commas".into(),
                });
            }
            if !seen.insert(r.region_id.clone()) {
                return Err(AtlasError::DuplicateRegion(r.region_id));
            }
            let local = r.local_transform.map(Affine3::from_row_major);
            if let Some(t) = &local {
                check_invertible(t).map_err(|_| AtlasError::Parse {
                    path: source.to_owned(),
                    key: format!("regions[{i}].local_transform"),
                    reason: "3×3 block is singular".into(),
                })?;
            }
            regions.push(RegionEntry {
                region_id: r.region_id,
                mesh_path: r.mesh_path,
                hemisphere: r.hemisphere,
                structure_class: r.structure_class,
                local_transform: local,
            });
        }
        Ok(Self {
            atlas_id: doc.atlas_id,
            regions,
            global_transform: global,
            hollow: doc.hollow,
            base_dir: base_dir.to_owned(),
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ManifestDoc {
            atlas_id: self.atlas_id.clone(),
            hollow: self.hollow,
            global_transform: self.global_transform.to_row_major(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionDoc {
                    region_id: r.region_id.clone(),
                    mesh_path: r.mesh_path.clone(),
                    hemisphere: r.hemisphere,
                    structure_class: r.structure_class,
                    local_transform: r.local_transform.map(|t| t.to_row_major()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"
    }

    pub fn resolve_mesh_path(&self, entry: &RegionEntry) -> PathBuf {
        self.base_dir.join(&entry.mesh_path)
    }

    pub fn check_meshes_exist(&self) -> Result<(), AtlasError> {
        for r in &self.regions {
            let path = self.resolve_mesh_path(r);
            if !path.is_file() {
                return Err(AtlasError::MissingMesh {
                    region_id: r.region_id.clone(),
                    path,
                });
            }
        }
        Ok(())
    }

    pub fn region(&self, region_id: &str) -> Option<&RegionEntry> {
        self.regions.iter().find(|r| r.region_id == region_id)
    }

    /// Every (base region, hemisphere) key in manifest order.
    pub fn keys(&self) -> impl Iterator<Item = RegionKey> + '_ {
        self.regions.iter().map(RegionEntry::key)
    }

    /// Global then local transform for one region.
    pub fn region_transform(&self, entry: &RegionEntry) -> Affine3<f64> {
        match &entry.local_transform {
            Some(local) => local.compose(&self.global_transform),
            None => self.global_transform,
        }
    }

    /// Reads, transforms and computes normals for one region mesh.
    pub fn load_region_mesh(&self, entry: &RegionEntry) -> Result<Mesh<f64>, AtlasError> {
        let path = self.resolve_mesh_path(entry);
        let load = || -> Result<Mesh<f64>, AtlasError> {
            let bytes = std::fs::read(&path).map_err(|source| AtlasError::Io {
                path: path.clone(),
                source,
            })?;
            let raw: Mesh<f64> = parse_ply(&bytes).map_err(|source| AtlasError::Ply {
                path: path.clone(),
                source,
            })?;
            let t = self.region_transform(entry);
            let mesh = if t.is_identity() {
                raw
            } else {
                apply_transform(&raw, &t)?
            };
            Ok(mesh.with_vertex_normals())
        };
        load().map_err(|e| e.in_region(&entry.region_id))
    }
}

fn check_invertible<S: Real>(t: &Affine3<S>) -> Result<(), AtlasError> {
    let det = t.determinant();
    if det.abs() <= S::lit(SINGULAR_EPS) || !det.is_finite() {
        return Err(AtlasError::SingularTransform {
            det: det.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Reads and validates a manifest, resolving meshes relative to its directory.
pub fn load_manifest(path: &Path) -> Result<AtlasManifest, AtlasError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_manifest_with_base(path, base)
}

pub fn load_manifest_with_base(path: &Path, base: &Path) -> Result<AtlasManifest, AtlasError> {
    let text = std::fs::read_to_string(path).map_err(|source| AtlasError::Io {
        path: path.to_owned(),
        source,
    })?;
    let manifest = AtlasManifest::from_json(&text, path, base)?;
    manifest.check_meshes_exist()?;
    Ok(manifest)
}

/// Maps every vertex through `v ↦ A·v + b`; normals go through the inverse
/// transpose of `A` and are renormalized.
pub fn apply_transform<S: Real>(mesh: &Mesh<S>, t: &Affine3<S>) -> Result<Mesh<S>, AtlasError> {
    if t.is_identity() {
        return Ok(mesh.clone());
    }
    check_invertible(t)?;
    let normals = match &mesh.normals {
        Some(ns) => {
            let nm = t
                .normal_matrix(S::lit(SINGULAR_EPS))
                .ok_or(AtlasError::SingularTransform {
                    det: t.determinant().to_f64_lossy(),
                })?;
            Some(
                ns.iter()
                    .map(|&n| {
                        apply3(&nm, n)
                            .try_normalize()
                            .unwrap_or_else(crate::mesh::fallback_normal)
                    })
                    .collect(),
            )
        }
        None => None,
    };
    Ok(Mesh {
        vertices: mesh.vertices.iter().map(|&v| t.transform_point(v)).collect(),
        normals,
        triangles: mesh.triangles.clone(),
    })
}

/// Builds one output side of a split, compacting vertex indices.
struct SideBuilder<S> {
    mesh: Mesh<S>,
    from_original: BTreeMap<u32, u32>,
    from_edge: BTreeMap<(u32, u32), u32>,
}

/// Midline crossing per undirected edge: position and optional normal.
type Crossings<S> = BTreeMap<(u32, u32), (Vec3<S>, Option<Vec3<S>>)>;

#[derive(Clone, Copy)]
enum ClipVertex {
    Original(u32),
    /// Crossing on the edge between two original vertices (lower index first).
    Edge(u32, u32),
}

impl<S: Real> SideBuilder<S> {
    fn new(with_normals: bool) -> Self {
        Self {
            mesh: Mesh {
                vertices: Vec::new(),
                normals: with_normals.then(Vec::new),
                triangles: Vec::new(),
            },
            from_original: BTreeMap::new(),
            from_edge: BTreeMap::new(),
        }
    }

    fn index(&mut self, v: ClipVertex, src: &Mesh<S>, crossings: &Crossings<S>) -> u32 {
        let (map_hit, position, normal) = match v {
            ClipVertex::Original(i) => (
                self.from_original.get(&i).copied(),
                src.vertices[i as usize],
                src.normals.as_ref().map(|n| n[i as usize]),
            ),
            ClipVertex::Edge(a, b) => {
                let (p, n) = crossings[&(a, b)];
                (self.from_edge.get(&(a, b)).copied(), p, n)
            }
        };
        if let Some(i) = map_hit {
            return i;
        }
        let idx = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(position);
        if let (Some(ns), Some(n)) = (self.mesh.normals.as_mut(), normal) {
            ns.push(n);
        }
        match v {
            ClipVertex::Original(i) => self.from_original.insert(i, idx),
            ClipVertex::Edge(a, b) => self.from_edge.insert((a, b), idx),
        };
        idx
    }

    fn push_polygon(
        &mut self,
        poly: &[ClipVertex],
        src: &Mesh<S>,
        crossings: &Crossings<S>,
    ) {
        if poly.len() < 3 {
            return;
        }
        let ids: Vec<u32> = poly.iter().map(|&v| self.index(v, src, crossings)).collect();
        for k in 1..ids.len() - 1 {
            self.mesh.triangles.push([ids[0], ids[k], ids[k + 1]]);
        }
    }
}

/// Splits a mesh at the plane `x = midline_x` into (left, right) halves.
///
/// Triangles wholly on one side are copied; straddling triangles are clipped
/// against each halfspace and fan re-triangulated. Crossing points are shared
/// between neighbouring triangles and lie exactly on the plane. A triangle
/// lying entirely in the plane goes to the left side only.
pub fn split_hemispheres<S: Real>(mesh: &Mesh<S>, midline_x: S) -> (Mesh<S>, Mesh<S>) {
    let with_normals = mesh
        .normals
        .as_ref()
        .is_some_and(|n| n.len() == mesh.vertices.len());
    let mut left = SideBuilder::new(with_normals);
    let mut right = SideBuilder::new(with_normals);
    let dist: Vec<S> = mesh.vertices.iter().map(|v| v.x - midline_x).collect();
    let zero = S::zero();

    let mut crossings: Crossings<S> = BTreeMap::new();
    let mut crossing = |a: u32, b: u32| -> (u32, u32) {
        let key = (a.min(b), a.max(b));
        crossings.entry(key).or_insert_with(|| {
            let (i, j) = (key.0 as usize, key.1 as usize);
            let t = dist[i] / (dist[i] - dist[j]);
            let (p, q) = (mesh.vertices[i], mesh.vertices[j]);
            let mut pos = p + (q - p) * t;
            pos.x = midline_x;
            let normal = mesh.normals.as_ref().filter(|_| with_normals).map(|ns| {
                (ns[i] * (S::one() - t) + ns[j] * t)
                    .try_normalize()
                    .unwrap_or_else(crate::mesh::fallback_normal)
            });
            (pos, normal)
        });
        key
    };

    let mut left_polys: Vec<Vec<ClipVertex>> = Vec::new();
    let mut right_polys: Vec<Vec<ClipVertex>> = Vec::new();
    for &tri in &mesh.triangles {
        let d = tri.map(|i| dist[i as usize]);
        if d.iter().all(|&v| v <= zero) {
            left_polys.push(tri.iter().map(|&i| ClipVertex::Original(i)).collect());
            continue;
        }
        if d.iter().all(|&v| v >= zero) {
            right_polys.push(tri.iter().map(|&i| ClipVertex::Original(i)).collect());
            continue;
        }
        // Straddles the plane: Sutherland–Hodgman against each halfspace.
        let mut lp = Vec::with_capacity(4);
        let mut rp = Vec::with_capacity(4);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (da, db) = (d[k], d[(k + 1) % 3]);
            if da <= zero {
                lp.push(ClipVertex::Original(a));
            }
            if da >= zero {
                rp.push(ClipVertex::Original(a));
            }
            if (da < zero && db > zero) || (da > zero && db < zero) {
                let (i, j) = crossing(a, b);
                lp.push(ClipVertex::Edge(i, j));
                rp.push(ClipVertex::Edge(i, j));
            }
        }
        left_polys.push(lp);
        right_polys.push(rp);
    }

    for p in &left_polys {
        left.push_polygon(p, mesh, &crossings);
    }
    for p in &right_polys {
        right.push_polygon(p, mesh, &crossings);
    }
    (left.mesh, right.mesh)
}

/// Output of [`prep_atlas`].
#[derive(Debug, Clone)]
pub struct PrepReport {
    pub manifest: AtlasManifest,
    pub manifest_path: PathBuf,
    pub warnings: Vec<String>,
}

/// Normalizes, splits and re-exports every region of a raw atlas.
///
/// Raw `mesh_path`s resolve against `raw_dir`. Each `both` region is written
/// as `<region_id>-lh.ply` / `<region_id>-rh.ply` (binary); regions already
/// tagged with one hemisphere are written as `<region_id>.ply`. The prepared
/// manifest (identity transforms) goes to `out_dir/manifest.json`.
pub fn prep_atlas(raw_dir: &Path, manifest_in: &Path, out_dir: &Path) -> Result<PrepReport, AtlasError> {
    let text = std::fs::read_to_string(manifest_in).map_err(|source| AtlasError::Io {
        path: manifest_in.to_owned(),
        source,
    })?;
    let raw = AtlasManifest::from_json(&text, manifest_in, raw_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|source| AtlasError::Io {
        path: out_dir.to_owned(),
        source,
    })?;

    let write = |name: &str, mesh: &Mesh<f64>| -> Result<(), AtlasError> {
        let path = out_dir.join(name);
        std::fs::write(&path, write_ply(mesh, PlyFormat::BinaryLittleEndian))
            .map_err(|source| AtlasError::Io { path, source })
    };

    type RegionOut = (Vec<RegionEntry>, Vec<String>);
    let per_region: Vec<Result<RegionOut, AtlasError>> = raw
        .regions
        .par_iter()
        .map(|entry| {
            let id = &entry.region_id;
            let mesh = raw.load_region_mesh(entry)?;
            let mut entries = Vec::new();
            let mut warnings = Vec::new();
            let mut emit = |hemisphere: Hemisphere, region_id: String, m: &Mesh<f64>| {
                let file = format!("{region_id}.ply");
                write(&file, m).map_err(|e| e.in_region(id))?;
                if m.is_empty() {
                    warnings.push(format!(
                        "region `{id}`: {hemisphere} side is empty; omitted from prepared manifest"
                    ));
                } else {
                    entries.push(RegionEntry {
                        region_id,
                        mesh_path: PathBuf::from(file),
                        hemisphere,
                        structure_class: entry.structure_class,
                        local_transform: None,
                    });
                }
                Ok::<(), AtlasError>(())
            };
            match entry.hemisphere {
                Hemisphere::Both => {
                    let (l, r) = split_hemispheres(&mesh, 0.0);
                    emit(Hemisphere::Left, format!("{id}-lh"), &l)?;
                    emit(Hemisphere::Right, format!("{id}-rh"), &r)?;
                }
                h => emit(h, id.clone(), &mesh)?,
            }
            Ok((entries, warnings))
        })
        .collect();

    let mut regions = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for r in per_region {
        let (entries, w) = r?;
        warnings.extend(w);
        for e in entries {
            if !seen.insert(e.region_id.clone()) {
                return Err(AtlasError::DuplicateRegion(e.region_id));
            }
            regions.push(e);
        }
    }
    let manifest = AtlasManifest {
        atlas_id: raw.atlas_id.clone(),
        regions,
        global_transform: Affine3::identity(),
        hollow: raw.hollow,
        base_dir: out_dir.to_owned(),
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()).map_err(|source| AtlasError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PrepReport {
        manifest,
        manifest_path,
        warnings,
    })
}
