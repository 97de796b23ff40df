//! Acceptance gate: runs every primary criterion and prints one PASS/FAIL
//! line each. Exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use atlaspaint_core::atlas::{load_manifest, split_hemispheres, AtlasManifest};
use atlaspaint_core::biomarker::log_normalize;
use atlaspaint_core::colormap::{parse_hex_color, ColorGradient};
use atlaspaint_core::compose::{
    montage_size, render_animation_frames, render_montage, render_stage, render_stage_image, RenderJob,
};
use atlaspaint_core::config::{resolve, ConfigLayer};
use atlaspaint_core::geom::Vec3;
use atlaspaint_core::gif::encode_animation;
use atlaspaint_core::image::RgbaImage;
use atlaspaint_core::mesh::Mesh;
use atlaspaint_core::ply::{parse_ply, write_ply, PlyFormat};
use atlaspaint_core::render::{triangle_coverage, NamedView};
use atlaspaint_core::synthetic;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(t0: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t0.elapsed();
    ensure!(e < limit, "took {e:.2?}, limit {limit:?}");
    Ok(e)
}

// --- PLY round trip -------------------------------------------------------

fn random_mesh(rng: &mut StdRng) -> Mesh<f64> {
    let n = rng.random_range(3..200);
    let coord = |rng: &mut StdRng| match rng.random_range(0..4) {
        0 => rng.random_range(-1.0..1.0),
        1 => rng.random_range(-1e5..1e5),
        2 => rng.random_range(-100..100) as f64,
        _ => rng.random_range(-1e-3..1e-3),
    };
    let vertices: Vec<Vec3<f64>> = (0..n).map(|_| Vec3::new(coord(rng), coord(rng), coord(rng))).collect();
    let normals = rng
        .random_bool(0.5)
        .then(|| (0..n).map(|_| Vec3::new(coord(rng), coord(rng), coord(rng))).collect());
    let triangles = (0..rng.random_range(0..400))
        .map(|_| [0; 3].map(|_| rng.random_range(0..n as u32)))
        .collect();
    Mesh {
        vertices,
        normals,
        triangles,
    }
}

fn ply_round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let r32 = |v: &Vec3<f64>| v.to_array().map(|c| (c as f32 as f64).to_bits());
    for i in 0..100 {
        let m = random_mesh(&mut rng);
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let back: Mesh<f64> = parse_ply(&write_ply(&m, format)).map_err(|e| format!("mesh {i}: {e}"))?;
            ensure!(back.triangles == m.triangles, "mesh {i} {format:?}: indices differ");
            let want: Vec<_> = m.vertices.iter().map(r32).collect();
            let got: Vec<_> = back.vertices.iter().map(|v| v.to_array().map(f64::to_bits)).collect();
            ensure!(got == want, "mesh {i} {format:?}: coordinates differ beyond f32 rounding");
            let wn = m.normals.as_ref().map(|ns| ns.iter().map(r32).collect::<Vec<_>>());
            let gn = back
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|v| v.to_array().map(f64::to_bits)).collect::<Vec<_>>());
            ensure!(gn == wn, "mesh {i} {format:?}: normals differ");
        }
    }
    let e = within(t0, Duration::from_secs(5))?;
    Ok(format!("100 meshes × 2 formats exact after f32 rounding, {e:.2?}"))
}

// --- Hemisphere clipping --------------------------------------------------

fn area(m: &Mesh<f64>) -> f64 {
    m.triangles
        .iter()
        .map(|&[a, b, c]| {
            let (a, b, c) = (m.vertices[a as usize], m.vertices[b as usize], m.vertices[c as usize]);
            let (u, v) = (b - a, c - a);
            let n = [u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x];
            0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
        })
        .sum()
}

fn hemisphere_clipping() -> Outcome {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst_rel = 0.0f64;
    let mut worst_violation = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(3..150);
        let coord = |rng: &mut StdRng| match rng.random_range(0..5) {
            0 => 0.0,
            1 => rng.random_range(-3..3) as f64,
            _ => rng.random_range(-50.0..50.0),
        };
        let vertices = (0..n).map(|_| Vec3::new(coord(&mut rng), coord(&mut rng), coord(&mut rng))).collect();
        let triangles = (0..rng.random_range(1..300))
            .map(|_| [0; 3].map(|_| rng.random_range(0..n as u32)))
            .collect();
        let m = Mesh::new(vertices, triangles);
        let mid = if i % 2 == 0 { 0.0 } else { rng.random_range(-10.0..10.0) };
        let (l, r) = split_hemispheres(&m, mid);
        let total = area(&m);
        if total > 0.0 {
            worst_rel = worst_rel.max(((area(&l) + area(&r)) - total).abs() / total);
        }
        for v in &l.vertices {
            worst_violation = worst_violation.max(v.x - mid);
        }
        for v in &r.vertices {
            worst_violation = worst_violation.max(mid - v.x);
        }
    }
    ensure!(worst_rel <= 1e-6, "area error {worst_rel:e}");
    ensure!(worst_violation <= 1e-9, "halfspace violation {worst_violation:e}");
    let e = within(t0, Duration::from_secs(10))?;
    Ok(format!("max area rel. error {worst_rel:.1e}, max violation {worst_violation:.1e}, {e:.2?}"))
}

// --- Rasterizer -----------------------------------------------------------

const SUB: i64 = 16;

/// Brute-force coverage with exact integer edge functions; an edge owns the
/// centers on it when, with the interior on its positive side, dy < 0 or
/// (dy == 0 and dx > 0).
fn coverage_oracle(v: [[i64; 2]; 3], size: u32) -> BTreeSet<(u32, u32)> {
    let e = |u: [i64; 2], w: [i64; 2], p: [i64; 2]| (w[0] - u[0]) * (p[1] - u[1]) - (w[1] - u[1]) * (p[0] - u[0]);
    let s = e(v[0], v[1], v[2]).signum();
    let mut out = BTreeSet::new();
    if s == 0 {
        return out;
    }
    for y in 0..size {
        for x in 0..size {
            let p = [x as i64 * SUB + SUB / 2, y as i64 * SUB + SUB / 2];
            if [(v[1], v[2]), (v[2], v[0]), (v[0], v[1])].iter().all(|&(u, w)| {
                let val = s * e(u, w, p);
                let (dx, dy) = (s * (w[0] - u[0]), s * (w[1] - u[1]));
                val > 0 || (val == 0 && (dy < 0 || (dy == 0 && dx > 0)))
            }) {
                out.insert((x, y));
            }
        }
    }
    out
}

fn screen(v: [[i64; 2]; 3]) -> [[f64; 3]; 3] {
    v.map(|p| [p[0] as f64 / SUB as f64, p[1] as f64 / SUB as f64, 0.0])
}

fn rasterizer_oracle() -> Outcome {
    let t0 = Instant::now();
    let size = 64u32;
    let mut rng = StdRng::seed_from_u64(3);
    for i in 0..1000 {
        let v = [0; 3].map(|_| {
            if rng.random_bool(0.3) {
                [rng.random_range(0..size as i64) * SUB + SUB / 2, rng.random_range(0..=size as i64) * SUB]
            } else {
                [rng.random_range(-8 * SUB..72 * SUB), rng.random_range(-8 * SUB..72 * SUB)]
            }
        });
        let got: BTreeSet<_> = triangle_coverage(screen(v), size, size).into_iter().collect();
        ensure!(got == coverage_oracle(v, size), "triangle {i} {v:?}: coverage differs");
    }
    // Shared edges: triangulated jittered grids covering the whole target.
    let mut double = 0usize;
    let mut holes = 0usize;
    for _ in 0..20 {
        let n = rng.random_range(2..9usize);
        let step = size as i64 * SUB / n as i64;
        let pt = |i: usize, j: usize, rng: &mut StdRng| {
            let c = |k: usize, rng: &mut StdRng| match k {
                0 => 0,
                k if k == n => size as i64 * SUB,
                k => k as i64 * step + rng.random_range(-step / 3..=step / 3),
            };
            [c(i, rng), c(j, rng)]
        };
        let grid: Vec<Vec<[i64; 2]>> = (0..=n).map(|j| (0..=n).map(|i| pt(i, j, &mut rng)).collect()).collect();
        let mut count = vec![0u32; (size * size) as usize];
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (grid[j][i], grid[j][i + 1], grid[j + 1][i + 1], grid[j + 1][i]);
                let tris = if rng.random_bool(0.5) { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
                for t in tris {
                    for (x, y) in triangle_coverage(screen(t), size, size) {
                        count[(y * size + x) as usize] += 1;
                    }
                }
            }
        }
        double += count.iter().filter(|&&c| c > 1).count();
        holes += count.iter().filter(|&&c| c == 0).count();
    }
    ensure!(double == 0 && holes == 0, "double paint {double}, holes {holes}");
    let e = within(t0, Duration::from_secs(10))?;
    Ok(format!("1000 triangles set-equal to oracle, double paint 0, {e:.2?}"))
}

// --- Colormap -------------------------------------------------------------

fn colormap_exactness() -> Outcome {
    let g = ColorGradient::<f64>::default_gradient();
    for (k, a) in g.anchors().iter().enumerate() {
        ensure!(g.value_to_color(k as f64).unwrap() == *a, "v = {k} misses anchor");
    }
    let mut worst = 0.0f64;
    for k in 0..g.k() {
        let (lo, hi) = (g.anchors()[k].to_array(), g.anchors()[k + 1].to_array());
        let got = g.value_to_color(k as f64 + 0.5).unwrap().to_array();
        for c in 0..3 {
            worst = worst.max((got[c] - (lo[c] + 0.5 * (hi[c] - lo[c]))).abs());
        }
    }
    ensure!(worst <= 1e-12, "midpoint error {worst:e}");
    let grey = parse_hex_color::<f64>("#808080").unwrap();
    let want = ((128.0 / 255.0 + 0.055) / 1.055f64).powf(2.4);
    for c in grey.to_array() {
        ensure!((c - 0.21586).abs() < 1e-5 && (c - want).abs() < 1e-15, "#808080 → {c}");
    }
    Ok(format!("anchors exact, midpoint error {worst:.1e}, #808080 → {:.5}", grey.r))
}

// --- Log normalization ----------------------------------------------------

fn log_normalize_anchors() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..100 {
        let x_min = 10f64.powf(rng.random_range(-8.0..8.0));
        let k = rng.random_range(1..10usize);
        let raw = BTreeMap::from([(0, x_min), (1, 1000.0 * x_min)]);
        let v = log_normalize(&raw, 1000.0, k, None).map_err(|e| e.to_string())?;
        ensure!(v[&0] == 0.0 && v[&1] == k as f64, "x_min = {x_min:e}, K = {k}: {:?}", v);
    }
    let raw: BTreeMap<usize, f64> = (0..1000).map(|i| (i, 10f64.powf(rng.random_range(-1.0..3.5)))).collect();
    let v = log_normalize(&raw, 1000.0, 3, None).map_err(|e| e.to_string())?;
    let mut pairs: Vec<(f64, f64)> = raw.iter().map(|(k, &x)| (x, v[k])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    ensure!(pairs.windows(2).all(|w| w[0].1 <= w[1].1), "not monotone");
    ensure!(v.values().all(|y| (0.0..=3.0).contains(y)), "outside [0, K]");
    Ok("x_min → 0 and 1000·x_min → K exact; 1000 random inputs monotone".into())
}

// --- Rendering -----------------------------------------------------------

fn synthetic_atlas(dir: &Path) -> AtlasManifest {
    synthetic::write_atlas(dir).unwrap();
    load_manifest(&dir.join("manifest.json")).unwrap()
}

fn make_job(manifest: AtlasManifest, layer: ConfigLayer, csv: &str) -> Result<RenderJob, String> {
    let cfg = resolve(layer).map_err(|e| e.to_string())?;
    cfg.build_job(manifest, csv).map_err(|e| e.to_string())
}

fn hemisphere_csv(left: f64, right: f64) -> String {
    let names: Vec<&str> = synthetic::REGIONS.iter().map(|r| r.name).collect();
    let mut header = vec!["Image-name-unique".to_owned()];
    let mut row = vec!["s".to_owned()];
    for n in &names {
        header.push(format!("{n}-lh"));
        row.push(left.to_string());
        header.push(format!("{n}-rh"));
        row.push(right.to_string());
    }
    format!("{}\n{}\n", header.join(","), row.join(","))
}

fn mirror_render(dir: &Path) -> Outcome {
    let manifest = synthetic_atlas(&dir.join("mirror"));
    let layer = ConfigLayer {
        views: Some(vec!["top".into()]),
        resolution: Some([320, 240]),
        ..Default::default()
    };
    let job = make_job(manifest.clone(), layer.clone(), &hemisphere_csv(0.0, 3.0))?;
    let img = render_stage_image(&job, 0, NamedView::Top).map_err(|e| e.to_string())?;
    let bg = [255, 255, 255, 255];
    let (mut left_px, mut right_px) = (0, 0);
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.pixel(x, y);
            if p == bg {
                continue;
            }
            if x < img.width / 2 {
                // Anchor 0 is #CCCCCC: shaded grey keeps r = g = b.
                ensure!(p[0] == p[1] && p[1] == p[2], "left pixel ({x},{y}) = {p:?} is not anchor-0 colored");
                left_px += 1;
            } else {
                // Anchor 3 is #FF0000: shaded red keeps g = b = 0.
                ensure!(p[0] > 0 && p[1] == 0 && p[2] == 0, "right pixel ({x},{y}) = {p:?} is not anchor-K colored");
                right_px += 1;
            }
        }
    }
    ensure!(left_px > 1000 && right_px > 1000, "too few covered pixels: {left_px} / {right_px}");

    let swapped = make_job(manifest, layer, &hemisphere_csv(3.0, 0.0))?;
    let mirrored = render_stage_image(&swapped, 0, NamedView::Top).map_err(|e| e.to_string())?;
    let flipped = img.flip_horizontal();
    let diff = mirrored.data.chunks(4).zip(flipped.data.chunks(4)).filter(|(a, b)| a != b).count();
    ensure!(diff == 0, "{diff} pixels differ from the mirror image");
    Ok(format!("{left_px} grey px left, {right_px} red px right; swapped render is the exact mirror"))
}

fn stage_view_montage(dir: &Path) -> Outcome {
    let t0 = Instant::now();
    let manifest = synthetic_atlas(&dir.join("montage"));
    let csv = synthetic::sample_csv();
    let layer = ConfigLayer {
        views: Some(vec!["outer-right".into(), "top".into()]),
        resolution: Some([400, 300]),
        ..Default::default()
    };
    let job = make_job(manifest, layer, &csv)?;
    ensure!(job.table.stages.len() == 4, "expected 4 stages");
    let pad = 8;
    let m = render_montage(&job, pad, job.background).map_err(|e| e.to_string())?;
    let want = montage_size(4, 2, 400, 300, pad);
    ensure!((m.width, m.height) == want && want == (4 * 400 + 5 * 8, 2 * 300 + 3 * 8), "size {}×{}", m.width, m.height);
    for col in 0..4u32 {
        for (row, &view) in job.views.iter().enumerate() {
            let single = render_stage_image(&job, col as usize, view).map_err(|e| e.to_string())?;
            let cell: RgbaImage = m.crop(pad + col * (400 + pad), pad + row as u32 * (300 + pad), 400, 300);
            ensure!(cell == single, "cell (stage {col}, {}) differs from single render", view.name());
        }
    }
    let e = within(t0, Duration::from_secs(60))?;
    Ok(format!("{}×{} montage, all 8 cells pixel-equal to single renders, {e:.2?}", m.width, m.height))
}

fn animation(dir: &Path) -> Outcome {
    let manifest = synthetic_atlas(&dir.join("anim"));
    let csv = "Image-name-unique,frontal,temporal-lh,hippocampus,thalamus-rh\nt0,0,0,1,3\nt1,1,2,2,1.5\nt2,3,3,3,0\n";
    let layer = ConfigLayer {
        views: Some(vec!["outer-left".into()]),
        resolution: Some([160, 120]),
        ..Default::default()
    };
    let job = make_job(manifest, layer, csv)?;
    let frames = render_animation_frames(&job, NamedView::CorticalOuterLeft, 4).map_err(|e| e.to_string())?;
    ensure!(frames.len() == 9, "{} frames", frames.len());
    for (k, stage) in [(0, 0), (4, 1), (8, 2)] {
        let stat = render_stage(&job, stage, NamedView::CorticalOuterLeft).map_err(|e| e.to_string())?;
        ensure!(frames[k] == stat, "frame {k} differs from static stage {stage}");
    }
    let images: Vec<RgbaImage> = frames.iter().map(RgbaImage::from_framebuffer).collect();
    let bytes = encode_animation(&images, 50, false).map_err(|e| e.to_string())?;
    let mut opts = gif::DecodeOptions::new();
    opts.set_color_output(gif::ColorOutput::RGBA);
    let mut dec = opts.read_info(Cursor::new(&bytes)).map_err(|e| e.to_string())?;
    let mut n = 0;
    while let Some(f) = dec.read_next_frame().map_err(|e| e.to_string())? {
        ensure!(f.delay == 50, "frame {n} delay {}", f.delay);
        n += 1;
    }
    ensure!(n == 9, "decoded {n} frames");
    ensure!(dec.repeat() == gif::Repeat::Infinite, "loop = {:?}", dec.repeat());
    Ok("9 frames; boundary frames equal static renders; decoder sees 9 × 50 cs, infinite loop".into())
}

fn determinism(dir: &Path) -> Outcome {
    let ex = dir.join("determinism");
    synthetic::write_example(&ex).unwrap();
    let run = |out: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let o = Command::new(env!("CARGO_BIN_EXE_atlaspaint"))
            .args(["render", "--config"])
            .arg(ex.join("config.json"))
            .args(["--resolution", "320x240", "--views", "outer-right,subcortical,top,bottom", "--out"])
            .arg(ex.join(out))
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(o.status.success(), "render failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .map(|p| {
                let name = Path::new(p).file_name().unwrap().to_string_lossy().into_owned();
                Ok((name, std::fs::read(p).map_err(|e| e.to_string())?))
            })
            .collect()
    };
    let a = run("a")?;
    let b = run("b")?;
    ensure!(a.len() == 16, "{} files", a.len());
    ensure!(a == b, "outputs differ between runs");
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn service_contract(dir: &Path) -> Outcome {
    use atlaspaint_service::{JobRecord, JobStatus, Service, ServiceOptions, SubmitResponse};
    use serde_json::{json, Value};

    let manifest = synthetic_atlas(&dir.join("svc-atlas"));
    let mut options = ServiceOptions::new(dir.join("spool"));
    options.workers = 2;
    let service = Service::new(options, vec![manifest]).map_err(|e| e.to_string())?;
    let app = service.router().map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let base = format!("http://{}", listener.local_addr().unwrap());
        tokio::spawn(async move { axum_serve(listener, app).await });
        let client = reqwest::Client::new();
        let t0 = Instant::now();
        let body = json!({
            "config": {"atlas": "synthetic", "resolution": [200, 150], "views": ["outer-right", "top"]},
            "csv": synthetic::sample_csv(),
        });
        let r = client.post(format!("{base}/api/v1/jobs")).json(&body).send().await.map_err(|e| e.to_string())?;
        ensure!(r.status() == 201, "submit → {}", r.status());
        let id = r.json::<SubmitResponse>().await.map_err(|e| e.to_string())?.job_id;
        ensure!(id.len() == 16 && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()), "job id {id}");
        let rec = loop {
            let rec: JobRecord = client
                .get(format!("{base}/api/v1/jobs/{id}"))
                .send()
                .await
                .map_err(|e| e.to_string())?
                .json()
                .await
                .map_err(|e| e.to_string())?;
            if matches!(rec.status, JobStatus::Done | JobStatus::Error) {
                break rec;
            }
            ensure!(t0.elapsed() < Duration::from_secs(30), "job still {:?}", rec.status);
            tokio::time::sleep(Duration::from_millis(50)).await;
        };
        ensure!(rec.status == JobStatus::Done && rec.images.len() == 8, "{rec:?}");
        let spool = service.state().jobs.spool().join(&id);
        for name in &rec.images {
            let r = client
                .get(format!("{base}/api/v1/jobs/{id}/images/{name}"))
                .send()
                .await
                .map_err(|e| e.to_string())?;
            ensure!(r.status() == 200 && r.headers()["content-type"] == "image/png", "{name}: {}", r.status());
            let bytes = r.bytes().await.map_err(|e| e.to_string())?;
            ensure!(bytes.as_ref() == std::fs::read(spool.join(name)).unwrap(), "{name}: bytes differ");
        }
        let round_trip = t0.elapsed();
        ensure!(round_trip < Duration::from_secs(30), "round trip {round_trip:?}");

        let r = client
            .post(format!("{base}/api/v1/jobs"))
            .json(&json!({"config": {"colors": ["#GGGGGG", "#FF0000"]}, "csv": synthetic::sample_csv()}))
            .send()
            .await
            .map_err(|e| e.to_string())?;
        ensure!(r.status() == 400, "bad color → {}", r.status());
        let v: Value = r.json().await.map_err(|e| e.to_string())?;
        ensure!(v["diagnostics"][0]["key"] == "colors[0]", "diagnostics {v}");

        for name in ["..%2Fmanifest.json", "..%2F..%2Fsvc-atlas%2Fmanifest.json"] {
            let r = client
                .get(format!("{base}/api/v1/jobs/{id}/images/{name}"))
                .send()
                .await
                .map_err(|e| e.to_string())?;
            ensure!(r.status() == 404, "{name} → {}", r.status());
        }
        Ok(format!("round trip {round_trip:.2?}; 400 names colors[0]; traversal → 404"))
    })
}

async fn axum_serve(listener: tokio::net::TcpListener, app: axum::Router) {
    let _ = axum::serve(listener, app).await;
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let criteria: Vec<Criterion> = vec![
        ("PLY round-trip", Box::new(ply_round_trip)),
        ("Hemisphere clipping", Box::new(hemisphere_clipping)),
        ("Rasterizer oracle", Box::new(rasterizer_oracle)),
        ("Colormap exactness", Box::new(colormap_exactness)),
        ("Log-normalize anchors", Box::new(log_normalize_anchors)),
        ("Hemisphere mirror render", Box::new(|| mirror_render(d))),
        ("Stage × view montage", Box::new(|| stage_view_montage(d))),
        ("Animation", Box::new(|| animation(d))),
        ("Determinism", Box::new(|| determinism(d))),
        ("Service contract", Box::new(|| service_contract(d))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
