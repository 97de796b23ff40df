use std::path::Path;
use std::time::{Duration, Instant};

use atlaspaint_core::atlas::load_manifest;
use atlaspaint_core::config::{resolve, ConfigLayer};
use atlaspaint_core::{synthetic, AtlasManifest};
use atlaspaint_service::{AtlasInfo, JobRecord, JobStatus, Service, ServiceOptions, SubmitResponse};
use serde_json::{json, Value};

const CSV: &str = "Image-name-unique,frontal,temporal,hippocampus-lh,thalamus-rh\na,0,1,2,3\nb,1,2,3,0\n";

fn synthetic_manifest(dir: &Path) -> AtlasManifest {
    synthetic::write_atlas(dir).unwrap();
    load_manifest(&dir.join("manifest.json")).unwrap()
}

struct Server {
    base: String,
    client: reqwest::Client,
    service: Service,
    _dir: tempfile::TempDir,
}

async fn start(configure: impl FnOnce(&mut ServiceOptions, &Path) -> Vec<AtlasManifest>) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let mut options = ServiceOptions::new(dir.path().join("spool"));
    options.workers = 1;
    let manifests = configure(&mut options, dir.path());
    let service = Service::new(options, manifests).unwrap();
    let app = service.router().unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        client: reqwest::Client::new(),
        service,
        _dir: dir,
    }
}

async fn with_synthetic() -> Server {
    start(|_, dir| vec![synthetic_manifest(&dir.join("atlas"))]).await
}

impl Server {
    async fn submit(&self, body: Value) -> reqwest::Response {
        self.client.post(format!("{}/api/v1/jobs", self.base)).json(&body).send().await.unwrap()
    }

    async fn record(&self, id: &str) -> JobRecord {
        let r = self.client.get(format!("{}/api/v1/jobs/{id}", self.base)).send().await.unwrap();
        assert_eq!(r.status(), 200);
        r.json().await.unwrap()
    }

    async fn wait(&self, id: &str, limit: Duration) -> JobRecord {
        let t0 = Instant::now();
        let mut last = JobStatus::Queued;
        loop {
            let rec = self.record(id).await;
            assert!(rec.status >= last, "status went from {last:?} to {:?}", rec.status);
            last = rec.status;
            if matches!(rec.status, JobStatus::Done | JobStatus::Error) {
                return rec;
            }
            assert!(t0.elapsed() < limit, "job {id} still {:?}", rec.status);
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
    }

    async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(format!("{}{path}", self.base)).send().await.unwrap()
    }
}

fn small_config() -> Value {
    json!({"atlas": "synthetic", "resolution": [64, 48], "views": ["top", "outer-left"]})
}

async fn diagnostics(r: reqwest::Response) -> Vec<(String, String)> {
    assert_eq!(r.status(), 400);
    let body: Value = r.json().await.unwrap();
    body["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| (d["key"].as_str().unwrap().to_owned(), d["reason"].as_str().unwrap().to_owned()))
        .collect()
}

#[tokio::test]
async fn round_trip_serves_compose_bytes() {
    let s = with_synthetic().await;
    let t0 = Instant::now();
    let r = s.submit(json!({"config": small_config(), "csv": CSV})).await;
    assert_eq!(r.status(), 201);
    let SubmitResponse { job_id } = r.json().await.unwrap();
    assert_eq!(job_id.len(), 16);
    assert!(job_id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()));

    let fresh = s.record(&job_id).await;
    assert!(matches!(fresh.status, JobStatus::Queued | JobStatus::Running | JobStatus::Done));
    let rec = s.wait(&job_id, Duration::from_secs(30)).await;
    assert_eq!(rec.status, JobStatus::Done, "{:?}", rec.error_message);
    assert_eq!(rec.images.len(), 4);

    // Reference render straight through the library.
    let dir = tempfile::tempdir().unwrap();
    let manifest = s.service.state().atlases["synthetic"].manifest.clone();
    let layer = ConfigLayer::from_value(small_config()).unwrap();
    let cfg = resolve(ConfigLayer {
        out_dir: Some(dir.path().to_owned()),
        ..layer
    })
    .unwrap();
    let report = atlaspaint_core::render_job(&cfg.build_job(manifest, CSV).unwrap()).unwrap();

    for (name, reference) in rec.images.iter().zip(&report.files) {
        assert_eq!(name, reference.file_name().unwrap().to_str().unwrap());
        let r = s.get(&format!("/api/v1/jobs/{job_id}/images/{name}")).await;
        assert_eq!(r.status(), 200);
        assert_eq!(r.headers()["content-type"], "image/png");
        let bytes = r.bytes().await.unwrap();
        assert_eq!(bytes.as_ref(), std::fs::read(reference).unwrap().as_slice(), "{name}");
    }
    assert!(t0.elapsed() < Duration::from_secs(30));
}

#[tokio::test]
async fn montage_and_animation_modes() {
    let s = with_synthetic().await;
    let r = s.submit(json!({"config": small_config(), "csv": CSV, "mode": "montage"})).await;
    let id = r.json::<SubmitResponse>().await.unwrap().job_id;
    let rec = s.wait(&id, Duration::from_secs(30)).await;
    assert_eq!(rec.images, vec!["render_montage.png"]);

    let mut cfg = small_config();
    cfg["frames_per_transition"] = json!(2);
    cfg["delay_cs"] = json!(30);
    let r = s.submit(json!({"config": cfg, "csv": CSV, "mode": "animation", "view": "top"})).await;
    let id = r.json::<SubmitResponse>().await.unwrap().job_id;
    let rec = s.wait(&id, Duration::from_secs(30)).await;
    assert_eq!(rec.images, vec!["render_top.gif"]);
    let r = s.get(&format!("/api/v1/jobs/{id}/images/render_top.gif")).await;
    assert_eq!(r.headers()["content-type"], "image/gif");
    assert!(r.bytes().await.unwrap().starts_with(b"GIF89a"));
}

#[tokio::test]
async fn validation_errors_name_keys() {
    let s = with_synthetic().await;
    let d = diagnostics(s.submit(json!({"config": {"colors": ["#GGGGGG", "#000000"]}, "csv": CSV})).await).await;
    assert!(d.iter().any(|(k, _)| k == "colors[0]"), "{d:?}");

    let d = diagnostics(s.submit(json!({"config": {"resolution": [0, 100]}, "csv": CSV})).await).await;
    assert!(d.iter().any(|(k, _)| k == "resolution[0]"), "{d:?}");

    let d = diagnostics(s.submit(json!({"config": {"resolution": [64, "tall"]}, "csv": CSV})).await).await;
    assert!(d.iter().any(|(k, _)| k == "config.resolution[1]" || k == "resolution[1]"), "{d:?}");

    let d = diagnostics(s.submit(json!({"config": {"atlas": "mouse"}, "csv": CSV})).await).await;
    assert!(d.iter().any(|(k, r)| k == "atlas" && r.contains("synthetic")), "{d:?}");

    let bad_csv = "Image-name-unique,frontal,cerebellum\na,1,2\n";
    let d = diagnostics(s.submit(json!({"config": {"strict": true}, "csv": bad_csv})).await).await;
    assert!(d.iter().any(|(k, r)| k == "csv" && r.contains("cerebellum")), "{d:?}");
    // Lenient mode ignores the column.
    assert_eq!(s.submit(json!({"config": small_config(), "csv": bad_csv})).await.status(), 201);

    let d = diagnostics(s.submit(json!({"config": {"out_dir": "/tmp"}, "csv": CSV})).await).await;
    assert!(d.iter().any(|(k, _)| k == "out_dir"), "{d:?}");

    let r = s
        .client
        .post(format!("{}/api/v1/jobs", s.base))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 400);
}

#[tokio::test]
async fn unknown_ids_and_traversal_are_404() {
    let s = with_synthetic().await;
    assert_eq!(s.get("/api/v1/jobs/0123456789abcdef").await.status(), 404);
    assert_eq!(s.get("/api/v1/jobs/0123456789abcdef/images/x.png").await.status(), 404);

    let id = s
        .submit(json!({"config": small_config(), "csv": CSV}))
        .await
        .json::<SubmitResponse>()
        .await
        .unwrap()
        .job_id;
    s.wait(&id, Duration::from_secs(30)).await;
    for name in ["..%2F..%2Fatlas%2Fmanifest.json", "..%2Fspool", "..", "render_a_top.png%00", "nope.png"] {
        let r = s.get(&format!("/api/v1/jobs/{id}/images/{name}")).await;
        assert_eq!(r.status(), 404, "{name}");
    }
}

#[tokio::test]
async fn queued_job_is_409_and_queue_cap_is_503() {
    let s = start(|o, dir| {
        o.workers = 0;
        vec![synthetic_manifest(&dir.join("atlas"))]
    })
    .await;
    let mut first = None;
    for i in 0..64 {
        let r = s.submit(json!({"config": small_config(), "csv": CSV})).await;
        assert_eq!(r.status(), 201, "submission {i}");
        first.get_or_insert(r.json::<SubmitResponse>().await.unwrap().job_id);
    }
    let r = s.submit(json!({"config": small_config(), "csv": CSV})).await;
    assert_eq!(r.status(), 503);
    let id = first.unwrap();
    assert_eq!(s.record(&id).await.status, JobStatus::Queued);
    assert_eq!(s.get(&format!("/api/v1/jobs/{id}/images/render_a_top.png")).await.status(), 409);
}

#[tokio::test]
async fn failed_job_is_409() {
    // An atlas whose only mesh has no faces renders nothing: the job fails.
    let s = start(|_, dir| {
        let d = dir.join("empty");
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(
            d.join("blob.ply"),
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n",
        )
        .unwrap();
        std::fs::write(
            d.join("manifest.json"),
            r#"{"atlas_id": "empty", "regions": [{"region_id": "blob", "mesh_path": "blob.ply", "hemisphere": "left", "structure_class": "cortical"}]}"#,
        )
        .unwrap();
        vec![load_manifest(&d.join("manifest.json")).unwrap()]
    })
    .await;
    let r = s
        .submit(json!({"config": {"resolution": [32, 32], "views": ["top"]}, "csv": "Image-name-unique,blob\na,1\n"}))
        .await;
    assert_eq!(r.status(), 201);
    let id = r.json::<SubmitResponse>().await.unwrap().job_id;
    let rec = s.wait(&id, Duration::from_secs(30)).await;
    assert_eq!(rec.status, JobStatus::Error);
    assert!(rec.images.is_empty());
    assert!(rec.error_message.is_some());
    assert_eq!(s.get(&format!("/api/v1/jobs/{id}/images/render_a_top.png")).await.status(), 409);
}

#[tokio::test]
async fn oversized_csv_is_413() {
    let s = start(|o, dir| {
        o.csv_cap = 128;
        vec![synthetic_manifest(&dir.join("atlas"))]
    })
    .await;
    let big = format!("Image-name-unique,frontal\n{}", "a,1\n".repeat(100));
    assert_eq!(s.submit(json!({"config": {}, "csv": big})).await.status(), 413);
    assert_eq!(s.submit(json!({"config": small_config(), "csv": CSV})).await.status(), 201);
}

#[tokio::test]
async fn atlas_listing() {
    let s = start(|_, dir| {
        let normal = synthetic_manifest(&dir.join("atlas"));
        let mut hollow = synthetic_manifest(&dir.join("hollow"));
        hollow.atlas_id = "mouse-like".into();
        hollow.hollow = true;
        vec![normal, hollow]
    })
    .await;
    let list: Vec<AtlasInfo> = s.get("/api/v1/atlases").await.json().await.unwrap();
    assert_eq!(list.len(), 2);
    let by_id = |id: &str| list.iter().find(|a| a.atlas_id == id).unwrap();
    assert_eq!(by_id("synthetic").regions, 12);
    assert_eq!(by_id("synthetic").views_supported.len(), 7);
    let hollow = &by_id("mouse-like").views_supported;
    assert_eq!(hollow.len(), 5);
    assert!(hollow.iter().all(|v| !v.contains("inner")));

    // With two atlases the config must name one; inner views are refused for the hollow one.
    let d = diagnostics(s.submit(json!({"config": {}, "csv": CSV})).await).await;
    assert!(d.iter().any(|(k, _)| k == "atlas"));
    let d = diagnostics(
        s.submit(json!({"config": {"atlas": "mouse-like", "views": ["top", "inner-left"]}, "csv": CSV}))
            .await,
    )
    .await;
    assert_eq!(d.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>(), vec!["views[1]"]);

    let empty = start(|_, _| Vec::new()).await;
    let list: Vec<AtlasInfo> = empty.get("/api/v1/atlases").await.json().await.unwrap();
    assert!(list.is_empty());
}

#[tokio::test]
async fn garbage_collection_drops_finished_jobs() {
    let s = with_synthetic().await;
    let id = s
        .submit(json!({"config": small_config(), "csv": CSV}))
        .await
        .json::<SubmitResponse>()
        .await
        .unwrap()
        .job_id;
    s.wait(&id, Duration::from_secs(30)).await;
    let jobs = &s.service.state().jobs;
    assert_eq!(jobs.registry.collect_garbage(Duration::from_secs(3600)), 0);
    assert_eq!(jobs.registry.collect_garbage(Duration::ZERO), 1);
    assert_eq!(s.get(&format!("/api/v1/jobs/{id}")).await.status(), 404);
    assert!(!jobs.spool().join(&id).exists());
}

#[tokio::test]
async fn index_cors_and_static_ui() {
    let s = start(|o, dir| {
        let ui = dir.join("ui");
        std::fs::create_dir_all(&ui).unwrap();
        std::fs::write(ui.join("index.html"), "<p>ui</p>").unwrap();
        o.ui_dir = Some(ui);
        o.cors_origin = Some("http://localhost:5173".into());
        vec![synthetic_manifest(&dir.join("atlas"))]
    })
    .await;
    let r = s.get("/").await;
    assert_eq!(r.status(), 200);
    assert_eq!(r.text().await.unwrap(), "<p>ui</p>");
    let r = s
        .client
        .request(reqwest::Method::OPTIONS, format!("{}/api/v1/jobs", s.base))
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .header("access-control-request-headers", "content-type")
        .send()
        .await
        .unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "http://localhost:5173");

    let plain = with_synthetic().await;
    let r = plain.get("/").await;
    assert_eq!(r.status(), 200);
    assert!(r.text().await.unwrap().contains("/api/v1/"));
}
