//! `atlaspaint` command-line tool.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use atlaspaint_core::atlas::{load_manifest, AtlasError};
use atlaspaint_core::compose::{render_job, write_animation, write_montage, RenderJob};
use atlaspaint_core::config::{load_config_with_overrides, Config, ConfigLayer, JobError, LoadConfigError};
use atlaspaint_core::render::NamedView;
use atlaspaint_core::{prep_atlas, AtlasManifest};
use atlaspaint_service::ServiceOptions;
use clap::{Args, Parser, Subcommand};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "atlaspaint", version, about = "Color brain-atlas regions by biomarker values and render figures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a raw atlas: apply transforms, split hemispheres, write binary PLYs.
    PrepAtlas {
        #[arg(long, value_name = "DIR")]
        raw: PathBuf,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// One PNG per (stage, view).
    Render(JobArgs),
    /// A single stage × view grid PNG.
    Montage {
        #[command(flatten)]
        job: JobArgs,
        /// Pixels between and around cells.
        #[arg(long)]
        pad: Option<u32>,
    },
    /// An animated GIF of one view across all stages.
    Animate {
        #[command(flatten)]
        job: JobArgs,
        /// View to animate (default: first configured view).
        #[arg(long)]
        view: Option<String>,
        /// Frames per stage transition.
        #[arg(long)]
        fpt: Option<u32>,
        /// Frame delay in centiseconds.
        #[arg(long)]
        delay: Option<u16>,
        #[arg(long)]
        dither: bool,
    },
    /// Check config, CSV and atlas without rendering.
    Validate(JobArgs),
    /// Run the HTTP job service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct JobArgs {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Atlas manifest.
    #[arg(long, value_name = "FILE")]
    atlas: Option<PathBuf>,
    /// Biomarker CSV.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated view names.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<String>>,
    /// Comma-separated `#RRGGBB` anchors, lowest value first.
    #[arg(long, value_delimiter = ',')]
    colors: Option<Vec<String>>,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<[u32; 2]>,
    #[arg(long)]
    shell_alpha: Option<f64>,
    #[arg(long)]
    background: Option<String>,
    #[arg(long, overrides_with = "no_log_transform")]
    log_transform: bool,
    #[arg(long)]
    no_log_transform: bool,
    #[arg(long)]
    log_fold_range: Option<f64>,
    #[arg(long)]
    log_ref: Option<f64>,
    /// Reject CSV columns that are not atlas regions.
    #[arg(long)]
    strict: bool,
    /// Output file name prefix.
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Atlas manifest to register; repeatable.
    #[arg(long = "atlas", value_name = "FILE")]
    atlases: Vec<PathBuf>,
    /// Job working directory.
    #[arg(long, value_name = "DIR", default_value = "atlaspaint-spool")]
    spool: PathBuf,
    /// Static files served at `/`.
    #[arg(long, value_name = "DIR")]
    ui: Option<PathBuf>,
    /// Allowed browser origin for cross-origin requests (`*` for any).
    #[arg(long)]
    cors_origin: Option<String>,
    /// Concurrent render jobs.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = atlaspaint_service::DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
    /// Largest accepted CSV, in bytes.
    #[arg(long, default_value_t = atlaspaint_service::DEFAULT_CSV_CAP)]
    csv_cap: usize,
    /// Hours to keep finished jobs.
    #[arg(long, default_value_t = 24.0)]
    retention_hours: f64,
}

fn parse_resolution(s: &str) -> Result<[u32; 2], String> {
    let (w, h) = s
        .split_once(['x', 'X', ','])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let n = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("`{t}`: {e}"));
    Ok([n(w)?, n(h)?])
}

impl JobArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            atlas: self.atlas.clone(),
            input_csv: self.input.clone(),
            colors: self.colors.clone(),
            views: self.views.clone(),
            resolution: self.resolution,
            shell_alpha: self.shell_alpha,
            log_transform: if self.log_transform {
                Some(true)
            } else if self.no_log_transform {
                Some(false)
            } else {
                None
            },
            log_fold_range: self.log_fold_range,
            log_ref: self.log_ref,
            background: self.background.clone(),
            out_dir: self.out.clone(),
            strict: self.strict.then_some(true),
            prefix: self.prefix.clone(),
            ..Default::default()
        }
    }
}

/// An error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

fn atlas_failure(e: AtlasError) -> Failure {
    match e {
        AtlasError::Io { .. } | AtlasError::MissingMesh { .. } => Failure::io(e.to_string()),
        AtlasError::Region { ref source, .. }
            if matches!(**source, AtlasError::Io { .. } | AtlasError::MissingMesh { .. }) =>
        {
            Failure::io(e.to_string())
        }
        _ => Failure::validation(e.to_string()),
    }
}

fn config_failure(e: LoadConfigError) -> Failure {
    match e {
        LoadConfigError::Io { .. } => Failure::io(e.to_string()),
        LoadConfigError::Invalid(c) => Failure::validation(diagnostics_text(&c.diagnostics)),
    }
}

fn diagnostics_text(diags: &[atlaspaint_core::Diagnostic]) -> String {
    let mut s = String::from("invalid input:");
    for d in diags {
        s.push_str(&format!("\n  {}: {}", if d.key.is_empty() { "(root)" } else { &d.key }, d.reason));
    }
    s
}

fn job_failure(e: JobError) -> Failure {
    if e.is_io() {
        Failure::io(e.to_string())
    } else if let JobError::Invalid(c) = &e {
        Failure::validation(diagnostics_text(&c.diagnostics))
    } else {
        Failure::validation(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str, flag: &str) -> Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| Failure::validation(format!("invalid input:\n  {key}: not set (config key `{key}` or {flag})")))
}

/// Config, atlas and CSV, with mesh loading and validation done.
fn load_job(args: &JobArgs) -> Result<(Config, RenderJob), Failure> {
    let config = load_config_with_overrides(args.config.as_deref(), args.layer()).map_err(config_failure)?;
    let manifest: AtlasManifest =
        load_manifest(required(&config.atlas, "atlas", "--atlas")?).map_err(atlas_failure)?;
    let csv = read_text(required(&config.input_csv, "input_csv", "--input")?)?;
    let job = config.build_job(manifest, &csv).map_err(job_failure)?;
    for w in &job.table.warnings {
        eprintln!("warning: {w}");
    }
    Ok((config, job))
}

fn print_paths<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn compose_failure(e: atlaspaint_core::ComposeError) -> Failure {
    use atlaspaint_core::ComposeError as E;
    match e {
        E::Io { .. } => Failure::io(e.to_string()),
        E::Atlas(a) => atlas_failure(a),
        other => Failure::validation(other.to_string()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::PrepAtlas { raw, manifest, out } => {
            let report = prep_atlas(&raw, &manifest, &out).map_err(atlas_failure)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", report.manifest_path.display());
            Ok(())
        }
        Command::Render(args) => {
            let (_, job) = load_job(&args)?;
            let report = render_job(&job).map_err(compose_failure)?;
            print_paths(&report.files);
            if report.is_complete() {
                Ok(())
            } else {
                let msgs: Vec<String> = report.failures.iter().map(|f| format!("  {f}")).collect();
                Err(Failure::validation(format!("some views failed:\n{}", msgs.join("\n"))))
            }
        }
        Command::Montage { job: args, pad } => {
            let (config, job) = load_job(&args)?;
            let path = write_montage(&job, pad.unwrap_or(config.montage_pad), config.background)
                .map_err(compose_failure)?;
            print_paths([&path]);
            Ok(())
        }
        Command::Animate {
            job: args,
            view,
            fpt,
            delay,
            dither,
        } => {
            let (config, job) = load_job(&args)?;
            let view = match view {
                Some(v) => v.parse::<NamedView>().map_err(|e| {
                    let allowed: Vec<&str> = NamedView::ALL.iter().map(|v| v.name()).collect();
                    Failure::validation(format!("{e}; allowed: {}", allowed.join(", ")))
                })?,
                None => config.views[0],
            };
            let fpt = fpt.unwrap_or(config.frames_per_transition);
            if fpt == 0 {
                return Err(Failure::validation("--fpt must be ≥ 1"));
            }
            let path = write_animation(
                &job,
                view,
                fpt as usize,
                delay.unwrap_or(config.delay_cs),
                dither || config.dither,
            )
            .map_err(compose_failure)?;
            print_paths([&path]);
            Ok(())
        }
        Command::Validate(args) => {
            let (config, job) = load_job(&args)?;
            config.check_against(&job.manifest).map_err(|e| Failure::validation(diagnostics_text(&e.diagnostics)))?;
            println!("atlas: {} ({} regions)", job.manifest.atlas_id, job.manifest.regions.len());
            println!("stages ({}): {}", job.table.stages.len(), job.table.stages.join(", "));
            let regions: Vec<String> = job.table.keys().iter().map(|k| k.to_string()).collect();
            println!("regions with data ({}): {}", regions.len(), regions.join(", "));
            let views: Vec<&str> = job.views.iter().map(|v| v.name()).collect();
            println!("views: {}", views.join(", "));
            println!("resolution: {}x{}", job.width, job.height);
            println!("colors: {} (K = {})", config.colors.join(" "), job.gradient.k());
            println!("output: {}", job.output_prefix.display());
            Ok(())
        }
        Command::Serve(args) => serve(args),
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let manifests = args
        .atlases
        .iter()
        .map(|p| load_manifest(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(atlas_failure)?;
    if !(args.retention_hours.is_finite() && args.retention_hours > 0.0) {
        return Err(Failure::validation("--retention-hours must be positive"));
    }
    let mut options = ServiceOptions::new(args.spool);
    options.workers = args.workers.unwrap_or(options.workers);
    options.queue_cap = args.queue_cap;
    options.csv_cap = args.csv_cap;
    options.retention = Duration::from_secs_f64(args.retention_hours * 3600.0);
    options.ui_dir = args.ui;
    options.cors_origin = args.cors_origin;
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::io(e.to_string()))?;
    runtime
        .block_on(atlaspaint_service::run(options, manifests, addr))
        .map_err(|e| match e {
            atlaspaint_service::ServiceError::Atlas { source, .. } => atlas_failure(source),
            atlaspaint_service::ServiceError::BadOrigin(_) => Failure::validation(e.to_string()),
            other => Failure::io(other.to_string()),
        })
}

fn init_threads() {
    let threads = std::env::var("ATLASPAINT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("ATLASPAINT_THREADS: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
