//! JSON render configuration: parsing, three-layer precedence
//! (flags > file > defaults), validation with key-path diagnostics, and job
//! assembly.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atlas::{AtlasError, AtlasManifest};
use crate::biomarker::{parse_biomarker_csv_with, BiomarkerError, BiomarkerTable, CsvOptions, LogScale};
use crate::colormap::{parse_hex_color, ColorGradient, Rgb, DEFAULT_GRADIENT};
use crate::compose::{ComposeError, RenderJob, MIN_RESOLUTION};
use crate::render::NamedView;

pub const DEFAULT_RESOLUTION: [u32; 2] = [1200, 900];
pub const MAX_RESOLUTION: u32 = 8192;
pub const DEFAULT_VIEWS: [NamedView; 3] = [NamedView::CorticalOuterRight, NamedView::Subcortical, NamedView::Top];
pub const DEFAULT_BACKGROUND: &str = "#FFFFFF";
pub const DEFAULT_FOLD_RANGE: f64 = 1000.0;
pub const DEFAULT_PREFIX: &str = "render";
pub const DEFAULT_MONTAGE_PAD: u32 = 8;
pub const DEFAULT_FRAMES_PER_TRANSITION: u32 = 4;
pub const DEFAULT_DELAY_CS: u16 = 50;

/// One offending key and what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub key: String,
    pub reason: String,
}

impl Diagnostic {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ConfigError {
    pub fn single(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            diagnostics: vec![Diagnostic::new(key, reason)],
        }
    }

    /// True if some diagnostic names `key`.
    pub fn names(&self, key: &str) -> bool {
        self.diagnostics.iter().any(|d| d.key == key)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Every config key, each optional. A file, a set of command-line flags and
/// a service request body are each one layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atlas: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub views: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shell_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_transform: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_fold_range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub montage_pad: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames_per_transition: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_cs: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dither: Option<bool>,
}

macro_rules! overlay {
    ($hi:ident, $lo:ident; $($f:ident),*) => {
        ConfigLayer { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl ConfigLayer {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." { String::new() } else { key };
            ConfigError::single(key, e.into_inner().to_string())
        })
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." { String::new() } else { key };
            ConfigError::single(key, e.into_inner().to_string())
        })
    }

    /// Values in `self` win over values in `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        let hi = self;
        let lo = lower;
        overlay!(hi, lo; atlas, input_csv, colors, views, resolution, shell_alpha, log_transform,
            log_fold_range, log_ref, background, out_dir, strict, prefix, montage_pad,
            frames_per_transition, delay_cs, dither)
    }

    /// Makes relative paths relative to `base` (a config file's directory).
    pub fn rebase_paths(mut self, base: &Path) -> Self {
        for p in [&mut self.atlas, &mut self.input_csv, &mut self.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }
}

/// A validated configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub atlas: Option<PathBuf>,
    pub input_csv: Option<PathBuf>,
    pub colors: Vec<String>,
    pub gradient: ColorGradient<f64>,
    pub views: Vec<NamedView>,
    pub resolution: [u32; 2],
    pub shell_alpha: f64,
    pub log_transform: bool,
    pub log_fold_range: f64,
    pub log_ref: Option<f64>,
    pub background: Rgb<f64>,
    pub background_hex: String,
    pub out_dir: PathBuf,
    pub strict: bool,
    pub prefix: String,
    pub montage_pad: u32,
    pub frames_per_transition: u32,
    pub delay_cs: u16,
    pub dither: bool,
}

impl Default for Config {
    fn default() -> Self {
        resolve(ConfigLayer::default()).expect("defaults are valid")
    }
}

fn allowed_views() -> String {
    NamedView::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ")
}

/// Applies defaults to `layer` and validates every key.
pub fn resolve(layer: ConfigLayer) -> Result<Config, ConfigError> {
    let mut diags = Vec::new();

    let colors = layer
        .colors
        .unwrap_or_else(|| DEFAULT_GRADIENT.iter().map(|s| s.to_string()).collect());
    let mut anchors = Vec::with_capacity(colors.len());
    for (i, c) in colors.iter().enumerate() {
        match parse_hex_color::<f64>(c) {
            Ok(rgb) => anchors.push(rgb),
            Err(e) => diags.push(Diagnostic::new(format!("colors[{i}]"), e.to_string())),
        }
    }
    if colors.len() < 2 {
        diags.push(Diagnostic::new("colors", format!("need at least 2 colors, got {}", colors.len())));
    }
    let gradient = ColorGradient::new(anchors).ok();

    let views = match layer.views {
        None => DEFAULT_VIEWS.to_vec(),
        Some(names) => {
            if names.is_empty() {
                diags.push(Diagnostic::new("views", "view list is empty"));
            }
            let mut views = Vec::new();
            for (i, name) in names.iter().enumerate() {
                match name.parse::<NamedView>() {
                    Ok(v) if views.contains(&v) => {
                        diags.push(Diagnostic::new(format!("views[{i}]"), format!("duplicate view `{name}`")))
                    }
                    Ok(v) => views.push(v),
                    Err(_) => diags.push(Diagnostic::new(
                        format!("views[{i}]"),
                        format!("unknown view `{name}`; allowed: {}", allowed_views()),
                    )),
                }
            }
            views
        }
    };

    let resolution = layer.resolution.unwrap_or(DEFAULT_RESOLUTION);
    for (i, &n) in resolution.iter().enumerate() {
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&n) {
            diags.push(Diagnostic::new(
                format!("resolution[{i}]"),
                format!("{n} is outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]"),
            ));
        }
    }

    let shell_alpha = layer.shell_alpha.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&shell_alpha) {
        diags.push(Diagnostic::new("shell_alpha", format!("{shell_alpha} is outside [0, 1]")));
    }
    let log_fold_range = layer.log_fold_range.unwrap_or(DEFAULT_FOLD_RANGE);
    if !(log_fold_range.is_finite() && log_fold_range > 1.0) {
        diags.push(Diagnostic::new("log_fold_range", format!("must be > 1, got {log_fold_range}")));
    }
    if let Some(r) = layer.log_ref {
        if !(r.is_finite() && r > 0.0) {
            diags.push(Diagnostic::new("log_ref", format!("must be > 0, got {r}")));
        }
    }

    let background_hex = layer.background.unwrap_or_else(|| DEFAULT_BACKGROUND.to_owned());
    let background = match parse_hex_color::<f64>(&background_hex) {
        Ok(c) => c,
        Err(e) => {
            diags.push(Diagnostic::new("background", e.to_string()));
            Rgb::splat(1.0)
        }
    };

    let prefix = layer.prefix.unwrap_or_else(|| DEFAULT_PREFIX.to_owned());
    if prefix.is_empty() || prefix.contains(['/', '\\']) || prefix == "." || prefix == ".." {
        diags.push(Diagnostic::new("prefix", format!("`{prefix}` is not a plain file-name prefix")));
    }
    let frames_per_transition = layer.frames_per_transition.unwrap_or(DEFAULT_FRAMES_PER_TRANSITION);
    if frames_per_transition == 0 {
        diags.push(Diagnostic::new("frames_per_transition", "must be ≥ 1"));
    }

    if !diags.is_empty() {
        return Err(ConfigError { diagnostics: diags });
    }
    Ok(Config {
        atlas: layer.atlas,
        input_csv: layer.input_csv,
        colors,
        gradient: gradient.expect("validated colors"),
        views,
        resolution,
        shell_alpha,
        log_transform: layer.log_transform.unwrap_or(false),
        log_fold_range,
        log_ref: layer.log_ref,
        background,
        background_hex,
        out_dir: layer.out_dir.unwrap_or_else(|| PathBuf::from(".")),
        strict: layer.strict.unwrap_or(false),
        prefix,
        montage_pad: layer.montage_pad.unwrap_or(DEFAULT_MONTAGE_PAD),
        frames_per_transition,
        delay_cs: layer.delay_cs.unwrap_or(DEFAULT_DELAY_CS),
        dither: layer.dither.unwrap_or(false),
    })
}

/// Reads a config file layer; relative paths in it resolve against the
/// file's directory.
pub fn load_config_layer(path: &Path) -> Result<ConfigLayer, LoadConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    let layer = ConfigLayer::from_json(&text).map_err(LoadConfigError::Invalid)?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(layer.rebase_paths(base))
}

/// Loads a config file and applies defaults for omitted keys.
pub fn load_config(path: &Path) -> Result<Config, LoadConfigError> {
    resolve(load_config_layer(path)?).map_err(LoadConfigError::Invalid)
}

/// Flags over file over defaults.
pub fn load_config_with_overrides(path: Option<&Path>, flags: ConfigLayer) -> Result<Config, LoadConfigError> {
    let file = match path {
        Some(p) => load_config_layer(p)?,
        None => ConfigLayer::default(),
    };
    resolve(flags.over(file)).map_err(LoadConfigError::Invalid)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(ConfigError),
}

/// Failure to turn a config plus inputs into a [`RenderJob`].
#[derive(Debug, thiserror::Error)]
pub enum JobError {
    #[error("invalid input: {0}")]
    Invalid(ConfigError),
    #[error(transparent)]
    Atlas(AtlasError),
    #[error(transparent)]
    Compose(ComposeError),
}

impl JobError {
    /// True for unreadable or missing files, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        let atlas = match self {
            JobError::Atlas(e) => e,
            JobError::Compose(ComposeError::Atlas(e)) => e,
            JobError::Compose(ComposeError::Io { .. }) => return true,
            _ => return false,
        };
        match atlas {
            AtlasError::Io { .. } | AtlasError::MissingMesh { .. } => true,
            AtlasError::Region { source, .. } => matches!(
                source.as_ref(),
                AtlasError::Io { .. } | AtlasError::MissingMesh { .. }
            ),
            _ => false,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            JobError::Invalid(e) => e.diagnostics.clone(),
            JobError::Atlas(e) => vec![Diagnostic::new("atlas", e.to_string())],
            JobError::Compose(e) => vec![Diagnostic::new("job", e.to_string())],
        }
    }
}

impl Config {
    pub fn csv_options(&self) -> CsvOptions<f64> {
        CsvOptions {
            k: self.gradient.k(),
            strict: self.strict,
            log: self.log_transform.then_some(LogScale {
                fold_range: self.log_fold_range,
                reference: self.log_ref,
            }),
        }
    }

    /// Parses the CSV against `manifest`; errors are keyed `input_csv`.
    pub fn parse_table(&self, manifest: &AtlasManifest, csv: &str) -> Result<BiomarkerTable<f64>, ConfigError> {
        parse_biomarker_csv_with(csv, manifest, &self.csv_options()).map_err(|e| {
            let key = match e {
                BiomarkerError::InvalidFoldRange(_) => "log_fold_range",
                BiomarkerError::InvalidReference(_) => "log_ref",
                _ => "input_csv",
            };
            ConfigError::single(key, e.to_string())
        })
    }

    /// Checks config/atlas compatibility that does not depend on the CSV.
    pub fn check_against(&self, manifest: &AtlasManifest) -> Result<(), ConfigError> {
        let diags: Vec<Diagnostic> = self
            .views
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_inner() && manifest.hollow)
            .map(|(i, v)| {
                Diagnostic::new(
                    format!("views[{i}]"),
                    format!("view `{}` is not supported by hollow atlas `{}`", v.name(), manifest.atlas_id),
                )
            })
            .collect();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { diagnostics: diags })
        }
    }

    pub fn output_prefix(&self) -> PathBuf {
        self.out_dir.join(&self.prefix)
    }

    /// Parses the table and loads every mesh into a ready-to-render job.
    pub fn build_job(&self, manifest: AtlasManifest, csv: &str) -> Result<RenderJob, JobError> {
        let table = self.parse_table(&manifest, csv).map_err(JobError::Invalid)?;
        self.build_job_with_table(manifest, table)
    }

    pub fn build_job_with_table(
        &self,
        manifest: AtlasManifest,
        table: BiomarkerTable<f64>,
    ) -> Result<RenderJob, JobError> {
        RenderJob::new(
            manifest,
            table,
            self.gradient.clone(),
            self.views.clone(),
            (self.resolution[0], self.resolution[1]),
            self.shell_alpha,
            self.background,
            self.output_prefix(),
        )
        .map_err(|e| match e {
            ComposeError::Atlas(a) => JobError::Atlas(a),
            other => JobError::Compose(other),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = resolve(ConfigLayer::from_json("{}").unwrap()).unwrap();
        assert_eq!(c.resolution, [1200, 900]);
        assert_eq!(c.views, DEFAULT_VIEWS.to_vec());
        assert_eq!(c.shell_alpha, 0.0);
        assert_eq!(c.background, Rgb::splat(1.0));
        assert_eq!(c.gradient, ColorGradient::default_gradient());
        assert!(!c.log_transform);
        assert_eq!(c.log_fold_range, 1000.0);
    }

    #[test]
    fn bad_color_names_index() {
        let e = resolve(ConfigLayer::from_json(r##"{"colors": ["#GGGGGG", "#000000"]}"##).unwrap()).unwrap_err();
        assert!(e.names("colors[0]"), "{e}");
    }

    #[test]
    fn tiny_resolution_rejected() {
        let e = resolve(ConfigLayer::from_json(r#"{"resolution": [0, 100]}"#).unwrap()).unwrap_err();
        assert!(e.names("resolution[0]"), "{e}");
        assert!(!e.names("resolution[1]"));
    }

    #[test]
    fn type_errors_carry_path() {
        let e = ConfigLayer::from_json(r#"{"resolution": [10, "x"]}"#).unwrap_err();
        assert!(e.names("resolution[1]"), "{e}");
        let e = ConfigLayer::from_json(r#"{"colour": []}"#).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
    }

    #[test]
    fn unknown_view_lists_allowed() {
        let e = resolve(ConfigLayer::from_json(r#"{"views": ["top", "sideways"]}"#).unwrap()).unwrap_err();
        assert!(e.names("views[1]"));
        assert!(e.to_string().contains("sideways"));
        assert!(e.to_string().contains("cortical-outer-left"));
    }

    #[test]
    fn precedence_per_key() {
        let defaults = ConfigLayer::default();
        let file = ConfigLayer {
            shell_alpha: Some(0.3),
            resolution: Some([640, 480]),
            ..Default::default()
        };
        let flags = ConfigLayer {
            resolution: Some([320, 240]),
            ..Default::default()
        };
        let c = resolve(flags.over(file.clone()).over(defaults)).unwrap();
        assert_eq!(c.resolution, [320, 240]);
        assert_eq!(c.shell_alpha, 0.3);
        assert_eq!(c.background_hex, "#FFFFFF");
        let c = resolve(ConfigLayer::default().over(file)).unwrap();
        assert_eq!(c.resolution, [640, 480]);
    }

    #[test]
    fn relative_paths_follow_file() {
        let l = ConfigLayer {
            atlas: Some("atlas/manifest.json".into()),
            out_dir: Some("/abs/out".into()),
            ..Default::default()
        }
        .rebase_paths(Path::new("/cfg"));
        assert_eq!(l.atlas.unwrap(), Path::new("/cfg/atlas/manifest.json"));
        assert_eq!(l.out_dir.unwrap(), Path::new("/abs/out"));
    }
}
