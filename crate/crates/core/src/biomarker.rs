//! Biomarker CSV ingestion, log-normalization and stage interpolation.
//!
//! The CSV header is `Image-name-unique` followed by region columns. A column
//! named after a region without suffix applies to every hemisphere the atlas
//! has for that region; a `-lh` / `-rh` suffix binds one hemisphere and wins
//! over the unsuffixed column. Regions absent from the CSV read as 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::atlas::{AtlasManifest, Hemisphere, RegionKey};
use crate::scalar::Real;

pub const STAGE_HEADER: &str = "Image-name-unique";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BiomarkerError {
    #[error("bad CSV header: {0}")]
    BadHeader(String),
    #[error("unknown region column `{column}` (not in atlas `{atlas_id}`)")]
    UnknownRegion { column: String, atlas_id: String },
    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NonNumericValue {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column `{column}`: value {value} outside [0, {k}]")]
    OutOfRange {
        line: usize,
        column: String,
        value: f64,
        k: usize,
    },
    #[error("CSV has no stage rows")]
    NoStages,
    #[error("negative value {value} cannot be log-transformed ({context})")]
    NegativeValue { value: f64, context: String },
    #[error("log fold range must be > 1, got {0}")]
    InvalidFoldRange(f64),
    #[error("log reference must be > 0, got {0}")]
    InvalidReference(f64),
}

/// Log scaling applied to raw measurements before range checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScale<S> {
    pub fold_range: S,
    /// Overrides the table-wide minimum positive value.
    pub reference: Option<S>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvOptions<S> {
    pub k: usize,
    pub strict: bool,
    pub log: Option<LogScale<S>>,
}

/// Stage × region values in `[0, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiomarkerTable<S> {
    pub stages: Vec<String>,
    pub k: usize,
    /// One map per stage; absent keys read as zero.
    pub values: Vec<BTreeMap<RegionKey, S>>,
    pub warnings: Vec<String>,
}

impl<S: Real> BiomarkerTable<S> {
    pub fn stage_index(&self, label: &str) -> Option<usize> {
        self.stages.iter().position(|s| s == label)
    }

    pub fn value(&self, stage: usize, key: &RegionKey) -> S {
        self.values
            .get(stage)
            .and_then(|m| m.get(key))
            .copied()
            .unwrap_or_else(S::zero)
    }

    /// Every key that has an explicit value in some stage.
    pub fn keys(&self) -> Vec<RegionKey> {
        let mut keys: Vec<RegionKey> = self.values.iter().flat_map(|m| m.keys().cloned()).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Re-serializes as a fully suffixed CSV (one column per key).
    pub fn to_csv(&self) -> String {
        let keys = self.keys();
        let mut out = String::from(STAGE_HEADER);
        for k in &keys {
            let _ = write!(out, ",{k}");
        }
        out.push('\n');
        for (i, stage) in self.stages.iter().enumerate() {
            out.push_str(stage);
            for k in &keys {
                let _ = write!(out, ",{}", self.value(i, k));
            }
            out.push('\n');
        }
        out
    }

    /// Copy with the `-lh` and `-rh` values of every region exchanged.
    pub fn swap_hemispheres(&self) -> Self {
        let flip = |h| match h {
            Hemisphere::Left => Hemisphere::Right,
            Hemisphere::Right => Hemisphere::Left,
            Hemisphere::Both => Hemisphere::Both,
        };
        Self {
            values: self
                .values
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|(k, &v)| (RegionKey::new(k.region.clone(), flip(k.hemisphere)), v))
                        .collect()
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// A column resolved against the manifest.
struct Column {
    name: String,
    keys: Vec<RegionKey>,
    specific: bool,
}

fn resolve_columns(
    header: &[&str],
    manifest: &AtlasManifest,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<Option<Column>>, BiomarkerError> {
    let known: Vec<RegionKey> = manifest.keys().collect();
    let mut seen = std::collections::HashSet::new();
    let mut columns = Vec::with_capacity(header.len());
    for &name in header {
        if name.is_empty() {
            return Err(BiomarkerError::BadHeader("empty column name".into()));
        }
        if !seen.insert(name) {
            return Err(BiomarkerError::BadHeader(format!("duplicate column `{name}`")));
        }
        let suffixed = [("-lh", Hemisphere::Left), ("-rh", Hemisphere::Right)]
            .iter()
            .find_map(|(sfx, h)| name.strip_suffix(sfx).map(|base| RegionKey::new(base, *h)))
            .filter(|k| known.contains(k));
        let column = if let Some(key) = suffixed {
            Some(Column {
                name: name.to_owned(),
                keys: vec![key],
                specific: true,
            })
        } else {
            let keys: Vec<RegionKey> = known.iter().filter(|k| k.region == name).cloned().collect();
            (!keys.is_empty()).then(|| Column {
                name: name.to_owned(),
                keys,
                specific: false,
            })
        };
        if column.is_none() {
            if strict {
                return Err(BiomarkerError::UnknownRegion {
                    column: name.to_owned(),
                    atlas_id: manifest.atlas_id.clone(),
                });
            }
            warnings.push(format!(
                "column `{name}` is not a region of atlas `{}`; ignored",
                manifest.atlas_id
            ));
        }
        columns.push(column);
    }
    Ok(columns)
}

/// Parses a biomarker CSV whose values are already on the `[0, k]` scale.
pub fn parse_biomarker_csv<S: Real>(
    text: &str,
    manifest: &AtlasManifest,
    k: usize,
    strict: bool,
) -> Result<BiomarkerTable<S>, BiomarkerError> {
    parse_biomarker_csv_with(
        text,
        manifest,
        &CsvOptions {
            k,
            strict,
            log: None,
        },
    )
}

pub fn parse_biomarker_csv_with<S: Real>(
    text: &str,
    manifest: &AtlasManifest,
    opts: &CsvOptions<S>,
) -> Result<BiomarkerTable<S>, BiomarkerError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| BiomarkerError::BadHeader("empty input".into()))?;
    let header: Vec<&str> = header_line.split(',').map(str::trim).collect();
    if header[0] != STAGE_HEADER {
        return Err(BiomarkerError::BadHeader(format!(
            "first header cell must be `{STAGE_HEADER}`, found `{}`",
            header[0]
        )));
    }
    let mut warnings = Vec::new();
    let columns = resolve_columns(&header[1..], manifest, opts.strict, &mut warnings)?;

    // Raw cells, with the line each came from for diagnostics.
    let mut stages = Vec::new();
    let mut raw: Vec<(usize, Vec<S>)> = Vec::new();
    for (line, row) in lines {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(BiomarkerError::RowLength {
                line,
                expected: header.len(),
                found: cells.len(),
            });
        }
        let mut values = Vec::with_capacity(cells.len() - 1);
        for (ci, cell) in cells[1..].iter().enumerate() {
            let v: f64 = match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ if columns[ci].is_none() => 0.0,
                _ => {
                    return Err(BiomarkerError::NonNumericValue {
                        line,
                        column: header[ci + 1].to_owned(),
                        value: (*cell).to_owned(),
                    })
                }
            };
            values.push(S::lit(v));
        }
        stages.push(cells[0].to_owned());
        raw.push((line, values));
    }
    if stages.is_empty() {
        return Err(BiomarkerError::NoStages);
    }

    if let Some(scale) = opts.log {
        let mut flat = BTreeMap::new();
        for (si, (_, row)) in raw.iter().enumerate() {
            for (ci, &v) in row.iter().enumerate() {
                if columns[ci].is_some() {
                    flat.insert((si, ci), v);
                }
            }
        }
        let normalized = log_normalize(&flat, scale.fold_range, opts.k, scale.reference)
            .map_err(|e| match e {
                BiomarkerError::NegativeValue { value, .. } => {
                    let (si, ci) = flat
                        .iter()
                        .find(|(_, &v)| v < S::zero())
                        .map(|(k, _)| *k)
                        .expect("negative value present");
                    BiomarkerError::NegativeValue {
                        value,
                        context: format!("line {}, column `{}`", raw[si].0, header[ci + 1]),
                    }
                }
                other => other,
            })?;
        for ((si, ci), v) in normalized {
            raw[si].1[ci] = v;
        }
    }

    let k_s = S::lit(opts.k as f64);
    let mut values = vec![BTreeMap::new(); stages.len()];
    for (si, (line, row)) in raw.iter().enumerate() {
        // Unsuffixed columns first so hemisphere-specific ones override them.
        for pass_specific in [false, true] {
            for (ci, col) in columns.iter().enumerate() {
                let Some(col) = col.as_ref().filter(|c| c.specific == pass_specific) else {
                    continue;
                };
                let mut v = row[ci];
                if v < S::zero() || v > k_s {
                    if opts.strict {
                        return Err(BiomarkerError::OutOfRange {
                            line: *line,
                            column: col.name.clone(),
                            value: v.to_f64_lossy(),
                            k: opts.k,
                        });
                    }
                    let clamped = v.max(S::zero()).min(k_s);
                    warnings.push(format!(
                        "line {line}, column `{}`: {v} clamped to {clamped}",
                        col.name
                    ));
                    v = clamped;
                }
                for key in &col.keys {
                    values[si].insert(key.clone(), v);
                }
            }
        }
    }
    Ok(BiomarkerTable {
        stages,
        k: opts.k,
        values,
        warnings,
    })
}

/// Maps positive measurements onto `[0, k]` over a `fold_range`-fold log scale.
///
/// `v = k · clamp(log10(x / x_ref), 0, log10(F)) / log10(F)` where `x_ref` is
/// `reference` or the smallest positive input. Zeros map to 0. Ratios within a
/// few ulps of either bound snap to it so the anchors come out exact.
pub fn log_normalize<K: Ord + Clone, S: Real>(
    raw: &BTreeMap<K, S>,
    fold_range: S,
    k: usize,
    reference: Option<S>,
) -> Result<BTreeMap<K, S>, BiomarkerError> {
    if !(fold_range > S::one()) || !fold_range.is_finite() {
        return Err(BiomarkerError::InvalidFoldRange(fold_range.to_f64_lossy()));
    }
    if let Some(&neg) = raw.values().find(|&&v| v < S::zero() || v.is_nan()) {
        return Err(BiomarkerError::NegativeValue {
            value: neg.to_f64_lossy(),
            context: "log_normalize".into(),
        });
    }
    let x_ref = match reference {
        Some(r) if r > S::zero() && r.is_finite() => Some(r),
        Some(r) => return Err(BiomarkerError::InvalidReference(r.to_f64_lossy())),
        None => raw
            .values()
            .copied()
            .filter(|&v| v > S::zero())
            .fold(None, |m: Option<S>, v| Some(m.map_or(v, |m| m.min(v)))),
    };
    let k_s = S::lit(k as f64);
    let log_span = fold_range.log10();
    let snap = S::epsilon() * S::lit(8.0);
    Ok(raw
        .iter()
        .map(|(key, &x)| {
            let v = match x_ref {
                Some(x_ref) if x > S::zero() => {
                    let ratio = x / x_ref;
                    if ratio >= fold_range * (S::one() - snap) {
                        k_s
                    } else if ratio <= S::one() + snap {
                        S::zero()
                    } else {
                        k_s * (ratio.log10() / log_span)
                    }
                }
                _ => S::zero(),
            };
            (key.clone(), v)
        })
        .collect())
}

/// Per-key linear blend `(1 − t)·v_i + t·v_j` between two stages.
///
/// Results are clamped to the segment between the endpoints, so `t = 0` and
/// `t = 1` reproduce the stages exactly.
pub fn interpolate_stages<S: Real>(
    table: &BiomarkerTable<S>,
    i: usize,
    j: usize,
    t: S,
) -> BTreeMap<RegionKey, S> {
    let mut keys: Vec<&RegionKey> = table.values[i].keys().chain(table.values[j].keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|key| {
            let (a, b) = (table.value(i, key), table.value(j, key));
            let v = (S::one() - t) * a + t * b;
            (key.clone(), v.max(a.min(b)).min(a.max(b)))
        })
        .collect()
}
