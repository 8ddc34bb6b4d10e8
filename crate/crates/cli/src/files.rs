//! Directory layout of the pipeline and atomic output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use log::{debug, warn};
use tickvol::estimator::FitResult;
use tickvol::Variant;

pub const CURVES_FILE: &str = "curves.json";

/// Writes `path` through a temporary file in the same directory, renamed
/// into place once complete.
pub fn write_atomic<F>(path: &Path, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<&mut fs::File>) -> anyhow::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(path)
        .with_context(|| format!("moving output into {}", path.display()))?;
    Ok(())
}

/// `<dir>/<stem><suffix>.<ext>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn day_path(dir: &Path, day: NaiveDate) -> PathBuf {
    dir.join(format!("{day}.csv"))
}

/// Day files `YYYY-MM-DD.csv` in `dir`, by date.
pub fn list_days(dir: &Path) -> anyhow::Result<BTreeMap<NaiveDate, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries =
        fs::read_dir(dir).with_context(|| format!("reading day directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        match NaiveDate::parse_from_str(stem, "%Y-%m-%d") {
            Ok(d) => {
                out.insert(d, path);
            }
            Err(_) => debug!("skipping {}", path.display()),
        }
    }
    if out.is_empty() {
        bail!(tickvol::Error::InvalidInput(format!(
            "no YYYY-MM-DD.csv day files in {}",
            dir.display()
        )));
    }
    Ok(out)
}

pub fn fit_file_name(day: NaiveDate, variant: Variant) -> String {
    format!("{day}__{variant}.json")
}

#[derive(Debug, Clone)]
pub struct StoredFit {
    pub day: NaiveDate,
    pub variant: Variant,
    pub fit: FitResult,
}

/// Fit files `<day>__<variant>.json` in `dir`, by day then variant order.
pub fn list_fits(dir: &Path) -> anyhow::Result<Vec<StoredFit>> {
    let mut out = Vec::new();
    let entries =
        fs::read_dir(dir).with_context(|| format!("reading fit directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(".json") else {
            continue;
        };
        let Some((d, v)) = stem.split_once("__") else {
            continue;
        };
        let (Ok(day), Ok(variant)) = (
            NaiveDate::parse_from_str(d, "%Y-%m-%d"),
            v.parse::<Variant>(),
        ) else {
            warn!("skipping unrecognized file {}", path.display());
            continue;
        };
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let fit =
            FitResult::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        out.push(StoredFit { day, variant, fit });
    }
    if out.is_empty() {
        bail!(tickvol::Error::InvalidInput(format!(
            "no fit files in {}",
            dir.display()
        )));
    }
    let rank = |v: Variant| Variant::all().position(|w| w == v).unwrap();
    out.sort_by_key(|f| (f.day, rank(f.variant)));
    Ok(out)
}

/// Parses `all`, `base`, `alternatives`, or a comma-separated list.
pub fn parse_variants(s: &str) -> Result<Vec<Variant>, crate::UsageError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let add: Vec<Variant> = match part {
            "all" => Variant::all().collect(),
            "base" => Variant::BASE.to_vec(),
            "alternatives" => Variant::ALTERNATIVES.to_vec(),
            name => vec![name
                .parse()
                .map_err(|e: tickvol::Error| crate::UsageError(e.to_string()))?],
        };
        for v in add {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    if out.is_empty() {
        return Err(crate::UsageError("no variants selected".into()));
    }
    Ok(out)
}
