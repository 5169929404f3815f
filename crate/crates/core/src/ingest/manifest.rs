use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ImageRef, Listing, Query, RawText};
use crate::ingest::title::{derive_title, Summarizer, DEFAULT_CHAR_BUDGET};

/// One line of a JSON Lines manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: u64,
    /// Image path, relative to the manifest's directory unless absolute.
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<BTreeMap<String, String>>,
    /// Ground-truth product id; only meaningful in query manifests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_id: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct TitleOptions {
    pub summarizer: Option<Summarizer>,
    pub char_budget: Option<usize>,
}

impl TitleOptions {
    pub fn budget(&self) -> usize {
        self.char_budget.unwrap_or(DEFAULT_CHAR_BUDGET)
    }
}

struct ParsedLine {
    line: usize,
    record: ManifestRecord,
}

fn parse_records(path: &Path) -> Result<Vec<ParsedLine>> {
    let text = fs::read_to_string(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord = serde_json::from_str(raw).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        if !seen.insert(record.id) {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line,
                reason: format!("duplicate id {}", record.id),
            });
        }
        out.push(ParsedLine { line, record });
    }
    Ok(out)
}

fn resolve_image(manifest: &Path, image: &str) -> PathBuf {
    let p = Path::new(image);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn to_listing(path: &Path, parsed: &ParsedLine, opts: &TitleOptions) -> Result<Listing> {
    let ParsedLine { line, record } = parsed;
    let err = |reason: String| Error::Manifest {
        path: path.to_path_buf(),
        line: *line,
        reason,
    };
    let image = resolve_image(path, &record.image);
    if !image.is_file() {
        return Err(err(format!("image {} not found", image.display())));
    }
    let title = derive_title(record, opts.summarizer.as_ref(), opts.budget())
        .map_err(|e| err(e.to_string()))?;
    let raw_text = (record.description.is_some() || record.attributes.is_some()).then(|| RawText {
        description: record.description.clone(),
        attributes: record.attributes.clone(),
    });
    Ok(Listing {
        id: record.id,
        image: ImageRef::Path(image),
        title,
        raw_text,
    })
}

/// Loads a product manifest. Any malformed line aborts the whole load.
pub fn load_manifest(path: impl AsRef<Path>, opts: &TitleOptions) -> Result<Vec<Listing>> {
    let path = path.as_ref();
    parse_records(path)?
        .iter()
        .map(|p| to_listing(path, p, opts))
        .collect()
}

/// Loads a query manifest; every record must carry `truth_id`.
pub fn load_query_manifest(path: impl AsRef<Path>, opts: &TitleOptions) -> Result<Vec<Query>> {
    let path = path.as_ref();
    parse_records(path)?
        .iter()
        .map(|p| {
            let truth_id = p.record.truth_id.ok_or_else(|| Error::Manifest {
                path: path.to_path_buf(),
                line: p.line,
                reason: "query record has no truth_id".into(),
            })?;
            Ok(Query {
                listing: to_listing(path, p, opts)?,
                truth_id,
            })
        })
        .collect()
}

/// Writes records as JSON Lines.
pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
