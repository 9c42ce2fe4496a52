//! Dataset manifests: one `path<TAB>label` record per line, `#` comments,
//! paths relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::action_pattern::ApiBuilder;
use crate::error::{Error, Result};
use crate::io::pnm::{load_api, load_frames};
use crate::train::LabeledImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Resolved against the manifest's directory.
    pub path: PathBuf,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses manifest text; `source` is only used in error messages.
    /// With `classes` given, every label must be one of them.
    pub fn parse(text: &str, base: &Path, source: &Path, classes: Option<&[String]>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::format(source, format!("line {}: {msg}", n + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, label] = fields[..] else {
                return Err(at(format!("expected path<TAB>label, got {} fields", fields.len())));
            };
            let (path, label) = (path.trim(), label.trim());
            if path.is_empty() || label.is_empty() {
                return Err(at("empty path or label".into()));
            }
            if let Some(classes) = classes {
                if !classes.iter().any(|c| c == label) {
                    return Err(at(format!("label {label:?} is not a declared class")));
                }
            }
            if !seen.insert(path.to_string()) {
                return Err(at(format!("duplicate path {path:?}")));
            }
            entries.push(ManifestEntry {
                path: base.join(path),
                label: label.to_string(),
            });
        }
        Ok(Manifest { entries })
    }

    pub fn load(path: impl AsRef<Path>, classes: Option<&[String]>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, path, classes)
    }

    /// Distinct labels in order of first appearance.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.label) {
                out.push(e.label.clone());
            }
        }
        out
    }
}

/// Loads every entry as a labelled pattern. File entries are read as saved
/// action pattern images; directory entries are frame directories and are
/// turned into patterns with `builder`.
pub fn load_dataset(manifest: &Manifest, classes: &[String], builder: &ApiBuilder) -> Result<Vec<LabeledImage>> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let label = classes
                .iter()
                .position(|c| *c == e.label)
                .ok_or_else(|| Error::invalid(format!("label {:?} is not a declared class", e.label)))?;
            let api = if e.path.is_dir() {
                builder.build(&load_frames(&e.path)?)?
            } else {
                load_api(&e.path)?
            };
            Ok(LabeledImage {
                image: api.into_image(),
                label,
            })
        })
        .collect()
}
