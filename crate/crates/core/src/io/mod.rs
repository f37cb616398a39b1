//! File formats: manifests, plans, annotation logs, provider inputs and
//! cut-list export.

pub mod export;
pub mod ingest;
pub mod manifest;
pub mod plan;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use thiserror::Error;

pub use export::{export_cutlist, CutList, SourceFile};
pub use manifest::{load_manifest, save_manifest, SceneManifest};
pub use plan::{load_annotations, load_plan, save_annotations, save_plan};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {pointer}: {message}")]
    Schema {
        path: PathBuf,
        /// JSON pointer to the offending value, e.g. `/episodes/0/scenes/1`.
        pointer: String,
        message: String,
    },
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn schema(path: &Path, pointer: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Schema {
            path: path.to_path_buf(),
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

/// JSON pointer for a serde_path_to_error path.
pub fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => write!(out, "{index}").expect("string write"),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses `text` as JSON into `T`, reporting errors with a JSON pointer.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        IoError::schema(path, pointer, e.inner().to_string())
    })
}

/// Parses JSON lines; blank lines are skipped. Pointers start with the
/// 0-based line index.
pub fn parse_jsonl<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<T>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            parse_json(path, line).map_err(|e| match e {
                IoError::Schema {
                    path,
                    pointer,
                    message,
                } => IoError::Schema {
                    path,
                    pointer: format!("/{n}{pointer}"),
                    message,
                },
                other => other,
            })
        })
        .collect()
}

pub fn to_jsonl<T: serde::Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
        .collect()
}
