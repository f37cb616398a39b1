//! Plans to cut lists: trim and concat argument lists for an ffmpeg-style
//! media tool, plus a plain-text edit decision list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{write_atomic, IoError};
use crate::model::{EditPlan, EpisodeId};
use crate::prompt::clock;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    /// Known length; cuts past it are rejected.
    #[serde(default)]
    pub duration_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutEntry {
    pub episode_id: EpisodeId,
    pub source_file: PathBuf,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl CutEntry {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// One entry per plan cut, in plan order, which is also the concat order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutList {
    pub entries: Vec<CutEntry>,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("no source file for episode {0}")]
    MissingSource(EpisodeId),
    #[error(
        "cut in episode {episode} ends at {end_ms} ms, past the source length {duration_ms} ms"
    )]
    OutOfBounds {
        episode: EpisodeId,
        end_ms: u64,
        duration_ms: u64,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{tool}: {message}")]
    Tool { tool: String, message: String },
}

/// Milliseconds as exact decimal seconds, e.g. `61500` -> `61.500`.
pub fn seconds_arg(ms: u64) -> String {
    format!("{}.{:03}", ms / 1000, ms % 1000)
}

pub fn export_cutlist(
    plan: &EditPlan,
    sources: &BTreeMap<EpisodeId, SourceFile>,
) -> Result<CutList, ExportError> {
    plan.validate().map_err(ExportError::InvalidPlan)?;
    if plan.cuts.is_empty() {
        return Err(ExportError::InvalidPlan("plan has no cuts".into()));
    }
    let entries = plan
        .cuts
        .iter()
        .map(|cut| {
            let src = sources
                .get(&cut.episode_id)
                .ok_or(ExportError::MissingSource(cut.episode_id))?;
            if let Some(duration_ms) = src.duration_ms.filter(|d| cut.end_ms > *d) {
                return Err(ExportError::OutOfBounds {
                    episode: cut.episode_id,
                    end_ms: cut.end_ms,
                    duration_ms,
                });
            }
            Ok(CutEntry {
                episode_id: cut.episode_id,
                source_file: src.path.clone(),
                start_ms: cut.start_ms,
                end_ms: cut.end_ms,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(CutList { entries })
}

impl CutList {
    pub fn total_duration_ms(&self) -> u64 {
        self.entries.iter().map(CutEntry::duration_ms).sum()
    }

    pub fn part_name(n: usize) -> String {
        format!("part-{:04}.mp4", n + 1)
    }

    /// One trim per entry. Seeking comes after `-i` and the streams are
    /// re-encoded, so cut points land on the requested millisecond rather
    /// than the nearest keyframe.
    pub fn trim_args(&self, dir: &Path) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .enumerate()
            .map(|(n, e)| {
                vec![
                    "-y".into(),
                    "-i".into(),
                    e.source_file.to_string_lossy().into_owned(),
                    "-ss".into(),
                    seconds_arg(e.start_ms),
                    "-t".into(),
                    seconds_arg(e.duration_ms()),
                    dir.join(Self::part_name(n)).to_string_lossy().into_owned(),
                ]
            })
            .collect()
    }

    /// Concat demuxer list, parts in plan order.
    pub fn concat_list(&self) -> String {
        (0..self.entries.len())
            .map(|n| format!("file '{}'\n", Self::part_name(n)))
            .collect()
    }

    pub fn concat_args(list: &Path, output: &Path) -> Vec<String> {
        vec![
            "-y".into(),
            "-f".into(),
            "concat".into(),
            "-safe".into(),
            "0".into(),
            "-i".into(),
            list.to_string_lossy().into_owned(),
            "-c".into(),
            "copy".into(),
            output.to_string_lossy().into_owned(),
        ]
    }

    /// Human-readable edit decision list.
    pub fn edl(&self, title: &str) -> String {
        let mut out = format!("TITLE: {title}\n");
        let mut record = 0;
        for (n, e) in self.entries.iter().enumerate() {
            out += &format!(
                "{:03}  EP{:<3} {}  {} -> {}  REC {} -> {}\n",
                n + 1,
                e.episode_id,
                e.source_file.display(),
                clock(e.start_ms),
                clock(e.end_ms),
                clock(record),
                clock(record + e.duration_ms()),
            );
            record += e.duration_ms();
        }
        out += &format!("TOTAL: {}\n", clock(record));
        out
    }

    /// Writes `cutlist.json`, `concat.txt` and `cut.edl` into `dir`.
    pub fn write(&self, dir: &Path, title: &str) -> Result<(), IoError> {
        let json = serde_json::to_string_pretty(self).expect("cut list serializes") + "\n";
        write_atomic(&dir.join("cutlist.json"), json.as_bytes())?;
        write_atomic(&dir.join("concat.txt"), self.concat_list().as_bytes())?;
        write_atomic(&dir.join("cut.edl"), self.edl(title).as_bytes())
    }

    /// Runs the trims then the concat with `tool`, writing parts to `dir`.
    pub fn run(&self, tool: &str, dir: &Path, output: &Path) -> Result<(), ExportError> {
        write_atomic(&dir.join("concat.txt"), self.concat_list().as_bytes())?;
        let mut steps = self.trim_args(dir);
        steps.push(Self::concat_args(&dir.join("concat.txt"), output));
        for args in steps {
            let status =
                Command::new(tool)
                    .args(&args)
                    .status()
                    .map_err(|e| ExportError::Tool {
                        tool: tool.into(),
                        message: e.to_string(),
                    })?;
            if !status.success() {
                return Err(ExportError::Tool {
                    tool: tool.into(),
                    message: format!("exited with {status}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PlanMethod, Provenance, TimeInterval};

    fn sources() -> BTreeMap<EpisodeId, SourceFile> {
        [(1, "ep1.mp4", 88_000), (2, "ep2.mp4", 62_000)]
            .into_iter()
            .map(|(e, p, d)| {
                (
                    e,
                    SourceFile {
                        path: p.into(),
                        duration_ms: Some(d),
                    },
                )
            })
            .collect()
    }

    fn plan(cuts: &[(u32, u64, u64)]) -> EditPlan {
        EditPlan::new(
            cuts.iter()
                .map(|&(e, s, t)| TimeInterval::new(e, s, t).unwrap())
                .collect(),
            Provenance::baseline(PlanMethod::Highlight),
        )
    }

    #[test]
    fn single_cut() {
        let list = export_cutlist(&plan(&[(1, 1500, 3250)]), &sources()).unwrap();
        let trims = list.trim_args(Path::new("out"));
        assert_eq!(trims.len(), 1);
        assert_eq!(trims[0][2..7], ["ep1.mp4", "-ss", "1.500", "-t", "1.750"]);
        assert_eq!(list.concat_list(), "file 'part-0001.mp4'\n");
    }

    #[test]
    fn order_and_sources_follow_the_plan() {
        let p = plan(&[(1, 0, 12_000), (1, 30_000, 41_001), (2, 5, 62_000)]);
        let list = export_cutlist(&p, &sources()).unwrap();
        let files: Vec<_> = list
            .trim_args(Path::new("."))
            .iter()
            .map(|a| a[2].clone())
            .collect();
        assert_eq!(files, ["ep1.mp4", "ep1.mp4", "ep2.mp4"]);
        assert_eq!(list.total_duration_ms(), p.total_duration_ms);
        let edl = list.edl("T");
        assert!(edl.contains("00:00:30.000 -> 00:00:41.001"));
        assert!(edl.ends_with(&format!("TOTAL: {}\n", clock(p.total_duration_ms))));
    }

    #[test]
    fn errors() {
        let mut s = sources();
        assert!(matches!(
            export_cutlist(&plan(&[(1, 0, 90_000)]), &s),
            Err(ExportError::OutOfBounds { episode: 1, .. })
        ));
        s.remove(&2);
        assert!(matches!(
            export_cutlist(&plan(&[(2, 0, 1000)]), &s),
            Err(ExportError::MissingSource(2))
        ));
    }

    #[test]
    fn clock_format() {
        assert_eq!(clock(3_723_004), "01:02:03.004");
        assert_eq!(seconds_arg(61_005), "61.005");
    }
}
