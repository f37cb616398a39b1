//! Raw understanding inputs: transcripts, on-frame text, faces, speaker
//! turns and shots, one set of files per episode.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_json, parse_jsonl, read_text, IoError};
use crate::editing::rules::Audience;
use crate::model::{CharacterId, DialogueLine, DialogueSource, EpisodeId, TimeInterval};
use crate::understanding::pipeline::EpisodeInput;
use crate::understanding::provider::{EpisodeTable, FaceObservation, OcrLine, Shot, SpeakerTurn};

pub const INPUTS_FORMAT_VERSION: u32 = 1;

/// Files for one episode. Paths are relative to the inputs file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeFiles {
    pub episode_id: EpisodeId,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
    /// `.srt`, or JSON lines of `{start_ms, end_ms, text}`.
    pub transcript: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turns: Option<String>,
    /// Without shots the episode starts as a single shot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnderstandInputs {
    pub format_version: u32,
    pub title: String,
    pub audience: Audience,
    pub episodes: Vec<EpisodeFiles>,
}

/// Everything loaded, ready to back a provider suite.
#[derive(Debug, Clone, Default)]
pub struct LoadedInputs {
    pub episodes: Vec<EpisodeInput>,
    pub transcripts: EpisodeTable<DialogueLine>,
    pub ocr: EpisodeTable<OcrLine>,
    pub faces: EpisodeTable<FaceObservation>,
    pub turns: EpisodeTable<SpeakerTurn>,
    pub shots: EpisodeTable<Shot>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptRow {
    start_ms: u64,
    end_ms: u64,
    /// Diarization label, kept until speaker attribution replaces it.
    #[serde(default)]
    speaker: Option<String>,
    text: String,
}

fn line(episode: EpisodeId, n: usize, start_ms: u64, end_ms: u64, text: String) -> DialogueLine {
    DialogueLine {
        id: format!("e{episode}-l{}", n + 1),
        interval: TimeInterval {
            episode_id: episode,
            start_ms,
            end_ms,
        },
        speaker: None,
        text,
        source: DialogueSource::Asr,
    }
}

fn check_lines(path: &Path, lines: &[DialogueLine]) -> Result<(), IoError> {
    for (n, l) in lines.iter().enumerate() {
        l.interval
            .validate()
            .map_err(|e| IoError::schema(path, format!("/{n}"), e.to_string()))?;
    }
    Ok(())
}

/// Parses SubRip text into transcript lines for `episode`.
pub fn parse_srt(
    path: &Path,
    episode: EpisodeId,
    text: &str,
) -> Result<Vec<DialogueLine>, IoError> {
    let subs = srtlib::Subtitles::parse_from_str(text.to_string())
        .map_err(|e| IoError::schema(path, "", format!("bad SubRip: {e}")))?;
    let ms = |t: &srtlib::Timestamp| {
        let (h, m, s, milli) = t.get();
        srtlib::Timestamp::convert_to_milliseconds(h, m, s, milli) as u64
    };
    let mut rows: Vec<_> = subs
        .to_vec()
        .into_iter()
        .map(|s| {
            (
                ms(&s.start_time),
                ms(&s.end_time),
                s.text.replace('\n', " "),
            )
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let lines: Vec<DialogueLine> = rows
        .into_iter()
        .enumerate()
        .map(|(n, (start, end, text))| line(episode, n, start, end, text))
        .collect();
    check_lines(path, &lines)?;
    Ok(lines)
}

pub fn parse_transcript_jsonl(
    path: &Path,
    episode: EpisodeId,
    text: &str,
) -> Result<Vec<DialogueLine>, IoError> {
    let rows: Vec<TranscriptRow> = parse_jsonl(path, text)?;
    let lines: Vec<DialogueLine> = rows
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            let mut l = line(episode, n, r.start_ms, r.end_ms, r.text);
            l.speaker = r
                .speaker
                .filter(|s| !s.trim().is_empty())
                .map(CharacterId::new);
            l
        })
        .collect();
    check_lines(path, &lines)?;
    if lines
        .windows(2)
        .any(|p| p[1].interval.start_ms < p[0].interval.start_ms)
    {
        return Err(IoError::schema(
            path,
            "",
            "transcript lines are not time-ordered",
        ));
    }
    Ok(lines)
}

pub fn load_transcript(path: &Path, episode: EpisodeId) -> Result<Vec<DialogueLine>, IoError> {
    let text = read_text(path)?;
    let srt = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("srt"));
    if srt {
        parse_srt(path, episode, &text)
    } else {
        parse_transcript_jsonl(path, episode, &text)
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_rows<T: serde::de::DeserializeOwned>(
    base: &Path,
    rel: &Option<String>,
) -> Result<Vec<T>, IoError> {
    match rel {
        Some(rel) => {
            let path = resolve(base, rel);
            parse_jsonl(&path, &read_text(&path)?)
        }
        None => Ok(Vec::new()),
    }
}

impl UnderstandInputs {
    pub fn load(path: &Path) -> Result<(Self, LoadedInputs), IoError> {
        let inputs: UnderstandInputs = parse_json(path, &read_text(path)?)?;
        if inputs.format_version != INPUTS_FORMAT_VERSION {
            return Err(IoError::schema(
                path,
                "/format_version",
                format!("unsupported version {}", inputs.format_version),
            ));
        }
        if inputs.episodes.is_empty() {
            return Err(IoError::schema(path, "/episodes", "no episodes"));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut loaded = LoadedInputs::default();
        for (n, ep) in inputs.episodes.iter().enumerate() {
            let id = ep.episode_id;
            if ep.duration_ms == 0 {
                return Err(IoError::schema(
                    path,
                    format!("/episodes/{n}/duration_ms"),
                    "must be positive",
                ));
            }
            let video = ep
                .video
                .as_ref()
                .map(|v| resolve(base, v).to_string_lossy().into_owned());
            loaded.episodes.push(EpisodeInput {
                episode_id: id,
                duration_ms: Some(ep.duration_ms),
                video,
            });
            loaded
                .transcripts
                .insert(id, load_transcript(&resolve(base, &ep.transcript), id)?);
            loaded.ocr.insert(id, load_rows(base, &ep.ocr)?);
            loaded.faces.insert(id, load_rows(base, &ep.faces)?);
            loaded.turns.insert(id, load_rows(base, &ep.turns)?);
            let mut shots: Vec<Shot> = load_rows(base, &ep.shots)?;
            if shots.is_empty() {
                shots.push(Shot {
                    start_ms: 0,
                    end_ms: ep.duration_ms,
                    histogram: None,
                });
            }
            loaded.shots.insert(id, shots);
        }
        Ok((inputs, loaded))
    }
}
