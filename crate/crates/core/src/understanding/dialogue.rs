//! Transcript correction: ASR lines cross-checked against on-frame
//! subtitles by a chat model, with timestamps held fixed.

use std::collections::HashMap;

use serde::Deserialize;
use thiserror::Error;
use tracing::warn;

use super::provider::{call_parsed, CallError, ChatProvider, ChatRequest, OcrLine};
use super::result_block::{parse_result_block, RecordSchema};
use crate::model::{CharacterId, DialogueLine, DialogueSource};
use crate::prompt;

/// Slack around an ASR line when matching OCR timestamps to it.
pub const OCR_SLACK_MS: u64 = 250;

/// Lines per model call; longer episodes are split.
pub const DEFAULT_LINES_PER_CALL: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DialogueError {
    #[error("ASR lines are not in time order at line {0}")]
    Unordered(String),
    #[error("ASR lines span more than one episode")]
    MixedEpisodes,
    #[error(transparent)]
    Call(#[from] CallError),
}

/// A corrected line that failed validation; the ASR original was kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionRejected {
    pub line_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOutcome {
    pub lines: Vec<DialogueLine>,
    pub rejected: Vec<CorrectionRejected>,
}

#[derive(Debug, Deserialize)]
struct CorrectionRecord {
    index: usize,
    start_ms: u64,
    end_ms: u64,
    speaker: Option<String>,
    text: String,
}

/// Whether an OCR reading falls inside `line`, widened by `slack_ms` on
/// both sides.
pub fn ocr_matches(line: &DialogueLine, ocr: &OcrLine, slack_ms: u64) -> bool {
    let lo = line.interval.start_ms.saturating_sub(slack_ms);
    let hi = line.interval.end_ms.saturating_add(slack_ms);
    lo <= ocr.timestamp_ms && ocr.timestamp_ms <= hi
}

fn render_asr(lines: &[DialogueLine], offset: usize) -> String {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            format!(
                "[index {}] start_ms={} end_ms={} ({} --> {}) speaker={}: {}\n",
                offset + i,
                l.interval.start_ms,
                l.interval.end_ms,
                prompt::clock(l.interval.start_ms),
                prompt::clock(l.interval.end_ms),
                l.speaker.as_ref().map_or("unknown", CharacterId::as_str),
                l.text
            )
        })
        .collect()
}

fn render_ocr(ocr: &[&OcrLine]) -> String {
    ocr.iter()
        .map(|o| {
            format!(
                "timestamp_ms={} ({}): {}\n",
                o.timestamp_ms,
                prompt::clock(o.timestamp_ms),
                o.text
            )
        })
        .collect()
}

pub fn correction_request(
    model: &str,
    asr: &[DialogueLine],
    offset: usize,
    ocr: &[&OcrLine],
) -> ChatRequest {
    let asr_block = render_asr(asr, offset);
    let ocr_block = render_ocr(ocr);
    let text = prompt::fill(
        prompt::CORRECT_DIALOGUE,
        &[
            ("ASR", asr_block.as_str()),
            ("OCR", prompt::block_or_none(&ocr_block)),
        ],
    );
    ChatRequest::user(model, text)
}

fn mark_corrected(lines: &[DialogueLine]) -> Vec<DialogueLine> {
    lines
        .iter()
        .cloned()
        .map(|mut l| {
            l.source = DialogueSource::Corrected;
            l
        })
        .collect()
}

/// Corrects one episode's ASR lines using OCR readings.
///
/// Each returned line either carries the model's speaker and text with the
/// original interval, or is the untouched ASR line listed in `rejected`.
pub fn correct_dialogue(
    asr: &[DialogueLine],
    ocr: &[OcrLine],
    llm: &dyn ChatProvider,
    model: &str,
) -> Result<CorrectionOutcome, DialogueError> {
    correct_dialogue_chunked(asr, ocr, llm, model, DEFAULT_LINES_PER_CALL)
}

pub fn correct_dialogue_chunked(
    asr: &[DialogueLine],
    ocr: &[OcrLine],
    llm: &dyn ChatProvider,
    model: &str,
    lines_per_call: usize,
) -> Result<CorrectionOutcome, DialogueError> {
    if let Some(pair) = asr.windows(2).find(|p| {
        (p[1].interval.start_ms, p[1].interval.end_ms)
            < (p[0].interval.start_ms, p[0].interval.end_ms)
    }) {
        return Err(DialogueError::Unordered(pair[1].id.clone()));
    }
    if asr
        .windows(2)
        .any(|p| p[0].interval.episode_id != p[1].interval.episode_id)
    {
        return Err(DialogueError::MixedEpisodes);
    }

    let mut lines = Vec::with_capacity(asr.len());
    let mut rejected = Vec::new();
    for (chunk_no, chunk) in asr.chunks(lines_per_call.max(1)).enumerate() {
        let offset = chunk_no * lines_per_call.max(1);
        let matched: Vec<&OcrLine> = ocr
            .iter()
            .filter(|o| chunk.iter().any(|l| ocr_matches(l, o, OCR_SLACK_MS)))
            .collect();
        if matched.is_empty() {
            lines.extend(mark_corrected(chunk));
            continue;
        }
        let request = correction_request(model, chunk, offset, &matched);
        let records: Vec<CorrectionRecord> = call_parsed(llm, &request, |reply| {
            parse_result_block(reply, &RecordSchema::dialogue_corrections())?.decode()
        })?;
        let (mut fixed, mut bad) = apply_corrections(chunk, offset, &records);
        lines.append(&mut fixed);
        rejected.append(&mut bad);
    }
    Ok(CorrectionOutcome { lines, rejected })
}

/// Validates model records against the original chunk, line by line.
fn apply_corrections(
    chunk: &[DialogueLine],
    offset: usize,
    records: &[CorrectionRecord],
) -> (Vec<DialogueLine>, Vec<CorrectionRejected>) {
    let mut by_index: HashMap<usize, Result<&CorrectionRecord, &'static str>> = HashMap::new();
    let mut highest_seen: Option<usize> = None;
    for rec in records {
        if rec.index < offset || rec.index >= offset + chunk.len() {
            warn!(index = rec.index, "correction for unknown line ignored");
            continue;
        }
        let verdict = if by_index.contains_key(&rec.index) {
            Err("line returned more than once")
        } else if highest_seen.is_some_and(|h| rec.index < h) {
            Err("line reordered")
        } else {
            Ok(rec)
        };
        highest_seen = Some(highest_seen.map_or(rec.index, |h| h.max(rec.index)));
        by_index.insert(rec.index, verdict);
    }

    let mut lines = Vec::with_capacity(chunk.len());
    let mut rejected = Vec::new();
    for (i, original) in chunk.iter().enumerate() {
        let verdict = match by_index.get(&(offset + i)) {
            None => Err("line dropped"),
            Some(Err(reason)) => Err(*reason),
            Some(Ok(rec))
                if rec.start_ms != original.interval.start_ms
                    || rec.end_ms != original.interval.end_ms =>
            {
                Err("timestamp altered")
            }
            Some(Ok(rec)) => Ok(rec),
        };
        match verdict {
            Ok(rec) => lines.push(DialogueLine {
                id: original.id.clone(),
                interval: original.interval,
                speaker: rec
                    .speaker
                    .as_ref()
                    .filter(|s| !s.trim().is_empty())
                    .map(CharacterId::new),
                text: rec.text.clone(),
                source: DialogueSource::Corrected,
            }),
            Err(reason) => {
                warn!(line = %original.id, reason, "correction rejected");
                rejected.push(CorrectionRejected {
                    line_id: original.id.clone(),
                    reason: reason.to_string(),
                });
                lines.push(original.clone());
            }
        }
    }
    (lines, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeInterval;
    use crate::understanding::provider::ScriptedProvider;
    use serde_json::json;

    fn line(i: usize, s: u64, e: u64, text: &str) -> DialogueLine {
        DialogueLine {
            id: format!("l{i}"),
            interval: TimeInterval::new(1, s, e).unwrap(),
            speaker: Some(CharacterId::new("SPEAKER_1")),
            text: text.into(),
            source: DialogueSource::Asr,
        }
    }

    fn ocr(t: u64, text: &str) -> OcrLine {
        OcrLine {
            timestamp_ms: t,
            text: text.into(),
            region: [0.1, 0.8, 0.8, 0.1],
        }
    }

    fn reply(records: serde_json::Value) -> String {
        format!("<result>{records}</result>")
    }

    #[test]
    fn fixes_text_and_keeps_interval() {
        let asr = vec![line(0, 10_000, 12_000, "their going")];
        let llm = ScriptedProvider::constant(reply(json!([
            {"index": 0, "start_ms": 10_000, "end_ms": 12_000, "speaker": "SPEAKER_1", "text": "they're going"}
        ])));
        let out = correct_dialogue(&asr, &[ocr(11_000, "they're going")], &llm, "m").unwrap();
        assert!(out.rejected.is_empty());
        assert_eq!(out.lines[0].text, "they're going");
        assert_eq!(out.lines[0].interval, asr[0].interval);
        assert_eq!(out.lines[0].source, DialogueSource::Corrected);
    }

    #[test]
    fn empty_ocr_needs_no_call() {
        let asr = vec![line(0, 0, 1000, "a"), line(1, 1000, 2000, "b")];
        let llm = ScriptedProvider::new(|_| panic!("no call expected"));
        let out = correct_dialogue(&asr, &[], &llm, "m").unwrap();
        assert_eq!(
            out.lines.iter().map(|l| &l.text).collect::<Vec<_>>(),
            vec!["a", "b"]
        );
        assert!(out
            .lines
            .iter()
            .all(|l| l.source == DialogueSource::Corrected));
    }

    #[test]
    fn shifted_start_is_rejected() {
        let asr = vec![line(0, 10_000, 12_000, "their going")];
        let llm = ScriptedProvider::constant(reply(json!([
            {"index": 0, "start_ms": 10_500, "end_ms": 12_000, "speaker": null, "text": "they're going"}
        ])));
        let out = correct_dialogue(&asr, &[ocr(11_000, "they're going")], &llm, "m").unwrap();
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].reason, "timestamp altered");
        assert_eq!(out.lines[0], asr[0]);
    }

    #[test]
    fn dropped_duplicated_and_reordered_lines_fall_back() {
        let asr = vec![
            line(0, 0, 1000, "a"),
            line(1, 1000, 2000, "b"),
            line(2, 2000, 3000, "c"),
        ];
        let llm = ScriptedProvider::constant(reply(json!([
            {"index": 2, "start_ms": 2000, "end_ms": 3000, "speaker": null, "text": "C"},
            {"index": 1, "start_ms": 1000, "end_ms": 2000, "speaker": null, "text": "B"},
            {"index": 2, "start_ms": 2000, "end_ms": 3000, "speaker": null, "text": "C2"}
        ])));
        let out = correct_dialogue(&asr, &[ocr(500, "A")], &llm, "m").unwrap();
        let reasons: Vec<_> = out
            .rejected
            .iter()
            .map(|r| (r.line_id.as_str(), r.reason.as_str()))
            .collect();
        assert_eq!(
            reasons,
            vec![
                ("l0", "line dropped"),
                ("l1", "line reordered"),
                ("l2", "line returned more than once")
            ]
        );
        assert_eq!(out.lines, asr);
    }

    #[test]
    fn ocr_slack_window() {
        let l = line(0, 1000, 2000, "x");
        assert!(ocr_matches(&l, &ocr(750, ""), OCR_SLACK_MS));
        assert!(ocr_matches(&l, &ocr(2250, ""), OCR_SLACK_MS));
        assert!(!ocr_matches(&l, &ocr(749, ""), OCR_SLACK_MS));
        assert!(!ocr_matches(&l, &ocr(2251, ""), OCR_SLACK_MS));
    }

    #[test]
    fn unordered_input_is_an_error() {
        let asr = vec![line(0, 1000, 2000, "a"), line(1, 0, 500, "b")];
        let llm = ScriptedProvider::constant("");
        assert!(matches!(
            correct_dialogue(&asr, &[], &llm, "m"),
            Err(DialogueError::Unordered(_))
        ));
    }

    #[test]
    fn chunks_use_episode_level_indices() {
        let asr: Vec<_> = (0..5)
            .map(|i| line(i, i as u64 * 1000, i as u64 * 1000 + 900, "t"))
            .collect();
        let llm = ScriptedProvider::new(|req| {
            let text = req.prompt_text();
            let recs: Vec<_> = text
                .lines()
                .filter_map(|l| l.strip_prefix("[index "))
                .map(|l| {
                    let idx: u64 = l.split(']').next().unwrap().parse().unwrap();
                    json!({"index": idx, "start_ms": idx * 1000, "end_ms": idx * 1000 + 900, "speaker": null, "text": format!("T{idx}")})
                })
                .collect();
            Ok(format!(
                "<result>{}</result>",
                serde_json::Value::Array(recs)
            ))
        });
        let ocr_lines: Vec<_> = (0..5).map(|i| ocr(i * 1000 + 100, "t")).collect();
        let out = correct_dialogue_chunked(&asr, &ocr_lines, &llm, "m", 2).unwrap();
        assert!(out.rejected.is_empty());
        assert_eq!(out.lines[4].text, "T4");
    }
}
