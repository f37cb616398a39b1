//! Single-call baselines: the model picks the whole cut list at once, from
//! either the dialogue transcript or the scene narrations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use super::render::scene_lines;
use super::rules::HighlightRuleSet;
use super::splice::splice;
use super::PromptSettings;
use crate::interval::normalize;
use crate::model::{
    DialogueLine, EditPlan, EpisodeId, PlanMethod, Provenance, SceneSequence, TimeInterval,
};
use crate::prompt;
use crate::understanding::provider::{call_parsed, CallError, ChatProvider, ChatRequest};
use crate::understanding::result_block::{parse_result_block, ParseError, RecordSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    Asr,
    Narration,
}

pub enum End2EndInput<'a> {
    /// Transcript lines plus each episode's length in milliseconds.
    Asr {
        dialogue: &'a [DialogueLine],
        episodes: &'a [(EpisodeId, u64)],
    },
    Narration(&'a SceneSequence),
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("baseline input is empty")]
    EmptyInput,
    #[error(transparent)]
    Call(#[from] CallError),
    #[error("the model selected nothing usable")]
    EmptyPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub plan: EditPlan,
    /// Returned items that could not be used, with the reason.
    pub skipped: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SceneChoice {
    episode: EpisodeId,
    scene_id: u32,
}

#[derive(Debug, Deserialize)]
struct SpanChoice {
    episode: EpisodeId,
    start_time: f64,
    end_time: f64,
}

fn seconds(ms: u64) -> String {
    format!("{:.3}", ms as f64 / 1000.0)
}

fn to_ms(s: f64) -> u64 {
    (s * 1000.0).round() as u64
}

pub fn end2end_request(
    input: &End2EndInput<'_>,
    rules: &HighlightRuleSet,
    settings: &PromptSettings,
) -> ChatRequest {
    let audience = settings.audience.to_string();
    let rule_text = rules.render();
    let (template, key, body) = match input {
        End2EndInput::Narration(scenes) => (
            prompt::END2END_SCENES,
            "SCENES",
            scene_lines(scenes, 1..=scenes.len(), |_| vec![]),
        ),
        End2EndInput::Asr { dialogue, .. } => (
            prompt::END2END_ASR,
            "DIALOGUE",
            dialogue
                .iter()
                .map(|l| {
                    format!(
                        "Episode {} [{} --> {}] {}\n",
                        l.interval.episode_id,
                        seconds(l.interval.start_ms),
                        seconds(l.interval.end_ms),
                        l.text
                    )
                })
                .collect(),
        ),
    };
    ChatRequest::user(
        &settings.model,
        prompt::fill(
            template,
            &[
                ("RULES", &rule_text),
                ("TITLE", &settings.title),
                ("AUDIENCE", &audience),
                (key, &body),
            ],
        ),
    )
}

fn parse_spans(reply: &str) -> Result<Vec<SpanChoice>, ParseError> {
    let spans: Vec<SpanChoice> =
        parse_result_block(reply, &RecordSchema::end2end_spans())?.decode()?;
    for (index, s) in spans.iter().enumerate() {
        if to_ms(s.end_time) <= to_ms(s.start_time) {
            return Err(ParseError::SchemaViolation {
                index,
                detail: format!(
                    "end_time {} is not after start_time {}",
                    s.end_time, s.start_time
                ),
            });
        }
    }
    Ok(spans)
}

/// One model call that returns a complete plan.
///
/// Transcript mode: spans are clamped to their episode, sorted, and
/// overlapping spans merged. Narration mode: scene ids map to scene
/// intervals, unknown ids are skipped.
pub fn end2end_edit(
    input: &End2EndInput<'_>,
    rules: &HighlightRuleSet,
    llm: &dyn ChatProvider,
    settings: &PromptSettings,
) -> Result<BaselineOutcome, BaselineError> {
    let request = end2end_request(input, rules, settings);
    let mut skipped = Vec::new();
    let plan = match input {
        End2EndInput::Narration(scenes) => {
            if scenes.is_empty() {
                return Err(BaselineError::EmptyInput);
            }
            let choices: Vec<SceneChoice> = call_parsed(llm, &request, |reply| {
                parse_result_block(reply, &RecordSchema::end2end_scenes())?.decode()
            })?;
            let mut kept = Vec::new();
            for c in choices {
                match scenes.global_index(c.episode, c.scene_id) {
                    Some(i) => kept.push(i),
                    None => {
                        warn!(
                            episode = c.episode,
                            scene_id = c.scene_id,
                            "unknown scene skipped"
                        );
                        skipped.push(format!(
                            "episode {} scene {}: unknown scene",
                            c.episode, c.scene_id
                        ));
                    }
                }
            }
            kept.sort_unstable();
            kept.dedup();
            if kept.is_empty() {
                return Err(BaselineError::EmptyPlan);
            }
            splice(
                &kept,
                scenes,
                Provenance::baseline(PlanMethod::End2EndNarration),
            )
        }
        End2EndInput::Asr { dialogue, episodes } => {
            if dialogue.is_empty() {
                return Err(BaselineError::EmptyInput);
            }
            let lengths: BTreeMap<EpisodeId, u64> = episodes.iter().copied().collect();
            let spans = call_parsed(llm, &request, parse_spans)?;
            let mut cuts = Vec::new();
            for s in spans {
                let Some(&len) = lengths.get(&s.episode) else {
                    warn!(episode = s.episode, "span in unknown episode skipped");
                    skipped.push(format!("episode {}: unknown episode", s.episode));
                    continue;
                };
                let (start, end) = (to_ms(s.start_time).min(len), to_ms(s.end_time).min(len));
                if start >= end {
                    warn!(
                        episode = s.episode,
                        start, "span past the end of its episode skipped"
                    );
                    skipped.push(format!(
                        "episode {} at {start} ms: past the episode end",
                        s.episode
                    ));
                    continue;
                }
                cuts.push(TimeInterval {
                    episode_id: s.episode,
                    start_ms: start,
                    end_ms: end,
                });
            }
            let raw_total: u64 = cuts.iter().map(TimeInterval::duration_ms).sum();
            let cuts = normalize(&cuts).expect("clamped spans are valid");
            if cuts.is_empty() {
                return Err(BaselineError::EmptyPlan);
            }
            let merged_total: u64 = cuts.iter().map(TimeInterval::duration_ms).sum();
            if merged_total < raw_total {
                warn!(
                    overlap_ms = raw_total - merged_total,
                    "overlapping spans merged"
                );
            }
            EditPlan::new(cuts, Provenance::baseline(PlanMethod::End2EndAsr))
        }
    };
    Ok(BaselineOutcome { plan, skipped })
}
