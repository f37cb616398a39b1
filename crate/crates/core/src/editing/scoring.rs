//! Highlight scoring of narrated scenes.

use std::collections::{BTreeMap, HashSet};

use serde::Deserialize;
use thiserror::Error;
use tracing::warn;

use super::render::scene_lines;
use super::rules::HighlightRuleSet;
use super::PromptSettings;
use crate::model::{EpisodeId, SceneSequence};
use crate::prompt;
use crate::understanding::provider::{call_parsed, CallError, ChatProvider, ChatRequest};
use crate::understanding::result_block::{parse_result_block, ParseError, RecordSchema};

/// Prompt size, in estimated tokens, above which scenes are split into
/// several scoring calls.
pub const DEFAULT_CHUNK_TOKEN_BUDGET: usize = 24_000;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("scene {scene_id} of episode {episode_id} has no narration")]
    MissingNarration {
        episode_id: EpisodeId,
        scene_id: u32,
    },
    #[error(transparent)]
    Call(#[from] CallError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub scored: SceneSequence,
    /// Global indices the model did not score; they were given 0.
    pub defaulted: Vec<usize>,
    pub calls: usize,
}

#[derive(Debug, Deserialize)]
struct ScoreRecord {
    episode: EpisodeId,
    scene_id: u32,
    score: u32,
}

/// One scoring call: `context` episodes are shown for continuity, `owned`
/// episodes are the ones whose scores are taken from this call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoringChunk {
    pub context: Vec<EpisodeId>,
    pub owned: Vec<EpisodeId>,
}

fn episode_ranges(scenes: &SceneSequence) -> BTreeMap<EpisodeId, (usize, usize)> {
    let mut ranges: BTreeMap<EpisodeId, (usize, usize)> = BTreeMap::new();
    for (i, s) in scenes.iter() {
        ranges
            .entry(s.episode_id)
            .and_modify(|r| r.1 = i)
            .or_insert((i, i));
    }
    ranges
}

/// Splits the series into chunks of whole episodes that fit `budget`
/// tokens on top of the fixed prompt cost. Each chunk after the first
/// repeats the previous chunk's last episode as context.
pub fn plan_chunks(
    scenes: &SceneSequence,
    fixed_tokens: usize,
    budget: usize,
) -> Vec<ScoringChunk> {
    let ranges = episode_ranges(scenes);
    let cost = |ep: EpisodeId| {
        let (a, b) = ranges[&ep];
        prompt::estimate_tokens(&scene_lines(scenes, a..=b, |_| vec![]))
    };
    let mut chunks: Vec<ScoringChunk> = Vec::new();
    let mut current = ScoringChunk {
        context: Vec::new(),
        owned: Vec::new(),
    };
    let mut used = fixed_tokens;
    for &ep in ranges.keys() {
        let c = cost(ep);
        if !current.owned.is_empty() && used + c > budget {
            let last = *current.owned.last().expect("non-empty");
            chunks.push(std::mem::replace(
                &mut current,
                ScoringChunk {
                    context: vec![last],
                    owned: Vec::new(),
                },
            ));
            used = fixed_tokens + cost(last);
        }
        if used + c > budget && current.owned.is_empty() {
            warn!(
                episode = ep,
                tokens = used + c,
                budget,
                "episode alone exceeds the scoring budget"
            );
        }
        current.owned.push(ep);
        used += c;
    }
    if !current.owned.is_empty() {
        chunks.push(current);
    }
    chunks
}

pub fn scoring_request(
    settings: &PromptSettings,
    rules: &HighlightRuleSet,
    scenes: &SceneSequence,
    indices: &[usize],
) -> ChatRequest {
    let audience = settings.audience.to_string();
    ChatRequest::user(
        &settings.model,
        prompt::fill(
            prompt::HIGHLIGHT,
            &[
                ("TITLE", &settings.title),
                ("AUDIENCE", &audience),
                ("RULES", &rules.render()),
                (
                    "SCENES",
                    &scene_lines(scenes, indices.iter().copied(), |_| vec![]),
                ),
            ],
        ),
    )
}

fn parse_scores(reply: &str) -> Result<Vec<ScoreRecord>, ParseError> {
    let records: Vec<ScoreRecord> =
        parse_result_block(reply, &RecordSchema::highlight_scores())?.decode()?;
    let mut seen = HashSet::new();
    for (index, r) in records.iter().enumerate() {
        if !seen.insert((r.episode, r.scene_id)) {
            return Err(ParseError::SchemaViolation {
                index,
                detail: format!("episode {} scene {} scored twice", r.episode, r.scene_id),
            });
        }
    }
    Ok(records)
}

/// Scores every scene against `rules`. Scenes the model leaves out score 0
/// and are listed in `defaulted`.
pub fn score_scenes(
    scenes: &SceneSequence,
    rules: &HighlightRuleSet,
    llm: &dyn ChatProvider,
    settings: &PromptSettings,
) -> Result<ScoreOutcome, ScoringError> {
    if let Some((_, s)) = scenes.iter().find(|(_, s)| s.narration.trim().is_empty()) {
        return Err(ScoringError::MissingNarration {
            episode_id: s.episode_id,
            scene_id: s.scene_id,
        });
    }
    let fixed =
        prompt::estimate_tokens(&scoring_request(settings, rules, scenes, &[]).prompt_text());
    let ranges = episode_ranges(scenes);
    let mut scores: Vec<Option<u32>> = vec![None; scenes.len()];
    let chunks = plan_chunks(scenes, fixed, settings.chunk_token_budget);
    for chunk in &chunks {
        let indices: Vec<usize> = chunk
            .context
            .iter()
            .chain(&chunk.owned)
            .flat_map(|ep| {
                let (a, b) = ranges[ep];
                a..=b
            })
            .collect();
        let request = scoring_request(settings, rules, scenes, &indices);
        let records = call_parsed(llm, &request, parse_scores)?;
        for r in records {
            match scenes.global_index(r.episode, r.scene_id) {
                Some(i) if chunk.owned.contains(&r.episode) => scores[i - 1] = Some(r.score),
                Some(_) if chunk.context.contains(&r.episode) => {}
                _ => warn!(
                    episode = r.episode,
                    scene_id = r.scene_id,
                    "score for a scene not in the prompt ignored"
                ),
            }
        }
    }
    let defaulted: Vec<usize> = (1..=scenes.len())
        .filter(|i| scores[i - 1].is_none())
        .collect();
    for &i in &defaulted {
        let s = scenes.get(i);
        warn!(
            episode = s.episode_id,
            scene_id = s.scene_id,
            "scene left unscored, using 0"
        );
    }
    let scores: Vec<u32> = scores.into_iter().map(|s| s.unwrap_or(0)).collect();
    Ok(ScoreOutcome {
        scored: scenes.with_scores(&scores),
        defaulted,
        calls: chunks.len(),
    })
}
