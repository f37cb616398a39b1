//! Model-guided choice of opening and ending scenes.

use std::collections::BTreeSet;

use serde::Deserialize;
use thiserror::Error;
use tracing::warn;

use super::render::scene_lines;
use super::PromptSettings;
use crate::model::{EpisodeId, SceneRole, SceneSequence};
use crate::prompt;
use crate::understanding::provider::{call_parsed, CallError, ChatProvider, ChatRequest};
use crate::understanding::result_block::{parse_result_block, RecordSchema};

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("clip skipped: {0}")]
    ClipSkipped(&'static str),
    #[error(transparent)]
    Call(#[from] CallError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct BoundaryDecision {
    pub episode: EpisodeId,
    pub scene_id: u32,
    pub starting: bool,
    pub ending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundarySelection {
    pub openings: BTreeSet<usize>,
    pub endings: BTreeSet<usize>,
    /// Decisions about scenes that were not candidates, as `(episode, scene)`.
    pub discarded: Vec<(EpisodeId, u32)>,
}

pub fn boundary_request(
    settings: &PromptSettings,
    scored: &SceneSequence,
    openings: &BTreeSet<usize>,
    endings: &BTreeSet<usize>,
) -> ChatRequest {
    let lo = openings.iter().chain(endings).min().copied().unwrap_or(1);
    let hi = openings.iter().chain(endings).max().copied().unwrap_or(0);
    let listing = scene_lines(scored, lo..=hi, |i| {
        let mut tags = Vec::new();
        if scored.get(i).role == SceneRole::Highlight {
            tags.push("Highlight");
        }
        if openings.contains(&i) {
            tags.push("Optional Start");
        }
        if endings.contains(&i) {
            tags.push("Optional End");
        }
        tags
    });
    let audience = settings.audience.to_string();
    ChatRequest::user(
        &settings.model,
        prompt::fill(
            prompt::BOUNDARY,
            &[
                ("TITLE", &settings.title),
                ("AUDIENCE", &audience),
                ("SCENES", &listing),
            ],
        ),
    )
}

/// Keeps the candidates the model accepts. A scene counts as an opening
/// only if it was an opening candidate and the model set `starting`, and
/// likewise for endings. Decisions about other scenes are discarded.
pub fn filter_boundaries(
    openings: &BTreeSet<usize>,
    endings: &BTreeSet<usize>,
    scored: &SceneSequence,
    llm: &dyn ChatProvider,
    settings: &PromptSettings,
) -> Result<BoundarySelection, BoundaryError> {
    if openings.is_empty() || endings.is_empty() {
        return Err(BoundaryError::ClipSkipped("no candidates"));
    }
    let request = boundary_request(settings, scored, openings, endings);
    let decisions: Vec<BoundaryDecision> = call_parsed(llm, &request, |reply| {
        parse_result_block(reply, &RecordSchema::boundary_decisions())?.decode()
    })?;
    let mut selection = BoundarySelection::default();
    for d in decisions {
        let index = scored.global_index(d.episode, d.scene_id);
        let tagged = index.filter(|i| openings.contains(i) || endings.contains(i));
        let Some(i) = tagged else {
            warn!(
                episode = d.episode,
                scene_id = d.scene_id,
                "boundary decision for an untagged scene discarded"
            );
            selection.discarded.push((d.episode, d.scene_id));
            continue;
        };
        if d.starting && openings.contains(&i) {
            selection.openings.insert(i);
        }
        if d.ending && endings.contains(&i) {
            selection.endings.insert(i);
        }
    }
    if selection.openings.is_empty() {
        return Err(BoundaryError::ClipSkipped("no opening accepted"));
    }
    if selection.endings.is_empty() {
        return Err(BoundaryError::ClipSkipped("no ending accepted"));
    }
    Ok(selection)
}

/// Accepts every candidate without asking the model.
pub fn accept_all(
    openings: &BTreeSet<usize>,
    endings: &BTreeSet<usize>,
) -> Result<BoundarySelection, BoundaryError> {
    if openings.is_empty() || endings.is_empty() {
        return Err(BoundaryError::ClipSkipped("no candidates"));
    }
    Ok(BoundarySelection {
        openings: openings.clone(),
        endings: endings.clone(),
        discarded: Vec::new(),
    })
}
