//! Removal of redundant general scenes inside an edit window.

use serde::Deserialize;
use tracing::warn;

use super::render::scene_lines;
use super::PromptSettings;
use crate::model::{EditWindow, EpisodeId, SceneRole, SceneSequence};
use crate::prompt;
use crate::understanding::provider::{call_parsed, CallError, ChatProvider, ChatRequest};
use crate::understanding::result_block::{parse_result_block, RecordSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct PruneDecision {
    pub episode: EpisodeId,
    pub scene_id: u32,
    pub delete: bool,
}

/// A deletion the model asked for that was not carried out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneViolation {
    pub episode: EpisodeId,
    pub scene_id: u32,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneOutcome {
    /// Kept global indices, ascending.
    pub kept: Vec<usize>,
    pub deleted: Vec<usize>,
    pub violations: Vec<PruneViolation>,
    pub called: bool,
}

fn deletable(window: &EditWindow, scored: &SceneSequence, i: usize) -> bool {
    i != window.opening_index
        && i != window.ending_index
        && scored.get(i).role == SceneRole::General
}

pub fn prune_request(
    settings: &PromptSettings,
    window: &EditWindow,
    scored: &SceneSequence,
) -> ChatRequest {
    let listing = scene_lines(scored, window.indices(), |i| {
        vec![match scored.get(i).role {
            SceneRole::Highlight => "Highlight Scene",
            SceneRole::General => "General Scene",
        }]
    });
    let audience = settings.audience.to_string();
    ChatRequest::user(
        &settings.model,
        prompt::fill(
            prompt::PRUNE,
            &[
                ("TITLE", &settings.title),
                ("AUDIENCE", &audience),
                ("SCENES", &listing),
            ],
        ),
    )
}

/// Applies the deletions in `decisions` to the window.
///
/// Highlight scenes and the window's first and last scenes are never
/// deleted, whatever the decisions say.
pub fn apply_prune_decisions(
    window: &EditWindow,
    scored: &SceneSequence,
    decisions: &[PruneDecision],
) -> PruneOutcome {
    let mut delete = vec![false; scored.len() + 1];
    let mut violations = Vec::new();
    for d in decisions.iter().filter(|d| d.delete) {
        let reason = match scored.global_index(d.episode, d.scene_id) {
            None => Some("unknown scene"),
            Some(i) if !window.indices().contains(&i) => Some("outside the window"),
            Some(i) if scored.get(i).role == SceneRole::Highlight => Some("highlight scene"),
            Some(i) if i == window.opening_index || i == window.ending_index => {
                Some("window boundary scene")
            }
            Some(i) => {
                delete[i] = true;
                None
            }
        };
        if let Some(reason) = reason {
            warn!(
                episode = d.episode,
                scene_id = d.scene_id,
                reason,
                "prune decision ignored"
            );
            violations.push(PruneViolation {
                episode: d.episode,
                scene_id: d.scene_id,
                reason,
            });
        }
    }
    let (deleted, kept) = window.indices().partition(|&i| delete[i]);
    PruneOutcome {
        kept,
        deleted,
        violations,
        called: true,
    }
}

/// Asks the model which general scenes of the window can go. No call is
/// made when the window has no deletable scene.
pub fn prune_window(
    window: &EditWindow,
    scored: &SceneSequence,
    llm: &dyn ChatProvider,
    settings: &PromptSettings,
) -> Result<PruneOutcome, CallError> {
    if !window.indices().any(|i| deletable(window, scored, i)) {
        return Ok(keep_all(window));
    }
    let request = prune_request(settings, window, scored);
    let decisions: Vec<PruneDecision> = call_parsed(llm, &request, |reply| {
        parse_result_block(reply, &RecordSchema::prune_decisions())?.decode()
    })?;
    Ok(apply_prune_decisions(window, scored, &decisions))
}

/// The whole window, untouched.
pub fn keep_all(window: &EditWindow) -> PruneOutcome {
    PruneOutcome {
        kept: window.indices().collect(),
        deleted: Vec::new(),
        violations: Vec::new(),
        called: false,
    }
}
