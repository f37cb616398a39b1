//! The full highlight-driven editing pass.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use super::boundaries::{accept_all, filter_boundaries, BoundaryError, BoundarySelection};
use super::clips::{ending_candidates, merge_highlight_clips_with, opening_candidates};
use super::prune::{keep_all, prune_window, PruneOutcome};
use super::rules::HighlightRuleSet;
use super::scoring::{score_scenes, ScoringError};
use super::splice::splice;
use super::windows::{enumerate_free_windows, enumerate_windows, ClipBoundaries};
use super::PromptSettings;
use crate::model::{EditPlan, EditWindow, HighlightClip, PlanMethod, Provenance, SceneSequence};
use crate::understanding::provider::{CallError, ChatProvider};

pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EditOptions {
    /// Number of top clips to edit around; clamped to the clip count.
    pub k: usize,
    /// Score scenes and build windows around highlight clips. When off,
    /// every scene is both an opening and an ending candidate.
    pub highlight: bool,
    /// Ask the model to filter opening/ending candidates.
    pub boundary: bool,
    /// Ask the model to prune general scenes inside each window.
    pub pruning: bool,
    pub max_in_flight: usize,
    /// Let a highlight clip run across an episode boundary.
    pub allow_cross_episode: bool,
}

impl Default for EditOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOP_K,
            highlight: true,
            boundary: true,
            pruning: true,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            allow_cross_episode: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum EditError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("the scene sequence is empty")]
    EmptySeries,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("no scene scored above zero")]
    EmptyHighlights,
    #[error("every clip was skipped; no edit windows")]
    NoWindows,
    #[error("boundary selection: {0}")]
    Boundary(CallError),
    #[error("pruning: {0}")]
    Prune(CallError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipReport {
    pub rank: usize,
    pub clip: HighlightClip,
    pub opening_candidates: BTreeSet<usize>,
    pub ending_candidates: BTreeSet<usize>,
    /// Accepted boundaries, or why the clip was skipped.
    pub selection: Result<BoundarySelection, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutcome {
    pub scored: SceneSequence,
    /// Scenes the scoring model left out.
    pub defaulted: Vec<usize>,
    pub clips: Vec<HighlightClip>,
    pub clip_reports: Vec<ClipReport>,
    pub windows: Vec<EditWindow>,
    pub prunes: Vec<PruneOutcome>,
    /// One plan per window, in window order.
    pub plans: Vec<EditPlan>,
}

fn select(
    openings: &BTreeSet<usize>,
    endings: &BTreeSet<usize>,
    scored: &SceneSequence,
    llm: &dyn ChatProvider,
    settings: &PromptSettings,
    ask: bool,
) -> Result<Result<BoundarySelection, String>, EditError> {
    let result = if ask {
        filter_boundaries(openings, endings, scored, llm, settings)
    } else {
        accept_all(openings, endings)
    };
    match result {
        Ok(sel) => Ok(Ok(sel)),
        Err(BoundaryError::ClipSkipped(why)) => Ok(Err(why.to_string())),
        Err(BoundaryError::Call(e)) => Err(EditError::Boundary(e)),
    }
}

/// Runs scoring, clip merging, boundary selection, window enumeration,
/// pruning and splicing, returning one plan per surviving window.
///
/// Model calls for different clips, and for different windows, run on up
/// to `max_in_flight` threads; results are assembled in a fixed order, so
/// the output depends only on the model replies.
pub fn edit(
    video: &SceneSequence,
    rules: &HighlightRuleSet,
    llm: &dyn ChatProvider,
    settings: &PromptSettings,
    options: &EditOptions,
) -> Result<EditOutcome, EditError> {
    if options.k == 0 {
        return Err(EditError::InvalidK);
    }
    if video.is_empty() {
        return Err(EditError::EmptySeries);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.max_in_flight.max(1))
        .build()
        .map_err(|e| EditError::Pool(e.to_string()))?;

    let (scored, defaulted, clips, clip_reports, windows) = if options.highlight {
        let outcome = score_scenes(video, rules, llm, settings)?;
        let scored = outcome.scored;
        let clips = merge_highlight_clips_with(&scored, options.allow_cross_episode);
        if clips.is_empty() {
            return Err(EditError::EmptyHighlights);
        }
        let k = options.k.min(clips.len());
        info!(clips = clips.len(), k, "highlight clips merged");
        let reports: Vec<ClipReport> = pool.install(|| {
            clips[..k]
                .par_iter()
                .enumerate()
                .map(|(n, clip)| {
                    let o = opening_candidates(clip, &scored, &clips);
                    let e = ending_candidates(clip, &scored, &clips);
                    let selection = select(&o, &e, &scored, llm, settings, options.boundary)?;
                    Ok(ClipReport {
                        rank: n + 1,
                        clip: *clip,
                        opening_candidates: o,
                        ending_candidates: e,
                        selection,
                    })
                })
                .collect::<Result<_, EditError>>()
        })?;
        let accepted: Vec<ClipBoundaries> = reports
            .iter()
            .filter_map(|r| match &r.selection {
                Ok(sel) => Some(ClipBoundaries {
                    rank: r.rank,
                    clip: r.clip,
                    openings: sel.openings.clone(),
                    endings: sel.endings.clone(),
                }),
                Err(why) => {
                    warn!(rank = r.rank, reason = %why, "clip skipped");
                    None
                }
            })
            .collect();
        let windows = enumerate_windows(&accepted);
        (scored, outcome.defaulted, clips, reports, windows)
    } else {
        let scored = video.with_scores(&vec![0; video.len()]);
        let all: BTreeSet<usize> = (1..=scored.len()).collect();
        let windows = match select(&all, &all, &scored, llm, settings, options.boundary)? {
            Ok(sel) => enumerate_free_windows(&sel.openings, &sel.endings),
            Err(why) => {
                warn!(reason = %why, "no boundaries accepted");
                Vec::new()
            }
        };
        (scored, Vec::new(), Vec::new(), Vec::new(), windows)
    };
    if windows.is_empty() {
        return Err(EditError::NoWindows);
    }
    info!(windows = windows.len(), "edit windows enumerated");

    let prunes: Vec<PruneOutcome> = pool.install(|| {
        windows
            .par_iter()
            .map(|w| {
                if options.pruning {
                    prune_window(w, &scored, llm, settings).map_err(EditError::Prune)
                } else {
                    Ok(keep_all(w))
                }
            })
            .collect::<Result<_, EditError>>()
    })?;
    let plans = windows
        .iter()
        .zip(&prunes)
        .map(|(w, p)| {
            splice(
                &p.kept,
                &scored,
                Provenance {
                    method: PlanMethod::Highlight,
                    clip_rank: w.clip_rank,
                    opening_index: Some(w.opening_index),
                    ending_index: Some(w.ending_index),
                    pruned: p.deleted.clone(),
                },
            )
        })
        .collect();

    Ok(EditOutcome {
        scored,
        defaulted,
        clips,
        clip_reports,
        windows,
        prunes,
        plans,
    })
}
