//! Highlight-driven editing: score scenes, pick windows around the best
//! clips, prune them and splice the rest into cut lists.

pub mod baseline;
pub mod boundaries;
pub mod clips;
pub mod edit;
pub mod mock;
pub mod prune;
pub mod render;
pub mod rules;
pub mod scoring;
pub mod splice;
pub mod windows;

pub use baseline::{end2end_edit, BaselineMode, End2EndInput};
pub use boundaries::filter_boundaries;
pub use clips::{ending_candidates, merge_highlight_clips, opening_candidates};
pub use edit::{edit, EditError, EditOptions, EditOutcome};
pub use mock::AcceptAllEditor;
pub use prune::prune_window;
pub use rules::{Audience, HighlightRuleSet};
pub use scoring::score_scenes;
pub use splice::splice;
pub use windows::enumerate_windows;

use scoring::DEFAULT_CHUNK_TOKEN_BUDGET;

/// What every editing prompt needs besides the scenes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSettings {
    pub title: String,
    pub audience: Audience,
    pub model: String,
    /// Estimated-token budget for one scoring prompt.
    pub chunk_token_budget: usize,
}

impl PromptSettings {
    pub fn new(title: impl Into<String>, audience: Audience, model: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            audience,
            model: model.into(),
            chunk_token_budget: DEFAULT_CHUNK_TOKEN_BUDGET,
        }
    }
}
