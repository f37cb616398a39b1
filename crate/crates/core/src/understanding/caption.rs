//! Scene narration from characters, dialogue and prior context.

use thiserror::Error;

use super::memory::MemoryStore;
use super::provider::{ChatProvider, ChatRequest, ProviderError};
use super::speakers::render_roster;
use crate::model::{CharacterProfile, DialogueLine, TimeInterval};
use crate::prompt;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaptionError {
    #[error("empty narration for {0}")]
    Empty(TimeInterval),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// A scene and how the captioning model should find its footage.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRef {
    pub scene_id: u32,
    pub interval: TimeInterval,
    /// Path or URL of the episode video, when there is one.
    pub video: Option<String>,
}

impl SceneRef {
    fn describe(&self) -> String {
        let clip = format!(
            "episode {} scene {} [{} --> {}]",
            self.interval.episode_id,
            self.scene_id,
            prompt::clock(self.interval.start_ms),
            prompt::clock(self.interval.end_ms)
        );
        match &self.video {
            Some(v) => format!("{clip} of {v}"),
            None => clip,
        }
    }
}

pub fn render_dialogue(lines: &[DialogueLine]) -> String {
    lines
        .iter()
        .map(|l| {
            format!(
                "[{} --> {}] {}: {}\n",
                prompt::clock(l.interval.start_ms),
                prompt::clock(l.interval.end_ms),
                l.speaker.as_ref().map_or("unknown", |s| s.as_str()),
                l.text
            )
        })
        .collect()
}

pub fn caption_request(
    model: &str,
    scene: &SceneRef,
    characters: &[CharacterProfile],
    dialogue: &[DialogueLine],
    prior_context: &str,
) -> ChatRequest {
    let roster = render_roster(characters);
    let spoken = render_dialogue(dialogue);
    ChatRequest::user(
        model,
        prompt::fill(
            prompt::CAPTION,
            &[
                ("SEGMENT", &scene.describe()),
                ("CHARACTERS", prompt::block_or_none(&roster)),
                ("DIALOGUE", prompt::block_or_none(&spoken)),
                ("CONTEXT", prompt::block_or_none(prior_context)),
            ],
        ),
    )
}

/// Captions one scene and stores the narration in `memory`.
///
/// Returns the trimmed narration and the memory version it was written at.
pub fn caption_scene(
    scene: &SceneRef,
    characters: &[CharacterProfile],
    dialogue: &[DialogueLine],
    prior_context: &str,
    mllm: &dyn ChatProvider,
    model: &str,
    memory: &MemoryStore,
) -> Result<(String, u64), CaptionError> {
    let request = caption_request(model, scene, characters, dialogue, prior_context);
    let reply = mllm.complete(&request)?;
    let narration = reply.trim();
    if narration.is_empty() {
        return Err(CaptionError::Empty(scene.interval));
    }
    let version = memory.put_narration(scene.interval.episode_id, scene.scene_id, narration);
    Ok((narration.to_string(), version))
}
