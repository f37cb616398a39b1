//! Series-level understanding: dialogue, characters, scenes and narration.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use super::caption::{caption_scene, CaptionError, SceneRef};
use super::characters::{extract_characters, sightings};
use super::dialogue::{
    correct_dialogue_chunked, CorrectionRejected, DialogueError, DEFAULT_LINES_PER_CALL,
};
use super::faces::{cluster_faces, FaceError};
use super::memory::{MemoryError, MemoryStore};
use super::provider::{CallError, FaceObservation, ProviderError, ProviderSuite};
use super::segmentation::{segment_scenes, SegmentationError, SkippedDirective};
use super::speakers::{
    attribute_speakers, AttributionInput, SpeakerError, DEFAULT_FUSION_THRESHOLD,
};
use crate::model::{CharacterProfile, DialogueLine, EpisodeId, Scene, TimeInterval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnderstandConfig {
    pub model: String,
    /// Models that vote on speaker identity. Empty means `[model]`.
    pub voter_models: Vec<String>,
    pub fusion_threshold: f64,
    pub face_threshold: f32,
    pub lines_per_call: usize,
}

impl Default for UnderstandConfig {
    fn default() -> Self {
        Self {
            model: "default".into(),
            voter_models: Vec::new(),
            fusion_threshold: DEFAULT_FUSION_THRESHOLD,
            face_threshold: 0.75,
            lines_per_call: DEFAULT_LINES_PER_CALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInput {
    pub episode_id: EpisodeId,
    #[serde(default)]
    pub duration_ms: Option<u64>,
    #[serde(default)]
    pub video: Option<String>,
}

#[derive(Debug, Error)]
pub enum UnderstandError {
    #[error("episode {episode_id}: {source}")]
    Provider {
        episode_id: EpisodeId,
        source: ProviderError,
    },
    #[error(transparent)]
    Faces(#[from] FaceError),
    #[error("episode {episode_id}: {source}")]
    Dialogue {
        episode_id: EpisodeId,
        source: DialogueError,
    },
    #[error("episode {episode_id}: {source}")]
    Characters {
        episode_id: EpisodeId,
        source: CallError,
    },
    #[error("episode {episode_id}: {source}")]
    Speakers {
        episode_id: EpisodeId,
        source: SpeakerError,
    },
    #[error("episode {episode_id}: {source}")]
    Segmentation {
        episode_id: EpisodeId,
        source: SegmentationError,
    },
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("episode {0} listed twice")]
    DuplicateEpisode(EpisodeId),
}

/// Something the pipeline noticed and worked around.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineFlag {
    CorrectionRejected(CorrectionRejected),
    DirectiveSkipped {
        episode_id: EpisodeId,
        directive: SkippedDirective,
    },
    CaptionFailed {
        episode_id: EpisodeId,
        scene_id: u32,
        error: String,
    },
}

#[derive(Debug)]
pub struct SeriesUnderstanding {
    /// Scenes in series order; a scene whose caption failed has empty
    /// narration and a matching flag.
    pub scenes: Vec<Scene>,
    pub dialogue: Vec<DialogueLine>,
    pub characters: Vec<CharacterProfile>,
    pub memory: MemoryStore,
    pub flags: Vec<PipelineFlag>,
}

/// Runs the whole understanding stage over `episodes`, in the given order.
///
/// Faces are clustered across the series first so identities carry over
/// between episodes. Each episode then goes through dialogue correction,
/// character extraction, speaker attribution, scene segmentation and
/// captioning; captions read the memory written by earlier scenes.
pub fn understand_series(
    episodes: &[EpisodeInput],
    providers: &ProviderSuite,
    config: &UnderstandConfig,
) -> Result<SeriesUnderstanding, UnderstandError> {
    let mut ids: Vec<EpisodeId> = episodes.iter().map(|e| e.episode_id).collect();
    ids.sort_unstable();
    if let Some(dup) = ids.windows(2).find(|p| p[0] == p[1]) {
        return Err(UnderstandError::DuplicateEpisode(dup[0]));
    }
    let provider_err = |episode_id| move |source| UnderstandError::Provider { episode_id, source };

    let mut faces: Vec<Vec<FaceObservation>> = Vec::with_capacity(episodes.len());
    for ep in episodes {
        faces.push(
            providers
                .face_embedder
                .faces(ep.episode_id)
                .map_err(provider_err(ep.episode_id))?,
        );
    }
    let all: Vec<Vec<f32>> = faces.iter().flatten().map(|f| f.vector.clone()).collect();
    let mut assignment = cluster_faces(&all, config.face_threshold)?.into_iter();
    let clustered: Vec<Vec<(FaceObservation, usize)>> = faces
        .into_iter()
        .map(|fs| {
            fs.into_iter()
                .map(|f| (f, assignment.next().expect("one id per face")))
                .collect()
        })
        .collect();

    let voters = if config.voter_models.is_empty() {
        vec![config.model.clone()]
    } else {
        config.voter_models.clone()
    };
    let memory = MemoryStore::new();
    let mut characters: Vec<CharacterProfile> = Vec::new();
    let mut scenes = Vec::new();
    let mut dialogue = Vec::new();
    let mut flags = Vec::new();

    for (ep, faces) in episodes.iter().zip(&clustered) {
        let episode_id = ep.episode_id;
        info!(episode_id, "understanding episode");
        let mut asr = providers
            .asr
            .transcript(episode_id)
            .map_err(provider_err(episode_id))?;
        asr.sort_by_key(|l| (l.interval.start_ms, l.interval.end_ms));
        let ocr = providers
            .ocr
            .frame_text(episode_id)
            .map_err(provider_err(episode_id))?;
        let corrected = correct_dialogue_chunked(
            &asr,
            &ocr,
            &*providers.llm,
            &config.model,
            config.lines_per_call,
        )
        .map_err(|source| UnderstandError::Dialogue { episode_id, source })?;
        flags.extend(
            corrected
                .rejected
                .into_iter()
                .map(PipelineFlag::CorrectionRejected),
        );

        let extracted = extract_characters(
            episode_id,
            &sightings(faces),
            &corrected.lines,
            &characters,
            &*providers.llm,
            &config.model,
        )
        .map_err(|source| UnderstandError::Characters { episode_id, source })?;
        for profile in extracted {
            match characters.iter_mut().find(|c| c.id == profile.id) {
                Some(slot) => *slot = profile,
                None => characters.push(profile),
            }
        }

        let turns = providers
            .diarizer
            .speaker_turns(episode_id)
            .map_err(provider_err(episode_id))?;
        let lines = attribute_speakers(
            &AttributionInput {
                lines: &corrected.lines,
                characters: &characters,
                faces,
                turns: &turns,
            },
            &*providers.llm,
            &voters,
            config.fusion_threshold,
        )
        .map_err(|source| UnderstandError::Speakers { episode_id, source })?;

        let shots = providers
            .shot_detector
            .shots(episode_id)
            .map_err(provider_err(episode_id))?;
        let segmentation = segment_scenes(
            episode_id,
            &shots,
            ep.duration_ms,
            &*providers.shot_fusion_classifier,
            &*providers.llm,
            &config.model,
            &lines,
        )
        .map_err(|source| UnderstandError::Segmentation { episode_id, source })?;
        flags.extend(segmentation.skipped.into_iter().map(|directive| {
            PipelineFlag::DirectiveSkipped {
                episode_id,
                directive,
            }
        }));
        let bounds: Vec<(u32, TimeInterval)> = segmentation
            .scenes
            .iter()
            .enumerate()
            .map(|(i, iv)| (i as u32 + 1, *iv))
            .collect();
        memory.register_episode(episode_id, &bounds);
        for profile in &characters {
            let first = first_appearance(profile, faces, &lines, &bounds);
            memory.upsert_character(profile.clone(), first.map(|s| (episode_id, s)));
        }

        for (scene_id, interval) in &bounds {
            let context = memory.snapshot().get_context(episode_id, *scene_id)?;
            let spoken: Vec<DialogueLine> = lines
                .iter()
                .filter(|l| interval.contains_ms(l.interval.start_ms))
                .cloned()
                .collect();
            let scene_ref = SceneRef {
                scene_id: *scene_id,
                interval: *interval,
                video: ep.video.clone(),
            };
            let narration = match caption_scene(
                &scene_ref,
                &context.roster,
                &spoken,
                &context.previous_summary,
                &*providers.llm,
                &config.model,
                &memory,
            ) {
                Ok((text, _)) => text,
                Err(error @ (CaptionError::Empty(_) | CaptionError::Provider(_))) => {
                    warn!(episode_id, scene_id, %error, "caption failed");
                    flags.push(PipelineFlag::CaptionFailed {
                        episode_id,
                        scene_id: *scene_id,
                        error: error.to_string(),
                    });
                    String::new()
                }
            };
            scenes.push(Scene::new(*interval, *scene_id, narration));
        }
        dialogue.extend(lines);
    }

    Ok(SeriesUnderstanding {
        scenes,
        dialogue,
        characters,
        memory,
        flags,
    })
}

/// First scene of the episode where the character is on screen or speaks.
fn first_appearance(
    profile: &CharacterProfile,
    faces: &[(FaceObservation, usize)],
    lines: &[DialogueLine],
    bounds: &[(u32, TimeInterval)],
) -> Option<u32> {
    let on_screen = faces
        .iter()
        .filter(|(_, c)| Some(*c) == profile.face_cluster_id)
        .map(|(f, _)| f.timestamp_ms);
    let speaks = lines
        .iter()
        .filter(|l| l.speaker.as_ref() == Some(&profile.id))
        .map(|l| l.interval.start_ms);
    let t = on_screen.chain(speaks).min()?;
    bounds
        .iter()
        .find(|(_, iv)| iv.contains_ms(t))
        .or(bounds.last())
        .map(|(s, _)| *s)
}
