//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is metadata only: time spans on the source timeline,
//! scenes with their narration and highlight score, and the edit plans
//! produced from them. All values are immutable once built and can be
//! shared freely between threads.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type EpisodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid interval in episode {episode_id}: start {start_ms} ms is not before end {end_ms} ms")]
    InvalidInterval {
        episode_id: EpisodeId,
        start_ms: u64,
        end_ms: u64,
    },
    #[error("episode id must be positive")]
    ZeroEpisode,
    #[error("IoU is undefined when both interval lists are empty")]
    UndefinedIou,
    #[error("scene {episode_id}/{scene_id}: {reason}")]
    InvalidScene {
        episode_id: EpisodeId,
        scene_id: u32,
        reason: String,
    },
    #[error("duplicate scene {episode_id}/{scene_id}")]
    DuplicateScene {
        episode_id: EpisodeId,
        scene_id: u32,
    },
    #[error("scenes {episode_id}/{left} and {episode_id}/{right} are not contiguous ({left_end_ms} ms vs {right_start_ms} ms)")]
    NotContiguous {
        episode_id: EpisodeId,
        left: u32,
        right: u32,
        left_end_ms: u64,
        right_start_ms: u64,
    },
}

/// A half-open span `[start_ms, end_ms)` of one episode's source video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeInterval {
    pub episode_id: EpisodeId,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl TimeInterval {
    pub fn new(episode_id: EpisodeId, start_ms: u64, end_ms: u64) -> Result<Self, ModelError> {
        let interval = Self {
            episode_id,
            start_ms,
            end_ms,
        };
        interval.validate()?;
        Ok(interval)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.episode_id == 0 {
            return Err(ModelError::ZeroEpisode);
        }
        if self.start_ms >= self.end_ms {
            return Err(ModelError::InvalidInterval {
                episode_id: self.episode_id,
                start_ms: self.start_ms,
                end_ms: self.end_ms,
            });
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms.saturating_sub(self.start_ms)
    }

    pub fn contains_ms(&self, t: u64) -> bool {
        self.start_ms <= t && t < self.end_ms
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ep{}[{}..{}]",
            self.episode_id, self.start_ms, self.end_ms
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SceneRole {
    #[default]
    General,
    Highlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    OptionalStart,
    OptionalEnd,
}

/// A semantically complete segment of one episode; the unit every edit is
/// built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub episode_id: EpisodeId,
    pub scene_id: u32,
    pub interval: TimeInterval,
    #[serde(default)]
    pub narration: String,
    #[serde(default)]
    pub dialogue_refs: Vec<String>,
    #[serde(default)]
    pub score: u32,
    #[serde(default)]
    pub role: SceneRole,
    #[serde(default)]
    pub tags: BTreeSet<BoundaryTag>,
}

impl Scene {
    pub fn new(interval: TimeInterval, scene_id: u32, narration: impl Into<String>) -> Self {
        Self {
            episode_id: interval.episode_id,
            scene_id,
            interval,
            narration: narration.into(),
            dialogue_refs: Vec::new(),
            score: 0,
            role: SceneRole::General,
            tags: BTreeSet::new(),
        }
    }

    /// Sets the score and derives the role from it.
    pub fn set_score(&mut self, score: u32) {
        self.score = score;
        self.role = if score > 0 {
            SceneRole::Highlight
        } else {
            SceneRole::General
        };
    }

    pub fn with_score(mut self, score: u32) -> Self {
        self.set_score(score);
        self
    }

    pub fn is_highlight(&self) -> bool {
        self.role == SceneRole::Highlight
    }

    pub fn key(&self) -> (EpisodeId, u32) {
        (self.episode_id, self.scene_id)
    }

    fn invalid(&self, reason: impl Into<String>) -> ModelError {
        ModelError::InvalidScene {
            episode_id: self.episode_id,
            scene_id: self.scene_id,
            reason: reason.into(),
        }
    }
}

/// Scenes of a whole series in global `(episode_id, scene_id)` order.
///
/// Global indices are 1-based: `get(1)` is the first scene of the first
/// episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSequence {
    scenes: Vec<Scene>,
    index: HashMap<(EpisodeId, u32), usize>,
}

impl SceneSequence {
    pub fn new(mut scenes: Vec<Scene>) -> Result<Self, ModelError> {
        scenes.sort_by_key(Scene::key);
        let mut index = HashMap::with_capacity(scenes.len());
        for (pos, scene) in scenes.iter().enumerate() {
            if scene.scene_id == 0 {
                return Err(scene.invalid("scene id must be positive"));
            }
            if scene.interval.episode_id != scene.episode_id {
                return Err(scene.invalid("interval belongs to another episode"));
            }
            scene.interval.validate()?;
            if (scene.score == 0) != (scene.role == SceneRole::General) {
                return Err(scene.invalid("role disagrees with score"));
            }
            if index.insert(scene.key(), pos + 1).is_some() {
                return Err(ModelError::DuplicateScene {
                    episode_id: scene.episode_id,
                    scene_id: scene.scene_id,
                });
            }
        }
        for pair in scenes.windows(2) {
            let (left, right) = (&pair[0], &pair[1]);
            if left.episode_id == right.episode_id
                && left.interval.end_ms != right.interval.start_ms
            {
                return Err(ModelError::NotContiguous {
                    episode_id: left.episode_id,
                    left: left.scene_id,
                    right: right.scene_id,
                    left_end_ms: left.interval.end_ms,
                    right_start_ms: right.interval.start_ms,
                });
            }
        }
        Ok(Self { scenes, index })
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    /// Scene at a 1-based global index.
    ///
    /// Panics when the index is out of range.
    pub fn get(&self, index: usize) -> &Scene {
        &self.scenes[index - 1]
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn into_scenes(self) -> Vec<Scene> {
        self.scenes
    }

    pub fn global_index(&self, episode_id: EpisodeId, scene_id: u32) -> Option<usize> {
        self.index.get(&(episode_id, scene_id)).copied()
    }

    /// `(global_index, scene)` pairs in order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Scene)> {
        self.scenes.iter().enumerate().map(|(i, s)| (i + 1, s))
    }

    pub fn episode_ids(&self) -> Vec<EpisodeId> {
        let mut ids: Vec<_> = self.scenes.iter().map(|s| s.episode_id).collect();
        ids.dedup();
        ids
    }

    /// Returns a copy with the scores replaced; roles follow the scores.
    pub fn with_scores(&self, scores: &[u32]) -> Self {
        assert_eq!(scores.len(), self.scenes.len(), "one score per scene");
        let scenes = self
            .scenes
            .iter()
            .zip(scores)
            .map(|(s, &score)| s.clone().with_score(score))
            .collect();
        Self {
            scenes,
            index: self.index.clone(),
        }
    }

    pub fn scores(&self) -> Vec<u32> {
        self.scenes.iter().map(|s| s.score).collect()
    }

    /// True when global indices `a` and `a + 1` can share one cut.
    pub fn joins_next(&self, a: usize) -> bool {
        if a == 0 || a >= self.scenes.len() {
            return false;
        }
        let (left, right) = (self.get(a), self.get(a + 1));
        left.episode_id == right.episode_id && left.interval.end_ms == right.interval.start_ms
    }
}

/// A maximal run of consecutive positive-score scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HighlightClip {
    pub first_index: usize,
    pub last_index: usize,
    pub score: u32,
}

impl HighlightClip {
    pub fn len(&self) -> usize {
        self.last_index - self.first_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.first_index <= index && index <= self.last_index
    }
}

/// An `(opening, ending)` pair of global scene indices enclosing a clip.
///
/// `clip` is `None` only when highlight detection is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditWindow {
    pub clip_rank: Option<usize>,
    pub clip: Option<HighlightClip>,
    pub opening_index: usize,
    pub ending_index: usize,
}

impl EditWindow {
    pub fn is_valid(&self) -> bool {
        if self.opening_index == 0 || self.opening_index > self.ending_index {
            return false;
        }
        match self.clip {
            Some(clip) => {
                self.opening_index <= clip.first_index && self.ending_index >= clip.last_index
            }
            None => true,
        }
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.opening_index..=self.ending_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    Highlight,
    #[serde(rename = "end2end_asr")]
    End2EndAsr,
    #[serde(rename = "end2end_narration")]
    End2EndNarration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: PlanMethod,
    pub clip_rank: Option<usize>,
    pub opening_index: Option<usize>,
    pub ending_index: Option<usize>,
    #[serde(default)]
    pub pruned: Vec<usize>,
}

impl Provenance {
    pub fn baseline(method: PlanMethod) -> Self {
        Self {
            method,
            clip_rank: None,
            opening_index: None,
            ending_index: None,
            pruned: Vec::new(),
        }
    }
}

/// The output clip: ordered, non-overlapping source intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPlan {
    pub cuts: Vec<TimeInterval>,
    pub provenance: Provenance,
    pub total_duration_ms: u64,
}

impl EditPlan {
    pub fn new(cuts: Vec<TimeInterval>, provenance: Provenance) -> Self {
        let total_duration_ms = cuts.iter().map(TimeInterval::duration_ms).sum();
        Self {
            cuts,
            provenance,
            total_duration_ms,
        }
    }

    /// Checks cut ordering, overlap and the stored total.
    pub fn validate(&self) -> Result<(), String> {
        for cut in &self.cuts {
            cut.validate().map_err(|e| e.to_string())?;
        }
        for pair in self.cuts.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ordered = (a.episode_id, a.start_ms) < (b.episode_id, b.start_ms);
            let overlaps = a.episode_id == b.episode_id && b.start_ms < a.end_ms;
            if !ordered || overlaps {
                return Err(format!("cuts {a} and {b} are out of order or overlap"));
            }
        }
        let sum: u64 = self.cuts.iter().map(TimeInterval::duration_ms).sum();
        if sum != self.total_duration_ms {
            return Err(format!(
                "total_duration_ms {} does not match cut sum {sum}",
                self.total_duration_ms
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharacterId(pub String);

impl CharacterId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CharacterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DialogueSource {
    #[default]
    #[serde(rename = "ASR")]
    Asr,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueLine {
    pub id: String,
    pub interval: TimeInterval,
    pub speaker: Option<CharacterId>,
    pub text: String,
    #[serde(default)]
    pub source: DialogueSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relationship {
    pub other: CharacterId,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub id: CharacterId,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub face_cluster_id: Option<usize>,
    #[serde(default)]
    pub descriptors: Vec<String>,
    #[serde(default)]
    pub relationships: Vec<Relationship>,
}

impl CharacterProfile {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: CharacterId::new(id),
            display_name: None,
            face_cluster_id: None,
            descriptors: Vec::new(),
            relationships: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        self.display_name.as_deref().unwrap_or(self.id.as_str())
    }
}
