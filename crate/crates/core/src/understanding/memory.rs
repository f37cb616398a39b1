//! Versioned store for what the pipeline has learned about a series:
//! characters on one side, scene boundaries and narration on the other.
//!
//! Every write publishes a new immutable snapshot under the next version
//! number. Readers hold an `Arc` to a snapshot, so a read pinned at a
//! version is repeatable no matter what is written afterwards.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CharacterId, CharacterProfile, EpisodeId, TimeInterval};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("episode {0} is not in memory")]
    UnknownEpisode(EpisodeId),
    #[error("memory has no version {0}")]
    UnknownVersion(u64),
    #[error("memory is empty (version 0)")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneEntry {
    pub interval: Option<TimeInterval>,
    pub narration: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeNarrative {
    pub scenes: BTreeMap<u32, SceneEntry>,
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterRecord {
    pub profile: CharacterProfile,
    /// `(episode, scene)` where the character was first seen, if known.
    pub first_seen: Option<(EpisodeId, u32)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub version: u64,
    pub characters: BTreeMap<CharacterId, CharacterRecord>,
    pub narrative: BTreeMap<EpisodeId, Arc<EpisodeNarrative>>,
}

/// What a caption call needs to know about everything before a scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextBundle {
    pub previous_summary: String,
    pub roster: Vec<CharacterProfile>,
}

impl MemorySnapshot {
    pub fn episode(&self, episode_id: EpisodeId) -> Option<&EpisodeNarrative> {
        self.narrative.get(&episode_id).map(Arc::as_ref)
    }

    pub fn narration(&self, episode_id: EpisodeId, scene_id: u32) -> Option<&str> {
        self.episode(episode_id)?
            .scenes
            .get(&scene_id)?
            .narration
            .as_deref()
    }

    /// Latest narration strictly before `(episode_id, scene_id)` and every
    /// character first seen at or before it.
    ///
    /// Within the episode the nearest preceding narrated scene wins; before
    /// the episode's first scene, the previous episode's summary is used, or
    /// failing that its last narrated scene.
    pub fn get_context(
        &self,
        episode_id: EpisodeId,
        scene_id: u32,
    ) -> Result<ContextBundle, MemoryError> {
        if self.version == 0 {
            return Err(MemoryError::Empty);
        }
        let current = self
            .episode(episode_id)
            .ok_or(MemoryError::UnknownEpisode(episode_id))?;
        let last_narration = |ep: &EpisodeNarrative, before: Option<u32>| -> Option<String> {
            ep.scenes
                .range(..before.unwrap_or(u32::MAX))
                .rev()
                .find_map(|(_, s)| s.narration.clone())
        };
        let mut previous_summary = last_narration(current, Some(scene_id));
        if previous_summary.is_none() {
            previous_summary = self
                .narrative
                .range(..episode_id)
                .rev()
                .find_map(|(_, ep)| ep.summary.clone().or_else(|| last_narration(ep, None)));
        }
        let roster = self
            .characters
            .values()
            .filter(|c| {
                c.first_seen
                    .is_none_or(|seen| seen <= (episode_id, scene_id))
            })
            .map(|c| c.profile.clone())
            .collect();
        Ok(ContextBundle {
            previous_summary: previous_summary.unwrap_or_default(),
            roster,
        })
    }
}

#[derive(Debug)]
pub struct MemoryStore {
    history: RwLock<Vec<Arc<MemorySnapshot>>>,
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new()
    }
}

impl MemoryStore {
    pub fn new() -> Self {
        Self {
            history: RwLock::new(vec![Arc::new(MemorySnapshot::default())]),
        }
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version
    }

    pub fn snapshot(&self) -> Arc<MemorySnapshot> {
        self.history
            .read()
            .expect("memory lock")
            .last()
            .cloned()
            .expect("version 0 always exists")
    }

    pub fn at(&self, version: u64) -> Result<Arc<MemorySnapshot>, MemoryError> {
        self.history
            .read()
            .expect("memory lock")
            .get(version as usize)
            .cloned()
            .ok_or(MemoryError::UnknownVersion(version))
    }

    /// Applies `update` to a copy of the latest snapshot and publishes it as
    /// the next version. Writers are serialized.
    pub fn write(&self, update: impl FnOnce(&mut MemorySnapshot)) -> u64 {
        let mut history = self.history.write().expect("memory lock");
        let mut next = (**history.last().expect("version 0 always exists")).clone();
        update(&mut next);
        next.version = history.len() as u64;
        let version = next.version;
        history.push(Arc::new(next));
        version
    }

    pub fn register_episode(&self, episode_id: EpisodeId, scenes: &[(u32, TimeInterval)]) -> u64 {
        self.write(|m| {
            let ep = Arc::make_mut(m.narrative.entry(episode_id).or_default());
            for (scene_id, interval) in scenes {
                ep.scenes.entry(*scene_id).or_default().interval = Some(*interval);
            }
        })
    }

    pub fn put_narration(
        &self,
        episode_id: EpisodeId,
        scene_id: u32,
        narration: impl Into<String>,
    ) -> u64 {
        let narration = narration.into();
        self.write(|m| {
            let ep = Arc::make_mut(m.narrative.entry(episode_id).or_default());
            ep.scenes.entry(scene_id).or_default().narration = Some(narration);
        })
    }

    pub fn put_summary(&self, episode_id: EpisodeId, summary: impl Into<String>) -> u64 {
        let summary = summary.into();
        self.write(|m| {
            Arc::make_mut(m.narrative.entry(episode_id).or_default()).summary = Some(summary);
        })
    }

    /// Inserts or replaces a character. An existing `first_seen` is kept
    /// unless the new one is earlier.
    pub fn upsert_character(
        &self,
        profile: CharacterProfile,
        first_seen: Option<(EpisodeId, u32)>,
    ) -> u64 {
        self.write(|m| {
            let seen = match (
                m.characters.get(&profile.id).and_then(|c| c.first_seen),
                first_seen,
            ) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            m.characters.insert(
                profile.id.clone(),
                CharacterRecord {
                    profile,
                    first_seen: seen,
                },
            );
        })
    }
}

/// Context for a scene as of the latest version, or as of `version`.
pub fn memory_get_context(
    store: &MemoryStore,
    version: Option<u64>,
    episode_id: EpisodeId,
    scene_id: u32,
) -> Result<ContextBundle, MemoryError> {
    let snap = match version {
        Some(v) => store.at(v)?,
        None => store.snapshot(),
    };
    snap.get_context(episode_id, scene_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: u64, e: u64) -> TimeInterval {
        TimeInterval::new(1, s, e).unwrap()
    }

    fn store_with_episode() -> MemoryStore {
        let store = MemoryStore::new();
        store.register_episode(
            1,
            &[
                (1, iv(0, 10)),
                (2, iv(10, 20)),
                (3, iv(20, 30)),
                (4, iv(30, 40)),
            ],
        );
        store
    }

    #[test]
    fn first_scene_has_empty_context() {
        let store = store_with_episode();
        let ctx = memory_get_context(&store, None, 1, 1).unwrap();
        assert_eq!(ctx, ContextBundle::default());
    }

    #[test]
    fn sequential_writes_then_read() {
        let store = store_with_episode();
        for s in 1..=3 {
            store.put_narration(1, s, format!("summary {s}"));
        }
        let ctx = memory_get_context(&store, None, 1, 4).unwrap();
        assert_eq!(ctx.previous_summary, "summary 3");
        assert_eq!(
            memory_get_context(&store, None, 1, 3)
                .unwrap()
                .previous_summary,
            "summary 2"
        );
    }

    #[test]
    fn pinned_version_is_repeatable() {
        let store = store_with_episode();
        store.put_narration(1, 1, "one");
        let pinned = store.version();
        let before = memory_get_context(&store, Some(pinned), 1, 4).unwrap();
        let writer = std::thread::scope(|s| {
            s.spawn(|| {
                store.put_narration(1, 3, "three");
                store.upsert_character(CharacterProfile::new("A"), Some((1, 1)))
            })
            .join()
            .unwrap()
        });
        assert!(writer > pinned);
        assert_eq!(
            memory_get_context(&store, Some(pinned), 1, 4).unwrap(),
            before
        );
        let now = memory_get_context(&store, None, 1, 4).unwrap();
        assert_eq!(now.previous_summary, "three");
        assert_eq!(now.roster.len(), 1);
    }

    #[test]
    fn versions_strictly_increase() {
        let store = MemoryStore::new();
        assert_eq!(store.version(), 0);
        let a = store.put_summary(1, "x");
        let b = store.put_summary(1, "y");
        assert!(b > a && a > 0);
        assert_eq!(
            store.at(a).unwrap().episode(1).unwrap().summary.as_deref(),
            Some("x")
        );
    }

    #[test]
    fn unknown_episode_and_empty_store() {
        let store = MemoryStore::new();
        assert_eq!(
            memory_get_context(&store, None, 1, 1),
            Err(MemoryError::Empty)
        );
        let store = store_with_episode();
        assert_eq!(
            memory_get_context(&store, None, 9, 1),
            Err(MemoryError::UnknownEpisode(9))
        );
        assert_eq!(
            memory_get_context(&store, Some(99), 1, 1),
            Err(MemoryError::UnknownVersion(99))
        );
    }

    #[test]
    fn previous_episode_summary_carries_over() {
        let store = store_with_episode();
        store.put_narration(1, 4, "last scene");
        store.register_episode(2, &[(1, TimeInterval::new(2, 0, 10).unwrap())]);
        assert_eq!(
            memory_get_context(&store, None, 2, 1)
                .unwrap()
                .previous_summary,
            "last scene"
        );
        store.put_summary(1, "episode one recap");
        assert_eq!(
            memory_get_context(&store, None, 2, 1)
                .unwrap()
                .previous_summary,
            "episode one recap"
        );
    }

    #[test]
    fn roster_only_lists_characters_seen_so_far() {
        let store = store_with_episode();
        store.upsert_character(CharacterProfile::new("early"), Some((1, 1)));
        store.upsert_character(CharacterProfile::new("late"), Some((1, 4)));
        store.upsert_character(CharacterProfile::new("meta"), None);
        let ids: Vec<_> = memory_get_context(&store, None, 1, 2)
            .unwrap()
            .roster
            .into_iter()
            .map(|c| c.id.0)
            .collect();
        assert_eq!(ids, vec!["early", "meta"]);
    }
}
