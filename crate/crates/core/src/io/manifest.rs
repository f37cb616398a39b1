//! Scene manifests: a series' episodes and their scenes.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_json, read_text, write_atomic, IoError};
use crate::editing::rules::Audience;
use crate::model::{EpisodeId, Scene, SceneRole, SceneSequence, TimeInterval};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestScene {
    pub scene_id: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narration: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<SceneRole>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEpisode {
    pub episode_id: EpisodeId,
    pub duration_ms: u64,
    /// Video file, relative to the manifest or absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub scenes: Vec<ManifestScene>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub format_version: u32,
    pub title: String,
    pub audience: Audience,
    pub episodes: Vec<ManifestEpisode>,
}

impl SceneManifest {
    /// Checks the invariants serde cannot: version, dense ids, contiguous
    /// scenes starting at 0 and ending within the episode, and score/role
    /// agreement. Errors carry a JSON pointer.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |p: String, m: String| Err((p, m));
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return err(
                "/format_version".into(),
                format!("unsupported version {}", self.format_version),
            );
        }
        if self.episodes.is_empty() {
            return err("/episodes".into(), "no episodes".into());
        }
        let mut seen = BTreeSet::new();
        for (e, ep) in self.episodes.iter().enumerate() {
            let at = format!("/episodes/{e}");
            if ep.episode_id == 0 {
                return err(format!("{at}/episode_id"), "episode ids start at 1".into());
            }
            if !seen.insert(ep.episode_id) {
                return err(
                    format!("{at}/episode_id"),
                    format!("episode {} listed twice", ep.episode_id),
                );
            }
            if ep.scenes.is_empty() {
                return err(format!("{at}/scenes"), "episode has no scenes".into());
            }
            let mut expected_start = 0;
            for (s, scene) in ep.scenes.iter().enumerate() {
                let at = format!("{at}/scenes/{s}");
                if scene.scene_id as usize != s + 1 {
                    return err(
                        format!("{at}/scene_id"),
                        format!("expected scene id {}", s + 1),
                    );
                }
                if scene.start_ms != expected_start {
                    return err(
                        format!("{at}/start_ms"),
                        format!(
                            "scene starts at {} ms, expected {expected_start} ms",
                            scene.start_ms
                        ),
                    );
                }
                if scene.end_ms <= scene.start_ms {
                    return err(format!("{at}/end_ms"), "scene is empty".into());
                }
                if scene.end_ms > ep.duration_ms {
                    return err(
                        format!("{at}/end_ms"),
                        format!("scene ends after the episode ({} ms)", ep.duration_ms),
                    );
                }
                match (scene.score, scene.role) {
                    (None, Some(_)) => {
                        return err(format!("{at}/role"), "role given without a score".into())
                    }
                    (Some(score), Some(role)) if (score > 0) != (role == SceneRole::Highlight) => {
                        return err(format!("{at}/role"), "role disagrees with score".into())
                    }
                    _ => {}
                }
                expected_start = scene.end_ms;
            }
        }
        Ok(())
    }

    /// Scenes as a sequence; missing scores count as 0 and missing
    /// narration as empty.
    pub fn to_sequence(&self) -> SceneSequence {
        let scenes = self
            .episodes
            .iter()
            .flat_map(|ep| {
                ep.scenes.iter().map(move |s| {
                    let interval = TimeInterval {
                        episode_id: ep.episode_id,
                        start_ms: s.start_ms,
                        end_ms: s.end_ms,
                    };
                    Scene::new(
                        interval,
                        s.scene_id,
                        s.narration.clone().unwrap_or_default(),
                    )
                    .with_score(s.score.unwrap_or(0))
                })
            })
            .collect();
        SceneSequence::new(scenes).expect("validated manifest yields a valid sequence")
    }

    pub fn has_scores(&self) -> bool {
        self.episodes
            .iter()
            .flat_map(|e| &e.scenes)
            .all(|s| s.score.is_some())
    }

    pub fn durations(&self) -> Vec<(EpisodeId, u64)> {
        self.episodes
            .iter()
            .map(|e| (e.episode_id, e.duration_ms))
            .collect()
    }

    /// Builds a manifest from a scene sequence. `with_scores` controls
    /// whether scores and roles are written.
    pub fn from_sequence(
        title: impl Into<String>,
        audience: Audience,
        durations: &[(EpisodeId, u64)],
        scenes: &SceneSequence,
        with_scores: bool,
    ) -> Self {
        let episodes = scenes
            .episode_ids()
            .into_iter()
            .map(|episode_id| {
                let rows: Vec<ManifestScene> = scenes
                    .scenes()
                    .iter()
                    .filter(|s| s.episode_id == episode_id)
                    .map(|s| ManifestScene {
                        scene_id: s.scene_id,
                        start_ms: s.interval.start_ms,
                        end_ms: s.interval.end_ms,
                        narration: Some(s.narration.clone()).filter(|n| !n.is_empty()),
                        score: with_scores.then_some(s.score),
                        role: with_scores.then_some(s.role),
                    })
                    .collect();
                let last_end = rows.last().map_or(0, |r| r.end_ms);
                let duration_ms = durations
                    .iter()
                    .find(|(e, _)| *e == episode_id)
                    .map_or(last_end, |(_, d)| (*d).max(last_end));
                ManifestEpisode {
                    episode_id,
                    duration_ms,
                    source: None,
                    scenes: rows,
                }
            })
            .collect();
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            title: title.into(),
            audience,
            episodes,
        }
    }

    /// Canonical JSON: episodes in id order, pretty-printed, trailing newline.
    pub fn to_json(&self) -> String {
        let mut canonical = self.clone();
        canonical.episodes.sort_by_key(|e| e.episode_id);
        serde_json::to_string_pretty(&canonical).expect("manifest serializes") + "\n"
    }
}

pub fn parse_manifest(path: &Path, text: &str) -> Result<SceneManifest, IoError> {
    let mut manifest: SceneManifest = parse_json(path, text)?;
    manifest
        .validate()
        .map_err(|(pointer, message)| IoError::schema(path, pointer, message))?;
    manifest.episodes.sort_by_key(|e| e.episode_id);
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<SceneManifest, IoError> {
    parse_manifest(path, &read_text(path)?)
}

pub fn save_manifest(path: &Path, manifest: &SceneManifest) -> Result<(), IoError> {
    manifest
        .validate()
        .map_err(|(pointer, message)| IoError::schema(path, pointer, message))?;
    write_atomic(path, manifest.to_json().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{sample_durations, sample_scored, SAMPLE_TITLE};

    fn sample() -> SceneManifest {
        SceneManifest::from_sequence(
            SAMPLE_TITLE,
            Audience::Female,
            &sample_durations(),
            &sample_scored(),
            true,
        )
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = sample();
        save_manifest(&path, &m).unwrap();
        let back = load_manifest(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), std::fs::read_to_string(&path).unwrap());
        assert_eq!(back.to_sequence().len(), 10);
        assert_eq!(back.to_sequence(), sample_scored());
    }

    #[test]
    fn scene_gap_is_rejected_with_pointer() {
        let mut m = sample();
        m.episodes[0].scenes[1].start_ms += 1;
        let err = parse_manifest(Path::new("m.json"), &m.to_json()).unwrap_err();
        assert!(
            matches!(&err, IoError::Schema { pointer, .. } if pointer == "/episodes/0/scenes/1/start_ms"),
            "{err}"
        );
    }

    #[test]
    fn type_errors_carry_pointer() {
        let text = sample()
            .to_json()
            .replacen("\"end_ms\": 12000", "\"end_ms\": \"late\"", 1);
        let err = parse_manifest(Path::new("m.json"), &text).unwrap_err();
        assert!(
            matches!(&err, IoError::Schema { pointer, .. } if pointer == "/episodes/0/scenes/0/end_ms"),
            "{err}"
        );
    }

    #[test]
    fn other_invariants() {
        let mut m = sample();
        m.episodes[1].scenes[0].scene_id = 5;
        assert!(m.validate().is_err());
        let mut m = sample();
        m.episodes[0].scenes[0].role = Some(SceneRole::Highlight);
        assert_eq!(m.validate().unwrap_err().0, "/episodes/0/scenes/0/role");
        let mut m = sample();
        m.episodes[0].duration_ms = 1;
        assert!(m.validate().is_err());
        let mut m = sample();
        m.format_version = 2;
        assert!(m.validate().is_err());
    }
}
