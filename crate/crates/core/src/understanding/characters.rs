//! Character database upkeep: face clusters and dialogue in, profiles out.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use tracing::warn;

use super::caption::render_dialogue;
use super::provider::{call_parsed, CallError, ChatProvider, ChatRequest, FaceObservation};
use super::result_block::{parse_result_block, RecordSchema};
use super::speakers::render_roster;
use crate::model::{CharacterId, CharacterProfile, DialogueLine, EpisodeId};
use crate::prompt;

#[derive(Debug, Deserialize)]
struct ProfileRecord {
    id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    face_cluster: Option<usize>,
    #[serde(default)]
    descriptors: Vec<String>,
}

/// A face cluster as seen in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSighting {
    pub cluster: usize,
    pub timestamps_ms: Vec<u64>,
}

/// Groups clustered observations by cluster, in cluster order.
pub fn sightings(faces: &[(FaceObservation, usize)]) -> Vec<ClusterSighting> {
    let mut by_cluster: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (f, c) in faces {
        by_cluster.entry(*c).or_default().push(f.timestamp_ms);
    }
    by_cluster
        .into_iter()
        .map(|(cluster, mut timestamps_ms)| {
            timestamps_ms.sort_unstable();
            ClusterSighting {
                cluster,
                timestamps_ms,
            }
        })
        .collect()
}

pub fn extraction_request(
    model: &str,
    episode_id: EpisodeId,
    clusters: &[ClusterSighting],
    dialogue: &[DialogueLine],
    known: &[CharacterProfile],
) -> ChatRequest {
    let faces: String = clusters
        .iter()
        .map(|c| {
            let times: Vec<String> = c.timestamps_ms.iter().map(|t| prompt::clock(*t)).collect();
            format!("- cluster {}: seen at {}\n", c.cluster, times.join(", "))
        })
        .collect();
    let episode = episode_id.to_string();
    ChatRequest::user(
        model,
        prompt::fill(
            prompt::CHARACTER_EXTRACTION,
            &[
                ("EPISODE", &episode),
                ("FACES", prompt::block_or_none(&faces)),
                (
                    "DIALOGUE",
                    prompt::block_or_none(&render_dialogue(dialogue)),
                ),
                ("CHARACTERS", prompt::block_or_none(&render_roster(known))),
            ],
        ),
    )
}

/// Asks the model for the characters of one episode and merges them into
/// `known`. Returns the updated profiles of every character the model
/// reported, in reply order.
///
/// A face-cluster link is kept only when the cluster occurs in `clusters`
/// and no other character already holds it. Known characters keep their
/// name and descriptors unless the reply supplies new ones.
pub fn extract_characters(
    episode_id: EpisodeId,
    clusters: &[ClusterSighting],
    dialogue: &[DialogueLine],
    known: &[CharacterProfile],
    llm: &dyn ChatProvider,
    model: &str,
) -> Result<Vec<CharacterProfile>, CallError> {
    let request = extraction_request(model, episode_id, clusters, dialogue, known);
    let records: Vec<ProfileRecord> = call_parsed(llm, &request, |reply| {
        parse_result_block(reply, &RecordSchema::character_profiles())?.decode()
    })?;

    let present: BTreeSet<usize> = clusters.iter().map(|c| c.cluster).collect();
    let mut holders: BTreeMap<usize, CharacterId> = known
        .iter()
        .filter_map(|c| c.face_cluster_id.map(|f| (f, c.id.clone())))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in records {
        let id = CharacterId::new(rec.id.trim());
        if id.as_str().is_empty() || !seen.insert(id.clone()) {
            warn!(episode_id, id = %rec.id, "empty or repeated character id skipped");
            continue;
        }
        let mut profile = known
            .iter()
            .find(|c| c.id == id)
            .cloned()
            .unwrap_or_else(|| CharacterProfile::new(id.as_str()));
        if let Some(name) = rec.name.filter(|n| !n.trim().is_empty()) {
            profile.display_name = Some(name.trim().to_string());
        }
        if !rec.descriptors.is_empty() {
            profile.descriptors = rec.descriptors;
        }
        if let Some(cluster) = rec.face_cluster {
            let held_by_other = holders.get(&cluster).is_some_and(|h| *h != id);
            if !present.contains(&cluster) || held_by_other {
                warn!(episode_id, id = %id, cluster, "face cluster link rejected");
            } else {
                if let Some(old) = profile.face_cluster_id {
                    holders.remove(&old);
                }
                holders.insert(cluster, id.clone());
                profile.face_cluster_id = Some(cluster);
            }
        }
        out.push(profile);
    }
    Ok(out)
}
