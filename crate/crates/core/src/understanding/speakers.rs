//! Character-dialogue matching: several sources vote on who speaks each
//! line, and a line is attributed only when the fused confidence clears a
//! high threshold.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use super::provider::{
    call_parsed, CallError, ChatProvider, ChatRequest, FaceObservation, SpeakerTurn,
};
use super::result_block::{parse_result_block, RecordSchema};
use crate::model::{CharacterId, CharacterProfile, DialogueLine};
use crate::prompt;

pub const DEFAULT_FUSION_THRESHOLD: f64 = 0.8;

/// Confidence given to the single-visible-face heuristic.
pub const VISIBLE_FACE_CONFIDENCE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpeakerError {
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error(transparent)]
    Call(#[from] CallError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerVote {
    pub source: String,
    pub speaker: CharacterId,
    pub confidence: f64,
}

impl SpeakerVote {
    pub fn new(
        source: impl Into<String>,
        speaker: CharacterId,
        confidence: f64,
    ) -> Result<Self, SpeakerError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(SpeakerError::Confidence(confidence));
        }
        Ok(Self {
            source: source.into(),
            speaker,
            confidence,
        })
    }
}

/// Per-speaker weighted mean confidence.
pub fn fused_scores(
    votes: &[SpeakerVote],
    weights: &HashMap<String, f64>,
) -> BTreeMap<CharacterId, f64> {
    let mut sums: BTreeMap<CharacterId, (f64, f64)> = BTreeMap::new();
    for vote in votes {
        let w = weights.get(&vote.source).copied().unwrap_or(1.0);
        let entry = sums.entry(vote.speaker.clone()).or_insert((0.0, 0.0));
        entry.0 += w * vote.confidence;
        entry.1 += w;
    }
    sums.into_iter()
        .filter(|(_, (_, w))| *w > 0.0)
        .map(|(id, (s, w))| (id, s / w))
        .collect()
}

/// Top speaker by fused confidence, if it exceeds `threshold`. Sources
/// are weighted uniformly.
pub fn fuse_speaker_votes(votes: &[SpeakerVote], threshold: f64) -> Option<CharacterId> {
    fuse_speaker_votes_weighted(votes, threshold, &HashMap::new())
}

pub fn fuse_speaker_votes_weighted(
    votes: &[SpeakerVote],
    threshold: f64,
    weights: &HashMap<String, f64>,
) -> Option<CharacterId> {
    // BTreeMap order makes the lowest id win exact ties.
    let (id, score) = fused_scores(votes, weights).into_iter().fold(
        None::<(CharacterId, f64)>,
        |best, (id, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((id, s)),
        },
    )?;
    (score > threshold).then_some(id)
}

#[derive(Debug, Deserialize)]
struct VoteRecord {
    line_id: String,
    speaker: String,
    confidence: f64,
}

pub(crate) fn render_roster(characters: &[CharacterProfile]) -> String {
    characters
        .iter()
        .map(|c| format!("- {} ({}): {}\n", c.id, c.label(), c.descriptors.join("; ")))
        .collect()
}

/// Characters whose face cluster appears within the line's span.
fn visible_characters(
    line: &DialogueLine,
    faces: &[(FaceObservation, usize)],
    by_cluster: &HashMap<usize, CharacterId>,
) -> Vec<CharacterId> {
    let mut ids: Vec<CharacterId> = faces
        .iter()
        .filter(|(f, _)| {
            line.interval.start_ms <= f.timestamp_ms && f.timestamp_ms < line.interval.end_ms
        })
        .filter_map(|(_, c)| by_cluster.get(c).cloned())
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

fn diarization_label<'a>(line: &DialogueLine, turns: &'a [SpeakerTurn]) -> Option<&'a str> {
    turns
        .iter()
        .map(|t| {
            let overlap = t
                .end_ms
                .min(line.interval.end_ms)
                .saturating_sub(t.start_ms.max(line.interval.start_ms));
            (overlap, t)
        })
        .filter(|(o, _)| *o > 0)
        .max_by_key(|(o, _)| *o)
        .map(|(_, t)| t.speaker.as_str())
}

/// Inputs shared by every voter for one episode.
pub struct AttributionInput<'a> {
    pub lines: &'a [DialogueLine],
    pub characters: &'a [CharacterProfile],
    /// Face observations with their cluster id.
    pub faces: &'a [(FaceObservation, usize)],
    pub turns: &'a [SpeakerTurn],
}

pub fn attribution_request(model: &str, input: &AttributionInput<'_>) -> ChatRequest {
    let by_cluster: HashMap<usize, CharacterId> = input
        .characters
        .iter()
        .filter_map(|c| c.face_cluster_id.map(|f| (f, c.id.clone())))
        .collect();
    let dialogue: String = input
        .lines
        .iter()
        .map(|l| {
            let visible = visible_characters(l, input.faces, &by_cluster);
            let visible = if visible.is_empty() {
                "none".to_string()
            } else {
                visible
                    .iter()
                    .map(CharacterId::as_str)
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            format!(
                "{} [{} --> {}] diarization={} visible={}: {}\n",
                l.id,
                prompt::clock(l.interval.start_ms),
                prompt::clock(l.interval.end_ms),
                diarization_label(l, input.turns).unwrap_or("unknown"),
                visible,
                l.text
            )
        })
        .collect();
    let roster = render_roster(input.characters);
    ChatRequest::user(
        model,
        prompt::fill(
            prompt::SPEAKER_ATTRIBUTION,
            &[
                ("CHARACTERS", prompt::block_or_none(&roster)),
                ("DIALOGUE", prompt::block_or_none(&dialogue)),
            ],
        ),
    )
}

/// Collects votes from every voter model plus the visible-face heuristic,
/// then fuses them per line. Lines below the threshold end up unattributed.
pub fn attribute_speakers(
    input: &AttributionInput<'_>,
    llm: &dyn ChatProvider,
    voter_models: &[String],
    threshold: f64,
) -> Result<Vec<DialogueLine>, SpeakerError> {
    let known: HashMap<&str, &CharacterProfile> = input
        .characters
        .iter()
        .map(|c| (c.id.as_str(), c))
        .collect();
    let line_ids: HashMap<&str, usize> = input
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect();
    let mut votes: Vec<Vec<SpeakerVote>> = vec![Vec::new(); input.lines.len()];

    let by_cluster: HashMap<usize, CharacterId> = input
        .characters
        .iter()
        .filter_map(|c| c.face_cluster_id.map(|f| (f, c.id.clone())))
        .collect();
    for (i, line) in input.lines.iter().enumerate() {
        if let [only] = visible_characters(line, input.faces, &by_cluster).as_slice() {
            votes[i].push(SpeakerVote::new(
                "visible_face",
                only.clone(),
                VISIBLE_FACE_CONFIDENCE,
            )?);
        }
    }

    if !input.lines.is_empty() && !input.characters.is_empty() {
        for model in voter_models {
            let request = attribution_request(model, input);
            let records: Vec<VoteRecord> = call_parsed(llm, &request, |reply| {
                parse_result_block(reply, &RecordSchema::speaker_votes())?.decode()
            })?;
            for rec in records {
                let (Some(&i), Some(profile)) = (
                    line_ids.get(rec.line_id.as_str()),
                    known.get(rec.speaker.as_str()),
                ) else {
                    warn!(voter = %model, line = %rec.line_id, speaker = %rec.speaker, "vote for unknown line or character dropped");
                    continue;
                };
                votes[i].push(SpeakerVote::new(
                    model.clone(),
                    profile.id.clone(),
                    rec.confidence,
                )?);
            }
        }
    }

    Ok(input
        .lines
        .iter()
        .zip(votes)
        .map(|(line, v)| DialogueLine {
            speaker: fuse_speaker_votes(&v, threshold),
            ..line.clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeInterval;
    use crate::understanding::provider::ScriptedProvider;
    use proptest::prelude::*;

    fn vote(source: &str, who: &str, c: f64) -> SpeakerVote {
        SpeakerVote::new(source, CharacterId::new(who), c).unwrap()
    }

    #[test]
    fn fusion_examples() {
        let votes = [
            vote("a", "A", 0.9),
            vote("b", "A", 0.95),
            vote("c", "B", 0.3),
        ];
        let scores = fused_scores(&votes, &HashMap::new());
        assert!((scores[&CharacterId::new("A")] - 0.925).abs() < 1e-12);
        assert_eq!(fuse_speaker_votes(&votes, 0.8), Some(CharacterId::new("A")));
        assert_eq!(fuse_speaker_votes(&[vote("a", "A", 0.5)], 0.8), None);
        assert_eq!(
            fuse_speaker_votes(&[vote("a", "A", 1.0)], 0.99),
            Some(CharacterId::new("A"))
        );
        assert_eq!(fuse_speaker_votes(&[], 0.8), None);
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(fuse_speaker_votes(&[vote("a", "A", 0.8)], 0.8), None);
    }

    #[test]
    fn weights_shift_the_mean() {
        let votes = [vote("strong", "A", 1.0), vote("weak", "A", 0.0)];
        let weights = HashMap::from([("strong".to_string(), 9.0)]);
        assert_eq!(
            fuse_speaker_votes_weighted(&votes, 0.85, &weights),
            Some(CharacterId::new("A"))
        );
        assert_eq!(fuse_speaker_votes(&votes, 0.85), None);
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        assert!(SpeakerVote::new("x", CharacterId::new("A"), 1.5).is_err());
    }

    proptest! {
        #[test]
        fn adding_a_certain_vote_never_lowers_the_score(
            raw in prop::collection::vec((0usize..3, 0.0f64..=1.0), 1..10),
            who in 0usize..3,
        ) {
            let names = ["A", "B", "C"];
            let mut votes: Vec<_> = raw.iter().enumerate().map(|(i, (s, c))| vote(&format!("s{i}"), names[*s], *c)).collect();
            let id = CharacterId::new(names[who]);
            let before = fused_scores(&votes, &HashMap::new()).get(&id).copied().unwrap_or(0.0);
            votes.push(vote("extra", names[who], 1.0));
            let after = fused_scores(&votes, &HashMap::new())[&id];
            prop_assert!(after >= before - 1e-12);
        }
    }

    #[test]
    fn voters_and_faces_combine() {
        let lines = vec![
            DialogueLine {
                id: "l0".into(),
                interval: TimeInterval::new(1, 0, 1000).unwrap(),
                speaker: None,
                text: "hi".into(),
                source: Default::default(),
            },
            DialogueLine {
                id: "l1".into(),
                interval: TimeInterval::new(1, 1000, 2000).unwrap(),
                speaker: None,
                text: "there".into(),
                source: Default::default(),
            },
        ];
        let mut a = CharacterProfile::new("A");
        a.face_cluster_id = Some(0);
        let characters = vec![a, CharacterProfile::new("B")];
        let faces = vec![(
            FaceObservation {
                timestamp_ms: 500,
                vector: vec![1.0],
            },
            0,
        )];
        let llm = ScriptedProvider::new(|req| {
            Ok(if req.model == "v1" {
                r#"<result>[{"line_id":"l0","speaker":"A","confidence":0.95},{"line_id":"l1","speaker":"B","confidence":0.9},{"line_id":"zz","speaker":"A","confidence":1.0}]</result>"#
            } else {
                r#"<result>[{"line_id":"l0","speaker":"A","confidence":0.9},{"line_id":"l1","speaker":"B","confidence":0.5}]</result>"#
            }
            .to_string())
        });
        let input = AttributionInput {
            lines: &lines,
            characters: &characters,
            faces: &faces,
            turns: &[],
        };
        let out = attribute_speakers(&input, &llm, &["v1".into(), "v2".into()], 0.8).unwrap();
        // l0: A votes 0.6, 0.95, 0.9 -> 0.8167 > 0.8.
        assert_eq!(out[0].speaker, Some(CharacterId::new("A")));
        // l1: B votes 0.9, 0.5 -> 0.7.
        assert_eq!(out[1].speaker, None);
    }
}
