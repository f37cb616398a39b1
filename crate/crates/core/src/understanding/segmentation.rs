//! Three-stage scene segmentation: provider shots, pairwise local fusion,
//! then model-guided global refinement restricted to adjacent segments.

use serde::Deserialize;
use thiserror::Error;
use tracing::warn;

use super::provider::{
    call_parsed, CallError, ChatProvider, ChatRequest, ProviderError, Shot, ShotFusionClassifier,
};
use super::result_block::{parse_result_block, RecordSchema};
use crate::model::{DialogueLine, EpisodeId, TimeInterval};
use crate::prompt;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentationError {
    #[error("episode {episode_id} has no shots")]
    NoShots { episode_id: EpisodeId },
    #[error("shots of episode {episode_id} do not tile the episode: {detail}")]
    BadShots {
        episode_id: EpisodeId,
        detail: String,
    },
    #[error(transparent)]
    Fusion(#[from] ProviderError),
    #[error(transparent)]
    Call(#[from] CallError),
}

/// A stage-3 directive that was not applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedDirective {
    pub segments: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub scenes: Vec<TimeInterval>,
    /// Segments after local fusion, before refinement.
    pub fused: Vec<TimeInterval>,
    pub skipped: Vec<SkippedDirective>,
}

#[derive(Debug, Deserialize)]
struct MergeDirective {
    segments: Vec<usize>,
}

fn validate_shots(
    episode_id: EpisodeId,
    shots: &[Shot],
    duration_ms: Option<u64>,
) -> Result<(), SegmentationError> {
    let bad = |detail: String| SegmentationError::BadShots { episode_id, detail };
    let first = shots
        .first()
        .ok_or(SegmentationError::NoShots { episode_id })?;
    if first.start_ms != 0 {
        return Err(bad(format!("first shot starts at {} ms", first.start_ms)));
    }
    for s in shots {
        if s.start_ms >= s.end_ms {
            return Err(bad(format!("empty shot at {} ms", s.start_ms)));
        }
    }
    for pair in shots.windows(2) {
        if pair[0].end_ms != pair[1].start_ms {
            return Err(bad(format!("gap or overlap at {} ms", pair[0].end_ms)));
        }
    }
    if let Some(d) = duration_ms {
        let last = shots.last().map_or(0, |s| s.end_ms);
        if last != d {
            return Err(bad(format!(
                "last shot ends at {last} ms, episode lasts {d} ms"
            )));
        }
    }
    Ok(())
}

/// Joins runs of items whose link flag is set. `links[i]` joins item `i`
/// with item `i + 1`. Returns inclusive `(first, last)` item ranges.
fn runs(count: usize, links: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..count {
        if i + 1 == count || !links.get(i).copied().unwrap_or(false) {
            out.push((start, i));
            start = i + 1;
        }
    }
    out
}

fn span(episode_id: EpisodeId, start_ms: u64, end_ms: u64) -> TimeInterval {
    TimeInterval {
        episode_id,
        start_ms,
        end_ms,
    }
}

pub fn refinement_request(
    model: &str,
    segments: &[TimeInterval],
    dialogue: &[DialogueLine],
) -> ChatRequest {
    let listing: String = segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let spoken: Vec<&str> = dialogue
                .iter()
                .filter(|d| seg.start_ms <= d.interval.start_ms && d.interval.start_ms < seg.end_ms)
                .map(|d| d.text.as_str())
                .collect();
            format!(
                "Segment {} [{} --> {}]: {}\n",
                i + 1,
                prompt::clock(seg.start_ms),
                prompt::clock(seg.end_ms),
                if spoken.is_empty() {
                    "(no dialogue)".to_string()
                } else {
                    spoken.join(" / ")
                }
            )
        })
        .collect();
    let episode = segments.first().map_or(0, |s| s.episode_id).to_string();
    ChatRequest::user(
        model,
        prompt::fill(
            prompt::SEGMENT_REFINE,
            &[("EPISODE", &episode), ("SEGMENTS", &listing)],
        ),
    )
}

/// Segments one episode into scenes.
///
/// Output scenes tile the episode and every boundary is one of the input
/// shot boundaries.
pub fn segment_scenes(
    episode_id: EpisodeId,
    shots: &[Shot],
    duration_ms: Option<u64>,
    fusion: &dyn ShotFusionClassifier,
    llm: &dyn ChatProvider,
    model: &str,
    dialogue: &[DialogueLine],
) -> Result<Segmentation, SegmentationError> {
    validate_shots(episode_id, shots, duration_ms)?;

    let links = shots
        .windows(2)
        .map(|p| fusion.same_scene(&p[0], &p[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let fused: Vec<TimeInterval> = runs(shots.len(), &links)
        .into_iter()
        .map(|(a, b)| span(episode_id, shots[a].start_ms, shots[b].end_ms))
        .collect();

    if fused.len() < 2 {
        return Ok(Segmentation {
            scenes: fused.clone(),
            fused,
            skipped: Vec::new(),
        });
    }

    let request = refinement_request(model, &fused, dialogue);
    let directives: Vec<MergeDirective> = call_parsed(llm, &request, |reply| {
        parse_result_block(reply, &RecordSchema::segment_merges())?.decode()
    })?;

    let mut merge = vec![false; fused.len() - 1];
    let mut skipped = Vec::new();
    for d in directives {
        let in_range = d.segments.iter().all(|&s| (1..=fused.len()).contains(&s));
        let adjacent = d.segments.windows(2).all(|p| p[1] == p[0] + 1);
        if !in_range || !adjacent {
            let reason = if in_range {
                "segments are not adjacent"
            } else {
                "segment number out of range"
            };
            warn!(episode_id, segments = ?d.segments, reason, "merge directive skipped");
            skipped.push(SkippedDirective {
                segments: d.segments,
                reason: reason.into(),
            });
            continue;
        }
        for p in d.segments.windows(2) {
            merge[p[0] - 1] = true;
        }
    }
    let scenes = runs(fused.len(), &merge)
        .into_iter()
        .map(|(a, b)| span(episode_id, fused[a].start_ms, fused[b].end_ms))
        .collect();
    Ok(Segmentation {
        scenes,
        fused,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::understanding::provider::ScriptedProvider;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    struct PairFusion(Vec<(usize, usize)>);

    impl ShotFusionClassifier for PairFusion {
        fn same_scene(&self, left: &Shot, right: &Shot) -> Result<bool, ProviderError> {
            // Shots in these tests are 1 s long, numbered from 1.
            let (l, r) = (
                (left.start_ms / 1000 + 1) as usize,
                (right.start_ms / 1000 + 1) as usize,
            );
            Ok(self.0.contains(&(l, r)))
        }
    }

    fn shots(n: u64) -> Vec<Shot> {
        (0..n)
            .map(|i| Shot {
                start_ms: i * 1000,
                end_ms: (i + 1) * 1000,
                histogram: None,
            })
            .collect()
    }

    fn bounds(scenes: &[TimeInterval]) -> Vec<(u64, u64)> {
        scenes.iter().map(|s| (s.start_ms, s.end_ms)).collect()
    }

    #[test]
    fn identity_when_nothing_merges() {
        let llm = ScriptedProvider::constant("<result>[]</result>");
        let seg = segment_scenes(
            1,
            &shots(5),
            Some(5000),
            &PairFusion(vec![]),
            &llm,
            "m",
            &[],
        )
        .unwrap();
        assert_eq!(seg.scenes.len(), 5);
        assert_eq!(bounds(&seg.scenes), bounds(&seg.fused));
    }

    #[test]
    fn local_fusion_is_transitive() {
        let llm = ScriptedProvider::constant("<result>[]</result>");
        let seg = segment_scenes(
            1,
            &shots(5),
            None,
            &PairFusion(vec![(1, 2), (2, 3)]),
            &llm,
            "m",
            &[],
        )
        .unwrap();
        assert_eq!(
            bounds(&seg.scenes),
            vec![(0, 3000), (3000, 4000), (4000, 5000)]
        );
    }

    #[test]
    fn refinement_merges_adjacent_and_skips_the_rest() {
        let llm = ScriptedProvider::constant(
            r#"<result>[{"segments":[2,3],"reason":"same room"},{"segments":[1,4]},{"segments":[4,9]}]</result>"#,
        );
        let seg = segment_scenes(
            1,
            &shots(5),
            None,
            &PairFusion(vec![(1, 2)]),
            &llm,
            "m",
            &[],
        )
        .unwrap();
        assert_eq!(seg.fused.len(), 4);
        assert_eq!(
            bounds(&seg.scenes),
            vec![(0, 2000), (2000, 4000), (4000, 5000)]
        );
        assert_eq!(seg.skipped.len(), 2);
        assert_eq!(seg.skipped[0].reason, "segments are not adjacent");
    }

    #[test]
    fn rejects_shots_that_do_not_tile() {
        let llm = ScriptedProvider::constant("<result>[]</result>");
        let mut s = shots(3);
        s[1].start_ms = 1100;
        assert!(matches!(
            segment_scenes(1, &s, None, &PairFusion(vec![]), &llm, "m", &[]),
            Err(SegmentationError::BadShots { .. })
        ));
        assert!(segment_scenes(
            1,
            &shots(3),
            Some(4000),
            &PairFusion(vec![]),
            &llm,
            "m",
            &[]
        )
        .is_err());
        assert!(matches!(
            segment_scenes(1, &[], None, &PairFusion(vec![]), &llm, "m", &[]),
            Err(SegmentationError::NoShots { .. })
        ));
    }

    proptest! {
        #[test]
        fn output_partitions_episode_on_shot_boundaries(
            n in 1u64..12,
            fuse in prop::collection::vec(any::<bool>(), 11),
            directives in prop::collection::vec(prop::collection::vec(1usize..14, 2..4), 0..5),
        ) {
            let pairs: Vec<(usize, usize)> = (1..n as usize).filter(|i| fuse[i - 1]).map(|i| (i, i + 1)).collect();
            let body = serde_json::to_string(
                &directives.iter().map(|d| serde_json::json!({"segments": d})).collect::<Vec<_>>()
            ).unwrap();
            let llm = ScriptedProvider::constant(format!("<result>{body}</result>"));
            let seg = segment_scenes(1, &shots(n), Some(n * 1000), &PairFusion(pairs), &llm, "m", &[]).unwrap();
            prop_assert_eq!(seg.scenes.first().unwrap().start_ms, 0);
            prop_assert_eq!(seg.scenes.last().unwrap().end_ms, n * 1000);
            for p in seg.scenes.windows(2) {
                prop_assert_eq!(p[0].end_ms, p[1].start_ms);
            }
            let shot_bounds: BTreeSet<u64> = (0..=n).map(|i| i * 1000).collect();
            for s in &seg.scenes {
                prop_assert!(shot_bounds.contains(&s.start_ms) && shot_bounds.contains(&s.end_ms));
            }
        }
    }
}
