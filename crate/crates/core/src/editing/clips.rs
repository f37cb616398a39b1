//! Highlight clips and the opening/ending candidates around them.

use std::collections::BTreeSet;

use crate::model::{HighlightClip, SceneRole, SceneSequence};

/// Merges maximal runs of positive-score scenes into clips, highest score
/// first. Equal scores keep source order.
///
/// With `allow_cross_episode` false a run is also broken where one episode
/// ends and the next begins.
pub fn merge_highlight_clips_with(
    scored: &SceneSequence,
    allow_cross_episode: bool,
) -> Vec<HighlightClip> {
    let mut clips: Vec<HighlightClip> = Vec::new();
    let mut open: Option<HighlightClip> = None;
    for (i, scene) in scored.iter() {
        if scene.score == 0 {
            clips.extend(open.take());
            continue;
        }
        let continues = open.is_some()
            && (allow_cross_episode || scored.get(i - 1).episode_id == scene.episode_id);
        match (&mut open, continues) {
            (Some(clip), true) => {
                clip.last_index = i;
                clip.score += scene.score;
            }
            _ => {
                clips.extend(open.take());
                open = Some(HighlightClip {
                    first_index: i,
                    last_index: i,
                    score: scene.score,
                });
            }
        }
    }
    clips.extend(open);
    // Stable sort keeps the earlier clip first on ties.
    clips.sort_by_key(|c| std::cmp::Reverse(c.score));
    clips
}

pub fn merge_highlight_clips(scored: &SceneSequence) -> Vec<HighlightClip> {
    merge_highlight_clips_with(scored, true)
}

/// General scenes before the clip, plus the first scene of every clip that
/// starts no later than this one.
pub fn opening_candidates(
    clip: &HighlightClip,
    scored: &SceneSequence,
    all_clips: &[HighlightClip],
) -> BTreeSet<usize> {
    let general = (1..clip.first_index).filter(|&i| scored.get(i).role == SceneRole::General);
    let firsts = all_clips
        .iter()
        .map(|c| c.first_index)
        .filter(|&f| f <= clip.first_index);
    general.chain(firsts).collect()
}

/// General scenes after the clip, plus the last scene of every clip that
/// ends no earlier than this one.
pub fn ending_candidates(
    clip: &HighlightClip,
    scored: &SceneSequence,
    all_clips: &[HighlightClip],
) -> BTreeSet<usize> {
    let general =
        (clip.last_index + 1..=scored.len()).filter(|&i| scored.get(i).role == SceneRole::General);
    let lasts = all_clips
        .iter()
        .map(|c| c.last_index)
        .filter(|&l| l >= clip.last_index);
    general.chain(lasts).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::sample_scored;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn sample_clips_and_candidates() {
        let scored = sample_scored();
        let clips = merge_highlight_clips(&scored);
        assert_eq!(
            clips,
            vec![
                HighlightClip {
                    first_index: 4,
                    last_index: 6,
                    score: 9
                },
                HighlightClip {
                    first_index: 8,
                    last_index: 9,
                    score: 5
                },
            ]
        );
        assert_eq!(
            opening_candidates(&clips[0], &scored, &clips),
            set(&[1, 2, 3, 4])
        );
        assert_eq!(
            ending_candidates(&clips[0], &scored, &clips),
            set(&[6, 7, 9, 10])
        );
        assert_eq!(
            opening_candidates(&clips[1], &scored, &clips),
            set(&[1, 2, 3, 4, 7, 8])
        );
        assert_eq!(ending_candidates(&clips[1], &scored, &clips), set(&[9, 10]));
    }

    #[test]
    fn all_zero_has_no_clips() {
        let scored = sample_scored().with_scores(&[0; 10]);
        assert!(merge_highlight_clips(&scored).is_empty());
    }

    #[test]
    fn ties_keep_source_order_and_edges_are_trivial() {
        let scored = sample_scored().with_scores(&[2, 0, 0, 0, 0, 0, 0, 0, 1, 1]);
        let clips = merge_highlight_clips(&scored);
        assert_eq!(
            clips.iter().map(|c| c.first_index).collect::<Vec<_>>(),
            vec![1, 9]
        );
        assert_eq!(opening_candidates(&clips[0], &scored, &clips), set(&[1]));
        assert_eq!(ending_candidates(&clips[1], &scored, &clips), set(&[10]));
    }

    #[test]
    fn episode_break_splits_runs_when_asked() {
        // Scenes 6 and 7 sit on either side of the episode boundary.
        let scored = sample_scored().with_scores(&[0, 0, 0, 0, 0, 1, 1, 0, 0, 0]);
        assert_eq!(merge_highlight_clips_with(&scored, true).len(), 1);
        assert_eq!(merge_highlight_clips_with(&scored, false).len(), 2);
    }
}
