//! Edit windows: accepted openings crossed with accepted endings.

use std::collections::{BTreeSet, HashSet};

use crate::model::{EditWindow, HighlightClip};

/// Accepted boundaries for one of the top clips. `rank` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipBoundaries {
    pub rank: usize,
    pub clip: HighlightClip,
    pub openings: BTreeSet<usize>,
    pub endings: BTreeSet<usize>,
}

/// Drops windows whose `(opening, ending)` pair was already seen, keeping
/// the first.
pub fn dedup_windows(windows: &[EditWindow]) -> Vec<EditWindow> {
    let mut seen = HashSet::new();
    windows
        .iter()
        .filter(|w| seen.insert((w.opening_index, w.ending_index)))
        .copied()
        .collect()
}

/// Union over clips of `openings x endings`, in clip-rank then opening then
/// ending order, deduplicated by scene pair. Pairs that would not enclose
/// their clip are left out.
pub fn enumerate_windows(per_clip: &[ClipBoundaries]) -> Vec<EditWindow> {
    let all: Vec<EditWindow> = per_clip
        .iter()
        .flat_map(|c| {
            c.openings.iter().flat_map(move |&o| {
                c.endings.iter().map(move |&e| EditWindow {
                    clip_rank: Some(c.rank),
                    clip: Some(c.clip),
                    opening_index: o,
                    ending_index: e,
                })
            })
        })
        .filter(EditWindow::is_valid)
        .collect();
    dedup_windows(&all)
}

/// Windows without a clip: every accepted opening paired with every
/// accepted ending at or after it.
pub fn enumerate_free_windows(
    openings: &BTreeSet<usize>,
    endings: &BTreeSet<usize>,
) -> Vec<EditWindow> {
    openings
        .iter()
        .flat_map(|&o| {
            endings.range(o..).map(move |&e| EditWindow {
                clip_rank: None,
                clip: None,
                opening_index: o,
                ending_index: e,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(first: usize, last: usize) -> HighlightClip {
        HighlightClip {
            first_index: first,
            last_index: last,
            score: 1,
        }
    }

    fn bounds(rank: usize, c: HighlightClip, o: &[usize], e: &[usize]) -> ClipBoundaries {
        ClipBoundaries {
            rank,
            clip: c,
            openings: o.iter().copied().collect(),
            endings: e.iter().copied().collect(),
        }
    }

    #[test]
    fn cartesian_count() {
        let w = enumerate_windows(&[bounds(1, clip(4, 6), &[1, 2], &[6, 7])]);
        assert_eq!(w.len(), 4);
        assert_eq!((w[0].opening_index, w[0].ending_index), (1, 6));
        assert_eq!((w[3].opening_index, w[3].ending_index), (2, 7));
    }

    #[test]
    fn shared_pair_is_kept_once_for_the_first_clip() {
        let w = enumerate_windows(&[
            bounds(1, clip(4, 6), &[4], &[9]),
            bounds(2, clip(8, 9), &[4], &[9]),
        ]);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].clip_rank, Some(1));
    }

    #[test]
    fn dedup_is_idempotent() {
        let w = enumerate_windows(&[
            bounds(1, clip(4, 6), &[1, 4], &[6, 9]),
            bounds(2, clip(8, 9), &[1, 4, 7, 8], &[9]),
        ]);
        assert_eq!(dedup_windows(&w), w);
        let doubled: Vec<EditWindow> = w.iter().chain(&w).copied().collect();
        assert_eq!(dedup_windows(&doubled), w);
    }

    #[test]
    fn free_windows_respect_order() {
        let all: BTreeSet<usize> = (1..=4).collect();
        assert_eq!(enumerate_free_windows(&all, &all).len(), 10);
        assert!(enumerate_free_windows(&all, &all)
            .iter()
            .all(EditWindow::is_valid));
    }
}
