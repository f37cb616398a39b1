//! Kept scenes to source cuts.

use crate::model::{EditPlan, Provenance, SceneSequence, TimeInterval};

/// Maps kept global indices to scene intervals and joins neighbours that
/// are back to back in the same episode into a single cut.
///
/// Panics if `kept` is empty, unsorted or out of range.
pub fn splice(kept: &[usize], scored: &SceneSequence, provenance: Provenance) -> EditPlan {
    assert!(!kept.is_empty(), "splice needs at least one scene");
    assert!(
        kept.windows(2).all(|p| p[0] < p[1]),
        "kept indices must ascend"
    );
    let mut cuts: Vec<TimeInterval> = Vec::new();
    let mut prev: Option<usize> = None;
    for &i in kept {
        let interval = scored.get(i).interval;
        match (prev, cuts.last_mut()) {
            (Some(p), Some(cut)) if p + 1 == i && scored.joins_next(p) => {
                cut.end_ms = interval.end_ms
            }
            _ => cuts.push(interval),
        }
        prev = Some(i);
    }
    EditPlan::new(cuts, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlanMethod;
    use crate::sample::sample_scored;

    fn prov() -> Provenance {
        Provenance::baseline(PlanMethod::Highlight)
    }

    #[test]
    fn contiguous_run_is_one_cut() {
        let scored = sample_scored();
        let plan = splice(&[4, 5, 6], &scored, prov());
        assert_eq!(plan.cuts.len(), 1);
        assert_eq!(plan.cuts[0].start_ms, scored.get(4).interval.start_ms);
        assert_eq!(plan.cuts[0].end_ms, scored.get(6).interval.end_ms);
    }

    #[test]
    fn gap_makes_two_cuts() {
        let plan = splice(&[4, 5, 7], &sample_scored(), prov());
        assert_eq!(plan.cuts.len(), 2);
    }

    #[test]
    fn episode_change_breaks_a_cut() {
        let scored = sample_scored();
        let plan = splice(&[5, 6, 7, 8], &scored, prov());
        assert_eq!(plan.cuts.len(), 2);
        let expected: u64 = [5, 6, 7, 8]
            .iter()
            .map(|&i| scored.get(i).interval.duration_ms())
            .sum();
        assert_eq!(plan.total_duration_ms, expected);
        plan.validate().unwrap();
    }
}
