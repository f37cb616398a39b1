//! Exact integer set algebra over episode-tagged time intervals.

use crate::model::{ModelError, TimeInterval};

fn validate_all(intervals: &[TimeInterval]) -> Result<(), ModelError> {
    intervals.iter().try_for_each(TimeInterval::validate)
}

/// Sorts and coalesces overlapping or touching intervals within each
/// episode. Intervals from different episodes never merge.
pub fn normalize(intervals: &[TimeInterval]) -> Result<Vec<TimeInterval>, ModelError> {
    validate_all(intervals)?;
    let mut sorted = intervals.to_vec();
    sorted.sort();
    let mut out: Vec<TimeInterval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(last) if last.episode_id == iv.episode_id && iv.start_ms <= last.end_ms => {
                last.end_ms = last.end_ms.max(iv.end_ms);
            }
            _ => out.push(iv),
        }
    }
    Ok(out)
}

/// Measure of the union of `intervals`, in milliseconds.
pub fn union_duration_ms(intervals: &[TimeInterval]) -> Result<u64, ModelError> {
    Ok(normalize(intervals)?
        .iter()
        .map(TimeInterval::duration_ms)
        .sum())
}

/// Normalized intersection of two interval sets.
pub fn intersection(
    a: &[TimeInterval],
    b: &[TimeInterval],
) -> Result<Vec<TimeInterval>, ModelError> {
    let a = normalize(a)?;
    let b = normalize(b)?;
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        if x.episode_id != y.episode_id {
            if x.episode_id < y.episode_id {
                i += 1;
            } else {
                j += 1;
            }
            continue;
        }
        let start = x.start_ms.max(y.start_ms);
        let end = x.end_ms.min(y.end_ms);
        if start < end {
            out.push(TimeInterval {
                episode_id: x.episode_id,
                start_ms: start,
                end_ms: end,
            });
        }
        if x.end_ms <= y.end_ms {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(out)
}

pub fn intersection_duration_ms(a: &[TimeInterval], b: &[TimeInterval]) -> Result<u64, ModelError> {
    Ok(intersection(a, b)?
        .iter()
        .map(TimeInterval::duration_ms)
        .sum())
}

/// `|a ∩ b| / |a ∪ b|` on the source timeline.
pub fn interval_iou(a: &[TimeInterval], b: &[TimeInterval]) -> Result<f64, ModelError> {
    if a.is_empty() && b.is_empty() {
        return Err(ModelError::UndefinedIou);
    }
    let inter = intersection_duration_ms(a, b)?;
    let union = union_duration_ms(&[a, b].concat())?;
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(ep: u32, s: u64, e: u64) -> TimeInterval {
        TimeInterval::new(ep, s, e).unwrap()
    }

    #[test]
    fn union_examples() {
        assert_eq!(union_duration_ms(&[]).unwrap(), 0);
        assert_eq!(
            union_duration_ms(&[iv(1, 0, 1000), iv(1, 500, 2000)]).unwrap(),
            2000
        );
        assert_eq!(
            union_duration_ms(&[iv(1, 0, 1000), iv(2, 0, 1000)]).unwrap(),
            2000
        );
    }

    #[test]
    fn union_rejects_malformed() {
        let bad = TimeInterval {
            episode_id: 1,
            start_ms: 5,
            end_ms: 5,
        };
        assert!(matches!(
            union_duration_ms(&[bad]),
            Err(ModelError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn iou_examples() {
        let a = vec![iv(1, 0, 1000)];
        assert_eq!(interval_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(interval_iou(&a, &[iv(1, 1000, 2000)]).unwrap(), 0.0);
        let r = interval_iou(&a, &[iv(1, 500, 1500)]).unwrap();
        assert!((r - 500.0 / 1500.0).abs() < 1e-12);
        assert_eq!(interval_iou(&a, &[]).unwrap(), 0.0);
        assert!(matches!(
            interval_iou(&[], &[]),
            Err(ModelError::UndefinedIou)
        ));
    }

    #[test]
    fn touching_intervals_coalesce() {
        let n = normalize(&[iv(1, 100, 200), iv(1, 0, 100), iv(2, 0, 5)]).unwrap();
        assert_eq!(n, vec![iv(1, 0, 200), iv(2, 0, 5)]);
    }

    /// Oracle: count covered milliseconds one by one.
    fn brute_measure(sets: &[&[TimeInterval]], all: bool) -> u64 {
        let mut total = 0;
        for ep in 1..=3u32 {
            for t in 0..200u64 {
                let hit = |set: &[TimeInterval]| {
                    set.iter().any(|i| i.episode_id == ep && i.contains_ms(t))
                };
                let covered = if all {
                    sets.iter().all(|s| hit(s))
                } else {
                    sets.iter().any(|s| hit(s))
                };
                total += covered as u64;
            }
        }
        total
    }

    fn interval_strategy() -> impl Strategy<Value = TimeInterval> {
        (1u32..=3, 0u64..199, 1u64..60).prop_map(|(ep, s, len)| iv(ep, s, (s + len).min(200)))
    }

    proptest! {
        #[test]
        fn measures_match_pointwise_oracle(
            a in prop::collection::vec(interval_strategy(), 0..6),
            b in prop::collection::vec(interval_strategy(), 0..6),
        ) {
            prop_assert_eq!(union_duration_ms(&a).unwrap(), brute_measure(&[&a], false));
            prop_assert_eq!(
                intersection_duration_ms(&a, &b).unwrap(),
                brute_measure(&[&a, &b], true)
            );
        }

        #[test]
        fn iou_is_symmetric_and_bounded(
            a in prop::collection::vec(interval_strategy(), 1..6),
            b in prop::collection::vec(interval_strategy(), 0..6),
        ) {
            let ab = interval_iou(&a, &b).unwrap();
            let ba = interval_iou(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(interval_iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn union_invariant_under_permutation_and_splitting(
            a in prop::collection::vec(interval_strategy(), 1..6),
            split_at in 0u64..200,
            rotate in 0usize..6,
        ) {
            let base = union_duration_ms(&a).unwrap();
            let mut rotated = a.clone();
            let len = rotated.len();
            rotated.rotate_left(rotate % len);
            prop_assert_eq!(union_duration_ms(&rotated).unwrap(), base);
            let split: Vec<_> = a
                .iter()
                .flat_map(|i| {
                    if i.start_ms < split_at && split_at < i.end_ms {
                        vec![iv(i.episode_id, i.start_ms, split_at), iv(i.episode_id, split_at, i.end_ms)]
                    } else {
                        vec![*i]
                    }
                })
                .collect();
            prop_assert_eq!(union_duration_ms(&split).unwrap(), base);
        }
    }
}
