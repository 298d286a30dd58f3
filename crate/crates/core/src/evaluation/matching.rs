use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::simulator::GroundTruthEvent;

/// Detection-to-truth matching window in samples (30 s at 1 Hz).
pub const DEFAULT_TOLERANCE: usize = 30;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(truth t_on, detected t_on)` in ascending truth order.
    pub matched_pairs: Vec<(usize, usize)>,
}

/// Greedy matching: truths in ascending `t_on` each take the nearest still
/// unmatched detection within `±tolerance` (the earlier one on a tie).
pub fn match_detections(
    truth: &[GroundTruthEvent],
    detected: &[usize],
    tolerance: usize,
) -> MatchReport {
    let mut truth_times: Vec<usize> = truth.iter().map(|e| e.t_on).collect();
    truth_times.sort_unstable();
    // detection time → how many copies are still unmatched
    let mut pool: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in detected {
        *pool.entry(d).or_default() += 1;
    }
    let mut matched_pairs = Vec::new();
    for t in truth_times {
        let lo = t.saturating_sub(tolerance);
        let hi = t.saturating_add(tolerance);
        let below = pool.range(lo..=t).next_back().map(|(&d, _)| d);
        let above = pool.range(t..=hi).next().map(|(&d, _)| d);
        let pick = match (below, above) {
            (Some(b), Some(a)) => Some(if t - b <= a - t { b } else { a }),
            (b, a) => b.or(a),
        };
        if let Some(d) = pick {
            let left = pool.get_mut(&d).expect("picked from pool");
            *left -= 1;
            if *left == 0 {
                pool.remove(&d);
            }
            matched_pairs.push((t, d));
        }
    }
    let tp = matched_pairs.len();
    MatchReport {
        true_positives: tp,
        false_positives: detected.len() - tp,
        false_negatives: truth.len() - tp,
        matched_pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn truth(times: &[usize]) -> Vec<GroundTruthEvent> {
        times
            .iter()
            .map(|&t| GroundTruthEvent {
                t_on: t,
                mode_id: "m".into(),
                duration: 10,
            })
            .collect()
    }

    fn counts(r: &MatchReport) -> (usize, usize, usize) {
        (r.true_positives, r.false_positives, r.false_negatives)
    }

    #[test]
    fn examples() {
        assert_eq!(
            counts(&match_detections(&truth(&[100]), &[105], 30)),
            (1, 0, 0)
        );
        assert_eq!(
            counts(&match_detections(&truth(&[100]), &[], 30)),
            (0, 0, 1)
        );
        let r = match_detections(&truth(&[100]), &[100, 400], 30);
        assert_eq!(counts(&r), (1, 1, 0));
        assert_eq!(r.matched_pairs, vec![(100, 100)]);
    }

    #[test]
    fn each_detection_is_used_once() {
        let r = match_detections(&truth(&[100, 110]), &[105], 30);
        assert_eq!(counts(&r), (1, 0, 1));
        assert_eq!(r.matched_pairs, vec![(100, 105)]);
        let r = match_detections(&truth(&[100]), &[131], 30);
        assert_eq!(counts(&r), (0, 1, 1));
        let r = match_detections(&truth(&[100]), &[90, 110], 30);
        assert_eq!(r.matched_pairs, vec![(100, 90)]);
    }

    proptest! {
        #[test]
        fn permutation_invariant_counts(
            t in prop::collection::vec(0usize..2_000, 0..12),
            mut d in prop::collection::vec(0usize..2_000, 0..12),
            tol in 0usize..80,
        ) {
            let a = match_detections(&truth(&t), &d, tol);
            d.reverse();
            let b = match_detections(&truth(&t), &d, tol);
            prop_assert_eq!(counts(&a), counts(&b));
            prop_assert_eq!(a.true_positives, a.matched_pairs.len());
            prop_assert_eq!(a.true_positives + a.false_positives, d.len());
            prop_assert_eq!(a.true_positives + a.false_negatives, t.len());
            for (x, y) in &a.matched_pairs {
                prop_assert!(x.abs_diff(*y) <= tol);
            }
        }
    }
}
