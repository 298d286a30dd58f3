//! Operation-mode classification by dynamic time warping.
//!
//! For each candidate mode with a full-length pattern of `k` samples, the day
//! is segmented at the activation's turn-on time into `k` samples and the DTW
//! distance between pattern and segment is computed; the closest mode wins.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::DetectionResult;
use crate::error::{Error, Result};
use crate::series::{PowerSeries, Sup};

/// Full-length reference SUP for one operation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePattern {
    pub mode_id: String,
    pattern: Vec<f64>,
}

impl ModePattern {
    pub fn new(mode_id: impl Into<String>, pattern: Vec<f64>) -> Result<Self> {
        let sup = Sup::new("", mode_id, pattern)?;
        Ok(Self {
            mode_id: sup.mode_id.clone(),
            pattern: sup.samples().to_vec(),
        })
    }

    pub fn from_sup(sup: &Sup) -> Self {
        Self {
            mode_id: sup.mode_id.clone(),
            pattern: sup.samples().to_vec(),
        }
    }

    pub fn pattern(&self) -> &[f64] {
        &self.pattern
    }

    /// Pattern length in samples.
    pub fn k(&self) -> usize {
        self.pattern.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedEvent {
    pub t_on: usize,
    pub chosen_mode: String,
    pub min_distance: f64,
    pub distances: BTreeMap<String, f64>,
    /// Some segment ran past the end of the day and was cut short.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtwOptions {
    /// Sakoe–Chiba half-width; `None` leaves the alignment unconstrained.
    pub band: Option<usize>,
    /// Divide the cumulative cost by the number of cells on the optimal path.
    pub normalize: bool,
}

/// `D[t_on, t_on + k)`, cut at the end of the day; the flag reports a cut.
pub fn segment(day: &PowerSeries, t_on: usize, k: usize) -> Result<(PowerSeries, bool)> {
    if t_on >= day.len() || k == 0 {
        return Err(Error::OutOfRange {
            start: t_on,
            len: k,
            available: day.len(),
        });
    }
    let available = day.len() - t_on;
    let truncated = k > available;
    Ok((day.slice(t_on, k.min(available))?, truncated))
}

/// Classic DTW with `|x − y|` local cost and (1,1)/(1,0)/(0,1) steps.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    dtw_distance_with(x, y, &DtwOptions::default())
}

/// Whether cell `(i, j)` lies inside the band. A band narrower than the
/// length difference is widened to it so that a boundary-to-boundary path
/// always exists.
fn band_limits(i: usize, n: usize, m: usize, band: Option<usize>) -> (usize, usize) {
    match band {
        None => (0, m),
        Some(w) => {
            let w = w.max(n.abs_diff(m));
            (i.saturating_sub(w), (i + w + 1).min(m))
        }
    }
}

pub fn dtw_distance_with(x: &[f64], y: &[f64], options: &DtwOptions) -> Result<f64> {
    let (cost, len) = dtw_cost_and_length(x, y, options.band)?;
    Ok(if options.normalize {
        cost / len as f64
    } else {
        cost
    })
}

/// Cumulative cost together with the number of cells on the optimal path,
/// in O(m) storage. Ties between predecessors follow [`dtw_path`]:
/// diagonal, then vertical, then horizontal.
pub fn dtw_cost_and_length(x: &[f64], y: &[f64], band: Option<usize>) -> Result<(f64, usize)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySequence);
    }
    let m = y.len();
    // prev/prev_len hold row i − 1 shifted by one, index 0 being the virtual
    // border column; the border seed 0 only feeds cell (0, 0)
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut prev_len = vec![0usize; m + 1];
    prev[0] = 0.0;
    if band.is_some() {
        rows(x, y, band, &mut prev, &mut prev_len);
    } else {
        let mut strips = x.chunks_exact(STRIP);
        for rows in strips.by_ref() {
            strip::<STRIP>(
                rows.try_into().expect("exact chunk"),
                y,
                &mut prev,
                &mut prev_len,
            );
            prev[0] = f64::INFINITY;
        }
        rows(strips.remainder(), y, None, &mut prev, &mut prev_len);
    }
    Ok((prev[m], prev_len[m]))
}

/// Rows computed together by [`strip`]; at least 3, so that the last row's
/// write-back lands behind the columns row 0 still has to read.
const STRIP: usize = 8;
const _: () = assert!(STRIP >= 3);

/// One DP step: the cheaper of diagonal and vertical (diagonal on ties),
/// then against horizontal (the former on ties), plus the local cost.
#[inline(always)]
fn relax(cost: f64, diag: (f64, usize), up: (f64, usize), left: (f64, usize)) -> (f64, usize) {
    let above = if diag.0 <= up.0 { diag } else { up };
    let best = if above.0 <= left.0 { above } else { left };
    (cost + best.0, best.1 + 1)
}

/// Advances `prev` by `R` rows of an unbanded DP. Row `r` of the strip
/// handles column `s − r` at step `s`, so the `R` dependency chains are
/// independent within a step; every cell sees the same operands, in the same
/// order, as in a row-by-row sweep.
fn strip<const R: usize>(x: &[f64; R], y: &[f64], prev: &mut [f64], prev_len: &mut [usize]) {
    let m = y.len();
    // latest and previous value of each strip row
    let mut cur = [(f64::INFINITY, 0usize); R];
    let mut old = [(f64::INFINITY, 0usize); R];
    let mut step = |r: usize, j: usize| {
        let (diag, up) = if r == 0 {
            ((prev[j], prev_len[j]), (prev[j + 1], prev_len[j + 1]))
        } else {
            (old[r - 1], cur[r - 1])
        };
        let v = relax((x[r] - y[j]).abs(), diag, up, cur[r]);
        old[r] = cur[r];
        cur[r] = v;
        if r == R - 1 {
            // column j of the previous row was last read at step j + 1
            prev[j + 1] = v.0;
            prev_len[j + 1] = v.1;
        }
    };
    // rows are visited bottom-up so row r − 1 still holds step s − 1; the
    // steady state, where every row has a column, runs without bounds checks
    let steady = (R - 1)..m.max(R - 1);
    for s in 0..m + R - 1 {
        if steady.contains(&s) {
            for r in (0..R).rev() {
                step(r, s - r);
            }
        } else {
            for r in (0..R).rev() {
                if let Some(j) = s.checked_sub(r).filter(|&j| j < m) {
                    step(r, j);
                }
            }
        }
    }
}

/// Row-by-row DP, optionally restricted to the Sakoe–Chiba band.
fn rows(x: &[f64], y: &[f64], band: Option<usize>, prev: &mut Vec<f64>, prev_len: &mut Vec<usize>) {
    let (n, m) = (x.len(), y.len());
    let mut cur = vec![f64::INFINITY; m + 1];
    let mut cur_len = vec![0usize; m + 1];
    for (i, &xi) in x.iter().enumerate() {
        let (lo, hi) = band_limits(i, n, m, band);
        // the border and cells outside the band read as unreachable from the
        // next row; this also clears the border seed once row 0 is done
        cur[..=lo].fill(f64::INFINITY);
        cur[hi + 1..].fill(f64::INFINITY);
        let mut left = (f64::INFINITY, 0);
        for j in lo..hi {
            left = relax(
                (xi - y[j]).abs(),
                (prev[j], prev_len[j]),
                (prev[j + 1], prev_len[j + 1]),
                left,
            );
            cur[j + 1] = left.0;
            cur_len[j + 1] = left.1;
        }
        std::mem::swap(prev, &mut cur);
        std::mem::swap(prev_len, &mut cur_len);
    }
}

/// Full-matrix DTW that also returns the optimal warping path, first cell
/// `(0, 0)`, last `(n − 1, m − 1)`. Ties prefer the diagonal step.
pub fn dtw_path(x: &[f64], y: &[f64]) -> Result<(f64, Vec<(usize, usize)>)> {
    dtw_path_with(x, y, None)
}

fn dtw_path_with(x: &[f64], y: &[f64], band: Option<usize>) -> Result<(f64, Vec<(usize, usize)>)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySequence);
    }
    let (n, m) = (x.len(), y.len());
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        let (lo, hi) = band_limits(i, n, m, band);
        for j in lo..hi {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[(i - 1) * m + j - 1]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 {
                    acc[(i - 1) * m + j]
                } else {
                    f64::INFINITY
                };
                let left = if j > 0 {
                    acc[i * m + j - 1]
                } else {
                    f64::INFINITY
                };
                diag.min(up).min(left)
            };
            acc[i * m + j] = (x[i] - y[j]).abs() + best;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let at = |a: usize, b: usize| acc[a * m + b];
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let (d, u, l) = (at(i - 1, j - 1), at(i - 1, j), at(i, j - 1));
            if d <= u && d <= l {
                (i - 1, j - 1)
            } else if u <= l {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok((acc[n * m - 1], path))
}

fn check_patterns(patterns: &[ModePattern]) -> Result<()> {
    if patterns.is_empty() {
        return Err(Error::InvalidConfig("no mode patterns".into()));
    }
    let mut seen = BTreeSet::new();
    for p in patterns {
        if !seen.insert(p.mode_id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate mode pattern {:?}",
                p.mode_id
            )));
        }
    }
    Ok(())
}

pub fn classify(
    day: &PowerSeries,
    t_on: usize,
    patterns: &[ModePattern],
) -> Result<ClassifiedEvent> {
    classify_with(day, t_on, patterns, &DtwOptions::default())
}

/// Picks the mode whose pattern is DTW-closest to the day segmented at
/// `t_on`; equal distances go to the lexicographically smallest mode id.
pub fn classify_with(
    day: &PowerSeries,
    t_on: usize,
    patterns: &[ModePattern],
    options: &DtwOptions,
) -> Result<ClassifiedEvent> {
    check_patterns(patterns)?;
    let mut distances = BTreeMap::new();
    let mut truncated = false;
    for p in patterns {
        let (seg, cut) = segment(day, t_on, p.k())?;
        truncated |= cut;
        distances.insert(
            p.mode_id.clone(),
            dtw_distance_with(p.pattern(), seg.samples(), options)?,
        );
    }
    // BTreeMap iterates in mode order, so a strict comparison keeps the first
    let (chosen_mode, min_distance) = distances
        .iter()
        .fold(None::<(&String, f64)>, |best, (m, &d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((m, d)),
        })
        .map(|(m, d)| (m.clone(), d))
        .expect("patterns are nonempty");
    Ok(ClassifiedEvent {
        t_on,
        chosen_mode,
        min_distance,
        distances,
        truncated,
    })
}

pub fn classify_day(
    day: &PowerSeries,
    detection: &DetectionResult,
    patterns: &[ModePattern],
) -> Result<Vec<ClassifiedEvent>> {
    classify_day_with(day, detection, patterns, &DtwOptions::default())
}

/// One event per detected turn-on time, in ascending time order.
pub fn classify_day_with(
    day: &PowerSeries,
    detection: &DetectionResult,
    patterns: &[ModePattern],
    options: &DtwOptions,
) -> Result<Vec<ClassifiedEvent>> {
    check_patterns(patterns)?;
    let mut times = detection.turn_on_times.clone();
    times.sort_unstable();
    times
        .par_iter()
        .map(|&t| classify_with(day, t, patterns, options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum cost over every monotone, boundary-to-boundary warping path,
    /// found by exhaustive recursion. Costs are summed in path order.
    fn brute_force_dtw(x: &[f64], y: &[f64]) -> f64 {
        fn walk(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
            let acc = (x[i] - y[j]).abs() + acc;
            if i == x.len() - 1 && j == y.len() - 1 {
                *best = best.min(acc);
                return;
            }
            if i + 1 < x.len() && j + 1 < y.len() {
                walk(x, y, i + 1, j + 1, acc, best);
            }
            if i + 1 < x.len() {
                walk(x, y, i + 1, j, acc, best);
            }
            if j + 1 < y.len() {
                walk(x, y, i, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(x, y, 0, 0, 0.0, &mut best);
        best
    }

    fn day(samples: &[f64]) -> PowerSeries {
        PowerSeries::from_watts(samples.to_vec()).unwrap()
    }

    fn pat(mode: &str, samples: &[f64]) -> ModePattern {
        ModePattern::new(mode, samples.to_vec()).unwrap()
    }

    #[test]
    fn segment_examples() {
        let d = day(&[0.0, 0.0, 7.0, 8.0, 9.0, 0.0]);
        let (s, cut) = segment(&d, 2, 3).unwrap();
        assert_eq!((s.samples(), cut), (&[7.0, 8.0, 9.0][..], false));
        assert_eq!(s, d.slice(2, 3).unwrap());
        let (s, cut) = segment(&d, 4, 10).unwrap();
        assert_eq!((s.samples(), cut), (&[9.0, 0.0][..], true));
        assert!(segment(&d, 6, 1).is_err());
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(
            dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(dtw_distance(&[1.0, 5.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert_eq!(dtw_distance(&[0.0], &[3.0, 4.0]).unwrap(), 7.0);
        assert!(matches!(
            dtw_distance(&[], &[1.0]),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn path_spans_both_boundaries() {
        let x = [0.0, 1.0, 5.0, 5.0, 2.0];
        let y = [0.0, 5.0, 2.0];
        let (cost, path) = dtw_path(&x, &y).unwrap();
        assert_eq!(cost, dtw_distance(&x, &y).unwrap());
        assert_eq!(path.first(), Some(&(0, 0)));
        assert_eq!(path.last(), Some(&(4, 2)));
        let along: f64 = path.iter().map(|&(i, j)| (x[i] - y[j]).abs()).sum();
        assert_eq!(along, cost);
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(matches!((di, dj), (1, 1) | (1, 0) | (0, 1)));
        }
    }

    #[test]
    fn normalization_divides_by_path_length() {
        let x = [0.0, 4.0];
        let y = [2.0, 2.0];
        let plain = dtw_distance(&x, &y).unwrap();
        let norm = dtw_distance_with(
            &x,
            &y,
            &DtwOptions {
                normalize: true,
                band: None,
            },
        )
        .unwrap();
        assert_eq!(plain, 4.0);
        assert_eq!(norm, 2.0);
    }

    #[test]
    fn rolling_path_length_matches_traced_path() {
        let x = [0.0, 1.0, 5.0, 5.0, 2.0, 2.0, 7.0];
        let y = [0.0, 5.0, 2.0, 7.0];
        let (cost, len) = dtw_cost_and_length(&x, &y, None).unwrap();
        let (full, path) = dtw_path(&x, &y).unwrap();
        assert_eq!((cost, len), (full, path.len()));
    }

    #[test]
    fn exact_segment_wins_with_zero_distance() {
        let light = [500.0, 500.0, 100.0];
        let heavy = [900.0, 900.0, 900.0, 100.0];
        let d = day(&[0.0, 500.0, 500.0, 100.0, 0.0, 0.0]);
        let e = classify(&d, 1, &[pat("heavy", &heavy), pat("light", &light)]).unwrap();
        assert_eq!(e.chosen_mode, "light");
        assert_eq!(e.min_distance, 0.0);
        assert_eq!(e.distances.len(), 2);
        assert!(!e.truncated);
        let only = classify(&d, 1, &[pat("heavy", &heavy)]).unwrap();
        assert_eq!(only.chosen_mode, "heavy");
    }

    #[test]
    fn ties_go_to_the_smallest_mode_id() {
        let d = day(&[3.0, 3.0]);
        let e = classify(
            &d,
            0,
            &[pat("zeta", &[1.0, 1.0]), pat("alpha", &[5.0, 5.0])],
        )
        .unwrap();
        assert_eq!(e.distances["zeta"], e.distances["alpha"]);
        assert_eq!(e.chosen_mode, "alpha");
    }

    #[test]
    fn rejects_bad_pattern_sets() {
        let d = day(&[1.0]);
        assert!(classify(&d, 0, &[]).is_err());
        assert!(classify(&d, 0, &[pat("a", &[1.0]), pat("a", &[2.0])]).is_err());
    }

    #[test]
    fn classify_day_orders_events() {
        let d = day(&[0.0, 5.0, 5.0, 0.0, 9.0, 9.0, 0.0, 5.0, 5.0]);
        let det = DetectionResult {
            delta: 0.9,
            tau: 1.0,
            n: 2,
            turn_on_times: vec![7, 1, 4],
            periods: vec![],
        };
        let pats = [pat("five", &[5.0, 5.0]), pat("nine", &[9.0, 9.0])];
        let events = classify_day(&d, &det, &pats).unwrap();
        let got: Vec<_> = events
            .iter()
            .map(|e| (e.t_on, e.chosen_mode.as_str()))
            .collect();
        assert_eq!(got, vec![(1, "five"), (4, "nine"), (7, "five")]);
        let none = DetectionResult {
            turn_on_times: vec![],
            ..det
        };
        assert!(classify_day(&d, &none, &pats).unwrap().is_empty());
    }

    #[test]
    fn classified_event_json_shape() {
        let e = classify(&day(&[2.0]), 0, &[pat("a", &[2.0])]).unwrap();
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"t_on":0,"chosen_mode":"a","min_distance":0.0,"distances":{"a":0.0},"truncated":false}"#
        );
    }

    fn short_seq() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0..50.0f64, 1..=6)
    }

    fn seq(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..3000.0f64, 1..max)
    }

    proptest! {
        #[test]
        fn equals_exhaustive_enumeration(x in short_seq(), y in short_seq()) {
            prop_assert_eq!(dtw_distance(&x, &y).unwrap(), brute_force_dtw(&x, &y));
        }

        #[test]
        fn metric_like_properties(x in seq(60), y in seq(60)) {
            prop_assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
            let d = dtw_distance(&x, &y).unwrap();
            prop_assert_eq!(d, dtw_distance(&y, &x).unwrap());
            prop_assert!(d >= 0.0);
        }

        #[test]
        fn strip_kernel_matches_full_matrix(x in seq(40), y in seq(40)) {
            // long enough for several strips plus a remainder
            let (cost, len) = dtw_cost_and_length(&x, &y, None).unwrap();
            let (full, path) = dtw_path(&x, &y).unwrap();
            prop_assert_eq!((cost, len), (full, path.len()));
        }

        #[test]
        fn band_never_beats_unconstrained(x in seq(40), y in seq(40), w in 0usize..10) {
            let free = dtw_distance(&x, &y).unwrap();
            let banded = dtw_distance_with(&x, &y, &DtwOptions { band: Some(w), normalize: false }).unwrap();
            prop_assert!(free <= banded);
            let (full, _) = dtw_path_with(&x, &y, Some(w)).unwrap();
            prop_assert_eq!(banded, full);
            let (rolled, len) = dtw_cost_and_length(&x, &y, Some(w)).unwrap();
            let (_, path) = dtw_path_with(&x, &y, Some(w)).unwrap();
            prop_assert_eq!((rolled, len), (banded, path.len()));
        }

        #[test]
        fn scaling_keeps_the_chosen_mode(
            a in seq(30), b in seq(30), c in seq(30), scale in 0.1..20.0f64,
        ) {
            let mut samples = c.clone();
            samples.extend([0.0; 40]);
            let pats = [pat("a", &a), pat("b", &b)];
            let scaled = |v: &[f64]| v.iter().map(|x| x * scale).collect::<Vec<_>>();
            let spats = [pat("a", &scaled(&a)), pat("b", &scaled(&b))];
            let e = classify(&day(&samples), 0, &pats).unwrap();
            let s = classify(&day(&scaled(&samples)), 0, &spats).unwrap();
            let (da, db) = (e.distances["a"], e.distances["b"]);
            // exact ties can flip under rounding; everything else must agree
            prop_assume!((da - db).abs() > 1e-9 * da.max(db));
            prop_assert_eq!(e.chosen_mode, s.chosen_mode);
        }
    }
}
