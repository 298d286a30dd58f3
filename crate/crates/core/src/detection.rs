//! Turn-on time detection by normalized absolute-difference cross-correlation.
//!
//! For a template `S` of `n` samples and a day `D` of `m` samples, the
//! correlation at lag `t ∈ [0, m − n]` is
//! `X(t) = (max S + max D)/2 − (1/n)·Σ_k |S(k) − D(t + k)|`.
//! Lags whose correlation exceeds `τ = δ·(max S + max D)/2` form residue
//! periods; the smallest lag attaining each period's maximum is a turn-on time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{max_of, PowerSeries, ReferencePattern};

/// Evaluation default for the low-amplitude canceling coefficient.
pub const DEFAULT_DELTA: f64 = 0.9;
/// Residue runs separated by fewer zero samples than this are merged.
pub const DEFAULT_MIN_GAP: usize = 60;

/// Lags per rayon task; large enough that scheduling cost is negligible.
const LAGS_PER_TASK: usize = 4096;

/// Correlation value per lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrace {
    pub values: Vec<f64>,
    /// Template length.
    pub n: usize,
    /// `(max S + max D)/2`, the upper bound of every value.
    pub norm_level: f64,
}

/// A maximal run of positive residue (after gap merging).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResiduePeriod {
    pub start: usize,
    pub end: usize,
    /// Smallest lag attaining the run's maximum.
    pub argmax: usize,
    /// Residue at `argmax`, i.e. `X(argmax) − τ`.
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub delta: f64,
    pub tau: f64,
    pub n: usize,
    pub turn_on_times: Vec<usize>,
    pub periods: Vec<ResiduePeriod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectOptions {
    pub delta: f64,
    pub min_gap: usize,
    /// Centered moving-average window applied to `X` before thresholding;
    /// `None` or `Some(1)` disables smoothing.
    pub smooth_window: Option<usize>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            min_gap: DEFAULT_MIN_GAP,
            smooth_window: None,
        }
    }
}

pub fn xcorr(reference: &ReferencePattern, day: &PowerSeries) -> Result<CorrelationTrace> {
    xcorr_samples(reference.samples(), day.samples())
}

/// Correlation of `s` against every full-overlap window of `d`.
///
/// Windows of `d` that are entirely zero (the idle baseline, most of a day)
/// share the value `norm − Σ|S|/n`, computed once with the same summation
/// order as the general path.
pub fn xcorr_samples(s: &[f64], d: &[f64]) -> Result<CorrelationTrace> {
    let n = s.len();
    if n == 0 || d.is_empty() {
        return Err(Error::EmptySeries);
    }
    if n > d.len() {
        return Err(Error::TemplateLongerThanDay {
            template: n,
            day: d.len(),
        });
    }
    let norm_level = (max_of(s) + max_of(d)) / 2.0;
    let inv_n = 1.0 / n as f64;
    let idle_value = norm_level - abs_diff_sum(s, None) * inv_n;

    // nonzero[i] = number of nonzero samples in d[..i]
    let mut nonzero = Vec::with_capacity(d.len() + 1);
    nonzero.push(0u32);
    let mut count = 0u32;
    for &w in d {
        count += (w != 0.0) as u32;
        nonzero.push(count);
    }

    let lags = d.len() - n + 1;
    let mut values = vec![0.0; lags];
    values
        .par_chunks_mut(LAGS_PER_TASK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let first = chunk * LAGS_PER_TASK;
            for (i, x) in out.iter_mut().enumerate() {
                let t = first + i;
                *x = if nonzero[t + n] == nonzero[t] {
                    idle_value
                } else {
                    norm_level - abs_diff_sum(s, Some(&d[t..t + n])) * inv_n
                };
            }
        });
    Ok(CorrelationTrace {
        values,
        n,
        norm_level,
    })
}

/// `Σ|s(k) − w(k)|`, or `Σ|s(k)|` when `w` is `None`, with a fixed
/// four-lane accumulation order so both paths round identically.
fn abs_diff_sum(s: &[f64], w: Option<&[f64]>) -> f64 {
    let mut acc = [0.0f64; 4];
    let diff = |k: usize| match w {
        Some(w) => (s[k] - w[k]).abs(),
        None => (s[k] - 0.0).abs(),
    };
    let whole = s.len() / 4 * 4;
    for k in (0..whole).step_by(4) {
        acc[0] += diff(k);
        acc[1] += diff(k + 1);
        acc[2] += diff(k + 2);
        acc[3] += diff(k + 3);
    }
    for k in whole..s.len() {
        acc[k - whole] += diff(k);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// `τ = δ·(max S + max D)/2`.
pub fn threshold_tau(reference: &ReferencePattern, day: &PowerSeries, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(delta * (reference.max_value() + day.max_value()) / 2.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange(delta))
    }
}

/// Pointwise `max(X − τ, 0)`.
pub fn residue(x: &CorrelationTrace, tau: f64) -> Result<CorrelationTrace> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be non-negative, got {tau}"
        )));
    }
    Ok(CorrelationTrace {
        values: x.values.iter().map(|&v| (v - tau).max(0.0)).collect(),
        n: x.n,
        norm_level: x.norm_level,
    })
}

/// Centered moving average; the window shrinks at the edges.
pub fn smooth(x: &CorrelationTrace, window: usize) -> CorrelationTrace {
    if window <= 1 || x.values.is_empty() {
        return x.clone();
    }
    let len = x.values.len();
    let before = (window - 1) / 2;
    let after = window - 1 - before;
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    for &v in &x.values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let values = (0..len)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(len);
            // an average never exceeds its largest term
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).min(x.norm_level)
        })
        .collect();
    CorrelationTrace {
        values,
        n: x.n,
        norm_level: x.norm_level,
    }
}

/// Splits the positive support of `xbar` into runs, merging runs separated
/// by fewer than `min_gap` zero samples, and reports each run's first
/// maximum.
pub fn extract_turn_on_times(xbar: &CorrelationTrace, min_gap: usize) -> Vec<ResiduePeriod> {
    let mut periods: Vec<ResiduePeriod> = Vec::new();
    for (t, &v) in xbar.values.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        match periods.last_mut() {
            // a zero-length gap is the same run
            Some(p) if t - p.end - 1 < min_gap.max(1) => {
                p.end = t;
                if v > p.max_value {
                    p.max_value = v;
                    p.argmax = t;
                }
            }
            _ => periods.push(ResiduePeriod {
                start: t,
                end: t,
                argmax: t,
                max_value: v,
            }),
        }
    }
    periods
}

pub fn detect(
    day: &PowerSeries,
    reference: &ReferencePattern,
    delta: f64,
    min_gap: usize,
) -> Result<DetectionResult> {
    detect_with(
        day,
        reference,
        &DetectOptions {
            delta,
            min_gap,
            smooth_window: None,
        },
    )
}

pub fn detect_with(
    day: &PowerSeries,
    reference: &ReferencePattern,
    options: &DetectOptions,
) -> Result<DetectionResult> {
    let tau = threshold_tau(reference, day, options.delta)?;
    let mut x = xcorr(reference, day)?;
    if let Some(w) = options.smooth_window {
        x = smooth(&x, w);
    }
    let periods = extract_turn_on_times(&residue(&x, tau)?, options.min_gap);
    Ok(DetectionResult {
        delta: options.delta,
        tau,
        n: reference.n(),
        turn_on_times: periods.iter().map(|p| p.argmax).collect(),
        periods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct double loop over lags and template samples.
    fn naive_xcorr(s: &[f64], d: &[f64]) -> Vec<f64> {
        let n = s.len();
        let norm =
            (s.iter().cloned().fold(0.0, f64::max) + d.iter().cloned().fold(0.0, f64::max)) / 2.0;
        (0..=d.len() - n)
            .map(|t| {
                let mut sum = 0.0;
                for k in 0..n {
                    sum += (s[k] - d[t + k]).abs();
                }
                norm - sum / n as f64
            })
            .collect()
    }

    /// Unnormalized multiplicative cross-correlation, kept only as a reference.
    fn multiplicative_xcorr(s: &[f64], d: &[f64]) -> Vec<f64> {
        (0..=d.len() - s.len())
            .map(|t| s.iter().zip(&d[t..]).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn first_argmax(v: &[f64]) -> usize {
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        best
    }

    fn pattern(samples: &[f64]) -> ReferencePattern {
        ReferencePattern::from_samples("a", "m", samples.to_vec()).unwrap()
    }

    fn trace(values: &[f64]) -> CorrelationTrace {
        CorrelationTrace {
            values: values.to_vec(),
            n: 1,
            norm_level: 10.0,
        }
    }

    #[test]
    fn hand_computed_lags() {
        let x = xcorr_samples(&[5.0, 5.0], &[5.0, 5.0, 0.0, 0.0]).unwrap();
        assert_eq!(x.norm_level, 5.0);
        assert_eq!(x.values, vec![5.0, 2.5, 0.0]);
    }

    #[test]
    fn exact_copy_peaks_at_its_lag() {
        let s = [300.0, 900.0, 900.0, 120.0, 40.0];
        let mut d = vec![0.0; 60];
        d[23..28].copy_from_slice(&s);
        let x = xcorr_samples(&s, &d).unwrap();
        assert_eq!(first_argmax(&x.values), 23);
        assert_eq!(x.values[23], x.norm_level);
        // the discarded multiplicative form agrees on the location here
        assert_eq!(first_argmax(&multiplicative_xcorr(&s, &d)), 23);
    }

    #[test]
    fn template_longer_than_day_is_rejected() {
        assert!(matches!(
            xcorr_samples(&[1.0; 5], &[1.0; 4]),
            Err(Error::TemplateLongerThanDay {
                template: 5,
                day: 4
            })
        ));
    }

    #[test]
    fn tau_examples() {
        let r = pattern(&[1000.0, 10.0]);
        let day = PowerSeries::from_watts(vec![0.0, 1000.0]).unwrap();
        assert_eq!(threshold_tau(&r, &day, 0.9).unwrap(), 900.0);
        assert!(threshold_tau(&r, &day, 1e-12).unwrap() < 1e-8);
        for bad in [0.0, 1.0, 90.0, -0.1, f64::NAN] {
            assert!(matches!(
                threshold_tau(&r, &day, bad),
                Err(Error::DeltaOutOfRange(_))
            ));
        }
        assert_eq!(DEFAULT_DELTA, 0.9);
    }

    #[test]
    fn residue_examples() {
        assert_eq!(
            residue(&trace(&[5.0, 2.5, 0.0]), 3.0).unwrap().values,
            vec![2.0, 0.0, 0.0]
        );
        assert_eq!(
            residue(&trace(&[5.0, -1.0]), 0.0).unwrap().values,
            vec![5.0, 0.0]
        );
        let above = residue(&trace(&[5.0, 2.5]), 6.0).unwrap();
        assert!(above.values.iter().all(|&v| v == 0.0));
        assert!(extract_turn_on_times(&above, 0).is_empty());
        assert!(residue(&trace(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn two_spikes_give_two_periods() {
        let xbar = trace(&[0.0, 0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 3.0, 0.0]);
        let p = extract_turn_on_times(&xbar, 0);
        assert_eq!(p.iter().map(|p| p.argmax).collect::<Vec<_>>(), vec![3, 7]);
        assert_eq!((p[0].start, p[0].end, p[0].max_value), (2, 4, 2.0));
        // a gap of two zeros merges once min_gap exceeds it
        assert_eq!(extract_turn_on_times(&xbar, 2).len(), 2);
        let merged = extract_turn_on_times(&xbar, 3);
        assert_eq!(merged.len(), 1);
        assert_eq!(
            (merged[0].start, merged[0].end, merged[0].argmax),
            (2, 7, 7)
        );
    }

    #[test]
    fn ties_take_the_smallest_index() {
        let p = extract_turn_on_times(&trace(&[0.0, 2.0, 1.0, 2.0, 0.0]), 0);
        assert_eq!(p[0].argmax, 1);
    }

    #[test]
    fn smoothing_is_a_bounded_average() {
        let x = trace(&[0.0, 3.0, 6.0, 3.0, 0.0]);
        assert_eq!(smooth(&x, 3).values, vec![1.5, 3.0, 4.0, 3.0, 1.5]);
        assert_eq!(smooth(&x, 1), x);
    }

    #[test]
    fn detect_finds_embedded_copy() {
        let sup: Vec<f64> = (0..300)
            .map(|i| if i < 200 { 1200.0 } else { 400.0 })
            .collect();
        let mut d = vec![0.0; 5_000];
        d[1_234..1_534].copy_from_slice(&sup);
        let day = PowerSeries::from_watts(d).unwrap();
        let r = detect(&day, &pattern(&sup[..150]), 0.9, DEFAULT_MIN_GAP).unwrap();
        assert_eq!(r.turn_on_times, vec![1_234]);
        assert_eq!(r.n, 150);
        assert_eq!(r.tau, 0.9 * 1200.0);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["delta", "tau", "n", "turn_on_times", "periods"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    fn series_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        // mostly zeros with bursts, so both the idle and general paths run
        prop::collection::vec(prop_oneof![3 => Just(0.0), 2 => 0.0..2000.0f64], 1..max_len)
    }

    proptest! {
        #[test]
        fn matches_naive_oracle(s in series_strategy(40), d in series_strategy(400)) {
            prop_assume!(s.len() <= d.len());
            let fast = xcorr_samples(&s, &d).unwrap();
            let slow = naive_xcorr(&s, &d);
            prop_assert_eq!(fast.values.len(), d.len() - s.len() + 1);
            for (a, b) in fast.values.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
                prop_assert!(*a <= fast.norm_level);
            }
        }

        #[test]
        fn shift_moves_argmax_by_the_same_amount(
            sup in prop::collection::vec(1.0..3000.0f64, 5..60),
            t0 in 0usize..500,
            shift in 0usize..300,
        ) {
            let place = |t: usize| {
                let mut d = vec![0.0; 1_000];
                d[t..t + sup.len()].copy_from_slice(&sup);
                PowerSeries::from_watts(d).unwrap()
            };
            let r = pattern(&sup);
            let a = detect(&place(t0), &r, 0.9, 0).unwrap();
            let b = detect(&place(t0 + shift), &r, 0.9, 0).unwrap();
            prop_assert_eq!(a.turn_on_times, vec![t0]);
            prop_assert_eq!(b.turn_on_times, vec![t0 + shift]);
        }

        #[test]
        fn raising_delta_only_shrinks_periods(
            d in series_strategy(600),
            n in 1usize..30,
            lo in 0.05..0.9f64,
            step in 0.01..0.09f64,
            gap in 0usize..80,
        ) {
            prop_assume!(n <= d.len() && d.iter().any(|&w| w > 0.0));
            let day = PowerSeries::from_watts(d.clone()).unwrap();
            let r = pattern(&d[..n].iter().map(|w| w + 1.0).collect::<Vec<_>>());
            let low = detect(&day, &r, lo, gap).unwrap();
            let high = detect(&day, &r, lo + step, gap).unwrap();
            for p in &high.periods {
                prop_assert!(low.periods.iter().any(|q| q.start <= p.start && p.end <= q.end));
            }
        }
    }
}
