use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sampling::{EmpiricalCdf, UsageIntensity};
use super::supro::Supro;
use crate::error::{Error, Result};
use crate::series::{PowerSeries, Sup, DAY_SECONDS};

/// A labeled simulated activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub t_on: usize,
    #[serde(rename = "mode")]
    pub mode_id: String,
    pub duration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayOptions {
    /// Standard deviation of additive Gaussian baseline noise; 0 disables it.
    pub noise_sigma: f64,
    /// Turn-on resamples allowed per usage before giving up.
    pub max_retries: usize,
}

impl Default for DayOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            max_retries: 100,
        }
    }
}

/// A generated daily trace plus its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDay {
    pub series: PowerSeries,
    /// Sorted by `t_on`.
    pub events: Vec<GroundTruthEvent>,
    /// The SUP placed for each event, same order as `events`.
    pub sups: Vec<Sup>,
}

pub fn generate_day(
    supros: &BTreeMap<String, Supro>,
    intensity: &UsageIntensity,
    cdf: &EmpiricalCdf,
    usages_per_day: usize,
    seed: u64,
) -> Result<SimulatedDay> {
    generate_day_with(
        supros,
        intensity,
        cdf,
        usages_per_day,
        seed,
        &DayOptions::default(),
    )
}

/// Builds a 1 Hz midnight-to-midnight trace holding `usages_per_day` SUPs on a
/// zero baseline. Placements that would overlap an earlier SUP or run past
/// midnight resample the turn-on time.
pub fn generate_day_with(
    supros: &BTreeMap<String, Supro>,
    intensity: &UsageIntensity,
    cdf: &EmpiricalCdf,
    usages_per_day: usize,
    seed: u64,
    options: &DayOptions,
) -> Result<SimulatedDay> {
    if !(options.noise_sigma.is_finite() && options.noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise sigma must be non-negative, got {}",
            options.noise_sigma
        )));
    }
    for mode in intensity.weights().keys() {
        if !supros.contains_key(mode) {
            return Err(Error::InvalidIntensity(format!(
                "no model for mode {mode:?}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0.0; DAY_SECONDS];
    let mut placed_sups: Vec<(GroundTruthEvent, Sup)> = Vec::with_capacity(usages_per_day);

    for usage in 0..usages_per_day {
        let mode = intensity.sample_with(&mut rng).to_owned();
        let sup = supros[&mode].generate_with(&mut rng)?;
        let len = sup.len();

        let mut placed = None;
        for _ in 0..=options.max_retries {
            let t_on = cdf.sample_with(&mut rng) as usize;
            let fits = t_on + len <= DAY_SECONDS
                && placed_sups
                    .iter()
                    .all(|(e, _)| t_on + len <= e.t_on || e.t_on + e.duration <= t_on);
            if fits {
                placed = Some(t_on);
                break;
            }
        }
        let t_on = placed.ok_or(Error::PlacementFailed {
            usage,
            retries: options.max_retries,
        })?;

        for (dst, &w) in samples[t_on..t_on + len].iter_mut().zip(sup.samples()) {
            *dst += w;
        }
        placed_sups.push((
            GroundTruthEvent {
                t_on,
                mode_id: mode,
                duration: len,
            },
            sup,
        ));
    }

    if options.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, options.noise_sigma)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for s in &mut samples {
            *s = (*s + normal.sample(&mut rng)).max(0.0);
        }
    }

    placed_sups.sort_by_key(|(e, _)| e.t_on);
    let (events, sups) = placed_sups.into_iter().unzip();
    Ok(SimulatedDay {
        series: PowerSeries::from_watts(samples)?,
        events,
        sups,
    })
}

/// Draws a fresh child seed; used to fan one seed out over days and templates.
pub fn child_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

/// One seed per day, fanned out from `seed` in day order.
pub fn day_seeds(seed: u64, days: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..days).map(|_| child_seed(&mut rng)).collect()
}

pub fn save_truth(events: &[GroundTruthEvent], path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(events)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthEvent>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::sampling::build_empirical_cdf;
    use crate::simulator::supro::{Cycle, Phase};

    fn model(mode: &str, secs: f64, watts: f64, jitter: f64) -> Supro {
        Supro {
            appliance_id: "toy".into(),
            mode_id: mode.into(),
            phases: vec![Phase {
                rep_lower: 1,
                rep_upper: 2,
                cycles: vec![
                    Cycle {
                        duration_s: secs,
                        watts,
                        duration_jitter: jitter,
                    },
                    Cycle {
                        duration_s: secs / 2.0,
                        watts: watts / 3.0,
                        duration_jitter: jitter,
                    },
                ],
            }],
        }
    }

    fn toy() -> (BTreeMap<String, Supro>, UsageIntensity) {
        let supros = BTreeMap::from([
            ("a".to_string(), model("a", 600.0, 900.0, 0.05)),
            ("b".to_string(), model("b", 900.0, 400.0, 0.05)),
        ]);
        let intensity =
            UsageIntensity::new(BTreeMap::from([("a".into(), 0.5), ("b".into(), 0.5)])).unwrap();
        (supros, intensity)
    }

    #[test]
    fn zero_usages_gives_flat_day() {
        let (s, i) = toy();
        let cdf = build_empirical_cdf(&[3600]).unwrap();
        let day = generate_day(&s, &i, &cdf, 0, 1).unwrap();
        assert_eq!(day.series.len(), DAY_SECONDS);
        assert!(day.series.samples().iter().all(|&w| w == 0.0));
        assert!(day.events.is_empty());
    }

    #[test]
    fn degenerate_cdf_places_at_its_value() {
        let (s, i) = toy();
        let cdf = build_empirical_cdf(&[32_400]).unwrap();
        let day = generate_day(&s, &i, &cdf, 1, 9).unwrap();
        assert_eq!(day.events.len(), 1);
        assert_eq!(day.events[0].t_on, 32_400);
        assert!(day.series.samples()[32_400] > 0.0);
        assert_eq!(day.series.samples()[32_399], 0.0);
    }

    #[test]
    fn overlap_exhausts_retries() {
        let (s, i) = toy();
        let cdf = build_empirical_cdf(&[32_400]).unwrap();
        let err = generate_day(&s, &i, &cdf, 2, 9).unwrap_err();
        assert!(matches!(
            err,
            Error::PlacementFailed {
                usage: 1,
                retries: 100
            }
        ));
        let late = build_empirical_cdf(&[86_000]).unwrap();
        assert!(generate_day(&s, &i, &late, 1, 9).is_err());
    }

    #[test]
    fn energy_is_conserved_and_events_sorted() {
        let (s, i) = toy();
        let times: Vec<u32> = (0..40).map(|k| 20_000 + k * 1_500).collect();
        let cdf = build_empirical_cdf(&times).unwrap();
        for seed in 0..10 {
            let day = generate_day(&s, &i, &cdf, 4, seed).unwrap();
            assert_eq!(day.events.len(), 4);
            assert!(day
                .events
                .windows(2)
                .all(|w| w[0].t_on + w[0].duration <= w[1].t_on));
            let total: f64 = day.series.samples().iter().sum();
            let sup_total: f64 = day.sups.iter().map(|s| s.energy()).sum();
            assert!(
                (total - sup_total).abs() <= 1e-9 * sup_total,
                "{total} vs {sup_total}"
            );
            for (e, sup) in day.events.iter().zip(&day.sups) {
                assert_eq!(e.mode_id, sup.mode_id);
                assert_eq!(
                    &day.series.samples()[e.t_on..e.t_on + e.duration],
                    sup.samples()
                );
            }
        }
    }

    #[test]
    fn deterministic_and_noise_clamped() {
        let (s, i) = toy();
        let cdf = build_empirical_cdf(&[10_000, 40_000, 60_000]).unwrap();
        let opts = DayOptions {
            noise_sigma: 25.0,
            ..DayOptions::default()
        };
        let a = generate_day_with(&s, &i, &cdf, 2, 5, &opts).unwrap();
        let b = generate_day_with(&s, &i, &cdf, 2, 5, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.series.samples().iter().all(|&w| w >= 0.0));
        assert!(a.series.samples().iter().any(|&w| w > 0.0 && w < 200.0));
    }

    #[test]
    fn truth_json_shape() {
        let e = GroundTruthEvent {
            t_on: 5,
            mode_id: "light".into(),
            duration: 10,
        };
        assert_eq!(
            serde_json::to_string(&[e]).unwrap(),
            r#"[{"t_on":5,"mode":"light","duration":10}]"#
        );
    }
}
