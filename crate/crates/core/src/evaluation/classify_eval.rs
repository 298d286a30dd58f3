use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::{match_detections, DEFAULT_TOLERANCE};
use super::metrics::{Confusion, ModeMetrics};
use crate::classification::{dtw_cost_and_length, segment, ModePattern};
use crate::detection::{detect, DEFAULT_DELTA, DEFAULT_MIN_GAP};
use crate::error::{Error, Result};
use crate::series::{PowerSeries, ReferencePattern};
use crate::simulator::{
    child_seed, day_seeds, generate_day_with, ApplianceModel, DayOptions, IntensityLevel,
    SimulatedDay, UsageIntensity,
};

/// Appliance label used for rows pooled over all appliances.
pub const POOLED: &str = "all";

/// One simulated household's use of one appliance: single-usage days drawn
/// lazily from a seed, so large datasets never sit in memory at once.
#[derive(Debug, Clone)]
pub struct HouseholdDataset {
    pub household: String,
    pub appliance: ApplianceModel,
    pub intensity: UsageIntensity,
    pub days: usize,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl HouseholdDataset {
    /// The seed of every day, in order.
    pub fn day_seeds(&self) -> Vec<u64> {
        day_seeds(self.seed, self.days)
    }

    pub fn day(&self, seed: u64) -> Result<SimulatedDay> {
        let options = DayOptions {
            noise_sigma: self.noise_sigma,
            ..DayOptions::default()
        };
        generate_day_with(
            &self.appliance.modes,
            &self.intensity,
            &self.appliance.turn_on,
            1,
            seed,
            &options,
        )
    }
}

/// Three households per appliance, one per usage-intensity level, each with
/// `days` single-usage days. Every dataset gets its own seed drawn from `seed`.
pub fn intensity_households(
    appliances: &[ApplianceModel],
    days: usize,
    seed: u64,
    noise_sigma: f64,
) -> Result<Vec<HouseholdDataset>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for appliance in appliances {
        for level in IntensityLevel::ALL {
            out.push(HouseholdDataset {
                household: format!("{}-intensity", level.as_str()),
                appliance: appliance.clone(),
                intensity: appliance.intensity(level)?,
                days,
                seed: child_seed(&mut rng),
                noise_sigma,
            });
        }
    }
    Ok(out)
}

/// The noiseless, jitter-free SUP of every mode, used as its DTW pattern.
pub fn nominal_patterns(appliance: &ApplianceModel) -> Result<Vec<ModePattern>> {
    appliance
        .modes
        .values()
        .map(|s| Ok(ModePattern::from_sup(&s.nominal_sup()?)))
        .collect()
}

/// Detector settings for the end-to-end variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndToEnd {
    /// Template length; the template is the nominal prefix of the lightest mode.
    pub n: usize,
    pub delta: f64,
    pub min_gap: usize,
    pub tolerance: usize,
}

impl Default for EndToEnd {
    fn default() -> Self {
        Self {
            n: 600,
            delta: DEFAULT_DELTA,
            min_gap: DEFAULT_MIN_GAP,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassificationConfig {
    pub band: Option<usize>,
    /// `None` classifies at ground-truth turn-on times.
    pub end_to_end: Option<EndToEnd>,
}

/// Metrics under one DTW distance convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub normalized: bool,
    /// Rows per appliance and mode, then rows pooled per mode under [`POOLED`].
    pub rows: Vec<ModeMetrics>,
}

impl MetricsTable {
    pub fn get(&self, appliance: &str, mode: &str) -> Option<&ModeMetrics> {
        self.rows
            .iter()
            .find(|r| r.appliance_id == appliance && r.mode_id == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub households: usize,
    pub days: usize,
    pub events: usize,
    pub end_to_end: bool,
    pub unnormalized: MetricsTable,
    pub normalized: MetricsTable,
}

impl ClassificationReport {
    pub fn table(&self, normalized: bool) -> &MetricsTable {
        if normalized {
            &self.normalized
        } else {
            &self.unnormalized
        }
    }
}

/// Predicted mode under (unnormalized, path-normalized) distances.
fn classify_both(
    day: &PowerSeries,
    t_on: usize,
    patterns: &[ModePattern],
    band: Option<usize>,
) -> Result<(String, String)> {
    let mut best_raw: Option<(f64, &str)> = None;
    let mut best_norm: Option<(f64, &str)> = None;
    // patterns are sorted by mode id, so strict improvement keeps ties on
    // the smallest id
    for p in patterns {
        let (seg, _) = segment(day, t_on, p.k())?;
        let (cost, len) = dtw_cost_and_length(p.pattern(), seg.samples(), band)?;
        let norm = cost / len as f64;
        if best_raw.is_none_or(|(d, _)| cost < d) {
            best_raw = Some((cost, &p.mode_id));
        }
        if best_norm.is_none_or(|(d, _)| norm < d) {
            best_norm = Some((norm, &p.mode_id));
        }
    }
    let pick = |b: Option<(f64, &str)>| b.expect("patterns are nonempty").1.to_owned();
    Ok((pick(best_raw), pick(best_norm)))
}

/// Classifies every simulated activation and tallies per-mode confusion.
///
/// By default each true event is classified at its ground-truth turn-on time,
/// isolating the classifier. With `end_to_end`, the detector's turn-on times
/// are matched to the truth; unmatched truths count as misses of their mode
/// and unmatched detections as false alarms of whatever mode they get.
pub fn evaluate_classification(
    datasets: &[HouseholdDataset],
    config: &ClassificationConfig,
) -> Result<ClassificationReport> {
    if datasets.is_empty() {
        return Err(Error::InvalidConfig("no household datasets".into()));
    }
    // appliance id → (raw confusion, normalized confusion), in dataset order
    let mut per_appliance: Vec<(String, Confusion, Confusion)> = Vec::new();
    let mut events = 0;
    let mut days = 0;
    for dataset in datasets {
        let mut patterns = nominal_patterns(&dataset.appliance)?;
        patterns.sort_by(|a, b| a.mode_id.cmp(&b.mode_id));
        let reference = match &config.end_to_end {
            Some(e2e) => {
                let lightest = &dataset.appliance.ranking[0];
                let nominal = dataset.appliance.modes[lightest].nominal_sup()?;
                if e2e.n == 0 || e2e.n > nominal.len() {
                    return Err(Error::InvalidConfig(format!(
                        "template length {} outside [1, {}]",
                        e2e.n,
                        nominal.len()
                    )));
                }
                Some(ReferencePattern::from_samples(
                    &dataset.appliance.appliance_id,
                    lightest,
                    nominal.samples()[..e2e.n].to_vec(),
                )?)
            }
            None => None,
        };
        let results = dataset
            .day_seeds()
            .par_iter()
            .map(|&seed| {
                let day = dataset.day(seed)?;
                let mut raw = Confusion::default();
                let mut norm = Confusion::default();
                let mut tally = |truth: Option<&str>, t_on: Option<usize>| -> Result<()> {
                    match t_on {
                        Some(t) => {
                            let (r, n) = classify_both(&day.series, t, &patterns, config.band)?;
                            raw.add(truth, Some(&r));
                            norm.add(truth, Some(&n));
                        }
                        None => {
                            raw.add(truth, None);
                            norm.add(truth, None);
                        }
                    }
                    Ok(())
                };
                match (&config.end_to_end, &reference) {
                    (Some(e2e), Some(reference)) => {
                        let found = detect(&day.series, reference, e2e.delta, e2e.min_gap)?;
                        let report =
                            match_detections(&day.events, &found.turn_on_times, e2e.tolerance);
                        let mut used = vec![false; found.turn_on_times.len()];
                        for e in &day.events {
                            let hit = report.matched_pairs.iter().find(|(t, _)| *t == e.t_on);
                            if let Some(&(_, d)) = hit {
                                if let Some(i) = found
                                    .turn_on_times
                                    .iter()
                                    .zip(&used)
                                    .position(|(&x, &u)| x == d && !u)
                                {
                                    used[i] = true;
                                }
                            }
                            tally(Some(&e.mode_id), hit.map(|&(_, d)| d))?;
                        }
                        for (&d, _) in found.turn_on_times.iter().zip(&used).filter(|(_, &u)| !u) {
                            tally(None, Some(d))?;
                        }
                    }
                    _ => {
                        for e in &day.events {
                            tally(Some(&e.mode_id), Some(e.t_on))?;
                        }
                    }
                }
                Ok((raw, norm, day.events.len()))
            })
            .collect::<Result<Vec<_>>>()?;

        let id = &dataset.appliance.appliance_id;
        let slot = match per_appliance.iter().position(|(a, _, _)| a == id) {
            Some(i) => i,
            None => {
                per_appliance.push((id.clone(), Confusion::default(), Confusion::default()));
                per_appliance.len() - 1
            }
        };
        for (raw, norm, n) in &results {
            per_appliance[slot].1.merge(raw);
            per_appliance[slot].2.merge(norm);
            events += n;
        }
        days += dataset.days;
    }

    let table = |normalized: bool| {
        let mut pooled = Confusion::default();
        let mut rows = Vec::new();
        for (appliance, raw, norm) in &per_appliance {
            let c = if normalized { norm } else { raw };
            pooled.merge(c);
            rows.extend(c.modes().iter().map(|m| c.metrics(appliance, m)));
        }
        rows.extend(pooled.modes().iter().map(|m| pooled.metrics(POOLED, m)));
        MetricsTable { normalized, rows }
    };
    Ok(ClassificationReport {
        households: datasets.len(),
        days,
        events,
        end_to_end: config.end_to_end.is_some(),
        unnormalized: table(false),
        normalized: table(true),
    })
}

/// Metrics CSV; a leading comment records the protocol.
pub fn metrics_csv(report: &ClassificationReport, normalized: bool) -> String {
    let table = report.table(normalized);
    let mut out = format!(
        "# datasets={} days={} events={} dtw={} input={}\nappliance,mode,precision,recall,f1\n",
        report.households,
        report.days,
        report.events,
        if normalized {
            "path-normalized"
        } else {
            "unnormalized"
        },
        if report.end_to_end {
            "detector"
        } else {
            "ground-truth"
        },
    );
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.appliance_id, r.mode_id, r.precision, r.recall, r.f1
        )
        .expect("writing to a String");
    }
    out
}
