use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{detect, DEFAULT_DELTA, DEFAULT_MIN_GAP};
use crate::error::{Error, Result};
use crate::series::make_reference_pattern;
use crate::simulator::{child_seed, generate_day_with, ApplianceModel, DayOptions, UsageIntensity};

/// Where each day's reference pattern comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateSource {
    /// A fresh SUP of an independently drawn mode.
    #[default]
    Drawn,
    /// A fresh SUP of the mode actually used that day.
    SameMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub days: usize,
    pub delta: f64,
    pub min_gap: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub template: TemplateSource,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_values: parse_n_range("50:1600:50").expect("valid range"),
            days: 100,
            delta: DEFAULT_DELTA,
            min_gap: DEFAULT_MIN_GAP,
            seed: 0,
            noise_sigma: 0.0,
            template: TemplateSource::Drawn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub mean_detections: f64,
    /// Population standard deviation over days.
    pub std_detections: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub appliance_id: String,
    pub days: usize,
    pub rows: Vec<SweepRow>,
    /// `counts[d][i]`: detections on day `d` with `n_values[i]`.
    pub counts: Vec<Vec<usize>>,
}

/// Parses `a:b:step` (inclusive of `b` when it lies on the grid) or a
/// single value.
pub fn parse_n_range(range: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("bad range {range:?}; expected a:b:step"));
    let parts: Vec<usize> = range
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, step) = match parts[..] {
        [a] => (a, a, 1),
        [a, b] => (a, b, 1),
        [a, b, s] => (a, b, s),
        _ => return Err(bad()),
    };
    if a == 0 || step == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).step_by(step).collect())
}

/// Mean number of reported turn-on times per single-SUP day, for every
/// template length. A template longer than its source SUP reports zero.
pub fn sweep_pattern_size(
    appliance: &ApplianceModel,
    intensity: &UsageIntensity,
    config: &SweepConfig,
) -> Result<SweepReport> {
    if config.n_values.is_empty() || config.n_values.contains(&0) {
        return Err(Error::InvalidConfig(
            "pattern sizes must be nonempty and positive".into(),
        ));
    }
    if config.days == 0 {
        return Err(Error::InvalidConfig("need at least one day".into()));
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::DeltaOutOfRange(config.delta));
    }
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<(u64, u64)> = (0..config.days)
        .map(|_| (child_seed(&mut master), child_seed(&mut master)))
        .collect();
    let options = DayOptions {
        noise_sigma: config.noise_sigma,
        ..DayOptions::default()
    };

    let counts = seeds
        .par_iter()
        .map(|&(day_seed, template_seed)| {
            let day = generate_day_with(
                &appliance.modes,
                intensity,
                &appliance.turn_on,
                1,
                day_seed,
                &options,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(template_seed);
            let mode = match config.template {
                TemplateSource::Drawn => intensity.sample_with(&mut rng).to_owned(),
                TemplateSource::SameMode => day.events[0].mode_id.clone(),
            };
            let source = appliance.modes[&mode].generate_with(&mut rng)?;
            config
                .n_values
                .iter()
                .map(|&n| {
                    if n > source.len() {
                        return Ok(0);
                    }
                    let reference = make_reference_pattern(&source, n)?;
                    Ok(
                        detect(&day.series, &reference, config.delta, config.min_gap)?
                            .turn_on_times
                            .len(),
                    )
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = config
        .n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let per_day: Vec<f64> = counts.iter().map(|c| c[i] as f64).collect();
            let mean = per_day.iter().sum::<f64>() / per_day.len() as f64;
            let var =
                per_day.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / per_day.len() as f64;
            SweepRow {
                n,
                mean_detections: mean,
                std_detections: var.sqrt(),
            }
        })
        .collect();
    Ok(SweepReport {
        appliance_id: appliance.appliance_id.clone(),
        days: config.days,
        rows,
        counts,
    })
}

/// Plot-ready CSV; a leading comment records the appliance and day count.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = format!(
        "# appliance={} days={}\nn,mean_detections,std_detections\n",
        report.appliance_id, report.days
    );
    for r in &report.rows {
        writeln!(out, "{},{},{}", r.n, r.mean_detections, r.std_detections)
            .expect("writing to a String");
    }
    out
}
