use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use supwatt_core::classification::{classify_with, DtwOptions, ModePattern};
use supwatt_core::detection::{
    detect_with, DetectOptions, DetectionResult, DEFAULT_DELTA, DEFAULT_MIN_GAP,
};
use supwatt_core::evaluation::{
    evaluate_classification, intensity_households, metrics_csv, nominal_patterns, parse_n_range,
    recommend, sweep_csv, sweep_pattern_size, ClassificationConfig, EndToEnd, SweepConfig,
    TariffSchedule, TemplateSource, DEFAULT_TOLERANCE,
};
use supwatt_core::series::{load_series, to_csv, TraceFormat};
use supwatt_core::simulator::{
    build_empirical_cdf, builtin_appliance, builtin_turn_on_cdf, day_seeds, generate_day_with,
    load_supros, ApplianceModel, DayOptions, EmpiricalCdf, IntensityLevel, UsageIntensity,
    BUILTIN_APPLIANCES,
};
use supwatt_core::ReferencePattern;

use crate::config;
use crate::error::{CliError, CliResult, Context};

/// Where an appliance model comes from; shared by several subcommands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ApplianceSource {
    /// Built-in appliance: dishwasher, washer or dryer
    #[arg(long)]
    pub appliance: Option<String>,
    /// SUPRO JSON file describing every mode of one appliance
    #[arg(long)]
    pub supro: Option<PathBuf>,
    /// Turn-on times file: a JSON array of seconds of day, or an object with
    /// a `seconds_of_day` array [default: built-in illustrative distribution]
    #[arg(long)]
    pub turn_on: Option<PathBuf>,
    /// Override every cycle's duration jitter (fraction in [0, 1))
    #[arg(long)]
    pub jitter: Option<f64>,
}

impl ApplianceSource {
    fn is_given(&self) -> bool {
        self.appliance.is_some() || self.supro.is_some()
    }

    fn load(&self) -> CliResult<ApplianceModel> {
        let model = match (&self.appliance, &self.supro) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give either --appliance or --supro, not both".into(),
                ))
            }
            (None, None) => return Err(CliError::Usage("missing --appliance or --supro".into())),
            (Some(name), None) => builtin_appliance(name).context("--appliance")?,
            (None, Some(path)) => {
                let supros = load_supros(path).context(path.display())?;
                ApplianceModel::new(supros, builtin_turn_on_cdf()).context(path.display())?
            }
        };
        let model = match &self.turn_on {
            Some(path) => {
                ApplianceModel::new(model.modes.into_values().collect(), load_turn_on(path)?)
                    .context(path.display())?
            }
            None => model,
        };
        match self.jitter {
            Some(j) => model.with_jitter(j).context("--jitter"),
            None => Ok(model),
        }
    }
}

fn load_turn_on(path: &Path) -> CliResult<EmpiricalCdf> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum TurnOnFile {
        Plain(Vec<u32>),
        Wrapped { seconds_of_day: Vec<u32> },
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let times = match serde_json::from_str(&text) {
        Ok(TurnOnFile::Plain(t) | TurnOnFile::Wrapped { seconds_of_day: t }) => t,
        Err(e) => return Err(CliError::Validation(format!("{}: {e}", path.display()))),
    };
    build_empirical_cdf(&times).context(path.display())
}

fn parse_intensity(name: &str, appliance: &ApplianceModel) -> CliResult<UsageIntensity> {
    if name == "uniform" {
        return Ok(appliance.uniform_intensity());
    }
    let level: IntensityLevel = name.parse().map_err(|_| {
        CliError::Validation(format!(
            "--intensity {name:?}: expected uniform, high, medium or low"
        ))
    })?;
    appliance.intensity(level).context("--intensity")
}

fn read_trace(path: &Path) -> CliResult<supwatt_core::PowerSeries> {
    load_series(path, TraceFormat::Csv).context(path.display())
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing {flag}")))
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path.display(), e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("stdout", e)),
    }
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|item| serde_json::to_string(item).expect("serializable") + "\n")
        .collect()
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: ApplianceSource,
    /// Number of days to generate [default: 1]
    #[arg(long)]
    pub days: Option<usize>,
    /// Activations per day [default: 1]
    #[arg(long)]
    pub usages: Option<usize>,
    /// Mode mix: uniform, high, medium or low [default: uniform]
    #[arg(long)]
    pub intensity: Option<String>,
    /// Standard deviation of additive baseline noise in watts [default: 0]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed for all randomness [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace CSV path; the labels go next to it as `<stem>.truth.json`.
    /// With several days, files are numbered `<stem>-001.csv`, ...
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Trace and truth paths for day `d` (0-based) of `days`.
fn day_paths(out: &Path, days: usize, d: usize) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    let name = if days == 1 {
        stem
    } else {
        format!("{stem}-{:03}", d + 1)
    };
    (
        out.with_file_name(format!("{name}.{ext}")),
        out.with_file_name(format!("{name}.truth.json")),
    )
}

pub fn simulate(args: &SimulateArgs, cfg: Option<&Map<String, Value>>) -> CliResult<()> {
    let args = config::merge(args, cfg, "simulate")?;
    let out = required(&args.out, "--out")?;
    let appliance = args.source.load()?;
    let intensity = parse_intensity(args.intensity.as_deref().unwrap_or("uniform"), &appliance)?;
    let days = args.days.unwrap_or(1);
    if days == 0 {
        return Err(CliError::Validation("--days must be at least 1".into()));
    }
    let options = DayOptions {
        noise_sigma: args.noise.unwrap_or(0.0),
        ..DayOptions::default()
    };
    let usages = args.usages.unwrap_or(1);
    let generated = day_seeds(args.seed.unwrap_or(0), days)
        .par_iter()
        .map(|&seed| {
            generate_day_with(
                &appliance.modes,
                &intensity,
                &appliance.turn_on,
                usages,
                seed,
                &options,
            )
        })
        .collect::<supwatt_core::Result<Vec<_>>>()
        .context("simulate")?;
    for (d, day) in generated.iter().enumerate() {
        let (trace, truth) = day_paths(&out, days, d);
        emit(Some(&trace), &to_csv(&day.series))?;
        let labels = serde_json::to_string_pretty(&day.events).expect("serializable") + "\n";
        emit(Some(&truth), &labels)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    /// Day trace CSV
    #[arg(long)]
    pub day: Option<PathBuf>,
    /// Reference pattern CSV (same format as a trace)
    #[arg(long = "ref")]
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    /// Use only the first n samples of the reference
    #[arg(long)]
    pub n: Option<usize>,
    /// Threshold fraction δ in (0, 1) [default: 0.9]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Residue runs closer than this many samples are merged [default: 60]
    #[arg(long)]
    pub min_gap: Option<usize>,
    /// Centered moving-average window applied before thresholding
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Output JSON path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn detect(args: &DetectArgs, cfg: Option<&Map<String, Value>>) -> CliResult<()> {
    let args = config::merge(args, cfg, "detect")?;
    let day_path = required(&args.day, "--day")?;
    let ref_path = required(&args.reference, "--ref")?;
    let day = read_trace(&day_path)?;
    let mut samples = read_trace(&ref_path)?.into_samples();
    if let Some(n) = args.n {
        if n == 0 || n > samples.len() {
            return Err(CliError::Validation(format!(
                "--n {n}: reference has {} samples",
                samples.len()
            )));
        }
        samples.truncate(n);
    }
    let reference = ReferencePattern::from_samples("reference", "reference", samples)
        .context(ref_path.display())?;
    let options = DetectOptions {
        delta: args.delta.unwrap_or(DEFAULT_DELTA),
        min_gap: args.min_gap.unwrap_or(DEFAULT_MIN_GAP),
        smooth_window: args.smooth,
    };
    let result = detect_with(&day, &reference, &options).context("detect")?;
    let text = serde_json::to_string_pretty(&result).expect("serializable") + "\n";
    emit(args.out.as_deref(), &text)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    /// Day trace CSV
    #[arg(long)]
    pub day: Option<PathBuf>,
    /// Mode patterns: the nominal SUP of every mode of this appliance
    #[command(flatten)]
    #[serde(flatten)]
    pub source: ApplianceSource,
    /// Turn-on times to classify, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub t_on: Option<Vec<usize>>,
    /// Detection JSON written by `detect`; its turn-on times are classified
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Sakoe–Chiba band half-width [default: unconstrained]
    #[arg(long)]
    pub band: Option<usize>,
    /// Divide DTW cost by warping-path length before comparing modes
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
    /// Output JSON-lines path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn classify(args: &ClassifyArgs, cfg: Option<&Map<String, Value>>) -> CliResult<()> {
    let args = config::merge(args, cfg, "classify")?;
    let day_path = required(&args.day, "--day")?;
    let mut times = match (&args.t_on, &args.detections) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either --t-on or --detections, not both".into(),
            ))
        }
        (None, None) => return Err(CliError::Usage("missing --t-on or --detections".into())),
        (Some(t), None) => t.clone(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
            let result: DetectionResult = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            result.turn_on_times
        }
    };
    times.sort_unstable();
    times.dedup();
    let appliance = args.source.load()?;
    let patterns: Vec<ModePattern> = nominal_patterns(&appliance).context("patterns")?;
    let day = read_trace(&day_path)?;
    let options = DtwOptions {
        band: args.band,
        normalize: args.normalize.unwrap_or(false),
    };
    let events = times
        .par_iter()
        .map(|&t| classify_with(&day, t, &patterns, &options))
        .collect::<supwatt_core::Result<Vec<_>>>()
        .context("classify")?;
    emit(args.out.as_deref(), &json_lines(&events))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Built-in appliances, comma-separated [default: all]
    #[arg(long, value_delimiter = ',')]
    pub appliances: Option<Vec<String>>,
    /// Override every cycle's duration jitter (fraction in [0, 1))
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Days (one activation each) per household [default: 100]
    #[arg(long)]
    pub days: Option<usize>,
    /// Standard deviation of additive baseline noise in watts [default: 0]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed for all randomness [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sakoe–Chiba band half-width [default: unconstrained]
    #[arg(long)]
    pub band: Option<usize>,
    /// Classify at detected turn-on times instead of ground truth
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub end_to_end: Option<bool>,
    /// End-to-end template length [default: 600]
    #[arg(long)]
    pub n: Option<usize>,
    /// End-to-end threshold fraction δ [default: 0.9]
    #[arg(long)]
    pub delta: Option<f64>,
    /// End-to-end residue merge gap [default: 60]
    #[arg(long)]
    pub min_gap: Option<usize>,
    /// End-to-end match tolerance in samples [default: 30]
    #[arg(long)]
    pub tolerance: Option<usize>,
    /// Output directory for metrics_unnormalized.csv and metrics_normalized.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn evaluate(args: &EvaluateArgs, cfg: Option<&Map<String, Value>>) -> CliResult<()> {
    let args = config::merge(args, cfg, "evaluate")?;
    let out = required(&args.out, "--out")?;
    let names = args
        .appliances
        .clone()
        .unwrap_or_else(|| BUILTIN_APPLIANCES.map(String::from).to_vec());
    let appliances = names
        .iter()
        .map(|name| {
            let model = builtin_appliance(name).context("--appliances")?;
            match args.jitter {
                Some(j) => model.with_jitter(j).context("--jitter"),
                None => Ok(model),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    let days = args.days.unwrap_or(100);
    if days == 0 {
        return Err(CliError::Validation("--days must be at least 1".into()));
    }
    let datasets = intensity_households(
        &appliances,
        days,
        args.seed.unwrap_or(0),
        args.noise.unwrap_or(0.0),
    )
    .context("households")?;
    let defaults = EndToEnd::default();
    let config = ClassificationConfig {
        band: args.band,
        end_to_end: args.end_to_end.unwrap_or(false).then(|| EndToEnd {
            n: args.n.unwrap_or(defaults.n),
            delta: args.delta.unwrap_or(defaults.delta),
            min_gap: args.min_gap.unwrap_or(defaults.min_gap),
            tolerance: args.tolerance.unwrap_or(DEFAULT_TOLERANCE),
        }),
    };
    let report = evaluate_classification(&datasets, &config).context("evaluate")?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(out.display(), e))?;
    emit(
        Some(&out.join("metrics_unnormalized.csv")),
        &metrics_csv(&report, false),
    )?;
    emit(
        Some(&out.join("metrics_normalized.csv")),
        &metrics_csv(&report, true),
    )
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: ApplianceSource,
    /// Template sizes as a:b:step [default: 50:1600:50]
    #[arg(long)]
    pub n: Option<String>,
    /// Single-activation days per size [default: 100]
    #[arg(long)]
    pub days: Option<usize>,
    /// Threshold fraction δ in (0, 1) [default: 0.9]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Residue runs closer than this many samples are merged [default: 60]
    #[arg(long)]
    pub min_gap: Option<usize>,
    /// Mode mix of the simulated days: uniform, high, medium or low [default: uniform]
    #[arg(long)]
    pub intensity: Option<String>,
    /// Template source: drawn (independent mode) or same-mode [default: drawn]
    #[arg(long)]
    pub template: Option<String>,
    /// Standard deviation of additive baseline noise in watts [default: 0]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed for all randomness [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn sweep(args: &SweepArgs, cfg: Option<&Map<String, Value>>) -> CliResult<()> {
    let args = config::merge(args, cfg, "sweep")?;
    let appliance = args.source.load()?;
    let intensity = parse_intensity(args.intensity.as_deref().unwrap_or("uniform"), &appliance)?;
    let template = match args.template.as_deref().unwrap_or("drawn") {
        "drawn" => TemplateSource::Drawn,
        "same-mode" => TemplateSource::SameMode,
        other => {
            return Err(CliError::Validation(format!(
                "--template {other:?}: expected drawn or same-mode"
            )))
        }
    };
    let defaults = SweepConfig::default();
    let config = SweepConfig {
        n_values: match &args.n {
            Some(range) => parse_n_range(range).context("--n")?,
            None => defaults.n_values,
        },
        days: args.days.unwrap_or(defaults.days),
        delta: args.delta.unwrap_or(defaults.delta),
        min_gap: args.min_gap.unwrap_or(defaults.min_gap),
        seed: args.seed.unwrap_or(defaults.seed),
        noise_sigma: args.noise.unwrap_or(defaults.noise_sigma),
        template,
    };
    let report = sweep_pattern_size(&appliance, &intensity, &config).context("sweep")?;
    emit(args.out.as_deref(), &sweep_csv(&report))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RecommendArgs {
    /// Classified events as JSON lines, as written by `classify`
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Tariff schedule JSON [default: built-in illustrative Ontario-style schedule]
    #[arg(long)]
    pub tariff: Option<PathBuf>,
    /// Mode ranking taken from this appliance's nominal energy
    #[command(flatten)]
    #[serde(flatten)]
    pub source: ApplianceSource,
    /// Explicit mode ranking, lightest first, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub ranking: Option<Vec<String>>,
    /// Output JSON-lines path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn recommend_cmd(args: &RecommendArgs, cfg: Option<&Map<String, Value>>) -> CliResult<()> {
    let args = config::merge(args, cfg, "recommend")?;
    let events_path = required(&args.events, "--events")?;
    let ranking = match (&args.ranking, args.source.is_given()) {
        (Some(_), true) => {
            return Err(CliError::Usage(
                "give either --ranking or an appliance, not both".into(),
            ))
        }
        (Some(r), false) => r.clone(),
        (None, true) => args.source.load()?.ranking,
        (None, false) => {
            return Err(CliError::Usage(
                "missing --ranking, --appliance or --supro".into(),
            ))
        }
    };
    let schedule = match &args.tariff {
        Some(path) => TariffSchedule::load(path).context(path.display())?,
        None => TariffSchedule::ontario_example(),
    };
    let text =
        fs::read_to_string(&events_path).map_err(|e| CliError::io(events_path.display(), e))?;
    let recommendations = text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let event = serde_json::from_str(line).map_err(|e| {
                CliError::Validation(format!("{} line {}: {e}", events_path.display(), i + 1))
            })?;
            Ok(recommend(&event, &schedule, &ranking))
        })
        .collect::<CliResult<Vec<_>>>()?;
    emit(args.out.as_deref(), &json_lines(&recommendations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_day_keeps_the_given_name() {
        let (csv, truth) = day_paths(Path::new("out/day.csv"), 1, 0);
        assert_eq!(csv, Path::new("out/day.csv"));
        assert_eq!(truth, Path::new("out/day.truth.json"));
    }

    #[test]
    fn several_days_are_numbered() {
        let (csv, truth) = day_paths(Path::new("day.csv"), 12, 9);
        assert_eq!(csv, Path::new("day-010.csv"));
        assert_eq!(truth, Path::new("day-010.truth.json"));
    }

    #[test]
    fn appliance_source_needs_exactly_one() {
        assert!(matches!(
            ApplianceSource::default().load(),
            Err(CliError::Usage(_))
        ));
        let both = ApplianceSource {
            appliance: Some("washer".into()),
            supro: Some("x.json".into()),
            ..ApplianceSource::default()
        };
        assert!(matches!(both.load(), Err(CliError::Usage(_))));
        let unknown = ApplianceSource {
            appliance: Some("toaster".into()),
            ..ApplianceSource::default()
        };
        assert!(matches!(unknown.load(), Err(CliError::Validation(_))));
    }

    #[test]
    fn intensity_names() {
        let washer = builtin_appliance("washer").unwrap();
        assert_eq!(
            parse_intensity("uniform", &washer).unwrap(),
            washer.uniform_intensity()
        );
        assert!(parse_intensity("high", &washer).is_ok());
        assert!(matches!(
            parse_intensity("extreme", &washer),
            Err(CliError::Validation(_))
        ));
    }
}
