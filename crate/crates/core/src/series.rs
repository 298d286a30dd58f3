//! Power-trace value types and the trace CSV format.
//!
//! A trace file looks like
//!
//! ```text
//! # rate=1 epoch=0
//! t,watts
//! 0,0
//! 1,500
//! ```
//!
//! `t` is the sample index counted from the epoch. Traces are gap-free: row `i`
//! must carry `t = i`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds in a day; the number of samples of a 1 Hz daily trace.
pub const DAY_SECONDS: usize = 86_400;

/// A uniformly sampled instantaneous power trace in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    samples: Vec<f64>,
    sample_rate: f64,
    epoch: f64,
}

impl PowerSeries {
    pub fn new(samples: Vec<f64>, sample_rate: f64, epoch: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !epoch.is_finite() {
            return Err(Error::InvalidConfig("epoch must be finite".into()));
        }
        if let Some((i, &w)) = samples
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::NegativeWatts { line: i, value: w });
        }
        Ok(Self {
            samples,
            sample_rate,
            epoch,
        })
    }

    /// A 1 Hz series starting at midnight.
    pub fn from_watts(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, 1.0, 0.0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn epoch(&self) -> f64 {
        self.epoch
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Returns samples `[start, start + len)` with the epoch advanced accordingly.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let window = checked_window(&self.samples, start, len)?;
        Ok(Self {
            samples: window.to_vec(),
            sample_rate: self.sample_rate,
            epoch: self.epoch + start as f64 / self.sample_rate,
        })
    }

    pub fn max_value(&self) -> f64 {
        max_of(&self.samples)
    }

    /// Total energy in watt-seconds.
    pub fn energy(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.sample_rate
    }
}

pub(crate) fn checked_window(samples: &[f64], start: usize, len: usize) -> Result<&[f64]> {
    match start.checked_add(len) {
        Some(end) if end <= samples.len() => Ok(&samples[start..end]),
        _ => Err(Error::OutOfRange {
            start,
            len,
            available: samples.len(),
        }),
    }
}

pub(crate) fn max_of(samples: &[f64]) -> f64 {
    samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Free-function form of [`PowerSeries::slice`].
pub fn slice(series: &PowerSeries, start: usize, len: usize) -> Result<PowerSeries> {
    series.slice(start, len)
}

/// Largest sample of `series`. Series are never empty, so this always succeeds
/// for a constructed [`PowerSeries`]; the raw-slice form reports emptiness.
pub fn max_value(series: &PowerSeries) -> f64 {
    series.max_value()
}

pub fn max_value_of(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(max_of(samples))
}

/// One appliance run from turn-on to turn-off, tagged with its operation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sup {
    pub appliance_id: String,
    pub mode_id: String,
    samples: Vec<f64>,
}

impl Sup {
    pub fn new(
        appliance_id: impl Into<String>,
        mode_id: impl Into<String>,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some((i, &w)) = samples
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::NegativeWatts { line: i, value: w });
        }
        Ok(Self {
            appliance_id: appliance_id.into(),
            mode_id: mode_id.into(),
            samples,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().sum()
    }
}

/// The matching template: the first `n` samples of a generated SUP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePattern {
    pub appliance_id: String,
    pub source_mode_id: String,
    samples: Vec<f64>,
}

impl ReferencePattern {
    /// Builds a template from raw samples, e.g. one read from a trace file.
    pub fn from_samples(
        appliance_id: impl Into<String>,
        source_mode_id: impl Into<String>,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let sup = Sup::new(appliance_id, source_mode_id, samples)?;
        Ok(Self {
            appliance_id: sup.appliance_id,
            source_mode_id: sup.mode_id,
            samples: sup.samples,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Template length `n`.
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn max_value(&self) -> f64 {
        max_of(&self.samples)
    }
}

/// Takes the first `n` samples of `sup` as a reference pattern.
pub fn make_reference_pattern(sup: &Sup, n: usize) -> Result<ReferencePattern> {
    if n == 0 {
        return Err(Error::OutOfRange {
            start: 0,
            len: 0,
            available: sup.len(),
        });
    }
    let window = checked_window(sup.samples(), 0, n)?;
    Ok(ReferencePattern {
        appliance_id: sup.appliance_id.clone(),
        source_mode_id: sup.mode_id.clone(),
        samples: window.to_vec(),
    })
}

/// Trace file formats understood by [`load_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    /// `# rate=<Hz> epoch=<s>` metadata line, `t,watts` header, one row per sample.
    #[default]
    Csv,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown trace format {other:?}"
            ))),
        }
    }
}

pub fn load_series(path: impl AsRef<Path>, format: TraceFormat) -> Result<PowerSeries> {
    let text = fs::read_to_string(path)?;
    match format {
        TraceFormat::Csv => parse_csv(&text),
    }
}

pub fn save_series(series: &PowerSeries, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_csv(series))?;
    Ok(())
}

/// Renders the canonical CSV form of a trace.
pub fn to_csv(series: &PowerSeries) -> String {
    let mut out = String::with_capacity(series.len() * 10 + 32);
    let _ = writeln!(
        out,
        "# rate={} epoch={}",
        series.sample_rate(),
        series.epoch()
    );
    out.push_str("t,watts\n");
    for (t, w) in series.samples().iter().enumerate() {
        let _ = writeln!(out, "{t},{w}");
    }
    out
}

pub fn parse_csv(text: &str) -> Result<PowerSeries> {
    let mut rate = None;
    let mut epoch = None;
    let mut header_seen = false;
    let mut samples = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split_whitespace() {
                let (key, value) = match field.split_once('=') {
                    Some(kv) => kv,
                    None => continue,
                };
                let parsed: f64 = value.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad value for {key}: {value:?}"),
                })?;
                match key {
                    "rate" => rate = Some(parsed),
                    "epoch" => epoch = Some(parsed),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line != "t,watts" {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header `t,watts`, found {line:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let (t, w) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected `t,watts` row, found {line:?}"),
        })?;
        let t: usize = t.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad sample index {t:?}"),
        })?;
        if t != samples.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected sample index {}, found {t}", samples.len()),
            });
        }
        let w: f64 = w.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad power value {w:?}"),
        })?;
        if !w.is_finite() || w < 0.0 {
            return Err(Error::NegativeWatts {
                line: line_no,
                value: w,
            });
        }
        samples.push(w);
    }

    if samples.is_empty() {
        return Err(Error::EmptySeries);
    }
    PowerSeries::new(samples, rate.unwrap_or(1.0), epoch.unwrap_or(0.0))
}
