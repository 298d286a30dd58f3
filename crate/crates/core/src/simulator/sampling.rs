//! Turn-on time and operation-mode sampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::DAY_SECONDS;

/// Empirical distribution of turn-on times (seconds of day).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    support: Vec<u32>,
    cumulative: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// F(x) = P(X <= x).
    pub fn evaluate(&self, x: u32) -> f64 {
        match self.support.partition_point(|&s| s <= x) {
            0 => 0.0,
            i => self.cumulative[i - 1],
        }
    }

    /// Generalized inverse: the smallest support value with F >= u.
    pub fn inverse(&self, u: f64) -> u32 {
        let i = self.cumulative.partition_point(|&c| c < u);
        self.support[i.min(self.support.len() - 1)]
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.inverse(rng.random::<f64>())
    }
}

pub fn build_empirical_cdf(turn_on_samples: &[u32]) -> Result<EmpiricalCdf> {
    if turn_on_samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&bad) = turn_on_samples.iter().find(|&&t| t as usize >= DAY_SECONDS) {
        return Err(Error::InvalidTurnOn(bad));
    }
    let mut sorted = turn_on_samples.to_vec();
    sorted.sort_unstable();
    let total = sorted.len() as f64;
    let mut support = Vec::new();
    let mut cumulative = Vec::new();
    for (i, &t) in sorted.iter().enumerate() {
        if sorted.get(i + 1) != Some(&t) {
            support.push(t);
            cumulative.push((i + 1) as f64 / total);
        }
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(EmpiricalCdf {
        support,
        cumulative,
    })
}

/// Draws a turn-on time by inverse transform sampling.
pub fn sample_turn_on_time(cdf: &EmpiricalCdf, seed: u64) -> u32 {
    cdf.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// A household's distribution over an appliance's operation modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct UsageIntensity {
    mode_weights: BTreeMap<String, f64>,
}

/// Usage-intensity levels; the level names which mode gets the dominant share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityLevel {
    High,
    Medium,
    Low,
}

impl IntensityLevel {
    pub const ALL: [IntensityLevel; 3] = [Self::High, Self::Medium, Self::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::High => "high",
            Self::Medium => "medium",
            Self::Low => "low",
        }
    }
}

impl std::str::FromStr for IntensityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Self::High),
            "medium" => Ok(Self::Medium),
            "low" => Ok(Self::Low),
            other => Err(Error::InvalidIntensity(format!("unknown level {other:?}"))),
        }
    }
}

impl UsageIntensity {
    pub fn new(mode_weights: BTreeMap<String, f64>) -> Result<Self> {
        if mode_weights.is_empty() {
            return Err(Error::InvalidIntensity("no modes".into()));
        }
        if let Some((m, w)) = mode_weights
            .iter()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::InvalidIntensity(format!("weight {w} for mode {m}")));
        }
        let sum: f64 = mode_weights.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidIntensity(format!("weights sum to {sum}")));
        }
        Ok(Self { mode_weights })
    }

    pub fn single(mode: impl Into<String>) -> Self {
        Self {
            mode_weights: BTreeMap::from([(mode.into(), 1.0)]),
        }
    }

    /// Three-mode default split: 0.6 on the mode the level points at, 0.2 on
    /// each of the others. `ranking` lists modes lightest to heaviest.
    pub fn for_level(level: IntensityLevel, ranking: &[String]) -> Result<Self> {
        if ranking.len() != 3 {
            return Err(Error::InvalidIntensity(format!(
                "level presets need exactly three modes, got {}; give explicit weights",
                ranking.len()
            )));
        }
        let dominant = match level {
            IntensityLevel::Low => 0,
            IntensityLevel::Medium => 1,
            IntensityLevel::High => 2,
        };
        let weights = ranking
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), if i == dominant { 0.6 } else { 0.2 }))
            .collect();
        Self::new(weights)
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.mode_weights
    }

    /// Inverse-CDF draw over modes in lexicographic order.
    pub fn mode_for(&self, u: f64) -> &str {
        let mut cum = 0.0;
        let mut last_positive = None;
        for (mode, &w) in &self.mode_weights {
            cum += w;
            if w > 0.0 {
                last_positive = Some(mode.as_str());
            }
            if cum >= u {
                return mode;
            }
        }
        // rounding left the total just under u
        last_positive.unwrap_or_else(|| self.mode_weights.keys().next_back().unwrap())
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        self.mode_for(rng.random::<f64>())
    }
}

impl TryFrom<BTreeMap<String, f64>> for UsageIntensity {
    type Error = Error;

    fn try_from(value: BTreeMap<String, f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<UsageIntensity> for BTreeMap<String, f64> {
    fn from(value: UsageIntensity) -> Self {
        value.mode_weights
    }
}

pub fn sample_mode(intensity: &UsageIntensity, seed: u64) -> String {
    intensity
        .sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
        .to_owned()
}
