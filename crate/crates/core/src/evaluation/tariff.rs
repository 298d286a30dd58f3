use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classification::ClassifiedEvent;
use crate::error::{Error, Result};
use crate::series::DAY_SECONDS;

const ONTARIO: &str = include_str!("../../fixtures/tariff_ontario.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    OnPeak,
    MidPeak,
    OffPeak,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OnPeak => "on-peak",
            Self::MidPeak => "mid-peak",
            Self::OffPeak => "off-peak",
        })
    }
}

/// `[start, end)` in seconds of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TariffInterval {
    pub start: usize,
    pub end: usize,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct TariffSchedule {
    intervals: Vec<TariffInterval>,
}

#[derive(Deserialize)]
struct RawSchedule {
    intervals: Vec<TariffInterval>,
}

impl TryFrom<RawSchedule> for TariffSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        Self::new(raw.intervals)
    }
}

impl TariffSchedule {
    /// Intervals must tile `[0, 86400)` in order and include off-peak time.
    pub fn new(intervals: Vec<TariffInterval>) -> Result<Self> {
        let mut expected = 0;
        for iv in &intervals {
            if iv.start != expected || iv.end <= iv.start {
                return Err(Error::InvalidSchedule(format!(
                    "interval [{}, {}) does not continue from {expected}",
                    iv.start, iv.end
                )));
            }
            expected = iv.end;
        }
        if expected != DAY_SECONDS {
            return Err(Error::InvalidSchedule(format!(
                "intervals end at {expected}, not {DAY_SECONDS}"
            )));
        }
        if !intervals.iter().any(|iv| iv.tier == Tier::OffPeak) {
            return Err(Error::InvalidSchedule(
                "no off-peak interval to shift into".into(),
            ));
        }
        Ok(Self { intervals })
    }

    /// Illustrative Ontario-style time-of-use schedule shipped with the crate.
    pub fn ontario_example() -> Self {
        serde_json::from_str(ONTARIO).expect("fixture is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn intervals(&self) -> &[TariffInterval] {
        &self.intervals
    }

    /// Tier at a second of day; times past midnight wrap around.
    pub fn tier_at(&self, t: usize) -> Tier {
        let t = t % DAY_SECONDS;
        self.intervals
            .iter()
            .find(|iv| iv.start <= t && t < iv.end)
            .expect("intervals tile the day")
            .tier
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Advice {
    ShiftEarlier,
    ShiftLater,
    UseLighterMode,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub t_on: usize,
    pub mode: String,
    pub tier: Tier,
    /// `[None]` alone, or any of the shift and lighter-mode advices.
    pub advice: Vec<Advice>,
    /// Suggested off-peak turn-on time when a shift is advised.
    pub suggested_t_on: Option<usize>,
    pub detail: String,
}

fn clock(t: usize) -> String {
    format!("{:02}:{:02}", t / 3600, t % 3600 / 60)
}

/// Demand-response advice for one classified activation.
///
/// Outside off-peak time, advise moving the turn-on to the nearest off-peak
/// boundary: the end of the previous off-peak interval or the start of the
/// next one, earlier only if strictly closer. Independently, advise a lighter
/// mode unless `chosen_mode` is already the lightest in `mode_ranking`
/// (lightest first).
pub fn recommend(
    event: &ClassifiedEvent,
    schedule: &TariffSchedule,
    mode_ranking: &[String],
) -> Recommendation {
    let t = event.t_on % DAY_SECONDS;
    let tier = schedule.tier_at(t);
    let mut advice = Vec::new();
    let mut suggested_t_on = None;
    let mut detail = Vec::new();

    if tier != Tier::OffPeak {
        let earlier = schedule
            .intervals()
            .iter()
            .filter(|iv| iv.tier == Tier::OffPeak && iv.end <= t)
            .map(|iv| iv.end)
            .max();
        let later = schedule
            .intervals()
            .iter()
            .filter(|iv| iv.tier == Tier::OffPeak && iv.start > t)
            .map(|iv| iv.start)
            .min();
        let shift = match (earlier, later) {
            (Some(e), Some(l)) if t - e < l - t => Some((Advice::ShiftEarlier, e - 1)),
            (_, Some(l)) => Some((Advice::ShiftLater, l)),
            (Some(e), None) => Some((Advice::ShiftEarlier, e - 1)),
            (None, None) => None,
        };
        if let Some((a, target)) = shift {
            advice.push(a);
            suggested_t_on = Some(target);
            let word = if a == Advice::ShiftEarlier {
                "before"
            } else {
                "at or after"
            };
            detail.push(format!(
                "{} is {tier}; start {word} {} (off-peak)",
                clock(t),
                clock(target + usize::from(a == Advice::ShiftEarlier))
            ));
        }
    }
    let lightest = mode_ranking.first();
    if lightest.is_some_and(|l| *l != event.chosen_mode) {
        advice.push(Advice::UseLighterMode);
        detail.push(format!(
            "mode {} is not the lightest; consider {}",
            event.chosen_mode,
            lightest.expect("checked above")
        ));
    }
    if advice.is_empty() {
        advice.push(Advice::None);
        detail.push(format!(
            "{} is off-peak and mode {} is the lightest",
            clock(t),
            event.chosen_mode
        ));
    }
    Recommendation {
        t_on: event.t_on,
        mode: event.chosen_mode.clone(),
        tier,
        advice,
        suggested_t_on,
        detail: detail.join("; "),
    }
}
