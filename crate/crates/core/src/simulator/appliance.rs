use std::collections::BTreeMap;

use serde::Deserialize;

use super::sampling::{build_empirical_cdf, EmpiricalCdf, IntensityLevel, UsageIntensity};
use super::supro::{parse_supros, Supro};
use crate::error::{Error, Result};

/// Names of the appliances shipped as fixtures.
pub const BUILTIN_APPLIANCES: [&str; 3] = ["dishwasher", "washer", "dryer"];

const DISHWASHER: &str = include_str!("../../fixtures/dishwasher.json");
const WASHER: &str = include_str!("../../fixtures/washer.json");
const DRYER: &str = include_str!("../../fixtures/dryer.json");
const TURN_ON_TIMES: &str = include_str!("../../fixtures/turn_on_times.json");

/// Everything the simulator needs to know about one appliance.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceModel {
    pub appliance_id: String,
    pub modes: BTreeMap<String, Supro>,
    /// Mode ids ordered lightest to heaviest by nominal energy.
    pub ranking: Vec<String>,
    pub turn_on: EmpiricalCdf,
}

impl ApplianceModel {
    pub fn new(supros: Vec<Supro>, turn_on: EmpiricalCdf) -> Result<Self> {
        let first = supros
            .first()
            .ok_or_else(|| Error::InvalidSupro("no models".into()))?;
        let appliance_id = first.appliance_id.clone();
        let mut modes = BTreeMap::new();
        for s in supros {
            s.validate()?;
            if s.appliance_id != appliance_id {
                return Err(Error::InvalidSupro(format!(
                    "mixed appliances {appliance_id:?} and {:?}",
                    s.appliance_id
                )));
            }
            let mode = s.mode_id.clone();
            if modes.insert(mode.clone(), s).is_some() {
                return Err(Error::InvalidSupro(format!("duplicate mode {mode:?}")));
            }
        }
        let mut energies = modes
            .iter()
            .map(|(m, s)| Ok((s.nominal_sup()?.energy(), m.clone())))
            .collect::<Result<Vec<_>>>()?;
        energies.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        Ok(Self {
            appliance_id,
            modes,
            ranking: energies.into_iter().map(|(_, m)| m).collect(),
            turn_on,
        })
    }

    pub fn mode_ids(&self) -> impl Iterator<Item = &str> {
        self.modes.keys().map(String::as_str)
    }

    /// Copy with every cycle's duration jitter replaced.
    pub fn with_jitter(&self, jitter: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::InvalidConfig(format!(
                "jitter must be in [0, 1), got {jitter}"
            )));
        }
        let mut out = self.clone();
        for s in out.modes.values_mut() {
            *s = s.with_jitter(jitter);
        }
        Ok(out)
    }

    pub fn intensity(&self, level: IntensityLevel) -> Result<UsageIntensity> {
        UsageIntensity::for_level(level, &self.ranking)
    }

    /// Uniform weights over all modes.
    pub fn uniform_intensity(&self) -> UsageIntensity {
        let w = 1.0 / self.modes.len() as f64;
        let mut weights: BTreeMap<String, f64> =
            self.modes.keys().map(|m| (m.clone(), w)).collect();
        // absorb rounding so the weights sum to exactly 1
        let rest: f64 = weights.values().skip(1).sum();
        if let Some(first) = weights.values_mut().next() {
            *first = 1.0 - rest;
        }
        UsageIntensity::new(weights).expect("uniform weights are valid")
    }
}

/// Illustrative turn-on distribution shared by the shipped appliances.
pub fn builtin_turn_on_cdf() -> EmpiricalCdf {
    #[derive(Deserialize)]
    struct Times {
        seconds_of_day: Vec<u32>,
    }
    let times: Times = serde_json::from_str(TURN_ON_TIMES).expect("fixture parses");
    build_empirical_cdf(&times.seconds_of_day).expect("fixture is valid")
}

pub fn builtin_appliance(name: &str) -> Result<ApplianceModel> {
    let text = match name {
        "dishwasher" => DISHWASHER,
        "washer" => WASHER,
        "dryer" => DRYER,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown appliance {other:?}; expected one of {BUILTIN_APPLIANCES:?}"
            )))
        }
    };
    ApplianceModel::new(parse_supros(text)?, builtin_turn_on_cdf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::supro::generate_sup;

    #[test]
    fn builtins_load_with_three_ranked_modes() {
        for name in BUILTIN_APPLIANCES {
            let a = builtin_appliance(name).unwrap();
            assert_eq!(a.appliance_id, name);
            assert_eq!(a.ranking, ["light", "medium", "heavy"], "{name}");
        }
        assert!(builtin_appliance("toaster").is_err());
    }

    #[test]
    fn light_dishwasher_follows_state_timings() {
        // wash until minute 70, rinse until 97, dry until 108
        let dw = builtin_appliance("dishwasher").unwrap();
        let nominal = dw.modes["light"].nominal_sup().unwrap();
        assert_eq!(nominal.len(), 108 * 60);
        let sup = generate_sup(&dw.modes["light"], 4).unwrap();
        let minutes = sup.len() as f64 / 60.0;
        assert!((minutes - 108.0).abs() < 4.0, "{minutes}");
    }

    #[test]
    fn uniform_intensity_sums_to_one() {
        let a = builtin_appliance("washer").unwrap();
        let u = a.uniform_intensity();
        assert_eq!(u.weights().values().sum::<f64>(), 1.0);
    }
}
