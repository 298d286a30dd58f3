use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Sup;

/// Per-cycle duration variation used when a SUPRO file does not specify one.
pub const DEFAULT_DURATION_JITTER: f64 = 0.05;

fn default_jitter() -> f64 {
    DEFAULT_DURATION_JITTER
}

/// A stretch of stable power draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub duration_s: f64,
    pub watts: f64,
    #[serde(default = "default_jitter")]
    pub duration_jitter: f64,
}

/// A group of cycles repeated between `rep_lower` and `rep_upper` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub rep_lower: u32,
    pub rep_upper: u32,
    pub cycles: Vec<Cycle>,
}

/// Declarative model of one appliance run in one operation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supro {
    #[serde(rename = "appliance")]
    pub appliance_id: String,
    #[serde(rename = "mode")]
    pub mode_id: String,
    pub phases: Vec<Phase>,
}

impl Supro {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::InvalidSupro(format!(
                "{}/{}: {msg}",
                self.appliance_id, self.mode_id
            )))
        };
        if self.phases.is_empty() {
            return bad("no phases".into());
        }
        for (p, phase) in self.phases.iter().enumerate() {
            if phase.cycles.is_empty() {
                return bad(format!("phase {p} has no cycles"));
            }
            if phase.rep_lower < 1 || phase.rep_upper < phase.rep_lower {
                return bad(format!(
                    "phase {p} repetition bounds [{}, {}]",
                    phase.rep_lower, phase.rep_upper
                ));
            }
            for (c, cycle) in phase.cycles.iter().enumerate() {
                if !(cycle.duration_s.is_finite() && cycle.duration_s > 0.0) {
                    return bad(format!(
                        "phase {p} cycle {c}: duration {}",
                        cycle.duration_s
                    ));
                }
                if !(cycle.watts.is_finite() && cycle.watts >= 0.0) {
                    return bad(format!("phase {p} cycle {c}: watts {}", cycle.watts));
                }
                if !(0.0..1.0).contains(&cycle.duration_jitter) {
                    return bad(format!(
                        "phase {p} cycle {c}: jitter {}",
                        cycle.duration_jitter
                    ));
                }
            }
        }
        Ok(())
    }

    /// Copy of this model with every cycle's jitter replaced by `jitter`.
    pub fn with_jitter(&self, jitter: f64) -> Self {
        let mut out = self.clone();
        for cycle in out.phases.iter_mut().flat_map(|p| p.cycles.iter_mut()) {
            cycle.duration_jitter = jitter;
        }
        out
    }

    /// The SUP this model produces with no repetition or duration randomness:
    /// every phase at its lower repetition bound, every cycle at nominal length.
    pub fn nominal_sup(&self) -> Result<Sup> {
        self.validate()?;
        let mut samples = Vec::new();
        for phase in &self.phases {
            for _ in 0..phase.rep_lower {
                for cycle in &phase.cycles {
                    push_cycle(&mut samples, cycle.duration_s.round(), cycle.watts);
                }
            }
        }
        Sup::new(&self.appliance_id, &self.mode_id, samples).map_err(|_| {
            Error::InvalidSupro(format!(
                "{}/{}: all cycles round to zero samples",
                self.appliance_id, self.mode_id
            ))
        })
    }

    pub fn generate_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sup> {
        self.validate()?;
        let mut samples = Vec::new();
        for phase in &self.phases {
            let reps = rng.random_range(phase.rep_lower..=phase.rep_upper);
            for _ in 0..reps {
                for cycle in &phase.cycles {
                    let j = cycle.duration_jitter;
                    let u = if j > 0.0 {
                        rng.random_range(-j..=j)
                    } else {
                        0.0
                    };
                    push_cycle(
                        &mut samples,
                        (cycle.duration_s * (1.0 + u)).round(),
                        cycle.watts,
                    );
                }
            }
        }
        Sup::new(&self.appliance_id, &self.mode_id, samples).map_err(|_| {
            Error::InvalidSupro(format!(
                "{}/{}: all cycles round to zero samples",
                self.appliance_id, self.mode_id
            ))
        })
    }
}

fn push_cycle(samples: &mut Vec<f64>, len: f64, watts: f64) {
    // 1 Hz: one sample per second
    samples.extend(std::iter::repeat_n(watts, len as usize));
}

/// Synthesizes one SUP from `supro`, deterministic in `seed`.
pub fn generate_sup(supro: &Supro, seed: u64) -> Result<Sup> {
    supro.generate_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Reads a SUPRO file holding either a single model or an array of models.
pub fn load_supros(path: impl AsRef<Path>) -> Result<Vec<Supro>> {
    parse_supros(&fs::read_to_string(path)?)
}

pub fn parse_supros(text: &str) -> Result<Vec<Supro>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Supro),
        Many(Vec<Supro>),
    }
    let supros = match serde_json::from_str(text)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    if supros.is_empty() {
        return Err(Error::InvalidSupro("file holds no models".into()));
    }
    for s in &supros {
        s.validate()?;
    }
    Ok(supros)
}
