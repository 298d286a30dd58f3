//! Labeled daily trace generation.
//!
//! A SUPRO model expands into a SUP by repeating each phase's cycle list a
//! random number of times within its bounds, jittering every cycle duration.
//! Days place SUPs at turn-on times drawn from an empirical distribution, with
//! the mode of each usage drawn from the household's usage intensity.

mod appliance;
mod day;
mod sampling;
mod supro;

pub use appliance::{builtin_appliance, builtin_turn_on_cdf, ApplianceModel, BUILTIN_APPLIANCES};
pub use day::{
    child_seed, day_seeds, generate_day, generate_day_with, load_truth, save_truth, DayOptions,
    GroundTruthEvent, SimulatedDay,
};
pub use sampling::{
    build_empirical_cdf, sample_mode, sample_turn_on_time, EmpiricalCdf, IntensityLevel,
    UsageIntensity,
};
pub use supro::{
    generate_sup, load_supros, parse_supros, Cycle, Phase, Supro, DEFAULT_DURATION_JITTER,
};
