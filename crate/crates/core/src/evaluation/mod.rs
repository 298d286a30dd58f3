//! Scoring against simulator ground truth, pattern-size sweeps, and
//! demand-response advice.

mod classify_eval;
mod matching;
mod metrics;
mod sweep;
mod tariff;

pub use classify_eval::{
    evaluate_classification, intensity_households, metrics_csv, nominal_patterns,
    ClassificationConfig, ClassificationReport, EndToEnd, HouseholdDataset, MetricsTable, POOLED,
};
pub use matching::{match_detections, MatchReport, DEFAULT_TOLERANCE};
pub use metrics::{prf1, Confusion, ModeMetrics, Prf1};
pub use sweep::{
    parse_n_range, sweep_csv, sweep_pattern_size, SweepConfig, SweepReport, SweepRow,
    TemplateSource,
};
pub use tariff::{recommend, Advice, Recommendation, TariffInterval, TariffSchedule, Tier};
