//! Monte-Carlo experiment driver: scenario files, trial execution, CSV
//! output and the figure presets.

mod csv;
mod presets;
mod runner;
mod scenario;

pub use csv::{format_sig, parse_csv, write_csv, CSV_HEADER};
pub use presets::{preset, PRESET_FIGURES};
pub use runner::{run_scenario, run_trial, summarize, ResultRow, RunOptions, SummaryRow, TrialSeeds};
pub use scenario::{
    Algorithm, ChannelSection, CovarianceReference, GridSection, RfChains, Scenario, SolverSection, SweepPoint,
    TrainingSection,
};
