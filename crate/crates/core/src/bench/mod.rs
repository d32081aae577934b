//! Workload generation and statistical reporting.

pub mod generate;
pub mod campaign;
pub mod summary;

pub use generate::{generate_mixed, generate_suite, Family, GeneratorSpec};
pub use campaign::{run_campaign, CampaignReport, ModeResult};
pub use summary::{summarize, StatsSummary};
