//! CSV ingestion, sample construction and summary statistics.

mod record;
mod sample;

pub use record::{load_panel, read_records, write_records, RawRecord, COLUMNS};
pub use sample::{
    construct_sample, records_from_panels, summarize, PipelineConfig, PipelineReport, Stat, Summary, RULES,
};
