//! File ingestion, estimation jobs and report output for the command-line tool.

pub mod ingest;
pub mod job;
pub mod report;

pub use ingest::{ingest_cohort, ingest_delimited, ingest_survey, SurveyColumns, Table};
pub use job::{run_estimation_job, EstimationJob, EstimationReport, MethodRow, WeightSummary};
pub use report::{emit_report, error_line, write_weights, ReportFormat};
