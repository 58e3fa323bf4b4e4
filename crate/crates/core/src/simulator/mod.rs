//! Replicated lockstep simulation: environment schedule, regret ledger,
//! round classification, traces and summaries.

pub mod bounds;
pub mod config;
pub mod ledger;
pub mod run;
pub mod summary;
pub mod trace;

pub use config::{checkpoints, AgentMode, CdOverrides, RunConfig};
pub use ledger::RegretLedger;
pub use run::{
    optimal_matchings, run, run_replication, stream_rng, ClassCounts, ReplicationResult,
    RoundClass, RunResult,
};
pub use summary::{
    evaluate_detection, fit_log, quantile, summarize, LogFit, Summary, SUMMARY_SCHEMA,
};
pub use trace::{read_trace, write_trace, write_trace_file, TraceRow, TRACE_SCHEMA};
