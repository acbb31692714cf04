//! Library side of the `fedgmc` command-line tool.

mod commands;
mod config;

pub use commands::{
    eval, format_report, gen_data, model_path, report, run, ClientMetrics, EvalSummary, GraphSummary, ReportInput,
    ReportRow, RunSummary, CONFIG_FILE, EMBEDDINGS_DIR, HISTORY_FILE, MODELS_DIR, SUMMARY_FILE,
};
pub use config::{DataSection, DataSource, FederationSection, OptimSection, OutputSection, RunConfig};
