//! Corpus ingestion, splitting, random grid search and report emission.

mod corpus;
mod report;
mod search;
mod split;
mod synthetic;

pub use corpus::{
    load_crisislex, load_figure_eight, CrisisLexColumns, CrisisLexOptions, Corpus, LabelMapping, RawExample,
};
pub use report::{emit_report, parse_report_csv, IterationRecord, ReportConfig, ReportFormat, SimulationReport};
pub use search::{grid_search, rank_runs, ranking_to_string, write_ranking, RankedRun, SearchSpace};
pub use split::{split, Split, SplitSpec};
pub use synthetic::{synthetic_corpus, MARKER};
