//! Cross-dataset experiment: the model/dataset matrix, recall decline,
//! reports, and file-based orchestration of an external trainer.

pub mod collect;
pub mod config;
pub mod decline;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod stub;
pub mod table;

pub use collect::{collect_results, expected_ids, per_image_csv, score_predictions, Collected};
pub use config::{DatasetConfig, FitOn, RunConfig, TrainerConfig};
pub use decline::{
    compute_declines, declines_csv, mean_decline, rank_declines, worst_k, DeclineMode,
    DeclineRecord, PairKey,
};
pub use manifest::{
    plan_experiment, DatasetPaths, ManifestMode, PlanOptions, PredictSplit, RunManifest,
    TrainerParams,
};
pub use pipeline::{run_pipeline, write_reports, PipelineOptions, PipelineSummary, Stage};
pub use report::{
    render_table2, summarize_table3, ArmComparison, GridCell, Metric, Stratum, Table2, Table3,
    DEFAULT_WORST, EMPHASIS_THRESHOLD,
};
pub use stub::run_stub_trainer;
pub use table::{table2_fixture, Arm, CellScores, ExperimentTable, PairResult};
