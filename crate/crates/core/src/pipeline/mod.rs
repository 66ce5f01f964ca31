//! The four attack stages and the evaluation protocols around them.
//!
//! Stages only ever look at [`crate::traceio::SpltMatrix`] views of a trace,
//! so packet flags such as `spoofed` are invisible to them.

mod activity;
pub mod artifacts;
mod classify;
mod detect;
mod eval;
mod identify;
mod types;

pub use activity::{
    activity_labels_at, annotated_activity, build_snapshots, grid_times, label_runs, stage4_infer, stage4_train,
    Stage4Model, Stage4Output, DEFAULT_ALPHA, DEFAULT_GRID_S,
};
pub use classify::{
    annotated_segments, classify_segment, fit_state_classifier, stage3_classify, stage3_dataset, stage3_train,
    SegmentAlign, Stage3Model, Stage3Params, StateClassifier, StatePredictor,
};
pub use detect::{
    group_by_identity, mean_activity_duration, resolve_window, segment_states, stage2_dataset, stage2_detect,
    stage2_train, timeline_counts, Detector, Stage2Model, WindowChoice,
};
pub use eval::{cross_validate, holdout_eval, holdout_predictions, stratified_folds, stratified_holdout, EvalOutcome};
pub use identify::{identify_trace, stage1_dataset, stage1_identify, stage1_train, Stage1Model};
pub use types::{Deployment, Position, Snapshot, StateSegment, TransitionSeries};

/// Product of per-stage success rates: an upper bound on the chance that
/// the whole cascade is right for a given activity.
pub fn cascade_bound(stage_rates: &[f64]) -> f64 {
    stage_rates.iter().product()
}
