pub mod baseline;
pub mod compare;
pub mod cv;
pub mod folds;
pub mod metrics;

pub use baseline::{correlation_with_hy, misclassification_profile, total_score_baseline, Correlation, MisclassificationProfile};
pub use compare::{compare_classifiers, report_label, Comparison, MethodSummary};
pub use cv::{
    fit_selector, run_nested_cv, tune_model, Aggregate, CiUnit, CvConfig, CvReport, Metric, MetricRecord, Misclassified,
    SelectorKind,
};
pub use folds::{make_fold_plan, stratified_assignment, subject_groups, FoldPlan, Scheme};
pub use metrics::{confusion_metrics, roc_auc, Confusion};
