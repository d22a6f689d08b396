//! Split protocols and classification metrics.

mod metrics;
mod split;

pub use self::metrics::{
    classify, evaluate, evaluate_datasets, f1_report, micro_f1, pr_curve, write_pr_curve, Confusion,
    DatasetReport, EvalReport, MicroReport, PrPoint,
};
pub use self::split::{
    remainder_split, split, split_cold_start, split_held_out, Side, Split, SplitMode, SplitSpec,
    COLD_START_TRAIN_FRACTION,
};
