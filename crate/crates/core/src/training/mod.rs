//! Multi-step classification head, training loop, metrics and bootstrap
//! confidence intervals.

mod bootstrap;
mod check;
mod gi;
mod metrics;
mod split;
mod trainer;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapCi};
pub use check::{gradcheck_model, GradcheckOptions};
pub use gi::{
    argmax, effective_k, ensemble_probabilities, forward_gi, gi_head_loss, gi_loss, gi_selection,
    many_to_one_logits, many_to_one_loss, predict, predict_batch,
};
pub use metrics::{evaluate, metrics_from_probabilities, top_k_hit, Metrics};
pub use split::{check_disjoint, split_dataset, EvalSplit};
pub use trainer::{train, EpochStats, TrainConfig, TrainOutcome, TrainReport, REPORT_VERSION};
