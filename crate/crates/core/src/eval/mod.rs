//! Metrics, dataset loading and the benchmark and timing experiments.

mod dataset;
mod harness;
mod metrics;

pub use dataset::{load_dataset, parse_dataset, DatasetError, DatasetExample};
pub use harness::{
    pass_rate, permute_values, resize_table, reusability_experiment, run_benchmark,
    scalability_experiment, EvalError, ExampleScore, MetricReport, ReuseReport, ScalePoint,
    ScaleReport, TableRun,
};
pub use metrics::{
    bleu, corpus_bleu, meteor, meteor_from_counts, rouge_l_f1, tokenize, BleuStats, METEOR_ALPHA,
    METEOR_BETA, METEOR_GAMMA,
};
