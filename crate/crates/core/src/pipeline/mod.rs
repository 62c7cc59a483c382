//! Dataset generation, training of the four network variants, prediction
//! and the evaluation protocol.

mod dataset;
mod eval;
mod report;
mod train;

pub use dataset::{
    generate_dataset, generate_test_set, ier_batch, pa_batch, read_batch, read_dataset, read_manifest, sbm_batch,
    write_dataset, DatasetPair, Ensemble, GenConfig, Manifest, PairMeta, PairParams, StoredDataset, BATCHES_DIR,
    INPUTS_FILE, MANIFEST_FILE, SCHEMA_VERSION, TARGETS_FILE,
};
pub use eval::{
    binarize, evaluate, mean_spectrum, predict_frechet, predict_frechet_at, summarize, EvalInputs, EvalRecord,
    EvalSettings, EvalSummary, Extremum, MatrixMap, ModelId, BINARIZE_THRESHOLD, REL_EPSILON, REL_STATS_WINDOW,
};
pub use report::{
    evaluate_contenders, render_report, run_benchmark, write_report, Contender, EvalConfig, CURVE_ABS_LEN,
    CURVE_HEADER, CURVE_REL_LEN, TABLE_HEADER,
};
pub use train::{
    train_variant, train_variant_with, write_loss_log, TrainConfig, TrainOutcome, TrainingPair, Variant,
};
