//! Corpus ingestion, class rebalancing, split/fold planning and the
//! manifest ledger.

mod balance;
mod ingest;
mod labels;
mod manifest;
mod preprocess;
mod split;

pub use balance::balance;
pub use ingest::{ingest, Ingested};
pub use labels::{class_index, ClassLabel};
pub use manifest::{
    read_manifest, write_manifest, DatasetManifest, Provenance, SampleRecord, Split,
    MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use preprocess::{
    preprocess_all, processed_rel_path, Failure, PreprocessConfig, Preprocessed,
    DEFAULT_TARGET_SIZE,
};
pub use split::{
    apply_fold_plan, kfold_plan, stratified_split, test_count, FoldPlan, DEFAULT_FOLDS,
    DEFAULT_TEST_FRACTION,
};
