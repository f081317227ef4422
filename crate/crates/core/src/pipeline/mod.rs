//! Corpus plumbing: synthetic data, file formats and the evaluation harness.

mod eval;
mod io;
mod synth;

pub use eval::{run_evaluation, EvalConfig, EvalMode, EvalReport, EvalRow, EvalVideo};
pub use io::{
    read_embeddings, read_json, read_loss_csv, read_manifest, read_pairs_csv, read_trace_csv, write_embeddings,
    write_json, write_loss_csv, write_manifest, write_pairs_csv, write_text, write_trace_csv, CorpusManifest,
    ManifestVideo, PairRecord, Split,
};
pub use synth::{
    generate_synthetic_corpus, synthetic_preference_pairs, SynthConfig, SyntheticCorpus, SyntheticVideo,
    SYNTH_THUMBNAIL_SIZE,
};
