//! Per-shot feature extraction: temporal pooling of keyframe activations,
//! quantity of speech, time features, concept grouping and the semantic
//! concept vectors.

mod assemble;
mod pooling;
mod semantic;
mod spectral;

pub use assemble::{assemble_feature_vector, assemble_video_features, check_corpus_layout, ShotBlocks};
pub use pooling::{quantity_of_speech, temporal_max_pool, time_features};
pub use semantic::{
    gaussian_weight, term_shot_probability, textual_semantic_vector, validate_terms, visual_semantic_vector,
    SemanticConfig, SemanticMode, TranscriptTerm,
};
pub use spectral::{kmeans, spectral_cluster_terms, symmetric_eigen, ConceptGroups, KMeansResult, SymmetricEigen, TermEmbeddings};
