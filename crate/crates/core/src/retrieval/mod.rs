//! Query-driven story ranking and aesthetic thumbnail selection.

mod hypercolumn;
mod query;
mod rank;

pub use hypercolumn::{
    bilinear_resize, build_hypercolumns, center_prior, thumbnail_features, HypercolumnConfig, Map2,
    ThumbnailActivations, ThumbnailFeatures, N_GROUPS,
};
pub use query::{
    match_query, rank_stories, term_presence, Query, RankedStory, ScoredKeyframe, ShotEvidence, TermPresence,
    DEFAULT_ALPHA,
};
pub use rank::{aesthetic_score, rank_objective, swapped_pairs, train_rank_model, PreferencePair, RankConfig, RankModel};
