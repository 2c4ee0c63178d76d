//! Procedure timelines, aggregate surgical signatures, the thirty-feature
//! parameterization and its discriminant projection, and catalog filtering.

pub mod features;
pub mod filter;
pub mod lda;
pub mod sequence;
pub mod signature;

pub use features::{
    feature_matrix, featurize, featurize_cohort, normalize_tool_features, read_features_csv,
    transition_probabilities, write_features_csv, zscore, FeatureVector, Transitions, ZScore,
    FEATURE_NAMES, NUM_FEATURES, TRANSITIONS,
};
pub use filter::{filter_videos, load_catalog, read_catalog, CatalogEntry, FilterRule, TitlePredicate};
pub use lda::{lda_fit, lda_project, scatter_matrices, separation, Separation, write_projection_csv, write_weights_csv, LdaModel, LDA_COMPONENTS};
pub use sequence::{
    excise_background, excise_background_aligned, procedure_sequences, quartile_actions,
    quartile_ranges, quartile_tools, resample_stream, ActionSequence, Quartiles, ToolSequence,
    DEFAULT_RESOLUTION_S,
};
pub use signature::{build_signature, moving_average, write_signature_csv, Curves, SignatureOptions, SurgicalSignature};
