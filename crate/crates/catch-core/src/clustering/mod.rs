//! Preference-enhanced topic clustering: a trained preference reward model
//! modulates semantic distances, and a four-stage algorithm repairs the
//! purely semantic anchor clustering against the preference signals.

mod prm;
mod reduce;
mod sp;
mod spectral;
mod stages;

pub use prm::{pair_features, prm_score, train_prm, train_prm_on_vectors, PrmConfig, PrmModel};
pub use reduce::{fit_reducer, reduce_dims, Reducer, ReductionMethod};
pub use sp::{compute_sp_matrix, sp_distance, SpMatrix, SpMode, INVERTED_FLOOR};
pub use spectral::spectral_cluster;
pub use stages::{
    detect_conflicts, median_conflict_distance, preference_enhanced_cluster, reassign_subclusters,
    recluster_conflicts, Aggregation, ClusterAssignment, ClusterConfig, ClusterOutcome,
    ConflictSet, Stage, TopicItem,
};
