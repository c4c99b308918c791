//! K-Means clustering of strain concentration features and the voxel to
//! cluster map with its adaptivity hierarchy.

mod features;
mod kmeans;
mod map;

pub use features::FeatureDataset;
pub use kmeans::{
    kmeans_lloyd, kmeans_seed_plusplus, KMeansOptions, KMeansResult, CONVERGENCE_TOL,
    MAX_ITERATIONS,
};
pub use map::{base_clustering, ClusterMap, ClusterRecord};
