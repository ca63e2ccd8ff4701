//! Offline PCA embedding with KNN classification: a simple reference point
//! that, unlike the streaming learner, sees all data seen so far at once.

mod knn;
mod pca;

pub use knn::{k_nearest, knn_classify, DEFAULT_K};
pub use pca::{
    components_for_variance, pca_fit, pca_transform, PcaModel, PcaOptions, DEFAULT_VARIANCE_TARGET,
};

/// Component caps used with the three benchmark datasets.
pub const MNIST_PCA_CAP: usize = 300;
pub const EMNIST_PCA_CAP: usize = 150;
pub const SVHN_PCA_CAP: usize = 50;
