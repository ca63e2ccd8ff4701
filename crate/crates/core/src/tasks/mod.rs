//! Evaluation heads over a frozen hierarchy: label-association voting and
//! embedding-based clustering.
//!
//! The heads work from [`ImageEncoding`]s (nearest evaluation centroid per
//! patch, and optionally the closest patch per centroid), so an image can be
//! encoded once and reused by several evaluations of the same snapshot.

mod associate;
mod cluster;
mod embed;
mod encode;

pub use associate::{
    associations_from_encodings, classify, classify_encoding, compute_associations, Associations,
    ClassAssociation, Classification, LayerAssociations,
};
pub use cluster::{cluster_accuracy, kmeans, KMeansOptions, KMeansResult};
pub use embed::{embed, embedding_from_encoding, write_embeddings_csv, EmbeddingVector};
pub use encode::{
    encode_image, patch_affinity, EvalContext, EvalLayer, ImageEncoding, LayerEncoding,
};
