//! Dataset ingestion, preprocessing and stream construction.

mod idx;
mod image;
mod patch;
mod sample;
mod stream;

pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_pair, parse_idx_images, parse_idx_labels,
    read_maybe_gzip, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use image::{to_grayscale, ClassId, ColorImage, Image, LUMA_WEIGHTS};
pub use patch::{
    extract_patches, normalize_in_place, normalize_patch, Patch, PatchGrid, NORMALIZE_EPS,
};
pub use sample::{
    sample_disjoint_sets, sample_labeled_set, sample_test_set, LabeledExample, LabeledSet,
};
pub use stream::{build_stream, class_pools, Stream, StreamMode, StreamSpec};
