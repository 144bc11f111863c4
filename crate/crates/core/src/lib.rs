//! Metamorphic testing of image-processing systems with a fitted voxel
//! radiance field as the test-image generator.

pub mod cli;
pub mod dataset;
pub mod field;
pub mod geometry;
pub mod image;
pub mod imqual;
pub mod mt;
pub mod mutate;
pub mod rng;
pub mod sutmetrics;
pub mod suts;
pub mod synthscene;
