pub mod annotations;
pub mod classifier;
pub mod geometry;
pub mod pipeline;
pub mod raster;
pub mod segpatch;
pub mod tiling;
pub mod synthgen;
