pub mod action;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod memory;
pub mod perception;
pub mod pipeline;
pub mod prompting;
pub(crate) mod raster;
pub mod reasoning;
pub mod simulator;
pub mod sketchmap;
pub mod topomap;
