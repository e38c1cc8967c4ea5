pub mod error;
pub mod features;
pub mod geometry;
pub mod prior;
pub mod raster;

pub use error::{Error, Result};
pub mod frame;
pub mod solver;
pub mod refocus;
pub mod synth;
pub mod pipeline;
