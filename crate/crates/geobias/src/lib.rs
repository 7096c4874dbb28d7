//! File formats, model clients and the staged pipeline behind the `geobias`
//! command line.

pub mod config;
pub mod error;
pub mod eval;
pub mod gazetteer;
pub mod llm;
pub mod maps;
pub mod pipeline;
pub mod raster_io;
pub mod records;

pub use error::{Error, Result};
