pub mod distfit;
pub mod error;
pub mod fitness;
pub mod gof;
pub mod ingest;
pub mod numeric;
pub mod pipeline;
pub mod presets;
pub mod ranking;
pub mod rca;
pub mod synth;

pub use error::{Error, Result};
