//! Power side-channel trace analysis: acquisition parsing, cleaning and
//! calibration, statistical and spectral features, univariate feature
//! selection, scalers, nearest-neighbour and random-forest classifiers with
//! confidence-threshold rejection, evaluation, and a seeded synthetic trace
//! generator.
//!
//! ```no_run
//! use portscope::{features::FeatureConfig, pipeline, trace_io};
//!
//! # fn main() -> portscope::Result<()> {
//! let model = portscope::persist::read_model("model.txt".as_ref())?;
//! let trace = trace_io::read_trace("capture.txt".as_ref())?;
//! let p = pipeline::predict_trace(&model, &trace, &FeatureConfig::default())?;
//! println!("{} ({:.2})", p.label_str(), p.confidence);
//! # Ok(())
//! # }
//! ```

pub mod classifiers;
pub mod cli;
pub mod csvio;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod par;
pub mod persist;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod scaling;
pub mod selection;
pub mod synth;
pub mod trace_io;

pub use error::{Error, Result};
