pub mod attention;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod network;
pub mod rir;
pub mod synth;
pub mod trainer;
pub mod wav;

pub use error::{Error, ErrorClass, Result};
