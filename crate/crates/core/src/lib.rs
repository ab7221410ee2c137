pub mod cli;
pub mod config;
pub mod diffcore;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod milbags;
pub mod network;
pub mod ordinal;
pub mod predict;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
