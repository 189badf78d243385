pub mod atlas;
pub mod cli;
pub mod cohort;
pub mod control;
pub mod error;
pub mod geneassoc;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod mediation;
pub mod model;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod transport;

pub use error::{MltError, Result};
