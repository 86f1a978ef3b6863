//! Deterministic embodied question answering in procedurally generated 2.5D
//! grid worlds: occupancy fusion, doorway-frontier exploration, relevance
//! scoring, bounded visual memory, answering, and benchmark metrics.

pub mod client;
pub mod error;
pub mod explorer;
pub mod frontier;
pub mod gen;
pub mod harness;
pub mod memory;
pub mod metrics;
pub mod occupancy;
pub mod relevance;
pub mod scene;

pub use error::{Error, Result};
