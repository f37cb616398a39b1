//! Narrative-aware editing of serialized drama: understand a series, then
//! cut highlight-driven short videos from it.

pub mod editing;
pub mod interval;
pub mod io;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod sample;
pub mod understanding;
