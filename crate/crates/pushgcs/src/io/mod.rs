//! File formats and reports.

pub mod batch;
pub mod planfile;
pub mod sdpa;
pub mod stats;
pub mod svg;
pub mod taskfile;
