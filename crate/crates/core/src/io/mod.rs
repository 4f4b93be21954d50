//! Configuration files and on-disk artefacts.

pub mod config;
pub mod csv;
pub mod meta;
pub mod report;
pub mod svg;
