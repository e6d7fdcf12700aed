//! Pipeline CLI library: configuration, artifact formats, the seven stages,
//! and the orchestrator behind the `moodpulse` binary.
//!
//! The binary in `main.rs` is a thin argument parser over these modules;
//! integration tests drive the same entry points directly. Stage artifacts
//! on disk are the only contract between stages, so a run can be resumed,
//! repeated, or partially replaced (for example, injecting externally
//! produced labels at the `label` boundary) without touching the code.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod stages;
