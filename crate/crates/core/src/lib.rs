//! Particle swarm optimization with a quadratic surrogate attractor.
//!
//! The standard global-best attractor is replaced by the minimizer of a
//! quadratic interpolating the best points seen so far, whenever that
//! minimizer actually improves on the global best. The crate also ships the
//! benchmark landscapes and a seeded multi-run harness used to compare the
//! two variants.

pub mod archive;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod linalg;
pub mod objectives;
pub mod surrogate;
pub mod swarm;

pub use archive::{Archive, ArchiveEntry, ArchiveError, Sense};
pub use objectives::{Benchmark, BenchmarkKind, Bounds, Objective};
pub use surrogate::{required_points, surrogate_attractor, FallbackReason, QuadraticModel, SurrogateResult};
pub use swarm::{run, DrawMode, RunRecord, Swarm, SwarmConfig, SwarmError, SwarmParams, Variant};
