//! Perception and teleoperation building blocks for VR-based remote
//! manipulation from a floating base: SE(3) geometry and a flat scene graph,
//! multi-marker pose tracking fused with visual-inertial ego-motion,
//! point-cloud registration with a pose-graph backend, an object pose
//! pipeline with detector-driven masking, pool-based Bayesian active
//! learning, and time-domain passivity control for delayed bilateral
//! teleoperation.
//!
//! Everything is deterministic for a fixed seed; the [`scenarios`] module
//! generates synthetic ground-truth streams that the benchmark harness runs
//! the estimators against.

pub mod active_learning;
pub mod geometry;
pub mod marker;
pub mod pipeline;
pub mod pose_graph;
pub mod registration;
pub mod scenarios;
pub mod tdpa;
