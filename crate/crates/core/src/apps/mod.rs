//! Experiment pipelines built on the cube layer.

pub mod maxcut;
pub mod stability;

pub use maxcut::{bqp_brute_force, bqp_lower_bound, bqp_to_cube, cut_claim_instance, maxcut_bound, BqpBound, BqpCube, CutBound, CutMethod, WeightedGraph};
pub use stability::{stability_feasible, stability_radius, StabilityCheck, StabilityReport, UncertainLinearSystem};
