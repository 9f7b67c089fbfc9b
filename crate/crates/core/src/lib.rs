//! Lattice behavioral trajectory planning for a self-driving ego vehicle.
//!
//! A synthetic multi-lane road is discretized into layers ahead of the ego.
//! A PPO-trained Gaussian policy proposes a short trajectory of lateral
//! positions and speeds, a safety projection snaps unsafe proposals onto the
//! collision-free lattice, and an exhaustive search over the same lattice
//! serves as the baseline planner.

pub mod campaign;
pub mod config;
pub mod cost;
pub mod env;
pub mod geometry;
pub mod policy;
pub mod safety;
pub mod search;
pub mod trajectory;
