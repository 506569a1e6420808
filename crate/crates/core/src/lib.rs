//! Signage-aware exploration of unknown shopping malls.
//!
//! The crate simulates a mobile robot in a 2D grid world that searches for
//! shop signage. A schematic venue map (landmark names and rough positions)
//! provides a topological route; detected signs are fused across views,
//! matched against a prior feature pool and used to align the online map with
//! the venue map. An exploration/exploitation planner then trades off
//! frontier exploration against approaching signs for better recognition.
//!
//! Module overview:
//!
//! - [`venue_map`]: venue-map loading, topological graph, landmark route.
//! - [`world`]: ground-truth world, occupancy mapping, raycasting, camera model.
//! - [`perception`]: feature pool, multi-view fusion bank, retrieval.
//! - [`alignment`]: venue-map to world similarity transform.
//! - [`planner`]: frontiers, viewpoints, utilities, A*, the exploration loop.
//! - [`harness`]: scenarios, metrics, ablations and artifacts.

pub mod alignment;
pub mod batch;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod planner;
pub mod venue_map;
pub mod world;

pub use error::{Error, Result};
pub use geometry::Vec2;
