//! Trajectory coverage query engine.
//!
//! Indexes user trajectories in a two-level structure (a quadtree of nodes,
//! each node's trajectory list bucketed along a z-order curve) and answers
//! two query families over facility routes with a service radius `psi`:
//!
//! * top-k reverse range search: rank facilities by how much user demand
//!   they serve ([`query::top_k_facilities`]);
//! * maximum k-coverage: choose k facilities maximizing joint service
//!   ([`coverage::greedy_maxkcov`] and friends).
//!
//! A point-quadtree baseline ([`baseline`]) and pure linear scans provide
//! independent reference implementations used by the test suite and the
//! benchmark harness.

pub mod baseline;
pub mod coverage;
pub mod error;
pub mod geom;
pub mod ingest;
pub mod query;
pub mod service;
pub mod snapshot;
pub mod synth;
pub mod traj;
pub mod tree;
pub mod zorder;

pub use error::{Error, Result};
pub use geom::{dist, Point, Rect};
pub use service::{ServiceLedger, ServiceMode, ServiceParams};
pub use traj::{FacilityId, FacilityTrajectory, UserId, UserTrajectory};
pub use tree::{TreeConfig, TreeVariant, TQTree};
