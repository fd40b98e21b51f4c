//! Exit-time planning for automated vehicle platoons at an on-ramp merge.
//!
//! Platoons arrive on a main road and an on-ramp, each ending at a shared
//! conflict point. Every platoon leader cruises for the worst-case
//! communication delay, pulls an information snapshot from a passive
//! coordinator, then commits to the earliest exit time whose closed-form
//! cubic trajectory respects speed and control bounds, rear-end safety and
//! the lateral time headway at the conflict point. Followers replicate the
//! leader's control, which keeps the platoon rigid.
//!
//! The crate also carries a fixed-step microscopic simulator, two
//! human-driven baselines built on the Intelligent Driver Model with a
//! priority-yield merge rule, fuel and travel-time metrics, and a thin
//! batch front end (`platoon-merge run`).
//!
//! ```
//! use platoon_merge::trajectory::{solve_boundary, BoundaryConditions};
//!
//! let traj = solve_boundary(&BoundaryConditions { t0: 0.0, p0: 0.0, v0: 16.0, tf: 35.0, pf: 560.0 })?;
//! let state = traj.eval(10.0)?;
//! assert!((state.p - 160.0).abs() < 1e-9);
//! # Ok::<(), platoon_merge::trajectory::TrajectoryError>(())
//! ```

// Negated comparisons let NaN fail validation checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cli;
pub mod coordinator;
pub mod engine;
pub mod follower;
pub mod metrics;
pub mod planner;
pub mod scenario;
pub mod trajectory;

pub use engine::{run, EngineOptions, FollowerIntegration, RunMode, SimError, SimRun};
pub use scenario::{ArrivalEvent, Road, ScenarioConfig, VehicleParams};
pub use trajectory::{FeasibleWindow, TrajectoryPolynomial};
