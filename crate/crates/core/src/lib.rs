//! Analysis and simulation toolkit for slotted-time ad hoc networks whose
//! transmitters run on harvested energy.
//!
//! The crate covers four layers:
//!
//! * [`arrivals`] — per-slot energy-arrival distributions, their cumulant
//!   generating function and its nonzero root `r*(beta)`;
//! * [`battery`] — the battery-level recursion, Monte Carlo time averages,
//!   and the exponential tail/overshoot/transmission-probability bounds;
//! * [`markov`] — exact finite-capacity analysis for integer arrivals via
//!   the battery-level Markov chain;
//! * [`geometry`] and [`throughput`] — Poisson-field interference, outage
//!   calibration, the admissibility region, and the optimal-power rule for
//!   the spatial throughput.
//!
//! Everything numeric is generic over the [`scalar::Scalar`] floating type;
//! public types default the scalar to `f64`, so `ArrivalModel`,
//! `BatteryConfig`, `ThroughputSolution` and friends are `f64`-typed unless
//! spelled otherwise.

// Validation deliberately writes `!(x > 0)` so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrivals;
pub mod battery;
pub mod geometry;
pub mod markov;
pub mod numerics;
pub mod scalar;
pub mod throughput;

pub use arrivals::{ArrivalError, ArrivalModel, ArrivalSampler, CumulantRoot, RootSign};
pub use battery::{
    simulate, simulate_replicated, BatteryConfig, BatteryError, BatteryStats, Capacity,
};
pub use geometry::{
    CalibrationRow, Estimate, GeometryError, NetworkParams, NominalDensityTable, Point,
};
pub use markov::{MarkovBattery, MarkovError};
pub use scalar::Scalar;
pub use throughput::{
    PowerStar, Regime, ThroughputError, ThroughputSolution,
};
