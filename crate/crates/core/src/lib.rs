//! Robust divergence angle for an inter-satellite laser link whose receiver
//! drifts away from the beam axis between acquisitions.
//!
//! The robust angle maximizes the sum rate that is guaranteed for every
//! deviation sequence in a budgeted uncertainty set. It is found by a
//! cutting-plane loop that alternates two subproblems:
//!
//! - [`dmp`]: best angle against a finite pool of scenarios, via chord
//!   approximations and an exact max-min of lines on each angle interval;
//! - [`adversary`]: worst grid scenario for a fixed angle, as a
//!   resource-constrained shortest path over a layered graph.
//!
//! [`robust::solve_robust`] runs the loop. [`baselines`] provides the
//! smallest-angle and average-deviation reference angles, and
//! [`experiments`] drives the worst-case sweep, the Monte Carlo comparison
//! and the convergence trace behind the `robust-beam` binary.

pub mod adversary;
pub mod baselines;
pub mod beam;
pub mod config;
pub mod dmp;
pub mod error;
pub mod experiments;
pub mod robust;
pub mod special;
pub mod stats;
pub mod uncertainty;

pub use error::{Error, Result};
