//! Conflict-graph abstractions for scheduling links under the SINR model.
//!
//! Links are pairs of points in a metric space with a path-loss exponent
//! `alpha` above the doubling dimension `m`. A threshold function `f` turns
//! an instance into a conflict graph `G_f`; colorings and independent sets of
//! that graph are then certified against the physical SINR constraint.
//!
//! Modules:
//! - [`model`]: instances, metrics, JSON I/O.
//! - [`conflict`]: threshold functions, `f*`, conflict-graph construction.
//! - [`graphalg`]: coloring, clique covers, local-ratio independent sets, exact oracles.
//! - [`sinr`]: power assignments and feasibility checks.
//! - [`scheduling`]: TDMA schedules, weighted capacity, online arrivals, multi-channel expansion.
//! - [`generators`]: random and extremal instance families.
//! - [`harness`]: calibration, experiments and reports.

// Negated float comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conflict;
pub mod error;
pub mod generators;
pub mod graphalg;
pub mod harness;
pub mod model;
mod nonfinite;
pub mod par;
pub mod scheduling;
pub mod sinr;

pub use error::{Error, Result};
