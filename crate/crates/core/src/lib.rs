//! Day-ahead selection of the chilled-water storage charging temperature.
//!
//! The crate chains four sub-models into one decision loop:
//!
//! * [`humidity`] forecasts indoor relative humidity with a two-model boosted
//!   ensemble rolled out recursively,
//! * [`rcload`] predicts room temperature and the required cooling load with a
//!   4R2C grey-box network,
//! * [`coil`] predicts cooling-coil effectiveness (ε-NTU plus a learned
//!   residual) and inverts it for the warmest chilled water that still meets
//!   the load,
//! * [`tes`] tracks the storage tank mean temperature and maps it to outlet
//!   temperatures at the peak-load step and at the end of operation.
//!
//! [`optimizer`] evaluates candidate charging temperatures through the chain
//! and returns the warmest feasible one. [`ingest`] reads building automation
//! data and generates the synthetic season used for tests and demos,
//! [`metrics`] provides the validation statistics and [`workflow`] wires it
//! all into the command-line stages.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coil;
pub mod error;
pub mod exec;
pub mod humidity;
pub mod ingest;
pub mod metrics;
pub mod nelder_mead;
pub mod optimizer;
pub mod psychro;
pub mod rcload;
pub mod regressor;
pub mod tes;
pub mod workflow;

pub use error::{Error, Result};
pub use exec::Execution;

/// Simulation timestep used throughout (s).
pub const TIMESTEP_S: f64 = 300.0;

/// Timesteps per day at [`TIMESTEP_S`].
pub const STEPS_PER_DAY: usize = 288;

/// Air density used to convert volumetric airflow to mass flow (kg/m³).
pub const AIR_DENSITY: f64 = 1.2;

/// Convert an airflow in m³/h to kg/s.
pub fn cmh_to_kg_s(cmh: f64) -> f64 {
    cmh * AIR_DENSITY / 3600.0
}
