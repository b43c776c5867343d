//! Economics of peer-to-peer wireless relaying.
//!
//! [`model`] holds the shared symbols, [`regimes`] the closed-form expected
//! utilities for each market regime, [`equilibrium`] the entry and club
//! solvers, and [`sim`] a lattice Monte Carlo that checks the closed forms
//! from first principles.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod quadrature;
pub mod regimes;
pub mod sim;

pub use error::{Error, ParamError, Result};
pub use model::{
    channels_per_cell, path_loss, shannon_capacity, CostFunction, ModelParams, RadioParams,
};
pub use regimes::{
    ConnectionChoice, ConnectionKind, CostMode, Regime, RegimeUtilities, RelayDecision,
};
