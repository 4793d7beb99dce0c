//! Open two-level system coupled to a hierarchy of bosonic reservoirs.
//!
//! The system talks to a reservoir RI whose modes are themselves damped by a
//! second reservoir RII at a different temperature. The crate provides the
//! non-stationary bath correlations, exact and approximate decay rates, the
//! Bloch-ball description of the dynamics, a prethermalization detector,
//! two-sided heat fluxes and a finite-mode oracle for the environment.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod dynamics;
pub mod env_model;
pub mod error;
pub mod heatflux;
pub mod ode;
pub mod oracle;
pub mod pretherm;
pub mod quad;
pub mod special;
pub mod validate;

pub use env_model::{BathSpec, CompositeEnvSpec, SpectralParams, SystemSpec};
pub use error::{Error, Result};
