//! Thinging-machine modeling: static models, event regions, behavioral
//! graphs, deterministic simulation, state-table import and the railcar
//! terminal protocol.

pub mod cli;
pub mod dot;
pub mod dsl;
pub mod dynamics;
pub mod model;
pub mod railcar;
pub mod sim;
pub mod table;
pub mod validate;
