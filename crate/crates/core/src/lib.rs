//! Discrete-event simulator for optical burst switching networks with
//! edge-node burst assembly and link-failure restoration.

pub mod assembly;
pub mod cli;
pub mod engine;
pub mod model;
pub mod protocol;
pub mod routing;
