//! Session service and command line for the cargame model.

pub mod cli;
pub mod service;
