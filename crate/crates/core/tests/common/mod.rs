//! Oracles shared by the integration tests and the acceptance target.
#![allow(dead_code)]

pub mod solver;
pub mod variance;
